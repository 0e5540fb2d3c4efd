"""Monte Carlo point estimates with replication-based standard errors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EstimateWithError:
    """Point estimate, its standard error and the number of replications.

    ``std_error`` is ``nan`` when fewer than two replications back it.
    """

    mean: float
    std_error: float
    n: int

    def z_score(self, reference: float, reference_error: float = 0.0) -> float:
        """Standardised distance to ``reference`` using the combined error."""
        se = float(np.hypot(self.std_error, reference_error))
        if se == 0.0:
            return 0.0 if self.mean == reference else float("inf")
        return float((self.mean - reference) / se)

    def as_dict(self) -> dict:
        return {"mean": float(self.mean), "std_error": float(self.std_error), "n": int(self.n)}


def ratio_estimate(numerators, denominators) -> EstimateWithError:
    """Pooled ratio sum(num)/sum(den) with a delta-method error over replications.

    Each entry of ``numerators``/``denominators`` is the total of one
    independent replication.
    """
    num = np.asarray(numerators, dtype=float)
    den = np.asarray(denominators, dtype=float)
    n = num.size
    total_den = den.sum()
    if total_den <= 0:
        raise ValueError("denominator total must be positive")
    ratio = num.sum() / total_den
    if n < 2:
        return EstimateWithError(float(ratio), float("nan"), n)
    resid = num - ratio * den
    se = np.sqrt(np.sum(resid**2) / (n * (n - 1))) / den.mean()
    return EstimateWithError(float(ratio), float(se), n)


def mean_estimate(values) -> EstimateWithError:
    """Sample mean with the usual standard error."""
    v = np.asarray(values, dtype=float)
    n = v.size
    if n < 2:
        return EstimateWithError(float(v.mean()) if n else float("nan"), float("nan"), n)
    return EstimateWithError(float(v.mean()), float(v.std(ddof=1) / np.sqrt(n)), n)
