"""Quadrature values of conditional cycle quantities for one or two components.

Notation for a cycle started from ``(x, w)``: inspections at
``T_0 = 0, T_1 = w, T_k = w + (k-1)*T``; for component ``j``,
``A_j = sigma_{M_j - x_j}`` (preventive crossing), ``B_j = sigma_{L_j - x_j}``
(failure) and ``D_j = B_j - A_j``; ``Y`` is the exponential failure time.
The cycle ends in ``(T_{k-1}, T_k]`` when the first of ``min A`` and ``Y``
falls there.

Every term is assembled from

``G_j(w1, w2, w3) = int_{w1}^{w2} f_{A_j}(u) Fbar_{D_j}(w3 - u) du``

through ``H_j(a, w) = P(A_j > a, B_j > w) = Fbar_{A_j}(w) + G_j(a, w, w)``,
the literal reading of ``G_j(T_{k-1}, inf, w)``. ``A_j`` and ``D_j`` are
treated as independent, ``f_{A_j}`` comes from the closed-form passage law
and ``Fbar_{D_j}`` from a fine-grid path sample.

For each inspection interval ``H_j(a, .)`` is tabulated by composite
Gauss-Legendre convolution and interpolated with a cubic spline; the outer
integrals are adaptive (``scipy.integrate.quad``) and the ``-d/dw`` factors
are central differences of the product terms.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline, PchipInterpolator

from .errors import ConfigError, NumericalError, UnsupportedDimensionError
from .gamma import first_passage_pdf, first_passage_sf, sample_sigma_diff
from .model import ComponentSpec, PolicyVector, SystemSpec

__all__ = [
    "ComponentLaw",
    "CycleOracle",
    "CycleTotals",
    "StartState",
    "cycle_oracle",
    "expected_cycle_length",
    "expected_downtime",
    "g_integral",
    "prob_corrective",
    "prob_nondegrading_repair",
    "prob_preventive",
]

MAX_COMPONENTS = 2
K_MAX = 10_000
TRUNCATION_MASS = 1e-9

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


@dataclass(frozen=True)
class StartState:
    """Embedded-chain state: component levels and time to the next inspection."""

    levels: tuple[float, ...]
    time_to_inspection: float

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))
        if not self.time_to_inspection > 0:
            raise ConfigError("time_to_inspection must be positive")
        if any(v < 0 for v in self.levels):
            raise ConfigError("levels must be non-negative")

    def check(self, s: SystemSpec, p: PolicyVector) -> "StartState":
        if len(self.levels) != s.m:
            raise ConfigError(f"expected {s.m} levels, got {len(self.levels)}")
        if not self.time_to_inspection <= p.inspection_period:
            raise ConfigError("time_to_inspection must not exceed T")
        for i, (x, M) in enumerate(zip(self.levels, p.preventive_thresholds)):
            if not 0 <= x < M:
                raise ConfigError(f"level x[{i}]={x} outside [0, M={M})")
        return self


class ComponentLaw:
    """Passage laws of one component from level ``x``.

    Parameters
    ----------
    c : ComponentSpec
    M : float
        Preventive threshold.
    x : float
        Starting level, ``0 <= x < M``.
    effort : int
        Number of sampled paths behind ``Fbar_D``.
    rng : numpy.random.Generator
    grid_step : float
        Path grid used for the ``D`` sample.
    """

    def __init__(self, c: ComponentSpec, M: float, x: float, effort: int,
                 rng: np.random.Generator, grid_step: float = 0.002):
        if not 0 <= x < M <= c.failure_threshold:
            raise ConfigError("need 0 <= x < M <= L")
        self.c = c
        self.level_m = M - x
        self.level_l = c.failure_threshold - x
        self._knots = None
        if math.isinf(self.level_l):
            self._mode = "never"
        elif self.level_l <= self.level_m:
            self._mode = "instant"
        else:
            self._mode = "sampled"
            if effort < 100:
                raise ConfigError("effort below 100 samples is statistically meaningless")
            d = sample_sigma_diff(c.gamma, self.level_m, self.level_l, int(effort), rng,
                                  grid_step=grid_step)
            d = np.sort(d)
            # empirical survival on coarser knots, joined by a monotone C1 spline
            knot_step = max(5 * grid_step, 0.01)
            t = np.arange(int(math.ceil(d[-1] / knot_step)) + 2) * knot_step
            vals = 1.0 - np.searchsorted(d, t, side="right") / d.size
            self._knots = t
            self._tmax = t[-1]
            self._spline = PchipInterpolator(t, vals, extrapolate=False)

    def sf_A(self, t):
        return first_passage_sf(self.c.gamma, self.level_m, np.maximum(t, 0.0))

    def pdf_A(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        pos = t > 0
        if np.any(pos):
            out[pos] = first_passage_pdf(self.c.gamma, self.level_m, t[pos])
        return out if out.ndim else float(out)

    def sf_D(self, t):
        """``P(D > t)``; equals 1 for ``t < 0``."""
        t = np.asarray(t, dtype=float)
        if self._mode == "never":
            out = np.ones(t.shape)
        elif self._mode == "instant":
            out = np.where(t < 0, 1.0, 0.0)
        else:
            inside = np.clip(t, 0.0, self._tmax)
            out = np.where(t < 0, 1.0, np.where(t > self._tmax, 0.0, self._spline(inside)))
        return out if out.ndim else float(out)

    def g(self, w1: float, w2: float, w3: float, panel: float = 0.05) -> float:
        """Composite Gauss-Legendre value of ``G(w1, w2, w3)``."""
        return float(self._g_many(w1, np.array([w2]), np.array([w3]), panel)[0])

    def _g_many(self, w1, w2, w3, panel=0.05):
        w2 = np.asarray(w2, dtype=float)
        w3 = np.asarray(w3, dtype=float)
        out = np.zeros(w2.shape)
        for idx in np.ndindex(w2.shape):
            lo, hi = w1, w2[idx]
            if hi <= lo:
                continue
            n_pan = max(1, int(math.ceil((hi - lo) / panel)))
            edges = np.linspace(lo, hi, n_pan + 1)
            half = 0.5 * (edges[1:] - edges[:-1])
            mid = 0.5 * (edges[1:] + edges[:-1])
            u = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
            wts = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
            out[idx] = np.sum(wts * self.pdf_A(u) * self.sf_D(w3[idx] - u))
        return out

    def h_table(self, a: float, b: float, step: float = 0.01) -> CubicSpline:
        """Spline of ``H(a, w) = P(A > a, B > w)`` for ``w`` in ``[a, b]``."""
        n = max(64, int(math.ceil((b - a) / step)) + 1)
        w = np.linspace(a, b, n)
        vals = self.sf_A(w) + self._g_many(a, w, w)
        return CubicSpline(w, vals)


def g_integral(
    c: ComponentSpec,
    M: float,
    x: float,
    w1: float,
    w2: float,
    w3: float,
    law: ComponentLaw | None = None,
    effort: int = 200_000,
    rng: np.random.Generator | None = None,
    grid_step: float = 0.002,
) -> float:
    """``int_{w1}^{w2} f_{sigma_{M-x}}(u) Fbar_{sigma_{L-x}-sigma_{M-x}}(w3-u) du``.

    Adaptive quadrature; ``Fbar`` is the path-sampled survival held by
    ``law`` (built on demand).

    Raises
    ------
    NumericalError
        If the quadrature does not converge.
    """
    if not w1 < w2:
        if w1 == w2:
            return 0.0
        raise ValueError("need w1 < w2")
    if law is None:
        law = ComponentLaw(c, M, x, effort, rng or np.random.default_rng(), grid_step)

    def f(u):
        return law.pdf_A(u) * law.sf_D(w3 - u)

    pts = [w3] if w1 < w3 < w2 else None
    return _checked_quad(f, w1, w2, f"G on [{w1}, {w2}] with w3={w3}", points=pts,
                         epsabs=1e-11, epsrel=1e-9)


def _quad(f, lo, hi, what):
    if hi <= lo:
        return 0.0
    return _checked_quad(f, lo, hi, f"{what} on [{lo}, {hi}]", epsabs=1e-10, epsrel=1e-8)


def _checked_quad(f, lo, hi, label, points=None, epsabs=1e-10, epsrel=1e-8):
    """``quad`` that tolerates roundoff notices but not non-convergence."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        val, err, info = integrate.quad(
            f, lo, hi, points=points, limit=400, epsabs=epsabs, epsrel=epsrel, full_output=1
        )[:3]
    for w in caught:
        msg = str(w.message)
        if "roundoff" in msg and err <= max(1e-7, 1e-5 * abs(val)):
            continue
        raise NumericalError(
            f"quadrature of {label} did not converge: {msg.splitlines()[0]} "
            f"(estimate {val:.6g}, error {err:.2g}, evaluations {info['neval']})"
        )
    return float(val)


@dataclass
class _Interval:
    """Per-interval tables and product helpers."""

    a: float
    b: float
    tau: float
    lam: float
    tables: list
    laws: list
    h: float

    def ws(self, w):
        return min(w + self.tau, self.b)

    def Q(self, w):
        return math.exp(-self.lam * w)

    def P(self, j, w):
        return float(self.tables[j](w))

    def prod(self, w, skip=None, with_y=False):
        out = self.Q(w) if with_y else 1.0
        for j in range(len(self.tables)):
            if j != skip:
                out *= self.P(j, w)
        return out

    def neg_deriv(self, fn, w):
        h = self.h
        return -(fn(w + h) - fn(w - h)) / (2 * h)

    def split(self):
        """Breakpoint where ``w* = min(w + tau, T_k)`` changes branch."""
        c = self.b - self.tau
        return [c] if self.a < c < self.b else []


@dataclass(frozen=True)
class CycleTotals:
    """Cycle-level quantities summed over inspection intervals."""

    prob_corrective: tuple[float, ...]
    prob_preventive: tuple[float, ...]
    prob_nondegrading_repair: float
    downtime: tuple[float, ...]
    downtime_nondegrading: float
    cycle_length: float
    end_probability: float
    intervals: int

    def as_dict(self) -> dict:
        out = {}
        for i, v in enumerate(self.prob_corrective):
            out[f"P_corrective[{i + 1}]"] = v
        for i, v in enumerate(self.prob_preventive):
            out[f"P_preventive[{i + 1}]"] = v
        out["P_nondegrading_repair"] = self.prob_nondegrading_repair
        for i, v in enumerate(self.downtime):
            out[f"downtime[{i + 1}]"] = v
        out["downtime_nondegrading"] = self.downtime_nondegrading
        out["cycle_length"] = self.cycle_length
        return out


class CycleOracle:
    """Conditional cycle quantities given a start state, for ``m <= 2``."""

    def __init__(self, s: SystemSpec, p: PolicyVector, st: StartState,
                 effort: int = 400_000, seed: int = 0, grid_step: float = 0.002,
                 table_step: float = 0.01):
        if s.m > MAX_COMPONENTS:
            raise UnsupportedDimensionError(
                f"quadrature oracle supports at most {MAX_COMPONENTS} components, got {s.m}"
            )
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            p.validate(s)
        st.check(s, p)
        self.s, self.p, self.st = s, p, st
        rngs = [np.random.default_rng(q) for q in np.random.SeedSequence(seed).spawn(s.m)]
        self.laws = [
            ComponentLaw(c, M, x, effort, rng, grid_step)
            for c, M, x, rng in zip(s.components, p.preventive_thresholds, st.levels, rngs)
        ]
        self.table_step = table_step
        self._cache: dict[int, _Interval] = {}

    def inspection_time(self, k: int) -> float:
        if k < 0:
            raise ValueError("k must be non-negative")
        if k == 0:
            return 0.0
        return self.st.time_to_inspection + (k - 1) * self.p.inspection_period

    def _interval(self, k: int) -> _Interval:
        if k < 1:
            raise ValueError("inspection index k starts at 1")
        if k not in self._cache:
            a, b = self.inspection_time(k - 1), self.inspection_time(k)
            tables = [law.h_table(a, b, self.table_step) for law in self.laws]
            self._cache = {k: _Interval(a, b, self.s.delay, self.s.nondegrading_rate, tables,
                                        self.laws, 1e-5 * self.p.inspection_period)}
        return self._cache[k]

    # ---- per-interval quantities -------------------------------------------------

    def prob_corrective(self, i: int, k: int) -> float:
        iv = self._interval(k)
        pts = iv.split()

        def c1(w):
            return iv.neg_deriv(lambda v: iv.P(i, v), w) * iv.prod(w, skip=i, with_y=True)

        def c2(w):
            others = iv.neg_deriv(lambda v: iv.prod(v, skip=i, with_y=True), w)
            return others * (iv.P(i, w) - iv.P(i, iv.ws(w)))

        return _clip01(_pieces(c1, iv.a, iv.b, [], "P(c,1)") + _pieces(c2, iv.a, iv.b, pts, "P(c,2)"))

    def prob_nondegrading_repair(self, k: int) -> float:
        iv = self._interval(k)
        lam = iv.lam
        if lam == 0:
            return 0.0

        def f1(w):
            return lam * iv.Q(w) * iv.prod(w)

        def f2(w):
            return iv.neg_deriv(iv.prod, w) * (iv.Q(w) - iv.Q(iv.ws(w)))

        return _clip01(_pieces(f1, iv.a, iv.b, [], "P(f,1)") + _pieces(f2, iv.a, iv.b, iv.split(), "P(f,2)"))

    def prob_preventive(self, i: int, k: int) -> float:
        iv = self._interval(k)
        law = self.laws[i]

        def band(t):
            return iv.P(i, t) - float(law.sf_A(t))

        def p1(w):
            return iv.neg_deriv(lambda v: iv.prod(v, skip=i, with_y=True), w) * band(iv.ws(w))

        p2 = band(iv.b) * iv.prod(iv.b, skip=i, with_y=True)
        return _clip01(_pieces(p1, iv.a, iv.b, iv.split(), "P(p,1)") + p2)

    def expected_downtime(self, k: int) -> tuple[float, list[float]]:
        iv = self._interval(k)
        lam = iv.lam
        pts = iv.split()

        def y_window(w):
            d = iv.ws(w) - w
            if lam == 0:
                return 0.0
            return math.exp(-lam * w) * (d + math.expm1(-lam * d) / lam)

        def n1(w):
            return lam * iv.Q(w) * iv.prod(w) * (iv.ws(w) - w)

        def n2(w):
            return iv.neg_deriv(iv.prod, w) * y_window(w)

        d_nm = _pieces(n1, iv.a, iv.b, pts, "D_nm,1") + _pieces(n2, iv.a, iv.b, pts, "D_nm,2")
        per = []
        for i in range(self.s.m):
            anti = iv.tables[i].antiderivative()

            def d1(w, i=i):
                return iv.neg_deriv(lambda v: iv.P(i, v), w) * iv.prod(w, skip=i, with_y=True) * (iv.ws(w) - w)

            def d2(w, i=i, anti=anti):
                ws = iv.ws(w)
                wait = (ws - w) * iv.P(i, w) - (float(anti(ws)) - float(anti(w)))
                return iv.neg_deriv(lambda v: iv.prod(v, skip=i, with_y=True), w) * wait

            per.append(max(0.0, _pieces(d1, iv.a, iv.b, pts, "D_i,1") + _pieces(d2, iv.a, iv.b, pts, "D_i,2")))
        return max(0.0, d_nm), per

    def cycle_length_terms(self, k: int) -> tuple[list[float], list[float]]:
        """Five-term split of ``E[O; cycle ends in (T_{k-1}, T_k]]``.

        Returns the expectations and the matching event probabilities:
        no failure before ``T_k``; non-degrading failure with the delay
        ending before / after ``T_k``; degrading failure with the delay
        ending before / after ``T_k``.
        """
        iv = self._interval(k)
        a, b, tau, lam = iv.a, iv.b, iv.tau, iv.lam
        c = min(max(a, b - tau), b)
        alive_b = iv.Q(b) * math.prod(float(law.sf_A(b)) for law in self.laws)
        p1 = max(0.0, iv.prod(b, with_y=True) - alive_b)

        def y_first(w):
            return lam * iv.Q(w) * iv.prod(w)

        def deg_first(w):
            return iv.neg_deriv(iv.prod, w) * iv.Q(w)

        p2 = _quad(y_first, a, c, "E[O],2") if lam > 0 else 0.0
        p3 = _quad(y_first, c, b, "E[O],3") if lam > 0 else 0.0
        p4 = _quad(deg_first, a, c, "E[O],4")
        p5 = _quad(deg_first, c, b, "E[O],5")
        e2 = _quad(lambda w: y_first(w) * (w + tau), a, c, "E[O],2") if lam > 0 else 0.0
        e4 = _quad(lambda w: deg_first(w) * (w + tau), a, c, "E[O],4")
        exps = [b * p1, e2, b * p3, e4, b * p5]
        return exps, [p1, p2, p3, p4, p5]

    def alive(self, t: float) -> float:
        """``P(min A > t, Y > t)``: no maintenance trigger by ``t``."""
        return math.exp(-self.s.nondegrading_rate * t) * math.prod(float(law.sf_A(t)) for law in self.laws)

    # ---- cycle totals ------------------------------------------------------------

    def totals(self, k_max: int = K_MAX, tol: float = TRUNCATION_MASS) -> CycleTotals:
        """Sum every quantity over ``k`` until the residual mass falls below ``tol``."""
        m = self.s.m
        pc = np.zeros(m)
        pp = np.zeros(m)
        dd = np.zeros(m)
        pf = dnm = length = end = 0.0
        k = 0
        while True:
            k += 1
            if k > k_max:
                raise NumericalError(f"k-sum not truncated within k_max={k_max} intervals")
            for i in range(m):
                pc[i] += self.prob_corrective(i, k)
                pp[i] += self.prob_preventive(i, k)
            pf += self.prob_nondegrading_repair(k)
            d_nm, per = self.expected_downtime(k)
            dnm += d_nm
            dd += per
            exps, probs = self.cycle_length_terms(k)
            length += sum(exps)
            end += sum(probs)
            if self.alive(self.inspection_time(k)) < tol:
                break
        return CycleTotals(tuple(pc), tuple(pp), pf, tuple(dd), dnm, length, end, k)


def _clip01(v: float) -> float:
    return float(min(1.0, max(0.0, v)))


def _pieces(f, lo, hi, pts, what):
    edges = [lo, *[q for q in pts if lo < q < hi], hi]
    return sum(_quad(f, e0, e1, what) for e0, e1 in zip(edges[:-1], edges[1:]))


@functools.lru_cache(maxsize=16)
def cycle_oracle(s: SystemSpec, p: PolicyVector, st: StartState,
                 effort: int = 400_000, seed: int = 0, grid_step: float = 0.002) -> CycleOracle:
    """Cached :class:`CycleOracle`; the ``D`` samples are drawn once per key."""
    return CycleOracle(s, p, st, effort=effort, seed=seed, grid_step=grid_step)


def _guard(s: SystemSpec):
    if s.m > MAX_COMPONENTS:
        raise UnsupportedDimensionError(
            f"quadrature oracle supports at most {MAX_COMPONENTS} components, got {s.m}"
        )


def prob_corrective(s, p, st, i: int, k: int, **kw) -> float:
    """Probability that component ``i`` is correctively replaced at the end
    of a cycle that ends in ``(T_{k-1}, T_k]``."""
    _guard(s)
    return cycle_oracle(s, p, st, **kw).prob_corrective(i, k)


def prob_nondegrading_repair(s, p, st, k: int, **kw) -> float:
    """Probability that the non-degrading part is repaired in interval ``k``."""
    _guard(s)
    return cycle_oracle(s, p, st, **kw).prob_nondegrading_repair(k)


def prob_preventive(s, p, st, i: int, k: int, **kw) -> float:
    """Probability of a preventive replacement of component ``i`` in interval ``k``."""
    _guard(s)
    return cycle_oracle(s, p, st, **kw).prob_preventive(i, k)


def expected_downtime(s, p, st, k: int, **kw) -> tuple[float, list[float]]:
    """``(D_nm, [D_1, ..., D_m])`` restricted to cycles ending in interval ``k``."""
    _guard(s)
    return cycle_oracle(s, p, st, **kw).expected_downtime(k)


def expected_cycle_length(s, p, st, **kw) -> float:
    """``E[O]`` from ``st``, summing the five-term split over ``k``."""
    _guard(s)
    return cycle_oracle(s, p, st, **kw).totals().cycle_length
