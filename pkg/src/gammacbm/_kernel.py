"""Compiled cycle loop of the simulator.

All times inside the kernel are measured in grid steps, so buffer rebasing
shifts them by integers and never accumulates rounding drift. Paths are
supplied as per-component cumulative sums ``S[i, n]``; the level of
component ``i`` at grid point ``n`` is ``base[i] + S[i, n] - S[i, r[i]]``
where ``r[i]`` is the grid index of its last replacement.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# status codes
DONE = 0
NEED_PATH = 1
NEED_EXP = 2
FAULT = 3

# trigger codes
INSPECTION_ONLY = 0
DEGRADING_FAILURE_DELAY = 1
NONDEGRADING_FAILURE_DELAY = 2
INSPECTION_AFTER_LATE_FAILURE = 3

# action codes
NONE = 0
PREVENTIVE = 1
CORRECTIVE = 2

# cost columns
COST_COLUMNS = (
    "preventive",
    "corrective_degrading",
    "corrective_nondegrading",
    "inspections",
    "downtime",
    "reward",
)

_EPS = 1e-9


@njit(cache=True, nogil=True)
def _grid_index(u):
    return int(math.floor(u + _EPS))


@njit(cache=True, nogil=True)
def _reward_value(level, floor_, amp, decay):
    return floor_ + amp * math.exp(-decay * level)


@njit(cache=True, nogil=True)
def _path_reward(S_row, base, r, ua, ub, floor_, amp, decay):
    """Integral over [ua, ub] (grid units) of the linear interpolant of the
    reward evaluated at grid points."""
    if ub <= ua:
        return 0.0
    ref = S_row[r] - base
    n = _grid_index(ua)
    total = 0.0
    while n < ub:
        lo = ua if ua > n else float(n)
        hi = ub if ub < n + 1 else float(n + 1)
        if hi > lo:
            y0 = _reward_value(S_row[n] - ref, floor_, amp, decay)
            y1 = _reward_value(S_row[n + 1] - ref, floor_, amp, decay)
            v_lo = y0 + (y1 - y0) * (lo - n)
            v_hi = y0 + (y1 - y0) * (hi - n)
            total += 0.5 * (v_lo + v_hi) * (hi - lo)
        n += 1
    return total


@njit(cache=True, nogil=True)
def run_cycles(
    S,
    exps,
    exp_pos,
    state,
    base,
    r,
    M,
    L,
    corr_cost,
    prev_cost,
    down_rate,
    rew_floor,
    rew_amp,
    rew_decay,
    lam_g,
    tau_g,
    T_g,
    T_exact,
    delta,
    nd_cost,
    nd_down_rate,
    insp_cost,
    fixed_start,
    x0,
    w0_g,
    k_start,
    k_end,
    out_dur,
    out_trig,
    out_act,
    out_rep,
    out_insp,
    out_down,
    out_cost,
    out_crit,
    out_lv,
    out_w,
    out_pre,
):
    """Simulate cycles ``k_start .. k_end-1``; returns (next cycle, status).

    ``state`` holds ``(u0, next_inspection, next_nondegrading_failure,
    start_pending)``; the last entry is used in fixed-start mode only.
    """
    m = S.shape[0]
    N = S.shape[1]
    aM = np.empty(m)
    aL = np.empty(m)
    k = k_start
    while k < k_end:
        if fixed_start and state[3] > 0:
            # fresh independent cycle; set up once so that re-entry after a
            # buffer refill does not redraw the failure time
            if exp_pos[0] >= exps.shape[0]:
                return k, NEED_EXP
            u0 = math.ceil(state[0] - _EPS)
            state[0] = u0
            i0 = int(u0)
            if i0 >= N - 1:
                return k, NEED_PATH
            for i in range(m):
                base[i] = x0[i]
                r[i] = i0
            state[1] = u0 + w0_g
            if lam_g > 0:
                state[2] = u0 + exps[exp_pos[0]] / lam_g
            else:
                state[2] = np.inf
            exp_pos[0] += 1
            state[3] = 0.0
        # a repair may need one exponential draw
        if not fixed_start and exp_pos[0] >= exps.shape[0]:
            return k, NEED_EXP
        u0 = state[0]
        insp = state[1]
        y = state[2]
        i0 = _grid_index(u0)

        z = y
        trig_comp = -1
        e = np.inf
        for i in range(m):
            ref = S[i, r[i]] - base[i]
            nm = np.searchsorted(S[i], ref + M[i])
            nl = np.searchsorted(S[i], ref + L[i])
            am = float(nm) if nm > i0 else u0
            al = float(nl) if nl > i0 else u0
            aM[i] = am
            aL[i] = al
            if al < z:
                z = al
                trig_comp = i
            if am < e:
                e = am
        if z < e:
            e = z
        if e <= insp:
            tk = insp
            nk = 0
        else:
            nk = int(math.ceil((e - insp) / T_g - _EPS))
            tk = insp + nk * T_g
            if tk < e:
                nk += 1
                tk += T_g
        # a delay ending exactly on an inspection counts as that inspection
        delayed = z + tau_g < tk
        o = z + tau_g if delayed else tk
        if o >= N - 1:
            return k, NEED_PATH
        if not (o > u0):
            return k, FAULT
        io = _grid_index(o)

        c_prev = 0.0
        c_corr = 0.0
        c_down = 0.0
        reward = 0.0
        n_corr = 0
        for i in range(m):
            end = o if aL[i] > o else aL[i]
            reward += _path_reward(S[i], base[i], r[i], u0, end, rew_floor[i], rew_amp[i], rew_decay[i])
            # same tolerance as the grid index of o
            if aL[i] <= o + _EPS:
                out_act[k, i] = CORRECTIVE
                c_corr += corr_cost[i]
                d = max(o - aL[i], 0.0) * delta
                out_down[k, i] = d
                c_down += down_rate[i] * d
                n_corr += 1
            elif aM[i] <= o + _EPS:
                out_act[k, i] = PREVENTIVE
                c_prev += prev_cost[i]
                out_down[k, i] = 0.0
            else:
                out_act[k, i] = NONE
                out_down[k, i] = 0.0
        reward *= delta

        repaired = y <= o
        c_nd = 0.0
        if repaired:
            d = (o - y) * delta
            out_down[k, m] = d
            c_down += nd_down_rate * d
            c_nd = nd_cost
        else:
            out_down[k, m] = 0.0

        if z > o:
            out_trig[k] = INSPECTION_ONLY
        elif delayed:
            out_trig[k] = DEGRADING_FAILURE_DELAY if trig_comp >= 0 else NONDEGRADING_FAILURE_DELAY
        else:
            out_trig[k] = INSPECTION_AFTER_LATE_FAILURE

        out_dur[k] = (o - u0) * delta
        out_rep[k] = repaired
        out_insp[k] = nk
        out_crit[k] = n_corr == m
        out_cost[k, 0] = c_prev
        out_cost[k, 1] = c_corr
        out_cost[k, 2] = c_nd
        out_cost[k, 3] = insp_cost * nk
        out_cost[k, 4] = c_down
        out_cost[k, 5] = reward
        if not math.isfinite(reward) or not math.isfinite(out_dur[k]):
            return k, FAULT

        for i in range(m):
            out_pre[k, i] = base[i] + S[i, io] - S[i, r[i]]
            if out_act[k, i] != NONE:
                base[i] = 0.0
                r[i] = io
                out_lv[k, i] = 0.0
            else:
                out_lv[k, i] = out_pre[k, i]
        if delayed:
            out_w[k] = (tk - o) * delta
            state[1] = tk
        else:
            out_w[k] = T_exact
            state[1] = tk + T_g
        if fixed_start:
            state[3] = 1.0
        elif repaired:
            if lam_g > 0:
                state[2] = o + exps[exp_pos[0]] / lam_g
            else:
                state[2] = np.inf
            exp_pos[0] += 1
        state[0] = o
        k += 1
    return k, DONE
