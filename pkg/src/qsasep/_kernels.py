"""Compiled inner loops for the single-chain simulator.

Sites are 0-based in the arrays (``eta[0]`` is site 1).  Bond ``b`` joins
array sites ``b-1`` and ``b``; bond 0 is the left reservoir and bond ``N``
the right one, matching the counting-process indices.
"""

import math

import numba as nb
import numpy as np

from .rng import next_uniform

OK = 0
MAX_ACCEPTED = 1
BUDGET_EXCEEDED = 2
ENVELOPE_VIOLATED = 3


@nb.njit(cache=True)
def sched_value(seg, t):
    n = seg.shape[0]
    k = 0
    while k < n - 1 and t >= seg[k, 1]:
        k += 1
    kind = seg[k, 2]
    v0 = seg[k, 3]
    if kind == 0.0:
        return v0
    v1 = seg[k, 4]
    s = (t - seg[k, 0]) / (seg[k, 1] - seg[k, 0])
    if s < 0.0:
        s = 0.0
    elif s > 1.0:
        s = 1.0
    if kind == 1.0:
        return v0 + (v1 - v0) * s
    return v0 + (v1 - v0) * 0.5 * (1.0 - math.cos(math.pi * s))


@nb.njit(cache=True)
def side_rates(dens, inten, c_in, c_out, t):
    """(entry, exit) intensity of one reservoir at time ``t``."""
    x = sched_value(dens, t)
    lam = sched_value(inten, t)
    return c_in * lam * x, c_out * lam * (1.0 - x)


@nb.njit(cache=True)
def simulate(
    eta,
    hp,
    hm,
    t,
    t_stop,
    speed,
    lam0,
    p,
    xs,
    lms,
    ys,
    lps,
    coef,
    win_ends,
    env_left,
    env_right,
    snap_times,
    snap_eta,
    snap_hp,
    snap_hm,
    state,
    max_accepted,
    max_candidates,
    check,
    total_bound,
):
    """Advance one chain from ``t`` to ``t_stop`` (or ``max_accepted`` events).

    Bulk moves are drawn exactly from the sets of active bonds; boundary
    flips are proposed at a per-window constant envelope and thinned.
    Returns ``(t, status, accepted, candidates, snapshots_written)``.
    """
    N = eta.shape[0]
    act_r = np.empty(N, np.int64)
    act_l = np.empty(N, np.int64)
    pos_r = np.full(N + 1, -1, np.int64)
    pos_l = np.full(N + 1, -1, np.int64)
    n_r = 0
    n_l = 0
    lo = 1
    hi = N

    rate_r = speed * lam0 * p
    rate_l = speed * lam0 * (1.0 - p)
    n_win = win_ends.shape[0]
    w = 0
    while w < n_win - 1 and win_ends[w] <= t:
        w += 1
    n_snap = snap_times.shape[0]
    s = 0
    while s < n_snap and snap_times[s] < t:
        s += 1

    accepted = 0
    candidates = 0
    while True:
        # Re-index bonds lo..hi-1 whose activity may have changed.  Kept
        # inline: helper calls taking arrays cost several times the event.
        for c in range(lo, hi):
            want = eta[c - 1] == 1 and eta[c] == 0
            if want:
                if pos_r[c] < 0:
                    act_r[n_r] = c
                    pos_r[c] = n_r
                    n_r += 1
            elif pos_r[c] >= 0:
                k = pos_r[c]
                last = act_r[n_r - 1]
                act_r[k] = last
                pos_r[last] = k
                pos_r[c] = -1
                n_r -= 1
            want = eta[c - 1] == 0 and eta[c] == 1
            if want:
                if pos_l[c] < 0:
                    act_l[n_l] = c
                    pos_l[c] = n_l
                    n_l += 1
            elif pos_l[c] >= 0:
                k = pos_l[c]
                last = act_l[n_l - 1]
                act_l[k] = last
                pos_l[last] = k
                pos_l[c] = -1
                n_l -= 1
        lo = 1
        hi = 1

        env_l = speed * env_left[w]
        env_r = speed * env_right[w]
        bulk_r = rate_r * n_r
        bulk = bulk_r + rate_l * n_l
        total = bulk + env_l + env_r
        if check and total > total_bound * (1.0 + 1e-12):
            return t, ENVELOPE_VIOLATED, accepted, candidates, s

        horizon = t_stop
        if win_ends[w] < horizon:
            horizon = win_ends[w]
        if s < n_snap and snap_times[s] < horizon:
            horizon = snap_times[s]

        if total > 0.0:
            t_next = t - math.log(1.0 - next_uniform(state)) / total
        else:
            t_next = math.inf

        if t_next >= horizon:
            t = horizon
            while s < n_snap and snap_times[s] <= t:
                for i in range(N):
                    snap_eta[s, i] = eta[i]
                for i in range(N + 1):
                    snap_hp[s, i] = hp[i]
                    snap_hm[s, i] = hm[i]
                s += 1
            if t >= t_stop:
                return t, OK, accepted, candidates, s
            if t >= win_ends[w] and w < n_win - 1:
                w += 1
            continue

        t = t_next
        candidates += 1
        if candidates > max_candidates:
            return t, BUDGET_EXCEEDED, accepted, candidates, s

        u = next_uniform(state) * total
        if u < bulk_r:
            k = int(u / rate_r)
            if k >= n_r:
                k = n_r - 1
            b = act_r[k]
            eta[b - 1] = 0
            eta[b] = 1
            hp[b] += 1
        elif u < bulk:
            k = int((u - bulk_r) / rate_l)
            if k >= n_l:
                k = n_l - 1
            b = act_l[k]
            eta[b - 1] = 1
            eta[b] = 0
            hm[b] += 1
        elif u < bulk + env_l:
            a_in, g_out = side_rates(xs, lms, coef[0], coef[1], t)
            rate = speed * (a_in if eta[0] == 0 else g_out)
            if check and rate > env_l * (1.0 + 1e-12):
                return t, ENVELOPE_VIOLATED, accepted, candidates, s
            if next_uniform(state) * env_l >= rate:
                continue
            b = 1
            if eta[0] == 0:
                eta[0] = 1
                hp[0] += 1
            else:
                eta[0] = 0
                hm[0] += 1
        else:
            d_in, b_out = side_rates(ys, lps, coef[2], coef[3], t)
            rate = speed * (d_in if eta[N - 1] == 0 else b_out)
            if check and rate > env_r * (1.0 + 1e-12):
                return t, ENVELOPE_VIOLATED, accepted, candidates, s
            if next_uniform(state) * env_r >= rate:
                continue
            if eta[N - 1] == 0:
                eta[N - 1] = 1
                hm[N] += 1
            else:
                eta[N - 1] = 0
                hp[N] += 1
            b = N
        lo = max(b - 1, 1)
        hi = min(b + 2, N)

        accepted += 1
        if accepted >= max_accepted:
            return t, MAX_ACCEPTED, accepted, candidates, s


@nb.njit(cache=True)
def simulate_final_states(
    initial,
    states,
    t_stop,
    speed,
    lam0,
    p,
    xs,
    lms,
    ys,
    lps,
    coef,
    win_ends,
    env_left,
    env_right,
    max_candidates,
):
    """Run many replicas from time 0 and return their configurations at ``t_stop``."""
    n_rep, N = initial.shape
    out = np.empty_like(initial)
    hp = np.zeros(N + 1, np.int64)
    hm = np.zeros(N + 1, np.int64)
    no_snap = np.empty(0, np.float64)
    snap_eta = np.empty((0, N), initial.dtype)
    snap_h = np.empty((0, N + 1), np.int64)
    for r in range(n_rep):
        eta = initial[r].copy()
        _, status, _, _, _ = simulate(
            eta, hp, hm, 0.0, t_stop, speed, lam0, p, xs, lms, ys, lps, coef,
            win_ends, env_left, env_right, no_snap, snap_eta, snap_h, snap_h,
            states[r], 1 << 62, max_candidates, False, math.inf,
        )
        if status == BUDGET_EXCEEDED:
            return out, r
        out[r] = eta
    return out, -1


# ---------------------------------------------------------------------------
# coupled pair (lower eta <= upper eta')

ORDER_VIOLATED = 4
RATES_UNORDERED = 5


@nb.njit(cache=True)
def simulate_coupled(
    lo,
    hi,
    h_lo,
    h_hi,
    h_d,
    t,
    t_stop,
    speed,
    lam0,
    p,
    sched_lo,
    coef_lo,
    sched_hi,
    coef_hi,
    win_ends,
    env_left,
    env_right,
    snap_times,
    snap_lo,
    snap_hi,
    snap_h,
    state,
    max_accepted,
    max_candidates,
):
    """Advance a pair of ordered chains driven by shared clocks.

    Bulk: bonds are proposed uniformly at rate ``speed * lam0`` each and a
    direction is drawn with probability ``p``; each marginal moves if it
    can (basic coupling).  Boundaries: the shared part of each entry/exit
    rate moves both chains, the excess moves only the chain that has it,
    which keeps ``lo <= hi`` for ordered rates.

    ``h_lo``, ``h_hi``, ``h_d`` are ``(2, N+1)`` arrays of (plus, minus)
    counts for the two marginals and the discrepancy ``hi - lo``; the
    discrepancy counts are read off from how ``hi - lo`` changes.
    ``snap_h`` has shape ``(snapshots, 6, N+1)``.
    Returns ``(t, status, accepted, candidates, snapshots_written)``.
    """
    N = lo.shape[0]
    xs_l, lm_l, ys_l, lp_l = sched_lo[0], sched_lo[1], sched_lo[2], sched_lo[3]
    xs_h, lm_h, ys_h, lp_h = sched_hi[0], sched_hi[1], sched_hi[2], sched_hi[3]
    bulk = speed * lam0 * (N - 1)
    n_win = win_ends.shape[0]
    w = 0
    while w < n_win - 1 and win_ends[w] <= t:
        w += 1
    n_snap = snap_times.shape[0]
    s = 0
    while s < n_snap and snap_times[s] < t:
        s += 1
    accepted = 0
    candidates = 0
    while True:
        env_l = speed * env_left[w]
        env_r = speed * env_right[w]
        total = bulk + env_l + env_r
        horizon = t_stop
        if win_ends[w] < horizon:
            horizon = win_ends[w]
        if s < n_snap and snap_times[s] < horizon:
            horizon = snap_times[s]
        t_next = t - math.log(1.0 - next_uniform(state)) / total
        if t_next >= horizon:
            t = horizon
            while s < n_snap and snap_times[s] <= t:
                for i in range(N):
                    snap_lo[s, i] = lo[i]
                    snap_hi[s, i] = hi[i]
                for i in range(N + 1):
                    snap_h[s, 0, i] = h_lo[0, i]
                    snap_h[s, 1, i] = h_lo[1, i]
                    snap_h[s, 2, i] = h_hi[0, i]
                    snap_h[s, 3, i] = h_hi[1, i]
                    snap_h[s, 4, i] = h_d[0, i]
                    snap_h[s, 5, i] = h_d[1, i]
                s += 1
            if t >= t_stop:
                return t, OK, accepted, candidates, s
            if t >= win_ends[w] and w < n_win - 1:
                w += 1
            continue

        t = t_next
        candidates += 1
        if candidates > max_candidates:
            return t, BUDGET_EXCEEDED, accepted, candidates, s
        u = next_uniform(state) * total
        if u < bulk:
            b = 1 + int(u / (speed * lam0))
            if b > N - 1:
                b = N - 1
            i = b - 1
            j = b
            th_i = hi[i] - lo[i]
            th_j = hi[j] - lo[j]
            moved = False
            if next_uniform(state) < p:
                if lo[i] == 1 and lo[j] == 0:
                    lo[i] = 0
                    lo[j] = 1
                    h_lo[0, b] += 1
                    moved = True
                if hi[i] == 1 and hi[j] == 0:
                    hi[i] = 0
                    hi[j] = 1
                    h_hi[0, b] += 1
                    moved = True
            else:
                if lo[i] == 0 and lo[j] == 1:
                    lo[i] = 1
                    lo[j] = 0
                    h_lo[1, b] += 1
                    moved = True
                if hi[i] == 0 and hi[j] == 1:
                    hi[i] = 1
                    hi[j] = 0
                    h_hi[1, b] += 1
                    moved = True
            if not moved:
                continue
            nt_i = hi[i] - lo[i]
            nt_j = hi[j] - lo[j]
            if th_i == 1 and th_j == 0 and nt_i == 0 and nt_j == 1:
                h_d[0, b] += 1
            elif th_i == 0 and th_j == 1 and nt_i == 1 and nt_j == 0:
                h_d[1, b] += 1
            if lo[i] > hi[i] or lo[j] > hi[j]:
                return t, ORDER_VIOLATED, accepted, candidates, s
        elif u < bulk + env_l:
            a_lo, g_lo = side_rates(xs_l, lm_l, coef_lo[0], coef_lo[1], t)
            a_hi, g_hi = side_rates(xs_h, lm_h, coef_hi[0], coef_hi[1], t)
            if a_lo > a_hi * (1.0 + 1e-12) + 1e-300 or g_hi > g_lo * (1.0 + 1e-12) + 1e-300:
                return t, RATES_UNORDERED, accepted, candidates, s
            if a_hi + g_lo > env_left[w] * (1.0 + 1e-12):
                return t, ENVELOPE_VIOLATED, accepted, candidates, s
            v = (u - bulk) / speed
            th = hi[0] - lo[0]
            if v < a_lo:
                # shared entry
                if lo[0] == 1:
                    continue
                lo[0] = 1
                h_lo[0, 0] += 1
                if hi[0] == 0:
                    hi[0] = 1
                    h_hi[0, 0] += 1
            elif v < a_hi:
                # entry only the upper chain has
                if hi[0] == 1:
                    continue
                hi[0] = 1
                h_hi[0, 0] += 1
            elif v < a_hi + g_hi:
                # shared exit
                if hi[0] == 0:
                    continue
                hi[0] = 0
                h_hi[1, 0] += 1
                if lo[0] == 1:
                    lo[0] = 0
                    h_lo[1, 0] += 1
            elif v < a_hi + g_lo:
                # exit only the lower chain has
                if lo[0] == 0:
                    continue
                lo[0] = 0
                h_lo[1, 0] += 1
            else:
                continue
            nt = hi[0] - lo[0]
            if th == 0 and nt == 1:
                h_d[0, 0] += 1
            elif th == 1 and nt == 0:
                h_d[1, 0] += 1
            if lo[0] > hi[0]:
                return t, ORDER_VIOLATED, accepted, candidates, s
        else:
            d_lo, b_lo = side_rates(ys_l, lp_l, coef_lo[2], coef_lo[3], t)
            d_hi, b_hi = side_rates(ys_h, lp_h, coef_hi[2], coef_hi[3], t)
            if d_lo > d_hi * (1.0 + 1e-12) + 1e-300 or b_hi > b_lo * (1.0 + 1e-12) + 1e-300:
                return t, RATES_UNORDERED, accepted, candidates, s
            if d_hi + b_lo > env_right[w] * (1.0 + 1e-12):
                return t, ENVELOPE_VIOLATED, accepted, candidates, s
            v = (u - bulk - env_l) / speed
            k = N - 1
            th = hi[k] - lo[k]
            if v < d_lo:
                # shared creation from the right reservoir
                if lo[k] == 1:
                    continue
                lo[k] = 1
                h_lo[1, N] += 1
                if hi[k] == 0:
                    hi[k] = 1
                    h_hi[1, N] += 1
            elif v < d_hi:
                if hi[k] == 1:
                    continue
                hi[k] = 1
                h_hi[1, N] += 1
            elif v < d_hi + b_hi:
                # shared annihilation
                if hi[k] == 0:
                    continue
                hi[k] = 0
                h_hi[0, N] += 1
                if lo[k] == 1:
                    lo[k] = 0
                    h_lo[0, N] += 1
            elif v < d_hi + b_lo:
                if lo[k] == 0:
                    continue
                lo[k] = 0
                h_lo[0, N] += 1
            else:
                continue
            nt = hi[k] - lo[k]
            if th == 1 and nt == 0:
                h_d[0, N] += 1
            elif th == 0 and nt == 1:
                h_d[1, N] += 1
            if lo[k] > hi[k]:
                return t, ORDER_VIOLATED, accepted, candidates, s
        accepted += 1
        if accepted >= max_accepted:
            return t, MAX_ACCEPTED, accepted, candidates, s
