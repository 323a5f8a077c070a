"""Coupled pair of open ASEPs with ordered boundary rates.

The lower chain ``eta`` and upper chain ``eta'`` share every clock.  Bulk
jumps use the basic coupling; at each reservoir the common part of an
entry or exit rate moves both chains and the excess moves only the chain
that owns it.  With the upper chain holding the larger entry rates and
the smaller exit rates this keeps ``eta <= eta'`` forever, and the
discrepancies ``eta' - eta`` behave as second-class particles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import _kernels
from .engine import (
    DEFAULT_MAX_CANDIDATES,
    Configuration,
    CountingProcesses,
    EnvelopeError,
    EventBudgetExceeded,
    snapshot_times,
)
from .observables import smoothed_profile
from .rates import ModelSpec, RateTuple, recommended_block_width
from .rng import Stream

__all__ = [
    "OrderingError",
    "PairedConfiguration",
    "CoupledTrajectory",
    "check_rate_ordering",
    "ordered_initial",
    "coupled_step",
    "run_coupled",
    "coupled_final_states",
    "DensityMonotonicityReport",
    "CurrentMonotonicityReport",
    "monotonicity_density_experiment",
    "monotonicity_current_experiment",
    "current_direction",
    "current_report",
]


class OrderingError(AssertionError):
    """Rate families or configurations violate the required order."""


@dataclass
class PairedConfiguration:
    """Ordered pair ``lower <= upper`` with counters for both chains and the discrepancy."""

    lower: Configuration
    upper: Configuration
    counts_lower: CountingProcesses
    counts_upper: CountingProcesses
    counts_discrepancy: CountingProcesses

    def __post_init__(self):
        if np.any(self.lower.eta > self.upper.eta):
            raise OrderingError("lower configuration exceeds upper configuration")

    @classmethod
    def start(cls, lower, upper, t: float = 0.0) -> "PairedConfiguration":
        lo = np.asarray(lower, np.int8)
        hi = np.asarray(upper, np.int8)
        N = lo.size
        z = CountingProcesses.zeros
        return cls(Configuration(lo.copy(), t), Configuration(hi.copy(), t), z(N), z(N), z(N))

    @property
    def discrepancy(self) -> np.ndarray:
        return (self.upper.eta - self.lower.eta).astype(np.int8)

    @property
    def t(self) -> float:
        return self.lower.t

    def copy(self) -> "PairedConfiguration":
        return PairedConfiguration(
            self.lower.copy(), self.upper.copy(), self.counts_lower.copy(),
            self.counts_upper.copy(), self.counts_discrepancy.copy(),
        )


# ---------------------------------------------------------------------------
# rate ordering and envelopes


def _check_compatible(spec_lo: ModelSpec, spec_hi: ModelSpec) -> None:
    for name in ("N", "a", "p_bar", "T"):
        if getattr(spec_lo, name) != getattr(spec_hi, name):
            raise ValueError(f"coupled specs differ in {name}")
    if spec_lo.lambda0 != spec_hi.lambda0 or spec_lo.p != spec_hi.p:
        raise ValueError("coupled specs must share the bulk dynamics")


def _time_grid(spec_lo: ModelSpec, spec_hi: ModelSpec, n: int = 256) -> np.ndarray:
    T = spec_lo.T if spec_lo.T > 0 else 1.0
    grid = np.linspace(0.0, T, n + 1)
    return np.unique(np.concatenate([grid, spec_lo.breakpoints, spec_hi.breakpoints]))


def check_rate_ordering(spec_lo: ModelSpec, spec_hi: ModelSpec, tol: float = 1e-12) -> dict:
    """Confirm ``alpha <= alpha*``, ``gamma >= gamma*``, ``delta <= delta*``, ``beta >= beta*``.

    Checked on the schedule breakpoints and a uniform grid; every schedule
    is monotone between breakpoints, so the rates are too.  Returns which
    sides carry a gap.
    """
    _check_compatible(spec_lo, spec_hi)
    gaps = {"left": False, "right": False}
    for t in _time_grid(spec_lo, spec_hi):
        r, s = spec_lo.rates_at(t), spec_hi.rates_at(t)
        bad = []
        if r.alpha > s.alpha + tol:
            bad.append("alpha")
        if r.gamma < s.gamma - tol:
            bad.append("gamma")
        if r.delta > s.delta + tol:
            bad.append("delta")
        if r.beta < s.beta - tol:
            bad.append("beta")
        if bad:
            raise OrderingError(f"rates not ordered at t={t:.6g}: {', '.join(bad)}")
        if abs(r.alpha - s.alpha) > tol or abs(r.gamma - s.gamma) > tol:
            gaps["left"] = True
        if abs(r.delta - s.delta) > tol or abs(r.beta - s.beta) > tol:
            gaps["right"] = True
    return gaps


@dataclass(frozen=True)
class _CoupledCompiled:
    sched_lo: tuple
    coef_lo: np.ndarray
    sched_hi: tuple
    coef_hi: np.ndarray
    win_ends: np.ndarray
    env_left: np.ndarray
    env_right: np.ndarray


@lru_cache(maxsize=64)
def _compile_pair(spec_lo: ModelSpec, spec_hi: ModelSpec) -> _CoupledCompiled:
    check_rate_ordering(spec_lo, spec_hi)
    s_lo, c_lo = spec_lo.kernel_boundary()
    s_hi, c_hi = spec_hi.kernel_boundary()
    T = spec_lo.T
    edges = _time_grid(spec_lo, spec_hi) if T > 0 else np.array([0.0, 1.0])
    rl = [spec_lo.rates_at(t) for t in edges]
    rh = [spec_hi.rates_at(t) for t in edges]

    def sup(vals):
        v = np.asarray(vals)
        return np.maximum(v[:-1], v[1:])

    env_l = sup([r.alpha for r in rh]) + sup([r.gamma for r in rl])
    env_r = sup([r.delta for r in rh]) + sup([r.beta for r in rl])
    # a small relative margin absorbs rounding between rates_at and the kernel
    env_l = env_l * (1.0 + 1e-9) + 1e-300
    env_r = env_r * (1.0 + 1e-9) + 1e-300
    win_ends = edges[1:].copy()
    return _CoupledCompiled(tuple(s_lo), c_lo, tuple(s_hi), c_hi, win_ends, env_l, env_r)


def _status(status, t):
    if status == _kernels.BUDGET_EXCEEDED:
        raise EventBudgetExceeded(f"candidate budget exhausted at t={t:.6g}")
    if status == _kernels.ENVELOPE_VIOLATED:
        raise EnvelopeError(f"coupled boundary rate above its envelope at t={t:.6g}")
    if status == _kernels.ORDER_VIOLATED:
        raise OrderingError(f"ordering lost at t={t:.6g}")
    if status == _kernels.RATES_UNORDERED:
        raise OrderingError(f"boundary rates unordered at t={t:.6g}")


def _call(spec_lo, spec_hi, lo, hi, h_lo, h_hi, h_d, t, t_stop, snap_t, snap_lo, snap_hi,
          snap_h, state, max_accepted, max_candidates):
    comp = _compile_pair(spec_lo, spec_hi)
    return _kernels.simulate_coupled(
        lo, hi, h_lo, h_hi, h_d, float(t), float(t_stop), spec_lo.speed, spec_lo.lambda0,
        spec_lo.p, comp.sched_lo, comp.coef_lo, comp.sched_hi, comp.coef_hi, comp.win_ends,
        comp.env_left, comp.env_right, snap_t, snap_lo, snap_hi, snap_h, state,
        int(max_accepted), int(max_candidates),
    )


def _stack(c: CountingProcesses) -> np.ndarray:
    return np.stack([c.h_plus, c.h_minus]).astype(np.int64)


def coupled_step(
    pair: PairedConfiguration, spec_lo: ModelSpec, spec_hi: ModelSpec, rng: Stream
) -> PairedConfiguration:
    """Advance to the next event that changes either chain (or to the horizon)."""
    N = spec_lo.N
    lo, hi = pair.lower.eta.copy(), pair.upper.eta.copy()
    h_lo, h_hi, h_d = _stack(pair.counts_lower), _stack(pair.counts_upper), _stack(pair.counts_discrepancy)
    t, status, _, _, _ = _call(
        spec_lo, spec_hi, lo, hi, h_lo, h_hi, h_d, pair.t, spec_lo.T, np.empty(0),
        np.empty((0, N), np.int8), np.empty((0, N), np.int8), np.empty((0, 6, N + 1), np.int64),
        rng.state, 1, DEFAULT_MAX_CANDIDATES,
    )
    _status(status, t)
    cp = lambda h: CountingProcesses(h[0].copy(), h[1].copy())
    return PairedConfiguration(
        Configuration(lo, t), Configuration(hi, t), cp(h_lo), cp(h_hi), cp(h_d)
    )


@dataclass
class CoupledTrajectory:
    """Snapshots of both chains; ``h[k]`` rows are lower +/-, upper +/-, discrepancy +/-."""

    spec_lo: ModelSpec
    spec_hi: ModelSpec
    times: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    h: np.ndarray
    event_count: int
    seed: int
    replica: int

    @property
    def h_lower(self) -> np.ndarray:
        return self.h[:, 0] - self.h[:, 1]

    @property
    def h_upper(self) -> np.ndarray:
        return self.h[:, 2] - self.h[:, 3]

    @property
    def h_discrepancy(self) -> np.ndarray:
        return self.h[:, 4] - self.h[:, 5]

    def identity_holds(self) -> bool:
        """``h'(i, t) - h(i, t) = h_discrepancy(i, t)`` at every snapshot and bond."""
        return bool(np.array_equal(self.h_upper - self.h_lower, self.h_discrepancy))

    def discrepancy_balance_holds(self) -> bool:
        """Change in the number of discrepancies equals net inflow through the two reservoirs."""
        theta = (self.upper - self.lower).astype(np.int64).sum(axis=1)
        hd = self.h_discrepancy
        return bool(np.array_equal(theta - theta[0], (hd[:, 0] - hd[0, 0]) - (hd[:, -1] - hd[0, -1])))


def ordered_initial(spec_lo: ModelSpec, spec_hi: ModelSpec, initial, stream: Stream):
    """Ordered initial pair.

    ``None`` couples Bernoulli fields at each chain's left density at time 0
    through shared uniforms; ``"same"`` starts both chains from the lower
    field; a pair ``(lower, upper)`` of 0/1 arrays is used as given.
    """
    N = spec_lo.N
    if initial is None or initial == "same":
        u = stream.uniform(N)
        lo = (u < spec_lo.boundary_densities(0.0)[0]).astype(np.int8)
        if initial == "same":
            return lo, lo.copy()
        hi = np.maximum(lo, (u < spec_hi.boundary_densities(0.0)[0]).astype(np.int8))
        return lo, hi
    if isinstance(initial, str):
        if initial == "empty":
            z = np.zeros(N, np.int8)
            return z, z.copy()
        raise ValueError(f"unknown initial pair {initial!r}")
    lo, hi = (np.asarray(x, np.int8).copy() for x in initial)
    if lo.shape != (N,) or hi.shape != (N,):
        raise ValueError("initial pair has the wrong length")
    if np.any(lo > hi):
        raise OrderingError("initial lower configuration exceeds upper configuration")
    return lo, hi


def run_coupled(
    spec_lo: ModelSpec,
    spec_hi: ModelSpec,
    initial=None,
    seed: int = 0,
    replica: int = 0,
    cadence: float | None = None,
    max_candidates: int = DEFAULT_MAX_CANDIDATES,
) -> CoupledTrajectory:
    """Simulate the coupled pair over ``[0, T]``; raises on any ordering loss."""
    _check_compatible(spec_lo, spec_hi)
    N = spec_lo.N
    stream = Stream(seed, replica)
    lo, hi = ordered_initial(spec_lo, spec_hi, initial, stream)
    times = snapshot_times(spec_lo.T, cadence)
    n = times.size
    snap_lo = np.empty((n, N), np.int8)
    snap_hi = np.empty((n, N), np.int8)
    snap_h = np.zeros((n, 6, N + 1), np.int64)
    snap_lo[0], snap_hi[0] = lo, hi
    h_lo = np.zeros((2, N + 1), np.int64)
    h_hi = np.zeros((2, N + 1), np.int64)
    h_d = np.zeros((2, N + 1), np.int64)
    accepted = 0
    if n > 1:
        t, status, accepted, _, written = _call(
            spec_lo, spec_hi, lo, hi, h_lo, h_hi, h_d, 0.0, spec_lo.T, times[1:], snap_lo[1:],
            snap_hi[1:], snap_h[1:], stream.state, 1 << 62, max_candidates,
        )
        _status(status, t)
        assert written == n - 1
    return CoupledTrajectory(spec_lo, spec_hi, times, snap_lo, snap_hi, snap_h, accepted, seed, replica)


def coupled_final_states(
    spec_lo: ModelSpec, spec_hi: ModelSpec, replicas: int, seed: int = 0, initial=None,
    t: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Both chains at time ``t`` (default ``T``) over many replicas."""
    t_stop = spec_lo.T if t is None else float(t)
    N = spec_lo.N
    out_lo = np.empty((replicas, N), np.int8)
    out_hi = np.empty((replicas, N), np.int8)
    none_t = np.empty(0)
    e8 = np.empty((0, N), np.int8)
    eh = np.empty((0, 6, N + 1), np.int64)
    for r in range(replicas):
        stream = Stream(seed, r)
        lo, hi = ordered_initial(spec_lo, spec_hi, initial, stream)
        h = [np.zeros((2, N + 1), np.int64) for _ in range(3)]
        tt, status, _, _, _ = _call(
            spec_lo, spec_hi, lo, hi, *h, 0.0, t_stop, none_t, e8, e8, eh, stream.state,
            1 << 62, DEFAULT_MAX_CANDIDATES,
        )
        _status(status, tt)
        out_lo[r], out_hi[r] = lo, hi
    return out_lo, out_hi


# ---------------------------------------------------------------------------
# monotonicity experiments


def _mean_se(x) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    se = x.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(x.shape[1:])
    return x.mean(axis=0), se


@dataclass
class DensityMonotonicityReport:
    y: np.ndarray
    lower_mean: np.ndarray
    lower_se: np.ndarray
    upper_mean: np.ndarray
    upper_se: np.ndarray
    pathwise_ordered: bool
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.pathwise_ordered and not self.violations


def monotonicity_density_experiment(
    spec_lo: ModelSpec,
    spec_hi: ModelSpec,
    y_grid: Sequence[float],
    replicas: int,
    seed: int = 0,
    K: int | None = None,
    initial=None,
    cadence: float | None = None,
    z: float = 3.0,
) -> DensityMonotonicityReport:
    """Fraction of space-time cells whose smoothed density is at least ``y``, for both chains.

    Cells are (snapshot, interior site) pairs.  The lower chain's fraction
    must not exceed the upper one's by more than ``z`` combined standard
    errors at any ``y``; the ordering of the smoothed fields is also
    checked pathwise.
    """
    y = np.asarray(y_grid, dtype=float)
    K = recommended_block_width(spec_lo) if K is None else int(K)
    N = spec_lo.N
    frac_lo, frac_hi = [], []
    pathwise = True
    for r in range(replicas):
        tr = run_coupled(spec_lo, spec_hi, initial, seed, r, cadence)
        s_lo = smoothed_profile(tr.lower, K)[:, K : N - K]
        s_hi = smoothed_profile(tr.upper, K)[:, K : N - K]
        pathwise &= bool(np.all(s_lo <= s_hi + 1e-12))
        frac_lo.append([(s_lo >= v - 1e-12).mean() for v in y])
        frac_hi.append([(s_hi >= v - 1e-12).mean() for v in y])
    m_lo, se_lo = _mean_se(frac_lo)
    m_hi, se_hi = _mean_se(frac_hi)
    violations = []
    for k, v in enumerate(y):
        gap = m_lo[k] - m_hi[k]
        comb = math.hypot(se_lo[k], se_hi[k])
        if gap > z * comb:
            violations.append({"y": float(v), "gap": float(gap), "combined_se": float(comb)})
    return DensityMonotonicityReport(y, m_lo, se_lo, m_hi, se_hi, pathwise, violations)


@dataclass
class CurrentMonotonicityReport:
    """Per-replica integrated currents of both chains and the predicted direction.

    ``direction`` is ``"le"`` when the lower chain's integrated current
    should not exceed the upper one's (left-boundary gap), ``"ge"`` for a
    right-boundary gap and ``"eq"`` for identical rates.
    """

    direction: str
    lower: np.ndarray
    upper: np.ndarray
    identity_exact: bool
    ordering_exact: bool
    no_left_discrepancy_entry: bool
    z: float = 3.0

    @property
    def difference(self) -> tuple[float, float]:
        d = self.upper - self.lower
        se = d.std(ddof=1) / math.sqrt(d.size) if d.size > 1 else 0.0
        return float(d.mean()), float(se)

    @property
    def inequality_holds(self) -> bool:
        mean, se = self.difference
        if self.direction == "le":
            return mean >= -self.z * se
        if self.direction == "ge":
            return mean <= self.z * se
        return abs(mean) <= self.z * se or mean == 0.0

    @property
    def ok(self) -> bool:
        return self.identity_exact and self.ordering_exact and self.inequality_holds


def monotonicity_current_experiment(
    spec: ModelSpec,
    spec_star: ModelSpec,
    T: float | None = None,
    replicas: int = 20,
    seed: int = 0,
    initial=None,
    cadence: float | None = None,
    z: float = 3.0,
) -> CurrentMonotonicityReport:
    """Compare ``(1/(N+1)) sum_i h(i, T) / N**(1+a)`` between the coupled chains.

    ``spec`` must be dominated by ``spec_star`` (see ``check_rate_ordering``)
    and at most one boundary may carry a gap.  The identity
    ``h' - h = h_discrepancy`` and the ordering are verified exactly on
    every replica.
    """
    if T is not None:
        spec, spec_star = spec.replace(T=T), spec_star.replace(T=T)
    current_direction(spec, spec_star)
    trajs = [run_coupled(spec, spec_star, initial, seed, r, cadence) for r in range(replicas)]
    return current_report(trajs, z)


def current_direction(spec: ModelSpec, spec_star: ModelSpec) -> str:
    """``"le"`` for a left gap, ``"ge"`` for a right gap, ``"eq"`` for none."""
    gaps = check_rate_ordering(spec, spec_star)
    if gaps["left"] and gaps["right"]:
        raise ValueError("run one boundary gap at a time")
    return "le" if gaps["left"] else ("ge" if gaps["right"] else "eq")


def current_report(trajectories: Sequence[CoupledTrajectory], z: float = 3.0) -> CurrentMonotonicityReport:
    """Integrated-current comparison over already simulated coupled replicas."""
    spec, spec_star = trajectories[0].spec_lo, trajectories[0].spec_hi
    direction = current_direction(spec, spec_star)
    N = spec.N
    j_lo, j_hi = [], []
    identity = ordering = no_left = True
    for tr in trajectories:
        identity &= tr.identity_holds() and tr.discrepancy_balance_holds()
        ordering &= bool(np.all(tr.lower <= tr.upper))
        if direction != "le":
            no_left &= bool(np.all(tr.h[:, 4, 0] == 0))
        j_lo.append(tr.h_lower[-1].sum() / ((N + 1) * spec.speed))
        j_hi.append(tr.h_upper[-1].sum() / ((N + 1) * spec.speed))
    return CurrentMonotonicityReport(
        direction, np.array(j_lo), np.array(j_hi), identity, ordering, no_left, z
    )
