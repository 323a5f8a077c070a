"""Exact simulation of the accelerated open ASEP with time-dependent reservoirs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator, Union

import numpy as np

from . import _kernels
from .rates import ModelSpec
from .rng import Stream

__all__ = [
    "Configuration",
    "CountingProcesses",
    "Trajectory",
    "EventBudgetExceeded",
    "EnvelopeError",
    "total_rate_bound",
    "step",
    "advance",
    "run",
    "run_replicas",
    "final_states",
    "initial_configuration",
    "DEFAULT_MAX_CANDIDATES",
]

DEFAULT_MAX_CANDIDATES = 5 * 10**9
DEFAULT_SNAPSHOTS = 200
MAX_WINDOW_FRACTION = 1.0 / 256


class EventBudgetExceeded(RuntimeError):
    """The expected or realised number of candidate events exceeds the budget."""


class EnvelopeError(AssertionError):
    """An instantaneous rate exceeded its thinning envelope."""


@dataclass
class Configuration:
    eta: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.eta = np.asarray(self.eta, dtype=np.int8)
        if self.eta.ndim != 1 or self.eta.size < 2:
            raise ValueError("configuration needs at least 2 sites")
        if np.any((self.eta != 0) & (self.eta != 1)):
            raise ValueError("occupations must be 0 or 1")

    @property
    def N(self) -> int:
        return self.eta.size

    def copy(self) -> "Configuration":
        return Configuration(self.eta.copy(), self.t)


@dataclass
class CountingProcesses:
    """Jump counters on bonds ``0..N``; bond 0 and bond N are the reservoirs."""

    h_plus: np.ndarray
    h_minus: np.ndarray

    @classmethod
    def zeros(cls, N: int) -> "CountingProcesses":
        return cls(np.zeros(N + 1, np.int64), np.zeros(N + 1, np.int64))

    @property
    def h(self) -> np.ndarray:
        return self.h_plus - self.h_minus

    def copy(self) -> "CountingProcesses":
        return CountingProcesses(self.h_plus.copy(), self.h_minus.copy())


@dataclass
class Trajectory:
    """Snapshots of one run, stored as stacked arrays.

    ``eta[k]``, ``h_plus[k]`` and ``h_minus[k]`` are the state at
    ``times[k]``; the first row is the initial state and the last row is
    the state at the horizon.
    """

    spec: ModelSpec
    times: np.ndarray
    eta: np.ndarray
    h_plus: np.ndarray
    h_minus: np.ndarray
    event_count: int = 0
    candidate_count: int = 0
    seed: int = 0
    replica: int = 0

    @property
    def h(self) -> np.ndarray:
        return self.h_plus - self.h_minus

    def __len__(self) -> int:
        return self.times.size

    def snapshot(self, k: int) -> tuple[float, Configuration, CountingProcesses]:
        return (
            float(self.times[k]),
            Configuration(self.eta[k].copy(), float(self.times[k])),
            CountingProcesses(self.h_plus[k].copy(), self.h_minus[k].copy()),
        )

    @property
    def snapshots(self) -> Iterator[tuple[float, Configuration, CountingProcesses]]:
        return (self.snapshot(k) for k in range(len(self)))

    @property
    def final(self) -> Configuration:
        return Configuration(self.eta[-1].copy(), float(self.times[-1]))


# ---------------------------------------------------------------------------
# rate envelopes


@dataclass(frozen=True)
class _Compiled:
    scheds: tuple
    coef: np.ndarray
    win_ends: np.ndarray
    env_left: np.ndarray
    env_right: np.ndarray
    lam_left: np.ndarray = field(repr=False)
    lam_right: np.ndarray = field(repr=False)


def _side_envelopes(dens, inten, c_in, c_out, edges):
    x = np.asarray(dens(edges))
    lam = np.asarray(inten(edges))
    x_lo, x_hi = np.minimum(x[:-1], x[1:]), np.maximum(x[:-1], x[1:])
    l_hi = np.maximum(lam[:-1], lam[1:])
    env = l_hi * np.maximum(c_in * x_hi, c_out * (1.0 - x_lo))
    total = l_hi * np.maximum(
        c_in * x_hi + c_out * (1.0 - x_hi), c_in * x_lo + c_out * (1.0 - x_lo)
    )
    return env, total


@lru_cache(maxsize=256)
def _compile(spec: ModelSpec) -> _Compiled:
    """Windows and per-window boundary envelopes.

    Window edges include every schedule breakpoint, so each schedule is
    monotone inside a window and its range is read off the endpoints.
    """
    scheds, coef = spec.kernel_boundary()
    T = spec.T
    if T > 0:
        n_uniform = int(round(1.0 / MAX_WINDOW_FRACTION))
        edges = np.unique(np.concatenate([np.linspace(0.0, T, n_uniform + 1), spec.breakpoints]))
    else:
        edges = np.array([0.0, 1.0])
    b = spec.boundary
    if spec.is_liggett:
        one = lambda t: np.ones_like(np.asarray(t, dtype=float))
        left = (b.rho_bar_minus, one)
        right = (b.rho_bar_plus, one)
    else:
        left = (b.rho_minus, b.lambda_bar_minus)
        right = (b.rho_plus, b.lambda_bar_plus)
    env_l, lam_l = _side_envelopes(*left, coef[0], coef[1], edges)
    env_r, lam_r = _side_envelopes(*right, coef[2], coef[3], edges)
    win_ends = edges[1:].copy()
    win_ends[-1] = max(win_ends[-1], T)
    return _Compiled(scheds, coef, win_ends, env_l, env_r, lam_l, lam_r)


def total_rate_bound(spec: ModelSpec, window: tuple[float, float] | None = None) -> float:
    """Upper bound on the total event intensity throughout ``window``.

    ``N**(1+a) * [(N-1) lambda0 max(p, 1-p) + sup lambda_- + sup lambda_+]``.
    """
    comp = _compile(spec)
    if window is None:
        window = (0.0, spec.T)
    t0, t1 = window
    starts = np.concatenate([[0.0], comp.win_ends[:-1]])
    mask = (comp.win_ends > t0) & (starts <= t1)
    if not mask.any():
        mask[-1] = True
    bulk = (spec.N - 1) * spec.lambda0 * max(spec.p, 1.0 - spec.p)
    boundary = comp.lam_left[mask].max() + comp.lam_right[mask].max()
    return spec.speed * (bulk + boundary)


# ---------------------------------------------------------------------------
# initial conditions

Initial = Union[None, float, str, np.ndarray, Configuration, Callable[[Stream, int], np.ndarray]]


def initial_configuration(spec: ModelSpec, initial: Initial, stream: Stream) -> np.ndarray:
    """Initial occupation vector.

    ``None`` samples Bernoulli at the left boundary density at time 0; a
    float samples Bernoulli at that density; ``"empty"``/``"full"`` or an
    explicit 0/1 array or bitstring give deterministic states; a callable
    receives ``(stream, N)``.
    """
    N = spec.N
    if initial is None:
        initial = float(spec.boundary_densities(0.0)[0])
    if isinstance(initial, Configuration):
        eta = initial.eta.copy()
    elif isinstance(initial, str):
        if initial == "empty":
            eta = np.zeros(N, np.int8)
        elif initial == "full":
            eta = np.ones(N, np.int8)
        elif set(initial) <= {"0", "1"}:
            eta = np.array([int(c) for c in initial], np.int8)
        else:
            raise ValueError(f"unknown initial condition {initial!r}")
    elif callable(initial):
        eta = np.asarray(initial(stream, N), np.int8)
    elif np.ndim(initial) == 0:
        rho = float(initial)
        if not 0.0 <= rho <= 1.0:
            raise ValueError(f"initial density {rho} outside [0, 1]")
        eta = stream.bernoulli(rho, N)
    else:
        eta = np.asarray(initial, np.int8).copy()
    if eta.shape != (N,):
        raise ValueError(f"initial configuration has shape {eta.shape}, expected ({N},)")
    if np.any((eta != 0) & (eta != 1)):
        raise ValueError("occupations must be 0 or 1")
    return eta


# ---------------------------------------------------------------------------
# simulation


def _check_status(status, spec, t):
    if status == _kernels.BUDGET_EXCEEDED:
        raise EventBudgetExceeded(f"candidate budget exhausted at t={t:.6g} for N={spec.N}")
    if status == _kernels.ENVELOPE_VIOLATED:
        raise EnvelopeError(f"rate above thinning envelope at t={t:.6g}")


def _call(spec, comp, eta, hp, hm, t, t_stop, snap_times, snap_eta, snap_hp, snap_hm,
          state, max_accepted, max_candidates, check):
    xs, lms, ys, lps = comp.scheds
    bound = total_rate_bound(spec) if check else math.inf
    return _kernels.simulate(
        eta, hp, hm, float(t), float(t_stop), spec.speed, spec.lambda0, spec.p,
        xs, lms, ys, lps, comp.coef, comp.win_ends, comp.env_left, comp.env_right,
        snap_times, snap_eta, snap_hp, snap_hm, state,
        int(max_accepted), int(max_candidates), bool(check), float(bound),
    )


def step(
    config: Configuration,
    counts: CountingProcesses,
    spec: ModelSpec,
    rng: Stream,
    check: bool = True,
) -> tuple[Configuration, CountingProcesses, float]:
    """Advance to the next accepted event (or to the horizon if none occurs).

    Returns new copies of the configuration and counters and the time of
    the event; ``config`` and ``counts`` are left untouched.
    """
    comp = _compile(spec)
    eta = config.eta.copy()
    c = counts.copy()
    empty = np.empty(0)
    t, status, _, _, _ = _call(
        spec, comp, eta, c.h_plus, c.h_minus, config.t, spec.T,
        empty, np.empty((0, spec.N), np.int8), np.empty((0, spec.N + 1), np.int64),
        np.empty((0, spec.N + 1), np.int64), rng.state, 1, DEFAULT_MAX_CANDIDATES, check,
    )
    _check_status(status, spec, t)
    return Configuration(eta, t), c, t


def advance(
    config: Configuration,
    counts: CountingProcesses,
    spec: ModelSpec,
    rng: Stream,
    events: int,
    t_stop: float | None = None,
    max_candidates: int = DEFAULT_MAX_CANDIDATES,
) -> tuple[Configuration, CountingProcesses, int]:
    """Run until ``events`` accepted events or ``t_stop`` (default ``T``), whichever is first.

    Returns the new configuration and counters and the number of accepted
    events; the inputs are left untouched.
    """
    comp = _compile(spec)
    eta = config.eta.copy()
    c = counts.copy()
    empty = np.empty(0)
    t, status, accepted, _, _ = _call(
        spec, comp, eta, c.h_plus, c.h_minus, config.t, spec.T if t_stop is None else t_stop,
        empty, np.empty((0, spec.N), np.int8), np.empty((0, spec.N + 1), np.int64),
        np.empty((0, spec.N + 1), np.int64), rng.state, int(events), max_candidates, False,
    )
    _check_status(status, spec, t)
    return Configuration(eta, t), c, int(accepted)


def snapshot_times(T: float, cadence: float | None) -> np.ndarray:
    if T <= 0:
        return np.zeros(1)
    if cadence is None:
        cadence = T / DEFAULT_SNAPSHOTS
    n = max(1, int(math.floor(T / cadence + 1e-9)))
    times = np.arange(n + 1) * cadence
    times = times[times < T - 1e-12 * T]
    return np.append(times, T)


def run(
    spec: ModelSpec,
    initial: Initial = None,
    seed: int = 0,
    cadence: float | None = None,
    replica: int = 0,
    max_candidates: int = DEFAULT_MAX_CANDIDATES,
    check: bool = False,
) -> Trajectory:
    """Simulate one replica over ``[0, T]`` and record snapshots.

    Deterministic in ``(spec, initial, seed, replica, cadence)``.

    Raises
    ------
    EventBudgetExceeded
        If the expected number of candidate events exceeds ``max_candidates``
        before starting, or the realised count does during the run.
    """
    expected = total_rate_bound(spec) * spec.T
    if expected > max_candidates:
        raise EventBudgetExceeded(
            f"envelope {total_rate_bound(spec):.3g}/unit time over T={spec.T} "
            f"exceeds the budget of {max_candidates:.3g} candidate events"
        )
    stream = Stream(seed, replica)
    eta = initial_configuration(spec, initial, stream)
    N = spec.N
    times = snapshot_times(spec.T, cadence)
    n = times.size
    snap_eta = np.empty((n, N), np.int8)
    snap_hp = np.zeros((n, N + 1), np.int64)
    snap_hm = np.zeros((n, N + 1), np.int64)
    snap_eta[0] = eta
    hp = np.zeros(N + 1, np.int64)
    hm = np.zeros(N + 1, np.int64)
    accepted = candidates = 0
    if n > 1:
        comp = _compile(spec)
        t, status, accepted, candidates, written = _call(
            spec, comp, eta, hp, hm, 0.0, spec.T, times[1:], snap_eta[1:], snap_hp[1:],
            snap_hm[1:], stream.state, 1 << 62, max_candidates, check,
        )
        _check_status(status, spec, t)
        assert written == n - 1
    return Trajectory(spec, times, snap_eta, snap_hp, snap_hm, accepted, candidates, seed, replica)


def run_replicas(
    spec: ModelSpec,
    replicas: int,
    seed: int = 0,
    initial: Initial = None,
    cadence: float | None = None,
    reducer: Callable[[Trajectory], object] | None = None,
    **kwargs,
) -> list:
    """Run replicas ``0..replicas-1`` with streams ``(seed, r)``.

    With ``reducer`` the trajectories are reduced one at a time and only
    the reduced values are kept.
    """
    out = []
    for r in range(replicas):
        traj = run(spec, initial=initial, seed=seed, cadence=cadence, replica=r, **kwargs)
        out.append(reducer(traj) if reducer is not None else traj)
    return out


def final_states(
    spec: ModelSpec,
    replicas: int,
    seed: int = 0,
    initial: Initial = None,
    t: float | None = None,
    max_candidates: int = DEFAULT_MAX_CANDIDATES,
) -> np.ndarray:
    """Configurations at time ``t`` (default ``T``) of many independent replicas."""
    t_stop = spec.T if t is None else float(t)
    comp = _compile(spec)
    streams = [Stream(seed, r) for r in range(replicas)]
    init = np.stack([initial_configuration(spec, initial, s) for s in streams])
    states = np.stack([s.state for s in streams])
    xs, lms, ys, lps = comp.scheds
    out, failed = _kernels.simulate_final_states(
        init, states, t_stop, spec.speed, spec.lambda0, spec.p, xs, lms, ys, lps,
        comp.coef, comp.win_ends, comp.env_left, comp.env_right, int(max_candidates),
    )
    if failed >= 0:
        raise EventBudgetExceeded(f"candidate budget exhausted in replica {failed}")
    return out
