"""Replica orchestration and the statistical pipelines shared by the CLI and the demos."""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import engine
from .rates import Liggett, ModelSpec, Reversible
from .theory import on_theta, quasi_static_profile

__all__ = [
    "worker_count",
    "map_replicas",
    "BulkEstimate",
    "bulk_statistics",
    "SweepPoint",
    "phase_sweep",
    "conservation_holds",
]


def worker_count(default: int | None = None) -> int:
    """Worker pool size; the ``QSASEP_WORKERS`` environment variable caps it."""
    n = default if default is not None else (os.cpu_count() or 1)
    cap = os.environ.get("QSASEP_WORKERS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            warnings.warn(f"ignoring QSASEP_WORKERS={cap!r}")
    return max(1, n)


def map_replicas(fn: Callable, items: Iterable, workers: int | None = None) -> list:
    """``[fn(x) for x in items]``, in a process pool when more than one worker is allowed.

    Results come back in input order, so output never depends on scheduling.
    """
    items = list(items)
    workers = worker_count(workers)
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def conservation_holds(traj: engine.Trajectory) -> bool:
    """``eta_i(t) - eta_i(0) = h(i-1, t) - h(i, t)`` at every snapshot, exactly."""
    h = traj.h
    lhs = traj.eta.astype(np.int64) - traj.eta[0].astype(np.int64)
    rhs = h[:, :-1] - h[:, 1:]
    return bool(np.array_equal(lhs, rhs))


@dataclass
class BulkEstimate:
    density: float
    density_se: float
    flux: float
    flux_se: float
    replicas: int


def _middle(N: int) -> slice:
    return slice(N // 4, N - N // 4)


def _bulk_one(args) -> tuple[float, float]:
    spec, seed, r, initial, cadence, burn_in = args
    tr = engine.run(spec, initial=initial, seed=seed, replica=r, cadence=cadence)
    k0 = int(np.searchsorted(tr.times, burn_in * spec.T - 1e-12))
    mid = _middle(spec.N)
    dens = tr.eta[k0:, mid].mean()
    h = tr.h
    bonds = np.arange(spec.N // 4, spec.N - spec.N // 4 + 1)
    dt = tr.times[-1] - tr.times[k0]
    fl = ((h[-1, bonds] - h[k0, bonds]) / (spec.speed * dt)).mean()
    return float(dens), float(fl)


def bulk_statistics(
    spec: ModelSpec,
    replicas: int,
    seed: int = 0,
    burn_in: float = 0.5,
    initial=None,
    cadence: float | None = None,
    workers: int | None = 1,
) -> BulkEstimate:
    """Bulk density and current after a burn-in, with replica standard errors.

    Density averages the middle half of the sites over snapshots after
    ``burn_in * T``; the current is the time-averaged current over the
    same window, averaged over the middle bonds.
    """
    args = [(spec, seed, r, initial, cadence, burn_in) for r in range(replicas)]
    vals = np.array(map_replicas(_bulk_one, args, workers))
    se = vals.std(axis=0, ddof=1) / math.sqrt(replicas) if replicas > 1 else np.full(2, np.nan)
    d, f = vals.mean(axis=0)
    return BulkEstimate(float(d), float(se[0]), float(f), float(se[1]), replicas)


@dataclass
class SweepPoint:
    rho_minus: float
    rho_plus: float
    label: str
    density: float
    density_se: float
    density_oracle: float
    flux: float
    flux_se: float
    flux_oracle: float
    density_ok: bool
    flux_ok: bool

    @property
    def density_z(self) -> float:
        return (self.density - self.density_oracle) / self.density_se if self.density_se > 0 else math.inf

    @property
    def flux_z(self) -> float:
        return (self.flux - self.flux_oracle) / self.flux_se if self.flux_se > 0 else math.inf

    @property
    def ok(self) -> bool:
        return self.density_ok and self.flux_ok


def phase_sweep(
    make_spec: Callable[[float, float], ModelSpec],
    grid: Sequence[tuple[float, float]],
    replicas: int,
    seed: int = 0,
    theta_margin: float = 0.02,
    burn_in: float = 0.5,
    density_tol: float = 0.03,
    flux_tol: float = 0.02,
    z: float = 3.0,
    initial=None,
    workers: int | None = 1,
) -> tuple[list[SweepPoint], list[tuple[float, float]]]:
    """Simulated bulk state against the oracle at each grid point.

    A point passes when the density is within ``max(density_tol, z se)``
    and the current within ``max(flux_tol, z se)`` of the prediction.
    Points within ``theta_margin`` of the critical line are skipped with a
    warning and returned separately.
    """
    points, excluded = [], []
    for k, (rm, rp) in enumerate(grid):
        if on_theta(rm, rp, theta_margin):
            warnings.warn(f"grid point ({rm}, {rp}) lies within {theta_margin} of the critical line; skipped")
            excluded.append((rm, rp))
            continue
        spec = make_spec(rm, rp)
        dm, dp = spec.boundary_densities(0.0)
        oracle = quasi_static_profile(dm, dp, spec.p_bar)
        est = bulk_statistics(spec, replicas, seed + 7919 * k, burn_in, initial, workers=workers)
        d_ok = abs(est.density - oracle.rho) <= max(density_tol, z * est.density_se)
        f_ok = abs(est.flux - oracle.flux) <= max(flux_tol, z * est.flux_se)
        points.append(SweepPoint(rm, rp, oracle.label, est.density, est.density_se, oracle.rho,
                                 est.flux, est.flux_se, oracle.flux, bool(d_ok), bool(f_ok)))
    return points, excluded


def liggett_spec_maker(N: int, a: float, p_bar: float, T: float) -> Callable[[float, float], ModelSpec]:
    return lambda rm, rp: ModelSpec(N, a, p_bar, Liggett(rm, rp), T)


def reversible_spec_maker(N: int, a: float, p_bar: float, T: float) -> Callable[[float, float], ModelSpec]:
    return lambda rm, rp: ModelSpec(N, a, p_bar, Reversible.with_defaults(N, rm, rp), T)
