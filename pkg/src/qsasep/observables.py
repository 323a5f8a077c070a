"""Mesoscopic observables of simulated trajectories.

Sites are 1-based in the public functions (``i = 1..N``), matching the
counting-process bond labels; arrays are still indexed from 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .engine import Configuration, CountingProcesses, Trajectory
from .rates import ModelSpec, Schedule
from .theory import flux, flux_derivative

__all__ = [
    "DensityField",
    "EntropyPair",
    "EntropyProductionReport",
    "TestFunction",
    "YoungHistogram",
    "builtin_pairs",
    "bump",
    "plateau",
    "left_block_average",
    "smoothed_average",
    "smoothing_weights",
    "smoothed_profile",
    "microscopic_current",
    "time_averaged_current",
    "current_statistics",
    "density_profile",
    "young_histogram",
    "boundary_entropy_production",
]


def _eta(config) -> np.ndarray:
    return config.eta if isinstance(config, Configuration) else np.asarray(config)


# ---------------------------------------------------------------------------
# density fields and block averages


@dataclass(frozen=True)
class DensityField:
    """Per-site values viewed as a step function on ``[0, 1]``.

    Site ``i`` owns the cell ``[i/N - 1/2N, i/N + 1/2N) & [0, 1]``; the
    strip ``[0, 1/2N)`` belongs to no site and carries the value 0.
    """

    values: np.ndarray

    @property
    def N(self) -> int:
        return self.values.shape[-1]

    def cell_edges(self) -> np.ndarray:
        N = self.N
        edges = (np.arange(1, N + 2) - 0.5) / N
        edges[-1] = 1.0
        return edges

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        N = self.N
        idx = np.floor(x * N + 0.5).astype(np.int64)
        idx = np.clip(idx, 0, N)
        padded = np.concatenate([[0.0], np.asarray(self.values, dtype=float)])
        return padded[idx]

    def integral(self, phi_antiderivative: Callable | None = None) -> float:
        """``int_0^1 rho(x) phi(x) dx`` given an antiderivative of ``phi`` (default ``phi = 1``)."""
        edges = self.cell_edges()
        if phi_antiderivative is None:
            w = np.diff(edges)
        else:
            w = np.diff(phi_antiderivative(edges))
        return float(np.dot(self.values, w))


def left_block_average(config, i: int, k: int) -> float:
    """Mean of ``eta`` over the ``k`` sites ``i-k+1, ..., i``."""
    eta = _eta(config)
    N = eta.shape[-1]
    if not 1 <= k <= i <= N:
        raise IndexError(f"need 1 <= k <= i <= N, got k={k}, i={i}, N={N}")
    return float(np.mean(eta[i - k : i]))


def smoothing_weights(K: int) -> np.ndarray:
    """Triangular weights ``(K - |j|)/K**2`` for ``|j| < K``; they sum to 1."""
    if K < 1:
        raise ValueError("K must be at least 1")
    j = np.arange(-(K - 1), K)
    return (K - np.abs(j)) / float(K * K)


def smoothed_average(config, i: int, K: int) -> float:
    """Weighted average ``sum_{|j|<K} w_j eta_{i-j}`` at an interior site."""
    eta = _eta(config)
    N = eta.shape[-1]
    if not K + 1 <= i <= N - K:
        raise IndexError(f"site {i} outside the interior range [{K + 1}, {N - K}]")
    w = smoothing_weights(K)
    return float(np.dot(eta[i - K : i + K - 1], w))


def smoothed_profile(eta: np.ndarray, K: int) -> np.ndarray:
    """Smoothed averages at every site, zero outside ``K+1..N-K``.

    Accepts a single configuration or a stack ``(..., N)``.
    """
    eta = np.asarray(eta, dtype=float)
    N = eta.shape[-1]
    out = np.zeros(eta.shape)
    if N - K < K + 1:
        return out
    # triangle = box * box: two running means of width K
    c = np.cumsum(eta, axis=-1)
    c = np.concatenate([np.zeros(eta.shape[:-1] + (1,)), c], axis=-1)
    box = (c[..., K:] - c[..., :-K]) / K  # box[..., m] = mean of eta[m : m+K]
    c2 = np.cumsum(box, axis=-1)
    c2 = np.concatenate([np.zeros(box.shape[:-1] + (1,)), c2], axis=-1)
    tri = (c2[..., K:] - c2[..., :-K]) / K  # tri[..., m] centred at array index m+K-1
    # site i (1-based) is array index i-1 = m+K-1, so m = i-K
    out[..., K : N - K] = tri[..., 1 : N - 2 * K + 1]
    return out


# ---------------------------------------------------------------------------
# currents


def microscopic_current(config, i: int, t: float, spec: ModelSpec) -> float:
    """Expected instantaneous current across bond ``i`` (0 = left reservoir, N = right)."""
    eta = _eta(config)
    N = spec.N
    if not 0 <= i <= N:
        raise IndexError(f"bond {i} outside 0..{N}")
    pb = spec.p_bar
    b = spec.boundary
    if spec.is_liggett:
        sym = 0.5 * (1.0 - pb)
        if i == 0:
            r = spec.rates_at(t)
            return spec.p * b.rho_bar_minus(t) - r.lambda_minus * eta[0]
        if i == N:
            r = spec.rates_at(t)
            return r.lambda_plus * eta[N - 1] - (1.0 - spec.p) * b.rho_bar_plus(t)
    else:
        sym = 0.5 * (b.sigma - pb)
        st = b.sigma_tilde
        if i == 0:
            return st * b.lambda_bar_minus(t) * (b.rho_minus(t) - eta[0])
        if i == N:
            return st * b.lambda_bar_plus(t) * (eta[N - 1] - b.rho_plus(t))
    left, right = float(eta[i - 1]), float(eta[i])
    return pb * left * (1.0 - right) + sym * (left - right)


def time_averaged_current(
    counts_1: CountingProcesses, counts_2: CountingProcesses, i, spec: ModelSpec, t1: float, t2: float
):
    """``[h(i, t2) - h(i, t1)] / (N**(1+a) (t2 - t1))``; ``i`` may be an index array."""
    if not t1 < t2:
        raise ValueError("need t1 < t2")
    dh = counts_2.h[i] - counts_1.h[i]
    return dh / (spec.speed * (t2 - t1))


def current_statistics(
    trajectories: Sequence[Trajectory], t1: float, t2: float, bonds=None
) -> tuple[float, float]:
    """Replica mean and standard error of the bond-averaged time-averaged current.

    Uses the snapshots closest to ``t1`` and ``t2``; ``bonds`` defaults to
    all bulk bonds ``1..N-1``.
    """
    vals = []
    for tr in trajectories:
        k1 = int(np.argmin(np.abs(tr.times - t1)))
        k2 = int(np.argmin(np.abs(tr.times - t2)))
        _, _, c1 = tr.snapshot(k1)
        _, _, c2 = tr.snapshot(k2)
        idx = np.arange(1, tr.spec.N) if bonds is None else np.asarray(bonds)
        vals.append(
            time_averaged_current(c1, c2, idx, tr.spec, tr.times[k1], tr.times[k2]).mean()
        )
    return _mean_se(vals)


def _mean_se(vals) -> tuple[float, float]:
    vals = np.asarray(vals, dtype=float)
    n = vals.shape[0]
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.full_like(mean, np.nan)
    return mean, se


def density_profile(trajectories: Sequence[Trajectory], x_cells: int = 20):
    """Replica mean and standard error of the cell-averaged density.

    Returns ``(times, mean, stderr)`` with ``mean`` of shape ``(snapshots, x_cells)``;
    ``x_cells`` is capped at ``N``.
    """
    per = []
    x_cells = min(x_cells, trajectories[0].spec.N)
    for tr in trajectories:
        N = tr.spec.N
        cells = np.minimum((np.arange(N) * x_cells) // N, x_cells - 1)
        sums = np.zeros((tr.eta.shape[0], x_cells))
        np.add.at(sums.T, cells, tr.eta.T.astype(float))
        per.append(sums / np.bincount(cells, minlength=x_cells))
    mean, se = _mean_se(per)
    return trajectories[0].times, mean, se


# ---------------------------------------------------------------------------
# Young-measure histogram


@dataclass
class YoungHistogram:
    """Normalised occupation frequencies ``mass[t_cell, x_cell, bin]``."""

    mass: np.ndarray
    counts: np.ndarray
    t_edges: np.ndarray
    x_edges: np.ndarray
    bin_edges: np.ndarray

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    def mode(self) -> np.ndarray:
        """Most populated bin centre per ``(t_cell, x_cell)``."""
        return self.bin_centers[np.argmax(self.mass, axis=-1)]

    def concentration_score(self, rho: Callable[[float, float], float], radius: float = 0.1) -> float:
        """Mass in bins centred within ``radius`` of ``rho(x, t)``, averaged over populated cells."""
        centers = self.bin_centers
        tc = 0.5 * (self.t_edges[:-1] + self.t_edges[1:])
        xc = 0.5 * (self.x_edges[:-1] + self.x_edges[1:])
        total = 0.0
        weight = 0.0
        for a, t in enumerate(tc):
            for b, x in enumerate(xc):
                if self.counts[a, b] == 0:
                    continue
                near = np.abs(centers - rho(x, t)) <= radius + 1e-12
                total += self.mass[a, b, near].sum() * self.counts[a, b]
                weight += self.counts[a, b]
        return total / weight if weight else float("nan")


def _bin_of(values: np.ndarray, n_bins: int) -> np.ndarray:
    # small guard so exact multiples of the bin width land where expected
    return np.clip(np.floor(values * n_bins + 1e-9).astype(np.int64), 0, n_bins - 1)


def young_histogram(
    trajectories,
    K: int,
    space_cells: int = 20,
    time_cells: int = 20,
    bins: int = 20,
) -> YoungHistogram:
    """Histogram of smoothed averages per space-time cell, pooled over replicas."""
    if bins < 10:
        raise ValueError("use at least 10 density bins")
    if isinstance(trajectories, Trajectory):
        trajectories = [trajectories]
    tr0 = trajectories[0]
    N, T = tr0.spec.N, tr0.spec.T
    sites = np.arange(K + 1, N - K + 1)
    x = sites / N
    x_idx = np.minimum((x * space_cells).astype(np.int64), space_cells - 1)
    counts = np.zeros((time_cells, space_cells, bins))
    for tr in trajectories:
        prof = smoothed_profile(tr.eta, K)[:, sites - 1]
        t_idx = np.minimum((tr.times / T * time_cells).astype(np.int64), time_cells - 1) if T > 0 \
            else np.zeros(tr.times.size, np.int64)
        b_idx = _bin_of(prof, bins)
        ti = np.broadcast_to(t_idx[:, None], b_idx.shape)
        xi = np.broadcast_to(x_idx[None, :], b_idx.shape)
        np.add.at(counts, (ti.ravel(), xi.ravel(), b_idx.ravel()), 1.0)
    tot = counts.sum(axis=-1)
    mass = np.divide(counts, tot[..., None], out=np.zeros_like(counts), where=tot[..., None] > 0)
    return YoungHistogram(
        mass,
        tot,
        np.linspace(0.0, T, time_cells + 1),
        np.linspace(0.0, 1.0, space_cells + 1),
        np.linspace(0.0, 1.0, bins + 1),
    )


# ---------------------------------------------------------------------------
# entropy pairs


@dataclass(frozen=True)
class EntropyPair:
    """Boundary entropy / entropy-flux pair ``(F, Q)`` with partial derivatives.

    All callables take ``(u, w)`` and broadcast over arrays.  Derivatives at
    kinks take the value 0.  ``kinks(u, w)`` flags the points where ``F``
    fails to be differentiable in ``u``.
    """

    name: str
    F: Callable
    Q: Callable
    dF_du: Callable
    dF_dw: Callable
    dQ_du: Callable
    kinks: Callable
    p_bar: float = 1.0
    smooth: bool = False

    def check_contract(
        self, n: int = 10_000, seed: int = 0, rel_tol: float = 1e-6, h: float = 1e-6
    ) -> dict:
        """Verify ``F(w,w) = Q(w,w) = dF_du(w,w) = 0`` and the chain rule.

        The chain rule ``J'(u) dF_du = dQ_du`` is checked analytically and
        against central differences of ``F`` and ``Q`` at ``n`` random
        points at least ``10 h`` away from every kink.
        """
        rng = np.random.default_rng(seed)
        grid = np.linspace(0.0, 1.0, 1001)
        diag = max(
            np.abs(self.F(grid, grid)).max(),
            np.abs(self.Q(grid, grid)).max(),
            np.abs(self.dF_du(grid, grid)).max(),
        )
        u = np.empty(0)
        w = np.empty(0)
        while u.size < n:
            uu = rng.uniform(0.0, 1.0, 2 * n)
            ww = rng.uniform(0.0, 1.0, 2 * n)
            ok = ~(self.kinks(uu, ww, 10 * h) | (uu < 10 * h) | (uu > 1 - 10 * h))
            u = np.concatenate([u, uu[ok]])
            w = np.concatenate([w, ww[ok]])
        u, w = u[:n], w[:n]
        jp = flux_derivative(u, self.p_bar)
        fd_F = (self.F(u + h, w) - self.F(u - h, w)) / (2 * h)
        fd_Q = (self.Q(u + h, w) - self.Q(u - h, w)) / (2 * h)
        scale = np.maximum(np.abs(fd_Q), 1.0)
        chain_fd = np.abs(jp * fd_F - fd_Q) / scale
        chain_exact = np.abs(jp * self.dF_du(u, w) - self.dQ_du(u, w)) / scale
        deriv_fd = np.abs(fd_F - self.dF_du(u, w)) / np.maximum(np.abs(fd_F), 1.0)
        worst = max(chain_fd.max(), chain_exact.max(), deriv_fd.max())
        return {
            "pair": self.name,
            "diagonal_max": float(diag),
            "chain_rule_max_rel": float(worst),
            "points": int(n),
            "ok": bool(diag == 0.0 and worst <= rel_tol),
        }


def _kruzkov(p_bar: float) -> EntropyPair:
    J = lambda v: flux(v, p_bar)
    return EntropyPair(
        "kruzkov",
        F=lambda u, w: np.abs(u - w),
        Q=lambda u, w: np.sign(u - w) * (J(u) - J(w)),
        dF_du=lambda u, w: np.sign(u - w),
        dF_dw=lambda u, w: -np.sign(u - w),
        dQ_du=lambda u, w: np.sign(u - w) * flux_derivative(u, p_bar),
        kinks=lambda u, w, d=0.0: np.abs(u - w) <= d,
        p_bar=p_bar,
    )


def _lower(p_bar: float) -> EntropyPair:
    J = lambda v: flux(v, p_bar)
    c = lambda w: np.minimum(w, 0.5)
    act = lambda u, w: u < c(w)
    return EntropyPair(
        "lower",
        F=lambda u, w: np.maximum(c(w) - u, 0.0),
        Q=lambda u, w: np.where(act(u, w), J(c(w)) - J(u), 0.0),
        dF_du=lambda u, w: np.where(act(u, w), -1.0, 0.0),
        dF_dw=lambda u, w: np.where(act(u, w) & (w < 0.5), 1.0, 0.0),
        dQ_du=lambda u, w: np.where(act(u, w), -flux_derivative(u, p_bar), 0.0),
        kinks=lambda u, w, d=0.0: np.abs(u - c(w)) <= d,
        p_bar=p_bar,
    )


def _upper(p_bar: float) -> EntropyPair:
    J = lambda v: flux(v, p_bar)
    c = lambda w: np.maximum(w, 0.5)
    act = lambda u, w: u > c(w)
    return EntropyPair(
        "upper",
        F=lambda u, w: np.maximum(u - c(w), 0.0),
        Q=lambda u, w: np.where(act(u, w), J(u) - J(c(w)), 0.0),
        dF_du=lambda u, w: np.where(act(u, w), 1.0, 0.0),
        dF_dw=lambda u, w: np.where(act(u, w) & (w > 0.5), -1.0, 0.0),
        dQ_du=lambda u, w: np.where(act(u, w), flux_derivative(u, p_bar), 0.0),
        kinks=lambda u, w, d=0.0: np.abs(u - c(w)) <= d,
        p_bar=p_bar,
    )


def builtin_pairs(p_bar: float = 1.0) -> list[EntropyPair]:
    """Kruzkov pair and the two one-sided pairs cut at ``1/2``."""
    return [_kruzkov(p_bar), _lower(p_bar), _upper(p_bar)]


# ---------------------------------------------------------------------------
# test functions and boundary entropy production


@dataclass(frozen=True)
class TestFunction:
    """Separable ``psi(x, t) = phi(x) g(t)`` with an exact antiderivative of ``phi``."""

    name: str
    phi: Callable
    Phi: Callable
    g: Callable
    dg: Callable

    __test__ = False  # not a pytest class

    def __call__(self, x, t):
        return self.phi(np.asarray(x)) * self.g(np.asarray(t))

    def check_endpoints(self, T: float, tol: float = 1e-12) -> None:
        x = np.linspace(0.0, 1.0, 101)
        worst = max(np.abs(self(x, 0.0)).max(), np.abs(self(x, T)).max())
        if worst > tol:
            raise ValueError(f"test function {self.name!r} does not vanish at t=0 and t=T ({worst:.3g})")


def _time_factor(T: float):
    if not T > 0:
        raise ValueError("test functions need a positive horizon")
    g = lambda t: np.sin(np.pi * t / T) ** 2
    dg = lambda t: (np.pi / T) * np.sin(2.0 * np.pi * t / T)
    return g, dg


def bump(T: float) -> TestFunction:
    """``sin(pi x) sin(pi t / T)**2``."""
    g, dg = _time_factor(T)
    return TestFunction(
        "bump",
        phi=lambda x: np.sin(np.pi * x),
        Phi=lambda x: -np.cos(np.pi * x) / np.pi,
        g=g,
        dg=dg,
    )


def plateau(T: float, x0: float = 0.4, x1: float = 0.6) -> TestFunction:
    """Equal to 1 near the left boundary, zero near the right one.

    ``phi = 1`` on ``[0, x0]``, a quintic smoothstep down to 0 on
    ``[x0, x1]`` (C2 across both joints) and 0 beyond; times ``sin(pi t/T)**2``.
    """
    g, dg = _time_factor(T)
    width = x1 - x0

    def s_of(x):
        return np.clip((np.asarray(x, dtype=float) - x0) / width, 0.0, 1.0)

    def phi(x):
        s = s_of(x)
        return 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s * s)

    def Phi(x):
        x = np.asarray(x, dtype=float)
        s = s_of(x)
        ramp = width * (s - (2.5 * s**4 - 3.0 * s**5 + s**6))
        return np.minimum(x, x0) + ramp

    return TestFunction("plateau", phi=phi, Phi=Phi, g=g, dg=dg)


@dataclass
class EntropyProductionReport:
    """``value = time_term + flux_term``; ``time_term`` already carries ``N**-a``."""

    value: float
    time_term: float
    flux_term: float
    N: int
    K: int
    pair: str
    psi: str
    breakdown: dict = field(default_factory=dict)


def boundary_entropy_production(
    trajectory: Trajectory,
    pair: EntropyPair,
    psi: TestFunction,
    w: Schedule,
    K: int,
) -> EntropyProductionReport:
    """Evaluate the boundary entropy production of one trajectory.

    ``rho_N`` is the smoothed average on the interior cells and 0 elsewhere.
    The x-integrals are exact cell sums; the t-integral is the trapezoid
    rule over snapshots, with ``w'`` taken from the schedule analytically.
    """
    spec = trajectory.spec
    N, T = spec.N, spec.T
    psi.check_endpoints(T)
    t = trajectory.times
    rho = smoothed_profile(trajectory.eta, K)  # (snapshots, N)
    edges = DensityField(np.zeros(N)).cell_edges()
    left_strip = edges[0]  # [0, 1/2N) belongs to no site; rho_N = 0 there
    phi_mass = np.diff(psi.Phi(edges))
    phi_jump = np.diff(psi.phi(edges))
    strip_mass = float(psi.Phi(left_strip) - psi.Phi(0.0))
    strip_jump = float(psi.phi(left_strip) - psi.phi(0.0))

    wt = np.asarray(w(t), dtype=float)
    dwt = np.asarray(w.derivative(t), dtype=float)
    ww = wt[:, None]
    zero = np.zeros_like(wt)
    F = pair.F(rho, ww) @ phi_mass + pair.F(zero, wt) * strip_mass
    dFw = pair.dF_dw(rho, ww) @ phi_mass + pair.dF_dw(zero, wt) * strip_mass
    Q = pair.Q(rho, ww) @ phi_jump + pair.Q(zero, wt) * strip_jump

    g, dg = psi.g(t), psi.dg(t)
    time_integrand = F * dg + dFw * dwt * g
    flux_integrand = Q * g
    time_term = N ** (-spec.a) * float(np.trapezoid(time_integrand, t))
    flux_term = float(np.trapezoid(flux_integrand, t))
    return EntropyProductionReport(
        time_term + flux_term,
        time_term,
        flux_term,
        N,
        K,
        pair.name,
        psi.name,
        {"snapshots": int(t.size)},
    )
