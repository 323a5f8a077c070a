"""Finite-volume solver for ``eps d_t rho + d_x J(rho) = 0`` on ``[0, 1]``.

First-order Godunov with ghost cells holding the reservoir densities,
which imposes the boundary conditions in the entropy (BLN) sense.  Small
``eps`` only changes the time scale, so steady states do not depend on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .rates import Schedule, as_schedule
from .theory import flux, flux_derivative, godunov_flux, on_theta, quasi_static_profile

__all__ = [
    "CFL_SAFETY",
    "CFLError",
    "Field1D",
    "interface_fluxes",
    "godunov_step",
    "max_stable_dt",
    "SteadyState",
    "steady_state",
    "steady_states",
    "SweepRun",
    "quasi_static_sweep",
]

CFL_SAFETY = 0.9
TAU_MAX = 1e6  # keeps the PTC matrix regular where the flux is flat


class CFLError(ValueError):
    """Time step above the stability limit ``cfl * eps * dx / p_bar``."""


@dataclass(frozen=True)
class Field1D:
    """Cell averages on a uniform grid of ``[0, 1]`` plus ghost values."""

    cells: np.ndarray
    ghost_left: float
    ghost_right: float

    @property
    def M(self) -> int:
        return self.cells.shape[-1]

    @property
    def dx(self) -> float:
        return 1.0 / self.M

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.M) + 0.5) * self.dx


def interface_fluxes(cells, ghost_left, ghost_right, p_bar: float = 1.0) -> np.ndarray:
    """Godunov fluxes at the ``M + 1`` interfaces; works on batches ``(B, M)``."""
    cells = np.asarray(cells, dtype=float)
    gl = np.asarray(ghost_left, dtype=float)[..., None]
    gr = np.asarray(ghost_right, dtype=float)[..., None]
    ext = np.concatenate([np.broadcast_to(gl, cells.shape[:-1] + (1,)), cells,
                          np.broadcast_to(gr, cells.shape[:-1] + (1,))], axis=-1)
    return np.asarray(godunov_flux(ext[..., :-1], ext[..., 1:], p_bar))


def max_stable_dt(epsilon: float, dx: float, p_bar: float = 1.0, cfl: float = CFL_SAFETY) -> float:
    return cfl * epsilon * dx / p_bar


def godunov_step(
    field: Field1D,
    epsilon: float,
    dt: float,
    boundary: tuple[float, float] | None = None,
    p_bar: float = 1.0,
    cfl: float = CFL_SAFETY,
) -> Field1D:
    """One explicit update; ``boundary`` replaces the ghost values if given."""
    if dt > max_stable_dt(epsilon, field.dx, p_bar, cfl) * (1.0 + 1e-12):
        raise CFLError(
            f"dt={dt:.3g} exceeds {cfl} * eps * dx / p_bar = {max_stable_dt(epsilon, field.dx, p_bar, cfl):.3g}"
        )
    gl, gr = boundary if boundary is not None else (field.ghost_left, field.ghost_right)
    f = interface_fluxes(field.cells, gl, gr, p_bar)
    new = field.cells - dt / (epsilon * field.dx) * (f[..., 1:] - f[..., :-1])
    return Field1D(new, float(gl), float(gr))


# ---------------------------------------------------------------------------
# steady states


def _flux_partials(left, right, p_bar):
    """One-sided derivatives of the Godunov flux in each argument.

    Values follow the upwind side, so ``d_left >= 0 >= d_right`` (the
    scheme is monotone); at the sonic point both vanish.
    """
    jl, jr = flux(left, p_bar), flux(right, p_bar)
    dl, dr = flux_derivative(left, p_bar), flux_derivative(right, p_bar)
    rising = left <= right
    sonic = (~rising) & (right <= 0.5) & (0.5 <= left)
    take_left = np.where(rising, jl < jr, jl > jr)
    tie = jl == jr
    same = left == right
    d_left = np.where(take_left, dl, 0.0)
    d_right = np.where(take_left, 0.0, dr)
    # equal states are upwinded by the sign of J'; a transonic tie splits
    d_left = np.where(tie & same, np.where(dl > 0, dl, 0.0), d_left)
    d_right = np.where(tie & same, np.where(dr < 0, dr, 0.0), d_right)
    d_left = np.where(tie & ~same, 0.5 * np.maximum(dl, 0.0), d_left)
    d_right = np.where(tie & ~same, 0.5 * np.minimum(dr, 0.0), d_right)
    d_left = np.where(sonic, 0.0, d_left)
    d_right = np.where(sonic, 0.0, d_right)
    return d_left, d_right


def _residual(rho, gl, gr, p_bar):
    f = interface_fluxes(rho, gl, gr, p_bar)
    return f[..., 1:] - f[..., :-1], f


@dataclass
class SteadyState:
    rho_minus: float
    rho_plus: float
    cells: np.ndarray
    fluxes: np.ndarray
    converged: bool
    update_norm: float
    explicit_steps: int
    newton_steps: int

    @property
    def flux(self) -> float:
        return float(self.fluxes.mean())

    @property
    def flux_spread(self) -> float:
        return float(self.fluxes.max() - self.fluxes.min())


def _march(rho, gl, gr, p_bar, dt_over_dx, steps, tol):
    """Explicit steps (``eps = 1``) on a batch until the relative update drops below ``tol``."""
    done = 0
    for done in range(1, steps + 1):
        f = interface_fluxes(rho, gl, gr, p_bar)
        upd = dt_over_dx * (f[:, 1:] - f[:, :-1])
        rho = rho - upd
        if done % 64 == 0:
            rel = np.abs(upd).max(axis=1) / np.maximum(np.abs(rho).max(axis=1), 1e-300)
            if rel.max() < tol:
                break
    return rho, done


def _ptc_polish(rho, gl, gr, p_bar, dx, tol, max_iter):
    """Pseudo-transient continuation: implicit Euler with growing pseudo time steps."""
    M = rho.size
    res, _ = _residual(rho, gl, gr, p_bar)
    r0 = np.abs(res).max()
    tau = 10.0 * dx / p_bar
    rel = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        ext = np.concatenate([[gl], rho, [gr]])
        dl, dr = _flux_partials(ext[:-1], ext[1:], p_bar)  # interface k joins ext[k], ext[k+1]
        # d res_m / d rho_{m-1}, rho_m, rho_{m+1}; res_m = f_{m+1} - f_m
        sub = -dl[1:M]            # w.r.t. rho_{m-1} for m = 1..M-1
        diag = dl[1:] - dr[:-1]
        sup = dr[1:M]             # w.r.t. rho_{m+1}
        ab = np.zeros((3, M))
        ab[0, 1:] = sup
        ab[1] = diag / dx + 1.0 / tau
        ab[2, :-1] = sub
        ab[0, 1:] /= dx
        ab[2, :-1] /= dx
        delta = solve_banded((1, 1), ab, -res / dx)
        rho = np.clip(rho + delta, 0.0, 1.0)
        rel = np.abs(delta).max() / max(np.abs(rho).max(), 1e-300)
        res, _ = _residual(rho, gl, gr, p_bar)
        rn = np.abs(res).max()
        tau = min(tau * max(r0 / max(rn, 1e-300), 1.0) * 2.0, TAU_MAX)
        r0 = max(rn, 1e-300)
        if rel < tol and rn < 1e-13:
            break
    return rho, it, rel


def steady_states(
    pairs,
    p_bar: float = 1.0,
    M: int = 200,
    tol: float = 1e-12,
    march_tol: float = 1e-6,
    max_march_steps: int = 2_000,
    max_newton: int = 2_000,
) -> list[SteadyState]:
    """Numerical steady states for many boundary pairs ``(rho_-, rho_+)``.

    Each field starts from the linear interpolation of the boundary data,
    is marched explicitly until updates are small, then polished by
    pseudo-transient continuation until the relative update falls below
    ``tol``.
    """
    pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
    gl, gr = pairs[:, 0], pairs[:, 1]
    dx = 1.0 / M
    x = (np.arange(M) + 0.5) * dx
    rho = gl[:, None] + (gr - gl)[:, None] * x[None, :]
    rho, steps = _march(rho, gl, gr, p_bar, CFL_SAFETY / p_bar, max_march_steps, march_tol)
    out = []
    for b in range(pairs.shape[0]):
        cells, it, rel = _ptc_polish(rho[b].copy(), gl[b], gr[b], p_bar, dx, tol, max_newton)
        f = interface_fluxes(cells, gl[b], gr[b], p_bar)
        out.append(SteadyState(gl[b], gr[b], cells, f, bool(rel < tol), float(rel), steps, it))
    return out


def steady_state(rho_minus: float, rho_plus: float, p_bar: float = 1.0, M: int = 200, **kw) -> SteadyState:
    return steady_states([(rho_minus, rho_plus)], p_bar=p_bar, M=M, **kw)[0]


# ---------------------------------------------------------------------------
# quasi-static sweep


@dataclass
class SweepRun:
    """Result of one ``eps``: recorded fields, interface fluxes and oracle distances."""

    epsilon: float
    times: np.ndarray
    rho: np.ndarray
    fluxes: np.ndarray
    oracle_rho: np.ndarray
    oracle_flux: np.ndarray
    density_distance: float
    flux_distance: float
    steps: int
    extra: dict = field(default_factory=dict)


def quasi_static_sweep(
    epsilons,
    rho_minus,
    rho_plus,
    T: float = 1.0,
    M: int = 200,
    p_bar: float = 1.0,
    records: int = 50,
    initial="oracle",
    interior: float = 0.1,
    settle: float = 0.0,
    theta_tolerance: float = 1e-9,
) -> list[SweepRun]:
    """Evolve the regularised equation for each ``eps`` and compare to the oracle.

    ``initial`` is ``"oracle"`` (the predicted bulk density at t=0),
    ``"left"`` (the left boundary value) or an array of ``M`` cell values.
    Distances are sup-norms over recorded times ``t >= settle`` and over
    cells with centres in ``[interior, 1 - interior]``; times at which the
    boundary data sit on the critical line are skipped for the density.
    """
    eps_list = [float(e) for e in epsilons]
    if any(e <= 0 for e in eps_list):
        raise ValueError("epsilons must be positive")
    if any(b >= a for a, b in zip(eps_list[:-1], eps_list[1:])):
        raise ValueError("epsilons must be strictly decreasing")
    sm, sp = as_schedule(rho_minus, T), as_schedule(rho_plus, T)
    dx = 1.0 / M
    x = (np.arange(M) + 0.5) * dx
    keep = (x >= interior) & (x <= 1.0 - interior)
    rec_t = np.linspace(0.0, T, records + 1)
    oracle = [quasi_static_profile(sm(t), sp(t), p_bar, theta_tolerance) for t in rec_t]
    o_rho = np.array([np.nan if o.rho is None else o.rho for o in oracle])
    o_flux = np.array([o.flux for o in oracle])

    if isinstance(initial, str):
        if initial == "oracle":
            start = o_rho[0] if not np.isnan(o_rho[0]) else sm(0.0)
            rho0 = np.full(M, start)
        elif initial == "left":
            rho0 = np.full(M, sm(0.0))
        else:
            raise ValueError(f"unknown initial field {initial!r}")
    else:
        rho0 = np.asarray(initial, dtype=float).copy()
        if rho0.shape != (M,):
            raise ValueError(f"initial field must have {M} cells")

    runs = []
    for eps in eps_list:
        dt_max = max_stable_dt(eps, dx, p_bar)
        rho = rho0.copy()
        t = 0.0
        rec_rho = np.empty((records + 1, M))
        rec_f = np.empty((records + 1, M + 1))
        rec_rho[0] = rho
        rec_f[0] = interface_fluxes(rho, sm(0.0), sp(0.0), p_bar)
        steps = 0
        for k in range(1, records + 1):
            target = rec_t[k]
            while t < target - 1e-15 * max(T, 1.0):
                dt = min(dt_max, target - t)
                gl, gr = sm(t), sp(t)
                f = interface_fluxes(rho, gl, gr, p_bar)
                rho = rho - dt / (eps * dx) * (f[1:] - f[:-1])
                t += dt
                steps += 1
            t = target
            rec_rho[k] = rho
            rec_f[k] = interface_fluxes(rho, sm(t), sp(t), p_bar)
        late = rec_t >= settle
        dens_ok = late & ~np.isnan(o_rho)
        dd = np.abs(rec_rho[dens_ok][:, keep] - o_rho[dens_ok, None]).max() if dens_ok.any() else 0.0
        fd = np.abs(rec_f[late][:, 1:-1][:, keep[:-1] & keep[1:]] - o_flux[late, None]).max()
        runs.append(SweepRun(eps, rec_t.copy(), rec_rho, rec_f, o_rho, o_flux, float(dd), float(fd), steps))
    return runs
