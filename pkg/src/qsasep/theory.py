"""Closed-form macroscopic predictions.

The bulk flux is the concave quadratic ``J(rho) = p_bar rho (1 - rho)``;
boundary-driven bulk densities follow from the variational conditions
(sup of ``J`` between the reservoirs when the left one is denser, inf
otherwise).  Also contains the product criterion for stationary states
of the open chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "LOW_DENSITY",
    "HIGH_DENSITY",
    "MAX_CURRENT",
    "CRITICAL",
    "THETA_TOL",
    "PhaseResult",
    "flux",
    "flux_derivative",
    "variational_current",
    "godunov_flux",
    "on_theta",
    "quasi_static_profile",
    "stationary_product_density",
]

LOW_DENSITY = "LowDensity"
HIGH_DENSITY = "HighDensity"
MAX_CURRENT = "MaxCurrent"
CRITICAL = "CriticalNonUnique"

THETA_TOL = 1e-12


def flux(rho, p_bar: float = 1.0):
    """``J(rho) = p_bar rho (1 - rho)``; works elementwise on arrays."""
    return p_bar * rho * (1.0 - rho)


def flux_derivative(rho, p_bar: float = 1.0):
    return p_bar * (1.0 - 2.0 * rho)


def _inf_sup(lo, hi, p_bar):
    """``(min J, max J)`` over ``[lo, hi]`` for a concave ``J``."""
    j_lo, j_hi = flux(lo, p_bar), flux(hi, p_bar)
    j_min = np.minimum(j_lo, j_hi)
    j_max = np.where((lo <= 0.5) & (0.5 <= hi), 0.25 * p_bar, np.maximum(j_lo, j_hi))
    return j_min, j_max


def godunov_flux(left, right, p_bar: float = 1.0):
    """Exact Riemann flux: min of ``J`` on ``[left, right]`` if ``left <= right``, else max on ``[right, left]``."""
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    lo = np.minimum(left, right)
    hi = np.maximum(left, right)
    j_min, j_max = _inf_sup(lo, hi, p_bar)
    out = np.where(left <= right, j_min, j_max)
    return float(out) if out.ndim == 0 else out


def variational_current(rho_minus, rho_plus, p_bar: float = 1.0):
    """Flux selected by the boundary data; identical to the Godunov flux."""
    return godunov_flux(rho_minus, rho_plus, p_bar)


def on_theta(rho_minus: float, rho_plus: float, tol: float = THETA_TOL) -> bool:
    """Membership in the critical line ``{rho_- < 1/2, rho_- + rho_+ = 1}``."""
    return rho_minus < 0.5 and abs(rho_minus + rho_plus - 1.0) <= tol


@dataclass(frozen=True)
class PhaseResult:
    """Macroscopic bulk state for one pair of boundary densities.

    ``rho`` is ``None`` on the critical line, where the flux is unique but
    the profile is not.  ``literal_table_silent`` marks inputs that the
    usual three-row inequality table leaves unclassified although the
    variational conditions select a phase.
    """

    label: str
    rho: Optional[float]
    flux: float
    on_theta: bool
    regime_note: str = ""
    literal_table_silent: bool = False

    def as_dict(self) -> dict:
        return {"label": self.label, "rho": self.rho, "flux": self.flux, "on_theta": self.on_theta}


def _literal_table(rm: float, rp: float) -> Optional[str]:
    if rm >= 0.5 and rp <= 0.5:
        return MAX_CURRENT
    if rm < 0.5 and rm + rp < 1.0:
        return LOW_DENSITY
    if rm > 0.5 and rm + rp > 1.0:
        return HIGH_DENSITY
    return None


def quasi_static_profile(
    rho_minus: float,
    rho_plus: float,
    p_bar: float = 1.0,
    theta_tolerance: float = THETA_TOL,
) -> PhaseResult:
    """Phase, bulk density and flux for reservoir densities ``(rho_-, rho_+)``.

    The bulk density is the extremiser of ``J`` in the variational
    conditions; ties between the two endpoints happen only on the critical
    line, which is reported separately.
    """
    rm, rp = float(rho_minus), float(rho_plus)
    if not (0.0 <= rm <= 1.0 and 0.0 <= rp <= 1.0):
        raise ValueError(f"densities must lie in [0, 1], got ({rm}, {rp})")
    j = variational_current(rm, rp, p_bar)
    if on_theta(rm, rp, theta_tolerance):
        return PhaseResult(
            CRITICAL, None, float(flux(rm, p_bar)), True,
            f"shock between {rm:g} and {rp:g} may sit anywhere in the bulk",
        )
    if rm > rp and rp <= 0.5 <= rm or rm == rp == 0.5:
        rho, label = 0.5, MAX_CURRENT
    elif rm == rp:
        rho = rm
        label = LOW_DENSITY if rm < 0.5 else HIGH_DENSITY
    elif rm > rp:
        # sup at the endpoint closer to 1/2
        rho = rm if abs(rm - 0.5) < abs(rp - 0.5) else rp
        label = LOW_DENSITY if rho == rm else HIGH_DENSITY
    else:
        # inf at the endpoint farther from 1/2
        rho = rm if abs(rm - 0.5) > abs(rp - 0.5) else rp
        label = LOW_DENSITY if rho == rm else HIGH_DENSITY
    literal = _literal_table(rm, rp)
    silent = literal is None
    note = "" if not silent else "outside the literal phase table; label from the variational extremiser"
    return PhaseResult(label, rho, float(j), False, note, silent)


def _tau(x: float, y: float, p: float) -> float:
    b = 2.0 * p - 1.0 - x + y
    return (b + math.sqrt(b * b + 4.0 * x * y)) / (2.0 * x)


def stationary_product_density(
    alpha: float, beta: float, gamma: float, delta: float, p: float, tol: float = 1e-9
) -> Optional[float]:
    """Density of the Bernoulli product stationary state, if there is one.

    Requires ``min(alpha, beta) > 0`` and ``tau_- tau_+ = 1`` where
    ``tau_-`` solves the left-boundary quadratic in ``(alpha, gamma)`` and
    ``tau_+`` the right one in ``(beta, delta)``.
    """
    if not 0.5 < p <= 1.0:
        raise ValueError(f"p must lie in (1/2, 1], got {p}")
    if min(alpha, beta, gamma, delta) < 0:
        raise ValueError("rates must be nonnegative")
    if not min(alpha, beta) > 0:
        return None
    tau_minus = _tau(alpha, gamma, p)
    tau_plus = _tau(beta, delta, p)
    if abs(tau_minus * tau_plus - 1.0) > tol:
        return None
    return 1.0 / (tau_minus + 1.0)
