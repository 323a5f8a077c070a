"""Boundary families, time-dependent schedules and jump-rate dictionaries.

Everything the simulator needs to know about jump rates lives here: the
piecewise schedules that drive the reservoirs, the two boundary families
(Liggett and reversible), the full model description and the checks on
the finite-size scaling windows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "Constant",
    "LinearRamp",
    "CosineRamp",
    "Segment",
    "Schedule",
    "Liggett",
    "Reversible",
    "ModelSpec",
    "RateTuple",
    "ScheduleError",
    "as_schedule",
    "ScalingReport",
    "liggett_rates",
    "reversible_rates",
    "sign_decomposition",
    "validate_scaling",
    "recommended_block_width",
    "default_speedups",
]


class ScheduleError(ValueError):
    """Raised for malformed schedules or schedules that change sign too fast."""


# ---------------------------------------------------------------------------
# schedules

SHAPE_CONSTANT = 0
SHAPE_LINEAR = 1
SHAPE_COSINE = 2


@dataclass(frozen=True)
class Constant:
    v: float

    kind = SHAPE_CONSTANT

    @property
    def endpoints(self):
        return self.v, self.v


@dataclass(frozen=True)
class LinearRamp:
    v0: float
    v1: float

    kind = SHAPE_LINEAR

    @property
    def endpoints(self):
        return self.v0, self.v1


@dataclass(frozen=True)
class CosineRamp:
    """Ramp ``v0 -> v1`` with zero slope at both ends, ``v0 + (v1-v0)(1-cos(pi s))/2``."""

    v0: float
    v1: float

    kind = SHAPE_COSINE

    @property
    def endpoints(self):
        return self.v0, self.v1


Shape = Union[Constant, LinearRamp, CosineRamp]


@dataclass(frozen=True)
class Segment:
    t_start: float
    t_end: float
    shape: Shape

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ScheduleError(
                f"segment must have positive length, got [{self.t_start}, {self.t_end}]"
            )

    def _s(self, t):
        return (np.asarray(t, dtype=float) - self.t_start) / (self.t_end - self.t_start)

    def value(self, t):
        shape = self.shape
        v0, v1 = shape.endpoints
        if shape.kind == SHAPE_CONSTANT:
            return np.full_like(np.asarray(t, dtype=float), v0)
        s = self._s(t)
        if shape.kind == SHAPE_LINEAR:
            return v0 + (v1 - v0) * s
        return v0 + (v1 - v0) * 0.5 * (1.0 - np.cos(np.pi * s))

    def derivative(self, t):
        shape = self.shape
        v0, v1 = shape.endpoints
        width = self.t_end - self.t_start
        if shape.kind == SHAPE_CONSTANT:
            return np.zeros_like(np.asarray(t, dtype=float))
        if shape.kind == SHAPE_LINEAR:
            return np.full_like(np.asarray(t, dtype=float), (v1 - v0) / width)
        s = self._s(t)
        return (v1 - v0) * 0.5 * np.pi * np.sin(np.pi * s) / width


@dataclass(frozen=True)
class Schedule:
    """Piecewise Constant/LinearRamp/CosineRamp function of macroscopic time.

    Every shape is monotone on its segment, so the range of a schedule on
    any sub-interval is attained at the interval endpoints.  Evaluation
    outside the tiled interval is clamped to the first/last segment.
    """

    segments: tuple[Segment, ...]

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ScheduleError("schedule needs at least one segment")
        for left, right in zip(segs[:-1], segs[1:]):
            if right.t_start != left.t_end:
                raise ScheduleError(
                    f"segments must tile without gaps or overlaps: "
                    f"{left.t_end} != {right.t_start}"
                )

    @classmethod
    def constant(cls, v: float, T: float = 1.0) -> "Schedule":
        return cls((Segment(0.0, float(T) if T > 0 else 1.0, Constant(float(v))),))

    @classmethod
    def linear(cls, v0: float, v1: float, T: float = 1.0) -> "Schedule":
        return cls((Segment(0.0, float(T), LinearRamp(float(v0), float(v1))),))

    @classmethod
    def cosine(cls, v0: float, v1: float, T: float = 1.0) -> "Schedule":
        return cls((Segment(0.0, float(T), CosineRamp(float(v0), float(v1))),))

    @property
    def t_start(self) -> float:
        return self.segments[0].t_start

    @property
    def t_end(self) -> float:
        return self.segments[-1].t_end

    @property
    def breakpoints(self) -> np.ndarray:
        return np.array([s.t_start for s in self.segments] + [self.t_end])

    @property
    def is_constant(self) -> bool:
        return all(
            s.shape.endpoints[0] == s.shape.endpoints[1] for s in self.segments
        ) and len({s.shape.endpoints[0] for s in self.segments}) == 1

    def _index(self, t):
        ends = np.array([s.t_end for s in self.segments])
        idx = np.searchsorted(ends, t, side="right")
        return np.clip(idx, 0, len(self.segments) - 1)

    def _apply(self, t, method):
        t_arr = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t_arr)
        idx = self._index(flat)
        out = np.empty(flat.shape)
        for k in np.unique(idx):
            mask = idx == k
            seg = self.segments[k]
            tt = np.clip(flat[mask], seg.t_start, seg.t_end)
            out[mask] = getattr(seg, method)(tt)
        if t_arr.ndim == 0:
            return float(out[0])
        return out.reshape(t_arr.shape)

    def __call__(self, t):
        return self._apply(t, "value")

    def derivative(self, t):
        return self._apply(t, "derivative")

    def bounds(self, t0: float, t1: float) -> tuple[float, float]:
        """Exact (min, max) of the schedule on ``[t0, t1]``."""
        pts = [t0, t1]
        pts.extend(b for b in self.breakpoints if t0 < b < t1)
        vals = [self(p) for p in pts]
        return min(vals), max(vals)

    def check_range(self, lo: float, hi: float, name: str = "schedule") -> None:
        for seg in self.segments:
            for v in seg.shape.endpoints:
                if not lo <= v <= hi:
                    raise ScheduleError(f"{name} value {v} outside [{lo}, {hi}]")

    def as_array(self) -> np.ndarray:
        """Rows ``(t_start, t_end, kind, v0, v1)`` for the compiled kernels."""
        rows = []
        for s in self.segments:
            v0, v1 = s.shape.endpoints
            rows.append((s.t_start, s.t_end, float(s.shape.kind), v0, v1))
        return np.array(rows, dtype=np.float64)


def as_schedule(value, T: float = 1.0) -> Schedule:
    """Pass schedules through; wrap plain numbers as constants on ``[0, T]``."""
    if isinstance(value, Schedule):
        return value
    return Schedule.constant(float(value), T)


# ---------------------------------------------------------------------------
# boundary families and rates


@dataclass(frozen=True)
class RateTuple:
    alpha: float
    beta: float
    gamma: float
    delta: float

    @property
    def lambda_minus(self) -> float:
        return self.alpha + self.gamma

    @property
    def lambda_plus(self) -> float:
        return self.beta + self.delta

    @property
    def rho_minus(self) -> float:
        lam = self.lambda_minus
        return self.alpha / lam if lam > 0 else float("nan")

    @property
    def rho_plus(self) -> float:
        lam = self.lambda_plus
        return self.delta / lam if lam > 0 else float("nan")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.alpha, self.beta, self.gamma, self.delta)


def liggett_rates(rho_bar_minus: float, rho_bar_plus: float, p: float) -> RateTuple:
    """Liggett's choice ``(p r-, p(1-r+), (1-p)(1-r-), (1-p) r+)``."""
    if not 0.5 < p <= 1.0:
        raise ValueError(f"Liggett boundaries need p in (1/2, 1], got {p}")
    for r in (rho_bar_minus, rho_bar_plus):
        if not 0.0 <= r <= 1.0:
            raise ValueError(f"reservoir density {r} outside [0, 1]")
    return RateTuple(
        alpha=p * rho_bar_minus,
        beta=p * (1.0 - rho_bar_plus),
        gamma=(1.0 - p) * (1.0 - rho_bar_minus),
        delta=(1.0 - p) * rho_bar_plus,
    )


def reversible_rates(rho: float, lambda_bar: float, sigma_tilde: float) -> tuple[float, float]:
    """Entry and exit intensity of a reservoir reversible for Bernoulli(rho)."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"reservoir density {rho} outside [0, 1]")
    if lambda_bar <= 0 or sigma_tilde <= 0:
        raise ValueError("lambda_bar and sigma_tilde must be positive")
    total = sigma_tilde * lambda_bar
    return total * rho, total * (1.0 - rho)


def default_speedups(N: int) -> tuple[float, float]:
    """Default ``(sigma, sigma_tilde) = (N**0.25, N**0.5)``."""
    return float(N) ** 0.25, float(N) ** 0.5


@dataclass(frozen=True)
class Liggett:
    rho_bar_minus: Schedule
    rho_bar_plus: Schedule

    name = "liggett"

    def __post_init__(self):
        for name in ("rho_bar_minus", "rho_bar_plus"):
            object.__setattr__(self, name, as_schedule(getattr(self, name)))
        self.rho_bar_minus.check_range(0.0, 1.0, "rho_bar_minus")
        self.rho_bar_plus.check_range(0.0, 1.0, "rho_bar_plus")

    @property
    def schedules(self) -> dict[str, Schedule]:
        return {"rho_bar_minus": self.rho_bar_minus, "rho_bar_plus": self.rho_bar_plus}

    def densities(self, t):
        """Boundary data of the limiting conservation law at time ``t``."""
        return self.rho_bar_minus(t), self.rho_bar_plus(t)


@dataclass(frozen=True)
class Reversible:
    rho_minus: Schedule
    rho_plus: Schedule
    lambda_bar_minus: Schedule
    lambda_bar_plus: Schedule
    sigma: float
    sigma_tilde: float

    name = "reversible"

    def __post_init__(self):
        for name in ("rho_minus", "rho_plus", "lambda_bar_minus", "lambda_bar_plus"):
            object.__setattr__(self, name, as_schedule(getattr(self, name)))
        self.rho_minus.check_range(0.0, 1.0, "rho_minus")
        self.rho_plus.check_range(0.0, 1.0, "rho_plus")
        self.lambda_bar_minus.check_range(1e-300, math.inf, "lambda_bar_minus")
        self.lambda_bar_plus.check_range(1e-300, math.inf, "lambda_bar_plus")
        if not self.sigma > 0 or not self.sigma_tilde > 0:
            raise ValueError("sigma and sigma_tilde must be positive")

    @classmethod
    def with_defaults(
        cls,
        N: int,
        rho_minus: Schedule,
        rho_plus: Schedule,
        lambda_bar_minus: Schedule | None = None,
        lambda_bar_plus: Schedule | None = None,
    ) -> "Reversible":
        sigma, sigma_tilde = default_speedups(N)
        rho_minus = as_schedule(rho_minus)
        T = rho_minus.t_end
        return cls(
            rho_minus,
            rho_plus,
            lambda_bar_minus or Schedule.constant(1.0, T),
            lambda_bar_plus or Schedule.constant(1.0, T),
            sigma,
            sigma_tilde,
        )

    @property
    def schedules(self) -> dict[str, Schedule]:
        return {
            "rho_minus": self.rho_minus,
            "rho_plus": self.rho_plus,
            "lambda_bar_minus": self.lambda_bar_minus,
            "lambda_bar_plus": self.lambda_bar_plus,
        }

    def densities(self, t):
        return self.rho_minus(t), self.rho_plus(t)


BoundaryFamily = Union[Liggett, Reversible]


@dataclass(frozen=True)
class ModelSpec:
    """Full description of the accelerated dynamics ``N**(1+a) L_{N,t}``.

    Parameters
    ----------
    N : int
        Number of sites, at least 2.
    a : float
        Acceleration exponent, nonnegative (``a = 0`` is the plain ``N L_N``).
    p_bar : float
        Bulk drift in ``(0, 1]``.
    boundary : Liggett or Reversible
        Boundary family with its schedules.
    T : float
        Macroscopic horizon.
    """

    N: int
    a: float
    p_bar: float
    boundary: BoundaryFamily
    T: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"N must be an integer >= 2, got {self.N}")
        if not self.a >= 0:
            raise ValueError(f"acceleration exponent must be nonnegative, got {self.a}")
        if not 0 < self.p_bar <= 1:
            raise ValueError(f"p_bar must lie in (0, 1], got {self.p_bar}")
        if self.T < 0:
            raise ValueError("horizon T must be nonnegative")
        if isinstance(self.boundary, Reversible) and self.boundary.sigma < self.p_bar:
            raise ValueError(
                f"reversible family needs sigma >= p_bar ({self.boundary.sigma} < {self.p_bar})"
            )
        object.__setattr__(self, "N", int(self.N))

    @property
    def is_liggett(self) -> bool:
        return isinstance(self.boundary, Liggett)

    @property
    def p(self) -> float:
        """Microscopic probability of a rightward jump."""
        if self.is_liggett:
            return 0.5 * (1.0 + self.p_bar)
        return 0.5 + self.p_bar / (2.0 * self.boundary.sigma)

    @property
    def lambda0(self) -> float:
        return 1.0 if self.is_liggett else float(self.boundary.sigma)

    @property
    def speed(self) -> float:
        """Time-scale factor ``N**(1+a)``."""
        return float(self.N) ** (1.0 + self.a)

    @property
    def breakpoints(self) -> np.ndarray:
        pts = np.concatenate([s.breakpoints for s in self.boundary.schedules.values()])
        pts = pts[(pts > 0) & (pts < self.T)]
        return np.unique(np.concatenate([[0.0], pts, [self.T]]))

    def rates_at(self, t: float) -> RateTuple:
        b = self.boundary
        if self.is_liggett:
            return liggett_rates(b.rho_bar_minus(t), b.rho_bar_plus(t), self.p)
        a_in, g_out = reversible_rates(b.rho_minus(t), b.lambda_bar_minus(t), b.sigma_tilde)
        d_in, b_out = reversible_rates(b.rho_plus(t), b.lambda_bar_plus(t), b.sigma_tilde)
        return RateTuple(alpha=a_in, beta=b_out, gamma=g_out, delta=d_in)

    def boundary_densities(self, t):
        """Boundary data ``(rho_-(t), rho_+(t))`` of the macroscopic equation."""
        return self.boundary.densities(t)

    def kernel_boundary(self):
        """Schedule arrays and coefficients consumed by the compiled kernels.

        Left rates are ``alpha = A l x``, ``gamma = B l (1-x)``; right rates
        ``delta = C l y``, ``beta = D l (1-y)`` with ``x, y`` densities and
        ``l`` intensity schedules.
        """
        b = self.boundary
        if self.is_liggett:
            one = Schedule.constant(1.0, max(self.T, 1.0))
            p = self.p
            scheds = (b.rho_bar_minus, one, b.rho_bar_plus, one)
            coef = (p, 1.0 - p, 1.0 - p, p)
        else:
            scheds = (b.rho_minus, b.lambda_bar_minus, b.rho_plus, b.lambda_bar_plus)
            st = b.sigma_tilde
            coef = (st, st, st, st)
        return tuple(s.as_array() for s in scheds), np.array(coef, dtype=np.float64)

    def replace(self, **changes) -> "ModelSpec":
        from dataclasses import replace

        return replace(self, **changes)


# ---------------------------------------------------------------------------
# sign decomposition


def _piece_kinds(schedule: Schedule, t0: float, t1: float) -> bool:
    mid = 0.5 * (t0 + t1)
    seg = schedule.segments[int(schedule._index(np.array([mid]))[0])]
    return seg.shape.kind != SHAPE_COSINE


def sign_decomposition(
    minus: Schedule,
    plus: Schedule,
    T: float,
    min_width: float = 1e-6,
    tol: float = 1e-12,
    samples: int = 64,
):
    """Split ``[0, T]`` into intervals on which ``plus - minus`` keeps its sign.

    Returns
    -------
    list of ``((t0, t1), sign)`` with ``sign`` one of ``"ge"`` (plus >= minus),
    ``"le"`` (plus <= minus) or ``"balanced"`` (equal within ``tol``).

    Raises
    ------
    ScheduleError
        If two consecutive sign changes are closer than ``min_width``.
    """
    if T <= 0:
        return [((0.0, 0.0), "balanced")]

    def diff(t):
        return plus(t) - minus(t)

    knots = np.unique(np.concatenate([[0.0, T], minus.breakpoints, plus.breakpoints]))
    knots = knots[(knots >= 0.0) & (knots <= T)]

    pts = [np.array([0.0])]
    for t0, t1 in zip(knots[:-1], knots[1:]):
        if _piece_kinds(minus, t0, t1) and _piece_kinds(plus, t0, t1):
            pts.append(np.array([t1]))
        else:
            pts.append(np.linspace(t0, t1, samples + 1)[1:])
    pts = np.concatenate(pts)
    vals = diff(pts)
    signs = np.where(vals > tol, 1, np.where(vals < -tol, -1, 0))
    nz = np.flatnonzero(signs)
    roots = []
    for j0, j1 in zip(nz[:-1], nz[1:]):
        if signs[j0] == signs[j1]:
            continue
        if j1 == j0 + 1:
            roots.append(brentq(diff, pts[j0], pts[j1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
        else:
            # the difference vanishes on the samples in between
            roots.extend(sorted({pts[j0 + 1], pts[j1 - 1]}))

    roots = sorted(roots)
    for r0, r1 in zip(roots[:-1], roots[1:]):
        if r1 - r0 < min_width:
            raise ScheduleError(
                f"boundary data change sign twice within {r1 - r0:.3g} < min_width={min_width}"
            )

    edges = [0.0] + [r for r in roots if 0.0 < r < T] + [T]
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        grid = np.linspace(a, b, samples + 1)
        vals = diff(grid)
        if np.all(np.abs(vals) <= tol):
            sign = "balanced"
        elif np.all(vals >= -tol):
            sign = "ge"
        else:
            sign = "le"
        out.append(((a, b), sign))
    return out


# ---------------------------------------------------------------------------
# scaling checks

PROXY_MARGIN = 4.0


@dataclass
class ScalingReport:
    ok: bool
    K: int
    window: tuple[float, float]
    violations: list[str] = field(default_factory=list)
    ratios: dict[str, float] = field(default_factory=dict)

    def __str__(self):
        status = "ok" if self.ok else "VIOLATED: " + "; ".join(self.violations)
        lo, hi = self.window
        ratios = ", ".join(f"{k}={v:.4g}" for k, v in self.ratios.items())
        return f"K={self.K} in ({lo:.4g}, {hi:.4g}) {status} [{ratios}]"


def _block_window(spec: ModelSpec) -> tuple[float, float]:
    N, a = spec.N, spec.a
    if spec.is_liggett:
        return math.sqrt(N), min(N**a, N)
    sigma, st = spec.boundary.sigma, spec.boundary.sigma_tilde
    return max(math.sqrt(N), sigma), min(N**a * sigma, st * sigma, N)


def recommended_block_width(spec: ModelSpec) -> int:
    """Mesoscopic width K inside the admissible window.

    Liggett: ``round(N**((1/2 + min(a, 1)) / 2))``; reversible: geometric
    mean of the window endpoints.
    """
    if spec.is_liggett:
        return max(1, int(round(spec.N ** ((0.5 + min(spec.a, 1.0)) / 2.0))))
    lo, hi = _block_window(spec)
    return max(1, int(round(math.sqrt(lo * hi))))


def validate_scaling(spec: ModelSpec) -> ScalingReport:
    """Finite-N proxies for the scaling assumptions and the block width window."""
    N, a = spec.N, spec.a
    violations = []
    ratios = {}
    if spec.is_liggett:
        ratios["a"] = a
        if not a > 0.5:
            violations.append("a > 1/2 required")
    else:
        sigma, st = spec.boundary.sigma, spec.boundary.sigma_tilde
        ratios["N/sigma"] = N / sigma
        ratios["sigma*sigma_tilde/sqrt(N)"] = sigma * st / math.sqrt(N)
        ratios["N^(a-1/2)*sigma"] = N ** (a - 0.5) * sigma
        if not sigma < N / PROXY_MARGIN:
            violations.append(f"sigma < N/{PROXY_MARGIN:g} required")
        if not sigma * st > PROXY_MARGIN * math.sqrt(N):
            violations.append(f"sigma*sigma_tilde > {PROXY_MARGIN:g}*sqrt(N) required")
        if not N ** (a - 0.5) * sigma > PROXY_MARGIN:
            violations.append(f"N^(a-1/2)*sigma > {PROXY_MARGIN:g} required")

    K = recommended_block_width(spec)
    lo, hi = _block_window(spec)
    ratios["K"] = K
    if not lo < K < hi:
        violations.append(f"block width K={K} outside ({lo:.4g}, {hi:.4g})")
    return ScalingReport(not violations, K, (lo, hi), violations, ratios)

