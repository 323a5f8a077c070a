"""Exact forward equation on the full state space for small lattices.

States are indexed by reading the configuration as a binary number with
site 1 as the most significant bit, ``index = sum_i eta_i 2**(N - i)``.
The generator is assembled directly from the jump-rate dictionary, so it
shares no code with the compiled simulator and serves as its oracle.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm, null_space

from .rates import ModelSpec

__all__ = [
    "MAX_SITES",
    "MasterEquation",
    "exact_master_equation",
    "state_index",
    "index_state",
    "all_states",
    "bernoulli_product",
]

MAX_SITES = 10


def state_index(eta) -> int:
    idx = 0
    for v in np.asarray(eta, dtype=np.int64):
        idx = 2 * idx + int(v)
    return idx


def index_state(idx: int, N: int) -> np.ndarray:
    return np.array([(idx >> (N - 1 - i)) & 1 for i in range(N)], dtype=np.int8)


def all_states(N: int) -> np.ndarray:
    """``(2**N, N)`` array whose row ``s`` is the configuration with index ``s``."""
    s = np.arange(2**N)[:, None]
    shifts = np.arange(N - 1, -1, -1)[None, :]
    return ((s >> shifts) & 1).astype(np.int8)


def bernoulli_product(N: int, rho) -> np.ndarray:
    """Law of independent Bernoulli occupations; ``rho`` scalar or per site."""
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (N,))
    states = all_states(N)
    return np.prod(np.where(states == 1, rho, 1.0 - rho), axis=1)


class MasterEquation:
    """Generator of ``N**(1+a) L_N`` for a spec with constant schedules.

    ``Q[y, x]`` is the jump rate from state ``x`` to ``y`` (columns sum to
    zero), so a distribution evolves as ``mu(t) = expm(t * Q) mu(0)``.
    """

    def __init__(self, spec: ModelSpec):
        if spec.N > MAX_SITES:
            raise ValueError(f"exact master equation limited to N <= {MAX_SITES}, got {spec.N}")
        for name, sched in spec.boundary.schedules.items():
            if not sched.is_constant:
                raise ValueError(f"schedule {name} is not constant")
        self.spec = spec
        self.N = spec.N
        self.rates = spec.rates_at(0.0)
        self.Q = spec.speed * self._assemble()

    def _assemble(self) -> np.ndarray:
        N = self.N
        p, lam0 = self.spec.p, self.spec.lambda0
        r = self.rates
        n = 2**N
        Q = np.zeros((n, n))
        for x in range(n):
            eta = index_state(x, N)
            moves = []
            for i in range(N - 1):
                if eta[i] == 1 and eta[i + 1] == 0:
                    moves.append((i, i + 1, lam0 * p))
                elif eta[i] == 0 and eta[i + 1] == 1:
                    moves.append((i, i + 1, lam0 * (1.0 - p)))
            for i, j, rate in moves:
                y = eta.copy()
                y[i], y[j] = y[j], y[i]
                Q[state_index(y), x] += rate
            left = r.gamma if eta[0] == 1 else r.alpha
            right = r.beta if eta[N - 1] == 1 else r.delta
            for site, rate in ((0, left), (N - 1, right)):
                y = eta.copy()
                y[site] = 1 - y[site]
                Q[state_index(y), x] += rate
        Q[np.arange(n), np.arange(n)] = -Q.sum(axis=0)
        return Q

    def initial_distribution(self, initial) -> np.ndarray:
        """Accepts a full distribution, a configuration, or a product density."""
        n = 2**self.N
        arr = np.asarray(initial, dtype=float)
        if arr.ndim == 0:
            return bernoulli_product(self.N, float(arr))
        if arr.shape == (n,):
            if not np.isclose(arr.sum(), 1.0) or np.any(arr < 0):
                raise ValueError("initial distribution must be a probability vector")
            return arr.copy()
        if arr.shape == (self.N,):
            mu = np.zeros(n)
            mu[state_index(arr.astype(np.int64))] = 1.0
            return mu
        raise ValueError(f"cannot interpret initial distribution of shape {arr.shape}")

    def distribution(self, t: float, initial) -> np.ndarray:
        mu0 = self.initial_distribution(initial)
        if t == 0:
            return mu0
        mu = expm(float(t) * self.Q) @ mu0
        mu = np.clip(mu, 0.0, None)
        return mu / mu.sum()

    def stationary(self) -> np.ndarray:
        ns = null_space(self.Q)
        if ns.shape[1] != 1:
            raise ValueError(f"stationary law not unique (kernel dimension {ns.shape[1]})")
        v = ns[:, 0]
        v = v / v.sum()
        return np.clip(v, 0.0, None) / np.clip(v, 0.0, None).sum()


def exact_master_equation(spec: ModelSpec, t: float, initial) -> np.ndarray:
    """Distribution over all ``2**N`` states at time ``t``."""
    return MasterEquation(spec).distribution(t, initial)
