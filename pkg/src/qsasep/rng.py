"""Counter-based splittable random streams.

A stream is a pair ``(key, gamma)`` plus a 64-bit counter; the ``n``-th
output is ``mix64(key + n * gamma)`` (the SplitMix64 finaliser), so any
draw can be recomputed from ``(key, gamma, n)`` alone.  Stream keys are
derived from ``numpy.random.SeedSequence([seed, replica])``, which gives
every replica its own statistically independent stream regardless of the
order or process in which replicas are executed.
"""

from __future__ import annotations

import numba as nb
import numpy as np

__all__ = ["Stream", "stream_state"]

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0


@nb.njit(inline="always")
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(inline="always")
def next_uniform(state):
    """Draw from ``[0, 1)``; ``state`` is ``uint64[3] = (key, gamma, counter)``."""
    state[2] += _ONE
    z = mix64(state[0] + state[2] * state[1])
    return float(z >> _S11) * _INV53


def _mix64_np(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
        return z ^ (z >> _S31)


def stream_state(seed: int, replica: int = 0) -> np.ndarray:
    """Fresh ``(key, gamma, counter)`` state for stream ``(seed, replica)``."""
    key, g = np.random.SeedSequence([int(seed), int(replica)]).generate_state(2, np.uint64)
    gamma = _mix64_np(np.array([g], dtype=np.uint64))[0] | _ONE
    return np.array([key, gamma, 0], dtype=np.uint64)


class Stream:
    """Python-side handle on a counter-based stream.

    The compiled kernels advance the same ``state`` array in place, so a
    Python draw followed by a kernel call continues one single sequence.
    """

    def __init__(self, seed: int = 0, replica: int = 0):
        self.seed = int(seed)
        self.replica = int(replica)
        self.state = stream_state(seed, replica)

    @property
    def counter(self) -> int:
        return int(self.state[2])

    def uniform(self, size: int) -> np.ndarray:
        key, gamma, c = self.state
        with np.errstate(over="ignore"):
            n = c + np.arange(1, size + 1, dtype=np.uint64)
            z = _mix64_np(key + n * gamma)
        self.state[2] = c + np.uint64(size)
        return (z >> _S11).astype(np.float64) * _INV53

    def bernoulli(self, rho, size: int) -> np.ndarray:
        return (self.uniform(size) < rho).astype(np.int8)

    def spawn(self, replica: int) -> "Stream":
        return Stream(self.seed, replica)
