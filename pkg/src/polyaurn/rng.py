"""Counter-based random streams.

Every uniform used by the simulator is a pure function of
``(master_seed, replicate_index, step, slot)``: a SplitMix64 finalizer
applied to a per-replicate key plus a Weyl-sequence counter. Paths are
therefore reproducible bit for bit regardless of the order in which
replicates are run or how they are split across workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_REP_SALT = 0xD1B54A32D192ED03
INV_2_53 = 1.0 / 9007199254740992.0

# slots per step: colour choice, atom choice
SLOTS = 2


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class StreamKey:
    master_seed: int
    replicate_index: int = 0

    def key(self) -> int:
        s = mix64((self.master_seed & MASK64) + GAMMA)
        return mix64(s ^ ((self.replicate_index * _REP_SALT + GAMMA) & MASK64))

    def stream(self) -> "CounterStream":
        return CounterStream(self.key())


def replicate_keys(master_seed: int, indices) -> np.ndarray:
    return np.array([StreamKey(master_seed, int(r)).key() for r in indices], dtype=np.uint64)


class CounterStream:
    """Pure-Python view of one replicate's stream.

    ``uniform(step, slot)`` matches what the compiled simulator uses, and
    :meth:`random` walks the counter sequentially so the object can stand
    in for a generator in :func:`polyaurn.simulator.step`.
    """

    def __init__(self, key: int):
        self.key = key & MASK64
        self.counter = 0

    def uniform(self, step: int, slot: int = 0) -> float:
        return _to_unit(mix64(self.key + (step * SLOTS + slot + 1) * GAMMA))

    def random(self) -> float:
        step, slot = divmod(self.counter, SLOTS)
        self.counter += 1
        return self.uniform(step, slot)


def _to_unit(z: int) -> float:
    return (z >> 11) * INV_2_53


@numba.njit(cache=True, inline="always")
def nb_mix64(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True, inline="always")
def nb_uniform(key, step, slot):
    ctr = np.uint64(step) * np.uint64(SLOTS) + np.uint64(slot) + np.uint64(1)
    z = nb_mix64(key + ctr * np.uint64(GAMMA))
    return np.float64(z >> np.uint64(11)) * INV_2_53


def spawn_generator(master_seed: int, purpose: int) -> np.random.Generator:
    """Independent numpy generator for auxiliary resampling (bootstrap etc.)."""
    return np.random.Generator(np.random.Philox(key=[master_seed & MASK64, purpose & MASK64]))
