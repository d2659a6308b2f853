"""
This file contains the deterministic random stream (splitmix64) and the seed derivation rules.

Every random decision in stabforest (splits, bootstraps, feature subsets, permutations)
is drawn from a RandomStream seeded through derive_trial_seed or derive_seed, so a run is a
pure function of its master seed on every platform.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_MULT_1 = 0xBF58476D1CE4E5B9
MIX_MULT_2 = 0x94D049BB133111EB

# salts keep per-tree, per-permutation and per-trial streams apart
TREE_SALT = 0xD1B54A32D192ED03
PERMUTATION_SALT = 0x8CB92BA72F3D8DD7

_U64 = np.uint64


@dataclass(frozen=True)
class RngState:
    state: int

    def __post_init__(self):
        if not 0 <= self.state <= MASK64:
            raise ValueError(f"rng state {self.state} is not an unsigned 64 bit integer")


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * MIX_MULT_1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_MULT_2) & MASK64
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over='ignore'):
        z = (z ^ (z >> _U64(30))) * _U64(MIX_MULT_1)
        z = (z ^ (z >> _U64(27))) * _U64(MIX_MULT_2)
    return z ^ (z >> _U64(31))


def splitmix64_next(state: RngState) -> tuple[RngState, int]:
    advanced = (state.state + GOLDEN_GAMMA) & MASK64
    return RngState(advanced), _mix(advanced)


def derive_trial_seed(master_seed: int, subject_index: int, trial: int) -> int:
    """
    Seed of one (subject, trial) cell of the randomized trials grid.
    The subject index is spread by the golden gamma before the xor so that neighbouring
    cells start far apart in the splitmix64 sequence.
    """
    offset = (subject_index * GOLDEN_GAMMA + trial) & MASK64
    _, value = splitmix64_next(RngState((master_seed ^ offset) & MASK64))
    return value


def derive_seed(seed: int, index: int, salt: int = TREE_SALT) -> int:
    """Seed of the index-th sub-stream (tree, fold, permutation) of a seeded computation."""
    return derive_trial_seed(seed ^ salt, index, 0)


def scan_seed_collisions(master_seed: int, n_subjects: int, n_trials: int) -> list[tuple[int, int]]:
    """
    Returns every (subject, trial) pair whose derived seed is shared with another pair of the grid.
    """
    if n_subjects <= 0 or n_trials <= 0:
        return []
    subjects = np.arange(n_subjects, dtype=_U64)
    trials = np.arange(n_trials, dtype=_U64)
    with np.errstate(over='ignore'):
        offsets = subjects[:, None] * _U64(GOLDEN_GAMMA) + trials[None, :]
        states = (_U64(master_seed) ^ offsets) + _U64(GOLDEN_GAMMA)
    seeds = _mix_array(states).ravel()
    _, inverse, counts = np.unique(seeds, return_inverse=True, return_counts=True)
    shared = np.flatnonzero(counts[inverse] > 1)
    return [(int(flat // n_trials), int(flat % n_trials)) for flat in shared]


class RandomStream:
    """
    Mutable view of a splitmix64 stream.

    Scalar draws use python integers. Block draws compute many outputs at once with numpy
    and always consume the stream exactly as the equivalent sequence of scalar draws would.
    """

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return _mix(self.state)

    def _raw_block(self, size: int) -> np.ndarray:
        steps = np.arange(1, size + 1, dtype=_U64)
        with np.errstate(over='ignore'):
            states = _U64(self.state) + steps * _U64(GOLDEN_GAMMA)
        self.state = (self.state + size * GOLDEN_GAMMA) & MASK64
        return _mix_array(states)

    def bounded(self, bound: int) -> int:
        """Uniform integer in [0, bound), rejection sampling on the low residue class."""
        if bound <= 0:
            raise ValueError(f"bound must be positive, got {bound}")
        threshold = (1 << 64) % bound
        while True:
            value = self.next_u64()
            if value >= threshold:
                return value % bound

    def _bounded_block(self, bounds: np.ndarray) -> np.ndarray:
        size = len(bounds)
        out = np.empty(size, dtype=np.int64)
        if size == 0:
            return out
        start = self.state
        values = self._raw_block(size)
        bounds_u = bounds.astype(_U64)
        with np.errstate(over='ignore'):
            thresholds = (_U64(0) - bounds_u) % bounds_u
        rejected = np.flatnonzero(values < thresholds)
        if rejected.size == 0:
            out[:] = (values % bounds_u).astype(np.int64)
            return out
        # rare path: replay the stream one draw at a time from the first rejection
        first = int(rejected[0])
        out[:first] = (values[:first] % bounds_u[:first]).astype(np.int64)
        self.state = (start + first * GOLDEN_GAMMA) & MASK64
        for position in range(first, size):
            out[position] = self.bounded(int(bounds[position]))
        return out

    def integers(self, bound: int, size: int) -> np.ndarray:
        if bound <= 0:
            raise ValueError(f"bound must be positive, got {bound}")
        return self._bounded_block(np.full(size, bound, dtype=np.int64))

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniforms(self, size: int) -> np.ndarray:
        return (self._raw_block(size) >> _U64(11)).astype(np.float64) * (1.0 / (1 << 53))

    def normal(self) -> float:
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def normals(self, size: int) -> np.ndarray:
        """Box-Muller on consecutive pairs of uniforms, one normal per pair."""
        pairs = self.uniforms(2 * size).reshape(size, 2)
        u1 = 1.0 - pairs[:, 0]
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * pairs[:, 1])

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of range(n), swapping position i with a draw from [0, i]."""
        if n < 0:
            raise ValueError(f"n must be non-negative, got {n}")
        if n < 2:
            return np.arange(n, dtype=np.int64)
        positions = np.arange(n - 1, 0, -1, dtype=np.int64)
        draws = self._bounded_block(positions + 1)
        order = list(range(n))
        for i, j in zip(positions.tolist(), draws.tolist()):
            order[i], order[j] = order[j], order[i]
        return np.asarray(order, dtype=np.int64)

    def sample_without_replacement(self, n: int, k: int) -> list[int]:
        """First k positions of a partial Fisher-Yates shuffle of range(n)."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot draw {k} items from {n}")
        pool = list(range(n))
        for i in range(k):
            j = i + self.bounded(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def samples_without_replacement(self, n: int, k: int, count: int) -> np.ndarray:
        """
        count draws of sample_without_replacement(n, k) as rows of a (count, k) array,
        consuming the stream exactly like count consecutive scalar calls.
        """
        if not 0 <= k <= n:
            raise ValueError(f"cannot draw {k} items from {n}")
        if count == 0 or k == 0:
            return np.zeros((count, k), dtype=np.int64)
        offsets = self._bounded_block(np.tile(n - np.arange(k, dtype=np.int64), count)).reshape(count, k)
        pool = np.tile(np.arange(n, dtype=np.int64), (count, 1))
        rows = np.arange(count)
        for i in range(k):
            j = i + offsets[:, i]
            picked = pool[rows, j]
            pool[rows, j] = pool[:, i]
            pool[:, i] = picked
        return pool[:, :k]


def shuffle(n: int, seed: int) -> list[int]:
    return RandomStream(seed).permutation(n).tolist()
