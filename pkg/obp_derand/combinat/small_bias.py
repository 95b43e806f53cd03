"""
Small-bias sample spaces by the powering construction.

A seed is a pair (x, y) of GF(2^h) elements, x in the high h bits. Output bit
i (0-indexed) is ⟨x^i, y⟩ with 0^0 = 1, so the bias of any nonzero parity is
at most (k-1)/2^h; the recorded bound is k/2^h.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import combinations, product
from typing import Any, Sequence, Tuple

import numpy as np

from obp_derand.algebra.gf2k import Field, get_field
from obp_derand.utils.bits import parity, parity_array, row_indices
from obp_derand.utils.config import require_under_cap


class BiasGenError(Exception):
    """Raised for invalid parameters or seeds."""


@dataclass(frozen=True)
class BiasGen:
    k: int
    h: int

    def __post_init__(self) -> None:
        if self.k < 1 or self.h < 1:
            raise BiasGenError(f"Need k >= 1 and h >= 1, got k={self.k}, h={self.h}")

    @classmethod
    def for_bias(cls, k: int, eps: Any) -> "BiasGen":
        """Smallest field size whose recorded bias k/2^h is at most ``eps``."""
        eps = Fraction(eps)
        if eps <= 0:
            raise BiasGenError(f"Bias must be positive, got {eps}")
        h = 1
        while Fraction(k, 2**h) > eps:
            h += 1
        return cls(k=k, h=h)

    @property
    def field(self) -> Field:
        return get_field(self.h)

    @property
    def seed_len(self) -> int:
        return 2 * self.h

    @property
    def num_seeds(self) -> int:
        return 1 << self.seed_len

    @property
    def eps(self) -> Fraction:
        return Fraction(self.k, 2**self.h)

    def split(self, seed: int) -> Tuple[int, int]:
        if not 0 <= seed < self.num_seeds:
            raise BiasGenError(f"Seed {seed} outside a {self.seed_len}-bit seed space")
        return seed >> self.h, seed & ((1 << self.h) - 1)

    def expand(self, seed: int) -> Tuple[int, ...]:
        x, y = self.split(seed)
        out = []
        power = 1
        for _ in range(self.k):
            out.append(parity(power & y))
            power = self.field.mul(power, x)
        return tuple(out)

    @cached_property
    def output_matrix(self) -> np.ndarray:
        """All outputs, one row per seed in increasing order (small h only)."""
        require_under_cap(self.num_seeds, "small-bias seed enumeration")
        xs = np.arange(1 << self.h, dtype=np.int64)
        powers = np.stack([self.field.pow_arrays(xs, i) for i in range(self.k)], axis=1)
        ys = np.arange(1 << self.h, dtype=np.int64)
        bits = parity_array(powers[:, None, :] & ys[None, :, None])
        return bits.reshape(self.num_seeds, self.k)


def bias_expand(b: BiasGen, seed: int) -> Tuple[int, ...]:
    return b.expand(seed)


def max_parity_bias(outputs: np.ndarray) -> Fraction:
    """Exact maximum bias over all nonzero parity tests."""
    values = _lsb_values(outputs)
    rows = outputs.shape[0]
    worst = Fraction(0)
    for test in range(1, 1 << outputs.shape[1]):
        ones = int(parity_array(values & test).sum())
        worst = max(worst, abs(Fraction(ones, rows) - Fraction(1, 2)))
    return worst


def conjunction_error(
    outputs: np.ndarray, tests: Sequence[int], targets: Sequence[int]
) -> Fraction:
    """|Pr[<T_j, out> = v_j for all j] - 2^-d| for linearly independent tests."""
    values = _lsb_values(outputs)
    hits = np.ones(outputs.shape[0], dtype=bool)
    for test, target in zip(tests, targets):
        hits &= parity_array(values & int(test)) == int(target)
    return abs(Fraction(int(hits.sum()), outputs.shape[0]) - Fraction(1, 2 ** len(tests)))


def max_conjunction_error(outputs: np.ndarray, d: int) -> Fraction:
    """Worst conjunction error over all independent d-tuples of tests and all targets."""
    k = outputs.shape[1]
    worst = Fraction(0)
    for tests in combinations(range(1, 1 << k), d):
        if not _independent(tests):
            continue
        for targets in product((0, 1), repeat=d):
            worst = max(worst, conjunction_error(outputs, tests, targets))
    return worst


def _independent(vectors: Sequence[int]) -> bool:
    basis = []
    for v in vectors:
        for b in basis:
            v = min(v, v ^ b)
        if v == 0:
            return False
        basis.append(v)
        basis.sort(reverse=True)
    return True


def _lsb_values(outputs: np.ndarray) -> np.ndarray:
    """Pack each output row into an int whose bit i is output bit i."""
    return row_indices(outputs[:, ::-1])
