"""
Explicit desk-scale expanders.

The default family is a 4-regular circulant graph on Z_{2^m} with shift set
{±a, ±b}. Its spectrum has a closed form, so the recorded λ is exact; the
power-iteration measurement is kept as an independent cross-check.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

# Second shifts tried when picking the default graph.
_MAX_SHIFT_CANDIDATES = 32


class ExpanderError(Exception):
    """Raised for out-of-range vertices or degree digits."""


@dataclass(frozen=True)
class Expander:
    """Circulant multigraph; digit 2j moves by +shifts[j], digit 2j+1 by -shifts[j]."""

    m: int
    shifts: Tuple[int, ...]
    lam: float

    @property
    def size(self) -> int:
        return 1 << self.m

    @property
    def degree(self) -> int:
        return 2 * len(self.shifts)

    def neighbor(self, v: int, d: int) -> int:
        if not 0 <= v < self.size:
            raise ExpanderError(f"Vertex {v} outside 0..{self.size - 1}")
        if not 0 <= d < self.degree:
            raise ExpanderError(f"Digit {d} outside 0..{self.degree - 1}")
        step = self.shifts[d // 2]
        return (v + step) % self.size if d % 2 == 0 else (v - step) % self.size

    def neighbors_array(self, vertices: np.ndarray, d: int) -> np.ndarray:
        step = self.shifts[d // 2] if d % 2 == 0 else -self.shifts[d // 2]
        return (np.asarray(vertices, dtype=np.int64) + step) % self.size

    def adjacency_table(self) -> np.ndarray:
        """``table[v, d]`` is the d-th neighbor of v."""
        vertices = np.arange(self.size, dtype=np.int64)
        return np.stack([self.neighbors_array(vertices, d) for d in range(self.degree)], axis=1)


def circulant_lambda(m: int, shifts: Sequence[int]) -> float:
    """Largest non-trivial |eigenvalue| of the normalized circulant adjacency matrix."""
    size = 1 << m
    if size == 1:
        return 0.0
    k = np.arange(1, size, dtype=np.float64)
    total = np.zeros_like(k)
    for s in shifts:
        total += 2 * np.cos(2 * np.pi * k * s / size)
    return float(np.max(np.abs(total)) / (2 * len(shifts)))


@lru_cache(maxsize=None)
def circulant_expander(m: int) -> Expander:
    """Default 4-regular expander on 2^m vertices: shifts (1, b) with the best λ."""
    if m < 0:
        raise ExpanderError(f"Vertex bit length must be non-negative, got {m}")
    size = 1 << m
    if size <= 2:
        shifts = (1, 0)
        return Expander(m=m, shifts=shifts, lam=circulant_lambda(m, shifts))
    best: Tuple[float, int] = (2.0, 2)
    for b in range(2, min(size // 2, _MAX_SHIFT_CANDIDATES + 1) + 1):
        lam = circulant_lambda(m, (1, b))
        if lam < best[0] - 1e-12:
            best = (lam, b)
    logger.debug("Circulant expander m=%d uses shifts (1, %d), lambda=%.4f", m, best[1], best[0])
    return Expander(m=m, shifts=(1, best[1]), lam=best[0])


def measure_lambda(e: Expander, iterations: int = 200, seed: int = 0) -> float:
    """Power-iteration estimate of λ on the complement of the constant vector."""
    if e.size == 1:
        return 0.0
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(e.size)
    x -= x.mean()
    ratio = 0.0
    for _ in range(iterations):
        norm = np.linalg.norm(x)
        if norm == 0:
            return 0.0
        x /= norm
        y = np.zeros_like(x)
        for d in range(e.degree):
            y += x[e.neighbors_array(np.arange(e.size), d)]
        y /= e.degree
        y -= y.mean()
        ratio = float(np.linalg.norm(y))
        x = y
    return ratio


def expander_walk(e: Expander, v0: int, digits: Sequence[int]) -> List[int]:
    """Vertices v_1..v_len with v_1 = v0 and v_{i+1} the digits[i]-th neighbor of v_i."""
    if not 0 <= v0 < e.size:
        raise ExpanderError(f"Vertex {v0} outside 0..{e.size - 1}")
    if any(not 0 <= int(d) < e.degree for d in digits):
        raise ExpanderError(f"Digits {list(digits)} must lie in 0..{e.degree - 1}")
    if not digits:
        return []
    walk = [v0]
    # the last digit is read but does not move the walk
    for d in digits[:-1]:
        walk.append(e.neighbor(walk[-1], int(d)))
    return walk


def walk_endpoints(e: Expander, starts: np.ndarray, length: int) -> np.ndarray:
    """
    Endpoints of all ``degree**length`` walks from every start vertex.

    Row r lists the endpoints from ``starts[r]``, walks ordered lexicographically
    by their digit strings.
    """
    starts = np.asarray(starts, dtype=np.int64)
    steps = np.array(
        [e.shifts[d // 2] if d % 2 == 0 else -e.shifts[d // 2] for d in range(e.degree)], dtype=np.int64
    )
    ends = starts[:, None]
    # earlier digits vary slowest
    for _ in range(length):
        ends = ((ends[:, :, None] + steps[None, None, :]) % e.size).reshape(starts.shape[0], -1)
    return ends
