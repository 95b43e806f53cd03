"""Seeded instance corpora for the acceptance campaigns."""

from fractions import Fraction
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from obp_derand.generators.prg import HardFunction
from obp_derand.programs.obp import Obp, random_obp
from obp_derand.utils.bits import all_inputs, parity_array, row_indices


def random_programs(
    rng: np.random.Generator,
    count: int,
    n_range: Tuple[int, int],
    w_range: Tuple[int, int],
    *,
    fractional_share: float = 0.0,
) -> Iterator[Obp]:
    """``count`` programs with length and width drawn uniformly from the inclusive ranges."""
    for _ in range(count):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        w = int(rng.integers(w_range[0], w_range[1] + 1))
        binary = bool(rng.random() >= fractional_share)
        yield random_obp(n, w, rng, binary=binary)


def easy_functions(m: int, rng: np.random.Generator) -> List[Tuple[str, HardFunction]]:
    """Functions with tiny circuits, plus one random table for contrast."""
    inputs = all_inputs(m)
    parity = parity_array(row_indices(inputs))
    return [
        ("zero", HardFunction.from_bits([0] * 2**m, "zero")),
        ("one", HardFunction.from_bits([1] * 2**m, "one")),
        ("first_bit", HardFunction.from_bits([int(b) for b in inputs[:, 0]], "first_bit")),
        ("parity", HardFunction.from_bits([int(b) for b in parity], "parity")),
        ("random", HardFunction.random(m, rng)),
    ]


def noisy_layers(
    layers: Sequence[Sequence[Fraction]], tol: Fraction, rng: np.random.Generator
) -> List[List[Fraction]]:
    """Shift each value by -tol, 0 or +tol, clipped to [0, 1]."""
    out: List[List[Fraction]] = []
    for layer in layers:
        shifted = []
        for p in layer:
            q = p + int(rng.integers(-1, 2)) * tol
            shifted.append(min(max(q, Fraction(0)), Fraction(1)))
        out.append(shifted)
    return out


def corrupt_positions(
    rng: np.random.Generator, size: int, weight: int, alphabet: int
) -> List[Tuple[int, int]]:
    """``weight`` distinct positions, each with a nonzero additive error below ``alphabet``."""
    positions = rng.choice(size, size=weight, replace=False)
    return [(int(p), int(rng.integers(1, alphabet))) for p in positions]
