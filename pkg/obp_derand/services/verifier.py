"""
Next-bit tester for generators against ordered branching programs.

For every state v of layer i the signed bias E_G[N_v] is the probability
(over seeds) of reaching v and then reading a 1, minus that of reaching v and
reading a 0. If every layer's absolute bias sum stays within the budget the
generator is certified to fool the program; otherwise the lowest failing
layer yields a next-bit predictor: the truncated program labelled 1 wherever
the bias is non-negative.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Tuple, Union

import numpy as np

from obp_derand.generators.prg import Prg, expectation_under
from obp_derand.programs.obp import Obp, StateRef, accept_batch, states_at, truncate
from obp_derand.programs.obp import to_dict as obp_to_dict

logger = logging.getLogger(__name__)


class VerifierError(Exception):
    """Raised for mismatched lengths and states outside the testable layers."""


def _frac(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True)
class BiasTable:
    """Signed E_G[N_v] for every state v of one layer, in state order."""

    layer: int
    values: Tuple[Fraction, ...]

    def total(self) -> Fraction:
        return sum((abs(v) for v in self.values), Fraction(0))

    def labels(self) -> List[int]:
        return [1 if v >= 0 else 0 for v in self.values]

    def to_dict(self) -> Dict[str, Any]:
        return {"layer": self.layer, "values": [_frac(v) for v in self.values], "total": _frac(self.total())}


@dataclass(frozen=True)
class Certified:
    eps: Fraction
    error_bound: Fraction
    estimate: Fraction
    layer_sums: Tuple[Fraction, ...]

    kind = "certified"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "eps": _frac(self.eps),
            "error_bound": _frac(self.error_bound),
            "estimate": _frac(self.estimate),
            "layer_sums": [_frac(s) for s in self.layer_sums],
        }


@dataclass(frozen=True)
class Predictor:
    """A program reading the first ``layer`` generator bits and guessing the next one."""

    layer: int
    program: Obp
    advantage: Fraction
    biases: BiasTable

    kind = "predictor"

    @property
    def success(self) -> Fraction:
        return self.advantage + Fraction(1, 2)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "layer": self.layer,
            "advantage": _frac(self.advantage),
            "success": _frac(self.success),
            "biases": self.biases.to_dict(),
            "predictor": obp_to_dict(self.program),
        }


NextBitVerdict = Union[Certified, Predictor]


def _check_lengths(b: Obp, g: Prg) -> None:
    if g.output_len != b.n:
        raise VerifierError(f"Generator emits {g.output_len} bits, program reads {b.n}")


def _layer_biases(b: Obp, outputs: np.ndarray, layer: int) -> BiasTable:
    states = states_at(b, outputs, layer)
    nxt = outputs[:, layer].astype(bool)
    width = b.widths[layer]
    ones = np.bincount(states[nxt], minlength=width)
    zeros = np.bincount(states[~nxt], minlength=width)
    total = outputs.shape[0]
    return BiasTable(layer, tuple(Fraction(int(o) - int(z), total) for o, z in zip(ones, zeros)))


def bias_table(b: Obp, g: Prg, layer: int) -> BiasTable:
    """E_G[N_v] for every state of ``layer``, by enumerating all seeds."""
    if not 0 <= layer < b.n:
        raise VerifierError(f"Layer {layer} has no next bit in a length-{b.n} program")
    if g.output_len < layer + 1:
        raise VerifierError(f"Generator emits {g.output_len} bits, layer {layer} needs {layer + 1}")
    return _layer_biases(b, g.output_matrix, layer)


def next_bit_bias(b: Obp, g: Prg, v: StateRef) -> Fraction:
    """
    Exact E_G[N_v] over all seeds.

    Raises:
        VerifierError: v lies in the final layer or outside the program.
    """
    if not 0 <= v.layer < b.n:
        raise VerifierError(f"State {v} is not followed by an input bit")
    if not 0 <= v.index < b.widths[v.layer]:
        raise VerifierError(f"State {v} is not a state of this program")
    return bias_table(b, g, v.layer).values[v.index]


def predictor_success(g: Prg, program: Obp) -> Fraction:
    """Pr over seeds that ``program`` on the first bits of G(seed) equals the next bit."""
    i = program.n
    if g.output_len <= i:
        raise VerifierError(f"Generator emits {g.output_len} bits, predictor needs {i + 1}")
    outputs = g.output_matrix
    guesses = accept_batch(program, outputs[:, :i])
    hits = int(np.sum(guesses == outputs[:, i]))
    return Fraction(hits, outputs.shape[0])


def test_fools(b: Obp, g: Prg, eps: Any) -> NextBitVerdict:
    """
    Certify that G fools b to within eps·n, or return a next-bit predictor.

    Args:
        b: Program of length n; labels may be fractional.
        g: Generator with n output bits.
        eps: Per-layer budget on the absolute bias sum.

    Returns:
        ``Certified`` when every layer's bias sum is at most eps, else a
        ``Predictor`` built from the lowest failing layer.

    Raises:
        VerifierError: length mismatch, or a predictor that fails re-measurement.
        CapacityError: seed enumeration exceeds the cap.
    """
    eps = Fraction(eps)
    _check_lengths(b, g)
    outputs = g.output_matrix
    sums: List[Fraction] = []
    for layer in range(b.n):
        table = _layer_biases(b, outputs, layer)
        total = table.total()
        sums.append(total)
        if total > eps:
            program = truncate(b, layer, table.labels())
            advantage = predictor_success(g, program) - Fraction(1, 2)
            if advantage <= eps / 2:
                raise VerifierError(
                    f"Predictor at layer {layer} measured advantage {advantage}, expected > {eps / 2}"
                )
            logger.info(
                "Generator fails at layer %d: bias sum %s > %s, predictor advantage %s",
                layer,
                total,
                eps,
                advantage,
            )
            return Predictor(layer, program, advantage, table)

    estimate = expectation_under(g, b)
    logger.info("Generator certified: max layer bias %s <= %s", max(sums, default=Fraction(0)), eps)
    return Certified(eps, eps * b.n, estimate, tuple(sums))

