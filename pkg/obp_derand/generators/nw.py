"""Nisan-Wigderson generator: output bit i is f applied to the seed restricted to S_i."""

from typing import Any, Dict, Sequence, Tuple

import numpy as np

from obp_derand.combinat.designs import Design
from obp_derand.evaluators.evaluator import TruthTable
from obp_derand.generators.prg import GeneratorError, Prg
from obp_derand.utils.bits import all_inputs, bits_to_index, row_indices


def restrict(x: Sequence[int], members: Sequence[int]) -> Tuple[int, ...]:
    """x_S: the bits of x at the (sorted) indices in S."""
    return tuple(int(x[j]) for j in members)


class NwGen(Prg):
    def __init__(self, design: Design, f: TruthTable):
        if f.output_len != 1:
            raise GeneratorError("NW needs a boolean function")
        if f.input_len != design.set_size:
            raise GeneratorError(
                f"Function reads {f.input_len} bits but design sets have {design.set_size}"
            )
        self.design = design
        self.f = f
        self.seed_len = design.s
        self.output_len = design.n

    def expand(self, x: Sequence[int]) -> Tuple[int, ...]:
        if len(x) != self.seed_len:
            raise GeneratorError(f"Seed has {len(x)} bits, expected {self.seed_len}")
        column = self.f.column(0)
        return tuple(int(column[bits_to_index(restrict(x, s))]) for s in self.design.sets)

    def _outputs(self) -> np.ndarray:
        seeds = all_inputs(self.seed_len)
        column = self.f.column(0)
        bits = [column[row_indices(seeds[:, list(s)])] for s in self.design.sets]
        if not bits:
            return np.zeros((seeds.shape[0], 0), dtype=np.uint8)
        return np.stack(bits, axis=1).astype(np.uint8)

    def provenance(self) -> Dict[str, Any]:
        return {"family": "nw", "design": self.design.to_dict(), "m": self.f.input_len}


def nw_expand(g: NwGen, x: Sequence[int]) -> Tuple[int, ...]:
    return g.expand(x)
