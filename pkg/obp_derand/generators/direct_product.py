"""
Derandomized direct product: block i is r|_{S_i} XOR the i-th vertex of an expander walk.

Seeds are laid out as (r, v, d): s bits of r, m bits of the start vertex v
(big-endian), then one ``digit_bits``-wide big-endian digit per block.
"""

from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from obp_derand.combinat.designs import Design
from obp_derand.combinat.expanders import Expander, expander_walk
from obp_derand.evaluators.evaluator import TruthTable
from obp_derand.generators.nw import restrict
from obp_derand.generators.prg import GeneratorError
from obp_derand.utils.bits import all_inputs, bits_to_index, index_to_bits, row_indices
from obp_derand.utils.config import require_under_cap


class DirectProductGen:
    def __init__(self, design: Design, expander: Expander, blocks: int):
        if design.n < blocks:
            raise GeneratorError(f"Design has {design.n} sets, need {blocks}")
        if design.set_size != expander.m:
            raise GeneratorError(
                f"Design sets have {design.set_size} indices but vertices have {expander.m} bits"
            )
        self.design = design
        self.expander = expander
        self.blocks = blocks
        self.m = expander.m
        self.digit_bits = max((expander.degree - 1).bit_length(), 0)

    @property
    def s(self) -> int:
        return self.design.s

    @property
    def input_len(self) -> int:
        return self.s + self.m + self.blocks * self.digit_bits

    def split(self, x: Sequence[int]) -> Tuple[Tuple[int, ...], int, List[int]]:
        if len(x) != self.input_len:
            raise GeneratorError(f"Seed has {len(x)} bits, expected {self.input_len}")
        r = tuple(int(b) for b in x[: self.s])
        v = bits_to_index(x[self.s : self.s + self.m])
        start = self.s + self.m
        digits = [
            bits_to_index(x[start + j * self.digit_bits : start + (j + 1) * self.digit_bits])
            for j in range(self.blocks)
        ]
        return r, v, digits

    def expand(self, r: Sequence[int], v: int, d: Sequence[int]) -> List[Tuple[int, ...]]:
        """The ``blocks`` blocks of m bits each."""
        if len(r) != self.s or len(d) != self.blocks:
            raise GeneratorError(
                f"Expected |r|={self.s} and {self.blocks} digits, got {len(r)} and {len(d)}"
            )
        walk = expander_walk(self.expander, v, d)
        out = []
        for members, vertex in zip(self.design.sets, walk):
            part = restrict(r, members)
            vbits = index_to_bits(vertex, self.m)
            out.append(tuple(a ^ b for a, b in zip(part, vbits)))
        return out

    def blocks_matrix(self, seeds: np.ndarray) -> np.ndarray:
        """Blocks for every seed row: shape (N, blocks, m)."""
        seeds = np.asarray(seeds, dtype=np.uint8)
        table = self.expander.adjacency_table()
        vertex = row_indices(seeds[:, self.s : self.s + self.m])
        shifts = np.arange(self.m - 1, -1, -1, dtype=np.int64)
        start = self.s + self.m
        out = np.empty((seeds.shape[0], self.blocks, self.m), dtype=np.uint8)
        for i, members in enumerate(self.design.sets[: self.blocks]):
            vbits = ((vertex[:, None] >> shifts[None, :]) & 1).astype(np.uint8)
            out[:, i, :] = seeds[:, list(members)] ^ vbits
            digit = row_indices(seeds[:, start + i * self.digit_bits : start + (i + 1) * self.digit_bits])
            vertex = table[vertex, digit]
        return out

    def product_table(self, f: TruthTable) -> TruthTable:
        """f''(x) = (f(block_1), ..., f(block_k)) over all seeds."""
        if f.input_len != self.m or f.output_len != 1:
            raise GeneratorError(f"Expected a boolean function on {self.m} bits")
        require_under_cap(2**self.input_len, "direct-product table")
        blocks = self.blocks_matrix(all_inputs(self.input_len))
        column = f.column(0)
        rows = np.stack(
            [column[row_indices(blocks[:, i, :])] for i in range(self.blocks)], axis=1
        ).astype(np.uint8)
        return TruthTable(self.input_len, rows)

    def provenance(self) -> Dict[str, Any]:
        return {
            "family": "direct_product",
            "design": self.design.to_dict(),
            "expander_shifts": list(self.expander.shifts),
            "blocks": self.blocks,
        }


def dp_expand(g: DirectProductGen, r: Sequence[int], v: int, d: Sequence[int]) -> List[Tuple[int, ...]]:
    return g.expand(r, v, d)
