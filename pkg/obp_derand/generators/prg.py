"""
Enumerable pseudorandom generators.

Every generator exposes its seed count and a full output matrix (one row per
seed, in seed order). Seed enumeration is bounded by the configured cap, so
``output_matrix`` fails fast instead of exhausting memory.
"""

import json
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from obp_derand.combinat.small_bias import BiasGen
from obp_derand.evaluators.evaluator import EvaluatorError, TruthTable
from obp_derand.programs.obp import Obp, final_states
from obp_derand.utils.bits import all_inputs, bits_to_index, index_to_bits, parse_bits
from obp_derand.utils.config import require_under_cap

logger = logging.getLogger(__name__)


class GeneratorError(Exception):
    """Raised for length mismatches and malformed generator inputs."""


class Prg:
    """Base generator; subclasses define ``seed_len``, ``output_len`` and ``_outputs``."""

    seed_len: int
    output_len: int

    @property
    def num_seeds(self) -> int:
        return 1 << self.seed_len

    def provenance(self) -> Dict[str, Any]:
        return {"family": type(self).__name__}

    @cached_property
    def output_matrix(self) -> np.ndarray:
        require_under_cap(self.num_seeds, f"{type(self).__name__} seed enumeration")
        return self._outputs()

    def _outputs(self) -> np.ndarray:
        raise NotImplementedError

    def output(self, seed: int) -> Tuple[int, ...]:
        if not 0 <= seed < self.num_seeds:
            raise GeneratorError(f"Seed {seed} outside 0..{self.num_seeds - 1}")
        return tuple(int(b) for b in self.output_matrix[seed])

    def bit(self, seed: int, i: int) -> int:
        return self.output(seed)[i]


class EnumerationGen(Prg):
    """Identity on {0,1}^n; under it every expectation is exact."""

    def __init__(self, n: int):
        self.seed_len = n
        self.output_len = n

    def _outputs(self) -> np.ndarray:
        return all_inputs(self.output_len)

    def provenance(self) -> Dict[str, Any]:
        return {"family": "enumerate", "n": self.output_len}


class ZerosGen(Prg):
    def __init__(self, n: int):
        self.seed_len = 0
        self.output_len = n

    def _outputs(self) -> np.ndarray:
        return np.zeros((1, self.output_len), dtype=np.uint8)

    def provenance(self) -> Dict[str, Any]:
        return {"family": "zeros", "n": self.output_len}


class ExplicitGen(Prg):
    """An explicit list of outputs; each row is one seed, so the count need not be a power of two."""

    def __init__(self, rows: np.ndarray, source: str = "inline"):
        rows = np.asarray(rows, dtype=np.uint8)
        if rows.ndim != 2 or rows.shape[0] == 0:
            raise GeneratorError(f"Explicit generator needs a non-empty 2-D list, got {rows.shape}")
        self._rows = rows
        self.source = source
        self.output_len = rows.shape[1]
        self.seed_len = max((rows.shape[0] - 1).bit_length(), 0)

    @property
    def num_seeds(self) -> int:
        return self._rows.shape[0]

    def _outputs(self) -> np.ndarray:
        return self._rows

    def provenance(self) -> Dict[str, Any]:
        return {"family": "file", "source": self.source, "count": self.num_seeds}

    @classmethod
    def from_file(cls, path: Path) -> "ExplicitGen":
        """Read one bit string per line (blank lines and ``#`` comments skipped)."""
        if not path.is_file():
            raise GeneratorError(f"Generator file not found: {path}")
        rows: List[Tuple[int, ...]] = []
        for line in path.read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append(parse_bits(line))
            except ValueError as e:
                raise GeneratorError(f"Bad line in {path}: {e}")
        if len({len(r) for r in rows}) > 1:
            raise GeneratorError(f"Rows in {path} have different lengths")
        return cls(np.array(rows, dtype=np.uint8), source=str(path))


class SmallBiasPrg(Prg):
    def __init__(self, gen: BiasGen):
        self.gen = gen
        self.seed_len = gen.seed_len
        self.output_len = gen.k

    def _outputs(self) -> np.ndarray:
        return self.gen.output_matrix

    def provenance(self) -> Dict[str, Any]:
        return {"family": "smallbias", "k": self.gen.k, "h": self.gen.h, "eps": str(self.gen.eps)}


@dataclass(frozen=True, eq=False)
class HardFunction:
    """A supplied truth table standing in for the hard language at one input length."""

    table: TruthTable
    provenance: str = "inline"

    def __post_init__(self) -> None:
        if self.table.output_len != 1:
            raise GeneratorError("Hard functions are boolean")

    @property
    def m(self) -> int:
        return self.table.input_len

    @property
    def bits(self) -> np.ndarray:
        return self.table.column(0)

    @classmethod
    def from_bits(cls, bits: Sequence[int], provenance: str = "inline") -> "HardFunction":
        return cls(TruthTable.from_bits(bits), provenance)

    @classmethod
    def from_text(cls, text: str, provenance: str = "inline") -> "HardFunction":
        """Accept a bit string or a JSON object ``{"m": .., "table": "0110..."}``."""
        text = text.strip()
        try:
            if text.startswith("{"):
                doc = json.loads(text)
                hard = cls.from_bits(parse_bits(doc["table"]), provenance)
                if hard.m != int(doc.get("m", hard.m)):
                    raise GeneratorError(f"Declared m={doc['m']} disagrees with table length")
                return hard
            return cls.from_bits(parse_bits(text), provenance)
        except GeneratorError:
            raise
        except (KeyError, ValueError, TypeError, EvaluatorError) as e:
            raise GeneratorError(f"Malformed hard-function table: {e}")

    @classmethod
    def random(cls, m: int, rng: np.random.Generator) -> "HardFunction":
        return cls.from_bits([int(b) for b in rng.integers(0, 2, size=2**m)], "random")

    def at(self, x: Sequence[int]) -> int:
        return int(self.bits[bits_to_index(x)])


def expectation_under(g: Prg, b: Obp) -> Fraction:
    """E over all seeds of b(g(seed)), exactly."""
    if g.output_len != b.n:
        raise GeneratorError(f"Generator emits {g.output_len} bits, program reads {b.n}")
    finals = final_states(b, g.output_matrix)
    counts = np.bincount(finals, minlength=b.widths[-1])
    total = sum((int(c) * label for c, label in zip(counts, b.labels)), Fraction(0))
    return total / g.num_seeds


def seed_bits(seed: int, seed_len: int) -> Tuple[int, ...]:
    return index_to_bits(seed, seed_len)
