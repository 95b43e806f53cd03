"""
Evaluators: serializable deterministic functions with a size metric.

An evaluator is a composition tree over a small set of primitives. Execution
is batched: every node maps a uint8 input matrix of shape (N, input_len) to
an output matrix of shape (N, output_len). Shared subtrees evaluated on the
same matrix within one batch are computed once.

Cost convention: gates, table rows, OBP edges and selected bits cost 1 each.
``size`` is the tree-recursive sum, so a subtree used twice is paid twice.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from obp_derand.algebra.gf2k import get_field, rs_decode
from obp_derand.programs.obp import Obp, accept_batch
from obp_derand.programs.obp import from_dict as obp_from_dict
from obp_derand.programs.obp import to_dict as obp_to_dict
from obp_derand.utils.bits import all_inputs, format_bits, parse_bits, row_indices
from obp_derand.utils.config import get_settings, require_under_cap

logger = logging.getLogger(__name__)

Cache = Dict[Tuple[int, int], Tuple[np.ndarray, np.ndarray]]


class EvaluatorError(Exception):
    """Raised for ill-formed evaluators, wrong input lengths or bad documents."""


class Evaluator:
    """Base class; subclasses provide ``input_len``, ``output_len`` and ``_compute``."""

    input_len: int
    output_len: int

    @property
    def own_cost(self) -> int:
        return 0

    def weighted_children(self) -> List[Tuple["Evaluator", int]]:
        return []

    @cached_property
    def size(self) -> int:
        return self.own_cost + sum(w * c.size for c, w in self.weighted_children())

    def evaluate(self, inputs: np.ndarray, cache: Cache) -> np.ndarray:
        key = (id(self), id(inputs))
        hit = cache.get(key)
        if hit is not None:
            return hit[1]
        out = self._compute(inputs, cache)
        # keep the input alive so its id is not reused within the batch
        cache[key] = (inputs, out)
        return out

    def _compute(self, inputs: np.ndarray, cache: Cache) -> np.ndarray:
        raise NotImplementedError


def _same_shape(children: Sequence[Evaluator], what: str) -> None:
    if not children:
        raise EvaluatorError(f"{what} needs at least one child")
    ins = {c.input_len for c in children}
    outs = {c.output_len for c in children}
    if len(ins) != 1 or len(outs) != 1:
        raise EvaluatorError(f"{what} children disagree on shape: inputs {ins}, outputs {outs}")


# ------------------------- leaves -------------------------


@dataclass(frozen=True, eq=False)
class Const(Evaluator):
    input_len: int
    bits: Tuple[int, ...]

    @property
    def output_len(self) -> int:
        return len(self.bits)

    @property
    def own_cost(self) -> int:
        return 1

    def _compute(self, inputs: np.ndarray, cache: Cache) -> np.ndarray:
        row = np.array(self.bits, dtype=np.uint8)
        return np.tile(row, (inputs.shape[0], 1))


@dataclass(frozen=True, eq=False)
class Select(Evaluator):
    input_len: int
    positions: Tuple[int, ...]

    def __post_init__(self) -> None:
        if any(not 0 <= p < self.input_len for p in self.positions):
            raise EvaluatorError(f"Positions {self.positions} outside 0..{self.input_len - 1}")

    @property
    def output_len(self) -> int:
        return len(self.positions)

    @property
    def own_cost(self) -> int:
        return len(self.positions)

    def _compute(self, inputs: np.ndarray, cache: Cache) -> np.ndarray:
        return inputs[:, list(self.positions)]


@dataclass(frozen=True, eq=False)
class Table(Evaluator):
    """Explicit truth table; ``rows[r]`` is the output on the input spelling r big-endian."""

    input_len: int
    rows: np.ndarray

    def __post_init__(self) -> None:
        if self.rows.ndim != 2 or self.rows.shape[0] != 2**self.input_len:
            raise EvaluatorError(
                f"Table of shape {self.rows.shape} does not cover 2^{self.input_len} inputs"
            )

    @property
    def output_len(self) -> int:
        return self.rows.shape[1]

    @property
    def own_cost(self) -> int:
        return 2**self.input_len

    def _compute(self, inputs: np.ndarray, cache: Cache) -> np.ndarray:
        return self.rows[row_indices(inputs)]


@dataclass(frozen=True, eq=False)
class ObpEval(Evaluator):
    obp: Obp

    def __post_init__(self) -> None:
        if not self.obp.binary:
            raise EvaluatorError("Only binary programs can be embedded")

    @property
    def input_len(self) -> int:
        return self.obp.n

    @property
    def output_len(self) -> int:
        return 1

    @property
    def own_cost(self) -> int:
        return self.obp.num_edges()

    def _compute(self, inputs: np.ndarray, cache: Cache) -> np.ndarray:
        return accept_batch(self.obp, inputs)[:, None]


# ------------------------- gates -------------------------


@dataclass(frozen=True, eq=False)
class Xor(Evaluator):
    children: Tuple[Evaluator, ...]

    def __post_init__(self) -> None:
        _same_shape(self.children, "XOR")

    @property
    def input_len(self) -> int:
        return self.children[0].input_len

    @property
    def output_len(self) -> int:
        return self.children[0].output_len

    @property
    def own_cost(self) -> int:
        return 1

    def weighted_children(self) -> List[Tuple[Evaluator, int]]:
        return [(c, 1) for c in self.children]

    def _compute(self, inputs: np.ndarray, cache: Cache) -> np.ndarray:
        out = self.children[0].evaluate(inputs, cache).copy()
        for c in self.children[1:]:
            out ^= c.evaluate(inputs, cache)
        return out


@dataclass(frozen=True, eq=False)
class And(Xor):
    def __post_init__(self) -> None:
        _same_shape(self.children, "AND")

    def _compute(self, inputs: np.ndarray, cache: Cache) -> np.ndarray:
        out = self.children[0].evaluate(inputs, cache).copy()
        for c in self.children[1:]:
            out &= c.evaluate(inputs, cache)
        return out


@dataclass(frozen=True, eq=False)
class Maj(Xor):
    """Bitwise weighted majority; a weight counts identical copies of a child. Ties give 0."""

    weights: Optional[Tuple[int, ...]] = None

    def __post_init__(self) -> None:
        _same_shape(self.children, "MAJ")
        if self.weights is not None and (
            len(self.weights) != len(self.children) or any(w < 1 for w in self.weights)
        ):
            raise EvaluatorError("MAJ weights must be positive, one per child")

    @property
    def effective_weights(self) -> Tuple[int, ...]:
        return self.weights if self.weights is not None else (1,) * len(self.children)

    def weighted_children(self) -> List[Tuple[Evaluator, int]]:
        return list(zip(self.children, self.effective_weights))

    def _compute(self, inputs: np.ndarray, cache: Cache) -> np.ndarray:
        total = np.zeros((inputs.shape[0], self.output_len), dtype=np.int64)
        for c, w in self.weighted_children():
            total += w * c.evaluate(inputs, cache).astype(np.int64)
        return (2 * total > sum(self.effective_weights)).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class InnerProduct(Evaluator):
    left: Evaluator
    right: Evaluator

    def __post_init__(self) -> None:
        _same_shape([self.left, self.right], "Inner product")

    @property
    def input_len(self) -> int:
        return self.left.input_len

    @property
    def output_len(self) -> int:
        return 1

    @property
    def own_cost(self) -> int:
        return 1

    def weighted_children(self) -> List[Tuple[Evaluator, int]]:
        return [(self.left, 1), (self.right, 1)]

    def _compute(self, inputs: np.ndarray, cache: Cache) -> np.ndarray:
        both = self.left.evaluate(inputs, cache) & self.right.evaluate(inputs, cache)
        return (both.sum(axis=1) % 2).astype(np.uint8)[:, None]


# ------------------------- wiring -------------------------


@dataclass(frozen=True, eq=False)
class Concat(Evaluator):
    parts: Tuple[Evaluator, ...]

    def __post_init__(self) -> None:
        if not self.parts or len({p.input_len for p in self.parts}) != 1:
            raise EvaluatorError("Concat parts must share one input length")

    @property
    def input_len(self) -> int:
        return self.parts[0].input_len

    @property
    def output_len(self) -> int:
        return sum(p.output_len for p in self.parts)

    def weighted_children(self) -> List[Tuple[Evaluator, int]]:
        return [(p, 1) for p in self.parts]

    def _compute(self, inputs: np.ndarray, cache: Cache) -> np.ndarray:
        return np.concatenate([p.evaluate(inputs, cache) for p in self.parts], axis=1)


@dataclass(frozen=True, eq=False)
class Compose(Evaluator):
    """``outer(inner(x))``."""

    outer: Evaluator
    inner: Evaluator

    def __post_init__(self) -> None:
        if self.outer.input_len != self.inner.output_len:
            raise EvaluatorError(
                f"Cannot feed {self.inner.output_len} bits into an evaluator "
                f"reading {self.outer.input_len}"
            )

    @property
    def input_len(self) -> int:
        return self.inner.input_len

    @property
    def output_len(self) -> int:
        return self.outer.output_len

    def weighted_children(self) -> List[Tuple[Evaluator, int]]:
        return [(self.outer, 1), (self.inner, 1)]

    def _compute(self, inputs: np.ndarray, cache: Cache) -> np.ndarray:
        return self.outer.evaluate(self.inner.evaluate(inputs, cache), cache)


@dataclass(frozen=True, eq=False)
class Substitute(Evaluator):
    """
    Call ``sub`` on a string built from x and fixed bits.

    Bit j of the sub-input is ``x[sources[j]] ^ flips[j]``, or just ``flips[j]``
    when ``sources[j]`` is -1. Costs one per wired bit on top of ``sub``.
    """

    sub: Evaluator
    input_len: int
    sources: Tuple[int, ...]
    flips: Tuple[int, ...]

    def __post_init__(self) -> None:
        n_sub = self.sub.input_len
        if len(self.sources) != n_sub or len(self.flips) != n_sub:
            raise EvaluatorError(f"Substitution must describe all {n_sub} inputs of the callee")
        if any(not -1 <= s < self.input_len for s in self.sources):
            raise EvaluatorError(f"Sources {self.sources} outside -1..{self.input_len - 1}")

    @property
    def output_len(self) -> int:
        return self.sub.output_len

    @property
    def own_cost(self) -> int:
        return len(self.sources)

    def weighted_children(self) -> List[Tuple[Evaluator, int]]:
        return [(self.sub, 1)]

    def _compute(self, inputs: np.ndarray, cache: Cache) -> np.ndarray:
        sources = np.array(self.sources, dtype=np.int64)
        wired = sources >= 0
        sub_inputs = np.zeros((inputs.shape[0], len(self.sources)), dtype=np.uint8)
        sub_inputs[:, wired] = inputs[:, sources[wired]]
        sub_inputs ^= np.array(self.flips, dtype=np.uint8)[None, :]
        return self.sub.evaluate(sub_inputs, cache)


@dataclass(frozen=True, eq=False)
class Decode(Evaluator):
    """
    Reed-Solomon decode of the word formed by the children's outputs.

    Child i yields the k bits (least significant first) of the word's i-th
    coordinate; the output is the decoded value at 0, or all zeros when
    decoding fails. Costs N^3 for the decoder itself.
    """

    k: int
    degree: int
    children: Tuple[Evaluator, ...]

    def __post_init__(self) -> None:
        _same_shape(self.children, "Decode")
        if len(self.children) != 2**self.k or self.children[0].output_len != self.k:
            raise EvaluatorError(f"Decode over GF(2^{self.k}) needs {2**self.k} children of {self.k} bits")

    @property
    def input_len(self) -> int:
        return self.children[0].input_len

    @property
    def output_len(self) -> int:
        return self.k

    @property
    def own_cost(self) -> int:
        return (2**self.k) ** 3

    def weighted_children(self) -> List[Tuple[Evaluator, int]]:
        return [(c, 1) for c in self.children]

    def _compute(self, inputs: np.ndarray, cache: Cache) -> np.ndarray:
        weights = np.left_shift(np.int64(1), np.arange(self.k, dtype=np.int64))
        words = np.stack(
            [c.evaluate(inputs, cache).astype(np.int64) @ weights for c in self.children], axis=1
        )
        unique, inverse = np.unique(words, axis=0, return_inverse=True)
        field_k = get_field(self.k)
        decoded = np.zeros(unique.shape[0], dtype=np.int64)
        for r, word in enumerate(unique):
            result = rs_decode(field_k, [int(v) for v in word], self.degree)
            decoded[r] = 0 if result is None else result[0]
        values = decoded[np.asarray(inverse).reshape(-1)]
        return ((values[:, None] >> np.arange(self.k)[None, :]) & 1).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class Memo(Evaluator):
    """Transparent dense cache of ``inner`` over its whole domain; costs nothing."""

    inner: Evaluator
    _table: Dict[str, np.ndarray] = field(default_factory=dict, init=False, repr=False)

    @property
    def input_len(self) -> int:
        return self.inner.input_len

    @property
    def output_len(self) -> int:
        return self.inner.output_len

    def weighted_children(self) -> List[Tuple[Evaluator, int]]:
        return [(self.inner, 1)]

    def _compute(self, inputs: np.ndarray, cache: Cache) -> np.ndarray:
        if self.input_len > get_settings().memo_bits:
            return self.inner.evaluate(inputs, cache)
        if "rows" not in self._table:
            self._table["rows"] = self.inner.evaluate(all_inputs(self.input_len), {})
        return self._table["rows"][row_indices(inputs)]


# ------------------------- running and measuring -------------------------


def run_batch(e: Evaluator, inputs: np.ndarray) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=np.uint8)
    if inputs.ndim != 2 or inputs.shape[1] != e.input_len:
        raise EvaluatorError(
            f"Inputs of shape {inputs.shape} do not match input length {e.input_len}"
        )
    return e.evaluate(inputs, {})


def run(e: Evaluator, x: Sequence[int]) -> Tuple[int, ...]:
    """Output bits of ``e`` on one input."""
    row = np.array([list(x)], dtype=np.uint8).reshape(1, len(x))
    return tuple(int(b) for b in run_batch(e, row)[0])


def measure(e: Evaluator) -> int:
    return e.size


@dataclass(frozen=True)
class SizeBudget:
    bound: int

    def __post_init__(self) -> None:
        if self.bound <= 0:
            raise EvaluatorError(f"Size budget must be positive, got {self.bound}")

    def admits(self, e: Evaluator) -> bool:
        return e.size <= self.bound


# ------------------------- truth tables and success -------------------------


@dataclass(frozen=True, eq=False)
class TruthTable:
    """Function {0,1}^input_len -> {0,1}^output_len as a (2^input_len, output_len) matrix."""

    input_len: int
    rows: np.ndarray

    def __post_init__(self) -> None:
        if self.rows.ndim != 2 or self.rows.shape[0] != 2**self.input_len:
            raise EvaluatorError(f"Truth table of shape {self.rows.shape} for {self.input_len} inputs")

    @property
    def output_len(self) -> int:
        return self.rows.shape[1]

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "TruthTable":
        """Single-output table from its 2^m values."""
        m = max(len(bits).bit_length() - 1, 0)
        if 2**m != len(bits):
            raise EvaluatorError(f"Table length {len(bits)} is not a power of two")
        return cls(m, np.array(bits, dtype=np.uint8).reshape(-1, 1))

    def column(self, j: int = 0) -> np.ndarray:
        return self.rows[:, j]

    def as_evaluator(self) -> Table:
        return Table(self.input_len, self.rows)

    def equals(self, other: "TruthTable") -> bool:
        return self.input_len == other.input_len and np.array_equal(self.rows, other.rows)


def truth_table_of(e: Evaluator) -> TruthTable:
    n = e.input_len
    require_under_cap(2**n, "evaluator truth table")
    return TruthTable(n, run_batch(e, all_inputs(n)))


def success(e: Evaluator, f: TruthTable, domain: Optional[np.ndarray] = None) -> Fraction:
    """Exact fraction of inputs (all, or the given row indices) where e agrees with f."""
    if e.input_len != f.input_len or e.output_len != f.output_len:
        raise EvaluatorError("Evaluator and truth table have different shapes")
    require_under_cap(2**f.input_len, "success measurement")
    rows = np.arange(2**f.input_len) if domain is None else np.asarray(domain, dtype=np.int64)
    if rows.size == 0:
        raise EvaluatorError("Success over an empty domain is undefined")
    got = run_batch(e, all_inputs(f.input_len)[rows])
    agree = np.all(got == f.rows[rows], axis=1)
    return Fraction(int(agree.sum()), int(rows.size))


def advantage(e: Evaluator, f: TruthTable, domain: Optional[np.ndarray] = None) -> Fraction:
    return 2 * success(e, f, domain) - 1


def negate(e: Evaluator) -> Evaluator:
    ones = Const(e.input_len, (1,) * e.output_len)
    return Xor((e, ones))


def constant_evaluator(input_len: int, bits: Sequence[int]) -> Const:
    return Const(input_len, tuple(int(b) for b in bits))


# ------------------------- serialization -------------------------


def to_dict(e: Evaluator) -> Dict[str, Any]:
    """Tagged node list with ids; shared subtrees are written once."""
    ids: Dict[int, int] = {}
    nodes: List[Dict[str, Any]] = []

    def visit(node: Evaluator) -> int:
        if id(node) in ids:
            return ids[id(node)]
        doc = _node_doc(node, visit)
        doc["id"] = len(nodes)
        ids[id(node)] = doc["id"]
        nodes.append(doc)
        return doc["id"]

    root = visit(e)
    return {"root": root, "nodes": nodes, "size": e.size}


def _node_doc(node: Evaluator, visit: Any) -> Dict[str, Any]:
    if isinstance(node, Const):
        return {"type": "const", "input_len": node.input_len, "bits": format_bits(node.bits)}
    if isinstance(node, Select):
        return {"type": "select", "input_len": node.input_len, "positions": list(node.positions)}
    if isinstance(node, Table):
        return {
            "type": "table",
            "input_len": node.input_len,
            "output_len": node.output_len,
            "rows": format_bits(node.rows.reshape(-1)),
        }
    if isinstance(node, ObpEval):
        return {"type": "obp", "obp": obp_to_dict(node.obp)}
    if isinstance(node, Maj):
        return {
            "type": "maj",
            "children": [visit(c) for c in node.children],
            "weights": list(node.effective_weights),
        }
    if isinstance(node, And):
        return {"type": "and", "children": [visit(c) for c in node.children]}
    if isinstance(node, Xor):
        return {"type": "xor", "children": [visit(c) for c in node.children]}
    if isinstance(node, InnerProduct):
        return {"type": "ip", "left": visit(node.left), "right": visit(node.right)}
    if isinstance(node, Concat):
        return {"type": "concat", "parts": [visit(p) for p in node.parts]}
    if isinstance(node, Compose):
        return {"type": "compose", "outer": visit(node.outer), "inner": visit(node.inner)}
    if isinstance(node, Substitute):
        return {
            "type": "sub",
            "sub": visit(node.sub),
            "input_len": node.input_len,
            "sources": list(node.sources),
            "flips": format_bits(node.flips),
        }
    if isinstance(node, Decode):
        return {
            "type": "decode",
            "k": node.k,
            "degree": node.degree,
            "children": [visit(c) for c in node.children],
        }
    if isinstance(node, Memo):
        return {"type": "memo", "inner": visit(node.inner)}
    raise EvaluatorError(f"Cannot serialize {type(node).__name__}")


def from_dict(doc: Dict[str, Any]) -> Evaluator:
    try:
        built: Dict[int, Evaluator] = {}
        for node in doc["nodes"]:
            built[int(node["id"])] = _build_node(node, built)
        return built[int(doc["root"])]
    except EvaluatorError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise EvaluatorError(f"Malformed evaluator document: {e}")


def _build_node(node: Dict[str, Any], built: Dict[int, Evaluator]) -> Evaluator:
    kind = node["type"]

    def ref(i: Any) -> Evaluator:
        return built[int(i)]

    if kind == "const":
        return Const(int(node["input_len"]), parse_bits(node["bits"]))
    if kind == "select":
        return Select(int(node["input_len"]), tuple(int(p) for p in node["positions"]))
    if kind == "table":
        rows = np.array(parse_bits(node["rows"]), dtype=np.uint8)
        return Table(int(node["input_len"]), rows.reshape(-1, int(node["output_len"])))
    if kind == "obp":
        return ObpEval(obp_from_dict(node["obp"]))
    if kind == "maj":
        return Maj(tuple(ref(c) for c in node["children"]), tuple(int(w) for w in node["weights"]))
    if kind == "and":
        return And(tuple(ref(c) for c in node["children"]))
    if kind == "xor":
        return Xor(tuple(ref(c) for c in node["children"]))
    if kind == "ip":
        return InnerProduct(ref(node["left"]), ref(node["right"]))
    if kind == "concat":
        return Concat(tuple(ref(p) for p in node["parts"]))
    if kind == "compose":
        return Compose(ref(node["outer"]), ref(node["inner"]))
    if kind == "sub":
        return Substitute(
            ref(node["sub"]),
            int(node["input_len"]),
            tuple(int(s) for s in node["sources"]),
            parse_bits(node["flips"]),
        )
    if kind == "decode":
        return Decode(int(node["k"]), int(node["degree"]), tuple(ref(c) for c in node["children"]))
    if kind == "memo":
        return Memo(ref(node["inner"]))
    raise EvaluatorError(f"Unknown evaluator node type {kind!r}")
