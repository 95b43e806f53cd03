"""
Ordered branching programs.

An OBP of length n reads input bit i+1 at layer i. Layer 0 holds the single
start state, every non-final state has a 0-edge and a 1-edge into the next
layer, and final states carry rational labels in [0, 1] (binary for standard
programs). Values are immutable; all operations here are pure functions.
"""

import json
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import cached_property
from math import comb
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from obp_derand.utils.bits import all_inputs

Edge = Tuple[int, int]


class StructuralError(Exception):
    """Raised for malformed programs, out-of-range states or wrong input lengths."""


class Direction(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


@dataclass(frozen=True)
class StateRef:
    layer: int
    index: int

    def __str__(self) -> str:
        return f"({self.layer},{self.index})"


@dataclass(frozen=True)
class Obp:
    """A layered program; ``edges[i][v]`` is the ``(to0, to1)`` pair of state v in layer i."""

    widths: Tuple[int, ...]
    edges: Tuple[Tuple[Edge, ...], ...]
    labels: Tuple[Fraction, ...]
    binary: bool = True

    def __post_init__(self) -> None:
        _validate(self)

    @property
    def n(self) -> int:
        return len(self.widths) - 1

    @property
    def width(self) -> int:
        return max(self.widths)

    @property
    def start(self) -> StateRef:
        return StateRef(0, 0)

    def states(self, layer: int) -> List[StateRef]:
        return [StateRef(layer, v) for v in range(self.widths[layer])]

    def all_states(self) -> List[StateRef]:
        return [s for i in range(self.n + 1) for s in self.states(i)]

    def num_edges(self) -> int:
        return 2 * sum(self.widths[:-1])

    @cached_property
    def _edge_arrays(self) -> Tuple[np.ndarray, ...]:
        return tuple(np.array(layer, dtype=np.int64).reshape(-1, 2) for layer in self.edges)

    @cached_property
    def _binary_labels(self) -> np.ndarray:
        return np.array([int(label) for label in self.labels], dtype=np.uint8)


def _validate(b: Obp) -> None:
    if not b.widths or b.widths[0] != 1:
        raise StructuralError("Layer 0 must contain exactly one state")
    if any(w < 1 for w in b.widths):
        raise StructuralError(f"Every layer needs at least one state: {b.widths}")
    if len(b.edges) != b.n:
        raise StructuralError(f"Expected {b.n} edge layers, got {len(b.edges)}")
    for i, layer in enumerate(b.edges):
        if len(layer) != b.widths[i]:
            raise StructuralError(
                f"Layer {i} has {b.widths[i]} states but {len(layer)} edge pairs"
            )
        for v, (to0, to1) in enumerate(layer):
            for target in (to0, to1):
                if not 0 <= target < b.widths[i + 1]:
                    raise StructuralError(
                        f"Edge from ({i},{v}) targets {target}, outside layer {i + 1} "
                        f"of width {b.widths[i + 1]}"
                    )
    if len(b.labels) != b.widths[-1]:
        raise StructuralError(
            f"Expected {b.widths[-1]} final labels, got {len(b.labels)}"
        )
    for label in b.labels:
        if not 0 <= label <= 1:
            raise StructuralError(f"Label {label} outside [0, 1]")
        if b.binary and label not in (0, 1):
            raise StructuralError(f"Binary program has non-binary label {label}")


def make_obp(
    widths: Sequence[int],
    edges: Sequence[Sequence[Sequence[int]]],
    labels: Sequence[Any],
    *,
    binary: Optional[bool] = None,
) -> Obp:
    """Build an Obp from plain lists; ``binary`` defaults to whether all labels are 0/1."""
    fr_labels = tuple(Fraction(label) for label in labels)
    if binary is None:
        binary = all(label in (0, 1) for label in fr_labels)
    return Obp(
        widths=tuple(int(w) for w in widths),
        edges=tuple(tuple((int(e[0]), int(e[1])) for e in layer) for layer in edges),
        labels=fr_labels,
        binary=binary,
    )


def check_width(b: Obp, bound: int) -> None:
    if b.width > bound:
        raise StructuralError(f"Program width {b.width} exceeds bound {bound}")


# ------------------------- evaluation -------------------------


def step(b: Obp, v: StateRef, sigma: Sequence[int]) -> StateRef:
    """Follow the edges labelled by ``sigma`` starting from ``v``."""
    if not 0 <= v.layer <= b.n or not 0 <= v.index < b.widths[v.layer]:
        raise StructuralError(f"State {v} is not a state of this program")
    if v.layer + len(sigma) > b.n:
        raise StructuralError(
            f"Cannot read {len(sigma)} bits from layer {v.layer} of a length-{b.n} program"
        )
    index = v.index
    for offset, bit in enumerate(sigma):
        index = b.edges[v.layer + offset][index][int(bit)]
    return StateRef(v.layer + len(sigma), index)


def evaluate(b: Obp, x: Sequence[int]) -> Fraction:
    """Label of the final state reached on ``x``."""
    if len(x) != b.n:
        raise StructuralError(f"Input has length {len(x)}, program expects {b.n}")
    return b.labels[step(b, b.start, x).index]


def final_states(b: Obp, inputs: np.ndarray) -> np.ndarray:
    """Final-state index for every row of a 0/1 input matrix."""
    return states_at(b, inputs, b.n)


def states_at(b: Obp, inputs: np.ndarray, layer: int) -> np.ndarray:
    """State index at ``layer`` for every row, reading the first ``layer`` columns."""
    if inputs.ndim != 2 or inputs.shape[1] < layer:
        raise StructuralError(
            f"Input matrix of shape {inputs.shape} cannot drive {layer} layers"
        )
    state = np.zeros(inputs.shape[0], dtype=np.int64)
    for i in range(layer):
        state = b._edge_arrays[i][state, inputs[:, i].astype(np.int64)]
    return state


def accept_batch(b: Obp, inputs: np.ndarray) -> np.ndarray:
    """0/1 outputs of a binary program on every row."""
    if not b.binary:
        raise StructuralError("accept_batch needs binary labels")
    if inputs.shape[1] != b.n:
        raise StructuralError(f"Inputs have width {inputs.shape[1]}, program expects {b.n}")
    return b._binary_labels[final_states(b, inputs)]


def truth_table(b: Obp) -> List[Fraction]:
    """Labels on all ``2**n`` inputs in big-endian order."""
    finals = final_states(b, all_inputs(b.n))
    return [b.labels[int(s)] for s in finals]


# ------------------------- exact probabilities -------------------------


@dataclass(frozen=True)
class ProbTable:
    direction: Direction
    values: Tuple[Tuple[Fraction, ...], ...]

    def at(self, v: StateRef) -> Fraction:
        return self.values[v.layer][v.index]

    def layer(self, i: int) -> Tuple[Fraction, ...]:
        return self.values[i]


def exact_probs(b: Obp, direction: Direction = Direction.FORWARD) -> ProbTable:
    """Reaching (forward) or accepting-from (backward) probabilities, exactly."""
    half = Fraction(1, 2)
    if direction == Direction.FORWARD:
        layers: List[List[Fraction]] = [[Fraction(1)]]
        for i in range(b.n):
            nxt = [Fraction(0)] * b.widths[i + 1]
            for v, (to0, to1) in enumerate(b.edges[i]):
                share = layers[i][v] * half
                nxt[to0] += share
                nxt[to1] += share
            layers.append(nxt)
        return ProbTable(direction, tuple(tuple(layer) for layer in layers))

    back: List[List[Fraction]] = [list(b.labels)]
    for i in range(b.n - 1, -1, -1):
        succ = back[0]
        back.insert(0, [(succ[to0] + succ[to1]) * half for to0, to1 in b.edges[i]])
    return ProbTable(direction, tuple(tuple(layer) for layer in back))


def expectation(b: Obp) -> Fraction:
    """E[B] under uniform input, via the backward table."""
    return exact_probs(b, Direction.BACKWARD).at(b.start)


# ------------------------- constructions -------------------------


def prefix_program(b: Obp, v: StateRef) -> Obp:
    """Program of length v.layer accepting exactly the prefixes that reach ``v``."""
    if not 0 <= v.layer <= b.n or not 0 <= v.index < b.widths[v.layer]:
        raise StructuralError(f"State {v} is not a state of this program")
    labels = [1 if u == v.index else 0 for u in range(b.widths[v.layer])]
    return truncate(b, v.layer, labels)


def truncate(b: Obp, layer: int, labels: Sequence[Any]) -> Obp:
    """First ``layer`` layers of ``b`` with new labels on layer ``layer``."""
    if not 0 <= layer <= b.n:
        raise StructuralError(f"Cannot truncate a length-{b.n} program at layer {layer}")
    return make_obp(b.widths[: layer + 1], b.edges[:layer], labels)


def majority_amplify(b: Obp, d: int) -> Obp:
    """
    Program reading d consecutive inputs of b and accepting by majority.

    States of copy c are pairs (inner state, accepted copies so far) laid out
    as ``count * w_i + state`` with count in 0..c, so layer i of copy c has
    width w_i·(c+1) and the final layer holds the d+1 counts.
    """
    if d < 1 or d % 2 == 0:
        raise StructuralError(f"Repetition count must be a positive odd number, got {d}")
    if not b.binary:
        raise StructuralError("Majority amplification needs a binary program")
    if b.n == 0:
        return b
    n = b.n
    widths: List[int] = []
    edges: List[List[Edge]] = []
    for copy in range(d):
        counts = copy + 1
        for i in range(n):
            w_i = b.widths[i]
            widths.append(w_i * counts)
            layer: List[Edge] = []
            for k in range(counts):
                for u in range(w_i):
                    pair = []
                    for bit in (0, 1):
                        nxt = b.edges[i][u][bit]
                        if i < n - 1:
                            pair.append(k * b.widths[i + 1] + nxt)
                        else:
                            pair.append(k + int(b.labels[nxt]))
                    layer.append((pair[0], pair[1]))
            edges.append(layer)
    widths.append(d + 1)
    labels = [1 if k > d // 2 else 0 for k in range(d + 1)]
    return make_obp(widths, edges, labels)


def pad(b: Obp, n_target: int, w_target: int) -> Obp:
    """Extend ``b`` to length ``n_target`` with identity layers; ``w_target`` is a bound."""
    if n_target < b.n:
        raise StructuralError(f"Cannot shrink length {b.n} to {n_target}")
    if w_target < b.width:
        raise StructuralError(f"Cannot shrink width {b.width} to {w_target}")
    extra = n_target - b.n
    w_last = b.widths[-1]
    identity = tuple((u, u) for u in range(w_last))
    return Obp(
        widths=b.widths + (w_last,) * extra,
        edges=b.edges + (identity,) * extra,
        labels=b.labels,
        binary=b.binary,
    )


def constant_program(n: int, value: int) -> Obp:
    return make_obp([1] * (n + 1), [[(0, 0)]] * n, [value])


def and_program(n: int = 2) -> Obp:
    """Accept iff every bit is 1 (state 0 = all ones so far, state 1 = dead)."""
    if n == 0:
        return constant_program(0, 1)
    edges: List[List[Edge]] = [[(1, 0)]] + [[(1, 0), (1, 1)] for _ in range(n - 1)]
    return make_obp([1] + [2] * n, edges, [1, 0])


def parity_program(n: int) -> Obp:
    if n == 0:
        return constant_program(0, 0)
    edges: List[List[Edge]] = [[(0, 1)]] + [[(0, 1), (1, 0)] for _ in range(n - 1)]
    return make_obp([1] + [2] * n, edges, [0, 1])


def bit_program(n: int, position: int) -> Obp:
    """Accept iff ``x[position] == 1`` (0-indexed)."""
    if not 0 <= position < n:
        raise StructuralError(f"Position {position} outside a length-{n} input")
    widths = [1] * (position + 1) + [2] * (n - position)
    edges: List[List[Edge]] = []
    for i in range(n):
        if i < position:
            edges.append([(0, 0)])
        elif i == position:
            edges.append([(0, 1)])
        else:
            edges.append([(0, 0), (1, 1)])
    return make_obp(widths, edges, [0, 1])


def random_obp(
    n: int, w: int, rng: np.random.Generator, *, binary: bool = True
) -> Obp:
    """Seeded random program: width 1 at layer 0, ``w`` elsewhere, uniform edges and labels."""
    widths = [1] + [w] * n
    edges = [
        [tuple(int(t) for t in rng.integers(0, widths[i + 1], size=2)) for _ in range(widths[i])]
        for i in range(n)
    ]
    if binary:
        labels: List[Any] = [int(t) for t in rng.integers(0, 2, size=widths[-1])]
    else:
        labels = [Fraction(int(t), 8) for t in rng.integers(0, 9, size=widths[-1])]
    return make_obp(widths, edges, labels)


def binomial_majority(p: Fraction, d: int) -> Fraction:
    """Σ_{k > d/2} C(d,k) p^k (1-p)^(d-k)."""
    return sum(
        (comb(d, k) * p**k * (1 - p) ** (d - k) for k in range(d // 2 + 1, d + 1)),
        Fraction(0),
    )


# ------------------------- serialization -------------------------


def _format_fraction(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def to_dict(b: Obp) -> Dict[str, Any]:
    return {
        "n": b.n,
        "widths": list(b.widths),
        "edges": [[[to0, to1] for to0, to1 in layer] for layer in b.edges],
        "labels": [_format_fraction(label) for label in b.labels],
    }


def to_json(b: Obp) -> str:
    return json.dumps(to_dict(b), separators=(",", ":"))


def from_dict(data: Dict[str, Any]) -> Obp:
    try:
        widths = data["widths"]
        if int(data["n"]) != len(widths) - 1:
            raise StructuralError(f"n={data['n']} disagrees with {len(widths)} widths")
        return make_obp(widths, data["edges"], [Fraction(s) for s in data["labels"]])
    except StructuralError:
        raise
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as e:
        raise StructuralError(f"Malformed OBP document: {e}")


def from_json(text: str) -> Obp:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise StructuralError(f"OBP document is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise StructuralError("OBP document must be a JSON object")
    return from_dict(data)
