"""
Black-box estimation of E[B] from a hitting set and oracle queries.

The program is only reachable through ``OracleObp``, which counts every
query. Seeds of a hitting set H are grouped per layer i by their
continuation outcomes: x and x' fall in the same class when
B(H(x)[:i] + H(y)[:n-i]) == B(H(x')[:i] + H(y)[:n-i]) for every seed y.
Class representatives are the smallest seeds, so they are also the
lexicographically first bit strings.

The consistency tester checks three things with tolerance 5*eps:
child averaging (an estimate is the mean of the estimates for the two
children, as far as H can identify the children), agreement between
equivalent seeds, and exact final values. An accepted run returns the
layer-0 estimate, which is within 6*eps*n of E[B].
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, log
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from obp_derand.generators.prg import Prg
from obp_derand.programs.obp import Direction, Obp, StateRef, accept_batch, exact_probs, states_at
from obp_derand.utils.bits import all_inputs
from obp_derand.utils.config import get_ledger, require_under_cap
from obp_derand.utils.run_id import get_run_id

logger = logging.getLogger(__name__)

QueryFn = Callable[[np.ndarray], np.ndarray]


class BbTestError(Exception):
    """Raised for malformed estimates, hitting sets or oracle inputs."""


class SamplerFailure(Exception):
    """No candidate estimate source passed the consistency tester."""

    def __init__(self, candidates_tried: int, last_reject: Optional["BbReject"] = None):
        self.candidates_tried = candidates_tried
        self.last_reject = last_reject
        detail = f"; last rejection {last_reject.test} at layer {last_reject.layer}" if last_reject else ""
        super().__init__(f"All {candidates_tried} candidates were rejected{detail}")


def _log(msg: str, *, level: int = logging.INFO) -> None:
    logger.log(level, "[stage=bbtest run=%s] %s", get_run_id(), msg)


def _frac(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


# ------------------------- oracle and hitting set -------------------------


class OracleObp:
    """
    Query access to a program of known length and width.

    ``query_batch`` is the only way the tester and sampler learn anything
    about B; every row counts as one query.
    """

    def __init__(self, n: int, query: QueryFn, width: Optional[int] = None):
        self.n = n
        self.width = width
        self._query = query
        self._hidden: Optional[Obp] = None
        self.queries = 0

    @classmethod
    def from_obp(cls, b: Obp) -> "OracleObp":
        oracle = cls(b.n, lambda rows: accept_batch(b, rows), width=b.width)
        oracle._hidden = b
        return oracle

    def reveal(self) -> Obp:
        """The hidden program, for harness-side comparisons only."""
        if self._hidden is None:
            raise BbTestError("This oracle has no hidden program")
        return self._hidden

    def query_batch(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.uint8)
        if rows.ndim != 2 or rows.shape[1] != self.n:
            raise BbTestError(f"Queries of shape {rows.shape} do not match length {self.n}")
        self.queries += rows.shape[0]
        return np.asarray(self._query(rows), dtype=np.uint8)

    def __call__(self, x: Sequence[int]) -> int:
        return int(self.query_batch(np.array([x], dtype=np.uint8))[0])


@dataclass(frozen=True)
class HittingSet:
    """Output rows of a generator used as a hitting set with declared error ``eps``."""

    outputs: np.ndarray
    eps: Fraction
    source: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_prg(cls, g: Prg, eps: Any) -> "HittingSet":
        return cls(g.output_matrix, Fraction(eps), g.provenance())

    @property
    def num_seeds(self) -> int:
        return self.outputs.shape[0]

    @property
    def seed_len(self) -> int:
        return max((self.num_seeds - 1).bit_length(), 0)

    @property
    def output_len(self) -> int:
        return self.outputs.shape[1]

    def prefix(self, seed: int, length: int) -> Tuple[int, ...]:
        return tuple(int(b) for b in self.outputs[seed, :length])


def _check_pair(o: OracleObp, h: HittingSet, i: int) -> None:
    if h.output_len != o.n:
        raise BbTestError(f"Hitting set outputs {h.output_len} bits, program reads {o.n}")
    if not 0 <= i <= o.n:
        raise BbTestError(f"Layer {i} outside 0..{o.n}")


def _continuation_rows(h: HittingSet, prefix: Sequence[int], n: int) -> np.ndarray:
    rest = n - len(prefix)
    if rest == 0:
        return np.array([prefix], dtype=np.uint8)
    suffixes = h.outputs[:, :rest]
    head = np.tile(np.array(prefix, dtype=np.uint8), (suffixes.shape[0], 1))
    return np.hstack([head, suffixes])


def distinguishing_suffix(o: OracleObp, h: HittingSet, x: int, x2: int, i: int) -> Optional[int]:
    """The first seed y whose continuation separates x from x2 at layer i, if any."""
    _check_pair(o, h, i)
    if x == x2:
        return None
    left = o.query_batch(_continuation_rows(h, h.prefix(x, i), o.n))
    right = o.query_batch(_continuation_rows(h, h.prefix(x2, i), o.n))
    differs = np.flatnonzero(left != right)
    return int(differs[0]) if differs.size else None


def indistinguishable(o: OracleObp, h: HittingSet, x: int, x2: int, i: int) -> bool:
    return distinguishing_suffix(o, h, x, x2, i) is None


# ------------------------- seed classes -------------------------


@dataclass(frozen=True)
class LayerClasses:
    layer: int
    members: Tuple[Tuple[int, ...], ...]
    seed_class: Tuple[int, ...]
    keys: Dict[bytes, int]

    @property
    def representatives(self) -> Tuple[int, ...]:
        return tuple(group[0] for group in self.members)

    @property
    def count(self) -> int:
        return len(self.members)

    def to_dict(self) -> Dict[str, Any]:
        return {"layer": self.layer, "classes": [list(group) for group in self.members]}


class SeedClassIndex:
    """
    Per-layer equivalence classes of seeds, built lazily from oracle queries.

    Continuation outcome vectors are cached by prefix, so seeds sharing a
    prefix cost one batch of queries between them.
    """

    def __init__(self, oracle: OracleObp, hsg: HittingSet):
        _check_pair(oracle, hsg, 0)
        require_under_cap(hsg.num_seeds * hsg.num_seeds, "continuation queries per layer")
        self.oracle = oracle
        self.hsg = hsg
        self._vectors: Dict[Tuple[int, ...], bytes] = {}
        self._layers: Dict[int, LayerClasses] = {}

    @property
    def n(self) -> int:
        return self.oracle.n

    def continuation(self, prefix: Sequence[int]) -> bytes:
        key = tuple(int(b) for b in prefix)
        if key not in self._vectors:
            outcomes = self.oracle.query_batch(_continuation_rows(self.hsg, key, self.n))
            self._vectors[key] = outcomes.tobytes()
        return self._vectors[key]

    def layer(self, i: int) -> LayerClasses:
        _check_pair(self.oracle, self.hsg, i)
        if i not in self._layers:
            groups: Dict[bytes, List[int]] = {}
            seed_class: List[int] = []
            for x in range(self.hsg.num_seeds):
                vector = self.continuation(self.hsg.prefix(x, i))
                if vector not in groups:
                    groups[vector] = []
                groups[vector].append(x)
                seed_class.append(list(groups).index(vector))
            self._layers[i] = LayerClasses(
                layer=i,
                members=tuple(tuple(g) for g in groups.values()),
                seed_class=tuple(seed_class),
                keys={vector: j for j, vector in enumerate(groups)},
            )
        return self._layers[i]

    def class_of_prefix(self, prefix: Sequence[int]) -> Optional[int]:
        """Class at layer len(prefix) whose seeds are indistinguishable from ``prefix``."""
        return self.layer(len(prefix)).keys.get(self.continuation(prefix))

    def final_value(self, x: int) -> int:
        return self.continuation(self.hsg.prefix(x, self.n))[0]

    def class_counts(self) -> List[int]:
        return [self.layer(i).count for i in range(self.n + 1)]


def build_classes(o: OracleObp, h: HittingSet, i: int, width: Optional[int] = None) -> LayerClasses:
    """
    Classes of seeds at layer i, ordered by representative.

    A class count above ``width`` means H separates more states than the
    program can have; it is logged, and the caller decides what to do.
    """
    classes = SeedClassIndex(o, h).layer(i)
    bound = width if width is not None else o.width
    if bound is not None and classes.count > bound:
        _log(f"layer {i} has {classes.count} classes, above width {bound}", level=logging.WARNING)
    return classes


# ------------------------- the consistency tester -------------------------


@dataclass(frozen=True)
class BbEstimates:
    """
    Estimates ``values[i][j]`` per layer.

    Class-level estimates cover layers 0..n-1 and index classes; per-seed
    estimates cover layers 0..n and index seeds.
    """

    values: Tuple[Tuple[Fraction, ...], ...]
    per_seed: bool = False

    def __post_init__(self) -> None:
        for i, layer in enumerate(self.values):
            for j, p in enumerate(layer):
                if not 0 <= p <= 1:
                    raise BbTestError(f"Estimate ({j},{i}) is {p}, outside [0, 1]")

    @classmethod
    def from_layers(cls, layers: Sequence[Sequence[Any]], per_seed: bool = False) -> "BbEstimates":
        return cls(tuple(tuple(Fraction(p) for p in layer) for layer in layers), per_seed)


@dataclass(frozen=True)
class BbAccept:
    value: Fraction
    bound: Fraction
    checks: int
    queries: int

    accepted = True

    def to_dict(self) -> Dict[str, Any]:
        return {
            "accepted": True,
            "value": _frac(self.value),
            "bound": _frac(self.bound),
            "checks": self.checks,
            "queries": self.queries,
        }


@dataclass(frozen=True)
class BbReject:
    test: str
    layer: int
    witness: Dict[str, int]
    observed: Fraction
    threshold: Fraction

    accepted = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "accepted": False,
            "test": self.test,
            "layer": self.layer,
            "witness": self.witness,
            "observed": _frac(self.observed),
            "threshold": _frac(self.threshold),
        }


BbVerdict = Union[BbAccept, BbReject]
SeedEstimate = Callable[[int, int], Fraction]


def _extremes(seeds: Sequence[int], estimate: Callable[[int], Fraction]) -> Tuple[Tuple[int, Fraction], Tuple[int, Fraction]]:
    values = [(x, estimate(x)) for x in seeds]
    return min(values, key=lambda item: item[1]), max(values, key=lambda item: item[1])


def _run_tests(index: SeedClassIndex, estimate: SeedEstimate, eps: Fraction) -> BbVerdict:
    h, n = index.hsg, index.n
    tol = 5 * eps
    seeds = range(h.num_seeds)
    checks = 0

    for i in range(n):
        children = index.layer(i + 1)
        for x in seeds:
            prefix = h.prefix(x, i)
            classes = [index.class_of_prefix(prefix + (bit,)) for bit in (0, 1)]
            if classes[0] is None or classes[1] is None:
                continue
            p = estimate(x, i)
            ends = [
                _extremes(children.members[c], lambda y: estimate(y, i + 1)) for c in classes
            ]
            for pick in (0, 1):
                (x0, p0), (x1, p1) = ends[0][pick], ends[1][pick]
                checks += 1
                gap = abs(p - (p0 + p1) / 2)
                if gap > tol:
                    return BbReject("t1", i, {"x": x, "x0": x0, "x1": x1}, gap, tol)

    for i in range(n + 1):
        for group in index.layer(i).members:
            (lo_x, lo), (hi_x, hi) = _extremes(group, lambda y: estimate(y, i))
            checks += 1
            if hi - lo > tol:
                return BbReject("t2", i, {"x": lo_x, "x_prime": hi_x}, hi - lo, tol)

    for x in seeds:
        exact = Fraction(index.final_value(x))
        checks += 1
        if estimate(x, n) != exact:
            return BbReject("t3", n, {"x": x}, abs(estimate(x, n) - exact), Fraction(0))

    return BbAccept(estimate(0, 0), 6 * eps * n, checks, index.oracle.queries)


def bb_lc_test(
    o: OracleObp,
    h: HittingSet,
    est: BbEstimates,
    eps: Any,
    *,
    index: Optional[SeedClassIndex] = None,
) -> BbVerdict:
    """
    Class-level consistency test.

    Each class estimate is copied to every seed of its class; final values
    are computed exactly from the oracle.

    Args:
        o: Oracle for the program.
        h: Hitting set whose seeds define the classes.
        est: Class-level estimates for layers 0..n-1.
        eps: Tester accuracy; the checks use 5*eps.
        index: A class index for (o, h) to reuse.

    Returns:
        ``BbAccept`` carrying the layer-0 estimate and the 6*eps*n bound, or
        ``BbReject`` with the first failing check and its witness seeds.

    Raises:
        BbTestError: ``est`` is per-seed or does not match the class counts.
    """
    if est.per_seed:
        raise BbTestError("Class-level test needs class-level estimates")
    index = index or SeedClassIndex(o, h)
    if len(est.values) != o.n:
        raise BbTestError(f"Expected estimates for {o.n} layers, got {len(est.values)}")
    for i, layer in enumerate(est.values):
        if len(layer) != index.layer(i).count:
            raise BbTestError(
                f"Layer {i} has {index.layer(i).count} classes but {len(layer)} estimates"
            )

    def estimate(x: int, i: int) -> Fraction:
        if i == o.n:
            return Fraction(index.final_value(x))
        return est.values[i][index.layer(i).seed_class[x]]

    return _run_tests(index, estimate, Fraction(eps))


def bb_lc_test_raw(
    o: OracleObp,
    h: HittingSet,
    est: BbEstimates,
    eps: Any,
    *,
    index: Optional[SeedClassIndex] = None,
) -> BbVerdict:
    """Per-seed consistency test; ``est`` gives p̃[i][x] for every layer including n."""
    if not est.per_seed:
        raise BbTestError("Per-seed test needs per-seed estimates")
    if len(est.values) != o.n + 1 or any(len(layer) != h.num_seeds for layer in est.values):
        raise BbTestError(f"Per-seed estimates must cover {o.n + 1} layers of {h.num_seeds} seeds")
    index = index or SeedClassIndex(o, h)
    return _run_tests(index, lambda x, i: est.values[i][x], Fraction(eps))


# ------------------------- estimate sources -------------------------


def sample_count(n: int, w: int, eps: Any, constant: Optional[int] = None) -> int:
    """⌈c·ln(4nw)/eps²⌉ samples per block, c from the ledger unless given."""
    c = get_ledger().bb_sample_constant if constant is None else constant
    eps = Fraction(eps)
    return ceil(c * log(4 * n * w) / float(eps * eps))


def _mean_acceptance(o: OracleObp, prefix: Sequence[int], samples: np.ndarray) -> Fraction:
    if samples.shape[0] == 0:
        raise BbTestError("Estimate block holds no samples")
    head = np.tile(np.array(prefix, dtype=np.uint8), (samples.shape[0], 1))
    outcomes = o.query_batch(np.hstack([head, samples]))
    return Fraction(int(outcomes.sum()), samples.shape[0])


def est_from_hsg_block(
    o: OracleObp,
    h: HittingSet,
    block: Sequence[int],
    j: int,
    i: int,
    t: int,
    *,
    index: Optional[SeedClassIndex] = None,
) -> Fraction:
    """
    Mean of B over H(y_{j,i})[:i] followed by each of t samples.

    ``block`` holds t samples of n bits; the first n-i bits of each are used.
    """
    index = index or SeedClassIndex(o, h)
    bits = np.asarray(block, dtype=np.uint8)
    if bits.size != t * o.n:
        raise BbTestError(f"Block of {bits.size} bits does not hold {t} samples of {o.n} bits")
    rep = index.layer(i).representatives[j]
    samples = bits.reshape(t, o.n)[:, : o.n - i]
    return _mean_acceptance(o, h.prefix(rep, i), samples)


class BlockSource:
    """Candidate sample blocks, indexed by candidate z, class j and layer i."""

    t: Optional[int] = None

    @property
    def num_candidates(self) -> int:
        raise NotImplementedError

    def samples(self, z: int, j: int, i: int) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> Dict[str, Any]:
        return {"source": type(self).__name__, "t": self.t}


class HsgBlockSource(BlockSource):
    """Each output of ``h2`` is cut into n·w blocks of t samples of n bits, layer-major."""

    def __init__(self, h2: HittingSet, n: int, w: int, t: int):
        needed = n * w * t * n
        if h2.output_len < needed:
            raise BbTestError(f"Second hitting set outputs {h2.output_len} bits, need {needed}")
        self.h2 = h2
        self.n = n
        self.w = w
        self.t = t

    @property
    def num_candidates(self) -> int:
        return self.h2.num_seeds

    def block(self, z: int, j: int, i: int) -> np.ndarray:
        if j >= self.w:
            raise BbTestError(f"Class {j} at layer {i} exceeds the {self.w} blocks per layer")
        size = self.t * self.n
        start = (i * self.w + j) * size
        return self.h2.outputs[z, start : start + size]

    def samples(self, z: int, j: int, i: int) -> np.ndarray:
        return self.block(z, j, i).reshape(self.t, self.n)[:, : self.n - i]

    def describe(self) -> Dict[str, Any]:
        return {"source": "hsg", "t": self.t, "w": self.w, "h2": self.h2.source}


class ExhaustiveBlockSource(BlockSource):
    """A single candidate whose block at layer i lists every suffix of length n-i."""

    def __init__(self, n: int):
        require_under_cap(2**n, "exhaustive suffix block")
        self.n = n

    @property
    def num_candidates(self) -> int:
        return 1

    def samples(self, z: int, j: int, i: int) -> np.ndarray:
        return all_inputs(self.n - i)


@dataclass(frozen=True)
class SamplerResult:
    value: Fraction
    z_found: int
    candidates_tried: int
    query_count: int
    tester_eps: Fraction
    class_counts: Tuple[int, ...]
    verdict: BbAccept
    source: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "estimate": _frac(self.value),
            "z_found": self.z_found,
            "candidates_tried": self.candidates_tried,
            "query_count": self.query_count,
            "tester_eps": _frac(self.tester_eps),
            "class_counts": list(self.class_counts),
            "verdict": self.verdict.to_dict(),
            "source": self.source,
        }


def _candidate_estimates(o: OracleObp, index: SeedClassIndex, source: BlockSource, z: int) -> BbEstimates:
    layers = []
    for i in range(o.n):
        classes = index.layer(i)
        layers.append(
            tuple(
                _mean_acceptance(o, index.hsg.prefix(rep, i), source.samples(z, j, i))
                for j, rep in enumerate(classes.representatives)
            )
        )
    return BbEstimates(tuple(layers))


def bb_sampler(
    o: OracleObp,
    h: HittingSet,
    source: BlockSource,
    eps: Any,
    *,
    width: Optional[int] = None,
) -> SamplerResult:
    """
    Estimate E[B] to within eps using only oracle queries.

    Candidates z are tried in order; each yields class estimates from its
    sample blocks, and the first set the tester accepts at eps/(6n) wins.

    Raises:
        BbTestError: the program has length 0.
        SamplerFailure: every candidate was rejected.
    """
    if o.n < 1:
        raise BbTestError("Sampling needs a program of length at least 1")
    eps = Fraction(eps)
    tester_eps = eps / (6 * o.n)
    index = SeedClassIndex(o, h)
    counts = index.class_counts()
    bound = width if width is not None else o.width
    if bound is not None and max(counts) > bound:
        _log(f"class counts {counts} exceed width {bound}", level=logging.WARNING)
    _log(f"classes per layer {counts} after {o.queries} queries; {source.num_candidates} candidates")

    last: Optional[BbReject] = None
    for z in range(source.num_candidates):
        est = _candidate_estimates(o, index, source, z)
        verdict = bb_lc_test(o, h, est, tester_eps, index=index)
        if isinstance(verdict, BbAccept):
            _log(f"candidate z={z} accepted: estimate {verdict.value}, {o.queries} queries")
            return SamplerResult(
                value=verdict.value,
                z_found=z,
                candidates_tried=z + 1,
                query_count=o.queries,
                tester_eps=tester_eps,
                class_counts=tuple(counts),
                verdict=verdict,
                source=source.describe(),
            )
        logger.debug("Candidate z=%d rejected by %s at layer %d", z, verdict.test, verdict.layer)
        last = verdict
    raise SamplerFailure(source.num_candidates, last)


# ------------------------- white-box diagnostics -------------------------


def _seed_states(b: Obp, h: HittingSet, i: int) -> np.ndarray:
    return states_at(b, h.outputs, i)


def true_class_estimates(b: Obp, index: SeedClassIndex) -> BbEstimates:
    """Exact acceptance probabilities from each class representative's state."""
    back = exact_probs(b, Direction.BACKWARD)
    layers = []
    for i in range(b.n):
        states = _seed_states(b, index.hsg, i)
        reps = index.layer(i).representatives
        layers.append(tuple(back.values[i][int(states[rep])] for rep in reps))
    return BbEstimates(tuple(layers))


def true_seed_estimates(b: Obp, h: HittingSet) -> BbEstimates:
    """Exact p_{x,i} for every seed and layer, final layer included."""
    back = exact_probs(b, Direction.BACKWARD)
    layers = []
    for i in range(b.n + 1):
        states = _seed_states(b, h, i)
        layers.append(tuple(back.values[i][int(v)] for v in states))
    return BbEstimates(tuple(layers), per_seed=True)


def unverified_states(b: Obp, h: HittingSet) -> Set[StateRef]:
    """States hit by H whose 0- or 1-child is hit by no seed."""
    found: Set[StateRef] = set()
    for i in range(b.n):
        here = {int(v) for v in _seed_states(b, h, i)}
        hit_next = {int(v) for v in _seed_states(b, h, i + 1)}
        for v in here:
            if any(child not in hit_next for child in b.edges[i][v]):
                found.add(StateRef(i, v))
    return found


def unverified_reach_probability(b: Obp, h: HittingSet) -> Fraction:
    """Probability that a uniform input passes through an unverified state."""
    require_under_cap(2**b.n, "uniform inputs")
    bad = unverified_states(b, h)
    inputs = all_inputs(b.n)
    hits = np.zeros(inputs.shape[0], dtype=bool)
    for i in range(b.n):
        layer_bad = [s.index for s in bad if s.layer == i]
        if layer_bad:
            hits |= np.isin(states_at(b, inputs, i), layer_bad)
    return Fraction(int(hits.sum()), inputs.shape[0])


def class_spread(b: Obp, index: SeedClassIndex) -> Fraction:
    """Largest gap in exact acceptance probability between states of one class."""
    back = exact_probs(b, Direction.BACKWARD)
    spread = Fraction(0)
    for i in range(b.n + 1):
        states = _seed_states(b, index.hsg, i)
        for group in index.layer(i).members:
            probs = [back.values[i][int(states[x])] for x in group]
            spread = max(spread, max(probs) - min(probs))
    return spread


def seed_classes_by_state(b: Obp, h: HittingSet, i: int) -> Iterator[Tuple[int, ...]]:
    """Seeds grouped by the state they reach at layer i, in representative order."""
    states = _seed_states(b, h, i)
    groups: Dict[int, List[int]] = {}
    for x, v in enumerate(states):
        groups.setdefault(int(v), []).append(x)
    for group in sorted(groups.values()):
        yield tuple(group)
