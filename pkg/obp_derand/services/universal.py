"""
Universal derandomizer: dovetail over registered estimators, budgets and
rounding thresholds, and trust an estimator only after its answers on every
prefix program pass the local consistency test.

An estimator is any deterministic ``(n, program, r, run) -> Fraction``. The
harness meters it through ``run``: ``tick`` counts steps, ``hold``/``release``
track workspace cells, and exceeding either budget aborts that simulation.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import floor
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple

from obp_derand.programs.obp import Obp, StateRef, exact_probs, prefix_program
from obp_derand.services.lctest import LcAccept, lc_test
from obp_derand.utils.config import get_ledger
from obp_derand.utils.run_id import get_run_id

logger = logging.getLogger(__name__)

PROMISE_EXPONENT = 5


class NonTerminationError(Exception):
    """No registered estimator passed the consistency test up to the last phase."""


class EstimatorAborted(Exception):
    """An estimator run exceeded its step or workspace budget."""

    def __init__(self, resource: str, used: int, limit: int):
        self.resource = resource
        self.used = used
        self.limit = limit
        super().__init__(f"{resource} budget exceeded: {used} > {limit}")


def _log(msg: str, *, level: int = logging.INFO) -> None:
    logger.log(level, "[stage=univ run=%s] %s", get_run_id(), msg)


@dataclass
class EstimatorRun:
    """Step and workspace meter for a single estimator call."""

    max_steps: Optional[int] = None
    max_workspace: Optional[int] = None
    steps: int = 0
    workspace: int = 0
    peak_workspace: int = 0

    def tick(self, count: int = 1) -> None:
        self.steps += count
        if self.max_steps is not None and self.steps > self.max_steps:
            raise EstimatorAborted("steps", self.steps, self.max_steps)

    def hold(self, cells: int) -> None:
        self.workspace += cells
        self.peak_workspace = max(self.peak_workspace, self.workspace)
        if self.max_workspace is not None and self.workspace > self.max_workspace:
            raise EstimatorAborted("workspace", self.workspace, self.max_workspace)

    def release(self, cells: int) -> None:
        self.workspace = max(self.workspace - cells, 0)

    def counters(self) -> Dict[str, int]:
        return {"steps": self.steps, "peak_workspace": self.peak_workspace}


Estimator = Callable[[int, Obp, Fraction, EstimatorRun], Fraction]


@dataclass
class EstimatorRegistry:
    """Indexable, append-only list of named estimators."""

    _entries: List[Tuple[str, Estimator]] = field(default_factory=list)

    def register(self, name: str, estimator: Estimator) -> Estimator:
        if any(existing == name for existing, _ in self._entries):
            raise ValueError(f"Estimator {name!r} is already registered")
        self._entries.append((name, estimator))
        return estimator

    def __len__(self) -> int:
        return len(self._entries)

    def __getitem__(self, i: int) -> Tuple[str, Estimator]:
        return self._entries[i]

    def names(self) -> List[str]:
        return [name for name, _ in self._entries]


# ------------------------- estimators -------------------------


def promise_step(n: int, c: int = PROMISE_EXPONENT) -> Fraction:
    """Spacing n^(-c+2) of the values an f_c estimator may output."""
    return Fraction(1, n ** (c - 2))


def round_down(gamma: Fraction, r: Fraction, n: int, c: int = PROMISE_EXPONENT) -> Fraction:
    """k·n^(-c+2) for the largest integer k with γ + r >= k·n^(-c+2)."""
    step = promise_step(n, c)
    return floor((gamma + r) / step) * step


def fc_reference_estimator(
    n: int, b: Obp, r: Fraction, run: Optional[EstimatorRun] = None, c: int = PROMISE_EXPONENT
) -> Fraction:
    """Exact E[B] by a metered forward pass, rounded down onto the promise grid."""
    run = run or EstimatorRun()
    layer = [Fraction(1)]
    run.hold(1)
    for i in range(b.n):
        nxt = [Fraction(0)] * b.widths[i + 1]
        run.hold(len(nxt))
        for v, (to0, to1) in enumerate(b.edges[i]):
            run.tick(2)
            share = layer[v] / 2
            nxt[to0] += share
            nxt[to1] += share
        run.release(len(layer))
        layer = nxt
    run.tick(len(layer))
    gamma = sum((label * p for label, p in zip(b.labels, layer)), Fraction(0))
    run.release(len(layer))
    return round_down(gamma, Fraction(r), n, c)


def constant_estimator(value: Any) -> Estimator:
    """An estimator that ignores its input; used to plant wrong answers."""
    fixed = Fraction(value)

    def estimate(n: int, b: Obp, r: Fraction, run: EstimatorRun) -> Fraction:
        run.hold(1)
        run.tick()
        run.release(1)
        return fixed

    return estimate


def default_registry() -> EstimatorRegistry:
    registry = EstimatorRegistry()
    registry.register("reference", fc_reference_estimator)
    return registry


# ------------------------- the promise -------------------------


def rounding_grid(n: int) -> List[Fraction]:
    """r = k·n^-5/2 for k = 1..2n²."""
    unit = Fraction(1, 2 * n**5)
    return [k * unit for k in range(1, 2 * n * n + 1)]


def promise_holds(b: Obp, r: Any, c: int = PROMISE_EXPONENT, n: Optional[int] = None) -> bool:
    """|E[B_→v] − k·n^(-c+2) + r| > n^-c/6 for every state v and integer k."""
    n = n or max(b.n, b.width, 1)
    r = Fraction(r)
    step = promise_step(n, c)
    margin = Fraction(1, 6 * n**c)
    forward = exact_probs(b)
    for layer in forward.values:
        for p in layer:
            x = p + r
            below = floor(x / step) * step
            if min(x - below, below + step - x) <= margin:
                return False
    return True


def good_r_exists(b: Obp, c: int = PROMISE_EXPONENT, n: Optional[int] = None) -> Optional[Fraction]:
    """The first grid threshold for which the promise holds at every state."""
    n = n or max(b.n, b.width, 1)
    for r in rounding_grid(n):
        if promise_holds(b, r, c, n):
            return r
    return None


# ------------------------- the dovetail -------------------------


@dataclass(frozen=True)
class UnivResult:
    value: Fraction
    estimator: str
    index: int
    phase: int
    r: Fraction
    lc: LcAccept
    counters: Dict[str, int]
    attempts: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "value": f"{self.value.numerator}/{self.value.denominator}",
            "estimator": self.estimator,
            "i": self.index,
            "j": self.phase,
            "r": f"{self.r.numerator}/{self.r.denominator}",
            "lc": self.lc.to_dict(),
            "counters": self.counters,
            "attempts": self.attempts,
        }


def _schedule(phases: int, registry_size: int) -> Iterator[Tuple[int, int]]:
    for j in range(phases + 1):
        for i in range(min(j + 1, registry_size)):
            yield j, i


def univ_derand(
    n: int,
    b: Obp,
    registry: Optional[EstimatorRegistry] = None,
    *,
    max_phase: Optional[int] = None,
) -> UnivResult:
    """
    Estimate E[B] with whichever registered estimator first proves consistent.

    Phase j runs estimators 0..j with at most j workspace cells and 2^j steps
    per call, over every rounding threshold r. Prefix-program estimates are
    recomputed whenever the consistency test asks for them.

    Raises:
        ValueError: the program is longer or wider than n.
        NonTerminationError: nothing passed by the last phase.
    """
    if b.n > n or b.width > n:
        raise ValueError(f"Program of length {b.n} and width {b.width} exceeds n={n}")
    registry = registry if registry is not None else default_registry()
    phases = get_ledger().univ_max_phase if max_phase is None else max_phase
    tol = Fraction(1, n**3)
    grid = rounding_grid(n)
    attempts = 0

    for j, i in _schedule(phases, len(registry)):
        name, estimator = registry[i]
        for r in grid:
            attempts += 1

            def on_demand(v: StateRef) -> Fraction:
                meter = EstimatorRun(max_steps=2**j, max_workspace=j)
                return estimator(n, prefix_program(b, v), r, meter)

            try:
                verdict = lc_test(b, on_demand, tol)
                if not isinstance(verdict, LcAccept):
                    continue
                meter = EstimatorRun(max_steps=2**j, max_workspace=j)
                value = estimator(n, b, r, meter)
            except EstimatorAborted as e:
                logger.debug("Estimator %s aborted at j=%d: %s", name, j, e)
                continue
            _log(f"estimator {name} (i={i}) accepted at j={j}, r={r}: value {value}")
            return UnivResult(value, name, i, j, r, verdict, meter.counters(), attempts)

    raise NonTerminationError(
        f"No estimator among {registry.names()} passed the consistency test by phase {phases}"
    )
