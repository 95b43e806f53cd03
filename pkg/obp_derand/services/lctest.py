"""
Local consistency test for reaching-probability estimates.

Estimates are consumed one layer at a time through an ``EstimateSource``
callback, so a caller that recomputes each value on request never needs to
hold more than two layers. The test checks the start state and the
half/half flow of every layer; on acceptance the final-layer ℓ1 error is at
most the start deviation plus the sum of layer residuals.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

from obp_derand.programs.obp import Obp, StateRef

logger = logging.getLogger(__name__)

EstimateSource = Callable[[StateRef], Fraction]


class LcTestError(Exception):
    """Raised when estimates do not cover the program's states."""


def _frac(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True)
class ReachEstimates:
    """Estimated reaching probability for every state, layer by layer."""

    values: Tuple[Tuple[Fraction, ...], ...]

    def __post_init__(self) -> None:
        for i, layer in enumerate(self.values):
            for v, p in enumerate(layer):
                if not 0 <= p <= 1:
                    raise LcTestError(f"Estimate for ({i},{v}) is {p}, outside [0, 1]")

    @classmethod
    def from_layers(cls, layers: Sequence[Sequence[Any]]) -> "ReachEstimates":
        return cls(tuple(tuple(Fraction(p) for p in layer) for layer in layers))

    def covers(self, b: Obp) -> bool:
        return len(self.values) == len(b.widths) and all(
            len(layer) == w for layer, w in zip(self.values, b.widths)
        )

    def at(self, v: StateRef) -> Fraction:
        return self.values[v.layer][v.index]


@dataclass(frozen=True)
class LcAccept:
    value: Fraction
    bound: Fraction
    observed_bound: Fraction
    residuals: Tuple[Fraction, ...]
    peak_held: int

    accepted = True

    def to_dict(self) -> Dict[str, Any]:
        return {
            "accepted": True,
            "value": _frac(self.value),
            "bound": _frac(self.bound),
            "observed_bound": _frac(self.observed_bound),
            "residuals": [_frac(r) for r in self.residuals],
            "peak_held": self.peak_held,
        }


@dataclass(frozen=True)
class LcReject:
    layer: int
    reason: str
    observed: Fraction
    threshold: Fraction
    peak_held: int

    accepted = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "accepted": False,
            "layer": self.layer,
            "reason": self.reason,
            "observed": _frac(self.observed),
            "threshold": _frac(self.threshold),
            "peak_held": self.peak_held,
        }


LcVerdict = Union[LcAccept, LcReject]


def default_tolerance(n: int) -> Fraction:
    """n^-3, the completeness tolerance the test is calibrated for."""
    return Fraction(1, max(n, 1) ** 3)


def layer_residual(b: Obp, layer: int, current: Sequence[Fraction], nxt: Sequence[Fraction]) -> Fraction:
    """Σ_v |p̃_v − ½·Σ_{u→v} p̃_u| over the states v of layer+1."""
    inflow = [Fraction(0)] * b.widths[layer + 1]
    for u, (to0, to1) in enumerate(b.edges[layer]):
        share = current[u] / 2
        inflow[to0] += share
        inflow[to1] += share
    return sum((abs(p - q) for p, q in zip(nxt, inflow)), Fraction(0))


def lc_test(
    b: Obp,
    est: Union[ReachEstimates, EstimateSource],
    tol_in: Optional[Any] = None,
) -> LcVerdict:
    """
    Accept estimates that are consistent with the program's edge flow.

    Args:
        b: The program; labels may be fractional.
        est: A full table, or a callback queried once per state in layer order.
        tol_in: Completeness tolerance; defaults to n^-3.

    Returns:
        ``LcAccept`` with the value Σ label·p̃ over the final layer and the
        bound tol_in + 2·n·w·tol_in on its error, or ``LcReject`` naming the
        first failing layer.

    Raises:
        LcTestError: a table that does not cover every state.
    """
    tol = default_tolerance(b.n) if tol_in is None else Fraction(tol_in)
    if isinstance(est, ReachEstimates):
        if not est.covers(b):
            raise LcTestError("Estimates do not cover every state of the program")
        source: EstimateSource = est.at
    else:
        source = est
    w = b.width
    flow_threshold = 2 * w * tol

    def fetch(layer: int) -> List[Fraction]:
        return [Fraction(source(StateRef(layer, v))) for v in range(b.widths[layer])]

    current = fetch(0)
    peak = len(current)
    start_dev = abs(current[0] - 1)
    if start_dev > tol:
        return LcReject(0, "start", start_dev, tol, peak)
    if any(not 0 <= p <= 1 for p in current):
        return LcReject(0, "range", max(current), Fraction(1), peak)

    residuals: List[Fraction] = []
    for i in range(b.n):
        nxt = fetch(i + 1)
        peak = max(peak, len(current) + len(nxt))
        if any(not 0 <= p <= 1 for p in nxt):
            return LcReject(i + 1, "range", max(abs(p) for p in nxt), Fraction(1), peak)
        residual = layer_residual(b, i, current, nxt)
        if residual > flow_threshold:
            logger.debug("Flow residual %s at layer %d exceeds %s", residual, i, flow_threshold)
            return LcReject(i + 1, "flow", residual, flow_threshold, peak)
        residuals.append(residual)
        current = nxt

    value = sum((label * p for label, p in zip(b.labels, current)), Fraction(0))
    bound = tol + 2 * b.n * w * tol
    observed = start_dev + sum(residuals, Fraction(0))
    return LcAccept(value, bound, observed, tuple(residuals), peak)
