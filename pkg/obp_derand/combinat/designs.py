"""Combinatorial designs: equal-size subsets of [s] with bounded pairwise intersections."""

import logging
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Any, Dict, List, Sequence, Tuple

from obp_derand.utils.config import CapacityError, get_settings

logger = logging.getLogger(__name__)


class DesignError(Exception):
    """Raised for designs that violate the size or intersection invariants."""


class DesignCapacityError(CapacityError):
    """Raised when the greedy search cannot produce the requested number of sets."""

    def __init__(self, requested: int, achieved: int, s: int, alpha: Fraction):
        self.requested = requested
        self.achieved = achieved
        super().__init__(
            f"Design with s={s}, alpha={alpha} reached only {achieved} of {requested} sets"
        )


@dataclass(frozen=True)
class Design:
    s: int
    alpha: Fraction
    sets: Tuple[Tuple[int, ...], ...]

    def __post_init__(self) -> None:
        size = self.set_size
        bound = self.intersection_bound
        masks = []
        for i, members in enumerate(self.sets):
            if len(members) != size or len(set(members)) != size:
                raise DesignError(f"Set {i} has {len(set(members))} members, expected {size}")
            if list(members) != sorted(members) or not all(0 <= j < self.s for j in members):
                raise DesignError(f"Set {i} is not a sorted subset of [{self.s}]: {members}")
            masks.append(_mask(members))
        for i, j in combinations(range(len(masks)), 2):
            if bin(masks[i] & masks[j]).count("1") > bound:
                raise DesignError(f"Sets {i} and {j} intersect in more than {bound} indices")

    @property
    def set_size(self) -> int:
        size = self.alpha * self.s
        if size.denominator != 1:
            raise DesignError(f"alpha*s = {size} is not an integer")
        return int(size)

    @property
    def intersection_bound(self) -> Fraction:
        return 2 * self.alpha**2 * self.s

    @property
    def n(self) -> int:
        return len(self.sets)

    def intersection(self, i: int, j: int) -> List[int]:
        """Sorted common indices of S_i and S_j."""
        other = set(self.sets[j])
        return [x for x in self.sets[i] if x in other]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "s": self.s,
            "alpha": f"{self.alpha.numerator}/{self.alpha.denominator}",
            "sets": [list(members) for members in self.sets],
        }


def _mask(members: Sequence[int]) -> int:
    out = 0
    for j in members:
        out |= 1 << j
    return out


def make_design(s: int, alpha: Any, sets: Sequence[Sequence[int]]) -> Design:
    return Design(s=s, alpha=Fraction(alpha), sets=tuple(tuple(sorted(x)) for x in sets))


def build_design(s: int, alpha: Any, n_sets: int) -> Design:
    """
    Greedy lexicographic design: scan α·s-subsets in lexicographic order and keep
    every subset compatible with all previously kept ones.
    """
    alpha = Fraction(alpha)
    size = alpha * s
    if size.denominator != 1 or not 0 < size <= s:
        raise DesignError(f"alpha*s = {size} must be an integer in 1..{s}")
    bound = 2 * alpha**2 * s
    cap = get_settings().enum_cap
    kept: List[Tuple[int, ...]] = []
    masks: List[int] = []
    for scanned, candidate in enumerate(combinations(range(s), int(size))):
        if len(kept) == n_sets:
            break
        if scanned >= cap:
            raise CapacityError(f"Design search scanned {scanned} subsets, above the cap of {cap}")
        mask = _mask(candidate)
        if all(bin(mask & other).count("1") <= bound for other in masks):
            kept.append(candidate)
            masks.append(mask)
    if len(kept) < n_sets:
        raise DesignCapacityError(n_sets, len(kept), s, alpha)
    logger.debug("Built design s=%d alpha=%s with %d sets", s, alpha, n_sets)
    return Design(s=s, alpha=alpha, sets=tuple(kept))
