"""Averaging samplers: seed-indexed query lists over {0, ..., 2^m - 1}."""

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Union

import numpy as np

from obp_derand.combinat.expanders import Expander, circulant_expander, walk_endpoints
from obp_derand.utils.config import get_ledger, require_under_cap

logger = logging.getLogger(__name__)


class SamplerError(Exception):
    """Raised for seeds outside the seed space or unreachable accuracy targets."""


@dataclass(frozen=True)
class ExhaustiveSampler:
    """Queries the whole domain; exact for every test function."""

    m: int

    seed_len = 0
    eps = 0.0
    delta = 0.0

    @property
    def t(self) -> int:
        return 1 << self.m

    @property
    def num_seeds(self) -> int:
        return 1

    def queries(self, seed: int = 0) -> np.ndarray:
        if seed != 0:
            raise SamplerError(f"Exhaustive sampler has a single seed, got {seed}")
        require_under_cap(self.t, "exhaustive sampler queries")
        return np.arange(self.t, dtype=np.int64)

    def query_matrix(self) -> np.ndarray:
        return self.queries(0)[None, :]


@dataclass(frozen=True)
class ExpanderSampler:
    """
    Seed = a start vertex; queries = endpoints of every length-L walk from it.

    A single group averages g over the walk endpoints, i.e. evaluates (A^L g)(v);
    Chebyshev over the start vertex bounds its failure rate by λ^(2L)/(4ε²).
    With ``groups > 1`` the estimate is the median of the averages over
    ``groups`` evenly spaced start vertices. Each start is uniform, so by
    Markov at least half the groups fail with probability at most twice the
    single-group bound.
    """

    m: int
    eps: float
    walk_length: int
    groups: int = 1
    expander: Union[Expander, None] = None

    @cached_property
    def graph(self) -> Expander:
        return self.expander if self.expander is not None else circulant_expander(self.m)

    @property
    def seed_len(self) -> int:
        return self.m

    @property
    def num_seeds(self) -> int:
        return 1 << self.m

    @property
    def per_group(self) -> int:
        return self.graph.degree**self.walk_length

    @property
    def t(self) -> int:
        return self.per_group * self.groups

    @classmethod
    def for_accuracy(
        cls,
        m: int,
        eps: float,
        delta: float,
        groups: int = 1,
        expander: Union[Expander, None] = None,
        max_walk_length: Union[int, None] = None,
    ) -> "ExpanderSampler":
        """
        Shortest walks whose recorded failure bound is at most ``delta``.

        Raises:
            SamplerError: bad parameters, a disconnected graph, or no walk
                length up to ``max_walk_length`` meets ``delta``.
        """
        if not 0 < eps <= 1 or not 0 < delta < 1:
            raise SamplerError(f"Need 0 < eps <= 1 and 0 < delta < 1, got eps={eps}, delta={delta}")
        graph = expander if expander is not None else circulant_expander(m)
        if graph.lam >= 1:
            raise SamplerError(f"Expander on 2^{m} vertices is not connected (lambda={graph.lam})")
        factor = 1 if groups == 1 else 2
        walk_length = 1
        while factor * graph.lam ** (2 * walk_length) / (4 * eps**2) > delta:
            walk_length += 1
            if max_walk_length is not None and walk_length > max_walk_length:
                raise SamplerError(
                    f"No walk of length <= {max_walk_length} reaches delta={delta} at m={m}, eps={eps}"
                )
        return cls(m=m, eps=eps, walk_length=walk_length, groups=groups, expander=graph)

    @property
    def chebyshev_bound(self) -> float:
        """Single-group bound λ^(2L)/(4ε²)."""
        return self.graph.lam ** (2 * self.walk_length) / (4 * self.eps**2)

    @property
    def delta(self) -> float:
        factor = 1 if self.groups == 1 else 2
        return min(1.0, factor * self.chebyshev_bound)

    def failure_rate(self, values: np.ndarray) -> Fraction:
        """Exact fraction of seeds whose estimate misses mean(values) by more than ε."""
        values = np.asarray(values, dtype=np.float64)
        table = self.query_matrix()
        per_group = values[table].reshape(self.num_seeds, self.groups, self.per_group).mean(axis=2)
        estimates = np.median(per_group, axis=1)
        misses = np.abs(estimates - values.mean()) > self.eps
        return Fraction(int(misses.sum()), self.num_seeds)

    def _starts(self, seeds: np.ndarray) -> np.ndarray:
        spacing = max(self.num_seeds // self.groups, 1)
        offsets = np.arange(self.groups, dtype=np.int64) * spacing
        return (seeds[:, None] + offsets[None, :]) % self.num_seeds

    def queries(self, seed: int) -> np.ndarray:
        if not 0 <= seed < self.num_seeds:
            raise SamplerError(f"Seed {seed} outside 0..{self.num_seeds - 1}")
        return self.query_matrix(np.array([seed], dtype=np.int64))[0]

    def query_matrix(self, seeds: Union[np.ndarray, None] = None) -> np.ndarray:
        """Queries for every seed (row per seed), groups laid out consecutively."""
        if seeds is None:
            require_under_cap(self.num_seeds * self.t, "expander sampler query table")
            seeds = np.arange(self.num_seeds, dtype=np.int64)
        starts = self._starts(np.asarray(seeds, dtype=np.int64))
        blocks = [walk_endpoints(self.graph, starts[:, g], self.walk_length) for g in range(self.groups)]
        return np.concatenate(blocks, axis=1)

    def estimate(self, values: np.ndarray, seed: int) -> float:
        """Median-of-averages estimate of ``mean(values)`` from one seed's queries."""
        q = self.queries(seed).reshape(self.groups, self.per_group)
        return float(np.median(np.asarray(values, dtype=np.float64)[q].mean(axis=1)))


Sampler = Union[ExhaustiveSampler, ExpanderSampler]


def default_sampler(m: int, eps: float) -> Sampler:
    """
    Sampler for one reconstruction candidate, within the ledger query cap.

    Tiny domains are queried exhaustively. Otherwise walks are derived from
    the ledger failure bound; when that needs more queries than the cap, the
    longest affordable walk is used and its (possibly vacuous) bound recorded.
    """
    ledger = get_ledger()
    cap = ledger.sampler_max_queries
    if (1 << m) <= cap:
        return ExhaustiveSampler(m)
    graph = circulant_expander(m)
    longest = 1
    while graph.degree ** (longest + 1) * ledger.sampler_groups <= cap:
        longest += 1
    try:
        return ExpanderSampler.for_accuracy(
            m, eps, ledger.sampler_delta, groups=ledger.sampler_groups, expander=graph, max_walk_length=longest
        )
    except SamplerError:
        sampler = ExpanderSampler(m=m, eps=eps, walk_length=longest, groups=ledger.sampler_groups, expander=graph)
        logger.warning(
            "Sampler on %d bits capped at %d queries; failure bound %.3f", m, sampler.t, sampler.delta
        )
        return sampler


def sample(s: Sampler, seed: int) -> np.ndarray:
    return s.queries(seed)


def exact_mean(values: np.ndarray, queries: np.ndarray) -> Fraction:
    """Exact empirical mean of 0/1 ``values`` over a query list."""
    return Fraction(int(np.asarray(values, dtype=np.int64)[queries].sum()), len(queries))
