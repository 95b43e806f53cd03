from fractions import Fraction

import numpy as np
import pytest

from obp_derand.generators.prg import EnumerationGen, ZerosGen
from obp_derand.programs.obp import StateRef, and_program, expectation
from obp_derand.services.bbtest import (
    BbAccept,
    BbEstimates,
    BbReject,
    BbTestError,
    BlockSource,
    ExhaustiveBlockSource,
    HittingSet,
    HsgBlockSource,
    OracleObp,
    SamplerFailure,
    SeedClassIndex,
    bb_lc_test,
    bb_lc_test_raw,
    bb_sampler,
    class_spread,
    distinguishing_suffix,
    indistinguishable,
    sample_count,
    true_class_estimates,
    true_seed_estimates,
    unverified_reach_probability,
    unverified_states,
)

EPS = Fraction(1, 60)


def _and3() -> tuple:
    b = and_program(3)
    return b, OracleObp.from_obp(b), HittingSet.from_prg(EnumerationGen(3), EPS)


class OnesSource(BlockSource):
    """One candidate that samples only the all-ones suffix."""

    t = 1

    @property
    def num_candidates(self) -> int:
        return 1

    def samples(self, z: int, j: int, i: int) -> np.ndarray:
        return np.ones((1, 3 - i), dtype=np.uint8)


def test_oracle_counts_every_query() -> None:
    _, oracle, _ = _and3()

    assert oracle([1, 1, 1]) == 1
    assert oracle.query_batch(np.zeros((4, 3), dtype=np.uint8)).tolist() == [0, 0, 0, 0]
    assert oracle.queries == 5
    with pytest.raises(BbTestError):
        oracle.query_batch(np.zeros((1, 2), dtype=np.uint8))


def test_distinguishing_suffix_is_the_first_separating_seed() -> None:
    _, oracle, h = _and3()

    # prefix 0 always rejects; prefix 1 accepts after the suffixes of seeds 6 and 7
    assert distinguishing_suffix(oracle, h, 0, 4, 1) == 6
    assert indistinguishable(oracle, h, 0, 3, 1)
    assert distinguishing_suffix(oracle, h, 5, 5, 2) is None


def test_seed_classes_follow_reachable_states() -> None:
    _, oracle, h = _and3()
    index = SeedClassIndex(oracle, h)

    assert index.class_counts() == [1, 2, 2, 2]
    assert index.layer(1).members == ((0, 1, 2, 3), (4, 5, 6, 7))
    assert index.layer(2).representatives == (0, 6)
    assert index.class_of_prefix((1, 1)) == 1


def test_exact_class_estimates_are_accepted() -> None:
    b, oracle, h = _and3()
    index = SeedClassIndex(oracle, h)
    est = true_class_estimates(b, index)

    assert est.values == ((Fraction(1, 8),), (0, Fraction(1, 4)), (0, Fraction(1, 2)))
    verdict = bb_lc_test(oracle, h, est, EPS, index=index)
    assert isinstance(verdict, BbAccept)
    assert verdict.value == expectation(b)
    assert verdict.bound == 6 * EPS * 3


def test_inconsistent_root_estimate_fails_child_averaging() -> None:
    _, oracle, h = _and3()
    est = BbEstimates.from_layers([[Fraction(1, 2)], [0, Fraction(1, 4)], [0, Fraction(1, 2)]])
    verdict = bb_lc_test(oracle, h, est, EPS)

    assert isinstance(verdict, BbReject)
    assert (verdict.test, verdict.layer) == ("t1", 0)
    assert verdict.observed == Fraction(3, 8)


def test_class_test_checks_estimate_shape() -> None:
    _, oracle, h = _and3()

    with pytest.raises(BbTestError):
        bb_lc_test(oracle, h, BbEstimates.from_layers([[Fraction(1, 8)], [0]]), EPS)
    with pytest.raises(BbTestError):
        bb_lc_test(oracle, h, BbEstimates.from_layers([[0]], per_seed=True), EPS)


def test_per_seed_test_accepts_exact_values_and_rejects_split_class() -> None:
    b, oracle, h = _and3()
    est = true_seed_estimates(b, h)

    assert isinstance(bb_lc_test_raw(oracle, h, est, EPS), BbAccept)

    layers = [list(layer) for layer in est.values]
    layers[1][0] = Fraction(1, 2)
    verdict = bb_lc_test_raw(oracle, h, BbEstimates.from_layers(layers, per_seed=True), EPS)
    assert isinstance(verdict, BbReject)


def test_sampler_with_exhaustive_blocks_is_exact() -> None:
    b, oracle, h = _and3()
    found = bb_sampler(oracle, h, ExhaustiveBlockSource(3), Fraction(1, 10))

    assert found.value == expectation(b)
    assert found.z_found == 0
    assert found.query_count == oracle.queries
    assert found.class_counts == (1, 2, 2, 2)
    assert found.to_dict()["estimate"] == "1/8"


def test_sampler_reports_failure_when_every_candidate_is_rejected() -> None:
    _, oracle, h = _and3()

    with pytest.raises(SamplerFailure) as info:
        bb_sampler(oracle, h, OnesSource(), Fraction(1, 10))

    assert info.value.candidates_tried == 1
    assert info.value.last_reject.test == "t1"


def test_hsg_block_source_needs_enough_bits() -> None:
    h2 = HittingSet.from_prg(EnumerationGen(4), EPS)

    with pytest.raises(BbTestError):
        HsgBlockSource(h2, n=3, w=2, t=1)


def test_sample_count_grows_with_precision() -> None:
    assert sample_count(3, 2, Fraction(1, 2), constant=1) == 13
    assert sample_count(3, 2, Fraction(1, 4), constant=1) > sample_count(3, 2, Fraction(1, 2), constant=1)


def test_diagnostics_on_full_and_degenerate_hitting_sets() -> None:
    b, oracle, h = _and3()

    assert unverified_states(b, h) == set()
    assert class_spread(b, SeedClassIndex(oracle, h)) == 0

    zeros = HittingSet.from_prg(ZerosGen(3), EPS)
    assert StateRef(0, 0) in unverified_states(b, zeros)
    assert unverified_reach_probability(b, zeros) == 1
