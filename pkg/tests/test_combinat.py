from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest

from obp_derand.combinat.designs import DesignCapacityError, DesignError, build_design, make_design
from obp_derand.combinat.expanders import (
    ExpanderError,
    circulant_expander,
    expander_walk,
    measure_lambda,
    walk_endpoints,
)
from obp_derand.combinat.samplers import (
    ExhaustiveSampler,
    ExpanderSampler,
    SamplerError,
    default_sampler,
    exact_mean,
)
from obp_derand.combinat.small_bias import (
    BiasGen,
    BiasGenError,
    conjunction_error,
    max_conjunction_error,
    max_parity_bias,
)
from obp_derand.utils.config import CapacityError, configure


def test_greedy_design_respects_size_and_intersections() -> None:
    design = build_design(9, Fraction(1, 3), 6)

    assert design.n == 6
    assert design.sets[0] == (0, 1, 2)
    assert design.intersection_bound == 2
    for i, j in combinations(range(design.n), 2):
        assert len(design.intersection(i, j)) <= 2


def test_design_sets_are_lexicographically_first_compatible() -> None:
    design = build_design(4, Fraction(1, 2), 3)

    # bound 2 * (1/2)^2 * 4 = 2, so every 2-subset is compatible
    assert design.sets == ((0, 1), (0, 2), (0, 3))


def test_design_runs_out_of_sets() -> None:
    with pytest.raises(DesignCapacityError) as info:
        build_design(4, Fraction(1, 2), 7)

    assert info.value.achieved == 6
    assert isinstance(info.value, CapacityError)


def test_design_needs_integral_set_size() -> None:
    with pytest.raises(DesignError):
        build_design(5, Fraction(1, 2), 2)


def test_design_with_large_overlap_is_rejected() -> None:
    with pytest.raises(DesignError):
        make_design(9, Fraction(1, 3), [(0, 1, 2), (0, 1, 2)])


def test_design_search_stops_at_enumeration_cap() -> None:
    configure(enum_cap=3)

    with pytest.raises(CapacityError):
        build_design(8, Fraction(1, 4), 8)


def test_circulant_expander_lambda_matches_power_iteration() -> None:
    e = circulant_expander(6)

    assert e.degree == 4
    assert 0 < e.lam < 1
    assert measure_lambda(e, iterations=400) == pytest.approx(e.lam, abs=0.05)


def test_neighbor_digits_move_forward_and_back() -> None:
    e = circulant_expander(4)
    b = e.shifts[1]

    assert e.neighbor(3, 0) == 4
    assert e.neighbor(0, 1) == 15
    assert e.neighbor(5, 2) == (5 + b) % 16
    with pytest.raises(ExpanderError):
        e.neighbor(16, 0)


def test_expander_walk_ignores_last_digit() -> None:
    e = circulant_expander(4)

    assert expander_walk(e, 2, [0, 0, 3]) == [2, 3, 4]
    assert expander_walk(e, 2, []) == []


def test_walk_endpoints_enumerate_every_digit_string() -> None:
    e = circulant_expander(3)
    ends = walk_endpoints(e, np.array([0, 5]), 2)

    assert ends.shape == (2, 16)
    assert ends[0, 0] == 2
    assert ends[1, 1] == 5


def test_exhaustive_sampler_has_exact_mean() -> None:
    s = ExhaustiveSampler(3)
    values = np.array([1, 0, 1, 1, 0, 0, 0, 1])

    assert s.num_seeds == 1
    assert exact_mean(values, s.queries(0)) == Fraction(1, 2)
    with pytest.raises(SamplerError):
        s.queries(1)


def test_default_sampler_falls_back_to_exhaustive_on_tiny_domains() -> None:
    assert isinstance(default_sampler(3, 0.1), ExhaustiveSampler)
    assert isinstance(default_sampler(8, 0.1), ExpanderSampler)


def test_expander_sampler_query_table_shape() -> None:
    s = ExpanderSampler(m=6, eps=0.25, walk_length=2, groups=2)

    table = s.query_matrix()
    assert table.shape == (64, 32)
    assert list(table[5]) == list(s.queries(5))


def test_expander_sampler_walks_are_derived_from_the_failure_bound() -> None:
    s = ExpanderSampler.for_accuracy(4, 0.1, 0.96)

    assert s.delta < 1
    assert s.delta <= 0.96
    assert s.graph.lam ** (2 * (s.walk_length - 1)) / (4 * 0.1**2) > 0.96


def test_expander_sampler_failure_rate_over_all_seeds_is_below_delta(rng: np.random.Generator) -> None:
    s = ExpanderSampler.for_accuracy(4, 0.1, 0.96)

    for _ in range(20):
        g = rng.integers(0, 2, size=16)
        assert s.failure_rate(g) <= s.delta


def test_expander_sampler_is_exact_on_constant_functions() -> None:
    s = ExpanderSampler.for_accuracy(4, 0.1, 0.96)

    assert s.failure_rate(np.ones(16, dtype=np.int64)) == 0
    assert s.estimate(np.ones(16, dtype=np.int64), 7) == 1.0


def test_median_of_groups_doubles_the_recorded_bound() -> None:
    single = ExpanderSampler.for_accuracy(5, 0.25, 0.5)
    grouped = ExpanderSampler.for_accuracy(5, 0.25, 0.5, groups=3)

    assert grouped.delta == min(1.0, 2 * grouped.chebyshev_bound)
    assert grouped.delta <= 0.5
    assert grouped.walk_length >= single.walk_length


def test_unreachable_sampler_accuracy_is_reported() -> None:
    with pytest.raises(SamplerError):
        ExpanderSampler.for_accuracy(4, 0.1, 0.5, max_walk_length=3)
    with pytest.raises(SamplerError):
        ExpanderSampler.for_accuracy(4, 0.1, 1.0)


def test_default_sampler_respects_the_query_cap() -> None:
    s = default_sampler(15, 0.25)

    assert isinstance(s, ExpanderSampler)
    assert s.t <= 64


def test_small_bias_generator_meets_recorded_bias() -> None:
    for k in range(2, 7):
        gen = BiasGen.for_bias(k, Fraction(1, 4))
        assert max_parity_bias(gen.output_matrix) <= gen.eps


def test_small_bias_first_output_bit_is_low_bit_of_y() -> None:
    gen = BiasGen(k=3, h=2)
    x, y = 2, 3

    assert gen.expand((x << 2) | y)[0] == 1
    assert list(gen.output_matrix[(x << 2) | y]) == list(gen.expand((x << 2) | y))


def test_small_bias_parameters_are_validated() -> None:
    with pytest.raises(BiasGenError):
        BiasGen(k=0, h=2)
    with pytest.raises(BiasGenError):
        BiasGen.for_bias(4, 0)


def test_conjunction_error_of_uniform_outputs_is_zero() -> None:
    outputs = np.array([[a, b] for a in (0, 1) for b in (0, 1)], dtype=np.uint8)

    assert conjunction_error(outputs, [1, 2], [1, 0]) == 0
    assert max_conjunction_error(outputs, 2) == 0


def test_small_bias_conjunctions_stay_close_to_uniform() -> None:
    gen = BiasGen.for_bias(4, Fraction(1, 4))

    assert max_conjunction_error(gen.output_matrix, 2) <= 2 * gen.eps
