from fractions import Fraction
from typing import List

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obp_derand.programs.obp import StateRef, and_program, exact_probs, expectation, random_obp
from obp_derand.services.lctest import (
    LcAccept,
    LcReject,
    LcTestError,
    ReachEstimates,
    default_tolerance,
    layer_residual,
    lc_test,
)


def test_exact_probabilities_are_accepted_with_zero_residuals() -> None:
    b = and_program(3)
    exact = exact_probs(b)
    verdict = lc_test(b, ReachEstimates.from_layers(exact.values))

    assert isinstance(verdict, LcAccept)
    assert verdict.value == expectation(b) == Fraction(1, 8)
    assert verdict.observed_bound == 0
    assert verdict.residuals == (0, 0, 0)
    assert verdict.bound == Fraction(1, 27) * (1 + 2 * 3 * 2)


def test_callback_source_is_queried_once_per_state() -> None:
    b = and_program(4)
    exact = exact_probs(b)
    asked: List[StateRef] = []

    def source(v: StateRef) -> Fraction:
        asked.append(v)
        return exact.at(v)

    verdict = lc_test(b, source)

    assert isinstance(verdict, LcAccept)
    assert len(asked) == len(set(asked)) == len(b.all_states())
    assert verdict.peak_held <= 2 * b.width


def test_wrong_start_estimate_is_rejected() -> None:
    b = and_program(2)
    verdict = lc_test(b, ReachEstimates.from_layers([[Fraction(1, 2)], [Fraction(1, 2)] * 2, [0, 1]]))

    assert isinstance(verdict, LcReject)
    assert (verdict.layer, verdict.reason) == (0, "start")


def test_flow_violation_names_its_layer() -> None:
    b = and_program(2)
    layers = [[1], [Fraction(1, 2), Fraction(1, 2)], [Fraction(1, 2), Fraction(1, 2)]]
    verdict = lc_test(b, ReachEstimates.from_layers(layers), Fraction(1, 100))

    assert isinstance(verdict, LcReject)
    assert verdict.layer == 2
    assert verdict.reason == "flow"
    assert verdict.observed == Fraction(1, 2)
    assert verdict.to_dict()["threshold"] == "1/25"


def test_layer_residual_measures_l1_flow_gap() -> None:
    b = and_program(2)

    assert layer_residual(b, 1, [Fraction(1, 2), Fraction(1, 2)], [Fraction(1, 4), Fraction(3, 4)]) == 0
    assert layer_residual(b, 1, [1, 0], [0, 1]) == 1


def test_estimates_must_cover_every_state() -> None:
    with pytest.raises(LcTestError):
        lc_test(and_program(2), ReachEstimates.from_layers([[1], [0, 1]]))


def test_estimates_outside_unit_interval_are_invalid() -> None:
    with pytest.raises(LcTestError):
        ReachEstimates.from_layers([[Fraction(3, 2)]])


def test_default_tolerance_is_inverse_cube() -> None:
    assert default_tolerance(4) == Fraction(1, 64)
    assert default_tolerance(0) == 1


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=8),
    w=st.integers(min_value=1, max_value=4),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    binary=st.booleans(),
)
def test_accepted_value_is_within_observed_bound(n: int, w: int, seed: int, binary: bool) -> None:
    rng = np.random.default_rng(seed)
    b = random_obp(n, w, rng, binary=binary)
    tol = default_tolerance(n)
    noisy = [
        [min(max(p + int(rng.integers(-1, 2)) * tol, Fraction(0)), Fraction(1)) for p in layer]
        for layer in exact_probs(b).values
    ]
    verdict = lc_test(b, ReachEstimates.from_layers(noisy))

    assert isinstance(verdict, LcAccept)
    assert abs(verdict.value - expectation(b)) <= verdict.observed_bound <= verdict.bound
