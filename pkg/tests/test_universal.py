from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obp_derand.programs.obp import and_program, expectation, random_obp
from obp_derand.services.universal import (
    EstimatorAborted,
    EstimatorRegistry,
    EstimatorRun,
    NonTerminationError,
    constant_estimator,
    fc_reference_estimator,
    good_r_exists,
    promise_holds,
    promise_step,
    round_down,
    rounding_grid,
    univ_derand,
)


def test_rounding_lands_on_the_promise_grid() -> None:
    assert promise_step(2) == Fraction(1, 8)
    assert round_down(Fraction(1, 2), Fraction(0), 2) == Fraction(1, 2)
    assert round_down(Fraction(1, 3), Fraction(0), 2) == Fraction(1, 4)
    assert round_down(Fraction(1, 3), Fraction(1, 16), 2) == Fraction(3, 8)


def test_rounding_grid_spans_up_to_one_step() -> None:
    grid = rounding_grid(2)

    assert len(grid) == 8
    assert grid[0] == Fraction(1, 64)
    assert grid[-1] == promise_step(2)


def test_promise_fails_at_zero_offset_for_dyadic_probabilities() -> None:
    b = and_program(2)

    assert not promise_holds(b, 0)
    assert promise_holds(b, Fraction(1, 64))
    assert good_r_exists(b) == Fraction(1, 64)


def test_meter_aborts_over_budget() -> None:
    run = EstimatorRun(max_steps=3, max_workspace=2)
    run.tick(3)
    run.hold(2)
    run.release(1)

    with pytest.raises(EstimatorAborted) as info:
        run.tick()
    assert info.value.resource == "steps"
    assert run.counters() == {"steps": 4, "peak_workspace": 2}


def test_reference_estimator_reports_its_workspace() -> None:
    run = EstimatorRun()
    value = fc_reference_estimator(2, and_program(2), Fraction(1, 64), run)

    assert value == Fraction(1, 4)
    assert 0 < run.peak_workspace <= 2 * 2 + 1


def test_registry_refuses_duplicate_names() -> None:
    registry = EstimatorRegistry()
    registry.register("reference", fc_reference_estimator)

    with pytest.raises(ValueError):
        registry.register("reference", constant_estimator(0))
    assert registry.names() == ["reference"]


def test_dovetail_skips_a_sabotaged_estimator() -> None:
    registry = EstimatorRegistry()
    registry.register("sabotaged", constant_estimator(Fraction(1, 3)))
    registry.register("reference", fc_reference_estimator)
    b = and_program(2)

    found = univ_derand(2, b, registry)

    assert found.estimator == "reference"
    assert found.index == 1
    assert found.value == expectation(b)
    assert found.r == Fraction(1, 64)
    assert found.to_dict()["value"] == "1/4"


def test_dovetail_gives_up_after_last_phase() -> None:
    registry = EstimatorRegistry()
    registry.register("sabotaged", constant_estimator(Fraction(1, 3)))

    with pytest.raises(NonTerminationError):
        univ_derand(2, and_program(2), registry, max_phase=4)


def test_program_larger_than_n_is_rejected() -> None:
    with pytest.raises(ValueError):
        univ_derand(1, and_program(2))


@settings(max_examples=15, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=4),
    w=st.integers(min_value=1, max_value=3),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_default_registry_value_is_within_consistency_bound(n: int, w: int, seed: int) -> None:
    b = random_obp(n, w, np.random.default_rng(seed))
    found = univ_derand(max(b.n, b.width, 2), b)

    assert found.estimator == "reference"
    assert abs(found.value - expectation(b)) <= found.lc.bound
    assert found.lc.peak_held <= 2 * b.width
