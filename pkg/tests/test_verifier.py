from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obp_derand.generators.prg import EnumerationGen, ExplicitGen, ZerosGen, expectation_under
from obp_derand.programs.obp import StateRef, and_program, expectation, parity_program, random_obp, truth_table
from obp_derand.services import verifier


def test_uniform_generator_is_certified_with_exact_estimate() -> None:
    b = and_program(4)
    verdict = verifier.test_fools(b, EnumerationGen(4), Fraction(1, 10))

    assert isinstance(verdict, verifier.Certified)
    assert verdict.estimate == expectation(b)
    assert verdict.layer_sums == (0, 0, 0, 0)
    assert verdict.error_bound == Fraction(4, 10)


def test_zeros_generator_yields_predictor_at_first_layer() -> None:
    verdict = verifier.test_fools(parity_program(3), ZerosGen(3), Fraction(1, 4))

    assert isinstance(verdict, verifier.Predictor)
    assert verdict.layer == 0
    assert verdict.advantage == Fraction(1, 2)
    assert verdict.biases.values == (-1,)


def test_predictor_guesses_parity_completing_bit() -> None:
    rows = np.array([[a, b, a ^ b] for a in (0, 1) for b in (0, 1)], dtype=np.uint8)
    g = ExplicitGen(rows)
    verdict = verifier.test_fools(parity_program(3), g, Fraction(1, 4))

    assert isinstance(verdict, verifier.Predictor)
    assert verdict.layer == 2
    assert verdict.biases.values == (Fraction(-1, 2), Fraction(1, 2))
    assert truth_table(verdict.program) == [0, 1, 1, 0]
    assert verifier.predictor_success(g, verdict.program) == 1


def test_bias_table_and_next_bit_bias_agree() -> None:
    rows = np.array([[0, 1, 1], [1, 1, 0], [1, 0, 0], [1, 1, 1]], dtype=np.uint8)
    g = ExplicitGen(rows)
    b = and_program(3)
    table = verifier.bias_table(b, g, 1)

    assert table.values == (Fraction(1, 4), Fraction(1, 4))
    assert table.total() == Fraction(1, 2)
    assert verifier.next_bit_bias(b, g, StateRef(1, 0)) == Fraction(1, 4)


def test_final_layer_has_no_next_bit() -> None:
    with pytest.raises(verifier.VerifierError):
        verifier.next_bit_bias(and_program(2), EnumerationGen(2), StateRef(2, 0))


def test_length_mismatch_is_rejected() -> None:
    with pytest.raises(verifier.VerifierError):
        verifier.test_fools(and_program(3), EnumerationGen(4), Fraction(1, 4))


def test_verdicts_serialize_rationals_as_strings() -> None:
    doc = verifier.test_fools(parity_program(3), ZerosGen(3), Fraction(1, 4)).to_dict()

    assert doc["kind"] == "predictor"
    assert doc["advantage"] == "1/2"
    assert doc["success"] == "1/1"


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=6),
    w=st.integers(min_value=1, max_value=4),
    seeds=st.integers(min_value=1, max_value=12),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    binary=st.booleans(),
)
def test_certificate_bound_and_predictor_advantage_hold(
    n: int, w: int, seeds: int, seed: int, binary: bool
) -> None:
    rng = np.random.default_rng(seed)
    b = random_obp(n, w, rng, binary=binary)
    g = ExplicitGen(rng.integers(0, 2, size=(seeds, n)))
    eps = Fraction(1, 5)
    verdict = verifier.test_fools(b, g, eps)

    if isinstance(verdict, verifier.Certified):
        assert abs(expectation_under(g, b) - expectation(b)) <= eps * n
    else:
        assert verifier.predictor_success(g, verdict.program) - Fraction(1, 2) > eps / 2
