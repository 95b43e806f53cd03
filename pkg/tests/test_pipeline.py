import dataclasses
from fractions import Fraction

import numpy as np
import pytest

from evals.utils.corpus import easy_functions
from obp_derand import pipeline
from obp_derand.evaluators.evaluator import truth_table_of
from obp_derand.generators.assembly import assemble_iw_generator, repeated_design
from obp_derand.generators.prg import EnumerationGen, HardFunction
from obp_derand.programs.obp import (
    Obp,
    and_program,
    bit_program,
    expectation,
    make_obp,
    parity_program,
    random_obp,
)


def equality_program(n: int, i: int, j: int) -> Obp:
    """Accept iff x[i] == x[j], i < j; the other bits are ignored."""
    widths = [1] * (i + 1) + [2] * (n - i)
    edges = []
    for layer in range(n):
        if layer < i:
            edges.append([(0, 0)])
        elif layer == i:
            edges.append([(0, 1)])
        elif layer == j:
            edges.append([(0, 1), (1, 0)])
        else:
            edges.append([(0, 0), (1, 1)])
    return make_obp(widths, edges, [1, 0])


def assert_estimate_or_verified_refuter(b: Obp, f: HardFunction, outcome: pipeline.PipelineResult) -> None:
    if isinstance(outcome, pipeline.Estimate):
        assert abs(outcome.value - expectation(b)) <= Fraction(1, 4)
    else:
        assert isinstance(outcome, pipeline.Refuter)
        assert outcome.verified
        assert truth_table_of(outcome.evaluator).equals(f.table)


def test_padded_length_uses_ledger_exponent() -> None:
    assert pipeline.padded_length(and_program(3)) == 3
    assert pipeline.padded_length(and_program(3), exponent=2) == 9


def test_equality_program_accepts_half_of_its_inputs() -> None:
    assert expectation(equality_program(3, 1, 2)) == Fraction(1, 2)
    assert expectation(equality_program(2, 0, 1)) == Fraction(1, 2)


@pytest.mark.parametrize("program", ["and2", "bit3", "random3"])
def test_default_generator_answers_for_easy_functions(program: str, rng: np.random.Generator) -> None:
    b = {
        "and2": and_program(2),
        "bit3": bit_program(3, 0),
        "random3": random_obp(3, 3, rng),
    }[program]

    for _, f in easy_functions(4, rng):
        outcome = pipeline.certified_estimate_or_refuter(b, f)
        assert_estimate_or_verified_refuter(b, f, outcome)


@pytest.mark.parametrize("bits", [[1] * 16, [0, 1] * 8, [0] * 15 + [1]])
def test_non_zero_functions_get_an_estimate_within_the_bound(bits) -> None:
    f = HardFunction.from_bits(bits)
    b = bit_program(3, 0)

    outcome = pipeline.certified_estimate_or_refuter(b, f)

    assert isinstance(outcome, pipeline.Estimate)
    assert abs(outcome.value - expectation(b)) <= Fraction(1, 4)
    assert outcome.to_dict()["assembly"]["profile"] == ["xor", "gl", "nw"]


def test_zero_function_is_refuted_when_outputs_share_a_seed_index() -> None:
    f = HardFunction.from_bits([0] * 16, "zero")
    # 16-bit last stage on 17 seed bits: output bits 1 and 2 read the same last index
    b = equality_program(3, 1, 2)

    outcome = pipeline.certified_estimate_or_refuter(b, f, nw_seed_len=17)

    assert isinstance(outcome, pipeline.Refuter)
    assert outcome.verified
    assert truth_table_of(outcome.evaluator).equals(f.table)
    assert outcome.hardness_bound == 4.0
    doc = outcome.to_dict()
    assert doc["kind"] == "refuter"
    assert doc["message"] == pipeline.REFUTER_MESSAGE
    assert [stage["stage"] for stage in doc["stages"]] == ["nw", "gl", "xor"]


def test_repeated_design_sets_refute_random_functions(rng: np.random.Generator) -> None:
    b = equality_program(2, 0, 1)
    for _ in range(3):
        f = HardFunction.random(4, rng)
        m_last = assemble_iw_generator(f, Fraction(1, 2), 1).tables["gl"].input_len
        twins = repeated_design(m_last, 2)

        outcome = pipeline.certified_estimate_or_refuter(b, f, design=twins)

        assert isinstance(outcome, pipeline.Refuter)
        assert_estimate_or_verified_refuter(b, f, outcome)


def test_fooling_generator_yields_certified_estimate(monkeypatch: pytest.MonkeyPatch) -> None:
    real = pipeline.assemble_iw_generator

    def with_uniform_outputs(f, eps, n, profile, **kwargs):
        return dataclasses.replace(real(f, eps, n, profile, **kwargs), prg=EnumerationGen(n))

    monkeypatch.setattr(pipeline, "assemble_iw_generator", with_uniform_outputs)
    b = parity_program(3)

    outcome = pipeline.certified_estimate_or_refuter(b, HardFunction.from_bits([0, 1] * 8))

    assert isinstance(outcome, pipeline.Estimate)
    assert outcome.value == expectation(b)
    assert outcome.certificate.error_bound == Fraction(1, 4)
    assert outcome.to_dict()["assembly"]["profile"] == ["xor", "gl", "nw"]
