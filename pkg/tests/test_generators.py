from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from obp_derand.combinat.designs import build_design
from obp_derand.combinat.small_bias import BiasGen
from obp_derand.evaluators.evaluator import TruthTable
from obp_derand.generators.assembly import (
    DESK_MAX_BITS,
    DESK_PROFILE,
    FULL_PROFILE,
    assemble_iw_generator,
    default_nw_seed_len,
    gl_table,
    rm_encode,
    rm_params,
    with_unit_bit,
    xor_generator,
    xor_params,
)
from obp_derand.generators.nw import NwGen
from obp_derand.generators.predictors import (
    bayes_advantage,
    bayes_next_bit_predictor,
    best_next_bit_predictor,
    distinguisher_program,
)
from obp_derand.generators.prg import (
    EnumerationGen,
    ExplicitGen,
    GeneratorError,
    HardFunction,
    SmallBiasPrg,
    ZerosGen,
    expectation_under,
)
from obp_derand.programs.obp import and_program, evaluate, expectation, parity_program
from obp_derand.utils.bits import all_inputs, bits_to_index
from obp_derand.utils.config import CapacityError, configure


def test_enumeration_generator_gives_exact_expectation() -> None:
    b = and_program(3)

    assert expectation_under(EnumerationGen(3), b) == expectation(b)
    assert expectation_under(ZerosGen(3), b) == 0


def test_expectation_under_checks_output_length() -> None:
    with pytest.raises(GeneratorError):
        expectation_under(EnumerationGen(2), and_program(3))


def test_output_matrix_respects_enumeration_cap() -> None:
    configure(enum_cap=8)

    with pytest.raises(CapacityError):
        EnumerationGen(4).output_matrix


def test_explicit_generator_reads_file(tmp_path: Path) -> None:
    path = tmp_path / "hsg.txt"
    path.write_text("# outputs\n011\n\n110\n111\n", encoding="utf-8")
    g = ExplicitGen.from_file(path)

    assert g.num_seeds == 3
    assert g.output(1) == (1, 1, 0)
    assert expectation_under(g, parity_program(3)) == Fraction(1, 3)


def test_explicit_generator_rejects_ragged_rows(tmp_path: Path) -> None:
    path = tmp_path / "bad.txt"
    path.write_text("01\n011\n", encoding="utf-8")

    with pytest.raises(GeneratorError):
        ExplicitGen.from_file(path)


def test_small_bias_prg_fools_parity_up_to_its_bias() -> None:
    g = SmallBiasPrg(BiasGen.for_bias(5, Fraction(1, 8)))

    assert abs(expectation_under(g, parity_program(5)) - Fraction(1, 2)) <= g.gen.eps


def test_hard_function_from_text_accepts_json_and_checks_m() -> None:
    f = HardFunction.from_text('{"m": 2, "table": "0110"}')

    assert f.m == 2
    assert f.at([1, 0]) == 1
    with pytest.raises(GeneratorError):
        HardFunction.from_text('{"m": 3, "table": "0110"}')
    with pytest.raises(GeneratorError):
        HardFunction.from_text("01x0")


def test_nw_output_bits_apply_f_to_design_sets() -> None:
    design = build_design(4, Fraction(1, 2), 3)
    g = NwGen(design, TruthTable.from_bits([0, 1, 1, 0]))
    x = (1, 0, 1, 1)

    assert design.sets == ((0, 1), (0, 2), (0, 3))
    assert g.expand(x) == (1, 0, 0)
    assert g.output(bits_to_index(x)) == (1, 0, 0)


def test_nw_rejects_mismatched_function() -> None:
    design = build_design(4, Fraction(1, 2), 3)

    with pytest.raises(GeneratorError):
        NwGen(design, TruthTable.from_bits([0, 1, 1, 0, 1, 0, 0, 1]))


def test_reed_muller_extension_agrees_with_f_on_embedded_points() -> None:
    f = HardFunction.random(4, np.random.default_rng(7))
    params = rm_params(4)
    encoded, p = rm_encode(f.table, params)

    assert encoded.input_len == params.m_1 == 12
    for x in all_inputs(4):
        assert p[params.embed(x)] == f.at(x)


def test_inner_product_stage_masks_output_with_r() -> None:
    f = TruthTable.from_bits([0, 1, 1, 1])
    g = gl_table(f)

    assert g.input_len == 3
    assert list(g.column(0)) == [0, 0, 0, 1, 0, 1, 0, 1]


def test_inner_product_with_unit_bit_is_balanced_for_every_input() -> None:
    zero = TruthTable.from_bits([0, 0])
    g = gl_table(with_unit_bit(zero))

    assert g.input_len == 3
    assert list(g.column(0)) == [0, 1, 0, 1, 0, 1, 0, 1]


def test_direct_product_design_shares_a_core_of_m_minus_one() -> None:
    params = xor_params(4, Fraction(1, 2))

    assert (params.s, params.m_2, params.gamma) == (5, 13, Fraction(3, 4))
    assert xor_generator(params).design.sets == ((0, 1, 2, 3), (0, 1, 2, 4))
    with pytest.raises(GeneratorError):
        xor_params(0, Fraction(1, 2))


def test_default_nw_seed_gives_each_output_a_private_index() -> None:
    design = build_design(default_nw_seed_len(16, 3), Fraction(16, 18), 3)

    assert [members[-1] for members in design.sets] == [15, 16, 17]


def test_desk_assembly_keeps_every_stage_table() -> None:
    f = HardFunction.random(4, np.random.default_rng(3))
    assembly = assemble_iw_generator(f, Fraction(1, 2), 3)

    assert assembly.profile == DESK_PROFILE
    assert set(assembly.tables) == {"f", "xor", "gl"}
    assert assembly.table_before("gl") is assembly.tables["xor"]
    assert assembly.tables["xor"].input_len == 13
    assert assembly.tables["gl"].input_len == 16
    assert assembly.prg.seed_len == 18
    assert assembly.prg.output_len == 3
    assert assembly.stage("nw").input_len == 18


@pytest.mark.parametrize("bits", [[0] * 16, [1] * 16, [0, 1, 1, 0] * 4])
def test_default_desk_generator_output_is_exactly_uniform(bits) -> None:
    assembly = assemble_iw_generator(HardFunction.from_bits(bits), Fraction(1, 2), 3)

    outputs = assembly.prg.output_matrix
    _, counts = np.unique(outputs, axis=0, return_counts=True)
    assert len(counts) == 8
    assert len(set(counts.tolist())) == 1


def test_desk_profile_rejects_functions_it_cannot_recover_exactly() -> None:
    f = HardFunction.from_bits([0] * 2 ** (DESK_MAX_BITS + 1))

    with pytest.raises(GeneratorError):
        assemble_iw_generator(f, Fraction(1, 2), 2)


def test_full_profile_fits_one_bit_functions() -> None:
    assembly = assemble_iw_generator(HardFunction.from_bits([0, 1]), Fraction(1, 2), 2, FULL_PROFILE)

    assert set(assembly.tables) == {"f", "rm", "xor", "gl"}
    assert assembly.tables["rm"].input_len == 2
    assert assembly.tables["xor"].input_len == 9
    assert assembly.tables["gl"].input_len == 12
    assert assembly.prg.seed_len == 13


def test_full_profile_hits_the_enumeration_cap() -> None:
    f = HardFunction.random(4, np.random.default_rng(3))

    with pytest.raises(CapacityError):
        assemble_iw_generator(f, Fraction(1, 2), 8, FULL_PROFILE)


def test_unknown_profile_is_rejected() -> None:
    f = HardFunction.random(2, np.random.default_rng(0))

    with pytest.raises(GeneratorError):
        assemble_iw_generator(f, Fraction(1, 2), 4, ("gl", "nw"))


def test_bayes_predictor_on_constant_generator() -> None:
    g = ZerosGen(3)
    i, table, adv = best_next_bit_predictor(g)

    assert (i, adv) == (0, Fraction(1, 2))
    assert table.input_len == 0
    assert bayes_advantage(g, 2) == Fraction(1, 2)


def test_bayes_predictor_learns_repeated_bit() -> None:
    g = ExplicitGen(np.array([[0, 0], [1, 1], [1, 1], [0, 0]]))
    predictor = bayes_next_bit_predictor(g, 1)

    assert list(predictor.rows[:, 0]) == [0, 1]
    assert bayes_advantage(g, 1) == Fraction(1, 2)
    assert bayes_advantage(g, 0) == 0


def test_distinguisher_program_accepts_matching_next_bit() -> None:
    b = distinguisher_program([1, 0], 3)

    assert evaluate(b, [0, 1, 0]) == 1
    assert evaluate(b, [1, 1, 0]) == 0
    assert expectation(b) == Fraction(1, 2)
