from fractions import Fraction

import numpy as np
import pytest

from obp_derand.combinat.designs import build_design
from obp_derand.evaluators.evaluator import Const, Table, TruthTable, advantage, success, truth_table_of
from obp_derand.generators.assembly import (
    FULL_PROFILE,
    IwAssembly,
    assemble_repeated,
    gl_table,
    rm_encode,
    rm_params,
)
from obp_derand.generators.predictors import best_next_bit_predictor
from obp_derand.generators.prg import HardFunction
from obp_derand.services.reconstruct import (
    PreconditionError,
    PredictorInput,
    ReconContext,
    ReconstructionError,
    full_reconstruction,
    gl_ell,
    gl_recon,
    largest_power_of_two_below,
    nw_restrict,
    rm_recon,
)
from obp_derand.utils.config import get_ledger
from obp_derand.utils.stage_log import StageLog


def test_largest_power_of_two_below_is_strict() -> None:
    assert largest_power_of_two_below(Fraction(1, 2)) == Fraction(1, 4)
    assert largest_power_of_two_below(Fraction(3, 4)) == Fraction(1, 2)
    assert largest_power_of_two_below(Fraction(2)) == 1


def test_gl_ell_grows_with_precision() -> None:
    ledger = get_ledger()

    assert 2 ** gl_ell(ledger, 3, Fraction(1, 2)) >= ledger.gl_ell_constant * 3 * 4 + 1
    assert gl_ell(ledger, 3, Fraction(1, 4)) == gl_ell(ledger, 3, Fraction(1, 2)) + 2


def test_rm_recon_corrects_sparse_noise() -> None:
    rng = np.random.default_rng(11)
    f = HardFunction.random(4, rng)
    params = rm_params(4)
    encoded, _ = rm_encode(f.table, params)
    rows = encoded.rows.copy()
    rows[rng.choice(rows.shape[0], size=20, replace=False), 0] ^= 1
    ctx = ReconContext()

    evaluator = rm_recon(ctx, f.table, Table(encoded.input_len, rows), params)

    assert truth_table_of(evaluator).equals(f.table)
    report = ctx.reports[-1]
    assert report.stage == "rm"
    assert report.size <= report.budget


def test_rm_recon_rejects_weak_evaluator() -> None:
    f = HardFunction.from_bits([0, 1] * 8)
    params = rm_params(4)

    with pytest.raises(PreconditionError) as info:
        rm_recon(ReconContext(), f.table, Const(params.m_1, (0,)), params)

    assert info.value.stage == "rm"
    assert isinstance(info.value, ReconstructionError)


def test_gl_recon_from_perfect_oracle_beats_threshold() -> None:
    f = HardFunction.random(3, np.random.default_rng(5))
    delta = Fraction(1, 2)
    ctx = ReconContext()

    evaluator = gl_recon(ctx, f.table, gl_table(f.table).as_evaluator(), delta)

    ell = gl_ell(ctx.ledger, 3, delta)
    assert success(evaluator, f.table) > delta / 2 ** (ell + 2)
    assert ctx.reports[-1].stage == "gl"


def test_gl_recon_short_circuits_below_one_over_domain() -> None:
    f = TruthTable.from_bits([1, 1, 1, 0, 1, 0, 0, 1])
    ctx = ReconContext()

    evaluator = gl_recon(ctx, f, Const(4, (0,)), Fraction(1, 16))

    assert isinstance(evaluator, Const)
    assert success(evaluator, f) == Fraction(5, 8)
    assert ctx.reports[-1].params["short_circuit"] is True


def test_gl_recon_checks_advantage_before_searching() -> None:
    f = TruthTable.from_bits([0, 1, 1, 0])

    # <f(x), r> is 1 on two of eight inputs, so the zero guess has advantage 1/2
    with pytest.raises(PreconditionError) as info:
        gl_recon(ReconContext(), f, Const(3, (0,)), Fraction(1, 2))

    assert info.value.measured == Fraction(1, 2)


def test_nw_restrict_hardwires_a_constant_predictor() -> None:
    design = build_design(4, Fraction(1, 2), 3)
    f = TruthTable.from_bits([0, 0, 0, 1])

    evaluator = nw_restrict(ReconContext(), f, Const(0, (0,)), design, 0, Fraction(1, 8))

    assert evaluator.input_len == 2
    assert advantage(evaluator, f) == Fraction(1, 2)


def test_nw_restrict_rejects_useless_predictor() -> None:
    design = build_design(4, Fraction(1, 2), 3)
    f = TruthTable.from_bits([0, 1, 1, 0])

    with pytest.raises(PreconditionError):
        nw_restrict(ReconContext(), f, Const(0, (0,)), design, 0, Fraction(1, 8))


def chain_input(assembly: IwAssembly) -> PredictorInput:
    bit, table, adv = best_next_bit_predictor(assembly.prg)
    return PredictorInput(table, adv, bit)


def test_full_chain_recovers_the_zero_function() -> None:
    f = HardFunction.from_bits([0] * 16, "zero")
    assembly = assemble_repeated(f, Fraction(1, 2), 2)
    ctx = ReconContext()

    evaluator = full_reconstruction(ctx, assembly, chain_input(assembly))

    assert truth_table_of(evaluator).equals(f.table)
    assert [r.stage for r in ctx.reports] == ["nw", "gl", "xor"]


def test_full_chain_recovers_non_constant_functions(rng: np.random.Generator) -> None:
    functions = [HardFunction.from_bits([0, 1] * 8), HardFunction.random(4, rng), HardFunction.random(4, rng)]

    for f in functions:
        assembly = assemble_repeated(f, Fraction(1, 2), 2)
        evaluator = full_reconstruction(ReconContext(), assembly, chain_input(assembly))
        assert truth_table_of(evaluator).equals(f.table)


def test_full_profile_chain_runs_every_stage() -> None:
    f = HardFunction.from_bits([0, 1])
    assembly = assemble_repeated(f, Fraction(1, 2), 2, FULL_PROFILE)
    ctx = ReconContext()

    evaluator = full_reconstruction(ctx, assembly, chain_input(assembly))

    assert truth_table_of(evaluator).equals(f.table)
    assert [r.stage for r in ctx.reports] == ["nw", "gl", "xor", "rm"]


def test_stage_log_gets_one_accept_per_stage() -> None:
    f = HardFunction.random(4, np.random.default_rng(11))
    assembly = assemble_repeated(f, Fraction(1, 2), 2)
    log = StageLog("chain", timestamps=False)

    full_reconstruction(ReconContext(log=log), assembly, chain_input(assembly))

    accepted = [e for e in log.events() if e["event"] == "accept"]
    assert [e["stage"] for e in accepted] == ["nw", "gl", "xor"]
    assert all("stage" not in e["data"] for e in accepted)
    assert log.last("chain")["event"] == "verified"


def test_starved_direct_product_stage_is_named_in_the_failure() -> None:
    f = HardFunction.from_bits([0, 1, 1, 0] * 4)
    assembly = assemble_repeated(f, Fraction(1, 2), 2)
    ctx = ReconContext(seed_budgets={"xor": 0})

    with pytest.raises(ReconstructionError) as info:
        full_reconstruction(ctx, assembly, chain_input(assembly))

    assert type(info.value) is ReconstructionError
    assert info.value.stage == "xor"
    assert info.value.seeds_tried == 0
    assert [r.stage for r in ctx.reports] == ["nw", "gl"]


def test_full_chain_refuses_overclaimed_predictor() -> None:
    assembly = assemble_repeated(HardFunction.from_bits([0] * 16, "zero"), Fraction(1, 2), 2)
    bit, table, adv = best_next_bit_predictor(assembly.prg)

    with pytest.raises(PreconditionError) as info:
        full_reconstruction(ReconContext(), assembly, PredictorInput(table, adv + Fraction(1, 4), bit))

    assert info.value.stage == "nw"


def test_full_chain_refuses_predictor_below_floor() -> None:
    assembly = assemble_repeated(HardFunction.from_bits([0] * 16, "zero"), Fraction(1, 2), 2)

    with pytest.raises(PreconditionError):
        full_reconstruction(ReconContext(), assembly, PredictorInput(Const(0, (1,)), Fraction(0), 0))
