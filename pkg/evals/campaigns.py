"""
Acceptance campaigns: exact-oracle property checks over seeded corpora.

Each campaign returns a ``CampaignResult`` with the number of runs, the
number of failures (wrong answers or exceptions on valid input) and a few
counters. ``run_evals`` runs them all at a fraction of their full size and
writes ``eval_report.md`` plus ``evals.json`` under ``output/<run_id>/``.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import ceil
from typing import Any, Callable, Dict, List

import numpy as np

from evals.utils.corpus import corrupt_positions, easy_functions, noisy_layers, random_programs
from obp_derand.algebra.gf2k import get_field, rs_decode, rs_encode
from obp_derand.combinat.small_bias import BiasGen, max_conjunction_error, max_parity_bias
from obp_derand.evaluators.evaluator import Table, success, truth_table_of
from obp_derand.generators.assembly import assemble_iw_generator, assemble_repeated, gl_table, rm_encode, rm_params
from obp_derand.generators.predictors import best_next_bit_predictor
from obp_derand.generators.prg import EnumerationGen, HardFunction, Prg, SmallBiasPrg, ZerosGen, expectation_under
from obp_derand.pipeline import Estimate, certified_estimate_or_refuter
from obp_derand.programs.obp import Direction, exact_probs, expectation, truth_table
from obp_derand.services import verifier
from obp_derand.services.bbtest import (
    BbAccept,
    BbEstimates,
    ExhaustiveBlockSource,
    HittingSet,
    OracleObp,
    SeedClassIndex,
    bb_lc_test,
    bb_sampler,
    true_class_estimates,
)
from obp_derand.services.lctest import LcAccept, ReachEstimates, default_tolerance, lc_test
from obp_derand.services.reconstruct import (
    PredictorInput,
    ReconContext,
    ReconstructionError,
    VerificationError,
    full_reconstruction,
    gl_ell,
    gl_recon,
    rm_recon,
)
from obp_derand.services.universal import EstimatorRegistry, constant_estimator, fc_reference_estimator, univ_derand
from obp_derand.utils.config import CapacityError, get_ledger
from obp_derand.utils.output_parser import write_report, write_text
from obp_derand.utils.run_id import get_run_id

logger = logging.getLogger(__name__)


@dataclass
class CampaignResult:
    name: str
    runs: int = 0
    failures: int = 0
    notes: Dict[str, Any] = field(default_factory=dict)
    examples: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.runs > 0 and self.failures == 0

    def fail(self, detail: str) -> None:
        self.failures += 1
        if len(self.examples) < 5:
            self.examples.append(detail)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "runs": self.runs,
            "failures": self.failures,
            "passed": self.passed,
            "notes": self.notes,
            "examples": self.examples,
        }


def _count(full: int, scale: Fraction) -> int:
    return max(1, ceil(full * scale))


# ------------------------- campaigns -------------------------


def dp_agreement(rng: np.random.Generator, count: int) -> CampaignResult:
    result = CampaignResult("dp_agreement")
    for b in random_programs(rng, count, (1, 12), (1, 8), fractional_share=0.3):
        result.runs += 1
        table = truth_table(b)
        exact = sum(table, Fraction(0)) / len(table)
        forward = exact_probs(b).layer(b.n)
        via_forward = sum((label * p for label, p in zip(b.labels, forward)), Fraction(0))
        backward = exact_probs(b, Direction.BACKWARD).layer(0)[0]
        if not exact == via_forward == backward:
            result.fail(f"n={b.n} w={b.width}: truth {exact}, forward {via_forward}, backward {backward}")
    return result


def _tester_generators(n: int, rng: np.random.Generator) -> List[Prg]:
    gens: List[Prg] = [ZerosGen(n), EnumerationGen(n), SmallBiasPrg(BiasGen.for_bias(n, Fraction(1, 4)))]
    if n <= 8:
        f = HardFunction.random(4, rng)
        # one spare seed index over the 16-bit last stage: the sets share last indices
        gens.append(assemble_iw_generator(f, Fraction(1, 2), n, nw_seed_len=17).prg)
    return gens


def tester_soundness(rng: np.random.Generator, count: int) -> CampaignResult:
    result = CampaignResult("tester_soundness", notes={"certified": 0, "predictor": 0})
    programs = list(random_programs(rng, count, (2, 8), (2, 4)))
    for i, b in enumerate(programs):
        gens = _tester_generators(b.n, rng)
        g = gens[i % len(gens)]
        eps = Fraction(1, 4)
        result.runs += 1
        try:
            verdict = verifier.test_fools(b, g, eps)
        except (verifier.VerifierError, CapacityError) as e:
            result.fail(f"{g.provenance()['family']}: {e}")
            continue
        if isinstance(verdict, verifier.Certified):
            result.notes["certified"] += 1
            gap = abs(expectation_under(g, b) - expectation(b))
            if gap > eps * b.n:
                result.fail(f"certified with gap {gap} > {eps * b.n}")
        else:
            result.notes["predictor"] += 1
            if verifier.predictor_success(g, verdict.program) - Fraction(1, 2) <= eps / 2:
                result.fail(f"predictor at layer {verdict.layer} does not beat eps/2")
    return result


def pipeline_never_wrong(rng: np.random.Generator, count: int) -> CampaignResult:
    result = CampaignResult("pipeline_never_wrong", notes={"estimates": 0, "refuters": 0})
    functions = easy_functions(4, rng)
    for i, b in enumerate(random_programs(rng, count, (2, 4), (2, 3))):
        name, f = functions[i % len(functions)]
        result.runs += 1
        try:
            outcome = certified_estimate_or_refuter(b, f)
        except (ReconstructionError, CapacityError, VerificationError) as e:
            result.fail(f"f={name} n={b.n} w={b.width}: {type(e).__name__}: {e}")
            continue
        if isinstance(outcome, Estimate):
            result.notes["estimates"] += 1
            if abs(outcome.value - expectation(b)) > Fraction(1, 4):
                result.fail(f"estimate {outcome.value} vs {expectation(b)} for f={name}")
        elif not outcome.verified or not truth_table_of(outcome.evaluator).equals(f.table):
            result.fail(f"refuter for f={name} does not compute f")
        else:
            result.notes["refuters"] += 1
    return result


def berlekamp_welch(rng: np.random.Generator, sampled_trials: int) -> CampaignResult:
    result = CampaignResult("berlekamp_welch")
    small = get_field(3)
    for d in (1, 2):
        e_max = (small.size - d - 1) // 2
        for weight in range(e_max + 1):
            for positions in combinations(range(small.size), weight):
                coeffs = [int(c) for c in rng.integers(0, small.size, size=d + 1)]
                codeword = rs_encode(small, coeffs)
                word = list(codeword)
                for p in positions:
                    word[p] ^= int(rng.integers(1, small.size))
                result.runs += 1
                if rs_decode(small, word, d) != codeword:
                    result.fail(f"N=8 d={d} errors at {positions}")
    large = get_field(6)
    for _ in range(sampled_trials):
        d = int(rng.integers(1, 16))
        weight = int(rng.integers(0, (large.size - d - 1) // 2 + 1))
        coeffs = [int(c) for c in rng.integers(0, large.size, size=d + 1)]
        codeword = rs_encode(large, coeffs)
        word = list(codeword)
        for p, err in corrupt_positions(rng, large.size, weight, large.size):
            word[p] ^= err
        result.runs += 1
        if rs_decode(large, word, d) != codeword:
            result.fail(f"N=64 d={d} weight={weight}")
    return result


def rm_end_to_end(rng: np.random.Generator) -> CampaignResult:
    result = CampaignResult("rm_end_to_end")
    f = HardFunction.random(4, rng)
    params = rm_params(4)
    encoded, _ = rm_encode(f.table, params)
    rows = encoded.rows.copy()
    flips = rng.choice(rows.shape[0], size=rows.shape[0] // 200, replace=False)
    rows[flips, 0] ^= 1
    ctx = ReconContext()
    result.runs = 1
    evaluator = rm_recon(ctx, f.table, Table(encoded.input_len, rows), params)
    report = ctx.reports[-1]
    result.notes = {"size": report.size, "budget": report.budget, "corrupted": len(flips)}
    if not truth_table_of(evaluator).equals(f.table) or report.size > report.budget:
        result.fail("reconstructed evaluator is wrong or over budget")
    return result


def gl_perfect_oracle(rng: np.random.Generator) -> CampaignResult:
    result = CampaignResult("gl_perfect_oracle")
    f = HardFunction.random(3, rng)
    delta = Fraction(1, 2)
    ell = gl_ell(get_ledger(), 3, delta)
    threshold = delta / 2 ** (ell + 2)
    evaluator = gl_recon(ReconContext(), f.table, gl_table(f.table).as_evaluator(), delta)
    score = success(evaluator, f.table)
    result.runs = 1
    result.notes = {"ell": ell, "success": str(score), "threshold": str(threshold)}
    if score <= threshold:
        result.fail(f"success {score} <= {threshold}")
    return result


def full_chain(rng: np.random.Generator, count: int) -> CampaignResult:
    result = CampaignResult("full_chain", notes={"verified": 0, "non_constant": 0})
    functions = [("zero", HardFunction.from_bits([0] * 16, "zero"))]
    functions += [(f"random{i}", HardFunction.random(4, rng)) for i in range(count - 1)]
    for name, f in functions:
        result.runs += 1
        assembly = assemble_repeated(f, Fraction(1, 2), 2)
        bit, table, adv = best_next_bit_predictor(assembly.prg)
        try:
            evaluator = full_reconstruction(ReconContext(), assembly, PredictorInput(table, adv, bit))
        except (ReconstructionError, VerificationError, CapacityError) as e:
            result.fail(f"chain for {name}: {type(e).__name__}: {e}")
            continue
        if not truth_table_of(evaluator).equals(f.table):
            result.fail(f"chain for {name} returned a wrong evaluator")
            continue
        result.notes["verified"] += 1
        if len(set(f.table.column(0).tolist())) > 1:
            result.notes["non_constant"] += 1
    if result.notes["non_constant"] == 0:
        result.fail("no non-constant function was reconstructed")
    return result


def lctest_contract(rng: np.random.Generator, count: int) -> CampaignResult:
    result = CampaignResult("lctest_contract", notes={"rejected_noise": 0})
    for b in random_programs(rng, count, (4, 16), (1, 4)):
        result.runs += 1
        forward = exact_probs(b).values
        tol = default_tolerance(b.n)
        noisy = noisy_layers(forward, tol, rng)
        verdict = lc_test(b, ReachEstimates.from_layers(noisy))
        if not isinstance(verdict, LcAccept):
            result.fail(f"noise at n^-3 rejected at layer {verdict.layer} ({verdict.reason})")
            continue
        if abs(verdict.value - expectation(b)) > Fraction(3, b.n):
            result.fail(f"accepted value {verdict.value} off by more than 3/n")
        coarse = noisy_layers(forward, Fraction(1, b.n), rng)
        rough = lc_test(b, ReachEstimates.from_layers(coarse))
        if isinstance(rough, LcAccept):
            if abs(rough.value - expectation(b)) > Fraction(3, b.n):
                result.fail("accepted coarse estimates violate the 3/n bound")
        else:
            result.notes["rejected_noise"] += 1
    return result


def univ_campaign(rng: np.random.Generator, count: int) -> CampaignResult:
    result = CampaignResult("univ_derand", notes={"max_phase": 0})
    for b in random_programs(rng, count, (2, 5), (1, 3)):
        registry = EstimatorRegistry()
        registry.register("sabotaged", constant_estimator(Fraction(1, 3)))
        registry.register("reference", fc_reference_estimator)
        n = max(b.n, b.width, 2)
        result.runs += 1
        found = univ_derand(n, b, registry)
        result.notes["max_phase"] = max(result.notes["max_phase"], found.phase)
        if found.estimator != "reference":
            result.fail(f"returned the {found.estimator} estimator")
        if abs(found.value - expectation(b)) > found.lc.bound:
            result.fail(f"value {found.value} outside the consistency bound")
        if found.lc.peak_held > 2 * b.width:
            result.fail(f"held {found.lc.peak_held} estimates at once")
    return result


def bb_campaign(rng: np.random.Generator, count: int) -> CampaignResult:
    result = CampaignResult("bb_sampler", notes={"queries": 0})
    eps = Fraction(1, 5)
    for b in random_programs(rng, count, (5, 5), (4, 4)):
        result.runs += 1
        oracle = OracleObp.from_obp(b)
        h = HittingSet.from_prg(EnumerationGen(b.n), eps / (6 * b.n))
        found = bb_sampler(oracle, h, ExhaustiveBlockSource(b.n), eps)
        result.notes["queries"] += found.query_count
        if abs(found.value - expectation(b)) > eps:
            result.fail(f"sampler estimate {found.value} vs {expectation(b)}")
        if found.query_count != oracle.queries:
            result.fail("query counter disagrees with the sampler report")

        tester_eps = eps / (6 * b.n)
        index = SeedClassIndex(OracleObp.from_obp(b), h)
        truth = true_class_estimates(b, index)
        noisy = noisy_layers(truth.values, tester_eps, rng)
        verdict = bb_lc_test(index.oracle, h, BbEstimates.from_layers(noisy), tester_eps, index=index)
        if not isinstance(verdict, BbAccept):
            result.fail(f"noisy class estimates rejected by {verdict.test}")
        elif abs(verdict.value - expectation(b)) > 6 * tester_eps * b.n:
            result.fail("accepted estimate outside 6*eps*n")
    return result


def small_bias(rng: np.random.Generator) -> CampaignResult:
    result = CampaignResult("small_bias")
    for k in range(2, 9):
        gen = BiasGen.for_bias(k, Fraction(1, 4))
        result.runs += 1
        bias = max_parity_bias(gen.output_matrix)
        if bias > gen.eps:
            result.fail(f"k={k}: bias {bias} > {gen.eps}")
    for d in (1, 2, 3):
        gen = BiasGen.for_bias(5, Fraction(1, 4))
        result.runs += 1
        error = max_conjunction_error(gen.output_matrix, d)
        if error > 2 * gen.eps:
            result.fail(f"d={d}: conjunction error {error} > {2 * gen.eps}")
    return result


# ------------------------- driver -------------------------


def _campaigns(scale: Fraction) -> List[Callable[[np.random.Generator], CampaignResult]]:
    return [
        lambda rng: dp_agreement(rng, _count(500, scale)),
        lambda rng: tester_soundness(rng, _count(200, scale)),
        lambda rng: pipeline_never_wrong(rng, _count(100, scale)),
        lambda rng: berlekamp_welch(rng, _count(10_000, scale)),
        rm_end_to_end,
        gl_perfect_oracle,
        lambda rng: full_chain(rng, _count(4, scale)),
        lambda rng: lctest_contract(rng, _count(200, scale)),
        lambda rng: univ_campaign(rng, _count(100, scale)),
        lambda rng: bb_campaign(rng, _count(100, scale)),
        small_bias,
    ]


def _render(results: List[CampaignResult], scale: Fraction) -> str:
    lines = [f"# Evaluation Report (scale {scale})\n"]
    for r in results:
        status = "Success" if r.passed else "Fail"
        lines.append(f"- {r.name}[{status}]: {r.runs} runs, {r.failures} failures")
        for key, value in sorted(r.notes.items()):
            lines.append(f"    - {key}: {value}")
        for example in r.examples:
            lines.append(f"    - failure: {example}")
    return "\n".join(lines) + "\n"


def run_evals(scale: Fraction = Fraction(1), seed: int = 0) -> Dict[str, Any]:
    """Run every campaign with its own seeded generator and write the reports."""
    results: List[CampaignResult] = []
    for i, campaign in enumerate(_campaigns(Fraction(scale))):
        rng = np.random.default_rng([seed, i])
        outcome = campaign(rng)
        logger.info(
            "Campaign %s: %d runs, %d failures",
            outcome.name,
            outcome.runs,
            outcome.failures,
        )
        results.append(outcome)
    summary = {
        "scale": f"{Fraction(scale).numerator}/{Fraction(scale).denominator}",
        "seed": seed,
        "passed": all(r.passed for r in results),
        "campaigns": [r.to_dict() for r in results],
    }
    write_report("evals", summary)
    path = write_text("eval_report.md", _render(results, Fraction(scale)))
    logger.info("Eval report for run %s written to %s", get_run_id(), path)
    return summary
