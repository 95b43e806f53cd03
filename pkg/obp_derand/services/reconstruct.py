"""
Reconstruction: turning a predictor for the generator into an evaluator for f.

Each stage inverts one step of the generator assembly. Stages re-measure the
quality of the evaluator they are handed, search seeds in lexicographic
order up to the ledger's per-stage budget, verify every candidate
exhaustively and return the first that passes. Failures carry the stage,
the number of seeds tried and the best score seen.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from obp_derand.combinat.designs import Design
from obp_derand.combinat.expanders import expander_walk
from obp_derand.combinat.samplers import default_sampler
from obp_derand.combinat.small_bias import BiasGen
from obp_derand.evaluators.evaluator import (
    Compose,
    Concat,
    Const,
    Decode,
    Evaluator,
    Maj,
    Memo,
    Select,
    Substitute,
    Table,
    TruthTable,
    Xor,
    advantage,
    run_batch,
    success,
)
from obp_derand.generators.assembly import (
    IwAssembly,
    RmParams,
    gl_table,
    rm_encode,
    rm_params,
    with_unit_bit,
)
from obp_derand.generators.direct_product import DirectProductGen
from obp_derand.generators.nw import NwGen
from obp_derand.utils.bits import all_inputs, bits_to_index, index_to_bits, row_indices
from obp_derand.utils.config import ConstantsLedger, get_ledger, get_settings, require_under_cap
from obp_derand.utils.run_id import get_run_id
from obp_derand.utils.stage_log import StageLog

logger = logging.getLogger(__name__)

RM_SUCCESS_THRESHOLD = Fraction(99, 100)
XOR_SUCCESS_THRESHOLD = Fraction(99, 100)


class ReconstructionError(Exception):
    """A stage exhausted its seeds (or its precondition failed) without a verified result."""

    def __init__(self, stage: str, seeds_tried: int, best_score: Optional[Fraction], detail: str = ""):
        self.stage = stage
        self.seeds_tried = seeds_tried
        self.best_score = best_score
        message = f"{stage} reconstruction failed after {seeds_tried} seeds (best score {best_score})"
        super().__init__(f"{message}: {detail}" if detail else message)


class PreconditionError(ReconstructionError):
    """The evaluator handed to a stage does not meet the stage's input requirement."""

    def __init__(self, stage: str, measured: Fraction, required: str):
        self.measured = measured
        super().__init__(stage, 0, measured, f"measured {measured}, required {required}")


class VerificationError(Exception):
    """An internal invariant failed: a result that passed its search did not verify."""


@dataclass
class StageReport:
    stage: str
    params: Dict[str, Any]
    seeds_tried: int
    score: Fraction
    size: int
    budget: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "stage": self.stage,
            "params": self.params,
            "seeds_tried": self.seeds_tried,
            "score": f"{self.score.numerator}/{self.score.denominator}",
            "size": self.size,
            "budget": self.budget,
        }


@dataclass
class PredictorInput:
    """A next-bit predictor for the assembled generator: reads bits 1..bit_index, guesses the next."""

    evaluator: Evaluator
    claimed_advantage: Fraction
    bit_index: int
    stage: str = "nw"


@dataclass
class ReconContext:
    ledger: ConstantsLedger = field(default_factory=get_ledger)
    log: Optional[StageLog] = None
    seed_budgets: Dict[str, int] = field(default_factory=dict)
    reports: List[StageReport] = field(default_factory=list)

    def seed_budget(self, stage: str) -> int:
        """Per-stage seed budget: explicit override, else the ledger, never above the cap."""
        if stage in self.seed_budgets:
            budget = self.seed_budgets[stage]
        else:
            budget = getattr(self.ledger, f"{stage}_seed_budget")
        return min(budget, get_settings().enum_cap)

    def record(self, stage: str, event: str, **data: Any) -> None:
        if self.log is not None:
            self.log.record(stage, event, **data)

    def report(self, report: StageReport) -> None:
        self.reports.append(report)
        payload = report.to_dict()
        del payload["stage"]
        self.record(report.stage, "accept", **payload)


def _log(stage: str, msg: str, *, level: int = logging.INFO) -> None:
    logger.log(level, "[stage=%s run=%s] %s", stage, get_run_id(), msg)


def _check_budget(stage: str, evaluator: Evaluator, budget: int) -> None:
    if evaluator.size > budget:
        raise VerificationError(
            f"{stage} produced an evaluator of size {evaluator.size} above its budget {budget}"
        )


def _call(b: Evaluator, input_len: int, sources: Sequence[int], flips: Sequence[int]) -> Substitute:
    return Substitute(b, input_len, tuple(int(s) for s in sources), tuple(int(f) for f in flips))


# ------------------------- Reed-Muller -------------------------


def rm_budget(ledger: ConstantsLedger, params: RmParams, t: int, b_size: int) -> int:
    n = params.field.size
    return ledger.c_rm * t * n * n * params.k * (b_size + params.m_1) + ledger.c_rm * t * n**3


def _hadamard_decoder(b: Evaluator, params: RmParams) -> Memo:
    """B'(y) bit i = MAJ_z B(y, e_i + z) xor B(y, z): recovers bit i of p(y)."""
    k = params.k
    y_len = params.ell * k
    sources = tuple(range(y_len)) + (-1,) * k

    def call(u: int) -> Substitute:
        return _call(b, y_len, sources, (0,) * y_len + tuple((u >> t) & 1 for t in range(k)))

    bits = []
    for i in range(k):
        pairs = tuple(Xor((call(z ^ (1 << i)), call(z))) for z in range(2**k))
        bits.append(Maj(pairs))
    return Memo(Concat(tuple(bits)))


def _line_decoder(b_prime: Evaluator, params: RmParams, direction: Sequence[int]) -> Evaluator:
    """First bit of the decoded value at λ = 0 along embed(x) + λ·direction."""
    f_k, k = params.field, params.k
    children = []
    for lam in f_k.elements():
        offsets = [f_k.mul(lam, v) for v in direction]
        sources: List[int] = []
        flips: List[int] = []
        for j in range(params.ell):
            for t in range(k):
                pos = j * params.h_bits + t
                sources.append(pos if t < params.h_bits and pos < params.m else -1)
                flips.append((offsets[j] >> t) & 1)
        children.append(_call(b_prime, params.m, sources, flips))
    decoder = Decode(k, params.degree, tuple(children))
    return Compose(Select(k, (0,)), decoder)


def rm_recon(
    ctx: ReconContext,
    f: TruthTable,
    b: Evaluator,
    params: Optional[RmParams] = None,
) -> Evaluator:
    """
    Recover f exactly from an evaluator B for f'(y, u) = <p(y), u> with success > 0.99.

    Raises:
        PreconditionError: SUC(B, f') <= 0.99.
        ReconstructionError: no sampler seed produced a verified evaluator.
    """
    stage = "rm"
    params = params or rm_params(f.input_len)
    target, _ = rm_encode(f, params)
    measured = success(b, target)
    if measured <= RM_SUCCESS_THRESHOLD:
        raise PreconditionError(stage, measured, f"> {RM_SUCCESS_THRESHOLD}")

    b_prime = _hadamard_decoder(b, params)
    sampler = default_sampler(params.ell * params.k, eps=1 / 8)
    limit = min(sampler.num_seeds, ctx.seed_budget(stage))
    budget = rm_budget(ctx.ledger, params, sampler.t, b.size)
    mask = params.field.size - 1
    ctx.record(stage, "start", params=params.to_dict(), measured=measured, seed_limit=limit)
    _log(stage, f"measured SUC={measured}, trying up to {limit} seeds of {sampler.t} lines")

    best = Fraction(0)
    for seed in range(limit):
        lines = []
        for q in sampler.queries(seed):
            direction = [(int(q) >> (j * params.k)) & mask for j in range(params.ell)]
            lines.append(_line_decoder(b_prime, params, direction))
        candidate = Maj(tuple(lines))
        score = success(candidate, f)
        best = max(best, score)
        if score == 1:
            _check_budget(stage, candidate, budget)
            ctx.report(StageReport(stage, params.to_dict(), seed + 1, score, candidate.size, budget))
            _log(stage, f"verified at seed {seed}, size={candidate.size}")
            return candidate
    ctx.record(stage, "fail", seeds_tried=limit, best=best)
    raise ReconstructionError(stage, limit, best)


# ------------------------- XOR lemma -------------------------


def xor_success_floor(gamma: Fraction, m: int) -> Fraction:
    """2^(-γm), the least success on the direct product the XOR stage accepts."""
    return Fraction(2.0 ** (-float(Fraction(gamma) * m)))


def xor_budget(ledger: ConstantsLedger, dp: DirectProductGen, t: int, b_size: int) -> int:
    k = dp.blocks
    g = min(dp.m, int(dp.design.intersection_bound))
    return ledger.c_xor * t * (k * (b_size + dp.input_len + 2**g + g + 3) + 2**k) + 1


def _randomness_layout(dp: DirectProductGen) -> Tuple[int, int, int, int, int]:
    """Bit widths of (i, a, v, d, w) in the randomness string R."""
    return (
        (dp.blocks - 1).bit_length(),
        dp.s - dp.m,
        dp.m,
        dp.blocks * dp.digit_bits,
        dp.m + 1,
    )


def _restricted_predictor(
    b: Evaluator, dp: DirectProductGen, f: TruthTable, r_bits: Sequence[int]
) -> Evaluator:
    """F(x, R) for one fixed R: B's guess for f(x) at block i, kept with probability 2^-mismatches."""
    widths = _randomness_layout(dp)
    cuts = np.cumsum((0,) + widths)
    i_raw, a, v_bits, d_bits, w = (r_bits[cuts[j] : cuts[j + 1]] for j in range(5))
    m, k, s = dp.m, dp.blocks, dp.s
    i = bits_to_index(i_raw) % k
    sets = dp.design.sets
    target = sets[i]
    outside = [p for p in range(s) if p not in target]
    v = bits_to_index(v_bits)
    digits = [bits_to_index(d_bits[j * dp.digit_bits : (j + 1) * dp.digit_bits]) for j in range(k)]
    walk = expander_walk(dp.expander, v, digits)
    vertex_bits = [index_to_bits(vertex, m) for vertex in walk]

    # r|_target = x xor vertex_i, r elsewhere = a
    fixed_r: Dict[int, int] = {pos: int(a[idx]) for idx, pos in enumerate(outside)}
    position_in_target = {pos: p for p, pos in enumerate(target)}
    sources = [-1] * dp.input_len
    flips = [0] * dp.input_len
    for pos in range(s):
        if pos in position_in_target:
            p = position_in_target[pos]
            sources[pos] = p
            flips[pos] = vertex_bits[i][p]
        else:
            flips[pos] = fixed_r[pos]
    for j, bit in enumerate(list(v_bits) + list(d_bits)):
        flips[s + j] = int(bit)
    b_sub = _call(b, m, sources, flips)

    column = f.column(0)
    parts: List[Evaluator] = [Compose(Select(k, (i,)), b_sub)]
    for j in range(k):
        if j == i:
            continue
        shared = [position_in_target[pos] for pos in sets[j] if pos in position_in_target]
        rows = np.zeros((2 ** len(shared), 1), dtype=np.uint8)
        for assignment in range(2 ** len(shared)):
            x_part = dict(zip(shared, index_to_bits(assignment, len(shared))))
            block = []
            for q, pos in enumerate(sets[j]):
                if pos in position_in_target:
                    p = position_in_target[pos]
                    r_pos = x_part[p] ^ vertex_bits[i][p]
                else:
                    r_pos = fixed_r[pos]
                block.append(r_pos ^ vertex_bits[j][q])
            rows[assignment, 0] = column[bits_to_index(block)]
        expected = Compose(Table(len(shared), rows), Select(m, tuple(shared)))
        parts.append(Xor((Compose(Select(k, (j,)), b_sub), expected)))

    # accept with probability 2^-t: u < 2^(m - t) with u the first m bits of w
    u = bits_to_index(w[:m])
    fallback = int(w[m])
    out_rows = np.zeros((2**k, 1), dtype=np.uint8)
    for row in range(2**k):
        bits = index_to_bits(row, k)
        mismatches = sum(bits[1:])
        accepted = mismatches <= m and u < 2 ** (m - mismatches)
        out_rows[row, 0] = bits[0] if accepted else fallback
    return Compose(Table(k, out_rows), Concat(tuple(parts)))


def xor_recon(
    ctx: ReconContext,
    f: TruthTable,
    b: Evaluator,
    dp: DirectProductGen,
    gamma: Fraction,
) -> Evaluator:
    """
    Recover an evaluator with SUC > 0.99 on f from B with SUC >= 2^(-γm) on f^k ∘ G_dp.

    Raises:
        PreconditionError: B's success on the direct product is below 2^(-γm).
        ReconstructionError: no sampler seed gave SUC > 0.99.
    """
    stage = "xor"
    m = f.input_len
    target = dp.product_table(f)
    measured = success(b, target)
    floor = xor_success_floor(gamma, m)
    if measured < floor:
        raise PreconditionError(stage, measured, f">= 2^-{gamma * m}")

    r_len = sum(_randomness_layout(dp))
    sampler = default_sampler(r_len, eps=1 / ctx.ledger.c_iw)
    limit = min(sampler.num_seeds, ctx.seed_budget(stage))
    budget = xor_budget(ctx.ledger, dp, sampler.t, b.size)
    params = {"m": m, "gamma": str(gamma), "blocks": dp.blocks, "s": dp.s, "r_bits": r_len, "t": sampler.t}
    ctx.record(stage, "start", params=params, measured=measured, seed_limit=limit)
    _log(stage, f"measured SUC={measured}, trying up to {limit} seeds")

    best = Fraction(0)
    for seed in range(limit):
        parts = tuple(
            _restricted_predictor(b, dp, f, index_to_bits(int(q), r_len))
            for q in sampler.queries(seed)
        )
        candidate = Maj(parts)
        score = success(candidate, f)
        best = max(best, score)
        if score > XOR_SUCCESS_THRESHOLD:
            _check_budget(stage, candidate, budget)
            ctx.report(StageReport(stage, params, seed + 1, score, candidate.size, budget))
            _log(stage, f"SUC={score} at seed {seed}, size={candidate.size}")
            return candidate
    ctx.record(stage, "fail", seeds_tried=limit, best=best)
    raise ReconstructionError(stage, limit, best)


# ------------------------- Goldreich-Levin -------------------------


def gl_ell(ledger: ConstantsLedger, m: int, delta: Fraction) -> int:
    """Smallest ℓ with 2^ℓ >= C·m/δ² + 1."""
    value = Fraction(ledger.gl_ell_constant * m) / (delta * delta) + 1
    ell = 0
    while 2**ell < value:
        ell += 1
    return ell


def gl_budget(ledger: ConstantsLedger, ell: int, m: int, k: int, b_size: int) -> int:
    return ledger.c_gl * k * (2**ell * (b_size + m + k + 2) + 1)


def _majority_row(f: TruthTable) -> Tuple[int, ...]:
    rows, counts = np.unique(f.rows, axis=0, return_counts=True)
    return tuple(int(v) for v in rows[int(np.argmax(counts))])


def _subset_sums(values: Sequence[int], ell: int) -> np.ndarray:
    """XOR of values[j] over the bits j of every mask in 0..2^ell - 1."""
    sums = np.zeros(1, dtype=np.int64)
    for j in range(ell):
        sums = np.concatenate([sums, sums ^ np.int64(values[j])])
    return sums


def _gl_candidate(
    b: Evaluator, m: int, k: int, r_vectors: Sequence[int], b_bits: Sequence[int]
) -> Evaluator:
    """C_i(x) = MAJ over nonempty J of b^J xor B(x, r^J xor e_i), grouped by (b^J, r^J)."""
    ell = len(r_vectors)
    keys = (_subset_sums(b_bits, ell) << k) | _subset_sums(r_vectors, ell)
    groups, weights = np.unique(keys[1:], return_counts=True)
    sources = tuple(range(m)) + (-1,) * k
    bits = []
    for i in range(k):
        children: List[Evaluator] = []
        for key in groups:
            flip, r_vec = int(key) >> k, int(key) & ((1 << k) - 1)
            shifted = r_vec ^ (1 << (k - 1 - i))
            call = _call(b, m, sources, (0,) * m + index_to_bits(shifted, k))
            children.append(Xor((Const(m, (1,)), call)) if flip else call)
        bits.append(Maj(tuple(children), tuple(int(w) for w in weights)))
    return bits[0] if k == 1 else Concat(tuple(bits))


def gl_recon(
    ctx: ReconContext,
    f: TruthTable,
    b: Evaluator,
    delta: Fraction,
    *,
    target: Optional[Fraction] = None,
) -> Evaluator:
    """
    Recover an evaluator with SUC > δ·2^(-ℓ-2) on f from B with ADV > δ on <f(x), r>.

    ``target`` additionally requires SUC >= target, so the candidate meets the
    input requirement of the stage that consumes it.

    Raises:
        PreconditionError: ADV(B, g) <= δ.
        ReconstructionError: no (bias seed, b) candidate passed.
    """
    stage = "gl"
    m, k = f.input_len, f.output_len
    delta = Fraction(delta)
    if delta < Fraction(1, 2**m):
        constant = Const(m, _majority_row(f))
        score = success(constant, f)
        ctx.report(StageReport(stage, {"delta": str(delta), "short_circuit": True}, 0, score, constant.size, constant.size))
        _log(stage, f"delta={delta} below 2^-{m}; returning a constant")
        return constant

    measured = advantage(b, gl_table(f))
    if measured <= delta:
        raise PreconditionError(stage, measured, f"> {delta}")

    ell = gl_ell(ctx.ledger, m, delta)
    require_under_cap(2**ell, "subset enumeration of the inner-product stage")
    delta_prime = delta / 2 ** (ell + 2)
    bias = BiasGen.for_bias(ell * k, Fraction(1, 2 ** (ctx.ledger.bias_exponent * m + 1)))
    total = bias.num_seeds * 2**ell
    limit = min(total, ctx.seed_budget(stage))
    budget = gl_budget(ctx.ledger, ell, m, k, b.size)
    params = {"delta": str(delta), "ell": ell, "delta_prime": str(delta_prime), "bias_h": bias.h}
    if target is not None:
        params["target"] = str(target)
    ctx.record(stage, "start", params=params, measured=measured, seed_limit=limit)
    _log(stage, f"ADV={measured}, ell={ell}, trying up to {limit} of {total} candidates")

    best = Fraction(0)
    for idx in range(limit):
        y, b_index = divmod(idx, 2**ell)
        sample = bias.expand(y)
        r_vectors = [bits_to_index(sample[j * k : (j + 1) * k]) for j in range(ell)]
        candidate = _gl_candidate(b, m, k, r_vectors, index_to_bits(b_index, ell))
        score = success(candidate, f)
        best = max(best, score)
        if score > delta_prime and (target is None or score >= target):
            _check_budget(stage, candidate, budget)
            ctx.report(StageReport(stage, params, idx + 1, score, candidate.size, budget))
            _log(stage, f"SUC={score} > {delta_prime} at candidate {idx}, size={candidate.size}")
            return candidate
    ctx.record(stage, "fail", seeds_tried=limit, best=best)
    raise ReconstructionError(stage, limit, best)


# ------------------------- NW restriction -------------------------


def predictor_advantage(g: NwGen, predictor: Evaluator, bit_index: int) -> Fraction:
    """Pr_seed[predictor(G(x)_{<i}) = G(x)_i] - 1/2, exactly."""
    outputs = g.output_matrix
    guesses = run_batch(predictor, outputs[:, :bit_index])[:, 0]
    hits = int(np.sum(guesses == outputs[:, bit_index]))
    return Fraction(hits, outputs.shape[0]) - Fraction(1, 2)


def nw_budget(ledger: ConstantsLedger, design: Design, bit_index: int, b_size: int) -> int:
    g = min(design.set_size, int(design.intersection_bound))
    return ledger.c_nw * (b_size + bit_index * (2**g + g)) + 1


def nw_restrict(
    ctx: ReconContext,
    f: TruthTable,
    b: Evaluator,
    design: Design,
    bit_index: int,
    eps: Fraction,
) -> Evaluator:
    """
    Hardwire the coordinates outside S_i to get an evaluator for f with ADV > ε.

    Raises:
        PreconditionError: the predictor's advantage is at most ε.
        ReconstructionError: no assignment x_T gave ADV > ε.
    """
    stage = "nw"
    g = NwGen(design, f)
    measured = predictor_advantage(g, b, bit_index)
    if measured <= eps:
        raise PreconditionError(stage, measured, f"> {eps}")

    target = design.sets[bit_index]
    position_in_target = {pos: p for p, pos in enumerate(target)}
    outside = [p for p in range(design.s) if p not in position_in_target]
    limit = min(2 ** len(outside), ctx.seed_budget(stage))
    budget = nw_budget(ctx.ledger, design, bit_index, b.size)
    column = f.column(0)
    m = f.input_len
    params = {"bit_index": bit_index, "eps": str(eps), "free_bits": len(outside)}
    ctx.record(stage, "start", params=params, measured=measured, seed_limit=limit)
    _log(stage, f"predictor advantage={measured}, trying up to {limit} assignments")

    best: Optional[Fraction] = None
    for assignment in range(limit):
        fixed = dict(zip(outside, index_to_bits(assignment, len(outside))))
        parts: List[Evaluator] = []
        for j in range(bit_index):
            shared = [position_in_target[pos] for pos in design.sets[j] if pos in position_in_target]
            values = all_inputs(len(shared))
            block = np.zeros((values.shape[0], m), dtype=np.uint8)
            for q, pos in enumerate(design.sets[j]):
                if pos in position_in_target:
                    block[:, q] = values[:, shared.index(position_in_target[pos])]
                else:
                    block[:, q] = fixed[pos]
            rows = column[row_indices(block)].reshape(-1, 1).astype(np.uint8)
            parts.append(Compose(Table(len(shared), rows), Select(m, tuple(shared))))
        if parts:
            candidate: Evaluator = Compose(b, Concat(tuple(parts)))
        else:
            candidate = _call(b, m, (), ())
        score = advantage(candidate, f)
        best = score if best is None else max(best, score)
        if score > eps:
            _check_budget(stage, candidate, budget)
            ctx.report(StageReport(stage, params, assignment + 1, score, candidate.size, budget))
            _log(stage, f"ADV={score} at assignment {assignment}, size={candidate.size}")
            return candidate
    ctx.record(stage, "fail", seeds_tried=limit, best=best)
    raise ReconstructionError(stage, limit, best)


# ------------------------- the chain -------------------------


def largest_power_of_two_below(value: Fraction) -> Fraction:
    """Largest 2^-j (j >= 0) strictly below ``value``; value must lie in (0, 2]."""
    p = Fraction(1)
    while p >= value:
        p /= 2
    return p


def full_reconstruction(
    ctx: ReconContext, assembly: IwAssembly, predictor: PredictorInput
) -> Evaluator:
    """
    Run the stages of the assembly backwards from a next-bit predictor to an
    evaluator that computes f exactly.

    Raises:
        PreconditionError: the predictor's advantage is at most 1/(8n).
        ReconstructionError: a stage failed; ``stage`` names it.
        VerificationError: the final evaluator does not compute f.
    """
    n = assembly.prg.output_len
    floor_adv = Fraction(1, 8 * n)
    measured = predictor_advantage(assembly.prg, predictor.evaluator, predictor.bit_index)
    ctx.record("input", "measure", advantage=measured, required=floor_adv)
    if measured <= floor_adv:
        raise PreconditionError("nw", measured, f"> {floor_adv}")
    if measured < predictor.claimed_advantage:
        raise PreconditionError("nw", measured, f">= claimed {predictor.claimed_advantage}")

    stages = list(assembly.profile[:-1])
    current = nw_restrict(
        ctx,
        assembly.table_before("nw"),
        predictor.evaluator,
        assembly.prg.design,
        predictor.bit_index,
        floor_adv,
    )
    for name in reversed(stages):
        source = assembly.table_before(name)
        if name == "gl":
            adv = advantage(current, assembly.tables["gl"])
            delta = max(largest_power_of_two_below(adv), floor_adv)
            target = None
            if "xor" in stages:
                assert assembly.xor is not None
                target = xor_success_floor(assembly.xor.gamma, assembly.table_before("xor").input_len)
            k = source.output_len
            current = gl_recon(ctx, with_unit_bit(source), current, delta, target=target)
            current = Compose(Select(k + 1, tuple(range(k))), current)
        elif name == "xor":
            assert assembly.direct_product is not None and assembly.xor is not None
            current = xor_recon(ctx, source, current, assembly.direct_product, assembly.xor.gamma)
        elif name == "rm":
            current = rm_recon(ctx, source, current, assembly.rm)

    f = assembly.hard.table
    if not np.array_equal(run_batch(current, all_inputs(f.input_len)), f.rows):
        raise VerificationError("Reconstructed evaluator does not compute the hard function")
    ctx.record("chain", "verified", size=current.size, stages=[r.stage for r in ctx.reports])
    _log("chain", f"verified evaluator for f, size={current.size}")
    return current
