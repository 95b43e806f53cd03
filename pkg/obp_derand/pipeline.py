"""
Certified estimate or hardness refuter.

Given a program B and a candidate hard function f, either estimate E[B] to
within 1/4 with a certificate from the next-bit tester, or turn the tester's
predictor into an evaluator that provably computes f. Nothing else is ever
returned: a refuter that fails exhaustive verification is a hard error.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Union

from obp_derand.combinat.designs import Design
from obp_derand.evaluators.evaluator import Evaluator, ObpEval, truth_table_of
from obp_derand.evaluators.evaluator import to_dict as evaluator_to_dict
from obp_derand.generators.assembly import DESK_PROFILE, IwAssembly, assemble_iw_generator
from obp_derand.generators.prg import HardFunction
from obp_derand.programs.obp import Obp, pad
from obp_derand.services import verifier
from obp_derand.services.reconstruct import (
    PredictorInput,
    ReconContext,
    StageReport,
    VerificationError,
    full_reconstruction,
)
from obp_derand.utils.config import get_ledger

logger = logging.getLogger(__name__)

REFUTER_MESSAGE = "Unable to compute f(x) because the hardness assumption A is false"


def _frac(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


@dataclass
class Estimate:
    value: Fraction
    certificate: verifier.Certified
    assembly: Dict[str, Any] = field(default_factory=dict)

    kind = "estimate"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "value": _frac(self.value),
            "error_bound": _frac(self.certificate.error_bound),
            "certificate": self.certificate.to_dict(),
            "assembly": self.assembly,
        }


@dataclass
class Refuter:
    evaluator: Evaluator
    verified: bool
    predictor: verifier.Predictor
    reports: List[StageReport]
    hardness_bound: float = 0.0

    kind = "refuter"
    message = REFUTER_MESSAGE

    @property
    def size(self) -> int:
        return self.evaluator.size

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "message": self.message,
            "verified": self.verified,
            "size": self.size,
            "hardness_bound": self.hardness_bound,
            "predictor": self.predictor.to_dict(),
            "stages": [r.to_dict() for r in self.reports],
            "evaluator": evaluator_to_dict(self.evaluator),
        }


PipelineResult = Union[Estimate, Refuter]


def padded_length(b: Obp, exponent: Optional[int] = None) -> int:
    """max(n, w)^c with c from the ledger unless given."""
    c = get_ledger().padding_exponent if exponent is None else exponent
    return max(b.n, b.width, 1) ** c


def certified_estimate_or_refuter(
    b: Obp,
    f: HardFunction,
    eps_hard: Any = Fraction(1, 2),
    *,
    profile: Sequence[str] = DESK_PROFILE,
    nw_seed_len: Optional[int] = None,
    design: Optional[Design] = None,
    ctx: Optional[ReconContext] = None,
) -> PipelineResult:
    """
    Estimate E[B] with error at most 1/4, or refute the hardness of f.

    Args:
        b: The program to estimate; padded to length max(n, w)^c.
        f: Truth table of the candidate hard function.
        eps_hard: Hardness exponent; sets the direct-product γ and the
            reported 2^(ε·m) size scale.
        profile: Generator stages, ending in ``nw``.
        nw_seed_len: Override for the NW seed length. The default gives every
            design set a private last index, and with the balanced inner
            product stage that makes the generator output exactly uniform.
        design: Explicit NW design with one set per padded output bit; overrides
            ``nw_seed_len``.
        ctx: Reconstruction context (ledger, stage log, seed budgets).

    Raises:
        CapacityError: the generator or a reconstruction stage exceeds the cap.
        ReconstructionError: a stage could not be inverted; only reachable with
            an ``nw_seed_len`` or ``design`` whose sets share their last index.
        VerificationError: the reconstructed evaluator does not compute f.
    """
    eps_hard = Fraction(eps_hard)
    n_target = padded_length(b)
    padded = pad(b, n_target, n_target)
    assembly: IwAssembly = assemble_iw_generator(
        f, eps_hard, n_target, profile, design=design, nw_seed_len=nw_seed_len
    )
    eps_test = Fraction(1, 4 * n_target)
    verdict = verifier.test_fools(padded, assembly.prg, eps_test)

    if isinstance(verdict, verifier.Certified):
        logger.info("Certified estimate %s (error bound %s)", verdict.estimate, verdict.error_bound)
        return Estimate(verdict.estimate, verdict, assembly.to_dict())

    ctx = ctx or ReconContext()
    predictor = PredictorInput(
        evaluator=ObpEval(verdict.program),
        claimed_advantage=verdict.advantage,
        bit_index=verdict.layer,
    )
    logger.info(
        "Generator broken at bit %d (advantage %s); reconstructing f", verdict.layer, verdict.advantage
    )
    evaluator = full_reconstruction(ctx, assembly, predictor)
    if not truth_table_of(evaluator).equals(f.table):
        raise VerificationError("Refuter evaluator disagrees with f")
    return Refuter(
        evaluator=evaluator,
        verified=True,
        predictor=verdict,
        reports=list(ctx.reports),
        hardness_bound=2.0 ** float(eps_hard * f.m),
    )
