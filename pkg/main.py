"""CLI entrypoint for programs, generators, reconstruction, derandomizers and evals."""

import argparse
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from dotenv import load_dotenv

from evals.campaigns import run_evals
from obp_derand.evaluators.evaluator import Table
from obp_derand.evaluators.evaluator import to_dict as evaluator_to_dict
from obp_derand.generators.assembly import (
    DESK_PROFILE,
    assemble_iw_generator,
    assemble_repeated,
    gl_table,
    rm_encode,
    rm_params,
)
from obp_derand.generators.predictors import best_next_bit_predictor
from obp_derand.generators.prg import HardFunction
from obp_derand.pipeline import Estimate, certified_estimate_or_refuter
from obp_derand.programs import obp as obp_core
from obp_derand.services import verifier
from obp_derand.services.bbtest import (
    ExhaustiveBlockSource,
    HsgBlockSource,
    OracleObp,
    bb_sampler,
    sample_count,
)
from obp_derand.services.reconstruct import PredictorInput, ReconContext, full_reconstruction, gl_recon, rm_recon
from obp_derand.services.universal import univ_derand
from obp_derand.tools import build_generator, build_hitting_set, build_registry
from obp_derand.utils.bits import format_bits, parse_bits
from obp_derand.utils.config import configure, get_ledger
from obp_derand.utils.output_parser import dump_canonical, write_report
from obp_derand.utils.run_id import get_run_id, set_run_id
from obp_derand.utils.stage_log import StageLog

load_dotenv()


logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s %(levelname)s %(name)s %(message)s",
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_WITNESS = 2

Outcome = Tuple[Dict[str, Any], int]


def _frac(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def _load_obp(path: str) -> obp_core.Obp:
    return obp_core.from_json(Path(path).read_text(encoding="utf-8"))


def _load_hard(path: str) -> HardFunction:
    return HardFunction.from_text(Path(path).read_text(encoding="utf-8"), provenance=path)


def _write_obp(b: obp_core.Obp, out: Optional[str]) -> Optional[str]:
    if not out:
        return None
    Path(out).write_text(obp_core.to_json(b) + "\n", encoding="utf-8")
    return out


# ------------------------- commands -------------------------


def cmd_obp(args: argparse.Namespace) -> Outcome:
    action = args.obp_command
    if action == "gen":
        rng = np.random.default_rng(args.seed)
        b = obp_core.random_obp(args.n, args.w, rng, binary=not args.fractional)
        return {"command": "obp gen", "seed": args.seed, "file": _write_obp(b, args.out), "obp": obp_core.to_dict(b)}, EXIT_OK
    b = _load_obp(args.file)
    if action == "eval":
        x = parse_bits(args.x)
        return {"command": "obp eval", "x": format_bits(x), "value": _frac(obp_core.evaluate(b, x))}, EXIT_OK
    if action == "prob":
        return {"command": "obp prob", "prob": _frac(obp_core.expectation(b))}, EXIT_OK
    if action == "amplify":
        amplified = obp_core.majority_amplify(b, args.d)
        return {
            "command": "obp amplify",
            "d": args.d,
            "prob": _frac(obp_core.expectation(amplified)),
            "file": _write_obp(amplified, args.out),
        }, EXIT_OK
    padded = obp_core.pad(b, args.n, args.w)
    return {"command": "obp pad", "prob": _frac(obp_core.expectation(padded)), "file": _write_obp(padded, args.out)}, EXIT_OK


def cmd_verify(args: argparse.Namespace) -> Outcome:
    b = _load_obp(args.obp)
    g = build_generator(args.prg, b.n)
    verdict = verifier.test_fools(b, g, Fraction(args.eps))
    report = {"command": "verify", "generator": g.provenance(), **verdict.to_dict()}
    code = EXIT_OK if isinstance(verdict, verifier.Certified) else EXIT_WITNESS
    return report, code


def cmd_recon(args: argparse.Namespace) -> Outcome:
    f = _load_hard(args.f)
    log = StageLog(name=f"recon_{args.recon_command}", timestamps=False)
    ctx = ReconContext(log=log)
    if args.recon_command == "rm":
        params = rm_params(f.m)
        encoded, _ = rm_encode(f.table, params)
        rows = encoded.rows.copy()
        rng = np.random.default_rng(args.seed)
        flips = rng.choice(rows.shape[0], size=int(rows.shape[0] * float(Fraction(args.noise))), replace=False)
        rows[flips, 0] ^= 1
        evaluator = rm_recon(ctx, f.table, Table(encoded.input_len, rows), params)
        extra: Dict[str, Any] = {"corrupted": len(flips)}
    elif args.recon_command == "gl":
        g = gl_table(f.table)
        evaluator = gl_recon(ctx, f.table, g.as_evaluator(), Fraction(args.delta))
        extra = {"delta": args.delta}
    else:
        profile = tuple(args.profile.split("/")) if args.profile else DESK_PROFILE
        if args.design == "repeated":
            assembly = assemble_repeated(f, Fraction(1, 2), args.n, profile)
        else:
            assembly = assemble_iw_generator(f, Fraction(1, 2), args.n, profile, nw_seed_len=args.s)
        bit, table, adv = best_next_bit_predictor(assembly.prg)
        predictor = PredictorInput(evaluator=table, claimed_advantage=adv, bit_index=bit)
        evaluator = full_reconstruction(ctx, assembly, predictor)
        extra = {"bit_index": bit, "advantage": _frac(adv), "assembly": assembly.to_dict()}
    log.save()
    return {
        "command": f"recon {args.recon_command}",
        "verified": True,
        "size": evaluator.size,
        "stages": [r.to_dict() for r in ctx.reports],
        "evaluator": evaluator_to_dict(evaluator),
        **extra,
    }, EXIT_WITNESS


def cmd_estimate(args: argparse.Namespace) -> Outcome:
    b = _load_obp(args.obp)
    f = _load_hard(args.f)
    profile = tuple(args.profile.split("/")) if args.profile else DESK_PROFILE
    result = certified_estimate_or_refuter(b, f, Fraction(args.eps_hard), profile=profile, nw_seed_len=args.s)
    code = EXIT_OK if isinstance(result, Estimate) else EXIT_WITNESS
    return {"command": "estimate", **result.to_dict()}, code


def cmd_univ(args: argparse.Namespace) -> Outcome:
    b = _load_obp(args.obp)
    n = args.n or max(b.n, b.width, 2)
    result = univ_derand(n, b, build_registry(args.registry), max_phase=args.max_phase)
    return {"command": "univ run", "n": n, **result.to_dict()}, EXIT_OK


def cmd_bbtest(args: argparse.Namespace) -> Outcome:
    b = _load_obp(args.obp)
    eps = Fraction(args.eps)
    oracle = OracleObp.from_obp(b)
    h = build_hitting_set(args.hsg, b.n, eps / (6 * b.n))
    if args.h2:
        t = args.t or sample_count(b.n, b.width, eps / (6 * b.n))
        h2 = build_hitting_set(args.h2, b.n * b.width * t * b.n, Fraction(1, 3))
        source = HsgBlockSource(h2, b.n, b.width, t)
    else:
        source = ExhaustiveBlockSource(b.n)
    result = bb_sampler(oracle, h, source, eps)
    return {"command": "bbtest sample", **result.to_dict()}, EXIT_OK


def cmd_evals(args: argparse.Namespace) -> Outcome:
    summary = run_evals(scale=Fraction(args.scale), seed=args.seed)
    code = EXIT_OK if summary["passed"] else EXIT_ERROR
    return {"command": "evals", **summary}, code


# ------------------------- parser -------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Verifiable derandomization of ordered branching programs.")
    parser.add_argument("--cap", type=int, help="Enumeration cap for seeds and inputs.")
    parser.add_argument("--constants-ledger", type=str, help="JSON file overriding the constants ledger.")
    parser.add_argument("--json-out", type=str, help="Also write the JSON report to this path.")
    parser.add_argument("--run-id", type=str, help="Pin the run id used for output/<run_id>/.")
    commands = parser.add_subparsers(dest="command", required=True)

    obp = commands.add_parser("obp", help="Generate, evaluate and transform programs.")
    obp_commands = obp.add_subparsers(dest="obp_command", required=True)
    gen = obp_commands.add_parser("gen")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--w", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--fractional", action="store_true", help="Labels in {0, 1/8, ..., 1}.")
    gen.add_argument("--out", type=str)
    ev = obp_commands.add_parser("eval")
    ev.add_argument("--file", required=True)
    ev.add_argument("--x", required=True)
    prob = obp_commands.add_parser("prob")
    prob.add_argument("--file", required=True)
    amp = obp_commands.add_parser("amplify")
    amp.add_argument("--file", required=True)
    amp.add_argument("--d", type=int, required=True)
    amp.add_argument("--out", type=str)
    pad = obp_commands.add_parser("pad")
    pad.add_argument("--file", required=True)
    pad.add_argument("--n", type=int, required=True)
    pad.add_argument("--w", type=int, required=True)
    pad.add_argument("--out", type=str)

    verify = commands.add_parser("verify", help="Run the next-bit tester on a program and generator.")
    verify.add_argument("--obp", required=True)
    verify.add_argument("--prg", default="enumerate", help="Generator spec, e.g. smallbias:eps=1/16.")
    verify.add_argument("--eps", default="1/4")

    recon = commands.add_parser("recon", help="Reconstruct a hard function from a broken stage.")
    recon_commands = recon.add_subparsers(dest="recon_command", required=True)
    rm = recon_commands.add_parser("rm")
    rm.add_argument("--f", required=True)
    rm.add_argument("--noise", default="1/200")
    rm.add_argument("--seed", type=int, default=0)
    gl = recon_commands.add_parser("gl")
    gl.add_argument("--f", required=True)
    gl.add_argument("--delta", default="1/2")
    full = recon_commands.add_parser("full")
    full.add_argument("--f", required=True)
    full.add_argument("--n", type=int, default=2)
    full.add_argument("--s", type=int, help="NW seed length for the greedy design.")
    full.add_argument(
        "--design",
        choices=["repeated", "greedy"],
        default="repeated",
        help="NW design: repeated sets give a perfect predictor; greedy is the default generator.",
    )
    full.add_argument("--profile", type=str, help="Stages joined by '/': xor/gl/nw or rm/xor/gl/nw.")
    full.add_argument("--predictor", choices=["bayes"], default="bayes")

    estimate = commands.add_parser("estimate", help="Certified estimate or hardness refuter.")
    estimate.add_argument("--obp", required=True)
    estimate.add_argument("--f", required=True)
    estimate.add_argument("--eps-hard", default="1/2")
    estimate.add_argument("--s", type=int)
    estimate.add_argument("--profile", type=str)

    univ = commands.add_parser("univ", help="Universal derandomizer.")
    univ_commands = univ.add_subparsers(dest="univ_command", required=True)
    univ_run = univ_commands.add_parser("run")
    univ_run.add_argument("--obp", required=True)
    univ_run.add_argument("--registry", default="default")
    univ_run.add_argument("--n", type=int)
    univ_run.add_argument("--max-phase", type=int)

    bb = commands.add_parser("bbtest", help="Black-box sampler.")
    bb_commands = bb.add_subparsers(dest="bbtest_command", required=True)
    sample = bb_commands.add_parser("sample")
    sample.add_argument("--obp", required=True, help="Hidden program; only queried.")
    sample.add_argument("--hsg", default="enumerate")
    sample.add_argument("--eps", default="1/5")
    sample.add_argument("--h2", type=str, help="Spec of the hitting set for sample blocks.")
    sample.add_argument("--t", type=int, help="Samples per block when --h2 is given.")

    evals = commands.add_parser("evals", help="Run the acceptance campaigns.")
    evals.add_argument("--scale", default="1", help="Fraction of the full campaign sizes.")
    evals.add_argument("--seed", type=int, default=0)
    return parser


HANDLERS = {
    "obp": cmd_obp,
    "verify": cmd_verify,
    "recon": cmd_recon,
    "estimate": cmd_estimate,
    "univ": cmd_univ,
    "bbtest": cmd_bbtest,
    "evals": cmd_evals,
}


def _emit(report: Dict[str, Any], json_out: Optional[str]) -> None:
    text = dump_canonical(report)
    sys.stdout.write(text)
    if json_out:
        path = Path(json_out)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        tmp.replace(path)


def main(argv: Optional[List[str]] = None) -> int:
    """Parse CLI arguments, dispatch, and map the outcome to an exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.run_id:
        set_run_id(args.run_id)

    try:
        configure(
            enum_cap=args.cap,
            ledger_path=Path(args.constants_ledger) if args.constants_ledger else None,
        )
        report, code = HANDLERS[args.command](args)
    except Exception as e:
        logger.error("%s failed: %s", args.command, e)
        sys.stderr.write(f"error: {e}\n")
        if args.json_out:
            _emit({"command": args.command, "error": type(e).__name__, "message": str(e)}, args.json_out)
        return EXIT_ERROR

    report["ledger"] = get_ledger().snapshot()
    write_report(args.command, report)
    _emit(report, args.json_out)
    logger.info("Report written under run %s (exit %d)", get_run_id(), code)
    return code


if __name__ == "__main__":
    sys.exit(main())
