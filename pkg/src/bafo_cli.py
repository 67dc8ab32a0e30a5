#!/usr/bin/env python3
"""
BAFO Auctions - Command Line Tool

Runs, solves and verifies Name-Your-BAFO and descending-with-BAFO procurement
auctions on JSON instance files, checks valuation classes and reproduces the
preset experiments.

Usage:
    python bafo_cli.py run nyb chop.json --order 1,2,0
    python bafo_cli.py run descending gap4.json --h 2
    python bafo_cli.py solve nyb chop-dime.json --order 1,2,0
    python bafo_cli.py verify descending gap4.json strategy.json --h 2
    python bafo_cli.py check chop.json
    python bafo_cli.py experiment cost-gap --n 6 --pdf cost-gap.pdf
    python bafo_cli.py gen --seed 1 --n 3 --max-value 8 --max-cost 6
"""

import argparse
import logging
import os
import sys
from typing import Any, Dict, Optional

# Add src directory to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from backend.experiment_runner import ExperimentRunner, UnknownExperimentError, format_report
from backend.instance_io import (
    InstanceFile,
    InstanceFormatError,
    RandomInstanceSpec,
    StrategyFormatError,
    canonical_json,
    descending_transcript,
    gen_random,
    instance_to_dict,
    nyb_transcript,
    parse_instance_file,
    parse_strategy,
    report_meta,
)
from modules import descending_auction as desc
from modules import nyb_auction as nyb
from modules.valuation_core import (
    GridTooLargeError,
    InstanceTooLargeError,
    InvalidInstanceError,
    ValuationKind,
    WorkBudgetExceededError,
    check_anonymous,
    check_concave_anonymous,
    check_gross_substitutes,
    check_submodular,
    informative_price_levels,
    tiebreak_by_name,
)

logger = logging.getLogger("bafo")

# Exit codes
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FORMAT = 2
EXIT_BUDGET = 3
EXIT_INTERRUPTED = 130

FORMAT_ERRORS = (InstanceFormatError, StrategyFormatError, InvalidInstanceError, UnknownExperimentError)
BUDGET_ERRORS = (WorkBudgetExceededError, InstanceTooLargeError, GridTooLargeError)


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.WARNING if quiet else logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(level=level, format="[%(levelname)s] %(message)s", stream=sys.stderr)


def _read_text(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        raise InstanceFormatError(f"cannot read {path}: {e}") from e


def _load_instance(args: argparse.Namespace) -> InstanceFile:
    loaded = parse_instance_file(_read_text(args.instance))
    if getattr(args, "tiebreak", None):
        tiebreak_by_name(args.tiebreak, loaded.instance.n)
        loaded = InstanceFile(loaded.instance, args.tiebreak, loaded.version)
    return loaded


def _nyb_order(args: argparse.Namespace, n: int) -> nyb.NybOrder:
    if not args.order:
        return nyb.default_order(n)
    try:
        if args.order.startswith("bid-driven:"):
            return nyb.BidDrivenOrder(n, int(args.order.split(":", 1)[1]))
        sellers = tuple(int(s) for s in args.order.split(","))
    except ValueError as e:
        raise InvalidInstanceError(f"bad --order {args.order!r}") from e
    if len(sellers) != n:
        raise InvalidInstanceError(f"--order lists {len(sellers)} sellers, expected {n}")
    return nyb.FixedOrder(sellers)


def _emit(payload: Dict[str, Any], out: Optional[str] = None) -> None:
    text = canonical_json(payload)
    sys.stdout.write(text)
    if out:
        with open(out, "w", encoding="utf-8") as f:
            f.write(text)
        logger.info("[IO] Wrote %s", out)


# ============================================================================
# COMMANDS
# ============================================================================

def cmd_run(args: argparse.Namespace) -> int:
    loaded = _load_instance(args)
    inst, tb = loaded.instance, loaded.tiebreak_rule
    if args.format == "nyb":
        order = _nyb_order(args, inst.n)
        strategy_text = None if args.strategies == "canonical" else _read_text(args.strategies)
        profile = (
            nyb.canonical_profile(inst, tb, order, args.bid_cap)
            if strategy_text is None
            else parse_strategy(strategy_text, "nyb", inst, tb, order, args.bid_cap)
        )
        result = nyb.play(inst, tb, order, profile, args.bid_cap)
        payload = nyb_transcript(result, report_meta(inst, loaded.tiebreak, order.name))
    else:
        ordering = desc.ordering_by_name(args.ordering, inst.n)
        strategies = (
            desc.canonical_strategies(inst, tb, ordering)
            if args.strategies == "canonical"
            else parse_strategy(
                _read_text(args.strategies), "descending", inst, tb, ordering=ordering
            )
        )
        result = desc.run(inst, tb, ordering, strategies, args.h)
        payload = descending_transcript(result, report_meta(inst, loaded.tiebreak, ordering.name))
    _emit(payload, args.out)
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    loaded = _load_instance(args)
    inst, tb = loaded.instance, loaded.tiebreak_rule
    if args.format == "nyb":
        order = _nyb_order(args, inst.n)
        result = nyb.solve_exact(inst, tb, order, args.bid_cap, args.budget, args.threads)
        ordering_name = order.name
        path = [{"seller": seller, "bid": bid} for _, seller, bid in result.path]
    else:
        if args.threads > 1:
            logger.info("[SOLVER] --threads is ignored by the descending solver")
        ordering = desc.ordering_by_name(args.ordering, inst.n)
        result = desc.solve_exact(inst, tb, ordering, args.h, args.budget)
        ordering_name = ordering.name
        path = [
            {"seller": seller, "action": action.value, "prices": list(state.prices)}
            for state, seller, action in result.path
        ]

    outcome = result.outcome
    payload = {
        "format": args.format,
        "spe_winners": list(outcome.winner_ids),
        "spe_prices": [outcome.final_prices[i] if i in outcome.winner_ids else None for i in range(inst.n)],
        "buyer_cost": outcome.buyer_cost,
        "welfare": outcome.welfare,
        "outcome": outcome.to_dict(),
        "path": path,
        "node_count": result.stats.nodes,
        "runtime": round(result.stats.elapsed, 3),
        "meta": report_meta(inst, loaded.tiebreak, ordering_name),
    }
    _emit(payload, args.out)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    loaded = _load_instance(args)
    inst, tb = loaded.instance, loaded.tiebreak_rule
    strategy_text = _read_text(args.strategy)
    if args.format == "nyb":
        order = _nyb_order(args, inst.n)
        profile = parse_strategy(strategy_text, "nyb", inst, tb, order, args.bid_cap)
        check = nyb.verify_spe(inst, tb, order, profile, args.bid_cap, args.budget)
        ordering_name = order.name
    else:
        ordering = desc.ordering_by_name(args.ordering, inst.n)
        profile = parse_strategy(strategy_text, "descending", inst, tb, ordering=ordering)
        check = desc.verify_spe(inst, tb, ordering, profile, args.h, args.budget)
        ordering_name = ordering.name
    payload = {
        "format": args.format,
        "profile": profile.name,
        **check.to_dict(),
        "meta": report_meta(inst, loaded.tiebreak, ordering_name),
    }
    _emit(payload, args.out)
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    loaded = _load_instance(args)
    inst = loaded.instance
    v = inst.valuation

    anonymous = check_anonymous(v)
    if anonymous.passed:
        concave = check_concave_anonymous(v).to_dict()
    else:
        concave = {"passed": None, "note": "not applicable: valuation is not anonymous"}
    if args.gs_cap is not None:
        gs = check_gross_substitutes(v, args.gs_cap)
    else:
        gs = check_gross_substitutes(v, v.max_value, informative_price_levels(v, inst.costs))

    payload = {
        "submodular": check_submodular(v).to_dict(),
        "anonymous": anonymous.to_dict(),
        "concave": concave,
        "gross_substitutes": gs.to_dict(),
        "meta": report_meta(inst, loaded.tiebreak),
    }
    _emit(payload, args.out)
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    runner = ExperimentRunner(budget=args.budget, threads=args.threads)
    report = runner.run(args.name, n=args.n, seed=args.seed)
    if not args.json_only:
        print(format_report(report), file=sys.stderr)
    if args.pdf:
        from backend.pdf_generator import PDFReportGenerator
        PDFReportGenerator().generate_report(args.pdf, report)
    _emit(report, args.out)
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    spec = RandomInstanceSpec(
        seed=args.seed,
        n=args.n,
        max_value=args.max_value,
        max_cost=args.max_cost,
        kind=args.kind,
        monotone=args.monotone,
    )
    generated = gen_random(spec)
    _emit(instance_to_dict(generated.instance, generated.tiebreak), args.out)
    return EXIT_OK


# ============================================================================
# ARGUMENT PARSING
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bafo",
        description="Procurement auctions with best-and-final offers",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Canonical Name-Your-BAFO run in a fixed approach order
  bafo run nyb chop.json --order 1,2,0

  # Descending auction starting at h = 2
  bafo run descending gap4.json --h 2

  # Exact equilibrium with a raised work budget
  BAFO_WORK_BUDGET=5000000 bafo solve descending concave.json --h 10

  # Reproduce the cost-gap experiment with a PDF report
  bafo experiment cost-gap --n 6 --pdf cost-gap.pdf

Exit codes: 0 ok, 1 unexpected error, 2 invalid input, 3 budget exceeded.
        """
    )
    parser.add_argument("--quiet", "-q", action="store_true", help="Only print warnings and errors")
    parser.add_argument("--verbose", "-v", action="store_true", help="Print debug messages")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", "-o", type=str, help="Also write the JSON output to this file")

    auction = argparse.ArgumentParser(add_help=False, parents=[common])
    auction.add_argument("format", choices=["nyb", "descending"], help="Auction format")
    auction.add_argument("instance", help="Instance JSON file")
    auction.add_argument("--tiebreak", type=str, help="Override the instance tie-break")
    auction.add_argument("--order", type=str, help="NYB approach order: 1,2,0 or bid-driven:<pivot>")
    auction.add_argument(
        "--ordering",
        type=str,
        default="lowest-eligible-index",
        help="Descending ordering: lowest-eligible-index, highest-eligible-index or priority:2,0,1",
    )
    auction.add_argument("--h", type=int, help="Descending initial price (default: max value or cost)")
    auction.add_argument("--bid-cap", type=int, help="NYB bid grid cap (default: max value or cost)")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--budget", type=int, help="Work budget (default: BAFO_WORK_BUDGET or 2000000)")
    solver.add_argument("--threads", type=int, default=1, help="Worker threads for the NYB solver")

    subparsers = parser.add_subparsers(dest="command", required=True)

    run_parser = subparsers.add_parser("run", parents=[auction], help="Play the auction forward")
    run_parser.add_argument(
        "--strategies", type=str, default="canonical", help="canonical or a strategy JSON file"
    )
    run_parser.set_defaults(handler=cmd_run)

    solve_parser = subparsers.add_parser("solve", parents=[auction, solver], help="Exact equilibrium")
    solve_parser.set_defaults(handler=cmd_solve)

    verify_parser = subparsers.add_parser("verify", parents=[auction, solver], help="Check a strategy profile")
    verify_parser.add_argument("strategy", help="Strategy JSON file")
    verify_parser.set_defaults(handler=cmd_verify)

    check_parser = subparsers.add_parser("check", parents=[common], help="Valuation class checks")
    check_parser.add_argument("instance", help="Instance JSON file")
    check_parser.add_argument("--gs-cap", type=int, help="Use the full grid 0..cap for gross substitutes")
    check_parser.set_defaults(handler=cmd_check)

    experiment_parser = subparsers.add_parser(
        "experiment", parents=[common, solver], help="Reproduce a preset experiment"
    )
    experiment_parser.add_argument("name", help=", ".join(ExperimentRunner.EXPERIMENTS))
    experiment_parser.add_argument("--n", type=int, default=4, help="Sellers for cost-gap (default: 4)")
    experiment_parser.add_argument("--seed", type=int, help="Seed recorded in the report")
    experiment_parser.add_argument("--pdf", type=str, help="Write a PDF report to this path")
    experiment_parser.add_argument("--json-only", action="store_true", help="Skip the text report")
    experiment_parser.set_defaults(handler=cmd_experiment)

    gen_parser = subparsers.add_parser("gen", parents=[common], help="Generate a random instance")
    gen_parser.add_argument("--seed", type=int, required=True)
    gen_parser.add_argument("--n", type=int, required=True)
    gen_parser.add_argument("--max-value", type=int, default=8)
    gen_parser.add_argument("--max-cost", type=int, default=6)
    gen_parser.add_argument("--kind", choices=[k.value for k in ValuationKind], default="explicit")
    gen_parser.add_argument("--monotone", action="store_true", help="Repair explicit/anonymous values to be monotone")
    gen_parser.set_defaults(handler=cmd_gen)
    return parser


def main(argv: Optional[list] = None) -> int:
    """Main CLI entry point"""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose, args.quiet)

    try:
        return args.handler(args)
    except KeyboardInterrupt:
        print("\n\nInterrupted by user", file=sys.stderr)
        return EXIT_INTERRUPTED
    except FORMAT_ERRORS as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_FORMAT
    except BUDGET_ERRORS as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except Exception as e:
        print(f"\nError: {e}", file=sys.stderr)
        import traceback
        if not args.quiet:
            print("\nStack trace:", file=sys.stderr)
            traceback.print_exc()
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
