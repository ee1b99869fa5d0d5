import argparse
import logging
import os
import sys
from typing import List, Optional

from config.settings import CENSUS_CHECKPOINT_EVERY, CENSUS_PARALLELISM, DEFAULT_SEED, REPORT_DIR, ZSIGMONDY_MAX_E
from subspace_designs.census import STRATEGIES
from subspace_designs.errors import BudgetExceeded, QDesignError
from subspace_designs.formats import write_census
from subspace_designs.pipelines import REPRODUCTIONS, parse_group_spec, run_census, run_params, run_verify
from subspace_designs.qarith import DesignParams
from subspace_designs.reports import PipelineReport
from utils.helpers import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_REFUTED = 2
EXIT_BUDGET = 3


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(parser: argparse.ArgumentParser, suppress: bool = False):
    # subcommand copies default to SUPPRESS so they only override when given
    def default(value):
        return argparse.SUPPRESS if suppress else value

    parser.add_argument("--seed", type=int, default=default(DEFAULT_SEED))
    parser.add_argument("--parallelism", type=int, default=default(CENSUS_PARALLELISM))
    parser.add_argument("--budget-seconds", type=float, default=default(None),
                        help="wall-clock budget for censuses, exit code 3 when exceeded")
    parser.add_argument("--json", action="store_true", default=default(False), help="print the report as JSON")
    parser.add_argument("--report-dir", default=default(REPORT_DIR))


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    _add_common(common, suppress=True)

    parser = _Parser(prog="qdesign", description="Subspace design arithmetic, orbit censuses and verification")
    _add_common(parser)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    params = sub.add_parser("params", parents=[common], help="arithmetic admissibility of t-(d,k,lambda)_q")
    params.add_argument("-t", "--t", type=int, required=True)
    params.add_argument("-d", "--d", type=int, required=True)
    params.add_argument("-k", "--k", type=int, required=True)
    params.add_argument("-l", "--lambda", dest="lam", type=int, required=True)
    params.add_argument("-q", "--q", type=int, required=True)
    params.add_argument("--group-order", type=int, default=None)

    census = sub.add_parser("census", parents=[common], help="orbit census of a group on k-subspaces")
    census.add_argument("--group", required=True,
                        help="trivial, gamma-l1, hyperplane-levi:K, hyperplane-levi:H or custom:<path>")
    census.add_argument("--p", type=int, default=2)
    census.add_argument("--d", type=int, required=True)
    census.add_argument("--k", type=int, required=True)
    census.add_argument("--poly", default=None, help="primitive polynomial for gamma-l1, e.g. x^11+x^2+1")
    census.add_argument("--strategy", choices=STRATEGIES, default="sampled")
    census.add_argument("--checkpoint", default=None)
    census.add_argument("--checkpoint-every", type=int, default=CENSUS_CHECKPOINT_EVERY)
    census.add_argument("--output", default=None, help="census file (defaults to the checkpoint path)")
    census.add_argument("--force", action="store_true", help="lift the full-scan size guard")

    verify = sub.add_parser("verify", parents=[common], help="verify a block file or every orbit of a census")
    verify.add_argument("path")
    verify.add_argument("-t", "--t", type=int, default=2)
    verify.add_argument("-l", "--lambda", dest="lam", type=int, default=None)

    reproduce = sub.add_parser("reproduce", parents=[common], help="rerun a named computation")
    reproduce.add_argument("lemma", choices=sorted(REPRODUCTIONS))
    reproduce.add_argument("--p", type=int, default=None)
    reproduce.add_argument("--d", type=int, default=None)
    reproduce.add_argument("--k", type=int, default=None)
    reproduce.add_argument("--lambda", dest="lam", type=int, default=None)
    reproduce.add_argument("--max-e", type=int, default=ZSIGMONDY_MAX_E)
    reproduce.add_argument("--checkpoint", default=None)
    return parser


def _emit(report: PipelineReport, args) -> int:
    report.save(args.report_dir)
    print(report.to_json() if args.json else report.render())
    return EXIT_OK if report.holds else EXIT_REFUTED


def cmd_params(args) -> int:
    report = run_params(DesignParams.from_q(args.t, args.d, args.k, args.lam, args.q), args.group_order)
    if not report.holds:
        logger.info(f"Refuted by {', '.join(report.outputs['refuted_by'])}")
    return _emit(report, args)


def cmd_census(args) -> int:
    group = parse_group_spec(args.group, args.d, args.p, args.poly)
    output = args.output or args.checkpoint or os.path.join(
        args.report_dir, f"census-{args.group.split(':')[0]}-{args.p}-{args.d}-{args.k}.census"
    )
    census, report = run_census(
        group, args.d, args.k, args.strategy, args.seed, args.parallelism,
        args.budget_seconds, args.checkpoint, args.checkpoint_every, args.force,
    )
    if output != args.checkpoint:
        os.makedirs(os.path.dirname(os.path.abspath(output)), exist_ok=True)
        write_census(census, output)
    report.outputs["census_file"] = output
    return _emit(report, args)


def cmd_verify(args) -> int:
    report = run_verify(args.path, args.t, args.lam, args.seed, args.parallelism, args.budget_seconds)
    return _emit(report, args)


def cmd_reproduce(args) -> int:
    pipeline = REPRODUCTIONS[args.lemma]
    overrides = {key: value for key, value in (("p", args.p), ("d", args.d), ("k", args.k)) if value is not None}
    if args.lemma == "zsigmondy-scan":
        kwargs = {"max_e": args.max_e}
        if args.p is not None:
            kwargs["primes"] = (args.p,)
    elif args.lemma == "singer-scan":
        kwargs = {}
    elif args.lemma == "lemma-3-5":
        kwargs = {**overrides, "seed": args.seed, "parallelism": args.parallelism,
                  "budget_seconds": args.budget_seconds, "checkpoint": args.checkpoint}
        if args.lam is not None:
            kwargs["lam"] = args.lam
    else:
        kwargs = overrides
    return _emit(pipeline(**kwargs), args)


COMMANDS = {
    "params": cmd_params,
    "census": cmd_census,
    "verify": cmd_verify,
    "reproduce": cmd_reproduce,
}


def main(argv: Optional[List[str]] = None) -> int:
    setup_logging(__name__)
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except BudgetExceeded as e:
        logger.error(f"Budget exceeded: {str(e)}")
        return EXIT_BUDGET
    except (QDesignError, OSError, ValueError, KeyError) as e:
        logger.error(f"Error in {args.command}: {str(e)}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
