import argparse
import json
import logging
import os
import secrets
import sys
from typing import List, Optional

from trickbounds.debruijn import (
    EULERIAN_RANDOM,
    GREEDY_LEAST,
    STRATEGIES,
    DeBruijnSpec,
    db_count,
    db_count_bits,
    db_enumerate,
    db_generate,
    db_verify,
)
from trickbounds.entropy import CONVENTIONS, DEFAULT_EPSILON, LINEAR, compressibility_report
from trickbounds.errors import BoundsError, ConfigError
from trickbounds.experiments import (
    ADVERSARIES,
    DISTINGUISHERS,
    EXPERIMENTS,
    TRICK_PREARRANGED,
    TRICK_SHUFFLED,
    crossing_point,
    default_config,
    prearranged_exhaustive,
    run_experiment,
    run_sweep,
)
from trickbounds.performance_profile import PerformanceProfiler, save_records
from trickbounds.sources import PREARRANGED_DRAW
from trickbounds.textcore import DIGIT_TEXT, MODES, RngSpec, parse_sequence, read_sequence

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VIOLATED = 2

WORKERS_ENV = "TRICKBOUNDS_WORKERS"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

SWEEP_TYPES = {
    "n": int, "sigma": int, "k": int, "m": int, "draw": int, "trials": int,
    "resample_limit": int, "epsilon": float, "distinguisher": str, "adversary": str,
}


def setup_logging(level: str = "WARNING"):
    # force=True so a second cli_main call in the same process picks up the new level
    logging.basicConfig(
        level=getattr(logging, level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        handlers=[logging.StreamHandler()],
        force=True,
    )


class CliParser(argparse.ArgumentParser):
    """Usage errors exit with status 1 instead of argparse's 2 (2 means a violated bound)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_output_flags(parser: argparse.ArgumentParser, top_level: bool):
    # subcommands accept the same flags; SUPPRESS keeps them from clobbering top-level values
    default = (lambda value: value) if top_level else (lambda value: argparse.SUPPRESS)
    parser.add_argument("--format", choices=["table", "records"], default=default("table"),
                        help="Human-readable table or one JSON record per line")
    parser.add_argument("--profile", action="store_true", default=default(False),
                        help="Time the run and add 'elapsed' to records")
    parser.add_argument("--save", type=str, metavar="PREFIX", default=default(None),
                        help="Append records to PREFIX.csv and rewrite PREFIX.json")
    parser.add_argument("--log_level", choices=LOG_LEVELS, default=default("WARNING"),
                        help="Logging level for stderr diagnostics")


def _add_run_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--trials", type=int, help="Number of Monte Carlo trials T")
    parser.add_argument("--seed", type=int, help="64-bit master seed (random when omitted)")
    parser.add_argument("--workers", type=int,
                        help=f"Worker threads (default ${WORKERS_ENV} or 1); results do not depend on it")
    parser.add_argument("--draw", type=int, help="Cards drawn d")


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(prog="main.py", description="Empirical entropy, De Bruijn and card-trick bound checker")
    _add_output_flags(parser, top_level=True)
    commands = parser.add_subparsers(dest="command", required=True)

    entropy = commands.add_parser("entropy", help="Compressibility report H_0..H_k of a string")
    _add_output_flags(entropy, top_level=False)
    entropy.add_argument("input", nargs="?", help="Input file (omit with --inline)")
    entropy.add_argument("--inline", type=str, help="Digit-text string given on the command line")
    entropy.add_argument("--k", type=str, default="0..4", help="Context lengths, A..B or a single value")
    entropy.add_argument("--sigma", type=int, help="Alphabet size (inferred when omitted)")
    entropy.add_argument("--convention", choices=CONVENTIONS, default=LINEAR)
    entropy.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    entropy.add_argument("--mode", choices=MODES, default=DIGIT_TEXT, help="How to read the input file")

    debruijn = commands.add_parser("debruijn", help="Generate, verify, count or enumerate De Bruijn cycles")
    _add_output_flags(debruijn, top_level=False)
    debruijn.add_argument("action", choices=["gen", "verify", "count", "bits", "enum"])
    debruijn.add_argument("input", nargs="?", help="Candidate file for verify")
    debruijn.add_argument("--sigma", type=int, required=True)
    debruijn.add_argument("--order", type=int, required=True)
    debruijn.add_argument("--strategy", choices=STRATEGIES, default=GREEDY_LEAST)
    debruijn.add_argument("--seed", type=int, help="Seed for eulerian-random")
    debruijn.add_argument("--inline", type=str, help="Digit-text candidate for verify")
    debruijn.add_argument("--mode", choices=MODES, default=DIGIT_TEXT)

    experiment = commands.add_parser("experiment", help="Run one Monte Carlo bound check")
    _add_output_flags(experiment, top_level=False)
    experiment.add_argument("name", choices=sorted(EXPERIMENTS))
    _add_run_flags(experiment)
    experiment.add_argument("--n", type=int)
    experiment.add_argument("--sigma", type=int)
    experiment.add_argument("--k", type=int)
    experiment.add_argument("--m", type=int)
    experiment.add_argument("--distinguisher", choices=DISTINGUISHERS)
    experiment.add_argument("--adversary", choices=ADVERSARIES)
    experiment.add_argument("--epsilon", type=float)
    experiment.add_argument("--resample_limit", type=int)
    experiment.add_argument("--sweep", type=str, metavar="FIELD=V1,V2,...",
                            help="Repeat the run for each value of FIELD, e.g. m=64,128,256")

    trick = commands.add_parser("trick", help="Simulate the card trick")
    _add_output_flags(trick, top_level=False)
    trick.add_argument("variant", choices=["prearranged", "shuffled"])
    _add_run_flags(trick)
    trick.add_argument("--exhaustive", action="store_true",
                       help="Prearranged only: try every cut and every draw position")
    return parser


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------
def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, dict):
        return ",".join(f"{k}={_fmt(v)}" for k, v in value.items())
    return str(value)


def print_table(rows: List[dict], columns: List[str]):
    cells = [[_fmt(row.get(col, "")) for col in columns] for row in rows]
    widths = [max([len(col)] + [len(r[i]) for r in cells]) for i, col in enumerate(columns)]
    print("  ".join(col.ljust(w) for col, w in zip(columns, widths)))
    for r in cells:
        print("  ".join(cell.ljust(w) for cell, w in zip(r, widths)))


def print_records(records: List[dict]):
    for record in records:
        print(json.dumps(record, sort_keys=True))


def emit(args, records: List[dict], columns: List[str]):
    if args.format == "records":
        print_records(records)
    else:
        print_table(records, columns)
    if args.save:
        save_records(records, args.save)


def announce_seed(seed: int):
    print(f"seed: {seed}", file=sys.stderr)
    logger.info(f"Effective master seed: {seed}")


def resolve_seed(seed: Optional[int]) -> int:
    if seed is None:
        seed = secrets.randbits(64)
    RngSpec(seed)
    announce_seed(seed)
    return seed


def resolve_workers(workers: Optional[int]) -> int:
    if workers is not None:
        return workers
    env = os.environ.get(WORKERS_ENV)
    if env is None:
        return 1
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"${WORKERS_ENV} must be an integer, got {env!r}") from None


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------
def parse_k_range(text: str):
    lo, sep, hi = text.partition("..")
    try:
        lo_k = int(lo)
        hi_k = int(hi) if sep else lo_k
    except ValueError:
        raise ConfigError(f"--k expects A..B or a single integer, got {text!r}") from None
    if lo_k < 0 or hi_k < lo_k:
        raise ConfigError(f"--k range must satisfy 0 <= A <= B, got {text!r}")
    return lo_k, hi_k


def _read_input(args):
    if (args.inline is None) == (args.input is None):
        raise ConfigError("give exactly one of an input path or --inline")
    if args.inline is not None:
        return parse_sequence(args.inline.encode("ascii", errors="replace"), DIGIT_TEXT, args.sigma)
    return read_sequence(args.input, args.mode, args.sigma)


def cmd_entropy(args) -> int:
    lo_k, hi_k = parse_k_range(args.k)
    seq = _read_input(args)
    logger.info(f"Compressibility report: n={len(seq)} sigma={seq.sigma} k={lo_k}..{hi_k} {args.convention}")
    rows = [row.as_record() for row in compressibility_report(seq, hi_k, args.epsilon, args.convention)
            if row.report.k >= lo_k]
    emit(args, rows, ["k", "h_value", "total_bits", "context_count", "thresholds"])
    return EXIT_OK


def cmd_debruijn(args) -> int:
    spec = DeBruijnSpec(args.sigma, args.order)
    params = {"sigma": spec.sigma, "order": spec.order}
    if args.action == "gen":
        rng = None
        record = dict(params, strategy=args.strategy)
        if args.strategy == EULERIAN_RANDOM:
            seed = resolve_seed(args.seed)
            rng = RngSpec(seed)
            record["seed"] = seed
        record["sequence"] = str(db_generate(spec, args.strategy, rng).seq)
        if args.format == "records":
            emit(args, [record], [])
        else:
            print(record["sequence"])
        return EXIT_OK

    if args.action == "verify":
        # alphabet inferred so out-of-range symbols surface as a failed verification
        args.sigma = None
        candidate = _read_input(args)
        result = db_verify(candidate, spec)
        record = dict(params, ok=result.ok, reason=result.describe(), position=result.position,
                      first_position=result.first_position,
                      duplicate=list(result.duplicate) if result.duplicate is not None else None)
        if args.format == "records":
            emit(args, [record], [])
        else:
            print(result.describe())
        if not result:
            logger.error(f"Not a De Bruijn cycle: {result.describe()}")
            return EXIT_VIOLATED
        return EXIT_OK

    if args.action == "count":
        count = db_count(spec)
        if args.format == "records":
            emit(args, [dict(params, count=count)], [])
        else:
            print(count)
        return EXIT_OK

    if args.action == "bits":
        bits = db_count_bits(spec)
        emit(args, [dict(params, log2_count=bits.log2_count, ratio=bits.ratio)], ["sigma", "order", "log2_count", "ratio"])
        return EXIT_OK

    cycles = [str(c.seq) for c in db_enumerate(spec)]
    if args.format == "records":
        emit(args, [dict(params, index=i, sequence=s) for i, s in enumerate(cycles)], [])
    else:
        print("\n".join(cycles))
    return EXIT_OK


RESULT_COLUMNS = ["name", "params", "estimate", "stderr", "direction", "bound", "vacuous", "verdict"]


def emit_results(args, results) -> int:
    records = [r.as_record(include_elapsed=args.profile) for r in results]
    columns = RESULT_COLUMNS + (["elapsed"] if args.profile else [])
    emit(args, records, columns)
    for result in results:
        for check in result.checks:
            if not check.consistent:
                logger.error(f"[{result.config.name}] {check.label}: estimate {check.estimate:.6g} "
                             f"{check.direction} {check.value:.6g} (margin {check.margin:.3g}) violated")
    return EXIT_OK if all(r.consistent for r in results) else EXIT_VIOLATED


def _run(args, config, profiler):
    if not args.sweep:
        return [run_experiment(config, profiler)]
    field, sep, values = args.sweep.partition("=")
    if not sep or field not in SWEEP_TYPES:
        raise ConfigError(f"--sweep expects FIELD=V1,V2,... with FIELD in {', '.join(SWEEP_TYPES)}, got {args.sweep!r}")
    try:
        points = [SWEEP_TYPES[field](v) for v in values.split(",") if v]
    except ValueError:
        raise ConfigError(f"bad --sweep values for {field}: {values!r}") from None
    results = run_sweep(config, field, points, profiler)
    crossing = crossing_point(results, field)
    logger.info(f"Sweep over {field}: estimate first reaches 2/3 at {field}={crossing}")
    if args.format == "table":
        print(f"# 2/3 crossing: {field}={crossing}", file=sys.stderr)
    return results


def _export_profile(args, profiler, name):
    if not args.profile:
        return
    logger.info(f"Profile: {profiler.metrics()}")
    if args.save:
        out_dir = os.path.dirname(args.save) or "."
        profiler.export_metrics(name, output_dir=out_dir, filename_prefix=os.path.basename(args.save))


def cmd_experiment(args) -> int:
    overrides = {key: getattr(args, key, None) for key in
                 ("trials", "n", "sigma", "k", "m", "draw", "distinguisher", "adversary", "epsilon", "resample_limit")}
    config = default_config(args.name, workers=resolve_workers(args.workers), **overrides)
    config = config.replace(seed=resolve_seed(args.seed))
    profiler = PerformanceProfiler()
    results = _run(args, config, profiler)
    _export_profile(args, profiler, args.name)
    return emit_results(args, results)


def cmd_trick(args) -> int:
    name = TRICK_PREARRANGED if args.variant == "prearranged" else TRICK_SHUFFLED
    if args.exhaustive:
        if name != TRICK_PREARRANGED:
            raise ConfigError("--exhaustive applies to the prearranged trick only")
        result = prearranged_exhaustive(args.draw if args.draw is not None else PREARRANGED_DRAW)
        return emit_results(args, [result])
    args.name, args.sweep = name, None
    return cmd_experiment(args)


COMMANDS = {"entropy": cmd_entropy, "debruijn": cmd_debruijn, "experiment": cmd_experiment, "trick": cmd_trick}


def cli_main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    setup_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except BoundsError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_USAGE
    except OSError as e:
        logger.error(f"Cannot read input: {e}")
        return EXIT_USAGE


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
