"""Command-line driver for the recovery experiments.

Commands:

  sparsid run --preset <name> --seed <u64> --out <dir> [--jobs <k>]
  sparsid run --config <file.yaml> --out <dir> [--seed <u64>] [--jobs <k>]
  sparsid diagnose <config>          # preset name or YAML path
  sparsid report <trials.jsonl>      # recompute table rows
  sparsid coherence --poles <csv> --n2 <k> [--depth <D>]

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 solver
failure across every trial of a run.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys

from . import experiments
from .experiments import ConfigError
from .rational_basis import PoleSequence, basis_coherence

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_SOLVER = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsid",
        description="Sparse rational system identification experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset or config file")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help=f"one of: {', '.join(experiments.PRESET_NAMES)}")
    src.add_argument("--config", help="YAML experiment config file")
    run.add_argument("--seed", type=int, default=None,
                     help="master seed (default 0 for presets, config value otherwise)")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--jobs", type=int, default=None,
                     help="parallel trial workers (default: cpu count)")

    diag = sub.add_parser("diagnose", help="pre-flight coherence/bound report")
    diag.add_argument("config", help="preset name or YAML config path")
    diag.add_argument("--seed", type=int, default=0)
    diag.add_argument("--delta", type=float, default=0.1,
                      help="failure probability in the measurement bound")

    rep = sub.add_parser("report", help="recompute table rows from trials.jsonl")
    rep.add_argument("trials", help="path to a trials.jsonl file")

    coh = sub.add_parser("coherence", help="mutual coherence of a pole sequence")
    coh.add_argument("--poles", required=True,
                     help="comma-separated real poles, e.g. 0.5,0.7")
    coh.add_argument("--n2", type=int, required=True,
                     help="number of TM basis functions")
    coh.add_argument("--depth", type=int, default=None,
                     help="impulse-response truncation depth")
    return parser


def _configs_for(name_or_path: str, seed: int):
    """Resolve a preset name or a YAML path to config rows plus a seed."""
    if name_or_path in experiments.PRESET_NAMES:
        return experiments.preset(name_or_path).rows, seed
    config, file_seed = experiments.load_config(name_or_path)
    return (config,), (seed if seed is not None else file_seed)


def _cmd_run(args) -> int:
    if args.preset:
        seed = 0 if args.seed is None else args.seed
        bundle = experiments.run_preset(args.preset, seed, args.out, args.jobs)
    else:
        bundle = experiments.run_config(args.config, args.out, args.jobs,
                                        master_seed=args.seed)
    for row in bundle.rows:
        s = row.stats
        print(f"{bundle.name}/{row.config.label}: rate={s.recover_rate:.2f} "
              f"max={s.max_error:.4g} min={s.min_error:.4g} "
              f"avg={s.average_error:.4g} order={row.order_at_min_error}")
    print(f"artifacts in {bundle.out_dir}")
    if bundle.all_failed():
        print("every trial failed in the solver", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _cmd_diagnose(args) -> int:
    rows, seed = _configs_for(args.config, args.seed)
    for config in rows:
        report = experiments.diagnose(config, master_seed=seed or 0,
                                      delta=args.delta)
        print(experiments.format_diagnostics(report))
        print()
    return EXIT_OK


def _cmd_report(args) -> int:
    rows = experiments.report_from_trials(args.trials)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["model", "sparsity", "measurements", "max", "min",
                     "average", "order", "rate"])
    for row in rows:
        writer.writerow([row["model"], row["sparsity"], row["measurements"],
                         repr(row["max"]), repr(row["min"]), repr(row["average"]),
                         row["order"], repr(row["rate"])])
    sys.stdout.write(out.getvalue())
    return EXIT_OK


def _cmd_coherence(args) -> int:
    try:
        values = [float(v) for v in args.poles.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad --poles list: {exc}") from exc
    try:
        poles = PoleSequence(values)
        if not 1 <= args.n2 <= len(poles):
            raise ConfigError("--n2 must lie in 1..len(poles)")
        result = basis_coherence(poles, args.n2, truncation=args.depth)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(f"coherence: {result.value!r}")
    print(f"attained at (d={result.argmax[0]}, l={result.argmax[1]}), "
          f"truncation {result.truncation}, tail bound {result.tail_bound:.3e}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "diagnose": _cmd_diagnose,
        "report": _cmd_report,
        "coherence": _cmd_coherence,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
