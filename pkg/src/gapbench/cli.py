"""Command-line entry point: synth, ampute, impute, benchmark, analyze.

Exit codes: 0 success, 1 runtime error, 2 usage or validation error. Every
subcommand is deterministic given identical flags (wall-clock columns in
benchmark output excepted; pass --stable-output to zero them).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .amputation import AmputationConfig, AmputationError, MECHANISMS, achieved_rate, ampute_data
from .analysis import AnalysisError, informative_missingness, missingness_correlation
from .bench import BenchError, ConfigError, emit_results, grid_from_config, run_grid, summarize
from .dataset import (
    DatasetError,
    fit_normalizer,
    generate_synthetic,
    load_csv,
    read_mask_csv,
    write_csv,
    write_mask_csv,
)
from .imputers import ImputationError, ImputerSpec, available_methods, fit, impute
from .metrics import MetricError

_ERRORS = (AmputationError, AnalysisError, BenchError, DatasetError, ImputationError,
           MetricError, OSError, json.JSONDecodeError)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _open_rate(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"rate must lie strictly in (0, 1), got {text}")
    return value


def _open_fraction(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"fraction must lie strictly in (0, 1), got {text}")
    return value


def _rate_list(text: str) -> list:
    return [float(part) for part in text.split(",")]


def _param(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gapbench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic vitals CSV")
    p.add_argument("--stays", type=_positive_int, required=True)
    p.add_argument("--hours", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--native-rates", type=_rate_list, default=None,
                   help="comma-separated per-feature native missing rates")
    p.add_argument("--out", required=True)

    p = sub.add_parser("ampute", help="remove observed cells under a mechanism")
    p.add_argument("--input", required=True)
    p.add_argument("--mechanism", choices=MECHANISMS, required=True)
    p.add_argument("--rate", type=_open_rate, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--mar-observed-fraction", type=_open_fraction, default=0.5)

    p = sub.add_parser("impute", help="fill missing cells with a registered method")
    p.add_argument("--method", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--mask", required=True, help="amputation mask CSV marking cells to treat as missing")
    p.add_argument("--train-input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--param", type=_param, action="append", default=[],
                   metavar="KEY=VALUE", help="method hyperparameter (repeatable)")

    p = sub.add_parser("benchmark", help="run an experiment grid from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=_positive_int, default=os.cpu_count() or 1)
    p.add_argument("--master-seed", type=int, default=None)
    p.add_argument("--stable-output", action="store_true",
                   help="zero wall-clock columns so reruns are byte-identical")

    p = sub.add_parser("analyze", help="data-characteristics analyses")
    p.add_argument("kind", choices=("missingness-correlation", "informative-missingness"))
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--top-k", type=_positive_int, default=5)
    return parser


def _cmd_synth(args) -> int:
    frame, mask = generate_synthetic(args.stays, args.hours, args.seed, args.native_rates)
    write_csv(frame, mask, args.out)
    return 0


def _cmd_ampute(args) -> int:
    frame, obs_mask = load_csv(args.input)
    config = AmputationConfig(args.mechanism, args.rate, args.seed, args.mar_observed_fraction)
    amputed, amp_mask = ampute_data(frame, obs_mask, config)
    write_csv(amputed, obs_mask & ~amp_mask, args.out)
    write_mask_csv(frame, amp_mask, args.mask)
    print(f"achieved_rate={achieved_rate(amp_mask, obs_mask)!r}")
    return 0


def _cmd_impute(args) -> int:
    if args.method not in available_methods():
        print(f"unknown method {args.method!r}; registered methods: "
              f"{', '.join(available_methods())}", file=sys.stderr)
        return 2
    frame, obs_mask = load_csv(args.input)
    train_frame, train_obs = load_csv(args.train_input)
    amp_mask = read_mask_csv(args.mask, frame)
    visible = obs_mask & ~amp_mask

    stats = fit_normalizer(train_frame, train_obs)
    spec = ImputerSpec(args.method, dict(args.param), args.seed)
    fitted = fit(spec, stats.apply(train_frame), train_obs, stats)
    completed = impute(fitted, stats.apply(frame), visible)
    # denormalize synthesized cells only; visible cells pass through bit-exactly
    raw = np.where(visible, frame.values, stats.invert_values(completed.values))
    write_csv(frame.with_values(raw), np.ones(frame.values.shape, dtype=bool), args.out)
    return 0


def _cmd_benchmark(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        cfg = json.load(fh)
    # precedence: flag > GAPBENCH_SEED env > config value
    env_seed = os.environ.get("GAPBENCH_SEED")
    if args.master_seed is not None:
        cfg["master_seed"] = args.master_seed
    elif env_seed is not None:
        try:
            cfg["master_seed"] = int(env_seed)
        except ValueError:
            print(f"GAPBENCH_SEED must be an integer, got {env_seed!r}", file=sys.stderr)
            return 2
    grid = grid_from_config(cfg)
    rows = run_grid(grid, jobs=args.jobs)
    groups = [("method", "rate"), ("method", "mechanism"), ("method", "dataset")]
    summaries = {g: summarize(rows, g) for g in groups}
    emit_results(rows, summaries, args.out, grid, stable_output=args.stable_output)
    for dim in ("rate", "mechanism", "dataset"):
        _write_plotdata(os.path.join(args.out, f"plotdata_{dim}.csv"), summaries[("method", dim)],
                        ("method", dim))
    scored = sum(1 for r in rows if r.error is None)
    print(f"wrote {scored} result rows ({len(rows) - scored} errors) to {args.out}")
    return 0


def _write_plotdata(path, table, group_by) -> None:
    import csv as _csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        header = [*group_by, "mae_norm_mean", "mae_norm_std", "rmse_norm_mean", "rmse_norm_std",
                  "jsd_mean", "jsd_std", "n_runs"]
        writer.writerow(header)
        for entry in table:
            writer.writerow([repr(entry[k]) if isinstance(entry[k], float) else entry[k]
                             for k in header])


def _cmd_analyze(args) -> int:
    import csv as _csv

    frame, obs_mask = load_csv(args.input)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        if args.kind == "missingness-correlation":
            corr = missingness_correlation(frame, obs_mask)
            writer.writerow(["feature", *corr.feature_names])
            for f, name in enumerate(corr.feature_names):
                writer.writerow([name, *(repr(float(v)) for v in corr.matrix[f])])
        else:
            report = informative_missingness(frame, obs_mask, top_k=args.top_k)
            by_name = {row[0]: row for row in report.rows}
            writer.writerow(["feature", "rate_survivor", "rate_nonsurvivor", "abs_difference"])
            for name in report.top:
                _, rate0, rate1, diff = by_name[name]
                writer.writerow([name, repr(rate0), repr(rate1), repr(diff)])
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "ampute": _cmd_ampute,
    "impute": _cmd_impute,
    "benchmark": _cmd_benchmark,
    "analyze": _cmd_analyze,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error at {exc}", file=sys.stderr)
        return 1
    except _ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
