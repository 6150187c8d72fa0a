"""Experiment-grid execution: split, normalize, ampute, fit, impute, score.

One grid is the cross-product {mechanism x rate x method x seed}. Amputation
runs once per (mechanism, rate, seed) slice on the full normalized frame and
is shared by every method in that slice, so method comparisons see identical
masks. Fitting only reads train-split visible cells; scoring only reads the
test split's amputed cells. Every stochastic step derives its stream from
the master seed and the cell coordinates, so the emitted rows are a pure
function of the grid. Per-cell failures become error rows instead of
aborting the grid.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .amputation import AmputationConfig, AmputationError, MECHANISMS, ampute_data
from .dataset import DatasetError, VitalsFrame, fit_normalizer, generate_synthetic, load_csv, split_stays
from .imputers import ImputationError, ImputerSpec, fit, impute, lookup
from .metrics import JSD_DEFAULT_BINS, MetricError, MetricReport, Provenance, evaluate
from .rng import derive_seed

DEFAULT_RATES = (0.3, 0.5, 0.7)
DEFAULT_SEED_COUNT = 5
DEFAULT_SPLIT = (0.7, 0.15, 0.15)

RESULT_HEADER = ("dataset", "mechanism", "rate", "method", "seed", "mae_norm", "rmse_norm",
                 "mae_raw", "rmse_raw", "jsd", "n_eval_cells", "fit_seconds", "impute_seconds")
GROUP_KEYS = ("mechanism", "rate", "method", "dataset")


class BenchError(ValueError):
    pass


class ConfigError(BenchError):
    """Config schema violation; the message starts with a JSON pointer."""

    def __init__(self, pointer: str, message: str):
        self.pointer = pointer
        super().__init__(f"{pointer}: {message}")


@dataclass(frozen=True)
class MethodSpec:
    name: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SyntheticSpec:
    stays: int
    hours: int
    native_missing_rates: tuple | None = None


@dataclass(frozen=True)
class ExperimentGrid:
    dataset_path: str | None
    synthetic: SyntheticSpec | None
    mechanisms: tuple
    rates: tuple
    methods: tuple
    seeds: tuple
    split: tuple
    master_seed: int
    jsd_bins: int = JSD_DEFAULT_BINS
    per_stay: bool = False
    mar_observed_fraction: float = 0.5

    @property
    def dataset_tag(self) -> str:
        if self.synthetic is not None:
            return "synthetic"
        return os.path.splitext(os.path.basename(self.dataset_path))[0]


@dataclass(frozen=True)
class ResultRow:
    dataset: str
    mechanism: str
    rate: float
    method: str
    seed: int
    mae_norm: float = np.nan
    rmse_norm: float = np.nan
    mae_raw: float = np.nan
    rmse_raw: float = np.nan
    jsd: float = np.nan
    n_eval_cells: int = 0
    fit_seconds: float = 0.0
    impute_seconds: float = 0.0
    error: str | None = None


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------

_TOP_KEYS = {"dataset", "mechanisms", "rates", "methods", "seeds", "split",
             "master_seed", "metrics", "amputation"}


def _require(condition, pointer, message):
    if not condition:
        raise ConfigError(pointer, message)


def grid_from_config(cfg: dict) -> ExperimentGrid:
    """Validate a benchmark config document (unknown keys are errors)."""
    _require(isinstance(cfg, dict), "", "config must be a JSON object")
    for key in cfg:
        _require(key in _TOP_KEYS, f"/{key}", "unknown key")

    _require("dataset" in cfg, "/dataset", "missing required key")
    ds = cfg["dataset"]
    _require(isinstance(ds, dict) and len(set(ds) & {"path", "synthetic"}) == 1,
             "/dataset", "expected exactly one of 'path' or 'synthetic'")
    dataset_path, synthetic = None, None
    if "path" in ds:
        _require(set(ds) == {"path"}, "/dataset", "unknown keys beside 'path'")
        dataset_path = str(ds["path"])
    else:
        syn = ds["synthetic"]
        _require(isinstance(syn, dict), "/dataset/synthetic", "must be an object")
        allowed = {"stays", "hours", "native_missing_rates"}
        for key in syn:
            _require(key in allowed, f"/dataset/synthetic/{key}", "unknown key")
        _require("stays" in syn and "hours" in syn, "/dataset/synthetic", "needs 'stays' and 'hours'")
        rates = syn.get("native_missing_rates")
        synthetic = SyntheticSpec(int(syn["stays"]), int(syn["hours"]),
                                  None if rates is None else tuple(float(r) for r in rates))

    mechanisms = cfg.get("mechanisms", list(MECHANISMS))
    _require(isinstance(mechanisms, list) and mechanisms, "/mechanisms", "must be a nonempty list")
    mechanisms = tuple(str(m).lower() for m in mechanisms)
    for i, m in enumerate(mechanisms):
        _require(m in MECHANISMS, f"/mechanisms/{i}", f"unknown mechanism {m!r}")

    rates = cfg.get("rates", list(DEFAULT_RATES))
    _require(isinstance(rates, list) and rates, "/rates", "must be a nonempty list")
    for i, r in enumerate(rates):
        _require(isinstance(r, (int, float)) and 0.0 < float(r) < 1.0, f"/rates/{i}",
                 "rates must lie strictly in (0, 1)")
    rates = tuple(float(r) for r in rates)

    _require("methods" in cfg, "/methods", "missing required key")
    raw_methods = cfg["methods"]
    _require(isinstance(raw_methods, list) and raw_methods, "/methods", "must be a nonempty list")
    methods = []
    for i, m in enumerate(raw_methods):
        _require(isinstance(m, dict) and "name" in m, f"/methods/{i}", "expected an object with 'name'")
        for key in m:
            _require(key in {"name", "params"}, f"/methods/{i}/{key}", "unknown key")
        params = m.get("params", {})
        _require(isinstance(params, dict), f"/methods/{i}/params", "must be an object")
        try:
            lookup(m["name"])(dict(params), 0)
        except ImputationError as exc:
            raise ConfigError(f"/methods/{i}", str(exc)) from exc
        methods.append(MethodSpec(str(m["name"]), dict(params)))

    seeds = cfg.get("seeds", DEFAULT_SEED_COUNT)
    if isinstance(seeds, int):
        _require(seeds >= 1, "/seeds", "seed count must be >= 1")
        seeds = tuple(range(seeds))
    else:
        _require(isinstance(seeds, list) and seeds, "/seeds", "must be an integer count or nonempty list")
        seeds = tuple(int(s) for s in seeds)

    split_cfg = cfg.get("split", {"train": DEFAULT_SPLIT[0], "val": DEFAULT_SPLIT[1], "test": DEFAULT_SPLIT[2]})
    _require(isinstance(split_cfg, dict) and set(split_cfg) == {"train", "val", "test"},
             "/split", "expected exactly the keys train/val/test")
    split = (float(split_cfg["train"]), float(split_cfg["val"]), float(split_cfg["test"]))
    _require(abs(sum(split) - 1.0) < 1e-9, "/split", "ratios must sum to 1")

    metrics_cfg = cfg.get("metrics", {})
    _require(isinstance(metrics_cfg, dict), "/metrics", "must be an object")
    for key in metrics_cfg:
        _require(key in {"jsd_bins", "per_stay"}, f"/metrics/{key}", "unknown key")
    jsd_bins = int(metrics_cfg.get("jsd_bins", JSD_DEFAULT_BINS))
    _require(jsd_bins >= 2, "/metrics/jsd_bins", "must be >= 2")
    per_stay = bool(metrics_cfg.get("per_stay", False))

    amp_cfg = cfg.get("amputation", {})
    _require(isinstance(amp_cfg, dict), "/amputation", "must be an object")
    for key in amp_cfg:
        _require(key == "mar_observed_fraction", f"/amputation/{key}", "unknown key")
    mar_observed_fraction = float(amp_cfg.get("mar_observed_fraction", 0.5))
    _require(0.0 < mar_observed_fraction < 1.0, "/amputation/mar_observed_fraction",
             "must lie strictly in (0, 1)")

    return ExperimentGrid(dataset_path, synthetic, mechanisms, rates, tuple(methods), seeds,
                          split, int(cfg.get("master_seed", 0)), jsd_bins, per_stay,
                          mar_observed_fraction)


def grid_to_config(grid: ExperimentGrid) -> dict:
    """Canonical config document; feeding it back reproduces the grid."""
    if grid.synthetic is not None:
        syn = {"stays": grid.synthetic.stays, "hours": grid.synthetic.hours}
        if grid.synthetic.native_missing_rates is not None:
            syn["native_missing_rates"] = list(grid.synthetic.native_missing_rates)
        dataset = {"synthetic": syn}
    else:
        dataset = {"path": grid.dataset_path}
    return {
        "dataset": dataset,
        "mechanisms": list(grid.mechanisms),
        "rates": list(grid.rates),
        "methods": [{"name": m.name, "params": dict(m.params)} for m in grid.methods],
        "seeds": list(grid.seeds),
        "split": {"train": grid.split[0], "val": grid.split[1], "test": grid.split[2]},
        "master_seed": grid.master_seed,
        "metrics": {"jsd_bins": grid.jsd_bins, "per_stay": grid.per_stay},
        "amputation": {"mar_observed_fraction": grid.mar_observed_fraction},
    }


def grid_from_manifest(manifest: dict) -> ExperimentGrid:
    return grid_from_config(manifest["grid"])


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------

def load_grid_dataset(grid: ExperimentGrid):
    if grid.synthetic is not None:
        syn = grid.synthetic
        rates = None if syn.native_missing_rates is None else np.array(syn.native_missing_rates)
        return generate_synthetic(syn.stays, syn.hours, derive_seed("dataset", grid.master_seed), rates)
    return load_csv(grid.dataset_path)


def _run_slice(grid, frame, obs_mask, stats, split, mechanism, rate, seed):
    tag = grid.dataset_tag
    rows = []
    amp_seed = derive_seed("cell", grid.master_seed, mechanism, rate, seed)
    try:
        config = AmputationConfig(mechanism, rate, amp_seed, grid.mar_observed_fraction)
        amputed, amp_mask = ampute_data(frame, obs_mask, config)
    except AmputationError as exc:
        return [ResultRow(tag, mechanism, rate, m.name, seed, error=str(exc)) for m in grid.methods]

    visible = obs_mask & ~amp_mask
    train_frame = amputed.subframe(split.train)
    train_visible = visible[split.train]
    test_frame = amputed.subframe(split.test)
    test_visible = visible[split.test]
    truth_test = frame.subframe(split.test)
    eval_mask = amp_mask[split.test]

    for method in grid.methods:
        method_seed = derive_seed("method", grid.master_seed, mechanism, rate, method.name, seed)
        provenance = Provenance(mechanism, rate, method.name, seed, tag)
        try:
            spec = ImputerSpec(method.name, method.params, method_seed)
            t0 = time.perf_counter()
            fitted = fit(spec, train_frame, train_visible, stats)
            t1 = time.perf_counter()
            completed = impute(fitted, test_frame, test_visible)
            t2 = time.perf_counter()
            report = evaluate(truth_test, completed, eval_mask, stats,
                              jsd_bins=grid.jsd_bins, per_stay=grid.per_stay, provenance=provenance)
            rows.append(ResultRow(tag, mechanism, rate, method.name, seed,
                                  report.mae_norm, report.rmse_norm, report.mae_raw, report.rmse_raw,
                                  report.jsd, report.n_eval_cells, t1 - t0, t2 - t1))
        except (ImputationError, MetricError, DatasetError, AmputationError) as exc:
            rows.append(ResultRow(tag, mechanism, rate, method.name, seed, error=str(exc)))
    return rows


def run_grid(grid: ExperimentGrid, jobs: int = 1) -> list:
    """Execute every grid cell; rows come back in canonical axis order
    (mechanism, rate, method, seed as configured) regardless of schedule."""
    frame, obs_mask = load_grid_dataset(grid)
    split = split_stays(frame, grid.split, grid.master_seed)
    stats = fit_normalizer(frame, obs_mask, split.train)
    norm_frame = stats.apply(frame)

    slices = [(mech, rate, seed) for mech in grid.mechanisms for rate in grid.rates for seed in grid.seeds]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            slice_rows = list(pool.map(
                lambda c: _run_slice(grid, norm_frame, obs_mask, stats, split, *c), slices))
    else:
        slice_rows = [_run_slice(grid, norm_frame, obs_mask, stats, split, *c) for c in slices]

    by_coord = {}
    for rows in slice_rows:
        for row in rows:
            by_coord[(row.mechanism, row.rate, row.method, row.seed)] = row
    ordered = []
    for mech in grid.mechanisms:
        for rate in grid.rates:
            for method in grid.methods:
                for seed in grid.seeds:
                    ordered.append(by_coord[(mech, rate, method.name, seed)])
    return ordered


# ---------------------------------------------------------------------------
# Aggregation and emission
# ---------------------------------------------------------------------------

def summarize(rows, group_by) -> list:
    """Aggregate metric means and sample stds over any subset of
    {mechanism, rate, method, dataset}; remaining axes and seeds pool."""
    group_by = tuple(group_by)
    for key in group_by:
        if key not in GROUP_KEYS:
            raise BenchError(f"unknown group key {key!r}; expected a subset of {GROUP_KEYS}")
    scored = [r for r in rows if r.error is None]
    if not rows:
        raise BenchError("summarize needs at least one result row")
    groups: dict = {}
    for row in scored:
        groups.setdefault(tuple(getattr(row, k) for k in group_by), []).append(row)
    out = []
    for key, members in groups.items():
        entry = dict(zip(group_by, key))
        for metric in MetricReport.METRIC_FIELDS:
            column = np.array([getattr(r, metric) for r in members])
            entry[f"{metric}_mean"] = float(column.mean())
            entry[f"{metric}_std"] = float(column.std(ddof=1)) if column.size > 1 else 0.0
        entry["n_runs"] = len(members)
        out.append(entry)
    return out


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_results(rows, summaries: dict, out_dir, grid: ExperimentGrid,
                 stable_output: bool = False) -> None:
    """Write results.csv, summary_<groupkey>.csv files, errors.csv when any
    cell failed, and manifest.json. With ``stable_output`` the wall-clock
    columns are zeroed so reruns are byte-identical."""
    os.makedirs(out_dir, exist_ok=True)
    scored = [r for r in rows if r.error is None]
    failed = [r for r in rows if r.error is not None]

    with open(os.path.join(out_dir, "results.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_HEADER)
        for row in scored:
            fit_s = 0.0 if stable_output else row.fit_seconds
            imp_s = 0.0 if stable_output else row.impute_seconds
            writer.writerow([row.dataset, row.mechanism, _fmt(row.rate), row.method, row.seed,
                             _fmt(row.mae_norm), _fmt(row.rmse_norm), _fmt(row.mae_raw),
                             _fmt(row.rmse_raw), _fmt(row.jsd), row.n_eval_cells,
                             _fmt(float(fit_s)), _fmt(float(imp_s))])

    if failed:
        with open(os.path.join(out_dir, "errors.csv"), "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["dataset", "mechanism", "rate", "method", "seed", "error"])
            for row in failed:
                writer.writerow([row.dataset, row.mechanism, _fmt(row.rate), row.method, row.seed, row.error])

    for group_by, table in summaries.items():
        name = "summary_" + "_".join(group_by) + ".csv"
        _write_table(os.path.join(out_dir, name), group_by, table)

    manifest = {"grid": grid_to_config(grid), "version": __version__}
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_table(path, group_by, table) -> None:
    header = list(group_by)
    for metric in MetricReport.METRIC_FIELDS:
        header += [f"{metric}_mean", f"{metric}_std"]
    header.append("n_runs")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for entry in table:
            writer.writerow([_fmt(entry[k]) for k in header])
