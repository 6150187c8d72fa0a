import dataclasses
import json

import numpy as np
import pytest

from gapbench import (
    AmputationConfig,
    BenchError,
    ConfigError,
    ampute_data,
    emit_results,
    fit,
    fit_normalizer,
    grid_from_config,
    grid_from_manifest,
    grid_to_config,
    impute,
    run_grid,
    split_stays,
    summarize,
)
from gapbench.bench import RESULT_HEADER, ImputerSpec, load_grid_dataset

BASE_CONFIG = {
    "dataset": {"synthetic": {"stays": 24, "hours": 12}},
    "mechanisms": ["mcar"],
    "rates": [0.3],
    "methods": [{"name": "mean"}, {"name": "median"}],
    "seeds": 3,
    "split": {"train": 0.7, "val": 0.15, "test": 0.15},
    "master_seed": 5,
}


def _grid(**overrides):
    cfg = json.loads(json.dumps(BASE_CONFIG))
    cfg.update(overrides)
    return grid_from_config(cfg)


def _strip_clock(rows):
    return [dataclasses.replace(r, fit_seconds=0.0, impute_seconds=0.0) for r in rows]


class TestConfig:
    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="/typo_key"):
            _grid(typo_key=1)

    def test_unknown_metrics_key(self):
        with pytest.raises(ConfigError, match="/metrics/jsd_bin\\b"):
            _grid(metrics={"jsd_bin": 10})

    def test_unknown_method_name_fails_before_running(self):
        with pytest.raises(ConfigError, match="/methods/0"):
            _grid(methods=[{"name": "not_a_method"}])

    def test_bad_method_params(self):
        with pytest.raises(ConfigError, match="/methods/0"):
            _grid(methods=[{"name": "mean", "params": {"zap": 1}}])

    def test_rate_bounds(self):
        with pytest.raises(ConfigError, match="/rates/0"):
            _grid(rates=[1.5])

    def test_seeds_int_expands(self):
        assert _grid(seeds=3).seeds == (0, 1, 2)
        assert _grid(seeds=[7, 9]).seeds == (7, 9)

    def test_defaults(self):
        cfg = {"dataset": {"path": "x.csv"}, "methods": [{"name": "mean"}]}
        grid = grid_from_config(cfg)
        assert grid.mechanisms == ("mcar", "mar", "mnar", "bo")
        assert grid.rates == (0.3, 0.5, 0.7)
        assert grid.seeds == (0, 1, 2, 3, 4)
        assert grid.split == (0.7, 0.15, 0.15)

    def test_manifest_round_trip(self):
        grid = _grid()
        manifest = {"grid": grid_to_config(grid), "version": "0.1.0"}
        recovered = grid_from_manifest(json.loads(json.dumps(manifest)))
        assert recovered == grid


class TestRunGrid:
    def test_cardinality(self):
        rows = run_grid(_grid())
        assert len(rows) == 1 * 1 * 2 * 3
        assert all(r.error is None for r in rows)

    def test_rerun_identical_excluding_clock(self):
        rows_a = _strip_clock(run_grid(_grid()))
        rows_b = _strip_clock(run_grid(_grid()))
        assert rows_a == rows_b

    def test_parallel_schedule_same_rows(self):
        grid = _grid(mechanisms=["mcar", "bo"], seeds=2)
        assert _strip_clock(run_grid(grid, jobs=1)) == _strip_clock(run_grid(grid, jobs=4))

    def test_canonical_order(self):
        grid = _grid(mechanisms=["bo", "mcar"], rates=[0.5, 0.3], seeds=[2, 1])
        rows = run_grid(grid)
        coords = [(r.mechanism, r.rate, r.method, r.seed) for r in rows]
        expected = [(m, rt, meth.name, s) for m in ("bo", "mcar") for rt in (0.5, 0.3)
                    for meth in grid.methods for s in (2, 1)]
        assert coords == expected

    def test_per_cell_isolation(self):
        full = _strip_clock(run_grid(_grid()))
        reduced = _strip_clock(run_grid(_grid(methods=[{"name": "mean"}])))
        kept = [r for r in full if r.method == "mean"]
        assert kept == reduced

    def test_error_rows_do_not_abort(self):
        # default MAR observed fraction makes rate 0.7 unattainable
        grid = _grid(mechanisms=["mar", "mcar"], rates=[0.7])
        rows = run_grid(grid)
        mar_rows = [r for r in rows if r.mechanism == "mar"]
        mcar_rows = [r for r in rows if r.mechanism == "mcar"]
        assert all(r.error is not None and "unattainable" in r.error for r in mar_rows)
        assert all(r.error is None for r in mcar_rows)

    def test_mar_feasible_with_configured_fraction(self):
        grid = _grid(mechanisms=["mar"], rates=[0.7], seeds=1,
                     amputation={"mar_observed_fraction": 0.16})
        rows = run_grid(grid)
        assert all(r.error is None for r in rows)

    def test_no_test_leakage_through_runner_path(self):
        # same pipeline as a grid cell, with test-split values perturbed
        grid = _grid()
        frame, obs = load_grid_dataset(grid)
        split = split_stays(frame, grid.split, grid.master_seed)

        def fitted_predictions(source_frame):
            stats = fit_normalizer(source_frame, obs, split.train)
            norm = stats.apply(source_frame)
            amputed, amp = ampute_data(norm, obs, AmputationConfig("mcar", 0.3, 11))
            visible = obs & ~amp
            fitted = fit(ImputerSpec("mice", {}, 7), amputed.subframe(split.train),
                         visible[split.train], stats)
            probe = amputed.subframe(split.test)
            return impute(fitted, probe, visible[split.test]).values

        perturbed_values = frame.values.copy()
        perturbed_values[split.test] *= 1.7
        perturbed = frame.with_values(perturbed_values)

        base_stats = fit_normalizer(frame, obs, split.train)
        pert_stats = fit_normalizer(perturbed, obs, split.train)
        assert np.array_equal(base_stats.mean, pert_stats.mean)

        base_norm = base_stats.apply(frame)
        pert_norm = pert_stats.apply(perturbed)
        _, amp_a = ampute_data(base_norm, obs, AmputationConfig("mcar", 0.3, 11))
        _, amp_b = ampute_data(pert_norm, obs, AmputationConfig("mcar", 0.3, 11))
        assert np.array_equal(amp_a, amp_b)

        vis = obs & ~amp_a
        fit_a = fit(ImputerSpec("mice", {}, 7),
                    base_stats.apply(frame).subframe(split.train), vis[split.train])
        fit_b = fit(ImputerSpec("mice", {}, 7),
                    pert_stats.apply(perturbed).subframe(split.train), vis[split.train])
        probe = base_stats.apply(frame).subframe(split.val)
        out_a = impute(fit_a, probe, vis[split.val])
        out_b = impute(fit_b, probe, vis[split.val])
        assert np.array_equal(out_a.values, out_b.values)


class TestSummarize:
    def test_group_by_method_rate_shape(self):
        rows = run_grid(_grid(rates=[0.3, 0.5]))
        table = summarize(rows, ("method", "rate"))
        assert len(table) == 4
        entry = table[0]
        assert set(entry) == {"method", "rate", "n_runs",
                              "mae_norm_mean", "mae_norm_std", "rmse_norm_mean", "rmse_norm_std",
                              "mae_raw_mean", "mae_raw_std", "rmse_raw_mean", "rmse_raw_std",
                              "jsd_mean", "jsd_std"}
        assert entry["n_runs"] == 3

    def test_group_by_method_mechanism_shape(self):
        rows = run_grid(_grid(mechanisms=["mcar", "bo"]))
        table = summarize(rows, ("method", "mechanism"))
        assert {(e["method"], e["mechanism"]) for e in table} == {
            ("mean", "mcar"), ("mean", "bo"), ("median", "mcar"), ("median", "bo")}

    def test_single_row_aggregate(self):
        rows = run_grid(_grid(seeds=1))
        table = summarize(rows, ("method",))
        for entry in table:
            row = next(r for r in rows if r.method == entry["method"])
            assert entry["mae_norm_mean"] == row.mae_norm
            assert entry["mae_norm_std"] == 0.0

    def test_unknown_group_key(self):
        rows = run_grid(_grid(seeds=1))
        with pytest.raises(BenchError, match="unknown group key"):
            summarize(rows, ("method", "flavor"))


class TestEmitResults:
    def test_results_header_exact(self, tmp_path):
        rows = run_grid(_grid(seeds=1))
        emit_results(rows, {}, tmp_path, _grid(seeds=1))
        text = (tmp_path / "results.csv").read_text().splitlines()
        assert text[0] == ",".join(RESULT_HEADER)
        assert len(text) == 1 + len(rows)

    def test_empty_rows_header_only(self, tmp_path):
        emit_results([], {}, tmp_path, _grid())
        assert (tmp_path / "results.csv").read_text().splitlines() == [",".join(RESULT_HEADER)]

    def test_manifest_reconstructs_grid(self, tmp_path):
        grid = _grid()
        emit_results(run_grid(grid), {}, tmp_path, grid)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert grid_from_manifest(manifest) == grid
        assert manifest["version"]

    def test_stable_output_byte_identical(self, tmp_path):
        grid = _grid()
        for name in ("a", "b"):
            rows = run_grid(grid)
            summaries = {("method", "rate"): summarize(rows, ("method", "rate"))}
            emit_results(rows, summaries, tmp_path / name, grid, stable_output=True)
        for fname in ("results.csv", "manifest.json", "summary_method_rate.csv"):
            assert (tmp_path / "a" / fname).read_bytes() == (tmp_path / "b" / fname).read_bytes()

    def test_error_rows_routed_to_errors_csv(self, tmp_path):
        grid = _grid(mechanisms=["mar"], rates=[0.7], seeds=1)
        rows = run_grid(grid)
        emit_results(rows, {}, tmp_path, grid)
        assert (tmp_path / "results.csv").read_text().splitlines() == [",".join(RESULT_HEADER)]
        errors = (tmp_path / "errors.csv").read_text().splitlines()
        assert len(errors) == 1 + len(rows)
        assert "unattainable" in errors[1]
