"""Experiment plans, artifact emission, sweeps, oracle comparison, CLI."""

import json
import subprocess
import sys

import numpy as np
import pytest

from dtmcast.config import parse_config
from dtmcast.harness import (ExperimentPlan, PlanError, compare_oracle, run,
                             step_log_columns, sweep, write_csv)


def small_plan(tmp_path, **kw):
    cfg = parse_config({
        "seed": 5,
        "scenario": {"group_count": 2, "users_per_group": 3,
                     "catalog_size": 50, "recommended_len": 10},
    })
    defaults = dict(config=cfg, algorithms=["equal-split"], seeds=[1],
                    out_dir=tmp_path, eval_windows=4)
    defaults.update(kw)
    return ExperimentPlan(**defaults)


class TestPlanValidation:
    def test_empty_seeds_rejected(self, tmp_path):
        with pytest.raises(PlanError, match="seeds"):
            small_plan(tmp_path, seeds=[])

    def test_unknown_algorithm_rejected(self, tmp_path):
        with pytest.raises(PlanError, match="unknown algorithm"):
            small_plan(tmp_path, algorithms=["sarsa"])

    def test_grid_outside_published_range_rejected(self, tmp_path):
        with pytest.raises(PlanError, match="outside"):
            small_plan(tmp_path, bandwidth_grid=[3.0])

    def test_out_of_range_grid_allowed_with_override(self, tmp_path):
        plan = small_plan(tmp_path, bandwidth_grid=[3.0],
                          allow_out_of_range=True)
        assert plan.bandwidth_grid == [3.0]


class TestRun:
    def test_equal_split_emits_eval_only(self, tmp_path):
        outputs = run(small_plan(tmp_path))
        names = set(outputs)
        assert "eval_equal_split_s1.csv" in names
        assert not any(n.startswith("training") for n in names)
        assert not any(n.startswith("checkpoint") for n in names)

    def test_eval_csv_shape_and_formatting(self, tmp_path):
        outputs = run(small_plan(tmp_path))
        lines = outputs["eval_equal_split_s1.csv"].read_text().splitlines()
        assert lines[0] == ",".join(step_log_columns(2))
        assert len(lines) == 5  # header + 4 windows
        first = lines[1].split(",")
        assert len(first) == len(step_log_columns(2))

    def test_identical_plans_reproduce_manifest(self, tmp_path):
        out_a = run(small_plan(tmp_path / "a"))
        out_b = run(small_plan(tmp_path / "b"))
        a = out_a["manifest"].read_text()
        b = out_b["manifest"].read_text()
        assert a == b
        manifest = json.loads(a)
        assert manifest["artifacts"]

    def test_learning_algorithm_emits_training_and_checkpoint(self, tmp_path):
        cfg = parse_config({
            "seed": 5,
            "scenario": {"group_count": 2, "users_per_group": 3,
                         "catalog_size": 50, "recommended_len": 10},
            "training": {"episodes": 2, "steps_per_episode": 10,
                         "batch": 16, "hidden_width": 16,
                         "buffer_capacity": 500},
        })
        plan = ExperimentPlan(config=cfg, algorithms=["dftd3"], seeds=[2],
                              out_dir=tmp_path, eval_windows=3)
        outputs = run(plan)
        assert "training_dftd3_s2.csv" in outputs
        assert "checkpoint_dftd3_s2.npz" in outputs
        lines = outputs["training_dftd3_s2.csv"].read_text().splitlines()
        assert len(lines) == 3  # header + 2 episodes


class TestSweep:
    def test_needs_an_axis(self, tmp_path):
        with pytest.raises(PlanError, match="axis"):
            sweep(small_plan(tmp_path))

    def test_single_point_single_row(self, tmp_path):
        outputs = sweep(small_plan(tmp_path, bandwidth_grid=[10.0]))
        lines = outputs["sweep_bandwidth.csv"].read_text().splitlines()
        assert lines[0] == "axis_value,algorithm,mean_latency_s,ci95"
        assert len(lines) == 2

    def test_equal_split_latency_non_increasing_in_bandwidth(self, tmp_path):
        plan = small_plan(tmp_path, bandwidth_grid=[6.0, 10.0, 14.0],
                          seeds=[1, 2])
        outputs = sweep(plan)
        lines = outputs["sweep_bandwidth.csv"].read_text().splitlines()[1:]
        means = [float(line.split(",")[2]) for line in lines]
        assert means == sorted(means, reverse=True)

    def test_compute_axis_non_increasing(self, tmp_path):
        plan = small_plan(tmp_path, compute_grid=[6.0, 8.0, 10.0])
        outputs = sweep(plan)
        lines = outputs["sweep_compute.csv"].read_text().splitlines()[1:]
        means = [float(line.split(",")[2]) for line in lines]
        assert means == sorted(means, reverse=True)


class TestCompareOracle:
    def test_oracle_against_itself_is_unity(self, tmp_path):
        plan = small_plan(tmp_path, algorithms=["oracle"], eval_windows=3,
                          oracle_grid_points=11)
        report = compare_oracle(plan)
        stats = report["algorithms"]["oracle"]
        assert stats["mean_ratio"] == pytest.approx(1.0, abs=1e-12)
        assert stats["max_ratio"] == pytest.approx(1.0, abs=1e-12)

    def test_equal_split_is_never_better_than_oracle(self, tmp_path):
        plan = small_plan(tmp_path, algorithms=["equal-split"],
                          eval_windows=4, oracle_grid_points=21)
        report = compare_oracle(plan)
        stats = report["algorithms"]["equal-split"]
        assert stats["mean_ratio"] >= 1.0
        assert stats["max_ratio"] >= stats["median_ratio"] >= 1.0

    def test_guarded_to_small_group_counts(self, tmp_path):
        cfg = parse_config({"scenario": {"group_count": 4,
                                         "users_per_group": 2,
                                         "catalog_size": 40,
                                         "recommended_len": 8}})
        plan = ExperimentPlan(config=cfg, algorithms=["equal-split"],
                              seeds=[1], out_dir=tmp_path)
        with pytest.raises(PlanError, match="G <= 3"):
            compare_oracle(plan)


class TestCsvFormat:
    def test_nine_significant_digits(self, tmp_path):
        path = tmp_path / "x.csv"
        write_csv(path, ("a", "b"), [[1.23456789012345, 7]])
        assert path.read_text() == "a,b\n1.23456789,7\n"

    def test_trailing_newline_and_header(self, tmp_path):
        path = tmp_path / "y.csv"
        write_csv(path, ("h",), [])
        assert path.read_text() == "h\n"


class TestCli:
    def run_cli(self, *args):
        return subprocess.run([sys.executable, "-m", "dtmcast.cli", *args],
                              capture_output=True, text=True)

    def test_fit_surface_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        m = rng.uniform(0, 9000, 60)
        p = rng.uniform(0, 1, 60)
        acc = 0.8 + 1e-5 * m - 0.2 * p
        csv = tmp_path / "samples.csv"
        csv.write_text("m,psi,acc\n" + "\n".join(
            f"{a},{b},{c}" for a, b, c in zip(m, p, acc)))
        out = tmp_path / "fit.txt"
        result = self.run_cli("fit-surface", "--input", str(csv),
                              "--out", str(out))
        assert result.returncode == 0
        assert "r_squared" in result.stdout
        assert out.exists()
        for line in result.stdout.splitlines():
            if line.startswith("c_m:"):
                assert float(line.split(":")[1]) == pytest.approx(1e-5,
                                                                  rel=1e-6)

    def test_missing_input_exits_config_code(self, tmp_path):
        result = self.run_cli("fit-surface", "--input",
                              str(tmp_path / "nope.csv"))
        assert result.returncode == 2

    def test_bad_config_exits_config_code(self, tmp_path):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text("network:\n  bogus_key: 1\n")
        result = self.run_cli("simulate", "--config", str(cfg),
                              "--out", str(tmp_path / "o"))
        assert result.returncode == 2
        assert "configuration error" in result.stderr

    def test_simulate_writes_eval_csv(self, tmp_path):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text(
            "seed: 3\n"
            "scenario: {group_count: 2, users_per_group: 3, "
            "catalog_size: 40, recommended_len: 8}\n")
        out = tmp_path / "run"
        result = self.run_cli("simulate", "--config", str(cfg), "--seed",
                              "4", "--out", str(out), "--eval-windows", "3")
        assert result.returncode == 0
        eval_csv = out / "eval_equal_split_s4.csv"
        assert eval_csv.exists()
        assert len(eval_csv.read_text().splitlines()) == 4
