import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from pcplace.cli import main as cli_main
from pcplace.harness import (
    CSV_HEADER,
    ExperimentConfig,
    RunReport,
    baseline_mean_based,
    baseline_per_point,
    emit_report,
    load_report,
    run_pipeline,
    sample_parameter_set,
)
from pcplace.helmholtz import max_safe_amplitude


def small_affine_config(**overrides):
    doc = {
        "family": {"kind": "affine", "eta": [0.25, 0.25]},
        "k0": 8.0,
        "n_points": 20,
        "seed": 7,
        "cost": {"mode": "synthetic", "c_build": 1e-4, "c_iter": 1e-6},
    }
    doc.update(overrides)
    return ExperimentConfig.from_dict(doc)


class TestConfig:
    def test_schema_rejects_unknown_keys(self):
        with pytest.raises(Exception):
            ExperimentConfig.from_dict(
                {"family": {"kind": "affine", "eta": [0.2]}, "k0": 5, "n_points": 1,
                 "bogus": True}
            )

    def test_schema_rejects_bad_kind(self):
        with pytest.raises(Exception):
            ExperimentConfig.from_dict(
                {"family": {"kind": "other"}, "k0": 5, "n_points": 1}
            )

    def test_affine_requires_eta(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict(
                {"family": {"kind": "affine"}, "k0": 5, "n_points": 1}
            )

    def test_shape_requires_amplitude(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict(
                {"family": {"kind": "shape", "n_dims": 2, "decay": 2.0},
                 "k0": 5, "n_points": 1}
            )

    def test_amplitude_cap_enforced_at_build(self):
        exp = ExperimentConfig.from_dict(
            {
                "family": {
                    "kind": "shape",
                    "n_dims": 2,
                    "amplitude": 0.99 * max_safe_amplitude(2.0),
                    "decay": 2.0,
                },
                "k0": 5,
                "n_points": 1,
            }
        )
        exp.build_family(exp.helmholtz_config())
        bad = ExperimentConfig.from_dict(
            {
                "family": {
                    "kind": "shape",
                    "n_dims": 2,
                    "amplitude": 1.5 * max_safe_amplitude(2.0),
                    "decay": 2.0,
                },
                "k0": 5,
                "n_points": 1,
            }
        )
        with pytest.raises(ValueError):
            bad.build_family(bad.helmholtz_config())

    def test_roundtrip(self):
        exp = small_affine_config()
        again = ExperimentConfig.from_dict(exp.to_dict())
        assert again == exp


class TestSampling:
    def test_seed_reproducibility(self):
        exp = small_affine_config(n_points=200)
        w1 = sample_parameter_set(exp)
        w2 = sample_parameter_set(exp)
        assert_allclose(w1.points, w2.points)

    def test_bounds(self):
        exp = small_affine_config(n_points=500)
        pts = sample_parameter_set(exp).points
        assert pts.min() >= -1.0 and pts.max() <= 1.0

    def test_mean_shrinks_with_sample_size(self):
        exp = small_affine_config(n_points=1000)
        pts = sample_parameter_set(exp).points
        assert np.all(np.abs(pts.mean(axis=0)) < 0.1)

    def test_halton_option(self):
        doc = {
            "family": {"kind": "affine", "eta": [0.25] * 4},
            "k0": 5.0,
            "n_points": 128,
            "sampling": "halton",
            "seed": 3,
        }
        exp = ExperimentConfig.from_dict(doc)
        a = sample_parameter_set(exp).points
        b = sample_parameter_set(exp).points
        assert_allclose(a, b)
        assert a.shape == (128, 4)
        assert a.min() >= -1.0 and a.max() <= 1.0
        # low-discrepancy: per-dimension means are tighter than the i.i.d.
        # standard error at this sample size
        assert np.all(np.abs(a.mean(axis=0)) < 0.05)

    def test_grid_option(self):
        doc = {
            "family": {"kind": "affine", "eta": [0.25, 0.25]},
            "k0": 5.0,
            "n_points": 100,
            "sampling": "grid",
        }
        pts = sample_parameter_set(ExperimentConfig.from_dict(doc)).points
        assert pts.shape == (100, 2)  # 10 x 10 tensor grid
        assert len(np.unique(pts[:, 0])) == 10

    def test_grid_dimension_guard(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict(
                {
                    "family": {"kind": "affine", "eta": [0.2, 0.2, 0.2, 0.2]},
                    "k0": 5.0,
                    "n_points": 16,
                    "sampling": "grid",
                }
            )


class TestPipeline:
    def test_smoke_covers_every_point_once(self):
        exp = ExperimentConfig.from_dict(
            {
                "family": {"kind": "affine", "eta": [0.25]},
                "k0": 5.0,
                "n_points": 4,
                "seed": 3,
            }
        )
        report, surrogate, plan = run_pipeline(exp)
        indices = sorted(rec["index"] for rec in report.per_point)
        assert indices == [0, 1, 2, 3]
        phases = {rec["index"]: rec["phase"] for rec in report.per_point}
        n_train = sum(1 for p in phases.values() if p == "train")
        n_exec = sum(1 for p in phases.values() if p == "exec")
        assert n_train + n_exec == 4
        assert n_train == len(surrogate.evaluated)
        assert not report.degraded
        assert report.t_tot == report.t_train + report.t_l_al + report.t_exec

    def test_disagree_trace_bookkeeping(self):
        exp = small_affine_config(n_points=25)
        report, surrogate, _ = run_pipeline(exp)
        # one SP entry per training point beyond the origin pin and the
        # first mandatory evaluation
        assert len(report.disagree_trace) == len(surrogate.evaluated) - 1
        assert len(report.rmse_trace) == len(surrogate.evaluated) - 1
        # conservation of work on a non-trivial instance
        indices = [rec["index"] for rec in report.per_point]
        assert sorted(indices) == list(range(25))

    def test_single_point_instance(self):
        # training consumes the only target; nothing is left to place and
        # the mean preconditioner is the whole strategy
        exp = ExperimentConfig.from_dict(
            {
                "family": {"kind": "affine", "eta": [0.25]},
                "k0": 5.0,
                "n_points": 1,
                "seed": 0,
            }
        )
        report, surrogate, plan = run_pipeline(exp)
        assert surrogate.budget_exhausted
        assert report.n_pc == 1
        assert len(report.per_point) == 1
        assert report.per_point[0]["phase"] == "train"
        assert plan.n_pc == 1 and plan.fixed_mask[0]

    def test_unconverged_solves_flag_degraded_run(self):
        exp = small_affine_config(n_points=6, max_iter=1)
        report, _, _ = run_pipeline(exp)
        assert report.degraded
        assert any(not rec["converged"] for rec in report.per_point)

    def test_measured_cost_mode_smoke(self):
        exp = small_affine_config(
            n_points=6, cost={"mode": "measured", "c_build": 1e-4, "c_iter": 1e-6}
        )
        report, surrogate, _ = run_pipeline(exp)
        assert report.cost_mode == "measured"
        assert report.n_ratio > 0
        assert report.t_tot > 0
        assert "wall_seconds" in report.to_json_dict()

    def test_pipeline_never_worse_than_baselines(self):
        exp = ExperimentConfig.from_dict(
            {
                "family": {
                    "kind": "shape",
                    "n_dims": 2,
                    "amplitude": 0.5 * max_safe_amplitude(2.0),
                    "decay": 2.0,
                },
                "k0": 10.0,
                "n_points": 30,
                "seed": 2,
            }
        )
        report, _, _ = run_pipeline(exp)
        mean_report = baseline_mean_based(exp)
        assert report.cost_total <= mean_report.cost_total + 1e-9
        assert report.cost_total <= report.cost_per_point + 1e-9

    def test_cheap_preconditioners_beat_mean_based_strictly(self):
        # with a small build cost the planner can afford preconditioners
        # and must strictly undercut single-preconditioner execution
        exp = ExperimentConfig.from_dict(
            {
                "family": {"kind": "affine", "eta": [0.5, 0.5]},
                "k0": 10.0,
                "n_points": 50,
                "seed": 1,
                "cost": {"mode": "synthetic", "c_build": 1e-5, "c_iter": 1e-6},
            }
        )
        report, _, plan = run_pipeline(exp)
        mean_report = baseline_mean_based(exp)
        assert report.cost_total < mean_report.cost_total
        assert report.n_pc > 1

    def test_byte_identical_reports_synthetic_mode(self):
        exp = small_affine_config()
        a = json.dumps(run_pipeline(exp)[0].to_json_dict(), sort_keys=True)
        b = json.dumps(run_pipeline(exp)[0].to_json_dict(), sort_keys=True)
        assert a == b


class TestBaselines:
    def test_mean_based_shape(self):
        exp = small_affine_config(n_points=10)
        report = baseline_mean_based(exp)
        assert report.n_pc == 1
        assert report.cost_total == report.cost_mean_based
        assert len(report.per_point) == 10
        assert report.t_tot == report.t_exec

    def test_mean_based_center_member_takes_one_iteration(self):
        exp = ExperimentConfig.from_dict(
            {
                "family": {"kind": "affine", "eta": [0.25, 0.25]},
                "k0": 6.0,
                "n_points": 9,
                "sampling": "grid",  # 3x3 grid contains the center
            }
        )
        report = baseline_mean_based(exp)
        center = [r for r in report.per_point if np.allclose(r["y"], 0.0)]
        assert len(center) == 1
        assert center[0]["iterations"] == 1

    def test_mean_based_iterations_grow_with_amplitude(self):
        def shape_cfg(amplitude):
            return ExperimentConfig.from_dict(
                {
                    "family": {
                        "kind": "shape",
                        "n_dims": 2,
                        "amplitude": amplitude,
                        "decay": 2.0,
                    },
                    "k0": 10.0,
                    "n_points": 12,
                    "seed": 4,
                }
            )

        small = baseline_mean_based(shape_cfg(0.25 * max_safe_amplitude(2.0)))
        large = baseline_mean_based(shape_cfg(0.9 * max_safe_amplitude(2.0)))
        assert large.it_av > small.it_av

    def test_per_point_unit_iterations_and_linear_cost(self):
        exp6 = small_affine_config(n_points=6, k0=6.0)
        exp12 = small_affine_config(n_points=12, k0=6.0)
        r6 = baseline_per_point(exp6)
        r12 = baseline_per_point(exp12)
        assert r6.it_av == 1.0 and r12.it_av == 1.0
        assert_allclose(r6.cost_total, 6 * (r6.n_ratio + 1.0))
        assert_allclose(r12.cost_total, 2 * r6.cost_total)


class TestReports:
    def _report(self):
        exp = ExperimentConfig.from_dict(
            {
                "family": {"kind": "affine", "eta": [0.25]},
                "k0": 5.0,
                "n_points": 5,
                "seed": 9,
            }
        )
        return run_pipeline(exp)[0]

    def test_json_roundtrip(self, tmp_path):
        report = self._report()
        path = tmp_path / "report.json"
        emit_report(report, "json", path)
        back = load_report(path)
        assert back.to_json_dict() == report.to_json_dict()

    def test_csv_header_exact(self, tmp_path):
        report = self._report()
        path = tmp_path / "report.csv"
        emit_report(report, "csv", path)
        lines = path.read_text().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 2

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_report(self._report(), "xml", tmp_path / "r.xml")


class TestCli:
    def _config_file(self, tmp_path, n_points=5):
        doc = {
            "family": {"kind": "affine", "eta": [0.25]},
            "k0": 5.0,
            "n_points": n_points,
            "seed": 11,
            "output_dir": str(tmp_path / "out"),
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(doc))
        return path

    def test_run_subcommand(self, tmp_path, capsys):
        cfg = self._config_file(tmp_path)
        code = cli_main(["run", "--config", str(cfg)])
        assert code == 0
        out = tmp_path / "out"
        assert (out / "report_pipeline.json").exists()
        assert (out / "report_pipeline.csv").exists()
        assert (out / "surrogate.json").exists()
        assert (out / "plan.json").exists()

    def test_train_then_place(self, tmp_path):
        cfg = self._config_file(tmp_path, n_points=8)
        assert cli_main(["train", "--config", str(cfg)]) == 0
        assert cli_main(["place", "--config", str(cfg)]) == 0
        assert (tmp_path / "out" / "plan.json").exists()

    def test_baseline_and_report_conversion(self, tmp_path):
        cfg = self._config_file(tmp_path)
        assert cli_main(["baseline", "--config", str(cfg), "--kind", "mean"]) == 0
        src = tmp_path / "out" / "report_mean_based.json"
        dst = tmp_path / "out" / "converted.csv"
        assert cli_main(
            ["report", "--in", str(src), "--format", "csv", "--out", str(dst)]
        ) == 0
        assert dst.read_text().splitlines()[0] == CSV_HEADER

    def test_missing_config_is_error(self, tmp_path, capsys):
        code = cli_main(["run", "--config", str(tmp_path / "nope.json")])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_degraded_run_exits_two(self, tmp_path):
        doc = {
            "family": {"kind": "affine", "eta": [0.25]},
            "k0": 5.0,
            "n_points": 5,
            "seed": 11,
            "max_iter": 1,
            "output_dir": str(tmp_path / "out"),
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(doc))
        assert cli_main(["run", "--config", str(path)]) == 2
