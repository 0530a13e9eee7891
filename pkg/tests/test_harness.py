import json
import os
import numpy as np
import pytest

from gklab.harness import (ExperimentConfig, run_experiment, jackknife_cov,
                           default_test_functions, shape_report,
                           resolve_output_dir)


def tiny_config(tmp_path, **over):
    base = dict(gamma=0.9, K=64.0, N=64, d=1, times=(0.02, 0.04),
                replicas=24, seed=11, output=str(tmp_path / "out"),
                workers=1, grid_points=1024)
    base.update(over)
    return ExperimentConfig(**base)


class TestConfig:
    def test_round_trip(self, tmp_path):
        cfg = tiny_config(tmp_path, test_functions=default_test_functions(64.0))
        text = cfg.to_toml()
        back = ExperimentConfig.from_toml(text)
        assert back == cfg

    def test_file_round_trip(self, tmp_path):
        cfg = tiny_config(tmp_path)
        path = tmp_path / "config.toml"
        cfg.save(path)
        assert ExperimentConfig.load(path) == cfg

    def test_schema_version_guard(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_toml("schema_version = 99\n[experiment]\n")

    def test_times_sorted(self, tmp_path):
        cfg = tiny_config(tmp_path, times=(0.4, 0.1))
        assert cfg.times == (0.1, 0.4)

    def test_replica_guard(self, tmp_path):
        with pytest.raises(ValueError):
            tiny_config(tmp_path, replicas=1)


class TestJackknife:
    def test_matches_covariance(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal(200)
        b = 0.5 * a + rng.standard_normal(200)
        cov, se = jackknife_cov(a, b)
        assert cov == pytest.approx(np.cov(a, b, ddof=1)[0, 1], rel=1e-12)
        assert se > 0

    def test_se_shrinks_like_sqrt_m(self):
        rng = np.random.default_rng(1)
        ses = []
        for m in (250, 1000):
            se_samples = []
            for _ in range(40):
                a = rng.standard_normal(m)
                se_samples.append(jackknife_cov(a, a)[1])
            ses.append(np.mean(se_samples))
        assert ses[0] / ses[1] == pytest.approx(2.0, rel=0.15)


class TestExperiment:
    def test_deterministic_artifacts(self, tmp_path):
        cfg1 = tiny_config(tmp_path, output=str(tmp_path / "a"))
        cfg2 = tiny_config(tmp_path, output=str(tmp_path / "b"))
        run_experiment(cfg1)
        run_experiment(cfg2)
        fields_a = (tmp_path / "a" / "fields.csv").read_bytes()
        fields_b = (tmp_path / "b" / "fields.csv").read_bytes()
        assert fields_a == fields_b
        cov_a = (tmp_path / "a" / "covariance.csv").read_bytes()
        cov_b = (tmp_path / "b" / "covariance.csv").read_bytes()
        assert cov_a == cov_b
        rep_a = json.loads((tmp_path / "a" / "report.json").read_text())
        rep_b = json.loads((tmp_path / "b" / "report.json").read_text())
        rep_a.pop("timestamp"), rep_b.pop("timestamp")
        rep_a.pop("events_per_second"), rep_b.pop("events_per_second")
        assert rep_a == rep_b

    def test_parallel_matches_serial(self, tmp_path):
        cfg1 = tiny_config(tmp_path, output=str(tmp_path / "ser"), workers=1)
        cfg2 = tiny_config(tmp_path, output=str(tmp_path / "par"), workers=2)
        rep1, art1 = run_experiment(cfg1)
        rep2, art2 = run_experiment(cfg2)
        assert np.array_equal(art1["values"], art2["values"])

    def test_initial_variance_entries(self, tmp_path):
        # time-zero snapshot: empirical variance against the exact
        # product-measure formula
        from gklab.potential import PotentialParams
        from gklab.profile import solve_two_layer_profile, discretize_profile
        from gklab.fields import TestFunction, bind

        cfg = tiny_config(tmp_path, times=(0.0, 0.02), replicas=120)
        rep, art = run_experiment(cfg)
        pot = PotentialParams.from_gamma(cfg.gamma)
        grid = solve_two_layer_profile(pot, cfg.K, cfg.grid_points)
        prof = discretize_profile(grid, cfg.N, cfg.d)
        specs = default_test_functions(cfg.K)
        for fj, spec in enumerate(specs):
            bound = bind(TestFunction.from_spec(spec), cfg.N, cfg.K, cfg.d)
            theory = bound.variance_formula(prof)
            emp = art["values"][:, 0, fj].var(ddof=1)
            se = theory * np.sqrt(2.0 / (cfg.replicas - 1))
            assert abs(emp - theory) <= 4.0 * se

    def test_drop_flag(self, tmp_path):
        cfg = tiny_config(tmp_path, max_events=200, replicas=4)
        with pytest.raises(RuntimeError):
            run_experiment(cfg)

    def test_output_root_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("GK_OUTPUT_ROOT", str(tmp_path / "root"))
        assert resolve_output_dir("exp") == str(tmp_path / "root" / "exp")


class TestShapeReport:
    def test_small_scale_structure(self, tmp_path):
        cfg = tiny_config(tmp_path, N=256, times=(0.05,), replicas=60)
        out = shape_report(cfg)
        assert out["measured"].shape == out["predicted"].shape
        assert -1.0 <= out["shape_correlation"] <= 1.0
        assert out["normality"]["pvalue"] >= 0.0
        assert out["null_to_aligned_variance_ratio"] >= 0.0
