import csv
import json

import numpy as np
import pytest

from pwmadp.algorithms import SampleSet, single_bellman_lp
from pwmadp.cli import ConfigError, ExperimentConfig, generate_instance, main, preset_config, preset_problem, run
from pwmadp.lq_model import LQProblem
from pwmadp.moments import MomentPair


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestGenerate:
    def test_spectral_radius(self):
        p = generate_instance(4, 2, seed=11)
        assert max(abs(np.linalg.eigvals(p.A))) == pytest.approx(1.0, abs=1e-9)

    def test_shapes(self):
        p = generate_instance(10, 3, seed=0)
        assert p.A.shape == (10, 10) and p.B_u.shape == (10, 3)
        assert p.gamma == 0.99
        np.testing.assert_array_equal(p.x0_cov, 9 * np.eye(10))
        np.testing.assert_array_equal(p.u_hi, np.ones(3))

    def test_seeds_differ(self):
        assert not np.array_equal(generate_instance(3, 1, 1).A, generate_instance(3, 1, 2).A)

    def test_invalid(self):
        with pytest.raises(ConfigError):
            generate_instance(0, 1, 0)


class TestConfig:
    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"bogus": 1})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            ExperimentConfig(problem={"file": str(tmp_path / "missing.json")})

    def test_init_file_required(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(init="file")

    def test_round_trip(self, tmp_path):
        cfg = preset_config("lq-4d", max_functions=3)
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg.to_dict()))
        assert ExperimentConfig.load(path) == cfg

    def test_preset_1d(self):
        p = preset_problem("cdc-1d")
        assert p.A[0, 0] == 1.0 and p.B_u[0, 0] == -0.5 and p.gamma == 0.95
        assert p.x0_cov[0, 0] == 10.0


def small_cfg(tmp_path, name, **kw):
    base = dict(n_samples=300, max_functions=6, certify_rollouts=200, output_dir=str(tmp_path / name))
    base.update(kw)
    return preset_config("cdc-1d", **base)


class TestRun:
    def test_pipeline(self, tmp_path):
        summary = run(small_cfg(tmp_path, "a"))
        out = tmp_path / "a"
        for f in ("config.json", "instance.json", "trace.csv", "bound.csv", "timing.csv", "family_obj.json",
                  "gap.json"):
            assert (out / f).is_file()
        f = [float(r["f_pwm"]) for r in read_csv(out / "bound.csv")]
        assert all(b >= a for a, b in zip(f, f[1:]))
        assert summary["n_generated"] == 6
        assert LQProblem.load(out / "instance.json").gamma == 0.95

    def test_no_refine(self, tmp_path):
        run(small_cfg(tmp_path, "b", refine=False))
        rows = read_csv(tmp_path / "b" / "trace.csv")
        assert all(r["inner_iter"] == "0" for r in rows)
        assert len(read_csv(tmp_path / "b" / "timing.csv")) == 6

    def test_single_bi_init(self, tmp_path):
        cfg = small_cfg(tmp_path, "c", max_functions=1)
        run(cfg)
        first = float(read_csv(tmp_path / "c" / "bound.csv")[0]["f_pwm"])
        prob = cfg.problem_instance()
        vf = single_bellman_lp(prob)
        s = SampleSet.from_problem(prob, cfg.n_samples, cfg.sample_seed)
        assert first == pytest.approx(float(np.mean(vf(s.points))), rel=1e-12)
        exact = MomentPair.gaussian([0.0], [[10.0]]).packed() @ vf.alpha
        assert first == pytest.approx(exact, rel=0.1)

    def test_byte_identical(self, tmp_path):
        run(small_cfg(tmp_path, "d1"))
        run(small_cfg(tmp_path, "d2"))
        for f in ("trace.csv", "bound.csv", "family_obj.json", "gap.json"):
            assert (tmp_path / "d1" / f).read_bytes() == (tmp_path / "d2" / f).read_bytes()

    def test_snapshots(self, tmp_path):
        run(small_cfg(tmp_path, "e", snapshot_every=3, certify_policy="none"))
        assert sorted(p.name for p in (tmp_path / "e" / "snapshots").iterdir()) == [
            "family_obj_000003.json", "family_obj_000006.json"]
        assert not (tmp_path / "e" / "gap.json").exists()


class TestMain:
    def test_gen(self, tmp_path):
        out = tmp_path / "inst.json"
        assert main(["gen", "--n-x", "3", "--n-u", "1", "--seed", "4", "--output", str(out)]) == 0
        assert LQProblem.load(out).n_x == 3

    def test_experiment_and_audit(self, tmp_path, capsys):
        d = tmp_path / "run"
        code = main(["experiment", "--preset", "cdc-1d", "--n-samples", "200", "--max-functions", "4",
                     "--rollouts", "100", "--output-dir", str(d)])
        assert code == 0
        assert main(["audit", "--preset", "cdc-1d", "--family", str(d / "family_obj.json")]) == 0
        assert main(["certify", "--preset", "cdc-1d", "--family", str(d / "family_obj.json"),
                     "--rollouts", "100"]) == 0

    def test_audit_violation(self, tmp_path):
        fam = tmp_path / "bad.json"
        fam.write_text(json.dumps({"role": "objective", "n_x": 1,
                                   "members": [{"s": 5.0, "p": [0.0], "P": [[3.0]]}]}))
        assert main(["audit", "--preset", "cdc-1d", "--family", str(fam)]) == 4

    def test_config_error(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"problem": {"file": str(tmp_path / "nope.json")}}))
        assert main(["bound", "--config", str(cfg)]) == 2

    def test_bad_family_file(self, tmp_path):
        bad = tmp_path / "f.json"
        bad.write_text("not json")
        assert main(["audit", "--preset", "cdc-1d", "--family", str(bad)]) == 2

    def test_solver_failure(self, tmp_path, monkeypatch):
        import pwmadp.algorithms as alg
        from pwmadp.lmi import SolverFailure

        def broken(*a, **k):
            raise SolverFailure("forced")
        monkeypatch.setattr(alg, "solve_bellman", broken)
        code = main(["bound", "--preset", "cdc-1d", "--n-samples", "10", "--max-functions", "2",
                     "--init", "zero", "--output-dir", str(tmp_path / "f")])
        assert code == 3
        assert (tmp_path / "f" / "trace.csv").is_file()
