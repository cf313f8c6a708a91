import json
import math
from pathlib import Path

import numpy as np
import pytest

from perpsim.cli import main as cli_main
from perpsim.harness import (
    EXIT_CHECK_FAILED,
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    ConfigError,
    ExperimentConfig,
    ReportBundle,
    check_a2c_divergence,
    config_from_dict,
    derive_replicate_seed,
    emit_reports,
    load_config,
    normalizer_plan,
    run_experiment,
    validate_config,
)
from perpsim.distributions import make_increment_model, make_tail_model
from perpsim.perpetuity import TruncationRule


def small_theorem1_config(tmp_path, **over):
    raw = {
        "experiment": "verify_theorem1",
        "master_seed": 20240817,
        "output_dir": str(tmp_path / "out"),
        "n_replicates": 60,
        "a_grid": [0.2, 0.1],
        "u_grid": [0.5, 1.0],
        "increment": {"kind": "gaussian", "sigma": 1.0},
        "tail": {"kind": "light_exp", "rate": 1.0},
    }
    raw.update(over)
    return config_from_dict(raw)


class TestConfigValidation:
    def test_theorem1_requires_light_tail(self, tmp_path):
        cfg = small_theorem1_config(tmp_path, tail={"kind": "quadratic_tail", "lam": 1.0})
        with pytest.raises(ConfigError, match="light exponential"):
            validate_config(cfg)

    def test_theorem2_requires_pareto(self, tmp_path):
        cfg = small_theorem1_config(
            tmp_path, experiment="verify_theorem2", u_grid=[1.0],
            tail={"kind": "light_exp", "rate": 1.0},
        )
        with pytest.raises(ConfigError, match="regularly varying"):
            validate_config(cfg)

    def test_theorem2_with_beta2_rejected_at_model_level(self):
        with pytest.raises(ConfigError, match="quadratic_tail"):
            config_from_dict(
                {
                    "experiment": "verify_theorem2",
                    "master_seed": 1,
                    "tail": {"kind": "pareto_rv", "beta": 2.0},
                }
            )

    def test_theorem3_requires_quadratic(self, tmp_path):
        cfg = small_theorem1_config(
            tmp_path, experiment="verify_theorem3",
            tail={"kind": "pareto_rv", "beta": 1.5},
        )
        with pytest.raises(ConfigError, match="critical"):
            validate_config(cfg)

    def test_lil_suprema_rejects_heavy_tail(self, tmp_path):
        cfg = small_theorem1_config(
            tmp_path, experiment="lil_suprema",
            tail={"kind": "quadratic_tail", "lam": 1.0},
        )
        with pytest.raises(ConfigError, match="moment"):
            validate_config(cfg)

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError, match="unknown experiment"):
            config_from_dict({"experiment": "verify_theorem9", "master_seed": 1})

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            config_from_dict({"experiment": "lil_suprema", "master_seed": 1, "typo": 2})

    def test_camelcase_experiment_names_accepted(self):
        cfg = config_from_dict(
            {"experiment": "VerifyTheorem1", "master_seed": 1}
        )
        assert cfg.experiment == "verify_theorem1"

    def test_a_grid_must_decrease(self, tmp_path):
        cfg = small_theorem1_config(tmp_path, a_grid=[0.1, 0.2])
        with pytest.raises(ConfigError, match="decreasing"):
            validate_config(cfg)

    def test_every_experiment_validates_or_raises_named_error(self, tmp_path):
        # totality: every enum combination either validates or raises ConfigError
        models = [
            None,
            {"kind": "light_exp", "rate": 1.0},
            {"kind": "pareto_rv", "beta": 1.5},
            {"kind": "quadratic_tail", "lam": 1.0},
        ]
        from perpsim.harness import EXPERIMENTS

        for exp in EXPERIMENTS:
            for tail in models:
                raw = {
                    "experiment": exp,
                    "master_seed": 3,
                    "a_grid": [0.2, 0.1],
                    "u_grid": [1.0],
                    "n_replicates": 8,
                    "increment": {"kind": "gaussian", "sigma": 1.0},
                }
                if tail is not None:
                    raw["tail"] = tail
                try:
                    validate_config(config_from_dict(raw))
                except ConfigError:
                    pass


class TestSeeds:
    def test_same_index_same_stream(self):
        a = derive_replicate_seed(123, 7).integers(0, 2**63, 8)
        b = derive_replicate_seed(123, 7).integers(0, 2**63, 8)
        assert np.array_equal(a, b)

    def test_different_indices_differ(self):
        a = derive_replicate_seed(123, 0).integers(0, 2**63, 8)
        b = derive_replicate_seed(123, 1).integers(0, 2**63, 8)
        assert not np.array_equal(a, b)

    def test_lanes_differ(self):
        a = derive_replicate_seed(123, 0, lane=0).integers(0, 2**63, 8)
        b = derive_replicate_seed(123, 0, lane=1).integers(0, 2**63, 8)
        assert not np.array_equal(a, b)


class TestNormalizers:
    def test_walk_scale(self):
        plan = normalizer_plan("verify_theorem1", None)
        assert plan.m_of_a(0.1) == pytest.approx(0.1)
        assert plan.c_of_a(0.1) == pytest.approx(100.0)

    def test_tail_scale_closed_form(self):
        tail = make_tail_model("pareto_rv", beta=1.5, kappa=1.0, t0=1.0)
        plan = normalizer_plan("verify_theorem2", tail)
        # c(a) = kappa^{1/(beta-1)} a^{-beta/(beta-1)} = a^{-3} at kappa=1
        assert plan.c_of_a(0.05) == pytest.approx(0.05**-3.0)
        assert plan.m_of_a(0.05) == pytest.approx(1.0 / (0.05 * 0.05**-3.0))
        # b(c(a)) = a c(a) exactly for the pure power tail
        c = plan.c_of_a(0.05)
        assert (1.0 * c) ** (1.0 / 1.5) == pytest.approx(0.05 * c, rel=1e-12)

    def test_a2c_check(self):
        tail = make_tail_model("pareto_rv", beta=1.5, kappa=2.0, t0=1.0)
        plan = normalizer_plan("verify_theorem2", tail)
        check_a2c_divergence(plan, (0.1, 0.05, 0.02))
        bad = normalizer_plan("verify_theorem1", None)  # a^2 c(a) = 1, constant
        with pytest.raises(ConfigError):
            check_a2c_divergence(bad, (0.1, 0.05))


class TestEmission:
    def test_empty_bundle(self, tmp_path):
        written = emit_reports([], tmp_path)
        assert [p.name for p in written] == ["summary.json"]
        data = json.loads((tmp_path / "summary.json").read_text())
        assert data == {"experiments": []}

    def test_headers_exact(self, tmp_path):
        cfg = small_theorem1_config(tmp_path, n_replicates=20)
        bundle = run_experiment(cfg)
        emit_reports(bundle, cfg.output_dir)
        out = Path(cfg.output_dir)
        assert (out / "summary.json").exists()
        marg = (out / "marginals_verify_theorem1.csv").read_text().splitlines()
        assert marg[0] == "a,u,replicate,log_Y_scaled,Z_scaled"
        ks = (out / "ks_verify_theorem1.csv").read_text().splitlines()
        assert ks[0] == "a,u,source,statistic,threshold,pass"
        curves = (out / "curves_verify_theorem1.csv").read_text().splitlines()
        assert curves[0] == "a,u,source,x,ecdf,ref_cdf"
        assert len(marg) == 1 + 20 * 2 * 2  # replicates x a x u

    def test_summary_schema(self, tmp_path):
        cfg = small_theorem1_config(tmp_path, n_replicates=20)
        bundle = run_experiment(cfg)
        emit_reports(bundle, cfg.output_dir)
        data = json.loads((Path(cfg.output_dir) / "summary.json").read_text())
        assert set(data) >= {"experiment", "config_digest", "cells", "pass", "runtime_seconds"}
        assert data["experiment"] == "verify_theorem1"
        assert all(set(c) == {"a", "u", "ks", "n"} for c in data["cells"])
        int(data["config_digest"], 16)

    def test_lil_csv_header(self, tmp_path):
        cfg = config_from_dict(
            {
                "experiment": "lil_suprema",
                "master_seed": 5,
                "output_dir": str(tmp_path),
                "increment": {"kind": "rademacher", "sigma": 1.0},
                "tail": {"kind": "light_exp", "rate": 1.0},
                "n_grid": [10**4, 10**5],
            }
        )
        bundle = run_experiment(cfg)
        emit_reports(bundle, cfg.output_dir)
        lines = (tmp_path / "lil_lil_suprema.csv").read_text().splitlines()
        assert lines[0] == "scale,statistic,running_max,target"
        assert len(lines) == 3


class TestDeterminism:
    def test_threads_do_not_change_bytes(self, tmp_path):
        cfg1 = small_theorem1_config(tmp_path, output_dir=str(tmp_path / "t1"))
        cfg8 = small_theorem1_config(tmp_path, output_dir=str(tmp_path / "t8"))
        emit_reports(run_experiment(cfg1, threads=1), cfg1.output_dir)
        emit_reports(run_experiment(cfg8, threads=8), cfg8.output_dir)
        for name in (
            "marginals_verify_theorem1.csv",
            "ks_verify_theorem1.csv",
            "curves_verify_theorem1.csv",
        ):
            b1 = (Path(cfg1.output_dir) / name).read_bytes()
            b8 = (Path(cfg8.output_dir) / name).read_bytes()
            assert b1 == b8, name
        s1 = json.loads((Path(cfg1.output_dir) / "summary.json").read_text())
        s8 = json.loads((Path(cfg8.output_dir) / "summary.json").read_text())
        s1.pop("runtime_seconds"), s8.pop("runtime_seconds")
        assert s1 == s8

    def test_rerun_byte_identical(self, tmp_path):
        cfg_a = small_theorem1_config(tmp_path, output_dir=str(tmp_path / "a"))
        cfg_b = small_theorem1_config(tmp_path, output_dir=str(tmp_path / "b"))
        emit_reports(run_experiment(cfg_a), cfg_a.output_dir)
        emit_reports(run_experiment(cfg_b), cfg_b.output_dir)
        for p in sorted(Path(cfg_a.output_dir).iterdir()):
            if p.name == "summary.json":
                continue
            assert p.read_bytes() == (Path(cfg_b.output_dir) / p.name).read_bytes()


class TestCli:
    def write_config(self, tmp_path, text):
        p = tmp_path / "cfg.toml"
        p.write_text(text)
        return p

    def test_validate_ok(self, tmp_path, capsys):
        p = self.write_config(
            tmp_path,
            """
experiment = "lil_suprema"
master_seed = 11
n_grid = [10000, 100000]
[increment]
kind = "rademacher"
sigma = 1.0
[tail]
kind = "light_exp"
rate = 1.0
""",
        )
        assert cli_main(["validate", str(p)]) == EXIT_OK
        assert "ok:" in capsys.readouterr().out

    def test_validate_bad_config(self, tmp_path, capsys):
        p = self.write_config(
            tmp_path,
            """
experiment = "verify_theorem2"
master_seed = 11
a_grid = [0.1]
u_grid = [1.0]
[increment]
kind = "gaussian"
sigma = 1.0
[tail]
kind = "light_exp"
rate = 1.0
""",
        )
        assert cli_main(["validate", str(p)]) == EXIT_CONFIG_ERROR
        assert "config error" in capsys.readouterr().err

    def test_run_json_config_and_outputs(self, tmp_path, capsys):
        cfg = {
            "experiment": "lil_bm_functional",
            "master_seed": 17,
            "a_grid": [0.25, 0.125],
            "output_dir": str(tmp_path / "o"),
        }
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(cfg))
        assert cli_main(["run", str(p)]) == EXIT_OK
        assert (tmp_path / "o" / "lil_lil_bm_functional.csv").exists()

    def test_seed_override_changes_digest(self, tmp_path):
        cfg = {
            "experiment": "lil_bm_functional",
            "master_seed": 17,
            "a_grid": [0.25],
            "output_dir": str(tmp_path / "o1"),
        }
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(cfg))
        assert cli_main(["run", str(p), "--seed", "18", "--output", str(tmp_path / "o2")]) == EXIT_OK
        data = json.loads((tmp_path / "o2" / "summary.json").read_text())
        assert data["experiment"] == "lil_bm_functional"

    def test_seeds_subcommand(self, tmp_path, capsys):
        p = self.write_config(
            tmp_path,
            """
experiment = "lil_suprema"
master_seed = 11
n_replicates = 3
[increment]
kind = "rademacher"
sigma = 1.0
[tail]
kind = "light_exp"
rate = 1.0
""",
        )
        assert cli_main(["seeds", str(p), "--count", "3"]) == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 3
        assert len({ln.split("\t")[1] for ln in lines}) == 3
