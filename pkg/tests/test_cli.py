import filecmp
import json
import math
import os
import time

import numpy as np
import pytest

from mixbridge import config as config_mod
from mixbridge import runner
from mixbridge.cli import main
from mixbridge.errors import UnknownPreset


def small_oned_config():
    cfg = config_mod.preset("oned")
    cfg.simulation.update(
        {"n_particles": 400, "n_steps": 80, "time_stride": 8, "path_stride": 40}
    )
    cfg.diagnostics.update({"n_particles": 100, "n_steps": 100})
    cfg.kinetic.update({"n_time": 51, "n_samples": 400})
    cfg.direct_sb.update({"n_per_axis": 201})
    cfg.slices["n_grid"] = 51
    return cfg


class TestPresets:
    def test_exactly_five_names(self):
        assert config_mod.presets() == [
            "oned",
            "threemode",
            "eightmode",
            "shapes",
            "prior_ablation",
        ]

    def test_unknown_preset(self):
        with pytest.raises(UnknownPreset):
            config_mod.preset("ninemode")

    def test_eightmode_geometry(self):
        cfg = config_mod.preset("eightmode")
        assert cfg.eps == 0.08
        means = np.array(cfg.target["means"])
        assert means.shape == (8, 2)
        radii = np.linalg.norm(means, axis=1)
        assert np.allclose(radii, 5.1, atol=1e-12)
        for j in range(8):
            theta = 2.0 * math.pi * j / 8.0
            assert np.allclose(
                means[j], [5.1 * math.cos(theta), 5.1 * math.sin(theta)], atol=1e-12
            )
        # anisotropic covariances with radially aligned major axes
        for mean, cov in zip(cfg.target["means"], cfg.target["covs"]):
            w, v = np.linalg.eigh(np.array(cov))
            assert w[1] == pytest.approx(0.16, abs=1e-12)
            assert w[0] == pytest.approx(0.10, abs=1e-12)
            radial = np.array(mean) / np.linalg.norm(mean)
            assert abs(abs(radial @ v[:, 1]) - 1.0) < 1e-10

    def test_preset_parameters_match_printed_values(self):
        oned = config_mod.preset("oned")
        assert oned.eps == 0.35
        assert oned.source["weights"] == [0.65, 0.35]
        assert oned.simulation["n_steps"] == 800
        three = config_mod.preset("threemode")
        assert three.eps == 0.3
        assert three.simulation["n_steps"] == 1500
        assert three.simulation["n_particles"] == 30000
        ablation = config_mod.preset("prior_ablation")
        assert ablation.prior == {"kind": "ablation", "theta": 0.90, "shift": 3}


class TestConfig:
    def test_roundtrip_semantic_identity(self):
        cfg = config_mod.preset("threemode")
        text = cfg.to_json()
        back = config_mod.ExperimentConfig.from_json(text)
        assert back.to_dict() == cfg.to_dict()
        again = config_mod.ExperimentConfig.from_json(back.to_json())
        assert again.to_dict() == cfg.to_dict()

    def test_validation_ranges(self):
        cfg = config_mod.preset("oned")
        cfg.eps = -1.0
        with pytest.raises(ValueError):
            cfg.validate()
        cfg = config_mod.preset("oned")
        cfg.n_quad = 10
        with pytest.raises(ValueError):
            cfg.validate()
        cfg = config_mod.preset("oned")
        cfg.prior = {"kind": "diagonal"}
        with pytest.raises(ValueError):
            cfg.validate()

    def test_mixture_file_reference(self, tmp_path):
        cfg = config_mod.preset("oned")
        path = tmp_path / "src.json"
        path.write_text(json.dumps(cfg.source))
        mix = config_mod.resolve_mixture({"file": str(path)})
        assert mix.n_components == 2


class TestRunner:
    def test_artifact_tree_and_summary(self, tmp_path):
        cfg = small_oned_config()
        out = tmp_path / "run"
        summary = runner.run(cfg, str(out), repeats=1)
        expected = {
            "cost_matrix.json",
            "coupling.json",
            "flow_slices.csv",
            "paths.csv",
            "terminal_validation.json",
            "direct_sb.json",
            "gap_report.json",
            "summary.json",
            "timings.json",
        }
        assert expected <= set(os.listdir(out))
        for key in (
            "C",
            "pi",
            "transport",
            "entropy",
            "total",
            "j_proj",
            "j_direct",
            "gap_rel",
            "gap_report",
            "terminal",
        ):
            assert key in summary
        doc = json.loads((out / "summary.json").read_text())
        assert doc["schema_version"] == 1
        assert "wall_time" not in json.dumps(doc)
        cm = json.loads((out / "cost_matrix.json").read_text())
        assert set(cm) == {"eps", "C", "kappa"}
        cp = json.loads((out / "coupling.json").read_text())
        assert {"pi", "transport", "entropy", "total", "iterations", "residuals"} <= set(cp)
        db = json.loads((out / "direct_sb.json").read_text())
        assert {"M", "energy", "iterations", "residuals", "wall_time_s"} <= set(db)

    def test_rerun_byte_identical_summary(self, tmp_path):
        cfg = small_oned_config()
        runner.run(cfg, str(tmp_path / "a"), repeats=1)
        cfg2 = config_mod.ExperimentConfig.from_json(cfg.to_json())
        runner.run(cfg2, str(tmp_path / "b"), repeats=1)
        assert filecmp.cmp(
            tmp_path / "a" / "summary.json", tmp_path / "b" / "summary.json", shallow=False
        )

    def test_ablation_emits_three_couplings(self, tmp_path):
        cfg = config_mod.preset("prior_ablation")
        # shrink: couplings only need the mixtures and costs
        cfg.source = {"silhouette": "crescent", "n_components": 4, "n_points": 600,
                      "shape_seed": 0, "em_seed": 0, "em_max_iter": 60}
        cfg.target = {"silhouette": "star", "n_components": 4, "n_points": 600,
                      "shape_seed": 0, "em_seed": 0, "em_max_iter": 60}
        out = tmp_path / "ablation"
        runner.run(cfg, str(out), repeats=1, stages=("pairwise", "couple"))
        names = set(os.listdir(out))
        assert {
            "coupling.json",
            "coupling_product.json",
            "coupling_diagonal.json",
            "coupling_shifted.json",
        } <= names

    def test_stage_composition(self, tmp_path):
        cfg = small_oned_config()
        out = tmp_path / "staged"
        runner.run(cfg, str(out), repeats=1, stages=("pairwise",))
        assert os.listdir(out) == ["cost_matrix.json"]
        runner.run(cfg, str(out), repeats=1, stages=("couple",))
        assert "coupling.json" in os.listdir(out)
        runner.run(cfg, str(out), repeats=1, stages=("flow",))
        assert "flow_slices.csv" in os.listdir(out)
        runner.run(cfg, str(out), repeats=1, stages=("direct",))
        assert "direct_sb.json" in os.listdir(out)


class TestCliEntry:
    def test_presets_command(self, capsys):
        assert main(["presets"]) == 0
        out = capsys.readouterr().out.split()
        assert out == ["oned", "threemode", "eightmode", "shapes", "prior_ablation"]

    def test_experiment_with_override_config(self, tmp_path, capsys):
        override = {
            "simulation": {"n_particles": 200, "n_steps": 60, "time_stride": 6, "path_stride": 20},
            "diagnostics": {"enabled": False},
            "direct_sb": {"enabled": True, "n_per_axis": 101},
            "kinetic": {"n_time": 21, "n_samples": 200},
            "slices": {"times": [0.0, 0.5, 1.0], "n_grid": 21},
        }
        cfg_path = tmp_path / "override.json"
        cfg_path.write_text(json.dumps(override))
        out_dir = tmp_path / "exp"
        code = main(
            [
                "experiment",
                "oned",
                "--config",
                str(cfg_path),
                "--out",
                str(out_dir),
                "--seed",
                "3",
                "--repeats",
                "1",
            ]
        )
        assert code == 0
        headline = json.loads(capsys.readouterr().out)
        assert headline["name"] == "oned"
        assert "j_direct" in headline
        assert json.loads((out_dir / "summary.json").read_text())["seed"] == 3

    def test_validation_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"name": "x", "eps": -1, "source": {}, "target": {}}))
        assert main(["experiment", "--config", str(bad)]) == 2
        err = json.loads(capsys.readouterr().err)
        assert "error" in err and "message" in err

    def test_unknown_preset_exit_code(self, capsys):
        assert main(["experiment", "nope"]) == 2

    def test_nonconvergence_exit_code(self, tmp_path, capsys):
        override = {"sinkhorn": {"tol": 1e-18, "max_iter": 2}}
        cfg_path = tmp_path / "o.json"
        cfg_path.write_text(json.dumps(override))
        code = main(
            ["couple", "--preset", "oned", "--config", str(cfg_path), "--out", str(tmp_path / "nc")]
        )
        assert code == 3

    def test_threads_env_validation(self, monkeypatch):
        from mixbridge.parallel import max_workers

        monkeypatch.setenv("MIXBRIDGE_THREADS", "2")
        assert max_workers() <= 2
        monkeypatch.setenv("MIXBRIDGE_THREADS", "zebra")
        with pytest.raises(ValueError):
            max_workers()


class TestTimingInvariants:
    def test_coupling_solve_under_ten_ms(self, oned):
        from mixbridge.coupling import GibbsKernel, sinkhorn

        kernel = GibbsKernel.build(oned["costs"], oned["eta"])
        sinkhorn(kernel, oned["source"].weights, oned["target"].weights)  # warm
        t0 = time.perf_counter()
        sinkhorn(kernel, oned["source"].weights, oned["target"].weights)
        assert time.perf_counter() - t0 < 0.01

    @pytest.mark.slow
    def test_oned_without_diagnostics_under_five_seconds(self, tmp_path):
        cfg = config_mod.preset("oned")
        cfg.diagnostics = {"enabled": False}
        runner.run(cfg, str(tmp_path / "warm"), repeats=1, stages=("pairwise",))
        t0 = time.perf_counter()
        runner.run(cfg, str(tmp_path / "timed"), repeats=1)
        assert time.perf_counter() - t0 < 5.0
