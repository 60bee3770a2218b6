"""Build reduced-scale artifact trees through the mixbridge CLI (the
renderer's only interface to the primary component)."""

import json
import shutil
import subprocess

import pytest

PRESETS = ("oned", "threemode", "eightmode", "shapes", "prior_ablation")

_SMALL_SIM = {"n_particles": 200, "n_steps": 50, "time_stride": 5, "path_stride": 20}
_SMALL_KIN = {"n_time": 11, "n_samples": 150}
_SMALL_SIL = {"n_points": 700, "n_components": 5, "em_max_iter": 80}

OVERRIDES = {
    "oned": {
        "simulation": _SMALL_SIM,
        "diagnostics": {"enabled": False},
        "direct_sb": {"enabled": True, "n_per_axis": 101},
        "kinetic": _SMALL_KIN,
        "slices": {"times": [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], "n_grid": 41},
    },
    "threemode": {
        "simulation": _SMALL_SIM,
        "diagnostics": {"enabled": False},
        "direct_sb": {"enabled": False},
        "kinetic": _SMALL_KIN,
        "slices": {"times": [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], "n_grid": 25},
    },
    "eightmode": {
        "simulation": _SMALL_SIM,
        "diagnostics": {"enabled": False},
        "kinetic": _SMALL_KIN,
        "slices": {"times": [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], "n_grid": 25},
    },
    "shapes": {
        "source": _SMALL_SIL,
        "target": _SMALL_SIL,
        "simulation": _SMALL_SIM,
        "kinetic": _SMALL_KIN,
        "slices": {"times": [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], "n_grid": 25},
    },
    "prior_ablation": {
        "source": _SMALL_SIL,
        "target": _SMALL_SIL,
        "simulation": _SMALL_SIM,
        "kinetic": _SMALL_KIN,
        "slices": {"times": [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], "n_grid": 25},
    },
}


@pytest.fixture(scope="session")
def artifact_trees(tmp_path_factory):
    if shutil.which("mixbridge") is None:
        pytest.skip("mixbridge CLI not installed")
    root = tmp_path_factory.mktemp("trees")
    trees = {}
    for name in PRESETS:
        override = root / f"{name}_override.json"
        override.write_text(json.dumps(OVERRIDES[name]))
        out = root / name
        subprocess.run(
            [
                "mixbridge",
                "experiment",
                name,
                "--config",
                str(override),
                "--out",
                str(out),
                "--seed",
                "3",
                "--repeats",
                "1",
            ],
            check=True,
            capture_output=True,
        )
        trees[name] = out
    return trees
