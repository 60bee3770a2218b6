"""Experiment configuration: a single JSON document per run.

Flags only choose a preset, an override file, an output directory and a
seed; every scientific parameter lives in the config for provenance. The
five bundled presets reproduce the reference experiments: a 1-d two-mode
transfer (eps 0.35), a 2-d three-mode transfer (eps 0.3), an eight-mode
splitting on a radius-5.1 circle (eps 0.08), a crescent-to-star shape
morph with ten fitted components, and the prior-coupling ablation with
theta = 0.90.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import shapes
from .errors import UnknownPreset
from .gmm import Gaussian, GaussianMixture, em_fit, load_points_csv

PRESET_NAMES = ("oned", "threemode", "eightmode", "shapes", "prior_ablation")


@dataclass
class ExperimentConfig:
    name: str
    eps: float
    source: dict
    target: dict
    prior: dict = field(default_factory=lambda: {"kind": "product"})
    sinkhorn: dict = field(default_factory=lambda: {"tol": 1e-12, "max_iter": 10000})
    n_quad: int = 2001
    kinetic: dict = field(default_factory=lambda: {"n_time": 101, "n_samples": 4000})
    simulation: dict = field(
        default_factory=lambda: {
            "enabled": True,
            "n_particles": 10000,
            "n_steps": 800,
            "seed": 7,
            "time_stride": 8,
            "path_stride": 100,
        }
    )
    direct_sb: dict = field(default_factory=lambda: {"enabled": False})
    diagnostics: dict = field(default_factory=lambda: {"enabled": False})
    slices: dict = field(
        default_factory=lambda: {
            "times": [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0],
            "n_grid": 201,
        }
    )
    output_dir: str | None = None

    def validate(self) -> None:
        if not self.name:
            raise ValueError("config needs a name")
        if not (self.eps > 0.0 and math.isfinite(self.eps)):
            raise ValueError("eps must be a positive finite real")
        if self.prior.get("kind") not in {"product", "diagonal", "shifted", "ablation"}:
            raise ValueError(f"unknown prior kind {self.prior.get('kind')!r}")
        if self.prior.get("kind") != "product":
            theta = self.prior.get("theta")
            if theta is None or not 0.0 <= theta < 1.0:
                raise ValueError("structured priors need theta in [0, 1)")
        if self.n_quad < 3 or self.n_quad % 2 == 0:
            raise ValueError("n_quad must be odd and >= 3")
        sk = self.sinkhorn
        if "fixed_iters" in sk:
            if sk["fixed_iters"] < 1:
                raise ValueError("fixed_iters must be >= 1")
        elif not (sk.get("tol", 0) > 0 and sk.get("max_iter", 0) >= 1):
            raise ValueError("sinkhorn needs tol > 0 and max_iter >= 1")
        if self.kinetic["n_time"] < 3 or self.kinetic["n_time"] % 2 == 0:
            raise ValueError("kinetic n_time must be odd and >= 3")
        if self.kinetic["n_samples"] < 100:
            raise ValueError("kinetic n_samples must be >= 100")
        sim = self.simulation
        if sim.get("enabled", True):
            if sim["n_particles"] < 1 or sim["n_steps"] < 2:
                raise ValueError("simulation needs n_particles >= 1, n_steps >= 2")
            if sim["seed"] < 0:
                raise ValueError("seed must be nonnegative")
        if self.direct_sb.get("enabled", False):
            if "n_per_axis" not in self.direct_sb and "n_total_nodes" not in self.direct_sb:
                raise ValueError("direct_sb needs n_per_axis or n_total_nodes")
        if self.diagnostics.get("enabled", False):
            if self.diagnostics["n_particles"] < 2 or self.diagnostics["n_steps"] < 2:
                raise ValueError("diagnostics needs n_particles >= 2, n_steps >= 2")
        times = self.slices["times"]
        if any(not 0.0 <= t <= 1.0 for t in times) or self.slices["n_grid"] < 2:
            raise ValueError("slices need times in [0, 1] and n_grid >= 2")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    def resolve_mixture(self, which: str) -> GaussianMixture:
        return resolve_mixture(getattr(self, which))


def resolve_mixture(spec: dict) -> GaussianMixture:
    """Inline parameters, a JSON file reference, or a silhouette generator."""
    if "weights" in spec:
        return GaussianMixture.from_dict(spec)
    if "file" in spec:
        with open(spec["file"]) as fh:
            return GaussianMixture.from_dict(json.load(fh))
    if "silhouette" in spec:
        name = spec["silhouette"]
        if name in shapes.GENERATORS:
            pts = shapes.GENERATORS[name](
                n_points=spec.get("n_points", 4000), seed=spec.get("shape_seed", 0)
            )
        else:
            pts = load_points_csv(name)
        return em_fit(
            pts,
            spec.get("n_components", 10),
            seed=spec.get("em_seed", 0),
            max_iter=spec.get("em_max_iter", 500),
        )
    raise ValueError("mixture spec needs weights/means/covs, file, or silhouette")


def _mixture_dict(weights, means, covs) -> dict:
    return {
        "weights": [float(w) for w in weights],
        "means": [[float(v) for v in np.atleast_1d(m)] for m in means],
        "covs": [np.atleast_2d(np.asarray(c, dtype=float)).tolist() for c in covs],
    }


def _oned() -> ExperimentConfig:
    return ExperimentConfig(
        name="oned",
        eps=0.35,
        source=_mixture_dict([0.65, 0.35], [[-3.0], [2.0]], [[[0.45**2]], [[0.60**2]]]),
        target=_mixture_dict([0.35, 0.65], [[-1.5], [3.5]], [[[0.55**2]], [[0.45**2]]]),
        simulation={
            "enabled": True,
            "n_particles": 30000,
            "n_steps": 800,
            "seed": 7,
            "time_stride": 8,
            "path_stride": 300,
        },
        direct_sb={"enabled": True, "n_per_axis": 601, "tol": 1e-12, "max_iter": 500},
        diagnostics={"enabled": True, "n_particles": 2000, "n_steps": 1500},
        slices={"times": [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], "n_grid": 401},
    )


def _threemode() -> ExperimentConfig:
    return ExperimentConfig(
        name="threemode",
        eps=0.3,
        source=_mixture_dict(
            [0.40, 0.35, 0.25],
            [[-4.0, -2.0], [-4.0, 1.8], [-1.0, 0.0]],
            [
                [[0.35, 0.08], [0.08, 0.28]],
                [[0.30, -0.06], [-0.06, 0.45]],
                [[0.48, 0.0], [0.0, 0.35]],
            ],
        ),
        target=_mixture_dict(
            [0.25, 0.45, 0.30],
            [[2.5, -2.5], [4.0, 0.4], [2.5, 2.7]],
            [
                [[0.40, -0.05], [-0.05, 0.30]],
                [[0.35, 0.07], [0.07, 0.42]],
                [[0.32, -0.04], [-0.04, 0.36]],
            ],
        ),
        simulation={
            "enabled": True,
            "n_particles": 30000,
            "n_steps": 1500,
            "seed": 7,
            "time_stride": 15,
            "path_stride": 300,
        },
        direct_sb={"enabled": True, "n_total_nodes": 3111, "tol": 1e-12, "max_iter": 2000},
        diagnostics={"enabled": True, "n_particles": 2000, "n_steps": 1500},
        slices={"times": [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], "n_grid": 61},
    )


def _eightmode() -> ExperimentConfig:
    radius = 5.1
    angles = [2.0 * math.pi * (j - 1) / 8.0 for j in range(1, 9)]
    means = [[radius * math.cos(a), radius * math.sin(a)] for a in angles]
    covs = []
    for a in angles:
        rot = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
        covs.append(rot @ np.diag([0.16, 0.10]) @ rot.T)
    return ExperimentConfig(
        name="eightmode",
        eps=0.08,
        source=_mixture_dict([1.0], [[0.0, 0.0]], [0.15 * np.eye(2)]),
        target=_mixture_dict([1.0 / 8.0] * 8, means, covs),
        simulation={
            "enabled": True,
            "n_particles": 30000,
            "n_steps": 1500,
            "seed": 7,
            "time_stride": 15,
            "path_stride": 300,
        },
        diagnostics={"enabled": True, "n_particles": 2000, "n_steps": 1500},
        slices={"times": [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], "n_grid": 61},
    )


def _silhouette_spec(name: str) -> dict:
    return {
        "silhouette": name,
        "n_components": 10,
        "n_points": 4000,
        "shape_seed": 0,
        "em_seed": 0,
        "em_max_iter": 500,
    }


def _shapes() -> ExperimentConfig:
    return ExperimentConfig(
        name="shapes",
        eps=0.3,
        source=_silhouette_spec("crescent"),
        target=_silhouette_spec("star"),
        kinetic={"n_time": 51, "n_samples": 400},
        simulation={
            "enabled": True,
            "n_particles": 6000,
            "n_steps": 400,
            "seed": 7,
            "time_stride": 4,
            "path_stride": 60,
        },
        diagnostics={"enabled": False},
        slices={"times": [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], "n_grid": 61},
    )


def _prior_ablation() -> ExperimentConfig:
    cfg = _shapes()
    cfg.name = "prior_ablation"
    cfg.prior = {"kind": "ablation", "theta": 0.90, "shift": 3}
    return cfg


_PRESETS = {
    "oned": _oned,
    "threemode": _threemode,
    "eightmode": _eightmode,
    "shapes": _shapes,
    "prior_ablation": _prior_ablation,
}


def preset(name: str) -> ExperimentConfig:
    if name not in _PRESETS:
        raise UnknownPreset(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    cfg = _PRESETS[name]()
    cfg.validate()
    return cfg


def presets() -> list[str]:
    return list(PRESET_NAMES)
