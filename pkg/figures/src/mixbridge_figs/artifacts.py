"""Artifact-tree access with typed errors.

The renderer consumes only the files written by the experiment runner
(coupling*.json, flow_slices.csv, paths.csv, terminal_validation.json); it
never recomputes any of the science behind them.
"""

import json
import os
import warnings

import numpy as np


class MissingArtifact(FileNotFoundError):
    """A required artifact file is absent from the tree."""


class SchemaMismatch(ValueError):
    """An artifact is present but lacks a required field."""

    def __init__(self, artifact: str, field: str):
        super().__init__(f"{artifact}: missing or malformed field {field!r}")
        self.artifact = artifact
        self.field = field


def _path(artifact_dir: str, name: str) -> str:
    path = os.path.join(artifact_dir, name)
    if not os.path.isfile(path):
        raise MissingArtifact(f"{name} not found under {artifact_dir}")
    return path


def load_json(artifact_dir: str, name: str, required: tuple[str, ...]) -> dict:
    with open(_path(artifact_dir, name)) as fh:
        doc = json.load(fh)
    for field in required:
        if field not in doc:
            raise SchemaMismatch(name, field)
    return doc


def load_table(artifact_dir: str, name: str, required: tuple[str, ...]):
    """Header-keyed CSV as a dict of float columns (labels come back as
    floats too; cast at use sites)."""
    path = _path(artifact_dir, name)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # empty-file warning becomes an error
            data = np.genfromtxt(path, delimiter=",", names=True)
    except (ValueError, IndexError) as exc:
        raise MissingArtifact(f"{name} is empty or unparseable: {exc}") from exc
    if data.size == 0:
        raise MissingArtifact(f"{name} is empty")
    names = data.dtype.names or ()
    for field in required:
        if field not in names:
            raise SchemaMismatch(name, field)
    return {key: np.atleast_1d(data[key]) for key in names}


def state_dim(columns) -> int:
    return sum(1 for key in columns if key.startswith("x") and key[1:].isdigit())


def coupling_files(artifact_dir: str) -> dict[str, dict]:
    """All coupling documents in the tree, keyed by prior name; the plain
    coupling.json maps to its own declared prior (or "coupling")."""
    out = {}
    for name in sorted(os.listdir(artifact_dir)):
        if not (name.startswith("coupling") and name.endswith(".json")):
            continue
        doc = load_json(artifact_dir, name, ("pi",))
        if name == "coupling.json" and any(
            other.startswith("coupling_") for other in os.listdir(artifact_dir)
        ):
            continue  # ablation trees duplicate the main prior
        out[doc.get("prior", name[len("coupling_"):-len(".json")] or "coupling")] = doc
    if not out:
        raise MissingArtifact(f"no coupling artifacts under {artifact_dir}")
    return out
