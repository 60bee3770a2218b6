"""The six figure types rendered from an experiment artifact tree.

Every figure is produced from artifact bytes alone with a pinned style, no
timestamps and fixed raster settings, so rendering is byte-deterministic
given identical artifacts.
"""

from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .artifacts import (
    MissingArtifact,
    SchemaMismatch,
    coupling_files,
    load_json,
    load_table,
    state_dim,
)

FIGURES = (
    "endpoints",
    "slices",
    "paths",
    "coupling_heatmap",
    "terminal",
    "ablation_grid",
)

_SAVE_KW = {"dpi": 110, "metadata": {"Software": "mixbridge-figs"}}
_CMAP = "viridis"
_LABEL_COLORS = plt.get_cmap("tab10")


@dataclass
class FigureSpec:
    artifact_dir: str
    figure: str
    times: list[float] | None = None      # subset of slice times
    decimate: int = 1                     # keep every k-th exported particle
    color_by_label: bool = True
    out: str = field(default="figure.png")

    def validate(self) -> None:
        if self.figure not in FIGURES:
            raise ValueError(f"unknown figure {self.figure!r}; choose from {FIGURES}")
        if self.decimate < 1:
            raise ValueError("decimate must be >= 1")


def render(spec: FigureSpec) -> str:
    """Render one figure; returns the written file path."""
    spec.validate()
    fig = _BUILDERS[spec.figure](spec)
    fig.savefig(spec.out, **_SAVE_KW)
    plt.close(fig)
    return spec.out


# -- slice-grid helpers -------------------------------------------------------


def _load_slices(spec: FigureSpec):
    cols = load_table(spec.artifact_dir, "flow_slices.csv", ("t", "x1", "rho"))
    dim = state_dim(cols)
    times = np.unique(cols["t"])
    if spec.times is not None:
        wanted = np.asarray(spec.times, dtype=float)
        times = np.array(
            [t for t in times if np.any(np.isclose(t, wanted, atol=1e-9))]
        )
        if times.size == 0:
            raise ValueError("requested slice times not present in flow_slices.csv")
    return cols, dim, times


def _slice_panel(ax, cols, dim, t):
    mask = np.isclose(cols["t"], t)
    if dim == 1:
        x = cols["x1"][mask]
        order = np.argsort(x)
        ax.plot(x[order], cols["rho"][mask][order], lw=1.4)
        ax.set_xlabel("x")
        ax.set_ylabel("density")
    else:
        x1 = cols["x1"][mask]
        x2 = cols["x2"][mask]
        rho = cols["rho"][mask]
        n1 = np.unique(x1).size
        n2 = np.unique(x2).size
        if n1 * n2 != rho.size:
            raise SchemaMismatch("flow_slices.csv", "x1/x2 grid layout")
        grid = rho.reshape(n1, n2)
        ax.contourf(
            np.unique(x1), np.unique(x2), grid.T, levels=24, cmap=_CMAP
        )
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        ax.set_aspect("equal")
    ax.set_title(f"t = {t:g}")


def _endpoints(spec: FigureSpec):
    cols, dim, times = _load_slices(spec)
    lo, hi = times.min(), times.max()
    if dim == 1:
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for t, label in ((lo, "initial"), (hi, "terminal")):
            mask = np.isclose(cols["t"], t)
            x = cols["x1"][mask]
            order = np.argsort(x)
            ax.plot(x[order], cols["rho"][mask][order], lw=1.6, label=label)
        ax.legend()
        ax.set_xlabel("x")
        ax.set_ylabel("density")
        ax.set_title("endpoint densities")
    else:
        fig, axes = plt.subplots(1, 2, figsize=(9.0, 4.2))
        for ax, t, label in zip(axes, (lo, hi), ("initial", "terminal")):
            _slice_panel(ax, cols, dim, t)
            ax.set_title(f"{label} (t = {t:g})")
    fig.tight_layout()
    return fig


def _slices(spec: FigureSpec):
    cols, dim, times = _load_slices(spec)
    n = times.size
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.4), squeeze=False)
    for ax, t in zip(axes[0], times):
        _slice_panel(ax, cols, dim, t)
    fig.suptitle("projected density evolution")
    fig.tight_layout()
    return fig


def _paths(spec: FigureSpec):
    cols = load_table(spec.artifact_dir, "paths.csv", ("particle_id", "t", "x1"))
    dim = state_dim(cols)
    ids = cols["particle_id"].astype(int)
    keep = np.unique(ids)[:: spec.decimate]
    have_labels = "label_i" in cols and spec.color_by_label
    fig, ax = plt.subplots(figsize=(6.4, 4.6))
    for pid in keep:
        mask = ids == pid
        color = (
            _LABEL_COLORS(int(cols["label_i"][mask][0]) % 10)
            if have_labels
            else "steelblue"
        )
        if dim == 1:
            ax.plot(cols["t"][mask], cols["x1"][mask], lw=0.6, alpha=0.7, color=color)
        else:
            ax.plot(cols["x1"][mask], cols["x2"][mask], lw=0.6, alpha=0.7, color=color)
    if dim == 1:
        ax.set_xlabel("t")
        ax.set_ylabel("x")
    else:
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        ax.set_aspect("equal")
    ax.set_title(f"sample paths ({keep.size} shown)")
    fig.tight_layout()
    return fig


def _heatmap(ax, matrix, title):
    m = np.asarray(matrix, dtype=float)
    im = ax.imshow(m, cmap=_CMAP, vmin=0.0)
    ax.set_title(title, fontsize=9)
    ax.set_xlabel("TC")
    ax.set_ylabel("IC")
    ax.set_xticks(range(m.shape[1]))
    ax.set_yticks(range(m.shape[0]))
    return im


def _coupling_heatmap(spec: FigureSpec):
    docs = coupling_files(spec.artifact_dir)
    names = list(docs)
    n = len(names)
    fig, axes = plt.subplots(2, n, figsize=(3.1 * n, 6.0), squeeze=False)
    for col, name in enumerate(names):
        doc = docs[name]
        if "eta" not in doc:
            raise SchemaMismatch(f"coupling ({name})", "eta")
        _heatmap(axes[0][col], doc["eta"], f"prior eta ({name})")
        _heatmap(axes[1][col], doc["pi"], f"optimized pi ({name})")
    fig.tight_layout()
    return fig


def _ablation_grid(spec: FigureSpec):
    docs = coupling_files(spec.artifact_dir)
    names = list(docs)
    n = len(names)
    fig, axes = plt.subplots(2, n, figsize=(3.4 * n, 6.4), squeeze=False)
    for col, name in enumerate(names):
        doc = docs[name]
        if "eta" not in doc:
            raise SchemaMismatch(f"coupling ({name})", "eta")
        for row, key, label in ((0, "eta", "eta"), (1, "pi", "pi*")):
            ax = axes[row][col]
            m = np.asarray(doc[key], dtype=float)
            _heatmap(ax, m, f"{label} ({name})")
            if m.size <= 36:  # annotate mass fractions on small plans
                for i in range(m.shape[0]):
                    for j in range(m.shape[1]):
                        ax.text(
                            j,
                            i,
                            f"{m[i, j]:.2f}",
                            ha="center",
                            va="center",
                            fontsize=6,
                            color="white",
                        )
    fig.tight_layout()
    return fig


def _terminal(spec: FigureSpec):
    doc = load_json(
        spec.artifact_dir,
        "terminal_validation.json",
        ("mode_weight_err", "mode_moment_err"),
    )
    if "histogram" in doc and "target_curve" in doc:
        edges = np.asarray(doc["histogram"]["edges"], dtype=float)
        counts = np.asarray(doc["histogram"]["counts"], dtype=float)
        total = counts.sum() * np.diff(edges)
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        ax.stairs(counts / np.maximum(total, 1e-300), edges, fill=True, alpha=0.5,
                  label="terminal particles")
        ax.plot(
            doc["target_curve"]["x"],
            doc["target_curve"]["pdf"],
            lw=1.6,
            color="crimson",
            label="target density",
        )
        ax.legend()
        ax.set_xlabel("x")
        ax.set_ylabel("density")
    else:
        cols = load_table(spec.artifact_dir, "paths.csv", ("particle_id", "t", "x1"))
        if state_dim(cols) < 2:
            raise SchemaMismatch("terminal_validation.json", "histogram")
        t_max = cols["t"].max()
        mask = np.isclose(cols["t"], t_max)
        slices, dim, times = _load_slices(FigureSpec(spec.artifact_dir, "slices"))
        fig, ax = plt.subplots(figsize=(5.4, 4.8))
        _slice_panel(ax, slices, dim, times.max())
        ax.plot(
            cols["x1"][mask], cols["x2"][mask], ".", ms=3.0, color="white", alpha=0.8
        )
    ks = doc.get("ks_1d")
    ks_txt = f", KS {ks:.4f}" if isinstance(ks, float) else ""
    fig.axes[0].set_title(
        f"terminal validation (weight err {doc['mode_weight_err']:.4f}{ks_txt})"
    )
    fig.tight_layout()
    return fig


_BUILDERS = {
    "endpoints": _endpoints,
    "slices": _slices,
    "paths": _paths,
    "coupling_heatmap": _coupling_heatmap,
    "terminal": _terminal,
    "ablation_grid": _ablation_grid,
}
