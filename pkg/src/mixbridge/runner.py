"""Batch experiment runner: turns a config into an artifact tree.

Artifacts written under the output directory (all via temp-file + rename):

    cost_matrix.json         {"eps", "C", "kappa"}
    coupling.json            plan, objective terms, iterations, residuals
    coupling_<prior>.json    one per prior in ablation runs
    flow_slices.csv          (t, x1..xd, rho, u1..ud) over the slice grid
    paths.csv                decimated particle paths with display labels
    terminal_validation.json KS / mode-error stats (+ 1-d histogram overlay)
    direct_sb.json           grid baseline summary, if enabled
    gap_report.json          entropy-gap diagnostics, if enabled
    summary.json             every headline number; byte-deterministic
    timings.json             median wall times (kept out of summary.json so
                             reruns with one seed stay byte-identical)
"""

import csv
import json
import os
import time

import numpy as np

from .bridge import bridge_grid, cost_matrix
from .config import ExperimentConfig
from .coupling import (
    GibbsKernel,
    lifted_objective,
    product_prior,
    sinkhorn,
    structured_prior,
)
from .diagnostics import gap_report
from .direct_sb import axis_counts, compare, default_box, discretize, solve_direct
from .flow import ProjectedFlow
from .simulate import simulate_markov, validate_terminal

SUMMARY_SCHEMA_VERSION = 1


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_json(path: str, obj) -> None:
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _median_time(fn, repeats: int):
    """Run fn repeats times; returns (first result, median wall seconds)."""
    result = None
    times = []
    for r in range(max(1, repeats)):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
        if r == 0:
            result = out
    return result, float(np.median(times))


def _build_priors(cfg: ExperimentConfig, alpha0, alpha1):
    kind = cfg.prior.get("kind", "product")
    if kind == "product":
        return {"product": product_prior(alpha0, alpha1)}
    if kind == "diagonal":
        return {"diagonal": structured_prior(alpha0, alpha1, "diagonal", cfg.prior["theta"])}
    if kind == "shifted":
        return {
            "shifted": structured_prior(
                alpha0, alpha1, "shifted", cfg.prior["theta"], shift=cfg.prior.get("shift", 1)
            )
        }
    # ablation: the three admissible priors, product first (drives the rest
    # of the pipeline)
    theta = cfg.prior["theta"]
    shift = cfg.prior.get("shift", 3)
    return {
        "product": product_prior(alpha0, alpha1),
        "diagonal": structured_prior(alpha0, alpha1, "diagonal", theta),
        "shifted": structured_prior(alpha0, alpha1, "shifted", theta, shift=shift),
    }


def _slice_grid(box: np.ndarray, n_grid: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, n_grid) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def _write_slices(path: str, flow: ProjectedFlow, times, grid: np.ndarray) -> None:
    d = grid.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"x{a + 1}" for a in range(d)] + ["rho"] + [f"u{a + 1}" for a in range(d)])
        for t in times:
            rho = flow.density(t, grid)
            u = flow.drift(t, grid)
            for row in range(grid.shape[0]):
                writer.writerow(
                    [repr(float(t))]
                    + [repr(float(v)) for v in grid[row]]
                    + [repr(float(rho[row]))]
                    + [repr(float(v)) for v in u[row]]
                )


def _write_paths(path_file: str, ens, flow: ProjectedFlow, source, stride: int) -> None:
    """Decimated path export with a display label column: true labels for
    labeled runs, the initial source-component assignment otherwise."""
    if ens.labels is not None:
        labels = ens.labels
    else:
        x0 = ens.positions[:, 0, :]
        post = np.stack(
            [np.log(w) + c.logpdf(x0) for w, c in zip(source.weights, source.components)],
            axis=1,
        )
        labels = np.stack([np.argmax(post, axis=1), np.full(ens.n_particles, -1, dtype=int)], axis=1)
    with open(path_file, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["particle_id", "t"] + [f"x{a + 1}" for a in range(ens.dim)] + ["label_i", "label_j"])
        for p in range(0, ens.n_particles, max(1, stride)):
            for a, t in enumerate(ens.times):
                writer.writerow(
                    [p, repr(float(t))]
                    + [repr(float(v)) for v in ens.positions[p, a]]
                    + [int(labels[p, 0]), int(labels[p, 1])]
                )


ALL_STAGES = ("pairwise", "couple", "flow", "simulate", "direct", "diagnose")


def run(
    cfg: ExperimentConfig,
    out_dir: str,
    repeats: int = 5,
    seed: int | None = None,
    stages=None,
) -> dict:
    """Execute the pipeline for one config; returns the summary dict.

    `stages` restricts which artifacts are written (subcommand mode); the
    full run (stages=None) also writes summary.json and timings.json.
    """
    cfg.validate()
    full = stages is None
    stages = set(ALL_STAGES) if full else set(stages)
    need_coupling = bool(stages - {"pairwise", "direct"})
    need_flow = bool(stages & {"flow", "simulate", "diagnose"})
    if seed is not None:
        cfg.simulation["seed"] = int(seed)
    os.makedirs(out_dir, exist_ok=True)
    timings: dict[str, float] = {}
    summary: dict = {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "name": cfg.name,
        "eps": cfg.eps,
        "seed": cfg.simulation.get("seed"),
    }

    source = cfg.resolve_mixture("source")
    target = cfg.resolve_mixture("target")
    summary["source"] = source.to_dict()
    summary["target"] = target.to_dict()

    grid = bridge_grid(source, target, cfg.eps)
    costs, timings["cost_matrix_s"] = _median_time(
        lambda: cost_matrix(source, target, cfg.eps, n_quad=cfg.n_quad, bridges=grid),
        repeats,
    )
    if "pairwise" in stages:
        write_json(os.path.join(out_dir, "cost_matrix.json"), costs.to_dict())
    summary["C"] = costs.c.tolist()

    if not need_coupling:
        _run_direct(cfg, source, target, None, summary, timings, repeats, out_dir, stages)
        if full:
            write_json(os.path.join(out_dir, "summary.json"), summary)
            write_json(os.path.join(out_dir, "timings.json"), timings)
        return summary

    priors = _build_priors(cfg, source.weights, target.weights)
    sk = cfg.sinkhorn
    kw = (
        {"fixed_iters": sk["fixed_iters"]}
        if "fixed_iters" in sk
        else {"tol": sk["tol"], "max_iter": sk["max_iter"]}
    )
    couplings = {}
    for pname, eta in priors.items():
        kernel = GibbsKernel.build(costs, eta)
        res, solve_s = _median_time(
            lambda k=kernel: sinkhorn(k, source.weights, target.weights, **kw), repeats
        )
        timings[f"sinkhorn_{pname}_s"] = solve_s
        obj = lifted_objective(res.plan, costs, eta, cfg.eps)
        doc = {
            "prior": pname,
            "eta": eta.pi.tolist(),
            "pi": res.plan.pi.tolist(),
            "transport": obj.transport,
            "entropy": obj.entropy,
            "total": obj.total,
            "iterations": res.iterations,
            "residuals": list(res.residuals),
        }
        couplings[pname] = (res, eta, obj, doc)
        if "couple" in stages:
            suffix = "" if len(priors) == 1 else f"_{pname}"
            write_json(os.path.join(out_dir, f"coupling{suffix}.json"), doc)
        if len(priors) > 1:
            summary.setdefault("couplings", {})[pname] = {
                "transport": obj.transport,
                "entropy": obj.entropy,
                "total": obj.total,
            }

    main_prior = "product" if "product" in couplings else next(iter(couplings))
    res, eta, obj, doc = couplings[main_prior]
    if len(priors) > 1 and "couple" in stages:
        write_json(os.path.join(out_dir, "coupling.json"), doc)
    summary.update(
        {
            "pi": res.plan.pi.tolist(),
            "transport": obj.transport,
            "entropy": obj.entropy,
            "total": obj.total,
            "sinkhorn_iterations": res.iterations,
            "sinkhorn_residuals": list(res.residuals),
        }
    )

    flow = ProjectedFlow(res.plan, grid, cfg.eps)
    sim_seed = int(cfg.simulation.get("seed", 0))
    box = default_box(source, target)
    ke = None
    if need_flow:
        ke, timings["kinetic_s"] = _median_time(
            lambda: flow.kinetic_energy(
                n_time=cfg.kinetic["n_time"],
                n_samples=cfg.kinetic["n_samples"],
                seed=sim_seed,
            ),
            1,
        )
        summary["j_proj"] = ke.j_proj
        summary["j_proj_std_err"] = ke.std_err
        summary["j_lift"] = ke.j_lift

    if "flow" in stages:
        t0 = time.perf_counter()
        _write_slices(
            os.path.join(out_dir, "flow_slices.csv"),
            flow,
            cfg.slices["times"],
            _slice_grid(box, cfg.slices["n_grid"]),
        )
        timings["slices_s"] = time.perf_counter() - t0

    if "simulate" in stages and cfg.simulation.get("enabled", True):
        t0 = time.perf_counter()
        ens = simulate_markov(
            flow,
            source,
            cfg.simulation["n_particles"],
            cfg.simulation["n_steps"],
            sim_seed,
            time_stride=cfg.simulation.get("time_stride", 1),
        )
        timings["simulate_s"] = time.perf_counter() - t0
        _write_paths(
            os.path.join(out_dir, "paths.csv"),
            ens,
            flow,
            source,
            cfg.simulation.get("path_stride", 1),
        )
        tv = validate_terminal(ens, target)
        term = tv.to_dict()
        term["n_particles"] = ens.n_particles
        term["mean_path_energy"] = float(ens.path_energy.mean())
        if ens.dim == 1:
            edges = np.linspace(box[0, 0], box[0, 1], 121)
            counts, _ = np.histogram(ens.terminal()[:, 0], bins=edges)
            xs = np.linspace(box[0, 0], box[0, 1], 401)
            term["histogram"] = {"edges": edges.tolist(), "counts": counts.tolist()}
            term["target_curve"] = {"x": xs.tolist(), "pdf": target.pdf(xs[:, None]).tolist()}
        write_json(os.path.join(out_dir, "terminal_validation.json"), term)
        summary["terminal"] = tv.to_dict()
        summary["mean_path_energy"] = float(ens.path_energy.mean())

    _run_direct(cfg, source, target, ke, summary, timings, repeats, out_dir, stages)

    if "diagnose" in stages and cfg.diagnostics.get("enabled", False):
        t0 = time.perf_counter()
        rep = gap_report(
            flow,
            eta,
            n_particles=cfg.diagnostics["n_particles"],
            n_steps=cfg.diagnostics["n_steps"],
            seed=sim_seed,
            n_time=cfg.kinetic["n_time"],
            n_samples=cfg.kinetic["n_samples"],
        )
        timings["diagnostics_s"] = time.perf_counter() - t0
        write_json(os.path.join(out_dir, "gap_report.json"), rep.to_dict())
        summary["gap_report"] = rep.to_dict()

    if full:
        write_json(os.path.join(out_dir, "summary.json"), summary)
        write_json(os.path.join(out_dir, "timings.json"), timings)
    return summary


def _run_direct(cfg, source, target, ke, summary, timings, repeats, out_dir, stages):
    if "direct" not in stages or not cfg.direct_sb.get("enabled", False):
        return
    box = default_box(source, target)
    if "n_per_axis" in cfg.direct_sb:
        counts = (int(cfg.direct_sb["n_per_axis"]),) * source.dim
    else:
        counts = axis_counts(box, int(cfg.direct_sb["n_total_nodes"]))
    pts, r0, vol = discretize(source, box, counts)
    _, r1, _ = discretize(target, box, counts)
    cell = np.full(pts.shape[0], vol)
    gb, timings["direct_s"] = _median_time(
        lambda: solve_direct(
            r0,
            r1,
            pts,
            cfg.eps,
            cell_mass=cell,
            tol=cfg.direct_sb.get("tol", 1e-12),
            max_iter=cfg.direct_sb.get("max_iter", 1000),
            fixed_iters=cfg.direct_sb.get("fixed_iters"),
        ),
        repeats,
    )
    doc = gb.to_dict()
    doc["wall_time_s"] = timings["direct_s"]
    write_json(os.path.join(out_dir, "direct_sb.json"), doc)
    summary["j_direct"] = gb.energy
    summary["direct_nodes"] = gb.n_nodes
    if ke is not None:
        gaps = compare(ke.j_proj, gb)
        summary["gap_abs"] = gaps["gap_abs"]
        summary["gap_rel"] = gaps["gap_rel"]
