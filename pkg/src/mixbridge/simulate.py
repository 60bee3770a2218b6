"""Euler-Maruyama particle simulation and terminal-marginal validation.

Each particle owns an independent counter-based stream keyed by
(seed, particle index), so enlarging an ensemble never reshuffles the paths
already assigned to lower indices. Drifts are evaluated at the left node of
every step (Ito convention) and never at t = 1.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from . import rng
from .coupling import Coupling
from .errors import DimensionMismatch, NonFinite
from .flow import ProjectedFlow
from .gmm import GaussianMixture

_BLOCK_FLOATS = 25_000_000  # cap on the per-block increment buffer


@dataclass(frozen=True)
class ParticleEnsemble:
    times: np.ndarray        # kept time nodes, times[0] = 0, times[-1] = 1
    positions: np.ndarray    # (n_particles, len(times), d)
    seed: int
    labels: np.ndarray | None = None   # (n_particles, 2) for labeled runs
    path_energy: np.ndarray | None = None  # per-particle sum 0.5||u||^2 dt

    @property
    def n_particles(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[2]

    def terminal(self) -> np.ndarray:
        return self.positions[:, -1, :]


def _kept_nodes(n_steps: int, time_stride: int) -> np.ndarray:
    kept = list(range(0, n_steps + 1, max(1, int(time_stride))))
    if kept[-1] != n_steps:
        kept.append(n_steps)
    return np.asarray(kept, dtype=int)


def _blocks(n_particles: int, n_steps: int, dim: int):
    block = max(1, min(n_particles, _BLOCK_FLOATS // max(1, n_steps * dim)))
    for lo in range(0, n_particles, block):
        yield lo, min(lo + block, n_particles)


def _particle_inputs(purpose, seed, lo, hi, n_steps, dim):
    """Per-particle uniform, initial normal and step increments."""
    n = hi - lo
    u = np.empty(n)
    z0 = np.empty((n, dim))
    incr = np.empty((n, n_steps, dim))
    for p in range(lo, hi):
        g = rng.stream(seed, purpose, p)
        u[p - lo] = g.random()
        z0[p - lo] = g.standard_normal(dim)
        incr[p - lo] = g.standard_normal((n_steps, dim))
    return u, z0, incr


def simulate_markov(
    flow: ProjectedFlow,
    rho0: GaussianMixture,
    n_particles: int,
    n_steps: int,
    seed: int,
    time_stride: int = 1,
) -> ParticleEnsemble:
    """Simulate dx = u_bar(t, x) dt + sqrt(eps) dw with x_0 ~ rho0.

    `time_stride` subsamples the stored trajectory (node 0 and node n_steps
    are always kept); the dynamics always advance with the full step count.
    """
    if n_steps < 2:
        raise ValueError("n_steps must be >= 2")
    if rho0.dim != flow.dim:
        raise DimensionMismatch("initial mixture dimension does not match flow")
    d = flow.dim
    dt = 1.0 / n_steps
    root = np.sqrt(flow.eps * dt)
    kept = _kept_nodes(n_steps, time_stride)
    kept_pos = {int(k): a for a, k in enumerate(kept)}

    positions = np.empty((n_particles, kept.size, d))
    energy = np.zeros(n_particles)
    cum_w = np.cumsum(rho0.weights)
    sqrt_covs = [c.sqrt_cov for c in rho0.components]
    means = [c.mean for c in rho0.components]
    table = flow.drift_table(np.arange(n_steps) * dt)

    for lo, hi in _blocks(n_particles, n_steps, d):
        u, z0, incr = _particle_inputs(rng.MARKOV_SIM, seed, lo, hi, n_steps, d)
        comp = np.searchsorted(cum_w, u)
        x = np.empty((hi - lo, d))
        for k in range(rho0.n_components):
            mask = comp == k
            if mask.any():
                x[mask] = means[k] + z0[mask] @ sqrt_covs[k].T
        positions[lo:hi, 0] = x
        for k in range(n_steps):
            drift = table.drift(k, x)
            energy[lo:hi] += 0.5 * np.sum(drift**2, axis=-1) * dt
            x = x + drift * dt + root * incr[:, k, :]
            if k + 1 in kept_pos:
                positions[lo:hi, kept_pos[k + 1]] = x
        if not np.isfinite(x).all():
            raise NonFinite(f"non-finite particle state in block [{lo}, {hi})")

    return ParticleEnsemble(kept / n_steps, positions, seed, None, energy)


def simulate_labeled(
    bridges,
    pi: Coupling,
    n_particles: int,
    n_steps: int,
    seed: int,
    time_stride: int = 1,
) -> ParticleEnsemble:
    """Two-step sampling of the lifted law: draw a label (i, j) from the
    plan, then follow that pair's affine bridge SDE."""
    if n_steps < 2:
        raise ValueError("n_steps must be >= 2")
    n1, n2 = pi.shape
    flat_pi = pi.pi.reshape(-1)
    cum_pi = np.cumsum(flat_pi)
    cum_pi[-1] = 1.0
    active = [(a, divmod(a, n2)) for a in range(n1 * n2) if flat_pi[a] > 0.0]
    d = bridges[0][0].dim
    eps = bridges[0][0].eps
    dt = 1.0 / n_steps
    root = np.sqrt(eps * dt)
    kept = _kept_nodes(n_steps, time_stride)
    kept_pos = {int(k): a for a, k in enumerate(kept)}

    # per-pair affine coefficients at the left node of every step
    t_nodes = np.arange(n_steps) * dt
    coeff = {}
    for a, (i, j) in active:
        b = bridges[i][j]
        coeff[a] = (b.a_at(t_nodes), b.mean_at(t_nodes), b.c)

    positions = np.empty((n_particles, kept.size, d))
    energy = np.zeros(n_particles)
    labels = np.empty((n_particles, 2), dtype=int)

    for lo, hi in _blocks(n_particles, n_steps, d):
        u, z0, incr = _particle_inputs(rng.LABELED_SIM, seed, lo, hi, n_steps, d)
        flat = np.searchsorted(cum_pi, u)
        labels[lo:hi, 0], labels[lo:hi, 1] = np.divmod(flat, n2)
        x = np.empty((hi - lo, d))
        masks = {}
        for a, (i, j) in active:
            mask = flat == a
            masks[a] = mask
            if mask.any():
                src = bridges[i][j].source
                x[mask] = src.mean + z0[mask] @ src.sqrt_cov.T
        positions[lo:hi, 0] = x
        drift = np.empty_like(x)
        for k in range(n_steps):
            for a, _ in active:
                mask = masks[a]
                if mask.any():
                    a_k, m_k, c = coeff[a]
                    drift[mask] = (x[mask] - m_k[k]) @ a_k[k].T + c
            energy[lo:hi] += 0.5 * np.sum(drift**2, axis=-1) * dt
            x = x + drift * dt + root * incr[:, k, :]
            if k + 1 in kept_pos:
                positions[lo:hi, kept_pos[k + 1]] = x
        if not np.isfinite(x).all():
            raise NonFinite(f"non-finite particle state in block [{lo}, {hi})")

    return ParticleEnsemble(kept / n_steps, positions, seed, labels, energy)


@dataclass(frozen=True)
class TerminalValidation:
    ks_1d: float | None
    mode_weight_err: float
    mode_moment_err: float

    def to_dict(self) -> dict:
        return {
            "ks_1d": self.ks_1d,
            "mode_weight_err": self.mode_weight_err,
            "mode_moment_err": self.mode_moment_err,
        }


def mixture_cdf_1d(target: GaussianMixture, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    out = np.zeros_like(x)
    for w, c in zip(target.weights, target.components):
        out += w * norm.cdf((x - c.mean[0]) / np.sqrt(c.cov[0, 0]))
    return out


def validate_terminal(ens: ParticleEnsemble, target: GaussianMixture) -> TerminalValidation:
    """Kolmogorov-Smirnov statistic (1-d only) plus per-mode weight and
    Mahalanobis mean errors under hard posterior assignment."""
    x = ens.terminal()
    if x.shape[0] == 0:
        raise ValueError("terminal slice is empty")
    if target.dim != ens.dim:
        raise DimensionMismatch("target dimension does not match the ensemble")
    n = x.shape[0]

    ks = None
    if ens.dim == 1:
        xs = np.sort(x[:, 0])
        cdf = mixture_cdf_1d(target, xs)
        grid = np.arange(1, n + 1) / n
        ks = float(max(np.abs(cdf - grid).max(), np.abs(cdf - grid + 1.0 / n).max()))

    log_post = np.stack(
        [np.log(w) + c.logpdf(x) for w, c in zip(target.weights, target.components)],
        axis=1,
    )
    assign = np.argmax(log_post, axis=1)
    freq = np.bincount(assign, minlength=target.n_components) / n
    weight_err = float(np.abs(freq - target.weights).sum())

    moment_err = 0.0
    for k, c in enumerate(target.components):
        mask = assign == k
        if not mask.any():
            moment_err = float("inf")
            continue
        delta = x[mask].mean(axis=0) - c.mean
        moment_err = max(moment_err, float(np.sqrt(delta @ c.precision @ delta)))

    return TerminalValidation(ks, weight_err, moment_err)


def write_paths_csv(path, ens: ParticleEnsemble, particle_stride: int = 1) -> None:
    """Rows (particle_id, t, x1..xd[, label_i, label_j]); exports every
    `particle_stride`-th particle."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["particle_id", "t"] + [f"x{a + 1}" for a in range(ens.dim)]
        if ens.labels is not None:
            header += ["label_i", "label_j"]
        writer.writerow(header)
        for p in range(0, ens.n_particles, max(1, int(particle_stride))):
            for a, t in enumerate(ens.times):
                row = [p, repr(float(t))] + [repr(float(v)) for v in ens.positions[p, a]]
                if ens.labels is not None:
                    row += [int(ens.labels[p, 0]), int(ens.labels[p, 1])]
                writer.writerow(row)
