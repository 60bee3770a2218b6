"""State-only objects of the lifted construction.

Forgetting the component label leaves the mixture density
rho_t(x) = sum_ij pi_ij N(x; m_t^ij, Sigma_t^ij), the posterior label
weights gamma_ij(t, x) = pi_ij rho_t^ij(x) / rho_t(x), and the
posterior-averaged Markov feedback drift u_bar(t, x) = sum gamma_ij u^ij.
The pair (rho_t, u_bar) solves the Fokker-Planck equation with diffusion
eps/2 and matches both endpoint mixtures by construction.
"""

from dataclasses import dataclass

import numpy as np

from . import rng
from .bridge import _simpson_nodes
from .coupling import Coupling
from .errors import DimensionMismatch, DomainError

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class KineticEnergy:
    j_proj: float
    j_lift: float
    std_err: float


@dataclass(frozen=True)
class _PairState:
    """Frozen per-time data of one active pair: marginal and affine drift."""

    mean: np.ndarray
    prec: np.ndarray
    chol: np.ndarray
    norm: float        # log pi_ij - (d log 2pi + logdet Sigma_t) / 2
    a: np.ndarray
    c: np.ndarray


class ProjectedFlow:
    """Posterior-averaged Markov flow for a coupling and its bridge grid."""

    def __init__(self, pi: Coupling, bridges, eps: float):
        self.pi = pi
        self.bridges = bridges
        self.eps = float(eps)
        n1, n2 = pi.shape
        if len(bridges) != n1 or any(len(row) != n2 for row in bridges):
            raise DimensionMismatch("bridge grid shape does not match the plan")
        dims = {b.dim for row in bridges for b in row}
        eps_set = {b.eps for row in bridges for b in row}
        if len(dims) != 1 or eps_set != {self.eps}:
            raise DimensionMismatch("bridges must share one dimension and eps")
        self.dim = dims.pop()
        # active pairs only: the posterior is zero wherever pi_ij = 0
        self.active = [
            (i, j, float(np.log(pi.pi[i, j])), bridges[i][j])
            for i in range(n1)
            for j in range(n2)
            if pi.pi[i, j] > 0.0
        ]
        self._state_cache: tuple[float, list[_PairState]] | None = None

    def _states(self, t: float) -> list[_PairState]:
        if self._state_cache is not None and self._state_cache[0] == t:
            return self._state_cache[1]
        states = []
        for _, _, log_w, b in self.active:
            cov = b.cov_at(t)
            w, v = np.linalg.eigh(cov)
            prec = (v / w) @ v.T
            chol = np.linalg.cholesky(cov)
            norm = log_w - 0.5 * (self.dim * _LOG_2PI + float(np.log(w).sum()))
            states.append(_PairState(b.mean_at(t), prec, chol, norm, b.a_at(t), b.c))
        self._state_cache = (t, states)
        return states

    def _weighted_logpdfs(self, states, x):
        """log pi_ij + log rho_t^ij(x), plus the per-pair residuals x - m."""
        lp = np.empty(x.shape[:-1] + (len(states),))
        diffs = []
        for a, st in enumerate(states):
            diff = x - st.mean
            pd = diff @ st.prec
            lp[..., a] = st.norm - 0.5 * np.sum(pd * diff, axis=-1)
            diffs.append(diff)
        return lp, diffs

    # -- spec operations -------------------------------------------------------

    def log_density(self, t: float, x) -> np.ndarray:
        t, x = self._check_args(t, x)
        lp, _ = self._weighted_logpdfs(self._states(t), x)
        m = lp.max(axis=-1)
        return m + np.log(np.exp(lp - m[..., None]).sum(axis=-1))

    def density(self, t: float, x) -> np.ndarray:
        return np.exp(self.log_density(t, x))

    def posterior(self, t: float, x) -> np.ndarray:
        """gamma_ij(t, x); entries sum to one, zero off the plan's support."""
        t, x = self._check_args(t, x)
        lp, _ = self._weighted_logpdfs(self._states(t), x)
        m = lp.max(axis=-1, keepdims=True)
        w = np.exp(lp - m)
        gamma = w / w.sum(axis=-1, keepdims=True)
        out = np.zeros(x.shape[:-1] + self.pi.shape)
        for a, (i, j, _, _) in enumerate(self.active):
            out[..., i, j] = gamma[..., a]
        return out

    def drift(self, t: float, x) -> np.ndarray:
        """Posterior-averaged feedback sum_ij gamma_ij(t, x) u_t^ij(x)."""
        t, x = self._check_args(t, x)
        states = self._states(t)
        lp, diffs = self._weighted_logpdfs(states, x)
        m = lp.max(axis=-1, keepdims=True)
        w = np.exp(lp - m)
        gamma = w / w.sum(axis=-1, keepdims=True)
        out = np.zeros(x.shape)
        for a, st in enumerate(states):
            out += gamma[..., a, None] * (diffs[a] @ st.a.T + st.c)
        return out

    def _check_args(self, t, x):
        t = float(t)
        if not 0.0 <= t <= 1.0:
            raise DomainError("t must lie in [0, 1]")
        x = np.asarray(x, dtype=float)
        if self.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., np.newaxis]
        if x.shape[-1] != self.dim:
            raise DimensionMismatch(
                f"points have dimension {x.shape[-1]}, expected {self.dim}"
            )
        return t, x

    def drift_table(self, times) -> "DriftTable":
        """Precomputed drift evaluator on a fixed time grid (hot loop form)."""
        return DriftTable(self, times)

    # -- energies ----------------------------------------------------------------

    def j_lift(self, n_quad: int | None = None) -> float:
        """sum_ij pi_ij C_ij, the lifted kinetic energy."""
        kw = {} if n_quad is None else {"n_quad": n_quad}
        return float(
            sum(np.exp(log_w) * b.cost(**kw) for _, _, log_w, b in self.active)
        )

    def kinetic_energy(self, n_time: int = 101, n_samples: int = 4000, seed: int = 0) -> KineticEnergy:
        """Projected energy J_proj = int int (1/2) rho ||u_bar||^2 dx dt.

        Spatial expectations are component-stratified: at each Simpson node
        the x-integral is an average of E_{x ~ rho_t^ij}[||u_bar||^2] under
        exact Gaussian draws, combined with weights pi_ij. Streams are keyed
        by (seed, node, i, j). The Jensen bound j_proj <= j_lift holds up to
        Monte-Carlo error.
        """
        if n_time < 3 or n_time % 2 == 0:
            raise ValueError("n_time must be odd and >= 3")
        if n_samples < 100:
            raise ValueError("n_samples must be >= 100")
        t_nodes, w = _simpson_nodes(n_time)
        table = self.drift_table(t_nodes)
        weights = np.exp([log_w for _, _, log_w, _ in self.active])
        node_mean = np.zeros(n_time)
        node_var = np.zeros(n_time)
        batch = np.empty((len(self.active) * n_samples, self.dim))
        for k, t in enumerate(t_nodes):
            states = self._states(float(t))
            for a, (i, j, _, _) in enumerate(self.active):
                g = rng.stream(seed, rng.KINETIC, k, i, j)
                z = g.standard_normal((n_samples, self.dim))
                batch[a * n_samples : (a + 1) * n_samples] = (
                    states[a].mean + z @ states[a].chol.T
                )
            sq = np.sum(table.drift(k, batch) ** 2, axis=-1).reshape(len(self.active), n_samples)
            node_mean[k] = weights @ sq.mean(axis=1)
            node_var[k] = weights**2 @ (sq.var(axis=1, ddof=1) / n_samples)
        j_proj = 0.5 * float(w @ node_mean)
        std_err = 0.5 * float(np.sqrt(w**2 @ node_var))
        return KineticEnergy(j_proj, self.j_lift(), std_err)

    # -- analytic Fokker-Planck residual --------------------------------------------

    def fokker_planck_residual(self, t: float, x, drift_scale: float = 1.0) -> np.ndarray:
        """Normalized |d_t rho + div(rho u_bar) - (eps/2) lap rho| at (t, x).

        All derivatives are analytic: d_t through the polynomial t-dependence
        of (m_t, Sigma_t), spatial terms through Gaussian gradient and Hessian
        identities. The scale rho * (1 + ||u_bar||^2) / eps makes the check
        dimensionless. `drift_scale` perturbs the drift in the flux term only
        and serves as the negative control; the identity holds at 1.0.
        """
        tf = float(t)
        if not 0.0 < tf < 1.0:
            raise DomainError("t must lie in the open interval (0, 1)")
        _, x = self._check_args(tf, x)

        total = np.zeros(x.shape[:-1])
        rho = np.zeros(x.shape[:-1])
        flux = np.zeros(x.shape)
        for _, _, log_w, b in self.active:
            weight = np.exp(log_w)
            mean = b.mean_at(tf)
            cov = b.cov_at(tf)
            prec = np.linalg.inv(cov)
            dcov = (
                -2.0 * (1.0 - tf) * b.source.cov
                + 2.0 * tf * b.target.cov
                + (1.0 - 2.0 * tf) * b._sym01
            )
            a_t = b.a_at(tf)
            diff = x - mean
            pd = diff @ prec.T
            _, logdet = np.linalg.slogdet(cov)
            quad = np.sum(pd * diff, axis=-1)
            dens = np.exp(-0.5 * (self.dim * _LOG_2PI + logdet + quad))

            ddt = dens * (
                -0.5 * np.trace(prec @ dcov)
                + pd @ b.c
                + 0.5 * np.einsum("...i,ij,...j->...", pd, dcov, pd)
            )
            u = drift_scale * (diff @ a_t.T + b.c)
            div_flux = dens * (
                drift_scale * np.trace(a_t) - np.sum(u * pd, axis=-1)
            )
            lap = dens * (np.sum(pd * pd, axis=-1) - np.trace(prec))

            total += weight * (ddt + div_flux - 0.5 * self.eps * lap)
            rho += weight * dens
            flux += weight * dens[..., None] * u

        u_bar_sq = np.sum((flux / rho[..., None]) ** 2, axis=-1)
        scale = rho * (1.0 + u_bar_sq) / self.eps
        return np.abs(total) / scale


class DriftTable:
    """Stacked per-pair marginal and drift coefficients on a time grid.

    Evaluating the posterior-averaged drift inside an Euler loop touches the
    same node times for every particle block, so all eigendecompositions and
    solves happen once here, batched over (node, pair).
    """

    def __init__(self, flow: ProjectedFlow, times):
        t = np.asarray(times, dtype=float)
        if t.ndim != 1 or np.any(t < 0.0) or np.any(t > 1.0):
            raise DomainError("times must be a vector inside [0, 1]")
        self.dim = flow.dim
        means, covs, a_mats, log_ws = [], [], [], []
        for _, _, log_w, b in flow.active:
            means.append(b.mean_at(t))
            covs.append(b.cov_at(t))
            a_mats.append(b.a_at(t))
            log_ws.append(log_w)
        # pair axis first so the hot loop runs on stacked BLAS matmuls
        self.means = np.ascontiguousarray(np.stack(means))     # (A, m, d)
        cov = np.stack(covs)                                   # (A, m, d, d)
        w, v = np.linalg.eigh(cov)
        self.precs = np.ascontiguousarray((v / w[..., None, :]) @ np.swapaxes(v, -1, -2))
        self.norms = np.asarray(log_ws)[:, None] - 0.5 * (
            self.dim * _LOG_2PI + np.log(w).sum(axis=-1)
        )                                                      # (A, m)
        self.a_mats_t = np.ascontiguousarray(np.swapaxes(np.stack(a_mats), -1, -2))
        self.cs = np.stack([b.c for _, _, _, b in flow.active])[:, None, :]  # (A, 1, d)
        self._ws: dict = {}

    def _workspace(self, n: int):
        a, d = self.means.shape[0], self.dim
        ws = self._ws
        if ws.get("n") != n:
            ws.clear()
            ws["n"] = n
            ws["diff"] = np.empty((a, n, d))
            ws["pd"] = np.empty((a, n, d))
            ws["lp"] = np.empty((a, n))
            ws["red"] = np.empty(n)
            ws["out"] = np.empty((n, d))
        return ws

    def drift(self, k: int, x: np.ndarray) -> np.ndarray:
        """Drift at time node k for a batch of states x with shape (n, d).

        Returns an internal buffer reused by the next call; callers must
        consume it before evaluating the table again.
        """
        ws = self._workspace(x.shape[0])
        diff, pd, lp, red = ws["diff"], ws["pd"], ws["lp"], ws["red"]
        np.subtract(x[None, :, :], self.means[:, k, None, :], out=diff)
        np.matmul(diff, self.precs[:, k], out=pd)
        np.multiply(pd, diff, out=pd)
        np.sum(pd, axis=-1, out=lp)
        np.multiply(lp, -0.5, out=lp)
        np.add(lp, self.norms[:, k, None], out=lp)
        np.max(lp, axis=0, out=red)
        np.subtract(lp, red[None, :], out=lp)
        np.exp(lp, out=lp)                      # lp now holds unnormalized gamma
        np.sum(lp, axis=0, out=red)
        np.divide(lp, red[None, :], out=lp)
        u = np.matmul(diff, self.a_mats_t[:, k], out=pd)
        np.add(u, self.cs, out=u)
        np.multiply(u, lp[..., None], out=u)
        return np.sum(u, axis=0, out=ws["out"])
