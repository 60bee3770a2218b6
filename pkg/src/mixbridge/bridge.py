"""Closed-form Brownian Schrödinger bridge between two Gaussian components.

For source N(m0, S0), target N(m1, S1) and noise level eps, the optimal
endpoint coupling is jointly Gaussian with cross-covariance

    Sigma01 = S0^{1/2} Xi S0^{-1/2} - (eps/2) I,
    Xi      = (S0^{1/2} S1 S0^{1/2} + (eps^2/4) I)^{1/2},

the time-t marginal is N(m_t, Sigma_t) with

    m_t     = (1-t) m0 + t m1,
    Sigma_t = (1-t)^2 S0 + t^2 S1 + t(1-t) (Sigma01 + Sigma01^T + eps I),

the optimal drift is affine, u_t(x) = A_t (x - m_t) + c with c = m1 - m0,

    A_t = S_t Sigma_t^{-1},
    S_t = (1-t) (Sigma01^T - S0) + t (S1 - Sigma01 - eps I),

and the kinetic-energy cost is
C = 1/2 ||c||^2 + 1/2 \\int_0^1 tr(A_t Sigma_t A_t^T) dt.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import spd
from .errors import DimensionMismatch, DomainError
from .gmm import Gaussian, GaussianMixture
from .parallel import max_workers

DEFAULT_N_QUAD = 2001


@dataclass(frozen=True)
class BridgeMarginal:
    t: float
    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True)
class DriftCoeffs:
    t: float
    a: np.ndarray
    c: np.ndarray


class PairwiseBridge:
    """One (source, target) bridge; immutable after construction."""

    def __init__(self, source: Gaussian, target: Gaussian, eps: float,
                 _source_sqrts=None):
        if eps <= 0.0:
            raise DomainError("eps must be > 0")
        if source.dim != target.dim:
            raise DimensionMismatch(
                f"source dim {source.dim} != target dim {target.dim}"
            )
        self.eps = float(eps)
        self.source = source
        self.target = target
        d = source.dim
        eye = np.eye(d)

        if _source_sqrts is None:
            s0_sqrt, s0_isqrt = spd.spd_sqrt_and_inv_sqrt(source.cov)
        else:
            s0_sqrt, s0_isqrt = _source_sqrts
        inner = s0_sqrt @ target.cov @ s0_sqrt + (self.eps**2 / 4.0) * eye
        self.xi = spd.spd_sqrt(inner)
        # generally non-symmetric; stored un-symmetrized
        self.sigma01 = s0_sqrt @ self.xi @ s0_isqrt - (self.eps / 2.0) * eye
        self.c = target.mean - source.mean

        joint = np.block([[source.cov, self.sigma01], [self.sigma01.T, target.cov]])
        joint = 0.5 * (joint + joint.T)
        w = np.linalg.eigvalsh(joint)
        if w[0] < -1e-10 * max(w[-1], 1.0):
            raise DomainError(
                f"endpoint coupling not PSD: min eigenvalue {w[0]:.3e}"
            )

        self._sym01 = self.sigma01 + self.sigma01.T + self.eps * eye
        self._cost_cache: dict[int, float] = {}

    @property
    def dim(self) -> int:
        return self.source.dim

    # -- vectorized time evaluations (t may be scalar or 1-d array) ---------

    def mean_at(self, t) -> np.ndarray:
        t = _check_t(t)
        return np.multiply.outer(1.0 - t, self.source.mean) + np.multiply.outer(
            t, self.target.mean
        )

    def cov_at(self, t) -> np.ndarray:
        t = _check_t(t)
        omt = 1.0 - t
        cov = (
            np.multiply.outer(omt**2, self.source.cov)
            + np.multiply.outer(t**2, self.target.cov)
            + np.multiply.outer(t * omt, self._sym01)
        )
        return 0.5 * (cov + np.swapaxes(cov, -1, -2))

    def s_at(self, t) -> np.ndarray:
        t = _check_t(t)
        left = self.sigma01.T - self.source.cov
        right = self.target.cov - self.sigma01 - self.eps * np.eye(self.dim)
        return np.multiply.outer(1.0 - t, left) + np.multiply.outer(t, right)

    def a_at(self, t) -> np.ndarray:
        # A_t^T = Sigma_t^{-1} S_t^T since Sigma_t is symmetric
        return np.swapaxes(np.linalg.solve(self.cov_at(t), np.swapaxes(self.s_at(t), -1, -2)), -1, -2)

    # -- spec operations -----------------------------------------------------

    def marginal(self, t: float) -> BridgeMarginal:
        t = float(_check_t(t))
        return BridgeMarginal(t, self.mean_at(t), self.cov_at(t))

    def drift_coeffs(self, t: float) -> DriftCoeffs:
        t = float(_check_t(t))
        return DriftCoeffs(t, self.a_at(t), self.c.copy())

    def drift(self, t, x) -> np.ndarray:
        """u_t(x) = A_t (x - m_t) + c for a scalar t and one or many x."""
        t = float(_check_t(t))
        x = np.asarray(x, dtype=float)
        diff = x - self.mean_at(t)
        return diff @ self.a_at(t).T + self.c

    def cost(self, n_quad: int = DEFAULT_N_QUAD) -> float:
        """Kinetic energy by composite Simpson quadrature on n_quad nodes."""
        if n_quad in self._cost_cache:
            return self._cost_cache[n_quad]
        t, w = _simpson_nodes(n_quad)
        s = self.s_at(t)
        x = np.linalg.solve(self.cov_at(t), np.swapaxes(s, -1, -2))
        integrand = np.einsum("mab,mab->m", s, np.swapaxes(x, -1, -2))
        value = 0.5 * float(self.c @ self.c) + 0.5 * float(w @ integrand)
        self._cost_cache[n_quad] = value
        return value


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise DomainError("t must lie in [0, 1]")
    return t


def _simpson_nodes(n_quad: int):
    if n_quad < 3 or n_quad % 2 == 0:
        raise ValueError("n_quad must be odd and >= 3")
    t = np.linspace(0.0, 1.0, n_quad)
    w = np.ones(n_quad)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= (t[1] - t[0]) / 3.0
    return t, w


def build_bridge(source: Gaussian, target: Gaussian, eps: float) -> PairwiseBridge:
    return PairwiseBridge(source, target, eps)


def bridge_grid(src: GaussianMixture, tgt: GaussianMixture, eps: float):
    """All N1 x N2 pairwise bridges, sharing one factorization per source."""
    grid = []
    for p in src.components:
        sqrts = spd.spd_sqrt_and_inv_sqrt(p.cov)
        grid.append([PairwiseBridge(p, q, eps, _source_sqrts=sqrts) for q in tgt.components])
    return grid


@dataclass(frozen=True)
class CostMatrix:
    eps: float
    c: np.ndarray

    @property
    def n1(self) -> int:
        return self.c.shape[0]

    @property
    def n2(self) -> int:
        return self.c.shape[1]

    @property
    def kappa(self) -> np.ndarray:
        return self.c / self.eps

    def to_dict(self) -> dict:
        return {"eps": self.eps, "C": self.c.tolist(), "kappa": self.kappa.tolist()}


def cost_matrix(
    src: GaussianMixture,
    tgt: GaussianMixture,
    eps: float,
    n_quad: int = DEFAULT_N_QUAD,
    bridges=None,
) -> CostMatrix:
    """Entry (i, j) is the kinetic cost of steering source component i to
    target component j; rows are indexed by source components."""
    if src.dim != tgt.dim:
        raise DimensionMismatch(f"source dim {src.dim} != target dim {tgt.dim}")
    if bridges is None:
        bridges = bridge_grid(src, tgt, eps)
    flat = [b for row in bridges for b in row]
    if len(flat) >= 16:
        with ThreadPoolExecutor(max_workers=max_workers()) as pool:
            costs = list(pool.map(lambda b: b.cost(n_quad), flat))
    else:
        costs = [b.cost(n_quad) for b in flat]
    c = np.array(costs).reshape(len(bridges), -1)
    return CostMatrix(float(eps), c)
