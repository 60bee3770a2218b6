"""Gaussian and Gaussian-mixture densities: evaluation, sampling, moments,
EM fitting of point clouds, and JSON/CSV interchange."""

import json

import numpy as np
from scipy.special import logsumexp

from . import rng, spd
from .errors import DimensionMismatch, EmptyCluster, InvalidSimplex

_LOG_2PI = float(np.log(2.0 * np.pi))


class Gaussian:
    """Nondegenerate Gaussian N(mean, cov) with cached factorization.

    The covariance must pass the SPD invariants; the eigendecomposition is
    computed once and shared by pdf evaluation, sampling and whitening.
    """

    def __init__(self, mean, cov):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        if self.mean.ndim != 1:
            raise DimensionMismatch(f"mean must be a vector, got shape {self.mean.shape}")
        cov = np.asarray(cov, dtype=float)
        if cov.shape != (self.dim, self.dim):
            raise DimensionMismatch(f"cov shape {cov.shape} does not match dim {self.dim}")
        w, v = spd.spd_eigh(cov)
        self.cov = 0.5 * (cov + cov.T)
        self._eigvals = w
        self._eigvecs = v
        self.logdet = float(np.log(w).sum())
        self.precision = (v / w) @ v.T
        self.sqrt_cov = (v * np.sqrt(w)) @ v.T

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def logpdf(self, x) -> np.ndarray:
        x = _check_points(x, self.dim)
        diff = x - self.mean
        quad = np.einsum("...i,ij,...j->...", diff, self.precision, diff)
        return -0.5 * (self.dim * _LOG_2PI + self.logdet + quad)

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.logpdf(x))

    def sample(self, n: int, seed: int) -> np.ndarray:
        if n < 1:
            raise ValueError("n must be >= 1")
        g = rng.stream(seed, rng.SAMPLE, 1)
        z = g.standard_normal((n, self.dim))
        return self.mean + z @ self.sqrt_cov.T


class GaussianMixture:
    """Convex combination of Gaussians with strictly positive weights."""

    def __init__(self, weights, components):
        self.weights = np.asarray(weights, dtype=float)
        self.components = list(components)
        if self.weights.ndim != 1 or len(self.components) != self.weights.shape[0]:
            raise DimensionMismatch("weights and components disagree in length")
        if self.n_components < 1:
            raise InvalidSimplex("mixture needs at least one component")
        if np.any(self.weights <= 0.0):
            raise InvalidSimplex("all mixture weights must be > 0")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise InvalidSimplex(f"weights sum to {self.weights.sum()!r}, not 1")
        dims = {c.dim for c in self.components}
        if len(dims) != 1:
            raise DimensionMismatch(f"components have mixed dimensions {sorted(dims)}")
        self.log_weights = np.log(self.weights)

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def logpdf(self, x) -> np.ndarray:
        x = _check_points(x, self.dim)
        comp = np.stack([c.logpdf(x) for c in self.components], axis=-1)
        return logsumexp(comp + self.log_weights, axis=-1)

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.logpdf(x))

    def sample(self, n: int, seed: int) -> np.ndarray:
        if n < 1:
            raise ValueError("n must be >= 1")
        labels = self.sample_labels(n, seed)
        z = rng.stream(seed, rng.SAMPLE, 1).standard_normal((n, self.dim))
        out = np.empty((n, self.dim))
        for k, c in enumerate(self.components):
            mask = labels == k
            if mask.any():
                out[mask] = c.mean + z[mask] @ c.sqrt_cov.T
        return out

    def sample_labels(self, n: int, seed: int) -> np.ndarray:
        """Categorical component draws; a separate stream from the normals so
        that a single-component mixture samples identically to its component."""
        u = rng.stream(seed, rng.SAMPLE, 0).random(n)
        return np.searchsorted(np.cumsum(self.weights), u)

    def mean(self) -> np.ndarray:
        means = np.stack([c.mean for c in self.components])
        return self.weights @ means

    def cov(self) -> np.ndarray:
        m = self.mean()
        acc = np.zeros((self.dim, self.dim))
        for w, c in zip(self.weights, self.components):
            d = c.mean - m
            acc += w * (c.cov + np.outer(d, d))
        return acc

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": [c.mean.tolist() for c in self.components],
            "covs": [c.cov.tolist() for c in self.components],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianMixture":
        comps = [Gaussian(m, c) for m, c in zip(d["means"], d["covs"])]
        return cls(d["weights"], comps)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "GaussianMixture":
        return cls.from_dict(json.loads(text))


def _check_points(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if dim == 1 and x.ndim >= 1 and x.shape[-1] != 1:
        # allow bare scalars / 1-d arrays of scalars in one dimension
        x = x[..., np.newaxis]
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != dim:
        raise DimensionMismatch(f"points have dimension {x.shape[-1]}, expected {dim}")
    return x


def as_mixture(g) -> GaussianMixture:
    """Wrap a bare Gaussian as a one-component mixture."""
    if isinstance(g, GaussianMixture):
        return g
    return GaussianMixture([1.0], [g])


def load_points_csv(path) -> np.ndarray:
    """Point cloud: one point per row, d comma-separated columns, no header."""
    pts = np.loadtxt(path, delimiter=",", ndmin=2)
    return np.asarray(pts, dtype=float)


def save_points_csv(path, points) -> None:
    np.savetxt(path, np.asarray(points, dtype=float), delimiter=",")


def _kmeans_pp_init(x: np.ndarray, k: int, g: np.random.Generator) -> np.ndarray:
    """k-means++ seeding followed by the caller's hard-assignment moment step."""
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[g.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centers[i:] = centers[0]
            break
        probs = d2 / total
        centers[i] = x[np.searchsorted(np.cumsum(probs), g.random())]
        d2 = np.minimum(d2, np.sum((x - centers[i]) ** 2, axis=1))
    return centers


def _floor_cov(cov: np.ndarray, floor: float) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (cov + cov.T))
    return (v * np.maximum(w, floor)) @ v.T


def em_fit(
    points,
    n_components: int,
    seed: int = 0,
    max_iter: int = 500,
    cov_floor: float | None = None,
    tol: float = 1e-8,
    ll_history: list | None = None,
) -> GaussianMixture:
    """Fit a Gaussian mixture by EM with k-means++ seeding.

    Covariance eigenvalues are clamped at `cov_floor` (default 1e-4 times the
    mean per-axis data variance) so thin silhouette clouds cannot collapse a
    component. An emptied component is re-seeded at the point with the lowest
    mixture likelihood, at most three times per fit. When `ll_history` is a
    list, the per-iteration log-likelihoods are appended to it.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, np.newaxis]
    n, d = x.shape
    if n < n_components:
        raise ValueError(f"need at least {n_components} points, got {n}")
    if not np.isfinite(x).all():
        raise ValueError("points must be finite")
    if cov_floor is None:
        cov_floor = 1e-4 * float(x.var(axis=0).mean())
    cov_floor = max(cov_floor, 1e-300)

    g = rng.stream(seed, rng.EM_FIT)
    centers = _kmeans_pp_init(x, n_components, g)

    # hard-assignment moment step
    assign = np.argmin(
        np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2), axis=1
    )
    weights = np.empty(n_components)
    means = np.empty((n_components, d))
    covs = np.empty((n_components, d, d))
    data_cov = _floor_cov(np.cov(x, rowvar=False).reshape(d, d), cov_floor)
    for k in range(n_components):
        mask = assign == k
        cnt = int(mask.sum())
        weights[k] = max(cnt, 1) / n
        if cnt == 0:
            means[k] = centers[k]
            covs[k] = data_cov
            continue
        means[k] = x[mask].mean(axis=0)
        diff = x[mask] - means[k]
        covs[k] = _floor_cov(diff.T @ diff / cnt, cov_floor)
    weights /= weights.sum()

    reseeds = 0
    prev_ll = -np.inf
    for _ in range(max_iter):
        log_resp = np.empty((n, n_components))
        for k in range(n_components):
            log_resp[:, k] = np.log(weights[k]) + Gaussian(means[k], covs[k]).logpdf(x)
        norm = logsumexp(log_resp, axis=1)
        ll = float(norm.sum())
        if ll_history is not None:
            ll_history.append(ll)
        log_resp -= norm[:, None]
        resp = np.exp(log_resp)

        mass = resp.sum(axis=0)
        empty = np.flatnonzero(mass < 1e-10)
        if empty.size:
            if reseeds + empty.size > 3:
                raise EmptyCluster(
                    f"components {empty.tolist()} emptied after {reseeds} re-seeds"
                )
            worst = np.argsort(norm)
            for pos, k in enumerate(empty):
                means[k] = x[worst[pos]]
                covs[k] = data_cov
                weights[k] = 1.0 / n
            weights /= weights.sum()
            reseeds += empty.size
            prev_ll = -np.inf
            continue

        weights = mass / n
        for k in range(n_components):
            means[k] = resp[:, k] @ x / mass[k]
            diff = x - means[k]
            covs[k] = _floor_cov((resp[:, k] * diff.T) @ diff / mass[k], cov_floor)

        if ll - prev_ll <= tol * max(abs(prev_ll), 1.0) and np.isfinite(prev_ll):
            break
        prev_ll = ll

    return GaussianMixture(weights, [Gaussian(means[k], covs[k]) for k in range(n_components)])
