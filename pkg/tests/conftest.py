import numpy as np
import pytest

from mixbridge.bridge import bridge_grid, cost_matrix
from mixbridge.coupling import GibbsKernel, product_prior, sinkhorn
from mixbridge.flow import ProjectedFlow
from mixbridge.gmm import Gaussian, GaussianMixture


def random_spd(g: np.random.Generator, d: int, scale: float = 1.0) -> np.ndarray:
    a = g.normal(size=(d, d))
    return scale * (a @ a.T + (0.3 + g.random()) * np.eye(d))


def random_mixture(g: np.random.Generator, d: int, n: int, spread: float = 4.0) -> GaussianMixture:
    weights = g.dirichlet(np.full(n, 4.0))
    comps = [
        Gaussian(g.uniform(-spread, spread, d), random_spd(g, d, scale=0.4))
        for _ in range(n)
    ]
    return GaussianMixture(weights, comps)


def random_instance(seed: int, d: int | None = None, n1: int | None = None, n2: int | None = None):
    """A random endpoint pair with its bridges, coupling and flow."""
    g = np.random.default_rng(seed)
    d = d or int(g.integers(1, 3))
    n1 = n1 or int(g.integers(1, 4))
    n2 = n2 or int(g.integers(1, 4))
    eps = float(g.uniform(0.1, 0.6))
    src = random_mixture(g, d, n1)
    tgt = random_mixture(g, d, n2)
    grid = bridge_grid(src, tgt, eps)
    costs = cost_matrix(src, tgt, eps, n_quad=801, bridges=grid)
    eta = product_prior(src.weights, tgt.weights)
    # machine-tight marginals so endpoint identities hold at 1e-12
    plan = sinkhorn(
        GibbsKernel.build(costs, eta), src.weights, tgt.weights, tol=1e-14
    ).plan
    return src, tgt, grid, costs, eta, plan, ProjectedFlow(plan, grid, eps), eps


ONED_C = np.array([[1.1545, 21.1967], [6.1869, 1.2415]])
ONED_PI = np.array([[0.35, 0.30], [0.0, 0.35]])
THREEMODE_C = np.array(
    [[21.31, 34.92, 32.24], [30.45, 33.05, 21.61], [9.34, 12.66, 9.87]]
)
THREEMODE_PI = np.array(
    [[0.25, 0.15, 0.0], [0.0, 0.05, 0.30], [0.0, 0.25, 0.0]]
)


@pytest.fixture(scope="session")
def oned():
    src = GaussianMixture(
        [0.65, 0.35], [Gaussian([-3.0], [[0.45**2]]), Gaussian([2.0], [[0.60**2]])]
    )
    tgt = GaussianMixture(
        [0.35, 0.65], [Gaussian([-1.5], [[0.55**2]]), Gaussian([3.5], [[0.45**2]])]
    )
    eps = 0.35
    grid = bridge_grid(src, tgt, eps)
    costs = cost_matrix(src, tgt, eps, bridges=grid)
    eta = product_prior(src.weights, tgt.weights)
    res = sinkhorn(GibbsKernel.build(costs, eta), src.weights, tgt.weights)
    flow = ProjectedFlow(res.plan, grid, eps)
    return {
        "eps": eps,
        "source": src,
        "target": tgt,
        "grid": grid,
        "costs": costs,
        "eta": eta,
        "result": res,
        "plan": res.plan,
        "flow": flow,
    }


@pytest.fixture(scope="session")
def threemode():
    src = GaussianMixture(
        [0.40, 0.35, 0.25],
        [
            Gaussian([-4.0, -2.0], [[0.35, 0.08], [0.08, 0.28]]),
            Gaussian([-4.0, 1.8], [[0.30, -0.06], [-0.06, 0.45]]),
            Gaussian([-1.0, 0.0], [[0.48, 0.0], [0.0, 0.35]]),
        ],
    )
    tgt = GaussianMixture(
        [0.25, 0.45, 0.30],
        [
            Gaussian([2.5, -2.5], [[0.40, -0.05], [-0.05, 0.30]]),
            Gaussian([4.0, 0.4], [[0.35, 0.07], [0.07, 0.42]]),
            Gaussian([2.5, 2.7], [[0.32, -0.04], [-0.04, 0.36]]),
        ],
    )
    eps = 0.3
    grid = bridge_grid(src, tgt, eps)
    costs = cost_matrix(src, tgt, eps, bridges=grid)
    eta = product_prior(src.weights, tgt.weights)
    res = sinkhorn(GibbsKernel.build(costs, eta), src.weights, tgt.weights)
    flow = ProjectedFlow(res.plan, grid, eps)
    return {
        "eps": eps,
        "source": src,
        "target": tgt,
        "grid": grid,
        "costs": costs,
        "eta": eta,
        "result": res,
        "plan": res.plan,
        "flow": flow,
    }


def translation_instance(eps: float = 0.3, seed: int = 0):
    """The common-translation zero-gap class: Sigma1 = Sigma0 + eps I,
    diagonal assignment, pi = eta."""
    from mixbridge.coupling import Coupling

    g = np.random.default_rng(seed)
    v = g.uniform(-2.0, 2.0, 2)
    comps0 = [
        Gaussian([0.0, 0.0], random_spd(g, 2, 0.5)),
        Gaussian([3.0, 1.0], random_spd(g, 2, 0.4)),
    ]
    comps1 = [Gaussian(c.mean + v, c.cov + eps * np.eye(2)) for c in comps0]
    src = GaussianMixture([0.5, 0.5], comps0)
    tgt = GaussianMixture([0.5, 0.5], comps1)
    grid = bridge_grid(src, tgt, eps)
    pi = Coupling(np.diag([0.5, 0.5]), src.weights, tgt.weights)
    return src, tgt, grid, pi, v, ProjectedFlow(pi, grid, eps)
