import numpy as np
import pytest

from mixbridge.bridge import build_bridge
from mixbridge.coupling import Coupling
from mixbridge.errors import DomainError
from mixbridge.flow import ProjectedFlow
from mixbridge.gmm import Gaussian, GaussianMixture

from conftest import random_instance, random_spd, translation_instance


def single_pair_flow(seed=0, eps=0.3):
    g = np.random.default_rng(seed)
    b = build_bridge(
        Gaussian(g.normal(size=2), random_spd(g, 2, 0.5)),
        Gaussian(g.normal(size=2), random_spd(g, 2, 0.5)),
        eps,
    )
    pi = Coupling(np.array([[1.0]]), np.array([1.0]), np.array([1.0]))
    return b, ProjectedFlow(pi, [[b]], eps)


class TestDensity:
    def test_endpoint_identities(self, oned):
        flow, src, tgt = oned["flow"], oned["source"], oned["target"]
        xs = np.random.default_rng(0).uniform(-6.0, 6.0, (200, 1))
        assert np.abs(flow.density(0.0, xs) / src.pdf(xs) - 1.0).max() < 1e-12
        assert np.abs(flow.density(1.0, xs) / tgt.pdf(xs) - 1.0).max() < 1e-12

    def test_single_pair_matches_bridge_marginal(self):
        b, flow = single_pair_flow()
        x = np.random.default_rng(1).normal(size=(50, 2), scale=2.0)
        marg = b.marginal(0.4)
        ref = Gaussian(marg.mean, marg.cov).pdf(x)
        assert np.allclose(flow.density(0.4, x), ref, rtol=1e-12)

    def test_domain_error(self, oned):
        with pytest.raises(DomainError):
            oned["flow"].density(1.2, [0.0])


class TestPosterior:
    def test_rows_sum_to_one(self, oned):
        g = np.random.default_rng(2)
        for t in (0.0, 0.21, 0.5, 0.99, 1.0):
            gam = oned["flow"].posterior(t, g.uniform(-6, 6, (40, 1)))
            assert np.abs(gam.sum(axis=(-2, -1)) - 1.0).max() < 1e-12

    def test_zero_off_support(self):
        src, tgt, grid, pi, _, flow = translation_instance()
        gam = flow.posterior(0.5, np.array([0.2, 0.1]))
        assert gam[0, 1] == 0.0 and gam[1, 0] == 0.0

    def test_basin_concentration(self):
        # a well-separated instance: each channel's midpoint saturates gamma
        from mixbridge.bridge import bridge_grid, cost_matrix
        from mixbridge.coupling import GibbsKernel, product_prior, sinkhorn

        src = GaussianMixture(
            [0.5, 0.5], [Gaussian([-20.0], [[0.2]]), Gaussian([20.0], [[0.2]])]
        )
        tgt = GaussianMixture(
            [0.5, 0.5], [Gaussian([-22.0], [[0.2]]), Gaussian([22.0], [[0.2]])]
        )
        grid = bridge_grid(src, tgt, 0.3)
        costs = cost_matrix(src, tgt, 0.3, n_quad=801, bridges=grid)
        eta = product_prior(src.weights, tgt.weights)
        plan = sinkhorn(GibbsKernel.build(costs, eta), src.weights, tgt.weights).plan
        flow = ProjectedFlow(plan, grid, 0.3)
        gam = flow.posterior(0.5, grid[0][0].mean_at(0.5))
        assert gam[0, 0] > 0.999

    def test_identical_bridges_uniform_posterior(self):
        comp = Gaussian([0.0, 0.0], np.eye(2) * 0.5)
        src = GaussianMixture([0.5, 0.5], [comp, comp])
        tgt_comp = Gaussian([1.0, 1.0], np.eye(2) * 0.7)
        tgt = GaussianMixture([0.5, 0.5], [tgt_comp, tgt_comp])
        from mixbridge.bridge import bridge_grid

        grid = bridge_grid(src, tgt, 0.3)
        pi = Coupling(np.diag([0.5, 0.5]), src.weights, tgt.weights)
        flow = ProjectedFlow(pi, grid, 0.3)
        gam = flow.posterior(0.3, np.array([5.0, -3.0]))
        assert gam[0, 0] == pytest.approx(0.5, abs=1e-13)
        assert gam[1, 1] == pytest.approx(0.5, abs=1e-13)


class TestDrift:
    def test_single_pair_equals_affine_drift(self):
        b, flow = single_pair_flow(seed=3)
        x = np.random.default_rng(3).normal(size=(20, 2), scale=3.0)
        assert np.allclose(flow.drift(0.7, x), b.drift(0.7, x), rtol=1e-13)

    def test_translation_class_constant(self):
        _, _, _, _, v, flow = translation_instance(seed=4)
        x = np.random.default_rng(4).normal(size=(30, 2), scale=4.0)
        for t in (0.0, 0.33, 0.8, 1.0):
            assert np.abs(flow.drift(t, x) - v).max() < 1e-9

    def test_compositional_oracle(self, oned):
        # recompute gamma and the affine drifts by hand at (0.5, 0)
        flow, plan, grid = oned["flow"], oned["plan"], oned["grid"]
        t, x = 0.5, np.array([0.0])
        dens = np.zeros((2, 2))
        for i in range(2):
            for j in range(2):
                marg = grid[i][j].marginal(t)
                dens[i, j] = Gaussian(marg.mean, marg.cov).pdf(x)
        gam = plan.pi * dens / (plan.pi * dens).sum()
        expect = sum(
            gam[i, j] * grid[i][j].drift(t, x)
            for i in range(2)
            for j in range(2)
        )
        assert np.allclose(flow.drift(t, x), expect, rtol=1e-10)

    def test_flux_identity(self, oned):
        # rho * u_bar == sum_ij pi_ij rho_ij u_ij pointwise
        flow, plan, grid = oned["flow"], oned["plan"], oned["grid"]
        g = np.random.default_rng(5)
        ts = g.uniform(0.0, 1.0, 10)
        xs = g.uniform(-6.0, 6.0, (100, 1))
        for t in ts:
            lhs = flow.density(t, xs)[:, None] * flow.drift(t, xs)
            rhs = np.zeros_like(lhs)
            for i in range(2):
                for j in range(2):
                    if plan.pi[i, j] == 0.0:
                        continue
                    marg = grid[i][j].marginal(float(t))
                    rho_ij = Gaussian(marg.mean, marg.cov).pdf(xs)
                    rhs += plan.pi[i, j] * rho_ij[:, None] * grid[i][j].drift(float(t), xs)
            assert np.abs(lhs - rhs).max() <= 1e-12 * np.abs(rhs).max() + 1e-300


class TestKineticEnergy:
    def test_single_pair_bound_tight(self):
        b, flow = single_pair_flow(seed=6)
        ke = flow.kinetic_energy(n_time=51, n_samples=2000, seed=0)
        assert ke.j_lift == pytest.approx(b.cost(), rel=1e-12)
        assert ke.j_proj == pytest.approx(ke.j_lift, abs=5.0 * ke.std_err + 1e-3)

    def test_jensen_bound_randomized(self):
        for seed in range(12):
            *_, flow, _ = random_instance(seed)
            ke = flow.kinetic_energy(n_time=21, n_samples=300, seed=seed)
            assert ke.j_proj <= ke.j_lift + 3.0 * ke.std_err

    def test_parameter_validation(self, oned):
        with pytest.raises(ValueError):
            oned["flow"].kinetic_energy(n_time=10, n_samples=500)
        with pytest.raises(ValueError):
            oned["flow"].kinetic_energy(n_time=11, n_samples=50)


class TestFokkerPlanck:
    def test_residual_small_random_points(self, oned, threemode):
        for inst in (oned, threemode):
            flow = inst["flow"]
            g = np.random.default_rng(7)
            ts = g.uniform(0.02, 0.98, 100)
            xs = g.uniform(-5.0, 5.0, (100, flow.dim))
            res = np.array(
                [float(flow.fokker_planck_residual(t, x)) for t, x in zip(ts, xs)]
            )
            assert res.max() < 1e-8

    def test_single_pair_at_mean(self):
        b, flow = single_pair_flow(seed=8)
        assert float(flow.fokker_planck_residual(0.5, b.mean_at(0.5))) < 1e-10

    def test_corrupted_drift_negative_control(self, oned):
        flow = oned["flow"]
        g = np.random.default_rng(9)
        worst = max(
            float(flow.fokker_planck_residual(t, x, drift_scale=1.01))
            for t, x in zip(g.uniform(0.1, 0.9, 50), g.uniform(-4, 4, (50, 1)))
        )
        assert worst > 1e-3

    def test_endpoints_excluded(self, oned):
        with pytest.raises(DomainError):
            oned["flow"].fokker_planck_residual(0.0, [0.0])
        with pytest.raises(DomainError):
            oned["flow"].fokker_planck_residual(1.0, [0.0])
