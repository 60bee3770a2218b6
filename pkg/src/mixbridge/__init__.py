"""Gaussian-mixture stochastic steering under a Brownian prior.

Closed-form pairwise Gaussian bridges, a Sinkhorn-solved entropic component
coupling, a posterior-averaged projected Markov drift, particle simulation,
a grid-based direct bridge baseline, and entropy-gap diagnostics.
"""

from .bridge import CostMatrix, PairwiseBridge, build_bridge, bridge_grid, cost_matrix
from .coupling import (
    Coupling,
    GibbsKernel,
    lifted_objective,
    product_prior,
    sinkhorn,
    structured_prior,
)
from .diagnostics import GapReport, decomposition_check, gap_report, label_filter, markov_gap, projection_gap
from .direct_sb import GridBridge, compare, default_box, discretize, solve_direct
from .flow import ProjectedFlow
from .gmm import Gaussian, GaussianMixture, em_fit
from .simulate import ParticleEnsemble, simulate_labeled, simulate_markov, validate_terminal

__all__ = [
    "CostMatrix",
    "Coupling",
    "Gaussian",
    "GaussianMixture",
    "GapReport",
    "GibbsKernel",
    "GridBridge",
    "PairwiseBridge",
    "ParticleEnsemble",
    "ProjectedFlow",
    "bridge_grid",
    "build_bridge",
    "compare",
    "cost_matrix",
    "decomposition_check",
    "default_box",
    "discretize",
    "em_fit",
    "gap_report",
    "label_filter",
    "lifted_objective",
    "markov_gap",
    "product_prior",
    "projection_gap",
    "simulate_labeled",
    "simulate_markov",
    "sinkhorn",
    "solve_direct",
    "structured_prior",
    "validate_terminal",
]

__version__ = "0.1.0"
