"""Dense symmetric-positive-definite matrix kernels.

All three operations share one symmetric eigendecomposition. Dimensions are
tiny (d <= 10 in every bundled experiment), so robustness is preferred over
speed: inputs are symmetrized, eigenvalues are checked against a relative
floor, and failures raise typed errors instead of silently clamping.
"""

import numpy as np

from .errors import NotPositiveDefinite, NotSymmetric

SYMMETRY_RTOL = 1e-12
EIG_FLOOR_RTOL = 1e-12


def _as_square(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {a.shape}")
    return a


def check_symmetric(a: np.ndarray, rtol: float = SYMMETRY_RTOL) -> np.ndarray:
    """Validate symmetry of `a` relative to its largest entry and return it."""
    a = _as_square(a)
    scale = np.abs(a).max()
    skew = np.abs(a - a.T).max()
    if skew > rtol * max(scale, 1.0):
        raise NotSymmetric(f"asymmetry {skew:.3e} exceeds {rtol:.1e} * scale {scale:.3e}")
    return a


def spd_eigh(a: np.ndarray, eig_floor_rtol: float = EIG_FLOOR_RTOL):
    """Symmetrize, eigendecompose and floor-check an SPD matrix.

    Returns (eigenvalues, eigenvectors) of (a + a.T)/2. Raises
    NotPositiveDefinite when the smallest eigenvalue falls below
    eig_floor_rtol times the largest one.
    """
    a = check_symmetric(a)
    sym = 0.5 * (a + a.T)
    w, v = np.linalg.eigh(sym)
    floor = eig_floor_rtol * max(w[-1], 0.0)
    if w[0] < floor or w[-1] <= 0.0:
        raise NotPositiveDefinite(
            f"eigenvalue {w[0]:.6e} below floor {floor:.6e} (largest {w[-1]:.6e})"
        )
    return w, v


def spd_sqrt(a: np.ndarray) -> np.ndarray:
    """Unique symmetric positive definite square root."""
    w, v = spd_eigh(a)
    return (v * np.sqrt(w)) @ v.T


def spd_sqrt_and_inv_sqrt(a: np.ndarray):
    """Square root and inverse square root from a single factorization."""
    w, v = spd_eigh(a)
    s = np.sqrt(w)
    return (v * s) @ v.T, (v / s) @ v.T


def spd_inverse(a: np.ndarray) -> np.ndarray:
    """Inverse via the shared eigendecomposition."""
    w, v = spd_eigh(a)
    return (v / w) @ v.T


def spd_logdet(a: np.ndarray) -> float:
    """Sum of log-eigenvalues."""
    w, _ = spd_eigh(a)
    return float(np.log(w).sum())
