import numpy as np
import pytest

from mixbridge.errors import NotPositiveDefinite, NotSymmetric
from mixbridge.spd import spd_eigh, spd_inverse, spd_logdet, spd_sqrt

from conftest import random_spd


def test_sqrt_identity():
    for d in (1, 3, 7):
        assert np.allclose(spd_sqrt(np.eye(d)), np.eye(d), atol=1e-14)


def test_sqrt_diagonal():
    assert np.allclose(spd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)


def test_inverse_trivials():
    assert np.allclose(spd_inverse(np.eye(4)), np.eye(4), atol=1e-14)
    assert np.allclose(spd_inverse(np.diag([2.0, 5.0])), np.diag([0.5, 0.2]), atol=1e-14)


def test_logdet_trivials():
    assert spd_logdet(np.eye(5)) == pytest.approx(0.0, abs=1e-13)
    assert spd_logdet(np.diag([np.e, np.e])) == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(8))
def test_random_reconstruction_oracles(seed):
    g = np.random.default_rng(seed)
    d = int(g.integers(2, 9))
    a = random_spd(g, d)
    scale = np.linalg.norm(a)

    r = spd_sqrt(a)
    assert np.linalg.norm(r @ r - a) / scale < 1e-10
    assert np.allclose(r, r.T)
    assert np.linalg.eigvalsh(r)[0] > 0.0

    b = spd_inverse(a)
    assert np.linalg.norm(a @ b - np.eye(d)) < 1e-10

    # brute-force eigensolve oracle for the log-determinant
    eigs = np.linalg.eigvals(a).real
    assert spd_logdet(a) == pytest.approx(float(np.sum(np.log(eigs))), rel=1e-10)


@pytest.mark.parametrize("seed", range(4))
def test_double_inverse_roundtrip(seed):
    g = np.random.default_rng(100 + seed)
    a = random_spd(g, 5)
    back = spd_inverse(spd_inverse(a))
    assert np.linalg.norm(back - a) / np.linalg.norm(a) < 1e-9


def test_deterministic_given_bits():
    a = random_spd(np.random.default_rng(3), 6)
    assert np.array_equal(spd_sqrt(a), spd_sqrt(a.copy()))
    assert np.array_equal(spd_inverse(a), spd_inverse(a.copy()))
    assert spd_logdet(a) == spd_logdet(a.copy())


def test_not_symmetric_rejected():
    a = np.array([[1.0, 0.5], [0.2, 1.0]])
    with pytest.raises(NotSymmetric):
        spd_sqrt(a)


def test_tiny_asymmetry_tolerated():
    a = np.array([[1.0, 0.5], [0.5 + 1e-14, 1.0]])
    spd_sqrt(a)  # symmetrized internally


def test_not_positive_definite_rejected():
    with pytest.raises(NotPositiveDefinite):
        spd_sqrt(np.array([[1.0, 0.0], [0.0, -0.1]]))
    # below the relative floor 1e-12 * lambda_max
    with pytest.raises(NotPositiveDefinite):
        spd_inverse(np.diag([1.0, 1e-14]))


def test_floor_is_relative():
    # small but well-conditioned matrices pass
    w, _ = spd_eigh(1e-8 * np.eye(3))
    assert np.allclose(w, 1e-8)
