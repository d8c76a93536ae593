import numpy as np
import pytest

from qrs import stiefel
from qrs.random import rand_isometry


def quadratic(a):
    """f(V) = Re Tr(V^dagger A V) for Hermitian A; minimum = sum of the lowest eigenvalues."""
    def fun(v):
        return float(np.real(np.trace(v.conj().T @ a @ v))), 2 * a @ v
    return fun


def hermitian(rng, d):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (g + g.conj().T) / 2


def test_retraction_stays_on_manifold(rng):
    v = rand_isometry(6, 3, seed=rng)
    for scale in (1e-6, 0.1, 10.0):
        z = stiefel.project_tangent(v, rng.normal(size=v.shape) + 1j * rng.normal(size=v.shape))
        w = stiefel.retract(v, scale * z)
        np.testing.assert_allclose(w.conj().T @ w, np.eye(3), atol=1e-12)


def test_projection_is_tangent_and_idempotent(rng):
    v = rand_isometry(5, 2, seed=rng)
    g = rng.normal(size=v.shape) + 1j * rng.normal(size=v.shape)
    z = stiefel.project_tangent(v, g)
    herm = v.conj().T @ z
    np.testing.assert_allclose(herm + herm.conj().T, 0, atol=1e-12)
    np.testing.assert_allclose(stiefel.project_tangent(v, z), z, atol=1e-12)


def test_retraction_of_zero_is_identity(rng):
    v = rand_isometry(4, 2, seed=rng)
    np.testing.assert_allclose(stiefel.retract(v, np.zeros_like(v)), v, atol=1e-12)


def test_quadratic_gradient_check(rng):
    a = hermitian(rng, 5)
    v = rand_isometry(5, 2, seed=rng)
    assert stiefel.directional_check(quadratic(a), v, rng) <= 1e-7


def test_minimize_finds_lowest_eigenspace(rng):
    a = hermitian(rng, 6)
    res = stiefel.minimize(quadratic(a), rand_isometry(6, 2, seed=rng), max_iter=2000, gtol=1e-9)
    lam = np.linalg.eigvalsh(a)
    assert res.value == pytest.approx(lam[:2].sum(), abs=1e-8)
    assert res.converged
    assert all(b <= a_ + 1e-12 for a_, b in zip(res.history, res.history[1:]))
