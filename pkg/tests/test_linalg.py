"""Vectorization conventions and the small linear-algebra helpers."""

import numpy as np
import pytest

from gkslmap.linalg import (
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    dagger,
    frobenius,
    hermitian_eig,
    identity_superop,
    random_density,
    random_hermitian,
    random_operator,
    random_unit_vector,
    sandwich_superop,
    unvectorize,
    vectorize,
)


def test_vectorize_is_column_stacking():
    a = np.array([[1, 2], [3, 4]], dtype=complex)
    v = vectorize(a)
    # vec(A)[i + d*j] = A[i, j]
    assert v[0] == 1 and v[1] == 3 and v[2] == 2 and v[3] == 4


def test_unvectorize_round_trip(rng):
    a = random_operator(rng, 3)
    assert np.array_equal(unvectorize(vectorize(a), 3), a)
    assert np.array_equal(unvectorize(vectorize(a)), a)  # dim inferred


def test_sandwich_superop_action(rng):
    a = random_operator(rng, 3)
    b = random_operator(rng, 3)
    r = random_operator(rng, 3)
    got = unvectorize(sandwich_superop(a, b) @ vectorize(r), 3)
    assert np.allclose(got, a @ r @ b)


def test_identity_superop_is_identity(rng):
    r = random_operator(rng, 2)
    assert np.allclose(unvectorize(identity_superop(2) @ vectorize(r), 2), r)


def test_dagger_and_frobenius(rng):
    a = random_operator(rng, 2)
    assert np.allclose(dagger(a), a.conj().T)
    assert frobenius(a) == pytest.approx(np.linalg.norm(a))


def test_hermitian_eig_sorted_ascending(rng):
    h = random_hermitian(rng, 4)
    res = hermitian_eig(h)
    assert np.all(np.diff(res.eigenvalues) >= 0)
    recon = res.eigenvectors @ np.diag(res.eigenvalues) @ res.eigenvectors.conj().T
    assert np.allclose(recon, h, atol=1e-12)


def test_hermitian_eig_rejects_asymmetry(rng):
    h = random_hermitian(rng, 3)
    with pytest.raises(ValueError):
        hermitian_eig(h + 0.1 * random_operator(rng, 3))


def test_random_density_properties(rng):
    rho = random_density(rng, 3)
    assert np.trace(rho).real == pytest.approx(1.0)
    assert np.allclose(rho, rho.conj().T)
    assert np.linalg.eigvalsh(rho).min() > 0


def test_random_operator_norm(rng):
    a = random_operator(rng, 3, norm=0.7)
    assert np.linalg.norm(a, ord=2) == pytest.approx(0.7)


def test_random_unit_vector(rng):
    v = random_unit_vector(rng, 5)
    assert np.linalg.norm(v) == pytest.approx(1.0)


def test_pauli_matrices():
    assert np.allclose(SIGMA_X @ SIGMA_X, np.eye(2))
    assert np.allclose(SIGMA_Y @ SIGMA_Y, np.eye(2))
    assert np.allclose(SIGMA_Z @ SIGMA_Z, np.eye(2))
    assert np.allclose(SIGMA_X @ SIGMA_Y - SIGMA_Y @ SIGMA_X, 2j * SIGMA_Z)
    assert np.allclose(SIGMA_PLUS @ SIGMA_MINUS + SIGMA_MINUS @ SIGMA_PLUS, np.eye(2))
    assert np.allclose(dagger(SIGMA_PLUS), SIGMA_MINUS)
