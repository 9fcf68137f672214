"""Dense complex operator and superoperator algebra on small Hilbert spaces.

Vectorization is column-stacking throughout the package:

    vec(A)[i + d*j] = A[i, j]

so that ``vec(A X B) = kron(B.T, A) vec(X)``.  Superoperators are plain
``(d*d, d*d)`` complex ndarrays acting on vectorized operators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "vectorize",
    "unvectorize",
    "sandwich_superop",
    "identity_superop",
    "frobenius",
    "dagger",
    "hermitian_eig",
    "HermitianEigenResult",
    "random_operator",
    "random_hermitian",
    "random_density",
    "random_unit_vector",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "SIGMA_PLUS",
    "SIGMA_MINUS",
]

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
#: raising/lowering in the convention sigma_minus |1> = |0>, sigma_plus |0> = |1>
SIGMA_PLUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)


def _as_square(a, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square 2-d array, got shape {a.shape}")
    return a


def vectorize(a) -> np.ndarray:
    """Column-stack a square matrix: vec(A)[i + d*j] = A[i, j]."""
    return _as_square(a).reshape(-1, order="F")


def unvectorize(v, dim: int | None = None) -> np.ndarray:
    """Inverse of :func:`vectorize`."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    d = int(round(np.sqrt(v.size))) if dim is None else int(dim)
    if d * d != v.size:
        raise ValueError(f"vector of length {v.size} is not a vectorized square matrix")
    return v.reshape((d, d), order="F")


def sandwich_superop(a, b) -> np.ndarray:
    """Superoperator matrix of the map rho -> a @ rho @ b.

    With column-stacking vectorization this is ``kron(b.T, a)``.
    """
    a = _as_square(a, "a")
    b = _as_square(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"operator dimensions differ: {a.shape} vs {b.shape}")
    return np.kron(b.T, a)


def identity_superop(dim: int) -> np.ndarray:
    return np.eye(dim * dim, dtype=complex)


def frobenius(a) -> float:
    return float(np.linalg.norm(np.asarray(a)))


def dagger(a) -> np.ndarray:
    return np.asarray(a).conj().T


@dataclass(frozen=True)
class HermitianEigenResult:
    """Ascending eigenvalues and the matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def hermitian_eig(a, rtol: float = 1e-9) -> HermitianEigenResult:
    """Eigendecomposition of a Hermitian matrix with an asymmetry guard.

    The input is symmetrized internally; inputs whose anti-Hermitian part
    exceeds ``rtol * ||a||_F`` are rejected so silent misuse on generic
    matrices cannot slip through.
    """
    a = _as_square(a)
    asym = float(np.linalg.norm(a - a.conj().T))
    scale = max(float(np.linalg.norm(a)), 1e-300)
    if asym > rtol * scale:
        raise ValueError(
            f"matrix is not Hermitian: ||A - A^dag||_F = {asym:.3e} "
            f"exceeds {rtol:.1e} * ||A||_F = {rtol * scale:.3e}"
        )
    w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    return HermitianEigenResult(eigenvalues=w, eigenvectors=v)


def random_operator(rng: np.random.Generator, dim: int, norm: float = 1.0) -> np.ndarray:
    """Complex Gaussian matrix rescaled to the given spectral norm."""
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return a * (norm / np.linalg.norm(a, ord=2))


def random_hermitian(rng: np.random.Generator, dim: int, norm: float = 1.0) -> np.ndarray:
    a = random_operator(rng, dim, 1.0)
    h = 0.5 * (a + a.conj().T)
    return h * (norm / np.linalg.norm(h, ord=2))


def random_density(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Random full-rank density matrix (Wishart-like, unit trace)."""
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = a @ a.conj().T + 1e-3 * np.eye(dim)
    return rho / np.trace(rho).real


def random_unit_vector(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)
