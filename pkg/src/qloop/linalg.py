"""Dense complex linear algebra used throughout the package.

Vectors and matrices are plain ``numpy`` arrays of dtype ``complex128``.
Everything here is pure: inputs are never modified.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .config import DEFAULT

__all__ = [
    "DimensionError",
    "NormalityError",
    "SchurData",
    "EigenData",
    "as_matrix",
    "as_vector",
    "dagger",
    "tensor_product",
    "schur_triangularize",
    "eig_normal",
    "operator_norm",
    "trace",
    "is_square",
    "is_unitary",
    "is_hermitian",
    "is_normal",
    "is_positive_semidefinite",
    "is_projector",
    "spectral_order",
]


class DimensionError(ValueError):
    """Operands have incompatible or non-square shapes."""


class NormalityError(ValueError):
    """A normal matrix was required; use :func:`schur_triangularize` instead."""


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got shape {m.shape}")
    return m


def as_vector(v) -> np.ndarray:
    x = np.asarray(v, dtype=complex)
    if x.ndim != 1:
        raise DimensionError(f"expected a 1-d vector, got shape {x.shape}")
    return x


def _square(a) -> np.ndarray:
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    return m


def dagger(a) -> np.ndarray:
    return np.asarray(a, dtype=complex).conj().T


def tensor_product(*operands) -> np.ndarray:
    """Kronecker product of matrices (or vectors), left to right."""
    if not operands:
        raise ValueError("tensor_product needs at least one operand")
    return reduce(np.kron, (np.asarray(x, dtype=complex) for x in operands))


def _order_key(z: complex) -> tuple[float, float, float]:
    # rounding keeps numerically equal eigenvalues tied
    return (-round(abs(z), 10), -round(z.real, 10), -round(z.imag, 10))


def spectral_order(values) -> np.ndarray:
    """Indices sorting ``values`` by decreasing modulus, then real, then imaginary part."""
    vals = [complex(v) for v in values]
    return np.array(sorted(range(len(vals)), key=lambda i: _order_key(vals[i])), dtype=int)


@dataclass(frozen=True)
class SchurData:
    """``A = V T V^dagger`` with ``T`` upper triangular."""

    V: np.ndarray
    T: np.ndarray

    @property
    def dim(self) -> int:
        return self.T.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.diag(self.T).copy()

    def reconstruct(self) -> np.ndarray:
        return self.V @ self.T @ dagger(self.V)


def schur_triangularize(a) -> SchurData:
    """Complex Schur form with a deterministic diagonal order.

    The diagonal of ``T`` lists the eigenvalues by decreasing modulus,
    ties broken by decreasing real part and then imaginary part.

    Parameters
    ----------
    a : array_like
        Square complex matrix.

    Returns
    -------
    SchurData
    """
    m = _square(a)
    n = m.shape[0]
    if n == 0:
        return SchurData(np.zeros((0, 0), complex), np.zeros((0, 0), complex))
    T, V = scipy.linalg.schur(m, output="complex")
    T = np.asarray(T, dtype=complex)
    V = np.asarray(V, dtype=complex)
    # selection sort by moving the best remaining eigenvalue to position i
    for i in range(n - 1):
        diag = np.diag(T)
        j = i + int(spectral_order(diag[i:])[0])
        if j != i and _order_key(complex(diag[j])) != _order_key(complex(diag[i])):
            T, V, info = lapack.ztrexc(T, V, j + 1, i + 1)
            if info != 0:
                raise np.linalg.LinAlgError(f"ztrexc failed with info={info}")
    T = np.triu(T)
    return SchurData(V=V, T=T)


@dataclass(frozen=True)
class EigenData:
    """Eigenvalues and orthonormal eigenvectors (columns) of a normal matrix."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def pairs(self) -> list[tuple[complex, np.ndarray]]:
        return [(complex(v), self.vectors[:, i]) for i, v in enumerate(self.values)]

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ dagger(self.vectors)


def eig_normal(a, tol: float = DEFAULT.struct) -> EigenData:
    """Orthonormal eigendecomposition of a normal matrix.

    Raises
    ------
    NormalityError
        If ``||A A^dagger - A^dagger A|| >= tol``.
    """
    m = _square(a)
    if not is_normal(m, tol):
        raise NormalityError("matrix is not normal; use schur_triangularize")
    if is_hermitian(m, tol):
        w, v = np.linalg.eigh((m + dagger(m)) / 2)
        values = w.astype(complex)
        vectors = v.astype(complex)
    else:
        # the Schur form of a normal matrix is diagonal
        sd = schur_triangularize(m)
        values = np.diag(sd.T).copy()
        vectors = sd.V
    order = spectral_order(values)
    return EigenData(values=values[order], vectors=vectors[:, order])


def operator_norm(a) -> float:
    """Largest singular value."""
    m = as_matrix(a)
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def trace(a) -> complex:
    return complex(np.trace(_square(a)))


def is_square(a) -> bool:
    m = np.asarray(a)
    return m.ndim == 2 and m.shape[0] == m.shape[1]


def is_unitary(a, tol: float = DEFAULT.struct) -> bool:
    m = _square(a)
    return operator_norm(dagger(m) @ m - np.eye(m.shape[0])) < tol


def is_hermitian(a, tol: float = DEFAULT.struct) -> bool:
    m = _square(a)
    return operator_norm(m - dagger(m)) < tol


def is_normal(a, tol: float = DEFAULT.struct) -> bool:
    m = _square(a)
    return operator_norm(m @ dagger(m) - dagger(m) @ m) < tol


def is_positive_semidefinite(a, tol: float = DEFAULT.struct) -> bool:
    m = _square(a)
    if not is_hermitian(m, tol):
        return False
    if m.shape[0] == 0:
        return True
    return bool(np.linalg.eigvalsh((m + dagger(m)) / 2).min() > -tol)


def is_projector(a, tol: float = DEFAULT.struct) -> bool:
    m = _square(a)
    return is_hermitian(m, tol) and operator_norm(m @ m - m) < tol
