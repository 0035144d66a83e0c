"""Termination and almost-termination decisions.

Decisions are made on ``U_X``, the compression of the loop body to the
guard subspace.  Jordan forms of numeric matrices are never computed:
the unit-modulus eigenvalues of ``U_X`` are semisimple and their
eigenspace reduces ``U_X`` orthogonally, so a Schur split carries the
same information.  Closed-form Jordan powers live here only as oracles
for synthetic data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.linalg

from . import linalg
from .config import Tolerances, resolve
from .linalg import SchurData, dagger, operator_norm
from .loop import QuantumLoop, as_state, restrict

__all__ = [
    "ContractionError",
    "SpectralSplit",
    "spectral_split",
    "LoopVerdict",
    "classify_loop",
    "InputVerdict",
    "terminates_on",
    "termination_step",
    "almost_terminates_on",
    "p_nt",
    "analyze_input",
    "jordan_block",
    "jordan_block_power",
    "jordan_block_apply",
    "jordan_matrix",
]

TERMINATING = "Terminating"
ALMOST_TERMINATING = "AlmostTerminating"
NOT_ALMOST_TERMINATING = "NotAlmostTerminating"


class ContractionError(ValueError):
    """``U_X`` has operator norm above 1, so it cannot come from a unitary."""


@dataclass(frozen=True)
class SpectralSplit:
    unit_values: np.ndarray
    unit_vectors: np.ndarray  # k x t, orthonormal columns
    Pi1: np.ndarray
    stable_radius: float
    schur: SchurData

    @property
    def t(self) -> int:
        return self.unit_vectors.shape[1]

    @property
    def stable_basis(self) -> np.ndarray:
        """Orthonormal basis of the complement of the unit-modulus eigenspace."""
        return self.schur.V[:, self.t :]

    @property
    def stable_block(self) -> np.ndarray:
        return self.schur.T[self.t :, self.t :]

    @property
    def unit_eigenpairs(self) -> list[tuple[complex, np.ndarray]]:
        return [(complex(v), self.unit_vectors[:, i]) for i, v in enumerate(self.unit_values)]


def spectral_split(U_X, tol: Tolerances | None = None) -> SpectralSplit:
    """Split ``C^k`` into the unit-modulus eigenspace of ``U_X`` and its complement.

    Eigenvalues with ``|lambda| >= 1 - tol.unit`` count as unit modulus.
    """
    tol = resolve(tol)
    U_X = linalg.as_matrix(U_X)
    k = U_X.shape[0]
    nrm = operator_norm(U_X)
    if nrm > 1 + max(tol.struct, 1e-8):
        raise ContractionError(f"||U_X|| = {nrm:.12g} exceeds 1")
    sd = linalg.schur_triangularize(U_X)
    mods = np.abs(np.diag(sd.T))
    t = int(np.sum(mods >= 1 - tol.unit))
    vecs = sd.V[:, :t]
    stable = float(mods[t:].max()) if t < k else 0.0
    return SpectralSplit(
        unit_values=np.diag(sd.T)[:t].copy(),
        unit_vectors=vecs,
        Pi1=vecs @ dagger(vecs),
        stable_radius=stable,
        schur=sd,
    )


@dataclass(frozen=True)
class LoopVerdict:
    kind: Literal["Terminating", "AlmostTerminating", "NotAlmostTerminating"]
    spectral_radius: float
    nilpotency_checked: bool
    nilpotent_power_norm: float
    unit_eigenvalues: tuple[complex, ...]
    pi1_rank: int
    stable_radius: float

    @property
    def almost_terminating(self) -> bool:
        return self.kind in (TERMINATING, ALMOST_TERMINATING)

    @property
    def uniform(self) -> bool:
        # almost termination and uniform almost termination coincide
        return self.almost_terminating


def classify_loop(loop: QuantumLoop, tol: Tolerances | None = None) -> LoopVerdict:
    """Loop-wide verdict from the spectrum of ``U_X``.

    Terminating means ``U_X`` is nilpotent, tested as ``||U_X^k|| < tol.unit_zero``
    because computed eigenvalues of a nilpotent matrix can be far from zero.
    Otherwise the loop is almost terminating iff every eigenvalue has modulus
    below ``1 - tol.unit``.
    """
    tol = resolve(tol)
    U_X = loop.U_X
    k = U_X.shape[0]
    split = spectral_split(U_X, tol)
    radius = float(np.abs(split.schur.eigenvalues).max()) if k else 0.0
    power_norm = operator_norm(np.linalg.matrix_power(U_X, k)) if k else 0.0
    if power_norm < tol.unit_zero:
        kind = TERMINATING
    elif split.t == 0:
        kind = ALMOST_TERMINATING
    else:
        kind = NOT_ALMOST_TERMINATING
    return LoopVerdict(
        kind=kind,
        spectral_radius=radius,
        nilpotency_checked=True,
        nilpotent_power_norm=power_norm,
        unit_eigenvalues=tuple(complex(v) for v in split.unit_values),
        pi1_rank=split.t,
        stable_radius=split.stable_radius,
    )


def _rho_X(loop: QuantumLoop, state) -> np.ndarray:
    return restrict(as_state(state).rho, loop.guard_projectors)


def termination_step(loop: QuantumLoop, state, tol: Tolerances | None = None) -> int | None:
    """Smallest ``n`` with ``p_NT^{n+} = 0`` (to ``tol.zero``), or None.

    Only ``n <= k + 1`` needs checking: a nilpotent component dies within
    ``k`` applications of ``U_X`` and any other component never does.
    """
    tol = resolve(tol)
    W = _rho_X(loop, state)
    U_X = loop.U_X
    k = U_X.shape[0]
    for n in range(1, k + 2):
        if k == 0 or operator_norm(W) < tol.zero:
            return n
        W = U_X @ W @ dagger(U_X)
    return None


def terminates_on(loop: QuantumLoop, state, tol: Tolerances | None = None) -> bool:
    """True iff ``U_X^k rho_X U_X^{dagger k}`` vanishes, ``k = dim H_X``."""
    return termination_step(loop, state, tol) is not None


def p_nt(loop: QuantumLoop, state, tol: Tolerances | None = None) -> float:
    """Nonterminating probability ``lim p_NT^{n+}``: the mass of ``rho_X`` on the unit eigenspace."""
    split = spectral_split(loop.U_X, tol)
    if split.t == 0:
        return 0.0
    rho_X = _rho_X(loop, state)
    value = float(np.real(np.trace(split.Pi1 @ rho_X @ split.Pi1)))
    return min(max(value, 0.0), 1.0)


def almost_terminates_on(loop: QuantumLoop, state, tol: Tolerances | None = None) -> bool:
    tol = resolve(tol)
    return p_nt(loop, state, tol) < tol.pnt


@dataclass(frozen=True)
class InputVerdict:
    kind: Literal["Terminates", "AlmostTerminates", "NonTerminating"]
    p_nt: float
    at_step: int | None = None
    marginal: bool = False


def analyze_input(loop: QuantumLoop, state, tol: Tolerances | None = None) -> InputVerdict:
    """Per-input verdict.

    ``marginal`` is set when the loop has unit-modulus eigenvalues and the
    input's component on them is nonzero but below tolerance, i.e. the
    almost-termination verdict rests on thresholding.
    """
    tol = resolve(tol)
    value = p_nt(loop, state, tol)
    at = termination_step(loop, state, tol)
    if at is not None:
        return InputVerdict("Terminates", value, at_step=at)
    if value < tol.pnt:
        split_rank = spectral_split(loop.U_X, tol).t
        return InputVerdict("AlmostTerminates", value, marginal=split_rank > 0 and value > 1e-15)
    return InputVerdict("NonTerminating", value)


def jordan_block(lam: complex, r: int) -> np.ndarray:
    return lam * np.eye(r, dtype=complex) + np.eye(r, k=1, dtype=complex)


def jordan_block_power(lam: complex, r: int, N: int) -> np.ndarray:
    """Closed form of ``J_r(lam)^N``: entry ``(i, i+j)`` is ``C(N, j) lam^(N-j)``."""
    if r < 1 or N < 0:
        raise ValueError("need r >= 1 and N >= 0")
    if N > 64:
        raise OverflowError("closed-form Jordan powers are limited to N <= 64")
    lam = complex(lam)
    out = np.zeros((r, r), dtype=complex)
    for j in range(min(r, N + 1)):
        coeff = math.comb(N, j) * lam ** (N - j)
        out += coeff * np.eye(r, k=j)
    return out


def jordan_block_apply(lam: complex, r: int, N: int, v) -> np.ndarray:
    """``J_r(lam)^N v`` componentwise, without forming the matrix."""
    v = linalg.as_vector(v)
    if v.shape[0] != r:
        raise linalg.DimensionError(f"vector has length {v.shape[0]}, block has size {r}")
    if N > 64:
        raise OverflowError("closed-form Jordan powers are limited to N <= 64")
    lam = complex(lam)
    coeffs = [math.comb(N, j) * lam ** (N - j) for j in range(min(r, N + 1))]
    out = np.zeros(r, dtype=complex)
    for m in range(r):
        for j, c in enumerate(coeffs):
            if m + j < r:
                out[m] += c * v[m + j]
    return out


def jordan_matrix(blocks) -> np.ndarray:
    """Block-diagonal Jordan matrix from ``[(lam, size), ...]``."""
    mats = [jordan_block(lam, int(r)) for lam, r in blocks]
    if not mats:
        return np.zeros((0, 0), dtype=complex)
    return scipy.linalg.block_diag(*mats).astype(complex)
