"""The function ``F`` computed by a loop, evaluated by independent routes.

Every route starts from the same decomposition::

    F(rho) = P_Xbar rho P_Xbar + L (sum_n U_X^n rho_X U_X^{dagger n}) L^dagger,
    L = P_Xbar U B

where ``B`` holds the guard-basis vectors spanning ``H_X``.  The component of
``rho_X`` on the unit-modulus eigenspace of ``U_X`` is annihilated by ``L``
and is dropped before summing; what remains converges geometrically.

* :func:`f_series`   partial sums of the series (doubling or term by term)
* :func:`f_solve`    the Stein equation ``Y = rho_s + A Y A^dagger``
* :func:`f_normal`   eigen closed form, only for normal ``U_X``
* :func:`f_pure_jordan`  Jordan closed form for loops built from known Jordan data
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
import scipy.linalg
from scipy.stats import unitary_group

from . import linalg
from .config import Tolerances, resolve
from .linalg import dagger, operator_norm
from .loop import GuardProjectors, ProjectiveMeasurement, QuantumLoop, as_state, restrict
from .termination import jordan_matrix, spectral_split

__all__ = [
    "ApplicabilityError",
    "NumericalFailure",
    "DivergenceError",
    "PartialDensity",
    "f_series",
    "f_solve",
    "f_normal",
    "compute_function",
    "jordan_series_sum",
    "jordan_pair_coefficient",
    "JordanSpec",
    "make_jordan_loop",
    "f_pure_jordan",
    "jordan_amplitude_sum",
]

# stable dimension above which the Kronecker system gets too large
_DENSE_SOLVE_LIMIT = 24


class ApplicabilityError(ValueError):
    """The requested evaluation route does not apply to this loop."""


class NumericalFailure(RuntimeError):
    """A linear solve was too ill-conditioned; retry with ``f_series``."""


class DivergenceError(ValueError):
    """A geometric series with ratio of modulus >= 1 was requested."""


@dataclass(frozen=True)
class PartialDensity:
    """``F(rho)`` in full K-dimensional coordinates plus evaluation metadata."""

    matrix: np.ndarray
    method: str
    terms: int | None = None
    truncation: float | None = None
    residual: float | None = None
    notes: dict = field(default_factory=dict)

    @property
    def trace_value(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def on_complement(self, g: GuardProjectors) -> np.ndarray:
        """The same operator in the guard-basis coordinates of ``H_Xbar``."""
        B = g.outside
        return dagger(B) @ self.matrix @ B


@dataclass
class _Parts:
    direct: np.ndarray  # P_Xbar rho P_Xbar
    lift: np.ndarray  # L = P_Xbar U B, K x k
    rho_X: np.ndarray


def _parts(loop: QuantumLoop, state) -> _Parts:
    g = loop.guard_projectors
    rho = as_state(state).rho
    return _Parts(
        direct=g.P_Xbar @ rho @ g.P_Xbar,
        lift=g.P_Xbar @ loop.U @ g.inside,
        rho_X=restrict(rho, g),
    )


def _hermitize(a: np.ndarray) -> np.ndarray:
    return (a + dagger(a)) / 2


def f_series(
    loop: QuantumLoop,
    state,
    tol_conv: float | None = None,
    *,
    doubling: bool = True,
    max_terms: int = 1 << 40,
    tol: Tolerances | None = None,
) -> PartialDensity:
    """Sum ``sum_n A^n rho_s A^{dagger n}`` until the added trace drops below ``tol_conv``.

    ``A`` and ``rho_s`` are ``U_X`` and ``rho_X`` with the unit-modulus
    eigenspace projected out.  With ``doubling`` each pass adds the next
    ``N`` terms at once (``S_2N = S_N + A^N S_N A^{dagger N}``); otherwise
    terms are added one at a time.
    """
    tol = resolve(tol)
    tol_conv = tol.conv if tol_conv is None else tol_conv
    parts = _parts(loop, state)
    k = parts.rho_X.shape[0]
    split = spectral_split(loop.U_X, tol)
    Q = np.eye(k) - split.Pi1
    A = Q @ loop.U_X @ Q
    S = Q @ parts.rho_X @ Q
    terms, last = 1, float(np.real(np.trace(S)))
    if k and last >= tol_conv:
        if doubling:
            P = A
            while terms < max_terms:
                add = P @ S @ dagger(P)
                S = S + add
                P = P @ P
                terms *= 2
                last = float(np.real(np.trace(add)))
                if last < tol_conv:
                    break
        else:
            term = S
            while terms < max_terms:
                term = A @ term @ dagger(A)
                last = float(np.real(np.trace(term)))
                S = S + term
                terms += 1
                if last < tol_conv:
                    break
    F = parts.direct + parts.lift @ S @ dagger(parts.lift)
    return PartialDensity(_hermitize(F), "series", terms=terms, truncation=last)


def _solve_stein(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Solve ``Y = Q + A Y A^dagger``."""
    n = A.shape[0]
    if n > _DENSE_SOLVE_LIMIT:
        return scipy.linalg.solve_discrete_lyapunov(A, Q)
    # column-major vec: vec(A Y A^dagger) = (conj(A) kron A) vec(Y)
    system = np.eye(n * n) - np.kron(A.conj(), A)
    y = np.linalg.solve(system, Q.reshape(-1, order="F"))
    return y.reshape((n, n), order="F")


def f_solve(loop: QuantumLoop, state, tol: Tolerances | None = None) -> PartialDensity:
    """Closed-form sum through a linear solve on the stable subspace.

    Raises
    ------
    NumericalFailure
        If the solve residual exceeds ``tol.solve_residual``.
    """
    tol = resolve(tol)
    parts = _parts(loop, state)
    split = spectral_split(loop.U_X, tol)
    Vs = split.stable_basis
    A = split.stable_block
    rho_s = dagger(Vs) @ parts.rho_X @ Vs
    if A.shape[0] == 0:
        Y = np.zeros((0, 0), dtype=complex)
        residual = 0.0
    else:
        Y = _solve_stein(A, rho_s)
        residual = operator_norm(Y - rho_s - A @ Y @ dagger(A))
        if not np.isfinite(residual) or residual > tol.solve_residual:
            raise NumericalFailure(
                f"Stein solve residual {residual:.3g} exceeds {tol.solve_residual:g}; "
                "use f_series instead"
            )
    Z = Vs @ Y @ dagger(Vs)
    F = parts.direct + parts.lift @ Z @ dagger(parts.lift)
    return PartialDensity(_hermitize(F), "solve", residual=residual)


def f_normal(loop: QuantumLoop, state, tol: Tolerances | None = None) -> PartialDensity:
    """Eigen closed form for normal ``U_X = sum_i lam_i |i><i|``.

    ``F = P_Xbar rho P_Xbar + sum_{i,j in I} <i|rho|j> / (1 - lam_i lam_j^*) P_Xbar U |i><j| U^dagger P_Xbar``
    with ``I`` the indices of eigenvalues inside the unit disc.
    """
    tol = resolve(tol)
    U_X = loop.U_X
    if not linalg.is_normal(U_X, tol.struct):
        raise ApplicabilityError("U_X is not normal; use f_solve or f_series")
    parts = _parts(loop, state)
    if U_X.shape[0] == 0:
        return PartialDensity(_hermitize(parts.direct), "normal")
    eig = linalg.eig_normal(U_X, tol.struct)
    keep = np.abs(eig.values) < 1 - tol.unit
    lam = eig.values[keep]
    V = eig.vectors[:, keep]
    W = dagger(V) @ parts.rho_X @ V
    G = W / (1 - np.outer(lam, lam.conj()))
    LV = parts.lift @ V
    F = parts.direct + LV @ G @ dagger(LV)
    return PartialDensity(_hermitize(F), "normal")


def compute_function(
    loop: QuantumLoop,
    state,
    method: Literal["auto", "series", "solve", "normal"] = "auto",
    tol: Tolerances | None = None,
) -> PartialDensity:
    """Evaluate ``F(rho)``.

    ``auto`` picks the eigen form when ``U_X`` is normal and the linear
    solve otherwise, falling back to the series if the solve fails.
    """
    tol = resolve(tol)
    if method == "series":
        return f_series(loop, state, tol=tol)
    if method == "solve":
        return f_solve(loop, state, tol)
    if method == "normal":
        return f_normal(loop, state, tol)
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    if linalg.is_normal(loop.U_X, tol.struct):
        return f_normal(loop, state, tol)
    try:
        return f_solve(loop, state, tol)
    except NumericalFailure:
        return f_series(loop, state, tol=tol)


# Jordan closed forms


def jordan_series_sum(lam: complex, r: int, v) -> np.ndarray:
    """``sum_n J_r(lam)^n v`` for ``|lam| < 1``.

    Component ``m`` is ``sum_i f_i(lam) v[m + i]`` with
    ``f_i(x) = (1 - x)^-(i + 1)``, the i-th Taylor coefficient of ``1/(1 - x)``
    shifted to ``x``.
    """
    lam = complex(lam)
    if abs(lam) >= 1:
        raise DivergenceError(f"|lambda| = {abs(lam):.6g} >= 1: the series diverges")
    v = linalg.as_vector(v)
    if v.shape[0] != r:
        raise linalg.DimensionError(f"vector has length {v.shape[0]}, block has size {r}")
    f = [(1 - lam) ** -(i + 1) for i in range(r)]
    return np.array([sum(f[i] * v[m + i] for i in range(r - m)) for m in range(r)])


def jordan_pair_coefficient(i: int, j: int, x: complex, y: complex) -> complex:
    """``sum_n C(n, i) C(n, j) x^(n-i) y^(n-j)`` for ``|x y| < 1``.

    Equals ``d^i/dx^i d^j/dy^j (1 - x y)^-1 / (i! j!)``.  With ``y = 1`` and
    ``j = 0`` this is ``(1 - x)^-(i+1)``, the coefficient used by
    :func:`jordan_series_sum`.
    """
    x, y = complex(x), complex(y)
    if abs(x * y) >= 1:
        raise DivergenceError("|x y| >= 1: the series diverges")
    base = 1 - x * y
    total = 0j
    for m in range(min(i, j) + 1):
        coeff = math.factorial(i + j - m) / (
            math.factorial(m) * math.factorial(i - m) * math.factorial(j - m)
        )
        total += coeff * x ** (j - m) * y ** (i - m) * base ** -(i + j - m + 1)
    return total


@dataclass(frozen=True, eq=False)
class JordanSpec:
    """Known Jordan data ``U_X = S J S^-1`` with unit-modulus blocks first."""

    blocks: tuple[tuple[complex, int], ...]
    S: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple((complex(l), int(r)) for l, r in self.blocks))
        object.__setattr__(self, "S", linalg.as_matrix(self.S))
        k = sum(r for _, r in self.blocks)
        if self.S.shape != (k, k):
            raise linalg.DimensionError(f"S has shape {self.S.shape}, blocks need {(k, k)}")
        seen_stable = False
        for lam, r in self.blocks:
            unit = abs(abs(lam) - 1) < 1e-12
            if unit and r != 1:
                raise ValueError("unit-modulus Jordan blocks must have size 1")
            if unit and seen_stable:
                raise ValueError("unit-modulus blocks must come first")
            seen_stable = seen_stable or not unit
            if abs(lam) > 1 + 1e-12:
                raise ValueError("eigenvalues of a compressed unitary lie in the unit disc")

    @property
    def k(self) -> int:
        return self.S.shape[0]

    @property
    def t(self) -> int:
        return sum(1 for lam, _ in self.blocks if abs(abs(lam) - 1) < 1e-12)

    def J(self) -> np.ndarray:
        return jordan_matrix(self.blocks)

    def matrix(self) -> np.ndarray:
        return self.S @ self.J() @ np.linalg.inv(self.S)

    def offsets(self) -> list[int]:
        out, pos = [], 0
        for _, r in self.blocks:
            out.append(pos)
            pos += r
        return out


def _unitary_dilation(C: np.ndarray) -> np.ndarray:
    """``[[C, (I - C C*)^1/2], [(I - C* C)^1/2, -C*]]``, unitary for ``||C|| <= 1``.

    Built from the SVD of ``C`` with singular values within 1e-12 of 1 snapped
    to 1, so isometric directions stay exactly decoupled.
    """
    W, sv, Vh = np.linalg.svd(C)
    sv = np.where(sv > 1 - 1e-12, 1.0, sv)
    co = np.sqrt(np.clip(1 - sv**2, 0, None))
    V = dagger(Vh)
    top = np.hstack([(W * sv) @ Vh, (W * co) @ dagger(W)])
    bottom = np.hstack([(V * co) @ Vh, -(V * sv) @ dagger(W)])
    return np.vstack([top, bottom])


def make_jordan_loop(
    blocks: Sequence[tuple[complex, int]],
    rng: np.random.Generator | int | None = None,
    *,
    mixing: float = 0.1,
    name: str = "jordan",
) -> tuple[QuantumLoop, JordanSpec]:
    """Build a loop whose ``U_X`` has exactly the given Jordan structure.

    ``U_X = S J S^-1`` is made a strict contraction on its stable part by
    rescaling each stable block's superdiagonal, conjugating by a random
    near-identity matrix, and rotating by a random unitary; the unit blocks
    are kept orthogonal to the rest.  The loop body is the unitary dilation
    of ``U_X`` on ``K = 2k`` levels, guarded by the first ``k`` outcomes.
    Unit-modulus blocks are moved to the front.
    """
    rng = np.random.default_rng(rng)
    blocks = [(complex(l), int(r)) for l, r in blocks]
    blocks.sort(key=lambda b: abs(abs(b[0]) - 1) >= 1e-12)
    k = sum(r for _, r in blocks)
    t = sum(1 for lam, _ in blocks if abs(abs(lam) - 1) < 1e-12)
    stable = blocks[t:]
    n = k - t
    W = unitary_group.rvs(k, random_state=rng) if k > 1 else np.eye(k, dtype=complex)

    scale = []
    for lam, r in stable:
        eps = (1 - abs(lam)) / 2
        scale.extend(eps**-i for i in range(r))
    D = np.diag(scale).astype(complex) if n else np.zeros((0, 0), complex)
    Js = jordan_matrix(stable)
    for _ in range(64):
        M = np.eye(n) + mixing * (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / max(n, 1)
        Ss = M @ D
        Cs = Ss @ Js @ np.linalg.inv(Ss) if n else Js
        if operator_norm(Cs) < 1 - 1e-6:
            break
        mixing /= 2
    else:  # pragma: no cover - mixing shrinks to zero, where the bound holds
        raise RuntimeError("could not build a contraction with these blocks")

    S = W @ scipy.linalg.block_diag(np.eye(t), Ss) if n else W.copy()
    spec = JordanSpec(tuple(blocks), S)
    C = spec.matrix()
    U = _unitary_dilation(C)
    K = 2 * k
    meas = ProjectiveMeasurement.computational([K])
    guard = frozenset(str(i) for i in range(k))
    return QuantumLoop(U, meas, guard, (K,), name), spec


def _check_spec(loop: QuantumLoop, spec: JordanSpec) -> None:
    if spec is None:
        raise ApplicabilityError("f_pure_jordan needs explicit Jordan data")
    if spec.k != loop.U_X.shape[0]:
        raise ApplicabilityError("Jordan data does not match dim H_X")
    if operator_norm(spec.matrix() - loop.U_X) > 1e-8:
        raise ApplicabilityError("Jordan data does not reproduce U_X")


def f_pure_jordan(loop: QuantumLoop, spec: JordanSpec, state) -> PartialDensity:
    """``F(rho)`` from known Jordan data of ``U_X``.

    With ``R = S^-1 rho_X S^-dagger`` split into blocks ``R_ab``, the series
    in Jordan coordinates is, entrywise,
    ``Y_ab[p, q] = sum_{i,j} R_ab[p+i, q+j] g_ij(lam_a, conj(lam_b))`` with
    ``g_ij`` from :func:`jordan_pair_coefficient`.  Unit-modulus blocks are
    left out since ``P_Xbar U`` kills their eigenvectors.
    """
    _check_spec(loop, spec)
    parts = _parts(loop, state)
    S = spec.S
    Sinv = np.linalg.inv(S)
    R = Sinv @ parts.rho_X @ dagger(Sinv)
    Y = np.zeros_like(R)
    offs = spec.offsets()
    for a, (la, ra) in enumerate(spec.blocks):
        if a < spec.t:
            continue
        for b, (lb, rb) in enumerate(spec.blocks):
            if b < spec.t:
                continue
            Rab = R[offs[a] : offs[a] + ra, offs[b] : offs[b] + rb]
            coef = np.array(
                [[jordan_pair_coefficient(i, j, la, np.conj(lb)) for j in range(rb)] for i in range(ra)]
            )
            block = np.zeros((ra, rb), dtype=complex)
            for p in range(ra):
                for q in range(rb):
                    block[p, q] = np.sum(Rab[p:, q:] * coef[: ra - p, : rb - q])
            Y[offs[a] : offs[a] + ra, offs[b] : offs[b] + rb] = block
    Z = S @ Y @ dagger(S)
    F = parts.direct + parts.lift @ Z @ dagger(parts.lift)
    return PartialDensity(_hermitize(F), "jordan")


def jordan_amplitude_sum(loop: QuantumLoop, spec: JordanSpec, psi) -> np.ndarray:
    """``P_Xbar psi + P_Xbar U S u`` with ``u`` the per-block :func:`jordan_series_sum`.

    This is the amplitude series ``P_Xbar psi + sum_n P_Xbar U U_X^n psi_X``.
    It is a vector sum, not ``F``: the terminating branches at different steps
    add incoherently, so ``F(|psi>)`` is the sum of their outer products
    (see :func:`f_pure_jordan`).
    """
    _check_spec(loop, spec)
    psi = linalg.as_vector(psi)
    g = loop.guard_projectors
    v = np.linalg.solve(spec.S, dagger(g.inside) @ psi)
    u = np.zeros(spec.k, dtype=complex)
    for a, (lam, r), off in zip(range(len(spec.blocks)), spec.blocks, spec.offsets()):
        if a >= spec.t:
            u[off : off + r] = jordan_series_sum(lam, r, v[off : off + r])
    return g.P_Xbar @ psi + g.P_Xbar @ loop.U @ g.inside @ spec.S @ u
