"""Quantum loop programs ``while (M in X) { q := U q }`` and their step semantics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Sequence

import numpy as np

from . import linalg
from .config import Tolerances, resolve
from .linalg import DimensionError, dagger, operator_norm

__all__ = [
    "InvalidStateError",
    "ProjectiveMeasurement",
    "QuantumLoop",
    "StateInput",
    "as_state",
    "GuardProjectors",
    "guard_projectors",
    "restrict",
    "StepResult",
    "step",
    "TraceStep",
    "LoopTrace",
    "run_trace",
    "Diagnostic",
    "validate_loop",
    "outcome_labels",
]


class InvalidStateError(ValueError):
    """Input is not a normalized pure state or a density operator."""


def _digits_label(values: Sequence[int], dims: Sequence[int]) -> str:
    if all(d <= 10 for d in dims):
        return "".join(str(v) for v in values)
    return "_".join(str(v) for v in values)


def outcome_labels(dims: Sequence[int]) -> list[str]:
    """Computational-basis labels for registers of the given dimensions, in index order."""
    dims = list(dims)
    if len(dims) == 1:
        return [str(i) for i in range(dims[0])]
    return [_digits_label(idx, dims) for idx in np.ndindex(*dims)]


@dataclass(frozen=True, eq=False)
class ProjectiveMeasurement:
    """Outcome-labelled complete family of orthogonal projectors.

    ``values`` holds the eigenvalue attached to each outcome so that the
    observable ``M = sum_m m P_m`` can be rebuilt.
    """

    labels: tuple[str, ...]
    projectors: tuple[np.ndarray, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(str(l) for l in self.labels))
        object.__setattr__(
            self, "projectors", tuple(np.asarray(p, dtype=complex) for p in self.projectors)
        )
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not (len(self.labels) == len(self.projectors) == len(self.values)):
            raise ValueError("labels, projectors and values must have equal length")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"duplicate outcome labels in {self.labels}")

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0] if self.projectors else 0

    @property
    def outcomes(self) -> list[tuple[str, np.ndarray]]:
        return list(zip(self.labels, self.projectors))

    def projector(self, label: str) -> np.ndarray:
        return self.projectors[self.labels.index(label)]

    def value(self, label: str) -> float:
        return self.values[self.labels.index(label)]

    def observable(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for v, p in zip(self.values, self.projectors):
            out += v * p
        return out

    @classmethod
    def computational(
        cls, dims: Sequence[int], registers: Sequence[int] | None = None
    ) -> "ProjectiveMeasurement":
        """Measurement of the listed registers (all by default) in the computational basis.

        Outcome values are the mixed-radix index of the measured digits.
        """
        dims = [int(d) for d in dims]
        regs = list(range(len(dims))) if registers is None else [int(r) for r in registers]
        if any(r < 0 or r >= len(dims) for r in regs) or len(set(regs)) != len(regs):
            raise DimensionError(f"bad register list {regs} for dims {dims}")
        sub = [dims[r] for r in regs]
        K = math.prod(dims)
        labels, projs, values = [], [], []
        for value, digits in enumerate(np.ndindex(*sub)):
            diag = np.zeros(K)
            for flat, full in enumerate(np.ndindex(*dims)):
                if all(full[r] == d for r, d in zip(regs, digits)):
                    diag[flat] = 1.0
            labels.append(str(digits[0]) if len(sub) == 1 else _digits_label(digits, sub))
            projs.append(np.diag(diag).astype(complex))
            values.append(float(value))
        return cls(tuple(labels), tuple(projs), tuple(values))

    @classmethod
    def from_observable(cls, M, tol_spec: float = 1e-8) -> "ProjectiveMeasurement":
        """Group eigenvectors of a Hermitian ``M`` into one projector per distinct eigenvalue.

        Labels are ``e0, e1, ...`` following the package-wide eigenvalue order.
        """
        M = linalg.as_matrix(M)
        if not linalg.is_hermitian(M, max(tol_spec, 1e-9)):
            raise ValueError("observable must be Hermitian")
        eig = linalg.eig_normal(M, tol=max(tol_spec, 1e-9))
        vals = eig.values.real
        groups: list[list[int]] = []
        for i in np.argsort(vals, kind="stable"):
            if groups and abs(vals[i] - vals[groups[-1][-1]]) < tol_spec:
                groups[-1].append(int(i))
            else:
                groups.append([int(i)])
        reps = [float(np.mean(vals[g])) for g in groups]
        order = linalg.spectral_order(reps)
        labels, projs, values = [], [], []
        for n, gi in enumerate(order):
            vecs = eig.vectors[:, groups[gi]]
            labels.append(f"e{n}")
            projs.append(vecs @ dagger(vecs))
            values.append(reps[gi])
        return cls(tuple(labels), tuple(projs), tuple(values))


@dataclass(frozen=True, eq=False)
class StateInput:
    """A pure state vector or a density operator fed to a loop."""

    kind: Literal["pure", "mixed"]
    data: np.ndarray

    @classmethod
    def pure(cls, psi) -> "StateInput":
        return cls("pure", linalg.as_vector(psi))

    @classmethod
    def mixed(cls, rho) -> "StateInput":
        return cls("mixed", linalg.as_matrix(rho))

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @cached_property
    def rho(self) -> np.ndarray:
        if self.kind == "pure":
            return np.outer(self.data, self.data.conj())
        return self.data

    def validate(self, tol: float = 1e-9) -> "StateInput":
        if self.kind == "pure":
            norm = np.linalg.norm(self.data)
            if abs(norm - 1) > tol:
                raise InvalidStateError(f"pure state has norm {norm:.12g}, expected 1")
        else:
            rho = self.data
            if not linalg.is_square(rho):
                raise InvalidStateError(f"density matrix must be square, got {rho.shape}")
            if not linalg.is_hermitian(rho, tol):
                raise InvalidStateError("density matrix is not Hermitian")
            if not linalg.is_positive_semidefinite(rho, tol):
                raise InvalidStateError("density matrix is not positive semidefinite")
            tr = linalg.trace(rho)
            if abs(tr - 1) > tol:
                raise InvalidStateError(f"density matrix has trace {tr.real:.12g}, expected 1")
        return self


def as_state(x) -> StateInput:
    """Accept a :class:`StateInput`, a 1-d amplitude vector or a 2-d density matrix."""
    if isinstance(x, StateInput):
        return x
    arr = np.asarray(x, dtype=complex)
    if arr.ndim == 1:
        return StateInput.pure(arr)
    if arr.ndim == 2:
        return StateInput.mixed(arr)
    raise InvalidStateError(f"cannot interpret array of shape {arr.shape} as a state")


@dataclass(frozen=True)
class GuardProjectors:
    """``P_X``, its complement, and an orthonormal basis whose first ``k`` columns span ``H_X``."""

    P_X: np.ndarray
    P_Xbar: np.ndarray
    k: int
    basis: np.ndarray
    owners: tuple[str, ...]  # outcome label owning each basis column

    @property
    def inside(self) -> np.ndarray:
        return self.basis[:, : self.k]

    @property
    def outside(self) -> np.ndarray:
        return self.basis[:, self.k :]


def _range_basis(P: np.ndarray, rank: int) -> np.ndarray:
    """Orthonormal basis for range(P) by pivoted Gram-Schmidt over its columns."""
    K = P.shape[0]
    cols = P.copy()
    out: list[np.ndarray] = []
    for _ in range(rank):
        norms = np.linalg.norm(cols, axis=0)
        j = int(np.argmax(norms))
        if norms[j] < 1e-8:
            break
        q = cols[:, j] / norms[j]
        for b in out:  # reorthogonalize once for stability
            q = q - b * np.vdot(b, q)
        q /= np.linalg.norm(q)
        out.append(q)
        cols = cols - np.outer(q, q.conj() @ cols)
    if not out:
        return np.zeros((K, 0), dtype=complex)
    return np.column_stack(out)


@dataclass(frozen=True, eq=False)
class QuantumLoop:
    """The program ``while (M in X) { q := U q }``.

    Construction performs no structural validation; call
    :func:`validate_loop` for diagnostics.
    """

    U: np.ndarray
    measurement: ProjectiveMeasurement
    guard: frozenset[str]
    subsystem_dims: tuple[int, ...] = ()
    name: str = "loop"

    def __post_init__(self):
        object.__setattr__(self, "U", linalg.as_matrix(self.U))
        object.__setattr__(self, "guard", frozenset(str(g) for g in self.guard))
        dims = tuple(int(d) for d in self.subsystem_dims) or (self.U.shape[0],)
        object.__setattr__(self, "subsystem_dims", dims)

    @property
    def dim(self) -> int:
        return self.U.shape[0]

    @cached_property
    def guard_projectors(self) -> GuardProjectors:
        return guard_projectors(self)

    @cached_property
    def U_X(self) -> np.ndarray:
        return restrict(self.U, self.guard_projectors)

    @property
    def guard_is_everything(self) -> bool:
        return self.guard >= set(self.measurement.labels)

    def with_unitary(self, U) -> "QuantumLoop":
        return QuantumLoop(U, self.measurement, self.guard, self.subsystem_dims, self.name)

    def with_measurement(self, measurement: ProjectiveMeasurement) -> "QuantumLoop":
        return QuantumLoop(self.U, measurement, self.guard, self.subsystem_dims, self.name)


def guard_projectors(loop: QuantumLoop) -> GuardProjectors:
    """Guard projectors and the adapted basis (guard outcomes first)."""
    meas = loop.measurement
    K = loop.dim
    P_X = np.zeros((K, K), dtype=complex)
    for label, P in meas.outcomes:
        if label in loop.guard:
            P_X += P
    inside = [l for l in meas.labels if l in loop.guard]
    outside = [l for l in meas.labels if l not in loop.guard]
    cols, owners = [], []
    for label in inside + outside:
        P = meas.projector(label)
        rank = int(round(linalg.trace(P).real))
        b = _range_basis(P, rank)
        cols.append(b)
        owners.extend([label] * b.shape[1])
    basis = np.column_stack(cols) if cols else np.zeros((K, 0), dtype=complex)
    k = int(round(linalg.trace(P_X).real))
    return GuardProjectors(P_X, np.eye(K) - P_X, k, basis, tuple(owners))


def restrict(A, g: GuardProjectors) -> np.ndarray:
    """The k-by-k matrix of ``P_X A P_X`` in the guard basis."""
    A = linalg.as_matrix(A)
    K = g.basis.shape[0]
    if A.shape != (K, K):
        raise DimensionError(f"operator has shape {A.shape}, expected {(K, K)}")
    B = g.inside
    return dagger(B) @ A @ B


@dataclass(frozen=True)
class StepResult:
    p_term: float
    rho_out: np.ndarray | None
    p_cont: float
    rho_in: np.ndarray | None


def step(loop: QuantumLoop, rho, tol: Tolerances | None = None) -> StepResult:
    """One guard measurement followed, on the continuing branch, by ``U``.

    Branches whose probability is below ``tol.zero`` get no conditional state.
    """
    tol = resolve(tol)
    rho = as_state(rho).rho
    g = loop.guard_projectors
    p_term = float(np.real(np.trace(g.P_Xbar @ rho)))
    p_cont = float(np.real(np.trace(g.P_X @ rho)))
    rho_out = g.P_Xbar @ rho @ g.P_Xbar / p_term if p_term > tol.zero else None
    rho_in = None
    if p_cont > tol.zero:
        mid = g.P_X @ rho @ g.P_X / p_cont
        rho_in = loop.U @ mid @ dagger(loop.U)
    return StepResult(p_term, rho_out, p_cont, rho_in)


@dataclass(frozen=True)
class TraceStep:
    n: int
    p_T: float
    p_NT: float
    p_NT_cumulative: float
    p_NT_formula: float
    rho_out: np.ndarray | None = field(default=None, repr=False)
    rho_in: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class LoopTrace:
    steps: list[TraceStep]
    truncated_at: int
    termination_detected: bool
    termination_step: int | None

    @property
    def cumulative(self) -> np.ndarray:
        return np.array([s.p_NT_cumulative for s in self.steps])

    @property
    def formula_residual(self) -> float:
        """Largest gap between the simulated and closed-form ``p_NT^{n+}``."""
        return max((abs(s.p_NT_cumulative - s.p_NT_formula) for s in self.steps), default=0.0)

    def weighted_termination_mass(self) -> float:
        """``sum_n p_NT^{(n-1)+} p_T^{(n)}`` over the recorded steps."""
        prev, total = 1.0, 0.0
        for s in self.steps:
            total += prev * s.p_T
            prev = s.p_NT_cumulative
        return total


def run_trace(
    loop: QuantumLoop,
    state,
    n_max: int,
    *,
    method: Literal["auto", "density", "vector"] = "auto",
    keep_states: bool = True,
    tol: Tolerances | None = None,
) -> LoopTrace:
    """Unwind the loop for ``n_max`` steps.

    ``p_NT_cumulative`` is the running product of continuation probabilities;
    ``p_NT_formula`` is ``tr(U_X^{n-1} rho_X U_X^{dagger(n-1)})`` computed
    independently, so the two columns check each other.

    Pure inputs use vector iteration under ``method="auto"``.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    tol = resolve(tol)
    st = as_state(state)
    if method == "auto":
        method = "vector" if st.kind == "pure" else "density"
    if method == "vector" and st.kind != "pure":
        raise ValueError("vector iteration needs a pure input")

    g = loop.guard_projectors
    U_X = loop.U_X
    W = restrict(st.rho, g)  # unnormalized rho_X propagated by U_X

    steps: list[TraceStep] = []
    cumulative = 1.0
    detected_at: int | None = None
    truncated_at = n_max
    psi = st.data / np.linalg.norm(st.data) if method == "vector" else None
    rho = None if method == "vector" else st.rho

    for n in range(1, n_max + 1):
        formula = float(np.real(np.trace(W)))
        if method == "vector":
            out = g.P_Xbar @ psi
            cont = g.P_X @ psi
            p_T = float(np.vdot(out, out).real)
            p_NT = float(np.vdot(cont, cont).real)
            rho_out = np.outer(out, out.conj()) / p_T if p_T > tol.zero else None
            if p_NT > tol.zero:
                psi = loop.U @ cont / math.sqrt(p_NT)
                rho_in = np.outer(psi, psi.conj())
            else:
                rho_in = None
        else:
            res = step(loop, rho, tol)
            p_T, p_NT, rho_out, rho_in = res.p_term, res.p_cont, res.rho_out, res.rho_in
            rho = rho_in
        cumulative *= p_NT
        steps.append(
            TraceStep(
                n,
                p_T,
                p_NT,
                cumulative,
                formula,
                rho_out if keep_states else None,
                rho_in if keep_states else None,
            )
        )
        if detected_at is None and cumulative < tol.zero:
            detected_at = n
        W = U_X @ W @ dagger(U_X)
        if rho_in is None:
            truncated_at = n
            break
    return LoopTrace(steps, truncated_at, detected_at is not None, detected_at)


@dataclass(frozen=True)
class Diagnostic:
    severity: Literal["error", "warning"]
    code: str
    message: str
    residual: float | None = None

    def __str__(self) -> str:
        extra = f" (residual {self.residual:.3g})" if self.residual is not None else ""
        return f"{self.severity}: {self.code}: {self.message}{extra}"


def validate_loop(loop: QuantumLoop, tol: Tolerances | None = None) -> list[Diagnostic]:
    """Report every structural problem of ``loop``; never raises."""
    tol = resolve(tol)
    out: list[Diagnostic] = []
    U = loop.U
    K = U.shape[0]
    meas = loop.measurement

    if U.shape[0] != U.shape[1]:
        out.append(Diagnostic("error", "shape", f"U has shape {U.shape}, expected square"))
        return out
    if math.prod(loop.subsystem_dims) != K:
        out.append(
            Diagnostic(
                "error",
                "dims",
                f"register dimensions {list(loop.subsystem_dims)} multiply to "
                f"{math.prod(loop.subsystem_dims)}, but U is {K}x{K}",
            )
        )
    r = operator_norm(dagger(U) @ U - np.eye(K))
    if r >= tol.struct:
        out.append(Diagnostic("error", "non-unitary", "U is not unitary", r))

    if not meas.projectors:
        out.append(Diagnostic("error", "measurement", "measurement has no outcomes"))
        return out
    if meas.dim != K:
        out.append(
            Diagnostic("error", "dims", f"measurement acts on dimension {meas.dim}, U on {K}")
        )
        return out
    total = np.zeros((K, K), dtype=complex)
    for label, P in meas.outcomes:
        if P.shape != (K, K):
            out.append(Diagnostic("error", "dims", f"projector {label!r} has shape {P.shape}"))
            return out
        rh = operator_norm(P - dagger(P))
        if rh >= tol.struct:
            out.append(Diagnostic("error", "projector", f"P[{label}] is not Hermitian", rh))
        ri = operator_norm(P @ P - P)
        if ri >= tol.struct:
            out.append(Diagnostic("error", "projector", f"P[{label}] is not idempotent", ri))
        total += P
    rc = operator_norm(total - np.eye(K))
    if rc >= tol.struct:
        out.append(Diagnostic("error", "completeness", "projectors do not sum to I", rc))
    for i, (la, Pa) in enumerate(meas.outcomes):
        for lb, Pb in meas.outcomes[i + 1 :]:
            ro = operator_norm(Pa @ Pb)
            if ro >= tol.struct:
                out.append(
                    Diagnostic("error", "orthogonality", f"P[{la}] P[{lb}] is not zero", ro)
                )

    unknown = sorted(loop.guard - set(meas.labels))
    if unknown:
        out.append(
            Diagnostic("error", "guard", f"guard labels {unknown} are not measurement outcomes")
        )
    elif not loop.guard:
        out.append(
            Diagnostic("warning", "trivial-guard", "X is empty: the loop terminates immediately")
        )
    elif loop.guard_is_everything:
        out.append(
            Diagnostic("warning", "trivial-guard", "X is the whole spectrum: the loop loops forever")
        )
    return out

