"""Small perturbations of ``U`` or ``M`` that make a loop almost terminating.

Both constructions remove, one at a time, eigenvectors of the body that lie
inside the guard subspace, by mixing two orthonormal vectors::

    a' = sqrt(1 - delta) a + sqrt(delta) b
    b' = sqrt(1 - delta) b - sqrt(delta) a

For a weighted sum ``c_a |a><a| + c_b |b><b|`` this changes the operator by
exactly ``|c_a - c_b| sqrt(delta)`` in operator norm, which is how each
round's ``delta`` is budgeted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .config import Tolerances, resolve
from .linalg import dagger, operator_norm
from .loop import ProjectiveMeasurement, QuantumLoop, validate_loop
from .termination import LoopVerdict, classify_loop

__all__ = [
    "UnsupportedGuardError",
    "PerturbationError",
    "DegenerateSpectrumError",
    "PerturbationResult",
    "perturb_unitary",
    "perturb_measurement",
]

MAX_ATTEMPTS = 32
_DELTA_CAP = 0.5
_BUDGET = 0.98  # fraction of eps the rounds may spend, so distance < eps has slack


class UnsupportedGuardError(ValueError):
    """The guard accepts every outcome, so no perturbation can help."""


class PerturbationError(RuntimeError):
    """No admissible perturbation was found."""


class DegenerateSpectrumError(PerturbationError):
    """An eigenspace of ``U`` is too large for any guard subspace of this dimension to avoid."""


@dataclass(frozen=True, eq=False)
class PerturbationResult:
    """A perturbed loop together with the evidence that it is almost terminating.

    ``perturbed`` is the new unitary or the new measurement.
    """

    perturbed: np.ndarray | ProjectiveMeasurement
    loop: QuantumLoop
    distance: float
    verified_verdict: LoopVerdict
    steps_taken: int
    deltas_used: list[float] = field(default_factory=list)
    attempts: int = 0
    phase_shift: float = 0.0


def _check_guard(loop: QuantumLoop) -> None:
    if set(loop.measurement.labels) <= set(loop.guard):
        raise UnsupportedGuardError("the guard contains every outcome; nothing can leave the loop")


def _unchanged(loop: QuantumLoop, perturbed, verdict: LoopVerdict) -> PerturbationResult:
    return PerturbationResult(perturbed, loop, 0.0, verdict, 0, [], 0)


def _mix(a: np.ndarray, b: np.ndarray, delta: float) -> tuple[np.ndarray, np.ndarray]:
    c, s = np.sqrt(1 - delta), np.sqrt(delta)
    return c * a + s * b, c * b - s * a


def _separate_phases(mu: np.ndarray, gap: float) -> np.ndarray:
    """Move eigenphases forward so neighbouring ones differ by at least ``gap``.

    Each phase moves by at most ``(len(mu) - 1) * gap``.
    """
    n = len(mu)
    if n < 2 or gap <= 0:
        return mu.copy()
    theta = np.mod(np.angle(mu), 2 * np.pi)
    order = np.argsort(theta)
    ts = theta[order]
    gaps = np.diff(np.concatenate([ts, [ts[0] + 2 * np.pi]]))
    start = (int(np.argmax(gaps)) + 1) % n  # cut the circle at its widest gap
    idx = np.roll(order, -start)
    unwrapped = theta[idx[0]] + np.mod(theta[idx] - theta[idx[0]], 2 * np.pi)
    new = unwrapped.copy()
    for j in range(1, n):
        new[j] = max(unwrapped[j], new[j - 1] + gap)
    out = mu.copy()
    moved = new - unwrapped
    out[idx] = mu[idx] * np.exp(1j * moved)
    return out


def _rebuild(mu: np.ndarray, psi: np.ndarray) -> np.ndarray:
    U = (psi * mu) @ dagger(psi)
    # project back onto the unitaries to remove rounding drift
    W, _, Vh = np.linalg.svd(U)
    return W @ Vh


def perturb_unitary(
    loop: QuantumLoop,
    eps: float,
    rng_seed=None,
    tol: Tolerances | None = None,
) -> PerturbationResult:
    """Find ``U'`` with ``||U - U'|| < eps`` making the loop almost terminating.

    Coincident eigenvalues are first split by small phase shifts, so that
    every eigenspace is a line; then each eigenvector lying in ``H_X`` is
    mixed with an eigenvector outside it.  ``delta`` is the largest value
    keeping a round's norm change within budget, halved with random jitter
    if verification fails.

    Raises
    ------
    UnsupportedGuardError
        If the guard contains every outcome.
    PerturbationError
        If no verified perturbation is found within ``MAX_ATTEMPTS``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    tol = resolve(tol)
    _check_guard(loop)
    verdict = classify_loop(loop, tol)
    if verdict.almost_terminating:
        return _unchanged(loop, loop.U, verdict)

    rng = np.random.default_rng(rng_seed)
    K = loop.dim
    g = loop.guard_projectors
    eig = linalg.eig_normal(loop.U, tol.struct)

    phase_budget = _BUDGET * eps / (K + 1)
    mu0 = _separate_phases(eig.values, phase_budget / K)
    phase_shift = float(np.max(np.abs(mu0 - eig.values)))
    # one round per eigenvector inside H_X; rotations never add new ones

    for attempt in range(MAX_ATTEMPTS):
        mu = mu0.copy()
        psi = eig.vectors.copy()
        deltas: list[float] = []
        spent = phase_shift
        while True:
            out_norm = np.linalg.norm(g.P_Xbar @ psi, axis=0)
            inside = np.flatnonzero(out_norm < tol.inside)
            if inside.size == 0:
                break
            # one round per eigenvector inside H_X; rotations never add new ones
            per_round = (_BUDGET * eps - spent) / inside.size
            i0 = int(inside[0])
            cand = np.flatnonzero(out_norm >= tol.inside)
            gaps = np.abs(mu[cand] - mu[i0])
            score = np.minimum(_DELTA_CAP * gaps**2, per_round**2) * out_norm[cand] ** 2
            j0 = int(cand[int(np.argmax(score))])
            gap = abs(mu[j0] - mu[i0])
            delta = _DELTA_CAP if gap == 0 else min(_DELTA_CAP, (per_round / gap) ** 2 * (1 - 1e-9))
            if attempt:
                delta *= 2.0**-attempt * (1 - 0.25 * rng.random())
            psi[:, i0], psi[:, j0] = _mix(psi[:, i0], psi[:, j0], delta)
            deltas.append(float(delta))
            spent += gap * np.sqrt(delta)
        U_new = _rebuild(mu, psi)
        candidate = loop.with_unitary(U_new)
        distance = operator_norm(loop.U - U_new)
        new_verdict = classify_loop(candidate, tol)
        if distance < eps and new_verdict.almost_terminating and linalg.is_unitary(U_new, 1e-9):
            return PerturbationResult(
                U_new, candidate, distance, new_verdict, len(deltas), deltas, attempt + 1, phase_shift
            )
    raise PerturbationError(f"no verified perturbation of U within eps={eps} after {MAX_ATTEMPTS} attempts")


def _eigenspaces(U: np.ndarray, tol: Tolerances) -> list[np.ndarray]:
    eig = linalg.eig_normal(U, tol.struct)
    groups: list[list[int]] = []
    for i, v in enumerate(eig.values):
        for grp in groups:
            if abs(eig.values[grp[0]] - v) < tol.spec:
                grp.append(i)
                break
        else:
            groups.append([i])
    return [eig.vectors[:, grp] for grp in groups]


def _trapped_vector(spaces: list[np.ndarray], P_Xbar: np.ndarray, tol: float) -> np.ndarray | None:
    """A unit eigenvector of ``U`` inside the guard subspace, if any."""
    for Q in spaces:
        _, s, vh = np.linalg.svd(P_Xbar @ Q)
        if s[-1] < tol:
            return Q @ vh[-1].conj()
    return None


def perturb_measurement(
    loop: QuantumLoop,
    eps: float,
    rng_seed=None,
    tol: Tolerances | None = None,
) -> PerturbationResult:
    """Find ``M'`` with the same outcomes and values, ``||M - M'|| < eps``, making the loop almost terminating.

    Works on an orthonormal basis adapted to the outcomes.  Each round
    takes an eigenvector ``v`` of ``U`` inside the guard subspace and mixes
    an inside basis vector with an outside one, choosing the pair that lets
    ``v`` leak out the most within the round budget; the cost of a pair
    grows with the gap between their outcome values.
    ``delta`` is drawn from the seeded generator below the round budget
    and redrawn if the round fails to reduce the number of trapped
    eigen-directions.

    Raises
    ------
    UnsupportedGuardError
        If the guard contains every outcome.
    DegenerateSpectrumError
        If some eigenspace of ``U`` has dimension above ``K - k``, so that
        every guard subspace of dimension ``k`` meets it.
    PerturbationError
        If no verified perturbation is found within ``MAX_ATTEMPTS``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    tol = resolve(tol)
    _check_guard(loop)
    verdict = classify_loop(loop, tol)
    if verdict.almost_terminating:
        return _unchanged(loop, loop.measurement, verdict)

    rng = np.random.default_rng(rng_seed)
    meas = loop.measurement
    g = loop.guard_projectors
    K, k = loop.dim, g.k
    spaces = _eigenspaces(loop.U, tol)
    widest = max(Q.shape[1] for Q in spaces)
    if widest + k > K:
        raise DegenerateSpectrumError(
            f"U has an eigenspace of dimension {widest}; with dim H_X = {k} and K = {K} "
            "every guard subspace contains an eigenvector of U"
        )
    value_of = {label: meas.value(label) for label in meas.labels}
    owner_values = np.array([value_of[o] for o in g.owners])
    # value gaps between every inside and outside basis vector
    gaps = np.abs(owner_values[:k, None] - owner_values[None, k:])

    def count_trapped(basis: np.ndarray) -> int:
        Pbar = basis[:, k:] @ dagger(basis[:, k:])
        total = 0
        for Q in spaces:
            s = np.linalg.svd(Pbar @ Q, compute_uv=False)
            total += int(np.sum(s < tol.inside))
        return total

    for attempt in range(MAX_ATTEMPTS):
        basis = g.basis.copy()
        deltas: list[float] = []
        trapped = count_trapped(basis)
        spent = 0.0
        ok = True
        for _ in range(K):
            Pbar = basis[:, k:] @ dagger(basis[:, k:])
            v = _trapped_vector(spaces, Pbar, tol.inside)
            if v is None:
                break
            # v leaks out of the new guard subspace with weight delta |<m_i0|v>|^2
            overlap = np.abs(dagger(basis[:, :k]) @ v) ** 2
            jitter = 0.5 + 0.5 * rng.random()  # avoids the finitely many bad values
            # first try spending everything left on a final round, then an even split
            # over the trapped directions, since every round frees at least one
            for share in (1, trapped):
                per_round = (_BUDGET * eps - spent) / share
                with np.errstate(divide="ignore"):
                    delta_max = np.minimum(_DELTA_CAP, (per_round / gaps) ** 2 * (1 - 1e-9))
                delta_max *= 2.0**-attempt
                i0, j = np.unravel_index(np.argmax(overlap[:, None] * delta_max), delta_max.shape)
                i0, i1 = int(i0), k + int(j)
                delta = float(delta_max[i0, j] * jitter)
                trial = basis.copy()
                trial[:, i0], trial[:, i1] = _mix(basis[:, i0], basis[:, i1], delta)
                if share == trapped or count_trapped(trial) == 0:
                    break
            basis = trial
            deltas.append(delta)
            spent += gaps[i0, j] * np.sqrt(delta)
            now = count_trapped(basis)
            if now >= trapped:
                ok = False
                break
            trapped = now
        if not ok:
            continue
        projs = []
        for label in meas.labels:
            cols = basis[:, [i for i, o in enumerate(g.owners) if o == label]]
            projs.append(cols @ dagger(cols))
        new_meas = ProjectiveMeasurement(meas.labels, tuple(projs), meas.values)
        candidate = loop.with_measurement(new_meas)
        distance = operator_norm(meas.observable() - new_meas.observable())
        new_verdict = classify_loop(candidate, tol)
        errors = [d for d in validate_loop(candidate, tol.replace(struct=1e-9)) if d.severity == "error"]
        if distance < eps and new_verdict.almost_terminating and not errors:
            return PerturbationResult(
                new_meas, candidate, distance, new_verdict, len(deltas), deltas, attempt + 1
            )
    raise PerturbationError(
        f"no verified perturbation of M within eps={eps} after {MAX_ATTEMPTS} attempts"
    )
