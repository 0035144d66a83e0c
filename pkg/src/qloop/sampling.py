"""Seeded random loops and states for property tests and the acceptance suite."""

from __future__ import annotations

from typing import Literal

import numpy as np
from scipy.stats import unitary_group

from .linalg import dagger
from .loop import ProjectiveMeasurement, QuantumLoop

__all__ = [
    "random_unitary",
    "random_pure_state",
    "random_density",
    "random_register_dims",
    "random_measurement",
    "random_guard",
    "random_loop",
]

Family = Literal["haar", "planted", "trapped"]


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    if n == 1:
        return np.exp(2j * np.pi * rng.random((1, 1)))
    return unitary_group.rvs(n, random_state=rng)


def random_pure_state(n: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix of the given rank (full rank by default)."""
    rank = n if rank is None else rank
    G = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    rho = G @ dagger(G)
    return rho / np.trace(rho).real


def random_register_dims(rng: np.random.Generator, max_dim: int = 8) -> tuple[int, ...]:
    """A register layout with total dimension between 2 and ``max_dim``."""
    K = int(rng.integers(2, max_dim + 1))
    splits = [(a, K // a) for a in range(2, K) if K % a == 0]
    if splits and rng.random() < 0.5:
        return splits[int(rng.integers(len(splits)))]
    return (K,)


def random_measurement(dims, rng: np.random.Generator) -> ProjectiveMeasurement:
    """Either a computational measurement of some registers or a random observable."""
    dims = tuple(dims)
    K = int(np.prod(dims))
    if rng.random() < 0.5:
        regs = sorted(rng.choice(len(dims), size=int(rng.integers(1, len(dims) + 1)), replace=False))
        return ProjectiveMeasurement.computational(dims, [int(r) for r in regs])
    n_out = int(rng.integers(2, K + 1))
    # random partition of a random orthonormal basis into n_out nonempty blocks
    cuts = np.sort(rng.choice(np.arange(1, K), size=n_out - 1, replace=False))
    sizes = np.diff(np.concatenate([[0], cuts, [K]]))
    V = random_unitary(K, rng)
    values = rng.permutation(n_out).astype(float)
    M = np.zeros((K, K), dtype=complex)
    pos = 0
    for size, value in zip(sizes, values):
        cols = V[:, pos : pos + size]
        M += value * cols @ dagger(cols)
        pos += size
    return ProjectiveMeasurement.from_observable(M)


def random_guard(labels, rng: np.random.Generator, proper: bool = False) -> frozenset[str]:
    """Random subset of ``labels``; ``proper`` excludes the empty and full sets."""
    labels = list(labels)
    while True:
        mask = rng.random(len(labels)) < 0.5
        guard = frozenset(l for l, m in zip(labels, mask) if m)
        if not proper or 0 < len(guard) < len(labels):
            return guard


def random_loop(
    rng: np.random.Generator | int | None = None,
    max_dim: int = 8,
    family: Family = "haar",
) -> QuantumLoop:
    """Random loop of total dimension at most ``max_dim``.

    ``haar``
        Haar body, random measurement and any guard subset.
    ``planted``
        Some eigenvectors of the body lie in ``H_X``, so ``U_X`` has
        unit-modulus eigenvalues next to a stable part.
    ``trapped``
        ``H_X`` is invariant under the body, which acts as independent Haar
        unitaries on ``H_X`` and its complement.  Generically nondegenerate
        and never almost terminating.
    """
    rng = np.random.default_rng(rng)
    dims = random_register_dims(rng, max_dim)
    K = int(np.prod(dims))
    meas = random_measurement(dims, rng)
    guard = random_guard(meas.labels, rng, proper=family != "haar")
    loop = QuantumLoop(np.eye(K), meas, guard, dims, family)
    if family == "haar":
        return loop.with_unitary(random_unitary(K, rng))
    g = loop.guard_projectors
    k = g.k
    if family == "trapped":
        inner = np.zeros((K, K), dtype=complex)
        inner[:k, :k] = random_unitary(k, rng)
        inner[k:, k:] = random_unitary(K - k, rng)
        return loop.with_unitary(g.basis @ inner @ dagger(g.basis))
    if family == "planted":
        p = int(rng.integers(1, k + 1))
        planted = g.inside @ random_unitary(k, rng)[:, :p]
        # complete with a random orthonormal basis of the orthogonal complement
        rest = random_unitary(K, rng)
        rest = rest - planted @ (dagger(planted) @ rest)
        q, _ = np.linalg.qr(rest)
        V = np.hstack([planted, q[:, : K - p]])
        phases = np.exp(2j * np.pi * rng.random(K))
        return loop.with_unitary((V * phases) @ dagger(V))
    raise ValueError(f"unknown family {family!r}")
