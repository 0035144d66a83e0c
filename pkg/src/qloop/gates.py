"""Standard gates and gate constructors used by the loop language."""

from __future__ import annotations

import numpy as np

from .linalg import as_matrix, tensor_product

__all__ = [
    "GATES",
    "identity",
    "rx",
    "ry",
    "rz",
    "phase",
    "controlled",
    "cycle_shift",
    "euler_unitary",
]

_S2 = 1 / np.sqrt(2)

GATES: dict[str, np.ndarray] = {
    "I2": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "T": np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=complex),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}


def identity(n: int) -> np.ndarray:
    return np.eye(int(n), dtype=complex)


def rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def phase(alpha: float) -> complex:
    """The global phase factor ``e^{i alpha}`` (a scalar)."""
    return complex(np.exp(1j * alpha))


def controlled(U) -> np.ndarray:
    """``C(U) = |0><0| (x) I + |1><1| (x) U``, control first."""
    U = as_matrix(U)
    n = U.shape[0]
    out = np.eye(2 * n, dtype=complex)
    out[n:, n:] = U
    return out


def cycle_shift(n: int) -> np.ndarray:
    """Conditional shift on an n-cycle with a qubit coin (position first).

    Coin ``|0>`` moves ``i -> i - 1`` and coin ``|1>`` moves ``i -> i + 1`` (mod n).
    """
    n = int(n)
    left = np.roll(np.eye(n), -1, axis=0)  # |i - 1><i|
    right = np.roll(np.eye(n), 1, axis=0)  # |i + 1><i|
    P0 = np.diag([1.0, 0.0])
    P1 = np.diag([0.0, 1.0])
    return (np.kron(left, P0) + np.kron(right, P1)).astype(complex)


def euler_unitary(alpha: float, beta: float, gamma: float, delta: float) -> np.ndarray:
    """``e^{i alpha} Rz(beta) Ry(gamma) Rz(delta)``: every one-qubit unitary has this form."""
    return phase(alpha) * rz(beta) @ ry(gamma) @ rz(delta)


def kron(*ops) -> np.ndarray:
    return tensor_product(*ops)
