import numpy as np

from qloop.gates import GATES
from qloop.loop import ProjectiveMeasurement, QuantumLoop

S2 = 1 / np.sqrt(2)
KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)
PLUS = np.array([S2, S2], dtype=complex)


def one_qubit(U, guard=("0",)) -> QuantumLoop:
    U = np.eye(2) if isinstance(U, str) and U == "I" else (GATES[U] if isinstance(U, str) else U)
    return QuantumLoop(U, ProjectiveMeasurement.computational((2,)), set(guard), (2,))


def two_qubit(U, guard) -> QuantumLoop:
    return QuantumLoop(U, ProjectiveMeasurement.computational((2, 2)), set(guard), (2, 2))


def proj(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())
