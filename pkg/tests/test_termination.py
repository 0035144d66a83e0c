import numpy as np
import pytest

from qloop.gates import GATES
from qloop.loop import ProjectiveMeasurement, QuantumLoop, run_trace
from qloop.sampling import random_density, random_loop, random_pure_state
from qloop.termination import (
    ContractionError,
    almost_terminates_on,
    analyze_input,
    classify_loop,
    jordan_block,
    jordan_block_apply,
    jordan_block_power,
    jordan_matrix,
    p_nt,
    spectral_split,
    terminates_on,
)
from helpers import KET0, KET1, PLUS, S2, one_qubit, two_qubit


def test_split_scalar_unit():
    s = spectral_split([[1]])
    assert s.t == 1
    assert np.allclose(s.Pi1, [[1]])
    assert s.stable_radius == 0


def test_split_h_loop():
    s = spectral_split([[S2]])
    assert s.t == 0
    assert s.stable_radius == pytest.approx(S2)


def test_split_diagonal():
    s = spectral_split(np.diag([np.exp(1j * np.pi / 4), 0.5]))
    assert s.t == 1
    assert s.stable_radius == pytest.approx(0.5)
    assert np.allclose(s.Pi1, np.diag([1, 0]))


def test_split_rejects_expanding_matrix():
    with pytest.raises(ContractionError):
        spectral_split(np.diag([1.5, 0.1]))


def test_split_pi1_is_invariant_projector(rng):
    loop = random_loop(rng, family="planted")
    s = spectral_split(loop.U_X)
    assert s.t >= 1
    U = loop.U_X
    assert np.allclose(s.Pi1 @ s.Pi1, s.Pi1)
    assert np.allclose(U @ s.Pi1, s.Pi1 @ U @ s.Pi1, atol=1e-10)
    # the unit part is orthogonal to the rest: it also reduces U_X
    assert np.allclose(s.Pi1 @ U, s.Pi1 @ U @ s.Pi1, atol=1e-10)


@pytest.mark.parametrize(
    "gate, kind",
    [("X", "Terminating"), ("H", "AlmostTerminating"), ("T", "NotAlmostTerminating")],
)
def test_classify_examples(gate, kind):
    assert classify_loop(one_qubit(gate)).kind == kind


def test_classify_nilpotent_with_nonzero_eigenvalue_estimates():
    # a Jordan block at 0 compressed from a cyclic shift: U_X = J_3(0)
    K = 4
    shift = np.roll(np.eye(K), 1, axis=0)
    loop = QuantumLoop(shift, ProjectiveMeasurement.computational((K,)), {"0", "1", "2"}, (K,))
    assert classify_loop(loop).kind == "Terminating"


def test_terminates_on_examples():
    assert terminates_on(two_qubit(GATES["CNOT"], {"10"}), random_pure_state(4, np.random.default_rng(0)))
    assert terminates_on(one_qubit("I"), KET1)
    assert not terminates_on(one_qubit("Z"), PLUS)


def test_almost_terminates_on_examples(rng):
    assert almost_terminates_on(one_qubit("H"), random_pure_state(2, rng))
    assert almost_terminates_on(one_qubit("Z"), KET1)
    assert not almost_terminates_on(one_qubit("Z"), PLUS)


def test_p_nt_examples(rng):
    a = random_pure_state(2, rng)
    assert p_nt(one_qubit("I"), a) == pytest.approx(abs(a[0]) ** 2, abs=1e-12)
    psi = random_pure_state(4, rng)
    assert p_nt(two_qubit(GATES["CNOT"], {"00"}), psi) == pytest.approx(abs(psi[0]) ** 2, abs=1e-12)
    assert p_nt(one_qubit("H"), a) == 0


def test_analyze_input_verdicts():
    assert analyze_input(one_qubit("X"), KET0).kind == "Terminates"
    assert analyze_input(one_qubit("X"), KET0).at_step == 2
    assert analyze_input(one_qubit("H"), KET0).kind == "AlmostTerminates"
    assert analyze_input(one_qubit("Z"), PLUS).kind == "NonTerminating"


def test_p_nt_is_the_limit_of_simulation(rng):
    loop = random_loop(rng, family="planted")
    rho = random_density(loop.dim, rng)
    trace = run_trace(loop, rho, 400, keep_states=False)
    assert trace.steps[-1].p_NT_cumulative == pytest.approx(p_nt(loop, rho), abs=1e-6)


def test_verdict_is_uniform_for_planted_loops(rng):
    for _ in range(20):
        v = classify_loop(random_loop(rng, family="planted"))
        assert v.kind == "NotAlmostTerminating" and not v.uniform


def test_jordan_power_examples():
    assert np.allclose(jordan_block_power(0, 2, 2), 0)
    lam, N = 0.3 + 0.4j, 7
    assert jordan_block_power(lam, 2, N)[0, 1] == pytest.approx(N * lam ** (N - 1))
    J = jordan_block(0.5, 3)
    brute = np.eye(3)
    for _ in range(10):
        brute = brute @ J
    assert np.abs(jordan_block_power(0.5, 3, 10) - brute).max() < 1e-12


@pytest.mark.parametrize("r", range(1, 6))
def test_jordan_power_against_repeated_multiplication(r, rng):
    for N in range(21):
        lam = complex(*rng.normal(size=2))
        lam /= max(1, abs(lam))
        got = jordan_block_power(lam, r, N)
        assert np.abs(got - np.linalg.matrix_power(jordan_block(lam, r), N)).max() < 1e-10
        v = rng.normal(size=r) + 1j * rng.normal(size=r)
        assert np.allclose(jordan_block_apply(lam, r, N, v), got @ v, atol=1e-12)


def test_jordan_power_errors():
    with pytest.raises(ValueError):
        jordan_block_power(0.5, 0, 3)
    with pytest.raises(OverflowError):
        jordan_block_power(0.5, 2, 65)


def test_jordan_matrix_layout():
    J = jordan_matrix([(1, 1), (0.5, 2)])
    assert np.allclose(J, [[1, 0, 0], [0, 0.5, 1], [0, 0, 0.5]])
