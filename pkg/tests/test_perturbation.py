import numpy as np
import pytest

from qloop.gates import GATES
from qloop.linalg import is_unitary, operator_norm
from qloop.loop import ProjectiveMeasurement, QuantumLoop, validate_loop
from qloop.perturbation import (
    DegenerateSpectrumError,
    PerturbationError,
    UnsupportedGuardError,
    perturb_measurement,
    perturb_unitary,
)
from qloop.sampling import random_loop
from qloop.termination import classify_loop
from helpers import one_qubit, two_qubit


def test_identity_loop_unitary_perturbation():
    loop = one_qubit("I")
    res = perturb_unitary(loop, 0.1, rng_seed=0)
    assert operator_norm(np.eye(2) - res.perturbed) < 0.1
    assert res.distance < 0.1
    assert classify_loop(res.loop).kind == "AlmostTerminating"
    assert res.phase_shift > 0  # the doubly degenerate eigenvalue had to be split


def test_h_loop_is_left_alone():
    loop = one_qubit("H")
    for fn in (perturb_unitary, perturb_measurement):
        res = fn(loop, 0.1, rng_seed=0)
        assert res.distance == 0
        assert res.steps_taken == 0
        assert res.loop is loop


def test_z_loop_needs_one_round():
    res = perturb_unitary(one_qubit("Z"), 0.5, rng_seed=0)
    assert res.steps_taken == 1
    assert res.distance < 0.5
    assert res.verified_verdict.almost_terminating


def test_z_loop_measurement():
    res = perturb_measurement(one_qubit("Z"), 0.2, rng_seed=0)
    assert res.distance < 0.2
    assert res.verified_verdict.almost_terminating
    assert res.loop.measurement.labels == ("0", "1")
    assert res.loop.measurement.values == (0.0, 1.0)


def test_identity_measurement_has_no_room():
    # every vector is an eigenvector of I, so no rotation of M frees H_X
    with pytest.raises(DegenerateSpectrumError):
        perturb_measurement(one_qubit("I"), 0.2, rng_seed=0)


@pytest.mark.parametrize("fn", [perturb_unitary, perturb_measurement])
def test_full_guard_is_rejected(fn):
    with pytest.raises(UnsupportedGuardError):
        fn(one_qubit("Z", ("0", "1")), 0.1)


@pytest.mark.parametrize("fn", [perturb_unitary, perturb_measurement])
def test_eps_must_be_positive(fn):
    with pytest.raises(ValueError):
        fn(one_qubit("Z"), 0.0)


def test_degenerate_error_is_a_perturbation_error():
    assert issubclass(DegenerateSpectrumError, PerturbationError)


@pytest.mark.parametrize("eps", [0.3, 0.05, 1e-3])
def test_unitary_perturbation_properties(eps, rng):
    for _ in range(15):
        loop = random_loop(rng, family="trapped")
        res = perturb_unitary(loop, eps, rng_seed=int(rng.integers(1 << 31)))
        assert res.distance < eps
        assert is_unitary(res.perturbed, 1e-9)
        assert res.verified_verdict.almost_terminating
        assert classify_loop(res.loop) == res.verified_verdict
        assert res.loop.measurement is loop.measurement


@pytest.mark.parametrize("eps", [0.3, 0.05])
def test_measurement_perturbation_properties(eps, rng):
    for _ in range(15):
        loop = random_loop(rng, family="trapped")
        res = perturb_measurement(loop, eps, rng_seed=int(rng.integers(1 << 31)))
        new = res.loop.measurement
        assert res.distance < eps
        assert operator_norm(loop.measurement.observable() - new.observable()) == pytest.approx(res.distance)
        assert new.labels == loop.measurement.labels
        assert new.values == loop.measurement.values
        assert [round(np.trace(p).real) for p in new.projectors] == [
            round(np.trace(p).real) for p in loop.measurement.projectors
        ]
        assert not [d for d in validate_loop(res.loop) if d.severity == "error"]
        assert res.verified_verdict.almost_terminating
        assert np.array_equal(res.loop.U, loop.U)


def test_seed_makes_results_reproducible():
    loop = random_loop(3, family="trapped")
    a = perturb_measurement(loop, 0.1, rng_seed=7)
    b = perturb_measurement(loop, 0.1, rng_seed=7)
    assert a.deltas_used == b.deltas_used
    assert np.array_equal(a.loop.measurement.observable(), b.loop.measurement.observable())


def test_cnot_loop_with_two_trapped_states():
    # CNOT swaps |10> and |11>, which stay trapped under guard {10, 11}
    loop = two_qubit(GATES["CNOT"], {"10", "11"})
    assert classify_loop(loop).kind == "NotAlmostTerminating"
    res = perturb_unitary(loop, 0.2, rng_seed=1)
    assert res.distance < 0.2 and res.verified_verdict.almost_terminating
