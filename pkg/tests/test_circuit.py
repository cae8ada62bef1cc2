import numpy as np
import pytest

from oracles import PAULI, dense_expectation, dense_module, dense_prefix
from scrambleml.circuit import (
    CircuitSpec,
    apply_module,
    build_unitary,
    initial_state,
    run_circuit,
)
from scrambleml.errors import CapacityError, ValidationError


def random_spec(rng, n, depth, variant, layer_order="two_body_first"):
    angles = rng.uniform(0.0, np.pi, (depth, n))
    return CircuitSpec(n, depth, variant, angles, layer_order)


def test_spec_validation():
    with pytest.raises(ValidationError):
        CircuitSpec(1, 1, "I", np.zeros((1, 1)))
    with pytest.raises(ValidationError):
        CircuitSpec(2, 0, "I", np.zeros((0, 2)))
    with pytest.raises(ValidationError):
        CircuitSpec(2, 1, "III", np.zeros((1, 2)))
    with pytest.raises(ValidationError):
        CircuitSpec(2, 1, "I", np.zeros((2, 2)))
    with pytest.raises(ValidationError):
        CircuitSpec(2, 1, "I", np.full((1, 2), 3.5))
    with pytest.raises(ValidationError):
        CircuitSpec(2, 1, "I", np.zeros((1, 2)), layer_order="middle")


def test_spec_angles_read_only():
    spec = CircuitSpec(2, 1, "I", np.zeros((1, 2)))
    with pytest.raises(ValueError):
        spec.angles[0, 0] = 1.0


def test_homogeneous_spec():
    theta = np.array([0.3, 1.2, 2.2])
    spec = CircuitSpec.homogeneous(4, 3, "II", theta)
    assert spec.angles.shape == (3, 4)
    assert np.all(spec.angles == theta[:, None])
    with pytest.raises(ValidationError):
        CircuitSpec.homogeneous(4, 3, "II", np.zeros(2))


def test_initial_state():
    psi = initial_state(3)
    assert psi.shape == (8,)
    assert psi[0] == 1.0
    assert np.abs(psi[1:]).max() == 0.0
    with pytest.raises(CapacityError):
        initial_state(27)
    with pytest.raises(ValidationError):
        initial_state(0)


def test_variant_two_n2_theta_zero():
    # both ring bonds coincide on two qubits, net xx angle pi/2: |00> maps to
    # |11> (up to the z-layer phase), so <z1> = -1 and <z1 z2> = +1
    spec = CircuitSpec(2, 1, "II", np.zeros((1, 2)))
    psi = run_circuit(spec)
    z1 = dense_expectation(psi, 2, {1: PAULI["z"]})
    zz = dense_expectation(psi, 2, {1: PAULI["z"], 2: PAULI["z"]})
    assert z1.real == pytest.approx(-1.0, abs=1e-12)
    assert zz.real == pytest.approx(1.0, abs=1e-12)
    assert np.abs(psi[3]) == pytest.approx(1.0, abs=1e-12)


def test_variant_one_theta_zero_is_diagonal():
    # without x rotations variant I only multiplies |00> by a phase
    spec = CircuitSpec(2, 1, "I", np.zeros((1, 2)))
    psi = run_circuit(spec)
    assert psi[0] == pytest.approx(-1.0 + 0.0j, abs=1e-12)
    assert np.abs(psi[1:]).max() < 1e-12


def test_full_x_flip():
    # theta = pi/2 on every site flips all spins regardless of variant I phases
    spec = CircuitSpec.homogeneous(3, 1, "I", np.array([np.pi / 2]))
    psi = run_circuit(spec)
    assert np.abs(psi[7]) == pytest.approx(1.0, abs=1e-12)
    assert np.abs(psi[:7]).max() < 1e-12


def test_frozen_amplitudes():
    # reference amplitudes computed once with the dense Kronecker oracle
    angles = np.array([[1.963795, 2.81868, 2.436888], [0.707509, 0.943, 2.744349]])
    psi = run_circuit(CircuitSpec(3, 2, "I", angles))
    assert psi[0] == pytest.approx(-0.11965308261382514 + 0.2081599655518163j, abs=1e-12)
    assert psi[5] == pytest.approx(-0.20768814676394756 + 0.12129732883334288j, abs=1e-12)
    psi = run_circuit(CircuitSpec(3, 2, "II", angles))
    assert psi[0] == pytest.approx(-0.17321680864740238 + 0.11359429517270375j, abs=1e-12)
    assert psi[5] == pytest.approx(0.19803783702722783 - 0.01206400762390203j, abs=1e-12)


def test_oracle_equivalence_small_sizes():
    rng = np.random.default_rng(11)
    for n in (2, 3, 4):
        for variant in ("I", "II"):
            for _ in range(5):
                spec = random_spec(rng, n, 3, variant)
                psi = run_circuit(spec)
                ref = dense_prefix(spec, 3) @ initial_state(n)
                assert np.abs(psi - ref).max() < 1e-10


def test_oracle_equivalence_reversed_layers():
    rng = np.random.default_rng(12)
    for variant in ("I", "II"):
        spec = random_spec(rng, 3, 2, variant, layer_order="rotations_first")
        psi = run_circuit(spec)
        ref = dense_prefix(spec, 2) @ initial_state(3)
        assert np.abs(psi - ref).max() < 1e-10


def test_layer_order_changes_state():
    rng = np.random.default_rng(13)
    angles = rng.uniform(0.2, np.pi - 0.2, (2, 3))
    a = run_circuit(CircuitSpec(3, 2, "II", angles, "two_body_first"))
    b = run_circuit(CircuitSpec(3, 2, "II", angles, "rotations_first"))
    assert np.abs(a - b).max() > 1e-3


def test_norm_preserved():
    rng = np.random.default_rng(14)
    for variant in ("I", "II"):
        spec = random_spec(rng, 6, 20, variant)
        psi = run_circuit(spec)
        assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-10)


def test_observer_sequence():
    rng = np.random.default_rng(15)
    spec = random_spec(rng, 3, 4, "II")
    seen = []

    def watch(p, state):
        with pytest.raises(ValueError):
            state[0] = 0.0
        seen.append((p, state.copy()))

    final = run_circuit(spec, observer=watch)
    assert [p for p, _ in seen] == [0, 1, 2, 3, 4]
    assert np.array_equal(seen[0][1], initial_state(3))
    assert np.array_equal(seen[-1][1], final)
    # prefix states agree with dense prefixes
    for p, state in seen:
        ref = dense_prefix(spec, p) @ initial_state(3)
        assert np.abs(state - ref).max() < 1e-10


def test_apply_module_matches_dense_and_is_pure():
    rng = np.random.default_rng(16)
    spec = random_spec(rng, 3, 2, "II")
    psi0 = initial_state(3)
    psi0_copy = psi0.copy()
    psi1 = apply_module(psi0, spec, 1)
    assert np.array_equal(psi0, psi0_copy)
    assert np.abs(psi1 - dense_module(spec, 1) @ psi0).max() < 1e-10
    with pytest.raises(ValidationError):
        apply_module(psi0, spec, 0)
    with pytest.raises(ValidationError):
        apply_module(psi0, spec, 3)
    with pytest.raises(ValidationError):
        apply_module(np.zeros(4, dtype=complex), spec, 1)


def test_apply_module_on_matrix():
    rng = np.random.default_rng(17)
    spec = random_spec(rng, 3, 2, "I")
    mat = rng.standard_normal((8, 5)) + 1j * rng.standard_normal((8, 5))
    out = apply_module(mat, spec, 2)
    assert np.abs(out - dense_module(spec, 2) @ mat).max() < 1e-10


def test_build_unitary():
    rng = np.random.default_rng(18)
    for variant in ("I", "II"):
        spec = random_spec(rng, 3, 3, variant)
        assert np.array_equal(build_unitary(spec, 0), np.eye(8))
        for p in (1, 2, 3):
            u = build_unitary(spec, p)
            assert np.abs(u - dense_prefix(spec, p)).max() < 1e-10
            assert np.abs(u @ u.conj().T - np.eye(8)).max() < 1e-10
    with pytest.raises(ValidationError):
        build_unitary(spec, 4)


def test_build_unitary_capacity():
    spec = CircuitSpec(11, 1, "I", np.zeros((1, 11)))
    with pytest.raises(CapacityError):
        build_unitary(spec, 1)
    # configurable bound
    spec4 = CircuitSpec(4, 1, "I", np.zeros((1, 4)))
    with pytest.raises(CapacityError):
        build_unitary(spec4, 1, max_qubits=3)
