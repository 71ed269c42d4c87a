import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from qcrl.errors import BranchAmbiguity, ContractViolation, DimensionMismatch
from qcrl.operators import (I2, SX, SY, SZ, commutator, exp_frechet_hermitian, frobenius_norm, gate_fidelity,
                            is_unitary, kron, mat_exp, mat_log_unitary, matrix_norm, pauli_project,
                            random_hermitian, random_unitary, unitary_log_decomposition)

seeds = st.integers(0, 2 ** 32 - 1)


def test_mat_exp_examples():
    assert np.allclose(mat_exp(np.zeros((2, 2)), 1.0), I2, atol=1e-15)
    assert np.allclose(mat_exp(SX, np.pi), -I2, atol=1e-14)
    assert np.allclose(mat_exp(SZ, np.pi / 2), np.diag([-1j, 1j]), atol=1e-14)


def test_mat_exp_rejects_non_hermitian():
    with pytest.raises(ContractViolation):
        mat_exp(np.array([[0, 1], [0, 0]], dtype=complex))


@given(seeds, st.sampled_from([2, 3, 4]))
def test_mat_exp_matches_scipy_and_is_unitary(seed, d):
    rng = np.random.default_rng(seed)
    H = random_hermitian(d, rng, 3.0)
    s = rng.uniform(-2, 2)
    U = mat_exp(H, s)
    assert np.linalg.norm(U.conj().T @ U - np.eye(d)) <= 1e-10 * d
    assert np.allclose(U, sla.expm(-1j * s * H), atol=1e-12)


def test_mat_exp_unitary_1000_draws(rng):
    H = np.stack([random_hermitian(4, rng, 5.0) for _ in range(1000)])
    U = mat_exp(H, 1.0)
    err = np.linalg.norm(U.conj().transpose(0, 2, 1) @ U - np.eye(4), axis=(1, 2))
    assert err.max() <= 4e-10


@given(seeds)
def test_frechet_matches_scipy(seed):
    rng = np.random.default_rng(seed)
    H, D = random_hermitian(3, rng), random_hermitian(3, rng)
    s = 0.7
    E, L = exp_frechet_hermitian(H, D, s)
    E_ref, L_ref = sla.expm_frechet(-1j * s * H, -1j * s * D)
    assert np.allclose(E, E_ref, atol=1e-12)
    assert np.allclose(L, L_ref, atol=1e-11)


def test_frechet_degenerate_spectrum():
    # repeated eigenvalues exercise the confluent divided difference
    H = np.diag([1.0, 1.0, -2.0]).astype(complex)
    D = random_hermitian(3, np.random.default_rng(0))
    E, L = exp_frechet_hermitian(H, D, 0.3)
    _, L_ref = sla.expm_frechet(-0.3j * H, -0.3j * D)
    assert np.allclose(L, L_ref, atol=1e-12)


def test_log_examples():
    assert np.allclose(mat_log_unitary(I2), 0, atol=1e-14)
    U = mat_exp(SX, np.pi / 4)
    assert np.allclose(mat_log_unitary(U), np.pi / 4 * SX, atol=1e-13)
    eta = mat_log_unitary(-I2, branch_hint=np.pi * SX)
    assert np.allclose(eta, np.pi * SX, atol=1e-12)


def test_log_minus_identity_needs_hint():
    with pytest.raises(BranchAmbiguity):
        mat_log_unitary(-I2)


def test_log_branch_follows_hint_past_pi():
    # a rotation beyond pi is recovered continuously when the hint is close
    for theta in (3.0, 3.5, 5.0, 7.0):
        U = mat_exp(SX, theta / 2)
        eta = mat_log_unitary(U, branch_hint=(theta - 0.01) / 2 * SX)
        assert pauli_project(eta, SX) == pytest.approx(theta, abs=1e-10)


@given(seeds, st.sampled_from([2, 4]))
def test_log_round_trip(seed, d):
    rng = np.random.default_rng(seed)
    U = random_unitary(d, rng, np.pi - 0.1)
    eta = mat_log_unitary(U)
    assert np.allclose(eta, eta.conj().T, atol=1e-12)
    assert np.linalg.norm(mat_exp(eta, 1.0) - U) <= 1e-9


def test_log_decomposition_eigenphases_shifted_to_hint():
    U = mat_exp(SZ, 0.2)
    p, Q = unitary_log_decomposition(U, branch_hint=(0.2 + 2 * np.pi) * SZ)
    assert sorted(p) == pytest.approx(sorted([0.2 + 2 * np.pi, -0.2 - 2 * np.pi]))


def test_pauli_project_examples():
    th = 0.83
    assert pauli_project(th / 2 * SX, SX) == pytest.approx(th)
    assert pauli_project(SZ, SX) == pytest.approx(0.0)
    assert pauli_project(0.3 * SY + 0.1 * SZ, SY) == pytest.approx(0.6)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_pauli_project_recovers_coefficients(cx, cy, cz):
    eta = cx * SX + cy * SY + cz * SZ
    for c, s in ((cx, SX), (cy, SY), (cz, SZ)):
        assert abs(pauli_project(eta, s) / 2 - c) <= 1e-12


def test_norm_examples():
    assert frobenius_norm(SZ) == pytest.approx(np.sqrt(2))
    assert frobenius_norm(np.zeros((2, 2))) == 0.0
    assert frobenius_norm(50 * SZ) == pytest.approx(70.71067811865476)
    assert matrix_norm(50 * SZ, "spectral") == pytest.approx(50.0)
    with pytest.raises(ValueError):
        matrix_norm(SZ, "nuclear")


def test_fidelity_examples():
    U = random_unitary(2, np.random.default_rng(3))
    assert gate_fidelity(U, U) == pytest.approx(1.0)
    assert gate_fidelity(I2, 1j * I2) == pytest.approx(1.0)
    assert gate_fidelity(I2, SX) == pytest.approx(0.0)
    with pytest.raises(DimensionMismatch):
        gate_fidelity(I2, np.eye(4))


@given(seeds, st.floats(-np.pi, np.pi))
def test_fidelity_global_phase_invariant(seed, phi):
    rng = np.random.default_rng(seed)
    U, V = random_unitary(4, rng), random_unitary(4, rng)
    assert abs(gate_fidelity(U, np.exp(1j * phi) * V) - gate_fidelity(U, V)) <= 1e-12


def test_commutator_and_kron():
    assert np.allclose(commutator(SX, SY), 2j * SZ)
    K = kron(SX, SZ, I2)
    assert K.shape == (8, 8) and is_unitary(K)
