import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from conftest import baseline_params, random_fourier
from qcrl.dynamics import (ControlTerm, NoiseTerm, SystemModel, error_propagator, interaction_noise,
                           noisy_final_batch, noisy_propagate, ordered_product, propagate, rotation_angles,
                           single_control_angle)
from qcrl.errors import ContractViolation, DimensionMismatch
from qcrl.models import build_single_qubit
from qcrl.operators import I2, SX, SY, SZ, gate_fidelity, mat_exp, random_hermitian
from qcrl.pulses import PiecewiseConstant, WindowedFourier, pulse_area

T = 50.0
seeds = st.integers(0, 2 ** 32 - 1)


def test_zero_pulse_is_identity(sq):
    tr = propagate(sq, np.zeros(9), 256)
    assert np.allclose(tr.U, I2, atol=1e-15)


def test_constant_pulse_gives_rotation():
    theta = 1.3
    m = build_single_qubit(basis=PiecewiseConstant(T, 1))
    U = propagate(m, [theta / T], 64).final
    assert np.allclose(U, mat_exp(SX, theta / 2), atol=1e-13)


def test_piecewise_matches_sequential_expm(rng):
    # midpoint stepping is exact when segments align with the grid
    n = 8
    m = SystemModel(random_hermitian(3, rng, 0.1), [ControlTerm(random_hermitian(3, rng), PiecewiseConstant(T, n))],
                    [NoiseTerm(random_hermitian(3, rng))])
    A = rng.normal(0, 0.05, n)
    U_ref = np.eye(3)
    for a in A:
        U_ref = sla.expm(-1j * (T / n) * (m.drift + a * m.controls[0].operator)) @ U_ref
    assert np.allclose(propagate(m, A, 16 * n).final, U_ref, atol=1e-12)


def test_ordered_product_matches_loop(rng):
    E = np.stack([mat_exp(random_hermitian(2, rng), 0.3) for _ in range(37)])
    P = ordered_product(E)
    acc = np.eye(2)
    for k in range(37):
        assert np.allclose(P[k], acc, atol=1e-13)
        acc = E[k] @ acc
    assert np.allclose(P[-1], acc, atol=1e-13)


def test_unitary_along_trajectory(sq, rng):
    tr = propagate(sq, random_fourier(rng, amp=0.3), 1024)
    err = np.linalg.norm(tr.U.conj().transpose(0, 2, 1) @ tr.U - I2, axis=(1, 2))
    assert err.max() <= 2e-10


def test_nt_doubling_change(sq):
    # measured 5.2e-6 for the baseline pulse; the midpoint rule needs nt >= 2048 for 1e-6
    A = baseline_params()
    assert np.linalg.norm(propagate(sq, A, 512).final - propagate(sq, A, 1024).final) <= 1e-5
    assert np.linalg.norm(propagate(sq, A, 2048).final - propagate(sq, A, 4096).final) <= 1e-6


def test_self_convergence_order_two(sq):
    A = random_fourier(np.random.default_rng(0), amp=0.2)
    ref = propagate(sq, A, 8192).final
    err = [np.linalg.norm(propagate(sq, A, n).final - ref) for n in (256, 512, 1024)]
    for a, b in zip(err, err[1:]):
        assert 3.5 <= a / b <= 4.5


def test_nt_minimum(sq):
    with pytest.raises(ContractViolation):
        propagate(sq, np.zeros(9), 8)


def test_noisy_zero_delta_is_noiseless(sq, rng):
    A = random_fourier(rng)
    assert np.allclose(noisy_propagate(sq, A, [0.0], 256), propagate(sq, A, 256).final, atol=1e-14)


def test_noisy_zero_control_closed_form(sq):
    d = 0.013
    assert np.allclose(noisy_propagate(sq, np.zeros(9), [d], 64), mat_exp(SZ, d * T), atol=1e-12)


def test_noisy_batch_matches_single(sq3, rng):
    A = np.concatenate([random_fourier(rng), random_fourier(rng)])
    rows = rng.normal(0, 0.01, (5, 3))
    batch = noisy_final_batch(sq3, A, rows, 128, chunk=2)
    for r, U in zip(rows, batch):
        assert np.allclose(U, noisy_propagate(sq3, A, r, 128), atol=1e-12)


def test_noise_vector_length_checked(sq3):
    with pytest.raises(ContractViolation):
        noisy_propagate(sq3, np.zeros(18), [0.1], 64)


def test_picture_identity_small_system():
    rng = np.random.default_rng(42)
    m = build_single_qubit(T=10.0)
    for _ in range(50):
        A = np.concatenate([[rng.uniform(-0.3, 0.3)], rng.normal(0, 0.1, 4), rng.uniform(-3, 3, 4)])
        d = rng.uniform(-0.1, 0.1)
        tr = propagate(m, A, 8192)
        U_scn = noisy_propagate(m, A, [d], 8192)
        assert np.linalg.norm(U_scn - tr.final @ error_propagator(tr, SZ, d)) <= 1e-8


def test_interaction_noise_trivial_and_spectrum(sq, rng):
    Ht = interaction_noise(propagate(sq, np.zeros(9), 64), SZ)
    assert np.allclose(Ht, SZ)
    Ht = interaction_noise(propagate(sq, random_fourier(rng, amp=0.4), 256), SZ)
    assert np.allclose(np.linalg.eigvalsh(Ht), [-1, 1], atol=1e-10)
    with pytest.raises(DimensionMismatch):
        interaction_noise(propagate(sq, np.zeros(9), 64), np.eye(4))


def test_interaction_noise_closed_form(sq):
    # x rotation by phi(t) conjugates sigma_z into cos(phi) sigma_z + sin(phi) sigma_y
    A = baseline_params()
    nt = 512
    tr = propagate(sq, A, nt)
    b = sq.controls[0].basis
    _, mid, dt = sq.time_grid(nt)
    # exact phase at each midpoint: the discrete area up to the step plus half a step
    om = b.evaluate(A, mid)
    phi = np.concatenate([[0.0], np.cumsum(om)[:-1]]) * dt + 0.5 * dt * om
    Ht = interaction_noise(tr, SZ)
    ref = np.cos(phi)[:, None, None] * SZ + np.sin(phi)[:, None, None] * SY
    assert np.allclose(Ht, ref, atol=1e-12)


def test_error_propagator_examples(sq, rng):
    tr = propagate(sq, random_fourier(rng), 256)
    assert np.allclose(error_propagator(tr, SZ, 0.0), I2)
    tr0 = propagate(sq, np.zeros(9), 64)
    assert np.allclose(error_propagator(tr0, SZ, 0.02), mat_exp(SZ, 0.02 * T), atol=1e-12)


def test_error_trace_reproduces_fidelity():
    m = build_single_qubit(T=10.0)
    rng = np.random.default_rng(8)
    A = np.concatenate([[0.2], rng.normal(0, 0.1, 4), rng.uniform(-3, 3, 4)])
    tr = propagate(m, A, 8192)
    for d in (0.01, -0.05, 0.1):
        Un = error_propagator(tr, SZ, d)
        F = gate_fidelity(tr.final, noisy_propagate(m, A, [d], 8192))
        assert abs(abs(np.trace(Un)) / 2 - F) <= 1e-8


def test_rotation_angle_examples():
    th, others, _ = rotation_angles(mat_exp(SX, np.pi / 6), SX, (SY, SZ))
    assert th == pytest.approx(np.pi / 3)
    assert others == pytest.approx([0, 0], abs=1e-14)
    th, others, _ = rotation_angles(I2, SX, (SY, SZ))
    assert th == 0 and others == [0, 0]


@given(seeds)
def test_log_angle_equals_area(seed):
    rng = np.random.default_rng(seed)
    m = build_single_qubit()
    A = random_fourier(rng, amp=0.1, scale=0.03)
    area = pulse_area(m.controls[0].basis, A)
    # hint just off the exact generator to pick the branch of the area
    th, _, _ = rotation_angles(propagate(m, A, 4096).final, SX, branch_hint=(area / 2 + 1e-3) * SX)
    assert abs(th - area) <= 1e-6
    assert single_control_angle(m, A, SX, 4096) == pytest.approx(th, abs=1e-9)


def test_model_validation():
    b = WindowedFourier(T)
    with pytest.raises(ContractViolation):
        SystemModel(np.zeros((2, 2)), [], [])
    with pytest.raises(ContractViolation):
        SystemModel(np.zeros((2, 2)), [ControlTerm(np.array([[0, 1], [0, 0]]), b)], [])
    with pytest.raises(DimensionMismatch):
        SystemModel(np.zeros((2, 2)), [ControlTerm(SX, b)], [NoiseTerm(np.eye(4))])
    with pytest.raises(ContractViolation):
        SystemModel(np.zeros((2, 2)), [ControlTerm(SX, b), ControlTerm(SY, WindowedFourier(20.0))], [])
