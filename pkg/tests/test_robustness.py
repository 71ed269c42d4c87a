import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special

from conftest import T, baseline_params, random_fourier
from qcrl.dynamics import propagate
from qcrl.errors import Unsupported
from qcrl.operators import SX, SY, SZ, random_hermitian
from qcrl.robustness import (NoiseDistribution, NoiseLaw, QeedCurve, calibration_report, default_delta_grid,
                             integral_robustness, multi_source_s1, qeed_curve, robustness_order_n, s1,
                             s1_derivative_check, s2, susceptibility_report, sweep_infidelity)

seeds = st.integers(0, 2 ** 32 - 1)


def _baseline_oracle():
    phi = lambda t: np.pi * (1 - np.cos(np.pi * t / T))
    Iz = integrate.quad(lambda t: np.cos(phi(t)), 0, T, epsabs=1e-13, limit=200)[0]
    Iy = integrate.quad(lambda t: np.sin(phi(t)), 0, T, epsabs=1e-9, limit=200)[0]
    return Iz, Iy


def test_zero_control_susceptibilities(sq):
    tr = propagate(sq, np.zeros(9), 64)
    S1, M1 = s1(tr, SZ)
    assert S1 == pytest.approx(50 * np.sqrt(2), rel=1e-12)
    assert np.allclose(M1, 50 * SZ)
    assert s2(tr, SZ)[0] == pytest.approx(0.0, abs=1e-10)


def test_baseline_matches_quadrature_oracle(sq):
    Iz, Iy = _baseline_oracle()
    assert abs(Iz) == pytest.approx(T * abs(special.j0(np.pi)), rel=1e-10)
    S1, M1 = s1(propagate(sq, baseline_params(), 1024), SZ)
    assert S1 == pytest.approx(np.sqrt(2) * np.hypot(Iz, Iy), rel=1e-4)
    assert abs(np.real(np.trace(M1 @ SZ)) / 2) == pytest.approx(15.212, abs=1e-3)


@given(seeds)
def test_scaling_laws(seed):
    from qcrl.models import build_single_qubit
    m = build_single_qubit()
    tr = propagate(m, random_fourier(np.random.default_rng(seed)), 256)
    a1, a2 = s1(tr, SZ)[0], s2(tr, SZ)[0]
    assert s1(tr, 3 * SZ)[0] == pytest.approx(3 * a1, rel=1e-12)
    assert s2(tr, 3 * SZ)[0] == pytest.approx(9 * a2, rel=1e-12)


def test_order_n_examples():
    assert robustness_order_n(50, 2, 10.69) == pytest.approx(1.1845, abs=5e-5)
    assert robustness_order_n(50, 1, 50) == pytest.approx(0.0, abs=1e-15)
    assert robustness_order_n(50, 1, 21.433) == pytest.approx(0.3679, abs=5e-5)
    assert robustness_order_n(50, 1, 0.0) == math.inf
    with pytest.raises(ValueError):
        robustness_order_n(50, 1, -1.0)


def test_report_fields(sq3, rng):
    A = np.concatenate([random_fourier(rng), random_fourier(rng)])
    rep = susceptibility_report(sq3, A, 256)
    assert [a.label for a in rep.axes] == ["x", "y", "z"]
    ax = rep["z"]
    assert ax.R1 == pytest.approx(math.log10(T) - math.log10(ax.S1))
    assert set(rep.to_dict()["axes"][0]) == {"label", "S1", "S2", "R1", "R2"}


def test_derivative_check_zero_control(sq):
    chk = s1_derivative_check(sq, np.zeros(9), SZ, h=1e-4, nt=64)
    assert chk.S1_M == pytest.approx(50 * np.sqrt(2))
    assert chk.rel_gap <= 1e-6
    with pytest.raises(ValueError):
        s1_derivative_check(sq, np.zeros(9), SZ, h=1e-2)


def test_derivative_check_random_pulses(sq, rng):
    for _ in range(5):
        chk = s1_derivative_check(sq, random_fourier(rng, amp=0.2), SZ, h=1e-4, nt=512)
        assert chk.rel_gap <= 1e-4
        assert chk.second_order_bound_holds


def test_integral_robustness_trivial_and_closed_form(sq):
    assert integral_robustness(sq, np.zeros(9), NoiseDistribution((NoiseLaw("fixed", 0.0),), 3, 0), 64) == 1.0
    b = 0.021
    val = integral_robustness(sq, np.zeros(9), NoiseDistribution((NoiseLaw("fixed", b),), 2, 0), 64)
    assert val == pytest.approx(abs(np.cos(b * T)), rel=1e-12)


def test_integral_robustness_mc_scaling_and_determinism(sq):
    b = 0.05
    sd = {}
    for n in (1000, 4000):
        means = [integral_robustness(sq, np.zeros(9), NoiseDistribution((NoiseLaw("uniform", b),), n, s), 16)
                 for s in range(24)]
        sd[n] = np.std(means, ddof=1)
    # quadrupling N should halve the spread of the mean
    assert 1.4 <= sd[1000] / sd[4000] <= 2.9
    dist = NoiseDistribution((NoiseLaw("uniform", b),), 500, 9)
    a = integral_robustness(sq, np.zeros(9), dist, 16, detailed=True)
    c = integral_robustness(sq, np.zeros(9), dist, 16, detailed=True)
    assert np.array_equal(a.fidelities, c.fidelities) and a.mean == c.mean


def test_noise_law_validation():
    with pytest.raises(ValueError):
        NoiseLaw("cauchy", 1.0)
    with pytest.raises(ValueError):
        NoiseLaw("uniform", -1.0)
    with pytest.raises(ValueError):
        NoiseDistribution((NoiseLaw("fixed", 0.0),), 0)


def test_qeed_examples(sq, tq):
    c = qeed_curve(propagate(sq, np.zeros(9), 64), SZ)
    assert np.allclose(c.r[:, :2], 0) and np.allclose(c.r[:, 2], c.t)
    c = qeed_curve(propagate(sq, random_fourier(np.random.default_rng(1), amp=0.3), 256), SZ)
    assert np.allclose(c.r[:, 0], 0, atol=1e-13)
    assert np.allclose(c.r[0], 0)
    with pytest.raises(Unsupported):
        qeed_curve(propagate(tq, np.zeros(9), 64), tq.noises[0].operator)


@given(seeds)
def test_qeed_norm_identity(seed):
    from qcrl.models import build_single_qubit
    m = build_single_qubit(("x", "y"))
    rng = np.random.default_rng(seed)
    tr = propagate(m, np.concatenate([random_fourier(rng), random_fourier(rng)]), 256)
    for op in (SX, SY, SZ):
        c = qeed_curve(tr, op)
        assert abs(np.sqrt(2) * np.linalg.norm(c.r[-1]) - s1(tr, op)[0]) <= 1e-10 * max(1, s1(tr, op)[0])


def test_qeed_csv_round_trip(tmp_path, sq, rng):
    c = qeed_curve(propagate(sq, random_fourier(rng), 128), SZ)
    p = tmp_path / "q.csv"
    c.to_csv(p)
    assert p.read_text().splitlines()[0] == "t,rx,ry,rz"
    back = QeedCurve.from_csv(p)
    assert np.array_equal(back.t, c.t) and np.array_equal(back.r, c.r)


def test_multi_source_examples(sq):
    tr = propagate(sq, random_fourier(np.random.default_rng(4)), 256)
    one = multi_source_s1(tr, [SZ])
    assert one.combined == pytest.approx(one.bound)
    canc = multi_source_s1(tr, [SZ, -SZ])
    assert canc.combined == pytest.approx(0.0, abs=1e-12) and canc.slack >= 0


def test_multi_source_triangle_bound(sq):
    rng = np.random.default_rng(5)
    for _ in range(100):
        tr = propagate(sq, random_fourier(rng, amp=0.3), 64)
        res = multi_source_s1(tr, [random_hermitian(2, rng), random_hermitian(2, rng)])
        assert res.slack >= -1e-12


def test_delta_grid_default():
    g = default_delta_grid()
    assert g.size == 122 and np.all(np.diff(g) > 0)
    assert g[-1] == pytest.approx(0.3) and g[61] == pytest.approx(1e-4)
    assert np.allclose(g[:61], -g[61:][::-1])


def test_sweep_noiseless_symmetry_and_slope(sq):
    A = baseline_params()
    grid = default_delta_grid()
    inf = sweep_infidelity(sq, A, grid, 512)
    assert np.all((0 <= inf) & (inf <= 1))
    assert sweep_infidelity(sq, A, [0.0], 512)[0] <= 1e-9
    assert np.allclose(inf[:61][::-1], inf[61:], atol=1e-10)
    small = (grid > 0) & (grid <= 1e-2)
    slope = np.polyfit(np.log10(grid[small]), np.log10(inf[small]), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.05)


def test_calibration_report_lists_both_norms():
    rep = calibration_report(nt=1024)
    sin = rep["shapes"]["sin"]
    assert sin["fro"]["S1"] == pytest.approx(np.sqrt(2) * sin["spectral"]["S1"], rel=1e-10)
    assert rep["reference"] == {"S1": 21.433, "S2": 127.7775}
