"""Noise susceptibilities, order-n robustness, integral robustness and error curves."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import (DEFAULT_NT, SystemModel, Trajectory, error_propagator, interaction_noise,
                       noisy_final_batch, propagate)
from .errors import Unsupported
from .gradients import magnus_terms
from .operators import NORM_KIND, PAULI, gate_fidelity_batch, matrix_norm


def s1(traj: Trajectory, H_n0: np.ndarray, norm: str | None = None):
    """First-order susceptibility ``||int_0^T U^H H_n0 U dt||`` and its matrix."""
    M1, _ = magnus_terms(traj, H_n0)
    return matrix_norm(M1, norm), M1


def s2(traj: Trajectory, H_n0: np.ndarray, norm: str | None = None):
    """Second-order susceptibility ``||int_0^T [H(t), int_0^t H(s) ds] dt||``.

    The returned matrix is anti-Hermitian.
    """
    _, M2 = magnus_terms(traj, H_n0)
    return matrix_norm(M2, norm), M2


def robustness_order_n(T: float, n: int, Sn: float) -> float:
    """``log10 T - log10(Sn) / n``; ``+inf`` when ``Sn == 0``."""
    if Sn < 0:
        raise ValueError("susceptibility must be non-negative")
    if Sn == 0:
        return math.inf
    return math.log10(T) - math.log10(Sn) / n


@dataclass
class AxisReport:
    label: str
    S1: float
    S2: float
    M1_final: np.ndarray = field(repr=False)
    M2_final: np.ndarray = field(repr=False)
    T: float = 0.0

    @property
    def R1(self) -> float:
        return robustness_order_n(self.T, 1, self.S1)

    @property
    def R2(self) -> float:
        return robustness_order_n(self.T, 2, self.S2)

    def to_dict(self) -> dict:
        return {"label": self.label, "S1": self.S1, "S2": self.S2, "R1": self.R1, "R2": self.R2}


@dataclass
class SusceptibilityReport:
    axes: list[AxisReport]
    norm_kind: str = NORM_KIND

    def __getitem__(self, label: str) -> AxisReport:
        for ax in self.axes:
            if ax.label == label:
                return ax
        raise KeyError(label)

    def to_dict(self) -> dict:
        return {"norm_kind": self.norm_kind, "axes": [a.to_dict() for a in self.axes]}


def susceptibility_report(model: SystemModel, A, nt: int = DEFAULT_NT,
                          norm: str | None = None, traj: Trajectory | None = None) -> SusceptibilityReport:
    traj = traj or propagate(model, A, nt)
    axes = []
    for i, n in enumerate(model.noises):
        M1, M2 = magnus_terms(traj, n.operator)
        axes.append(AxisReport(n.label or str(i), matrix_norm(M1, norm), matrix_norm(M2, norm),
                               M1, M2, model.gate_time))
    return SusceptibilityReport(axes, norm or NORM_KIND)


@dataclass
class DerivativeCheck:
    S1_D: float
    S1_M: float
    rel_gap: float
    S2_D: float
    S2_M: float

    @property
    def second_order_bound_holds(self) -> bool:
        return self.S2_D <= 0.5 * self.S1_D ** 2 + self.S2_M + 1e-9 * max(1.0, self.S2_D)


def s1_derivative_check(model: SystemModel, A, H_n0, h: float = 1e-4, nt: int = DEFAULT_NT,
                        richardson: bool = True) -> DerivativeCheck:
    """Compare the derivative-based and Magnus-based susceptibilities.

    ``S1_D`` is the norm of a central difference of the error evolution in
    the noise strength (Richardson-combined over ``h`` and ``h/2`` unless
    disabled). ``S2_D`` is the norm of the second-order Taylor coefficient,
    ``(1/2) d^2 U_n / d delta^2``.
    """
    if not 1e-6 <= h <= 1e-3:
        raise ValueError("h must lie in [1e-6, 1e-3]")
    traj = propagate(model, A, nt)
    Up = {s: error_propagator(traj, H_n0, s) for s in (h, -h, h / 2, -h / 2)}
    I = np.eye(model.dim)
    d1 = (Up[h] - Up[-h]) / (2 * h)
    c2 = (Up[h] - 2 * I + Up[-h]) / (2 * h * h)
    if richardson:
        d1h = (Up[h / 2] - Up[-h / 2]) / h
        c2h = (Up[h / 2] - 2 * I + Up[-h / 2]) / (2 * (h / 2) ** 2)
        d1 = (4 * d1h - d1) / 3
        c2 = (4 * c2h - c2) / 3
    M1, M2 = magnus_terms(traj, H_n0)
    S1_M = matrix_norm(M1)
    S1_D = matrix_norm(d1)
    gap = abs(S1_D - S1_M) / max(S1_M, 1e-300)
    return DerivativeCheck(S1_D, S1_M, gap, matrix_norm(c2), matrix_norm(M2))


@dataclass(frozen=True)
class NoiseLaw:
    kind: str  # "fixed", "uniform" or "gaussian"
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("fixed", "uniform", "gaussian"):
            raise ValueError(f"unknown noise law {self.kind!r}")
        if self.kind != "fixed" and self.value < 0:
            raise ValueError("width must be non-negative")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "fixed":
            return np.full(n, self.value)
        if self.kind == "uniform":
            return rng.uniform(-self.value, self.value, size=n)
        return rng.normal(0.0, self.value, size=n)


@dataclass(frozen=True)
class NoiseDistribution:
    laws: tuple[NoiseLaw, ...]
    n_samples: int = 1000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "laws", tuple(self.laws))
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")

    def draw(self) -> np.ndarray:
        """Sample matrix of shape (n_samples, n_noises); column order fixed by ``laws``."""
        rng = np.random.default_rng(self.seed)
        return np.stack([law.sample(rng, self.n_samples) for law in self.laws], axis=1)


@dataclass
class IntegralRobustness:
    mean: float
    stderr: float
    fidelities: np.ndarray = field(repr=False)


def integral_robustness(model: SystemModel, A, dist: NoiseDistribution, nt: int = DEFAULT_NT,
                        detailed: bool = False):
    """Monte-Carlo expectation of the gate fidelity over the noise distribution."""
    if len(dist.laws) != len(model.noises):
        raise ValueError("one noise law per model noise term is required")
    U_sc = propagate(model, A, nt).final
    deltas = dist.draw()
    U_scn = noisy_final_batch(model, A, deltas, nt)
    F = gate_fidelity_batch(U_sc[None], U_scn)
    mean = float(np.mean(F))
    se = float(np.std(F, ddof=1) / np.sqrt(len(F))) if len(F) > 1 else 0.0
    if detailed:
        return IntegralRobustness(mean, se, F)
    return mean


@dataclass
class QeedCurve:
    t: np.ndarray
    r: np.ndarray  # (n, 3): r_x, r_y, r_z

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "rx", "ry", "rz"])
            for t, (x, y, z) in zip(self.t, self.r):
                w.writerow([f"{t:.17g}", f"{x:.17g}", f"{y:.17g}", f"{z:.17g}"])

    @classmethod
    def from_csv(cls, path) -> "QeedCurve":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1:4])


def qeed_curve(traj: Trajectory, H_n0: np.ndarray) -> QeedCurve:
    """Cumulative first-order error curve ``r_j(t) = Tr(M1(t) sigma_j) / 2``."""
    if traj.U.shape[-1] != 2:
        raise Unsupported("error curves are defined for two-level systems only")
    Ht = interaction_noise(traj, H_n0)
    cum = np.zeros((traj.nt + 1, 2, 2), dtype=complex)
    np.cumsum(traj.dt * Ht, axis=0, out=cum[1:])
    r = np.stack([np.real(np.einsum("kij,ji->k", cum, PAULI[a])) / 2 for a in "xyz"], axis=1)
    return QeedCurve(traj.grid.copy(), r)


@dataclass
class MultiSourceBound:
    per_source: list[float]
    combined: float

    @property
    def bound(self) -> float:
        return float(sum(self.per_source))

    @property
    def slack(self) -> float:
        return self.bound - self.combined


def multi_source_s1(traj: Trajectory, noise_ops: Sequence[np.ndarray]) -> MultiSourceBound:
    """Susceptibility of the summed noise against the triangle bound."""
    per = [s1(traj, op)[0] for op in noise_ops]
    combined = s1(traj, sum(np.asarray(op, dtype=complex) for op in noise_ops))[0]
    return MultiSourceBound(per, combined)


def default_delta_grid(n: int = 61, lo: float = 1e-4, hi: float = 0.3) -> np.ndarray:
    """Signed relative noise grid: ``n`` log-spaced magnitudes, both signs, sorted."""
    mag = np.logspace(np.log10(lo), np.log10(hi), n)
    return np.concatenate([-mag[::-1], mag])


def sweep_infidelity(model: SystemModel, A, delta_rel, nt: int = DEFAULT_NT,
                     noise_index: int = 0, omega_m: float | None = None) -> np.ndarray:
    """``1 - F`` against the noiseless gate for each relative noise ``delta / Omega_m``.

    The noise acts on the term ``noise_index`` only; ``Omega_m`` defaults to
    the largest control amplitude of the pulse.
    """
    from .pulses import max_amplitude

    delta_rel = np.asarray(delta_rel, dtype=float)
    parts = model.split(A)
    if omega_m is None:
        omega_m = max(max_amplitude(c.basis, a) for c, a in zip(model.controls, parts))
    rows = np.zeros((delta_rel.size, len(model.noises)))
    rows[:, noise_index] = delta_rel * omega_m
    U_sc = propagate(model, A, nt).final
    F = gate_fidelity_batch(U_sc[None], noisy_final_batch(model, A, rows, nt))
    return np.clip(1.0 - F, 0.0, 1.0)


# values quoted for the non-robust reference pulse; kept as calibration anchors only
REFERENCE_BASELINE = {"S1": 21.433, "S2": 127.7775}


def calibration_report(T: float = 50.0, nt: int = 4096) -> dict:
    """Baseline ``Rx(2 pi)`` susceptibilities under both norms for two baseline shapes.

    ``sin``: ``(pi^2 / T) sin(pi t / T)``; ``cos``: ``(2 pi / T)(1 - cos(2 pi t / T))``.
    Both have area ``2 pi``. The output sits next to ``REFERENCE_BASELINE``.
    """
    from .dynamics import ControlTerm, NoiseTerm
    from .pulses import PiecewiseConstant
    from .operators import SX, SZ

    t = (np.arange(nt) + 0.5) * T / nt
    shapes = {"sin": np.pi ** 2 / T * np.sin(np.pi * t / T),
              "cos": 2 * np.pi / T * (1 - np.cos(2 * np.pi * t / T))}
    model = SystemModel(np.zeros((2, 2), dtype=complex), [ControlTerm(SX / 2, PiecewiseConstant(T, nt))],
                        [NoiseTerm(SZ, "z")])
    out = {"reference": dict(REFERENCE_BASELINE), "shapes": {}}
    for name, om in shapes.items():
        M1, M2 = magnus_terms(propagate(model, om, nt), SZ)
        out["shapes"][name] = {kind: {"S1": matrix_norm(M1, kind), "S2": matrix_norm(M2, kind)}
                               for kind in ("fro", "spectral")}
    return out
