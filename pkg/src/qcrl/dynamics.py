"""Time-ordered propagation, interaction-picture noise and angle extraction.

Propagation uses the exponential midpoint rule on a uniform grid of
``nt`` steps: ``U(t_{k+1}) = exp(-i dt H(t_k + dt/2)) U(t_k)``. Quantities
sampled "at midpoints" use ``V_k = exp(-i dt/2 H_k) U(t_k)``, the
propagator evaluated at ``t_k + dt/2`` with the same generator.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ContractViolation, DimensionMismatch
from .operators import dagger, expm_hermitian, is_hermitian, mat_log_unitary, pauli_project
from .pulses import PulseBasis

DEFAULT_NT = 1024


@dataclass(frozen=True)
class ControlTerm:
    operator: np.ndarray
    basis: PulseBasis
    label: str = ""


@dataclass(frozen=True)
class NoiseTerm:
    operator: np.ndarray
    label: str = ""


@dataclass(frozen=True)
class SystemModel:
    """Drift, controls and noise operators of a closed system.

    ``H(t) = drift + sum_k Omega_k(t; A_k) H_c,k + sum_j delta_j H_n,j``.
    """

    drift: np.ndarray
    controls: tuple[ControlTerm, ...]
    noises: tuple[NoiseTerm, ...] = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "controls", tuple(self.controls))
        object.__setattr__(self, "noises", tuple(self.noises))
        if not self.controls:
            raise ContractViolation("a system model needs at least one control")
        d = self.dim
        for op in [self.drift] + [c.operator for c in self.controls] + [n.operator for n in self.noises]:
            if np.shape(op) != (d, d):
                raise DimensionMismatch("all operators must be d x d")
            if not is_hermitian(op):
                raise ContractViolation("model operators must be Hermitian")
        times = {c.basis.gate_time for c in self.controls}
        if len(times) != 1:
            raise ContractViolation("all controls must share one gate time")

    @property
    def dim(self) -> int:
        return int(np.shape(self.drift)[0])

    @property
    def gate_time(self) -> float:
        return self.controls[0].basis.gate_time

    @property
    def param_sizes(self) -> list[int]:
        return [c.basis.n_params for c in self.controls]

    @property
    def n_params(self) -> int:
        return sum(self.param_sizes)

    def split(self, A) -> list[np.ndarray]:
        """Split a flat vector (or pass through a per-control list)."""
        if isinstance(A, (list, tuple)) and len(A) == len(self.controls) and all(
                np.ndim(a) == 1 for a in A):
            parts = [np.asarray(a, dtype=float) for a in A]
        else:
            flat = np.asarray(A, dtype=float).ravel()
            if flat.size != self.n_params:
                raise ContractViolation(f"expected {self.n_params} parameters, got {flat.size}")
            parts = np.split(flat, np.cumsum(self.param_sizes)[:-1])
        for p, n in zip(parts, self.param_sizes):
            if p.size != n:
                raise ContractViolation("parameter block size does not match its basis")
        return parts

    def flatten(self, A) -> np.ndarray:
        return np.concatenate(self.split(A))

    def noise_operator(self, key) -> np.ndarray:
        if isinstance(key, str):
            for n in self.noises:
                if n.label == key:
                    return n.operator
            raise KeyError(key)
        if isinstance(key, (int, np.integer)):
            return self.noises[key].operator
        return np.asarray(key, dtype=complex)

    def is_single_commuting(self) -> bool:
        """One control whose operator commutes with the drift."""
        if len(self.controls) != 1:
            return False
        Hc = self.controls[0].operator
        return bool(np.allclose(self.drift @ Hc, Hc @ self.drift, atol=1e-12))

    def time_grid(self, nt: int) -> tuple[np.ndarray, np.ndarray, float]:
        T = self.gate_time
        dt = T / nt
        grid = np.linspace(0.0, T, nt + 1)
        mid = (np.arange(nt) + 0.5) * dt
        return grid, mid, dt

    def amplitudes(self, A, t) -> np.ndarray:
        """Control waveforms, shape (n_controls, len(t))."""
        return np.stack([c.basis.evaluate(a, t) for c, a in zip(self.controls, self.split(A))])

    def hamiltonians(self, A, t, deltas=None) -> np.ndarray:
        amps = self.amplitudes(A, t)
        ops = np.stack([c.operator for c in self.controls])
        H = self.drift + np.einsum("ck,cij->kij", amps, ops)
        if deltas is not None:
            H = H + noise_sum(self, deltas)
        return H


def noise_sum(model: SystemModel, deltas) -> np.ndarray:
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    if deltas.size != len(model.noises):
        raise ContractViolation(f"expected {len(model.noises)} noise strengths, got {deltas.size}")
    out = np.zeros((model.dim, model.dim), dtype=complex)
    for d, n in zip(deltas, model.noises):
        out = out + d * n.operator
    return out


def ordered_product(E: np.ndarray) -> np.ndarray:
    """Prefix products ``P_k = E_{k-1} ... E_0`` for k = 0..n (``P_0 = I``)."""
    n, d = E.shape[0], E.shape[-1]
    P = np.empty((n + 1, d, d), dtype=complex)
    P[0] = np.eye(d)
    # Hillis-Steele scan: log2(n) batched products
    S = E.copy()
    step = 1
    while step < n:
        S[step:] = S[step:] @ S[:-step]
        step *= 2
    P[1:] = S
    return P


@dataclass(frozen=True)
class Trajectory:
    """Noiseless propagator on a uniform grid plus midpoint samples."""

    grid: np.ndarray
    U: np.ndarray
    U_mid: np.ndarray
    H_mid: np.ndarray
    dt: float
    params: tuple = field(default=())

    @property
    def nt(self) -> int:
        return len(self.grid) - 1

    @property
    def final(self) -> np.ndarray:
        return self.U[-1]


def propagate(model: SystemModel, A, nt: int = DEFAULT_NT) -> Trajectory:
    if nt < 16:
        raise ContractViolation("nt must be >= 16")
    grid, mid, dt = model.time_grid(nt)
    H = model.hamiltonians(A, mid)
    w, Q = np.linalg.eigh(H)
    Qh = dagger(Q)
    E = (Q * np.exp(-1j * dt * w)[:, None, :]) @ Qh
    half = (Q * np.exp(-0.5j * dt * w)[:, None, :]) @ Qh
    U = ordered_product(E)
    return Trajectory(grid=grid, U=U, U_mid=half @ U[:-1], H_mid=H, dt=dt,
                      params=tuple(model.split(A)))


def noisy_propagate(model: SystemModel, A, deltas, nt: int = DEFAULT_NT) -> np.ndarray:
    """Final propagator under ``H_s + H_c + sum_j delta_j H_n,j``."""
    _, mid, dt = model.time_grid(nt)
    H = model.hamiltonians(A, mid, deltas)
    return ordered_product(expm_hermitian(H, dt))[-1]


def noisy_final_batch(model: SystemModel, A, delta_rows, nt: int = DEFAULT_NT,
                      chunk: int = 64) -> np.ndarray:
    """Final noisy propagators for many noise vectors, shape (n, d, d)."""
    delta_rows = np.atleast_2d(np.asarray(delta_rows, dtype=float))
    _, mid, dt = model.time_grid(nt)
    H0 = model.hamiltonians(A, mid)
    ops = np.stack([n.operator for n in model.noises])
    out = np.empty((len(delta_rows), model.dim, model.dim), dtype=complex)
    for start in range(0, len(delta_rows), chunk):
        rows = delta_rows[start:start + chunk]
        Hn = np.einsum("bj,jxy->bxy", rows, ops)
        E = expm_hermitian(H0[None] + Hn[:, None], dt)
        P = E[:, 0]
        for k in range(1, nt):
            P = E[:, k] @ P
        out[start:start + len(rows)] = P
    return out


def interaction_noise(traj: Trajectory, H_n0: np.ndarray) -> np.ndarray:
    """``U^H H_n0 U`` at every grid midpoint, shape (nt, d, d)."""
    H_n0 = np.asarray(H_n0, dtype=complex)
    if H_n0.shape != traj.U.shape[-2:]:
        raise DimensionMismatch("noise operator does not match trajectory dimension")
    V = traj.U_mid
    return dagger(V) @ H_n0 @ V


def error_propagator(traj: Trajectory, H_n0: np.ndarray, delta: float) -> np.ndarray:
    """Interaction-picture error evolution ``U_n^sc(T)`` for noise ``delta * H_n0``."""
    Ht = interaction_noise(traj, H_n0)
    E = expm_hermitian(delta * Ht, traj.dt)
    return ordered_product(E)[-1]


def rotation_angles(U_final: np.ndarray, sigma: np.ndarray,
                    undesired: Sequence[np.ndarray] = (), branch_hint=None):
    """Rotation angle on ``sigma`` and on each undesired axis.

    ``eta`` is the Hermitian generator with ``exp(-i eta) = U_final``, so a
    pulse of area ``theta`` on ``(Omega/2) sigma_x`` yields ``theta``.
    Returns ``(theta, [vartheta_j], eta)``.
    """
    eta = mat_log_unitary(U_final, branch_hint)
    theta = pauli_project(eta, sigma)
    others = [pauli_project(eta, s) for s in undesired]
    return theta, others, eta


def single_control_angle(model: SystemModel, A, sigma: np.ndarray, nt: int = DEFAULT_NT) -> float:
    """Angle of a commuting single-control model from the discrete pulse area.

    Identical (to round-off) to the log-based angle on the midpoint grid,
    but free of branch cuts.
    """
    _, mid, dt = model.time_grid(nt)
    c = model.controls[0]
    area = dt * np.sum(c.basis.evaluate(model.split(A)[0], mid))
    gen = area * c.operator + model.gate_time * model.drift
    return float(np.real(np.trace(dagger(gen) @ sigma)))
