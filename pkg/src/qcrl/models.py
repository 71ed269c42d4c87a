"""Prebuilt single-qubit and two-qubit models (hbar = 1, times in ns)."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .dynamics import ControlTerm, NoiseTerm, SystemModel
from .errors import ContractViolation
from .operators import I2, PAULI, SX, SY, SZ, kron
from .pulses import PulseBasis, WindowedFourier

DEFAULT_GATE_TIME = 50.0


def default_basis(T: float = DEFAULT_GATE_TIME) -> WindowedFourier:
    """Sine-windowed, four-harmonic amplitude/phase series (nine parameters)."""
    return WindowedFourier(T, n_harmonics=4, window="sin", form="phase")


def build_single_qubit(controls: Sequence[str] = ("x",), noises: Sequence[str] = ("z",),
                       basis: PulseBasis | None = None, T: float = DEFAULT_GATE_TIME) -> SystemModel:
    """On-resonance qubit: controls ``(Omega_a / 2) sigma_a``, noises ``delta_b sigma_b``."""
    if not controls:
        raise ContractViolation("at least one control axis is required")
    if not noises:
        raise ContractViolation("at least one noise axis is required")
    basis = basis or default_basis(T)
    ctrl = [ControlTerm(PAULI[a] / 2, basis, a) for a in controls]
    noise = [NoiseTerm(PAULI[b], b) for b in noises]
    name = "sq_" + "".join(controls) + "_" + "".join(noises)
    return SystemModel(np.zeros((2, 2), dtype=complex), ctrl, noise, name)


XY_COUPLING = (kron(SX, SX) + kron(SY, SY)) / 2
DETUNING_NOISE = (kron(SZ, I2) - kron(I2, SZ)) / 2
SUBSPACE = (1, 2)  # |01>, |10>


def build_two_qubit_xy(basis: PulseBasis | None = None, T: float = DEFAULT_GATE_TIME) -> SystemModel:
    """Two qubits driven by ``(Omega / 2)(XX + YY) / 2`` with differential detuning noise."""
    basis = basis or default_basis(T)
    return SystemModel(np.zeros((4, 4), dtype=complex),
                       [ControlTerm(XY_COUPLING / 2, basis, "xy")],
                       [NoiseTerm(DETUNING_NOISE, "detuning")], "tq_xy_detuning")


def rxy(theta: float) -> np.ndarray:
    w, Q = np.linalg.eigh(XY_COUPLING)
    return (Q * np.exp(-0.5j * theta * w)) @ Q.conj().T


def rx(theta: float) -> np.ndarray:
    return np.cos(theta / 2) * I2 - 1j * np.sin(theta / 2) * SX


def restrict_to_subspace(U: np.ndarray, idx=SUBSPACE) -> np.ndarray:
    idx = list(idx)
    return U[np.ix_(idx, idx)]


PRESETS = {
    "sq_x_z": lambda basis=None, T=DEFAULT_GATE_TIME: build_single_qubit(("x",), ("z",), basis, T),
    "sq_xy_xyz": lambda basis=None, T=DEFAULT_GATE_TIME: build_single_qubit(("x", "y"), ("x", "y", "z"), basis, T),
    "tq_xy_detuning": lambda basis=None, T=DEFAULT_GATE_TIME: build_two_qubit_xy(basis, T),
}

# target axis and undesired axes used when traversing each preset
PRESET_AXES = {
    "sq_x_z": (SX, ()),
    "sq_xy_xyz": (SX, (SY, SZ)),
    "tq_xy_detuning": (XY_COUPLING, ()),
}


def build_preset(name: str, basis: PulseBasis | None = None, T: float = DEFAULT_GATE_TIME) -> SystemModel:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ContractViolation(f"unknown model preset {name!r}; choose from {sorted(PRESETS)}") from None
    return factory(basis, T)


def initial_pulse(model: SystemModel, rng: np.random.Generator, area: float | Sequence[float] = 2 * np.pi,
                  scale: float = 0.05) -> np.ndarray:
    """Random starting parameters whose first control has the requested pulse area.

    ``area`` may be a scalar (first control only, the others get small random
    coefficients) or one value per control. Fourier phase-form bases get a
    constant term fixed by the area, Gaussian harmonic amplitudes of width
    ``scale`` and uniform phases; other bases are Gaussian draws rescaled to
    the area.
    """
    from .pulses import TaylorProduct, pulse_area

    areas = np.atleast_1d(np.asarray(area, dtype=float))
    parts = []
    for i, c in enumerate(model.controls):
        b = c.basis
        target = areas[i] if i < areas.size else None
        if isinstance(b, WindowedFourier) and b.form == "phase":
            n = b.n_harmonics
            a = np.concatenate([[0.0], rng.normal(0.0, scale, n), rng.uniform(-np.pi, np.pi, n)])
            if target is not None:
                unit = np.zeros_like(a)
                unit[0] = 1.0
                rest = pulse_area(b, a)
                a[0] = (target - rest) / pulse_area(b, unit)
        else:
            a = rng.normal(0.0, scale, b.n_params)
            if target is not None:
                cur = pulse_area(b, a)
                if cur == 0:
                    raise ContractViolation("cannot rescale a zero-area draw")
                if isinstance(b, TaylorProduct):
                    a[:b.n_terms] *= target / cur
                else:
                    a *= target / cur
        parts.append(a)
    return np.concatenate(parts)
