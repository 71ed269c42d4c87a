"""Pulse bases and their analytic parameter derivatives.

Every basis maps a real parameter vector ``A`` to a waveform
``Omega(t; A)`` on ``[0, T]`` (rad/ns) and is zero outside that window.
Evaluation is vectorised over ``t``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

WINDOWS = ("sin", "sin2", "gaussian")


@dataclass(frozen=True)
class PulseBasis:
    gate_time: float

    def __post_init__(self):
        if not self.gate_time > 0:
            raise ValueError("gate_time must be positive")

    @property
    def n_params(self) -> int:
        raise NotImplementedError

    def _check(self, A) -> np.ndarray:
        A = np.asarray(A, dtype=float)
        if A.shape != (self.n_params,):
            raise ValueError(f"{type(self).__name__} expects {self.n_params} parameters, got {A.shape}")
        return A

    def evaluate(self, A, t) -> np.ndarray:
        A = self._check(A)
        t = np.asarray(t, dtype=float)
        inside = (t >= 0) & (t <= self.gate_time)
        tt = np.clip(t, 0.0, self.gate_time) / self.gate_time
        return np.where(inside, self._values(A, tt), 0.0)

    def gradient(self, A, t) -> np.ndarray:
        """Partials ``dOmega/dA_j`` with shape ``t.shape + (n_params,)``."""
        A = self._check(A)
        t = np.asarray(t, dtype=float)
        inside = (t >= 0) & (t <= self.gate_time)
        tt = np.clip(t, 0.0, self.gate_time) / self.gate_time
        return np.where(inside[..., None], self._grad(A, tt), 0.0)

    def _values(self, A, tt):
        raise NotImplementedError

    def _grad(self, A, tt):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class PiecewiseConstant(PulseBasis):
    n_segments: int = 1

    def __post_init__(self):
        super().__post_init__()
        if self.n_segments < 1:
            raise ValueError("n_segments must be >= 1")

    @property
    def n_params(self):
        return self.n_segments

    def _index(self, tt):
        return np.minimum((tt * self.n_segments).astype(int), self.n_segments - 1)

    def _values(self, A, tt):
        return A[self._index(tt)]

    def _grad(self, A, tt):
        return np.eye(self.n_segments)[self._index(tt)]

    def to_dict(self):
        return {"kind": "piecewise", "gate_time": self.gate_time, "n_segments": self.n_segments}


@dataclass(frozen=True)
class TaylorProduct(PulseBasis):
    """``(sum_k a_k s^k)(sum_k b_k (1 - s)^k)`` for k = 1..N with s = t/T.

    Parameters are ordered ``(a_1..a_N, b_1..b_N)``.
    """

    n_terms: int = 1

    def __post_init__(self):
        super().__post_init__()
        if self.n_terms < 1:
            raise ValueError("n_terms must be >= 1")

    @property
    def n_params(self):
        return 2 * self.n_terms

    def _powers(self, tt):
        k = np.arange(1, self.n_terms + 1)
        return tt[..., None] ** k, (1.0 - tt)[..., None] ** k

    def _values(self, A, tt):
        p, q = self._powers(tt)
        n = self.n_terms
        return (p @ A[:n]) * (q @ A[n:])

    def _grad(self, A, tt):
        p, q = self._powers(tt)
        n = self.n_terms
        left = p @ A[:n]
        right = q @ A[n:]
        return np.concatenate([p * right[..., None], q * left[..., None]], axis=-1)

    def to_dict(self):
        return {"kind": "taylor", "gate_time": self.gate_time, "n_terms": self.n_terms}


@dataclass(frozen=True)
class WindowedFourier(PulseBasis):
    """Window times a truncated Fourier series in normalised time.

    ``form="phase"`` uses ``(a_0, a_1..a_n, phi_1..phi_n)`` with terms
    ``a_k cos(2 pi k s + phi_k)``; ``form="cossin"`` uses
    ``(a_0, a_1..a_n, b_1..b_n)`` with ``a_k cos + b_k sin``.
    """

    n_harmonics: int = 4
    window: str = "sin"
    sigma: float = 0.25  # gaussian width in units of T
    form: str = "phase"

    def __post_init__(self):
        super().__post_init__()
        if self.n_harmonics < 1:
            raise ValueError("n_harmonics must be >= 1")
        if self.window not in WINDOWS:
            raise ValueError(f"window must be one of {WINDOWS}")
        if self.form not in ("phase", "cossin"):
            raise ValueError("form must be 'phase' or 'cossin'")

    @property
    def n_params(self):
        return 2 * self.n_harmonics + 1

    def window_values(self, tt):
        if self.window == "sin":
            return np.sin(np.pi * tt)
        if self.window == "sin2":
            return np.sin(np.pi * tt) ** 2
        s = self.sigma
        return np.exp(-((tt - 0.5) ** 2) / (2 * s * s)) / (s * self.gate_time * np.sqrt(2 * np.pi))

    def _values(self, A, tt):
        n = self.n_harmonics
        k = np.arange(1, n + 1)
        arg = 2 * np.pi * tt[..., None] * k
        if self.form == "phase":
            series = A[0] + np.cos(arg + A[n + 1:]) @ A[1:n + 1]
        else:
            series = A[0] + np.cos(arg) @ A[1:n + 1] + np.sin(arg) @ A[n + 1:]
        return self.window_values(tt) * series

    def _grad(self, A, tt):
        n = self.n_harmonics
        k = np.arange(1, n + 1)
        arg = 2 * np.pi * tt[..., None] * k
        w = self.window_values(tt)[..., None]
        if self.form == "phase":
            ph = arg + A[n + 1:]
            cols = [np.ones_like(tt)[..., None], np.cos(ph), -A[1:n + 1] * np.sin(ph)]
        else:
            cols = [np.ones_like(tt)[..., None], np.cos(arg), np.sin(arg)]
        return w * np.concatenate(cols, axis=-1)

    def to_dict(self):
        return {"kind": "fourier", "gate_time": self.gate_time, "n_harmonics": self.n_harmonics,
                "window": self.window, "sigma": self.sigma, "form": self.form}


@lru_cache(maxsize=256)
def _morlet_norm(k: int, r: float) -> float:
    # integral over normalised time tau in [-1/2, 1/2]; scaled by T by the caller
    val, _ = integrate.quad(lambda tau: np.exp(-2 * r * r * tau * tau) * np.cos((2 * k + 1) * np.pi * tau),
                            -0.5, 0.5, epsabs=1e-14, epsrel=1e-13, limit=200)
    return 1.0 / val


def morlet_basis_fn(k: int, r: float, T: float, t):
    """Truncated Morlet-like wavelet of order ``k`` with unit integral over [0, T]."""
    if k < 0 or not r > 0:
        raise ValueError("need k >= 0 and r > 0")
    tau = (np.asarray(t, dtype=float) - T / 2) / T
    c = _morlet_norm(int(k), float(r)) / T
    return c * np.exp(-2 * r * r * tau * tau) * np.cos((2 * k + 1) * np.pi * tau)


@dataclass(frozen=True)
class Morlet(PulseBasis):
    """Sum of ``A_k Mlt_k(t)`` for orders ``k = 1..N``."""

    n_orders: int = 4
    ratio: float = 2.0

    def __post_init__(self):
        super().__post_init__()
        if self.n_orders < 1 or not self.ratio > 0:
            raise ValueError("n_orders must be >= 1 and ratio > 0")

    @property
    def n_params(self):
        return self.n_orders

    def _grad(self, A, tt):
        T = self.gate_time
        t = tt * T
        return np.stack([morlet_basis_fn(k, self.ratio, T, t) for k in range(1, self.n_orders + 1)], axis=-1)

    def _values(self, A, tt):
        return self._grad(A, tt) @ A

    def to_dict(self):
        return {"kind": "morlet", "gate_time": self.gate_time, "n_orders": self.n_orders, "ratio": self.ratio}


def basis_from_dict(spec: dict) -> PulseBasis:
    spec = dict(spec)
    kind = spec.pop("kind")
    cls = {"piecewise": PiecewiseConstant, "taylor": TaylorProduct,
           "fourier": WindowedFourier, "morlet": Morlet}.get(kind)
    if cls is None:
        raise ValueError(f"unknown pulse basis kind {kind!r}")
    return cls(**spec)


def eval_pulse(basis: PulseBasis, A, t):
    return basis.evaluate(A, t)


def pulse_param_gradient(basis: PulseBasis, A, t):
    return basis.gradient(A, t)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _composite_gl(f, T: float, panels: int) -> float:
    edges = np.linspace(0.0, T, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = mid[:, None] + half[:, None] * _GL_NODES
    return float(np.sum(half[:, None] * _GL_WEIGHTS * f(x)))


def pulse_area(basis: PulseBasis, A, rtol: float = 1e-9, max_panels: int = 1 << 14) -> float:
    """``int_0^T Omega(t; A) dt`` by composite Gauss-Legendre with panel doubling."""
    A = basis._check(A)
    T = basis.gate_time
    if isinstance(basis, PiecewiseConstant):
        return float(np.sum(A) * T / basis.n_segments)
    f = lambda x: basis.evaluate(A, x)  # noqa: E731
    panels = 64
    prev = _composite_gl(f, T, panels)
    while panels < max_panels:
        panels *= 2
        cur = _composite_gl(f, T, panels)
        if abs(cur - prev) <= rtol * max(abs(cur), 1e-300) or abs(cur - prev) < 1e-15 * T:
            return cur
        prev = cur
    return prev


def max_amplitude(basis: PulseBasis, A, samples: int = 4001) -> float:
    t = np.linspace(0.0, basis.gate_time, samples)
    return float(np.max(np.abs(basis.evaluate(A, t))))


@dataclass(frozen=True)
class PulseSpec:
    """A basis together with a concrete parameter vector."""

    basis: PulseBasis
    params: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "params", self.basis._check(self.params))

    def __call__(self, t):
        return self.basis.evaluate(self.params, t)
