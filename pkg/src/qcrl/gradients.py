"""Exact gradients of scalar functionals of a pulse through the stepped propagator.

The propagator is a product of step exponentials ``E_k``. The derivative of
each step along a control operator is the Frechet derivative of the matrix
exponential, computed from the divided differences of ``exp`` in the
eigenbasis of the step generator. Transporting these to the interaction
frame turns every ``dU(t_k)/dA_j`` into a cumulative sum, so a single
vectorised pass yields the sensitivities for all parameters and all grid
points at once.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import DEFAULT_NT, SystemModel, Trajectory, ordered_product
from .errors import BranchAmbiguity
from .operators import dagger, unitary_log_decomposition

KINDS = ("theta", "undesired", "s1", "s2", "fidelity")


@dataclass(frozen=True, eq=False)
class ScalarFunctional:
    """A real-valued function of the pulse parameters.

    ``kind`` is one of ``theta``, ``undesired`` (rotation angle on an axis),
    ``s1``/``s2`` (susceptibility to a unit noise operator) or ``fidelity``
    (overlap with a target gate). ``method`` selects how angles are
    extracted: ``"log"`` always uses the matrix logarithm, ``"area"`` the
    discrete pulse area of a commuting single-control model, and
    ``"auto"`` picks ``area`` whenever that is exact.
    """

    kind: str
    operator: np.ndarray
    label: str = ""
    method: str = "auto"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown functional kind {self.kind!r}")
        object.__setattr__(self, "operator", np.asarray(self.operator, dtype=complex))

    @property
    def is_angle(self) -> bool:
        return self.kind in ("theta", "undesired")


def theta(sigma, label="theta", method="auto"):
    return ScalarFunctional("theta", sigma, label, method)


def undesired(sigma, label="vartheta", method="log"):
    return ScalarFunctional("undesired", sigma, label, method)


def s1_fn(noise_op, label="s1"):
    return ScalarFunctional("s1", noise_op, label)


def s2_fn(noise_op, label="s2"):
    return ScalarFunctional("s2", noise_op, label)


def fidelity_fn(gate, label="fidelity"):
    return ScalarFunctional("fidelity", gate, label)


@dataclass
class Sensitivity:
    """Trajectory plus first-order parameter sensitivities.

    ``K[k, j] = V_k^H dV_k/dA_j`` (anti-Hermitian) at every midpoint and
    ``dU_final[j] = dU(T)/dA_j``.
    """

    traj: Trajectory
    K: np.ndarray | None
    dU_final: np.ndarray | None


def _divided_exp(x: np.ndarray) -> np.ndarray:
    """Divided differences ``(e^{x_a} - e^{x_b}) / (x_a - x_b)`` over the last axis."""
    ex = np.exp(x)
    z = x[..., :, None] - x[..., None, :]
    small = np.abs(z) < 1e-12
    zsafe = np.where(small, 1.0, z)
    ratio = np.where(small, 1.0 + 0.5 * z, np.expm1(zsafe) / zsafe)
    return ex[..., None, :] * ratio


def sensitivity(model: SystemModel, A, nt: int = DEFAULT_NT, derivatives: bool = True) -> Sensitivity:
    parts = model.split(A)
    grid, mid, dt = model.time_grid(nt)
    H = model.hamiltonians(parts, mid)
    w, Q = np.linalg.eigh(H)
    Qh = dagger(Q)
    E = (Q * np.exp(-1j * dt * w)[:, None, :]) @ Qh
    F = (Q * np.exp(-0.5j * dt * w)[:, None, :]) @ Qh
    U = ordered_product(E)
    V = F @ U[:-1]
    traj = Trajectory(grid=grid, U=U, U_mid=V, H_mid=H, dt=dt, params=tuple(parts))
    if not derivatives:
        return Sensitivity(traj, None, None)

    g = np.concatenate([c.basis.gradient(a, mid) for c, a in zip(model.controls, parts)], axis=1)
    cidx = np.repeat(np.arange(len(model.controls)), model.param_sizes)
    ops = np.stack([c.operator for c in model.controls])           # (nc, d, d)
    D = Qh[:, None] @ ops[None] @ Q[:, None]                         # (nt, nc, d, d)
    phi_full = _divided_exp(-1j * dt * w)[:, None]
    phi_half = _divided_exp(-0.5j * dt * w)[:, None]
    L_full = Q[:, None] @ (phi_full * (-1j * dt) * D) @ Qh[:, None]
    L_half = Q[:, None] @ (phi_half * (-0.5j * dt) * D) @ Qh[:, None]

    Uh = dagger(U)
    G = Uh[1:, None] @ L_full @ U[:-1, None]                         # (nt, nc, d, d)
    Gp = g[:, :, None, None] * G[:, cidx]                           # (nt, p, d, d)
    S = np.zeros((nt + 1,) + Gp.shape[1:], dtype=complex)
    np.cumsum(Gp, axis=0, out=S[1:])
    Hh = dagger(V)[:, None] @ L_half @ U[:-1, None]                 # (nt, nc, d, d)
    K = g[:, :, None, None] * Hh[:, cidx] + S[:-1]
    dU_final = U[-1] @ S[-1]
    return Sensitivity(traj, K, dU_final)


def _comm(A, B):
    return A @ B - B @ A


def _excl_cumsum(X: np.ndarray) -> np.ndarray:
    out = np.zeros_like(X)
    np.cumsum(X[:-1], axis=0, out=out[1:])
    return out


def _norm_and_grad(M, dM):
    val = float(np.linalg.norm(M))
    if dM is None:
        return val, None
    if val == 0.0:
        return val, np.zeros(dM.shape[0])
    grad = np.real(np.einsum("ij,pij->p", np.conj(M), dM)) / val
    return val, grad


def magnus_terms(traj: Trajectory, H_n0: np.ndarray):
    """First and second Magnus terms ``(M1, M2)`` of the unit-noise error evolution."""
    V = traj.U_mid
    Ht = dagger(V) @ np.asarray(H_n0, dtype=complex) @ V
    dt = traj.dt
    M1 = dt * Ht.sum(axis=0)
    C = dt * _excl_cumsum(Ht)
    M2 = dt * _comm(Ht, C).sum(axis=0)
    return M1, M2


def _angle_pieces(U_T, hint):
    p, Q = unitary_log_decomposition(U_T, hint)
    eta = (Q * p) @ dagger(Q)
    return p, Q, 0.5 * (eta + dagger(eta))


@dataclass
class BundleResult:
    values: np.ndarray
    grads: np.ndarray | None
    eta: np.ndarray | None
    traj: Trajectory


def _use_area(fn: ScalarFunctional, model: SystemModel) -> bool:
    if fn.method == "area":
        return True
    return fn.method == "auto" and model.is_single_commuting()


def evaluate_bundle(fns: Sequence[ScalarFunctional], model: SystemModel, A, nt: int = DEFAULT_NT,
                    hint=None, derivatives: bool = True) -> BundleResult:
    """Values (and gradients) of several functionals from one sensitivity pass.

    ``hint`` is the generator from a previous evaluation; it fixes the
    logarithm branch for the angle functionals.
    """
    sens = sensitivity(model, A, nt, derivatives)
    traj = sens.traj
    V, dt, K = traj.U_mid, traj.dt, sens.K
    p_total = model.n_params
    values = np.empty(len(fns))
    grads = np.empty((len(fns), p_total)) if derivatives else None
    log_needed = any(f.is_angle and not _use_area(f, model) for f in fns)
    eta = None
    Y = None
    if log_needed:
        p, Q, eta = _angle_pieces(traj.final, hint)
        if derivatives:
            phi = _divided_exp(-1j * p)
            if np.min(np.abs(phi)) < 1e-10:
                raise BranchAmbiguity("angle derivative is singular at this propagator")
            X = dagger(Q) @ sens.dU_final @ Q
            Y = Q @ (1j * X / phi) @ dagger(Q)                      # d eta / dA_j
    cache = {}
    for i, fn in enumerate(fns):
        op = fn.operator
        if fn.is_angle and _use_area(fn, model):
            c = model.controls[0]
            _, mid, _ = model.time_grid(nt)
            a = traj.params[0]
            w = float(np.real(np.trace(dagger(c.operator) @ op)))
            drift = float(np.real(np.trace(dagger(model.gate_time * model.drift) @ op)))
            values[i] = w * dt * np.sum(c.basis.evaluate(a, mid)) + drift
            if derivatives:
                grads[i] = w * dt * c.basis.gradient(a, mid).sum(axis=0)
        elif fn.is_angle:
            values[i] = float(np.real(np.trace(dagger(eta) @ op)))
            if derivatives:
                grads[i] = np.real(np.einsum("pij,ji->p", Y, op))
        elif fn.kind in ("s1", "s2"):
            key = op.tobytes()
            if key not in cache:
                Ht = dagger(V) @ op @ V
                dHt = _comm(Ht[:, None], K) if derivatives else None
                cache[key] = (Ht, dHt)
            Ht, dHt = cache[key]
            if fn.kind == "s1":
                M = dt * Ht.sum(axis=0)
                dM = dt * dHt.sum(axis=0) if derivatives else None
            else:
                C = dt * _excl_cumsum(Ht)
                M = dt * _comm(Ht, C).sum(axis=0)
                dM = None
                if derivatives:
                    dC = dt * _excl_cumsum(dHt)
                    dM = dt * (_comm(dHt, C[:, None]) + _comm(Ht[:, None], dC)).sum(axis=0)
            values[i], gr = _norm_and_grad(M, dM)
            if derivatives:
                grads[i] = gr
        else:  # fidelity
            d = model.dim
            z = np.trace(dagger(op) @ traj.final)
            values[i] = abs(z) / d
            if derivatives:
                dz = np.einsum("ij,pij->p", np.conj(op), sens.dU_final)
                grads[i] = 0.0 if z == 0 else np.real(np.conj(z) * dz) / (abs(z) * d)
    return BundleResult(values, grads, eta, traj)


def grad_bundle(fns: Sequence[ScalarFunctional], model: SystemModel, A, nt: int = DEFAULT_NT,
                hint=None) -> np.ndarray:
    """Gradient matrix, row ``i`` is the gradient of ``fns[i]``."""
    return evaluate_bundle(fns, model, A, nt, hint).grads


def grad(fn: ScalarFunctional, model: SystemModel, A, nt: int = DEFAULT_NT, hint=None) -> np.ndarray:
    return grad_bundle([fn], model, A, nt, hint)[0]


def evaluate(fns: Sequence[ScalarFunctional], model: SystemModel, A, nt: int = DEFAULT_NT,
             hint=None) -> np.ndarray:
    return evaluate_bundle(fns, model, A, nt, hint, derivatives=False).values


def richardson_gradient(f, A, h: float = 1e-5) -> np.ndarray:
    """Central differences at ``h`` and ``h/2`` combined to fourth order."""
    A = np.asarray(A, dtype=float)
    out = np.empty(A.size)
    for j in range(A.size):
        e = np.zeros_like(A)
        e[j] = 1.0
        d1 = (f(A + h * e) - f(A - h * e)) / (2 * h)
        d2 = (f(A + 0.5 * h * e) - f(A - 0.5 * h * e)) / h
        out[j] = (4 * d2 - d1) / 3
    return out
