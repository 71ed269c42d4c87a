"""Small dense matrix algebra for Hermitian generators and unitaries.

All functions accept plain ``numpy`` arrays. Generators follow the
convention ``U = exp(-i s H)`` with hbar = 1.
"""
from __future__ import annotations

import numpy as np
from scipy import linalg

from .errors import BranchAmbiguity, ContractViolation, DimensionMismatch

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"i": I2, "x": SX, "y": SY, "z": SZ}

# Norm used by every susceptibility; "fro" or "spectral".
NORM_KIND = "fro"

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10


def dagger(M: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(M, -1, -2))


def is_hermitian(H: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    H = np.asarray(H)
    if H.ndim < 2 or H.shape[-1] != H.shape[-2]:
        return False
    return bool(np.all(np.abs(H - dagger(H)) <= tol))


def is_unitary(U: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    U = np.asarray(U)
    d = U.shape[-1]
    err = np.linalg.norm(dagger(U) @ U - np.eye(d), axis=(-2, -1))
    return bool(np.all(err <= tol * d))


def _check_same_dim(A: np.ndarray, B: np.ndarray) -> None:
    if A.shape[-2:] != B.shape[-2:]:
        raise DimensionMismatch(f"dimension mismatch: {A.shape[-2:]} vs {B.shape[-2:]}")


def expm_hermitian(H: np.ndarray, s: float | np.ndarray = 1.0) -> np.ndarray:
    """Batched ``exp(-i s H)`` for Hermitian ``H`` of shape (..., d, d).

    No Hermiticity check; ``s`` broadcasts against the batch shape.
    """
    w, Q = np.linalg.eigh(H)
    s = np.asarray(s, dtype=float)[..., None]
    phase = np.exp(-1j * s * w)
    return (Q * phase[..., None, :]) @ dagger(Q)


def mat_exp(H: np.ndarray, s: float = 1.0) -> np.ndarray:
    """Return ``exp(-i s H)`` for a Hermitian matrix ``H``."""
    H = np.asarray(H, dtype=complex)
    if not is_hermitian(H):
        raise ContractViolation("mat_exp requires a Hermitian generator")
    return expm_hermitian(H, s)


def exp_frechet_hermitian(H: np.ndarray, D: np.ndarray, s: float = 1.0):
    """Directional derivative of ``exp(-i s H)`` along Hermitian ``D``.

    Works on batches: ``H`` has shape (..., d, d) and ``D`` broadcasts
    against it. Uses the divided-difference formula in the eigenbasis of
    ``H``, which is exact for normal generators. Returns ``(E, L)`` with
    ``E = exp(-i s H)`` and ``L = d/de exp(-i s (H + e D)) |_{e=0}``.
    """
    w, Q = np.linalg.eigh(H)
    x = -1j * s * w
    ex = np.exp(x)
    Qh = dagger(Q)
    E = (Q * ex[..., None, :]) @ Qh
    z = x[..., :, None] - x[..., None, :]
    small = np.abs(z) < 1e-12
    zsafe = np.where(small, 1.0, z)
    ratio = np.where(small, 1.0 + 0.5 * z, np.expm1(zsafe) / zsafe)
    phi = ex[..., None, :] * ratio
    Dt = Qh @ (-1j * s * D) @ Q
    L = Q @ (phi * Dt) @ Qh
    return E, L


def _unitary_eig(U: np.ndarray):
    """Eigenphases ``p`` (U = Q diag(exp(-i p)) Q^H) with unitary ``Q``."""
    T, Q = linalg.schur(U, output="complex")
    lam = np.diag(T)
    p = -np.angle(lam)
    # principal branch (-pi, pi] for p, i.e. eigenvalue arguments in [-pi, pi)
    p = np.where(p <= -np.pi, p + 2 * np.pi, p)
    return p, Q


def _clusters(lam: np.ndarray, tol: float):
    n = len(lam)
    seen = np.zeros(n, bool)
    groups = []
    for a in range(n):
        if seen[a]:
            continue
        g = [b for b in range(n) if not seen[b] and abs(lam[a] - lam[b]) < tol]
        for b in g:
            seen[b] = True
        groups.append(g)
    return groups


def unitary_log_decomposition(U: np.ndarray, branch_hint: np.ndarray | None = None,
                              degeneracy_tol: float = 1e-8):
    """Return ``(phases, Q)`` with ``U = Q diag(exp(-i phases)) Q^H``.

    Without a hint the phases are principal in (-pi, pi]. With a hint,
    each phase gets the ``2 pi`` shift that best matches the hint's
    diagonal in the eigenbasis; degenerate eigenspaces are first rotated
    to diagonalise the hint.
    """
    U = np.asarray(U, dtype=complex)
    p, Q = _unitary_eig(U)
    lam = np.exp(-1j * p)
    groups = _clusters(lam, degeneracy_tol)
    if branch_hint is None:
        for g in groups:
            if len(g) > 1 and abs(lam[g[0]] + 1) < degeneracy_tol:
                raise BranchAmbiguity(
                    "degenerate eigenphase on the branch cut; pass a branch_hint")
        return p, Q
    hint = np.asarray(branch_hint, dtype=complex)
    _check_same_dim(U, hint)
    Q = Q.copy()
    p = p.copy()
    for g in groups:
        if len(g) > 1:
            Qg = Q[:, g]
            hg = dagger(Qg) @ hint @ Qg
            _, R = np.linalg.eigh(0.5 * (hg + dagger(hg)))
            Q[:, g] = Qg @ R
            p[g] = p[g[0]]
    target = np.real(np.einsum("ia,ij,ja->a", np.conj(Q), hint, Q))
    p = p + 2 * np.pi * np.round((target - p) / (2 * np.pi))
    return p, Q


def mat_log_unitary(U: np.ndarray, branch_hint: np.ndarray | None = None) -> np.ndarray:
    """Hermitian ``eta`` with ``exp(-i eta) = U``.

    Raises ``BranchAmbiguity`` for a degenerate eigenvalue at -1 when no
    ``branch_hint`` is given.
    """
    U = np.asarray(U, dtype=complex)
    if not is_unitary(U):
        raise ContractViolation("mat_log_unitary requires a unitary matrix")
    p, Q = unitary_log_decomposition(U, branch_hint)
    eta = (Q * p) @ dagger(Q)
    return 0.5 * (eta + dagger(eta))


def pauli_project(eta: np.ndarray, sigma: np.ndarray) -> float:
    """``Re Tr(eta^H sigma)``; the trace is real for Hermitian inputs."""
    eta = np.asarray(eta)
    sigma = np.asarray(sigma)
    _check_same_dim(eta, sigma)
    return float(np.real(np.trace(dagger(eta) @ sigma)))


def frobenius_norm(M: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(M), "fro"))


def matrix_norm(M: np.ndarray, kind: str | None = None) -> float:
    kind = kind or NORM_KIND
    if kind == "fro":
        return frobenius_norm(M)
    if kind == "spectral":
        return float(np.linalg.norm(np.asarray(M), 2))
    raise ValueError(f"unknown norm kind {kind!r}")


def gate_fidelity(U: np.ndarray, V: np.ndarray) -> float:
    """Phase-insensitive overlap ``|Tr(U^H V)| / d``."""
    U = np.asarray(U)
    V = np.asarray(V)
    _check_same_dim(U, V)
    d = U.shape[-1]
    return float(abs(np.trace(dagger(U) @ V)) / d)


def gate_fidelity_batch(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    d = U.shape[-1]
    tr = np.einsum("...ij,...ij->...", np.conj(U), V)
    return np.abs(tr) / d


def commutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return A @ B - B @ A


def kron(*ops: np.ndarray) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def random_hermitian(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (X + dagger(X))


def random_unitary(d: int, rng: np.random.Generator, max_phase: float = np.pi - 0.1):
    """Haar-ish unitary with eigenphases drawn uniformly in (-max_phase, max_phase)."""
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    Q, _ = np.linalg.qr(X)
    p = rng.uniform(-max_phase, max_phase, size=d)
    return (Q * np.exp(-1j * p)) @ dagger(Q)
