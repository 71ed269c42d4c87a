"""Level-set traversal: gradient-orthogonal steps and the robustness-invariant walk.

A traversal starts from a robust beginning pulse, records the values of a
set of constraint functionals there, and then repeatedly moves the
parameters along the component of the gate-angle gradient orthogonal to
every constraint gradient, scaled so the angle advances by a fixed amount
to first order.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .dynamics import DEFAULT_NT, SystemModel
from .errors import (ContractViolation, IrregularPoint, MaxItersExceeded, NoDescent, OutOfRange,
                     StepToleranceExceeded)
from .gradients import (ScalarFunctional, evaluate_bundle, fidelity_fn, s1_fn, s2_fn, theta as theta_fn)
from .robustness import magnus_terms
from .operators import matrix_norm

log = logging.getLogger(__name__)

RANK_TOL = 1e-10


def orthonormal_basis(vectors: Sequence[np.ndarray], rank_tol: float = RANK_TOL) -> list[np.ndarray]:
    """Modified Gram-Schmidt with one re-orthogonalisation pass.

    Vectors whose residual falls below ``rank_tol`` times their original
    norm are dropped as linearly dependent.
    """
    basis: list[np.ndarray] = []
    for v in vectors:
        v = np.asarray(v, dtype=float)
        n0 = np.linalg.norm(v)
        if n0 == 0:
            continue
        r = v.copy()
        for _ in range(2):
            for q in basis:
                r -= np.dot(q, r) * q
        nr = np.linalg.norm(r)
        if nr < rank_tol * n0:
            continue
        basis.append(r / nr)
    return basis


def project_out(v: np.ndarray, basis: Sequence[np.ndarray]) -> np.ndarray:
    r = np.asarray(v, dtype=float).copy()
    for _ in range(2):
        for q in basis:
            r -= np.dot(q, r) * q
    return r


def gov_step(grad_theta, constraint_grads, dtheta: float, eps_irr: float = 1e-6,
             pre_variation=None) -> np.ndarray:
    """Parameter step orthogonal to every constraint gradient.

    The pre-variation defaults to ``grad_theta``. The step is scaled so that
    ``<dA, grad_theta> == dtheta``.
    """
    g = np.asarray(grad_theta, dtype=float)
    grads = [np.asarray(c, dtype=float) for c in constraint_grads]
    for c in grads:
        if c.shape != g.shape:
            raise ContractViolation("gradient vectors must share one length")
    pre = g if pre_variation is None else np.asarray(pre_variation, dtype=float)
    basis = orthonormal_basis(grads)
    perp = project_out(pre, basis)
    gn = np.linalg.norm(g)
    if np.linalg.norm(perp) < eps_irr * max(np.linalg.norm(pre), 1e-300) or gn == 0:
        raise IrregularPoint("angle gradient lies in the span of the constraint gradients")
    slope = float(np.dot(perp, g))
    if abs(slope) < eps_irr * np.linalg.norm(perp) * gn:
        raise IrregularPoint("pre-variation is orthogonal to the angle gradient")
    return (dtheta / slope) * perp


@dataclass
class ConstraintSet:
    functionals: list[ScalarFunctional]
    targets: np.ndarray | None = None

    def __len__(self):
        return len(self.functionals)


@dataclass
class CorrectionConfig:
    max_inner: int = 20
    angle_weight: float = 1.0
    constraint_weight: float = 1.0


@dataclass
class TraversalConfig:
    dtheta: float
    theta_range: tuple[float, float]
    max_iters: int = 100_000
    eps_irr: float = 1e-6
    step_tol: float | None = None  # defaults to 0.1 * |dtheta|
    correction: CorrectionConfig | None = None
    strict_steps: bool = True

    def __post_init__(self):
        if self.dtheta == 0:
            raise ContractViolation("dtheta must be non-zero")
        if not 0 < self.eps_irr < 1:
            raise ContractViolation("eps_irr must lie in (0, 1)")
        lo, hi = self.theta_range
        if lo > hi:
            self.theta_range = (hi, lo)
        if self.step_tol is None:
            self.step_tol = 0.1 * abs(self.dtheta)


@dataclass
class TraversalRecord:
    index: int
    theta: float
    A: list[np.ndarray]
    constraint_values: np.ndarray
    s1: dict[str, float] = field(default_factory=dict)
    s2: dict[str, float] = field(default_factory=dict)
    undesired: list[float] = field(default_factory=list)
    dtheta_measured: float = 0.0
    ortho_residual: float = 0.0

    @property
    def flat_A(self) -> np.ndarray:
        return np.concatenate(self.A)

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "theta": self.theta,
            "A": [list(map(float, a)) for a in self.A],
            "s1": self.s1,
            "s2": self.s2,
            "undesired": list(self.undesired),
            "constraints": list(map(float, self.constraint_values)),
            "dtheta_measured": self.dtheta_measured,
            "ortho_residual": self.ortho_residual,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TraversalRecord":
        return cls(index=int(d["index"]), theta=float(d["theta"]),
                   A=[np.asarray(a, dtype=float) for a in d["A"]],
                   constraint_values=np.asarray(d.get("constraints", []), dtype=float),
                   s1=dict(d.get("s1", {})), s2=dict(d.get("s2", {})),
                   undesired=list(d.get("undesired", [])),
                   dtheta_measured=float(d.get("dtheta_measured", 0.0)),
                   ortho_residual=float(d.get("ortho_residual", 0.0)))


def _noise_metrics(model: SystemModel, traj):
    s1v, s2v = {}, {}
    for i, n in enumerate(model.noises):
        M1, M2 = magnus_terms(traj, n.operator)
        key = n.label or str(i)
        s1v[key] = matrix_norm(M1)
        s2v[key] = matrix_norm(M2)
    return s1v, s2v


def _ortho_residual(dA, grads) -> float:
    nd = np.linalg.norm(dA)
    worst = 0.0
    for g in grads:
        ng = np.linalg.norm(g)
        if nd > 0 and ng > 0:
            worst = max(worst, abs(np.dot(dA, g)) / (nd * ng))
    return worst


def _single_pass(model, A0, sigma, constraints, cfg, direction, nt, undesired_axes, start_index=0):
    """Walk in one direction until the range end is passed; returns records."""
    lo, hi = cfg.theta_range
    dth = direction * abs(cfg.dtheta)
    fns = [theta_fn(sigma)] + list(constraints.functionals)
    n_c = len(constraints.functionals)
    und = [ScalarFunctional("undesired", s, f"und{i}", "log") for i, s in enumerate(undesired_axes)]
    extra = und

    A = model.flatten(A0)
    res = evaluate_bundle(fns + extra, model, A, nt)
    hint = res.eta
    records = []

    def make_record(idx, res, A, dmeas, ortho):
        s1v, s2v = _noise_metrics(model, res.traj)
        vals = res.values
        return TraversalRecord(idx, float(vals[0]), model.split(A), vals[1:1 + n_c].copy(), s1v, s2v,
                               [float(v) for v in vals[1 + n_c:]], dmeas, ortho)

    records.append(make_record(start_index, res, A, 0.0, 0.0))

    def done(th):
        return th >= hi - 1e-12 if direction > 0 else th <= lo + 1e-12

    it = 0
    while not done(records[-1].theta):
        if it >= cfg.max_iters:
            raise MaxItersExceeded(f"range not covered after {cfg.max_iters} steps", records,
                                   records[-1].index)
        grads = res.grads
        try:
            dA = gov_step(grads[0], grads[1:1 + n_c], dth, cfg.eps_irr)
        except IrregularPoint as exc:
            raise IrregularPoint(str(exc), records, records[-1].index) from None
        ortho = _ortho_residual(dA, grads[1:1 + n_c])
        A_new = A + dA
        if cfg.correction is not None:
            A_new = correcting_step(model, A_new, records[-1].theta + dth, sigma,
                                    constraints, cfg.correction, nt)
        res_new = evaluate_bundle(fns + extra, model, A_new, nt, hint=hint)
        dmeas = float(res_new.values[0] - res.values[0])
        idx = records[-1].index + 1
        rec = make_record(idx, res_new, A_new, dmeas, ortho)
        if abs(dmeas - dth) > cfg.step_tol:
            msg = f"step {idx}: measured dtheta {dmeas:.3e} vs ideal {dth:.3e}"
            if cfg.strict_steps:
                raise StepToleranceExceeded(msg, records, records[-1].index)
            log.warning(msg)
        records.append(rec)
        A, res = A_new, res_new
        if res.eta is not None:
            hint = res.eta
        it += 1
    return records


def ripv_run(model: SystemModel, A0, sigma: np.ndarray, constraints: ConstraintSet,
             cfg: TraversalConfig, nt: int = DEFAULT_NT,
             undesired_axes: Sequence[np.ndarray] = ()) -> list[TraversalRecord]:
    """Robustness-invariant traversal of the gate angle over ``cfg.theta_range``.

    Constraint targets are the beginning pulse's values. When the beginning
    angle lies inside the range two passes are made, one per direction, and
    stitched in increasing angle order. Each pass ends on the first record at
    or beyond its end of the range, so the range is always fully covered.
    """
    n = model.n_params
    m = len(constraints)
    if n < m + 2:
        raise ContractViolation(f"{m} constraints need at least {m + 2} parameters, have {n}")
    A0 = model.flatten(A0)
    start = evaluate_bundle([theta_fn(sigma)] + list(constraints.functionals), model, A0, nt,
                            derivatives=False)
    constraints.targets = start.values[1:].copy()
    theta0 = float(start.values[0])
    lo, hi = cfg.theta_range
    sign = 1 if cfg.dtheta > 0 else -1
    if theta0 <= lo + 1e-12:
        directions = [1]
    elif theta0 >= hi - 1e-12:
        directions = [-1]
    else:
        directions = [sign, -sign]
    passes = {}
    for d in directions:
        passes[d] = _single_pass(model, A0, sigma, constraints, cfg, d, nt, undesired_axes)
    if len(directions) == 1:
        recs = passes[directions[0]]
    else:
        recs = passes[-1][::-1] + passes[1][1:]
        for i, r in enumerate(recs):
            r.index = i
    return recs


def _objective_fns(model: SystemModel, w1: float, w2: float, undesired_axes=()):
    fns = []
    if w1:
        fns += [s1_fn(n.operator, f"s1_{n.label}") for n in model.noises]
    if w2:
        fns += [s2_fn(n.operator, f"s2_{n.label}") for n in model.noises]
    fns += [ScalarFunctional("undesired", s, f"und{i}", "log") for i, s in enumerate(undesired_axes)]
    return fns


@dataclass
class OptimizeResult:
    A: np.ndarray
    S1: float
    S2: float
    objective: float
    iterations: int
    success: bool
    history: list[float] = field(default_factory=list)


def optimize_beginning(model: SystemModel, A_init, weights=(1.0, 0.0), S1_target: float = 2.5,
                       max_iters: int = 5000, nt: int = DEFAULT_NT, undesired_axes=(),
                       undesired_weight: float = 1.0, S2_target: float | None = None,
                       armijo: float = 1e-4, initial_step: float = 1e-4,
                       max_step_norm: float = 0.05, method: str = "gd",
                       bounds=None, undesired_tol: float = 1e-4) -> OptimizeResult:
    """Gradient descent with Armijo backtracking on a weighted robustness cost.

    Cost: ``w1 * sum_j S1_j^2 + w2 * sum_j S2_j^2`` over every noise term of
    the model, plus ``undesired_weight * sum vartheta^2`` for any
    ``undesired_axes``. The gate angle is left free. Stops as soon as the
    worst ``S1`` is at or below ``S1_target`` (and ``S2`` at or below
    ``S2_target`` when given, and every undesired angle within
    ``undesired_tol`` of zero). The trial step grows by 2x after each accepted
    step, is capped so the parameters move by at most ``max_step_norm``,
    and halves during backtracking.

    ``method="lbfgs"`` minimises the same cost with scipy's L-BFGS-B instead,
    honouring optional per-parameter ``bounds`` (see ``amplitude_bounds``);
    ``max_iters`` then counts cost evaluations.
    """
    w1, w2 = map(float, weights)
    if w1 < 0 or w2 < 0 or (w1 == 0 and w2 == 0):
        raise ContractViolation("weights must be non-negative and not both zero")
    n_noise = len(model.noises)
    fns = _objective_fns(model, 1.0, 1.0, undesired_axes)
    n_und = len(undesired_axes)

    def cost(vals):
        s1v = vals[:n_noise]
        s2v = vals[n_noise:2 * n_noise]
        und = vals[2 * n_noise:]
        return w1 * np.sum(s1v ** 2) + w2 * np.sum(s2v ** 2) + undesired_weight * np.sum(und ** 2)

    def cost_grad(vals, grads):
        g = 2 * w1 * vals[:n_noise] @ grads[:n_noise]
        g = g + 2 * w2 * vals[n_noise:2 * n_noise] @ grads[n_noise:2 * n_noise]
        if n_und:
            g = g + 2 * undesired_weight * vals[2 * n_noise:] @ grads[2 * n_noise:]
        return g

    def met(vals):
        ok = np.max(vals[:n_noise]) <= S1_target
        if S2_target is not None:
            ok = ok and np.max(vals[n_noise:2 * n_noise]) <= S2_target
        if n_und:
            ok = ok and np.max(np.abs(vals[2 * n_noise:])) <= undesired_tol
        return bool(ok)

    if method not in ("gd", "lbfgs"):
        raise ContractViolation(f"unknown optimizer method {method!r}")
    A = model.flatten(A_init)
    if method == "lbfgs":
        return _optimize_lbfgs(model, A, fns, cost, cost_grad, met, n_noise, max_iters, nt, bounds)
    res = evaluate_bundle(fns, model, A, nt)
    hint = res.eta
    f = cost(res.values)
    history = [f]
    step = initial_step
    it = 0
    while not met(res.values) and it < max_iters:
        g = cost_grad(res.values, res.grads)
        gg = float(g @ g)
        if gg == 0:
            break
        step = min(step, max_step_norm / np.sqrt(gg))
        fails = 0
        while True:
            A_try = A - step * g
            vals_try = evaluate_bundle(fns, model, A_try, nt, hint=hint, derivatives=False).values
            f_try = cost(vals_try)
            if f_try <= f - armijo * step * gg:
                break
            step *= 0.5
            fails += 1
            if fails >= 40:
                raise NoDescent(f"line search failed at iteration {it}")
        A = A_try
        res = evaluate_bundle(fns, model, A, nt, hint=hint)
        if res.eta is not None:
            hint = res.eta
        f = cost(res.values)
        history.append(f)
        step *= 2.0
        it += 1
    vals = res.values
    return OptimizeResult(A, float(np.max(vals[:n_noise])), float(np.max(vals[n_noise:2 * n_noise])),
                          float(f), it, met(vals), history)


class _Reached(Exception):
    pass


def _optimize_lbfgs(model, A, fns, cost, cost_grad, met, n_noise, max_iters, nt, bounds):
    from scipy.optimize import minimize

    state = {"hint": None, "best": None, "history": [], "n": 0}

    def fun(x):
        res = evaluate_bundle(fns, model, x, nt, hint=state["hint"])
        if res.eta is not None:
            state["hint"] = res.eta
        f = cost(res.values)
        state["history"].append(f)
        state["n"] += 1
        if state["best"] is None or f < state["best"][0]:
            state["best"] = (f, x.copy(), res.values)
        if met(res.values):
            state["best"] = (f, x.copy(), res.values)
            raise _Reached
        return f, cost_grad(res.values, res.grads)

    try:
        minimize(fun, A, jac=True, method="L-BFGS-B", bounds=bounds,
                 options={"maxfun": max_iters, "maxiter": max_iters})
    except _Reached:
        pass
    f, x, vals = state["best"]
    return OptimizeResult(x, float(np.max(vals[:n_noise])), float(np.max(vals[n_noise:2 * n_noise])),
                          float(f), state["n"], met(vals), state["history"])


def amplitude_bounds(model: SystemModel, amax: float) -> list:
    """Box ``|a| <= amax`` on amplitude coefficients; phase parameters stay free."""
    from .pulses import WindowedFourier

    out = []
    for c in model.controls:
        b = c.basis
        if isinstance(b, WindowedFourier) and b.form == "phase":
            out += [(-amax, amax)] * (b.n_harmonics + 1) + [(None, None)] * b.n_harmonics
        else:
            out += [(-amax, amax)] * b.n_params
    return out


def target_gate(sigma: np.ndarray, theta: float) -> np.ndarray:
    """Rotation ``exp(-i theta sigma / Tr(sigma^H sigma))`` whose extracted angle is ``theta``."""
    sigma = np.asarray(sigma, dtype=complex)
    w, Q = np.linalg.eigh(sigma)
    scale = theta / float(np.real(np.trace(sigma.conj().T @ sigma)))
    return (Q * np.exp(-1j * scale * w)) @ Q.conj().T


def _correction_residual(model, A, gate, constraints, cc, nt, derivatives=True):
    fns = [fidelity_fn(gate)] + list(constraints.functionals)
    res = evaluate_bundle(fns, model, A, nt, derivatives=derivatives)
    infid = 1.0 - res.values[0]
    dc = res.values[1:] - constraints.targets
    r = cc.angle_weight * infid ** 2 + cc.constraint_weight * float(dc @ dc)
    if not derivatives:
        return r, None
    g = -2 * cc.angle_weight * infid * res.grads[0] + 2 * cc.constraint_weight * dc @ res.grads[1:]
    return r, g


def correcting_step(model: SystemModel, A, theta_target: float, sigma, constraints: ConstraintSet,
                    cc: CorrectionConfig | None = None, nt: int = DEFAULT_NT) -> np.ndarray:
    """Pull ``A`` back towards the level set at angle ``theta_target``.

    Backtracking gradient descent on
    ``w_a (1 - F(U(T), G(theta_target)))^2 + w_c sum_i (R_i - R_i*)^2``.
    Never returns a point with a larger residual than the input.
    """
    cc = cc or CorrectionConfig()
    gate = target_gate(sigma, theta_target)
    A = np.asarray(A, dtype=float).copy()
    r, g = _correction_residual(model, A, gate, constraints, cc, nt)
    step = r / max(float(g @ g), 1e-300)
    for _ in range(cc.max_inner):
        gg = float(g @ g)
        if r == 0 or gg == 0:
            break
        for _ in range(40):
            A_try = A - step * g
            r_try, _ = _correction_residual(model, A_try, gate, constraints, cc, nt, derivatives=False)
            if r_try <= r - 1e-4 * step * gg:
                break
            step *= 0.5
        else:
            break
        A = A_try
        r, g = _correction_residual(model, A, gate, constraints, cc, nt)
        step *= 2.0
    return A


def correction_residual(model, A, theta_target, sigma, constraints, cc=None, nt=DEFAULT_NT) -> float:
    cc = cc or CorrectionConfig()
    return _correction_residual(model, np.asarray(A, float), target_gate(sigma, theta_target),
                                constraints, cc, nt, derivatives=False)[0]


def interpolate(records: Sequence[TraversalRecord], theta_star: float) -> list[np.ndarray]:
    """Monotone piecewise-cubic interpolation of the parameters over the angle."""
    recs = sorted(records, key=lambda r: r.theta)
    th = np.array([r.theta for r in recs])
    if not th[0] - 1e-15 <= theta_star <= th[-1] + 1e-15:
        raise OutOfRange(f"theta {theta_star} outside [{th[0]}, {th[-1]}]")
    keep = np.concatenate([[True], np.diff(th) > 0])
    th = th[keep]
    A = np.stack([r.flat_A for r, k in zip(recs, keep) if k])
    hit = np.nonzero(th == theta_star)[0]
    if hit.size:
        flat = A[hit[0]]
    elif len(th) == 2:
        w = (theta_star - th[0]) / (th[1] - th[0])
        flat = (1 - w) * A[0] + w * A[1]
    else:
        flat = PchipInterpolator(th, A, axis=0)(theta_star)
    sizes = [len(a) for a in recs[0].A]
    return np.split(np.asarray(flat, dtype=float), np.cumsum(sizes)[:-1])


def theta_from_span(theta0: float, span: float, dtheta: float) -> tuple[float, float]:
    """Range covering ``span`` from ``theta0`` in the direction of ``dtheta``."""
    end = theta0 + math.copysign(abs(span), dtheta)
    return (min(theta0, end), max(theta0, end))
