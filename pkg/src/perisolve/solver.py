"""Periodic solutions by shooting, Newton iteration and homotopy continuation.

States are ``y = (z, w, z', w')``. Integrators accept a batch of states with
shape ``(4, m)`` so the finite-difference Jacobian columns are integrated
together on the step sequence chosen for the first column; this keeps the
flow map smooth in the initial state.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .bounds import BoundQuadruple
from .homotopy import (AuxiliarySystem, RBounds, aux_rhs, claim2_bounds, compute_r,
                       verify_apriori)
from .system import CoupledSystem


class IntegrationError(RuntimeError):
    pass


class NewtonError(RuntimeError):
    def __init__(self, message, state=None, residual=None, iterations=0):
        super().__init__(message)
        self.state = state
        self.residual = residual
        self.iterations = iterations


class SingularJacobianError(NewtonError):
    pass


class StatePoint(NamedTuple):
    z: float
    w: float
    zp: float
    wp: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)

    @classmethod
    def from_array(cls, a) -> "StatePoint":
        a = np.asarray(a, dtype=float).reshape(4)
        if not np.all(np.isfinite(a)):
            raise ValueError(f"state must be finite, got {a}")
        return cls(*map(float, a))


# --- fields ----------------------------------------------------------------


def make_field(obj) -> Callable:
    """First-order field ``rhs(t, y)`` for a system, auxiliary system or callable."""
    if isinstance(obj, AuxiliarySystem):
        aux = obj

        def rhs(t, y):
            out = np.empty_like(y)
            out[0], out[1] = y[2], y[3]
            out[2], out[3] = aux_rhs(aux, t, y[0], y[1], y[2], y[3])
            return out

        return rhs
    if isinstance(obj, CoupledSystem):
        f, g = obj.f, obj.g

        def rhs(t, y):
            out = np.empty_like(y)
            out[0], out[1] = y[2], y[3]
            out[2] = f(t, y[0], y[1], y[2], y[3])
            out[3] = g(t, y[0], y[1], y[2], y[3])
            return out

        return rhs
    if callable(obj):
        return obj
    raise TypeError(f"cannot build a field from {type(obj).__name__}")


def period_of(obj, default=None):
    return getattr(obj, "period_T", default)


# --- integrators -----------------------------------------------------------

_METHODS = {"rk4": "rk4", "rk4_fixed": "rk4", "rk45": "rk45", "rk45_adaptive": "rk45"}


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk45"
    h: float | None = None  # rk4 step; overridden by n_steps
    n_steps: int | None = None
    atol: float = 1e-10
    rtol: float = 1e-8
    max_steps: int = 1_000_000
    h_min: float = 1e-13

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {sorted(_METHODS)}")
        object.__setattr__(self, "method", _METHODS[self.method])
        if self.atol <= 0 or self.rtol < 0:
            raise ValueError("tolerances must be positive")
        if self.h is not None and not self.h > 0:
            raise ValueError("h must be positive")
        if self.n_steps is not None and self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")

    def steps_for(self, span: float) -> int:
        if self.n_steps is not None:
            return self.n_steps
        h = self.h if self.h is not None else 1e-3
        return max(1, math.ceil(span / h - 1e-9))


def _check_finite(t, y):
    if not np.all(np.isfinite(y)):
        raise IntegrationError(f"non-finite state or field value at t={t:.6g}")


def _rk4(rhs, y0, t0, t1, n, keep):
    h = (t1 - t0) / n
    ts = t0 + (t1 - t0) * np.arange(n + 1) / n
    ts[-1] = t1
    y = y0.copy()
    ys = [y] if keep else None
    ks = [] if keep else None
    for i in range(n):
        t = ts[i]
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + (0.5 * h) * k1)
        k3 = rhs(t + 0.5 * h, y + (0.5 * h) * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if keep:
            ks.append(k1)
            ys.append(y)
        if not np.all(np.isfinite(y)):
            _check_finite(ts[i + 1], y)
    if keep:
        ks.append(rhs(t1, y))
        return ts, np.array(ys), np.array(ks), {"steps": n, "h": h}
    return None, y, None, {"steps": n, "h": h}


# Dormand-Prince 5(4)
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def _dp45(rhs, y0, t0, t1, cfg: IntegratorConfig, keep):
    span = t1 - t0
    t, y = t0, y0.copy()
    k1 = rhs(t, y)
    _check_finite(t, k1)
    # initial step from the local scale of the solution and field
    sc = cfg.atol + cfg.rtol * np.abs(y[:, 0])
    d0 = np.max(np.abs(y[:, 0]) / sc)
    d1 = np.max(np.abs(k1[:, 0]) / sc)
    h = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6
    h = min(h, span)
    ts, ys, ks = ([t], [y], [k1]) if keep else (None, None, None)
    accepted = rejected = 0
    max_err = 0.0
    while t < t1:
        if accepted + rejected > cfg.max_steps:
            raise IntegrationError(f"too many steps (>{cfg.max_steps}) before t={t1}")
        last = t + h >= t1 - 1e-14 * max(1.0, abs(t1))
        if last:
            h = t1 - t
        k = [k1]
        for s in range(1, 7):
            acc = y + h * sum(a * kk for a, kk in zip(_A[s], k) if a != 0.0)
            k.append(rhs(t + _C[s] * h, acc))
        y_new = acc  # stage 7 argument is the 5th-order solution
        err = h * sum(e * kk for e, kk in zip(_E, k) if e != 0.0)
        # step control follows the first batch column only
        scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y[:, 0]), np.abs(y_new[:, 0]))
        en = float(np.max(np.abs(err[:, 0]) / scale))
        if not math.isfinite(en) or not np.all(np.isfinite(y_new)):
            en = math.inf
        if en <= 1.0:
            t = t1 if last else t + h
            y, k1 = y_new, k[6]
            accepted += 1
            max_err = max(max_err, en)
            if keep:
                ts.append(t)
                ys.append(y)
                ks.append(k1)
            fac = 5.0 if en == 0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
        else:
            rejected += 1
            fac = 0.2 if not math.isfinite(en) else max(0.2, 0.9 * en ** -0.2)
        h *= fac
        if t < t1 and h < cfg.h_min * max(1.0, abs(t)):
            raise IntegrationError(f"step size underflow at t={t:.6g} (stiff or singular field)")
    info = {"steps": accepted, "rejected": rejected, "max_error_ratio": max_err}
    if keep:
        return np.array(ts), np.array(ys), np.array(ks), info
    return None, y, None, info


def _integrate(rhs, y0, t0, t1, cfg: IntegratorConfig, keep=True):
    y0 = np.asarray(y0, dtype=float)
    if y0.ndim == 1:
        y0 = y0[:, None]
    if not np.all(np.isfinite(y0)):
        raise IntegrationError("initial state is not finite")
    with np.errstate(all="ignore"):
        if cfg.method == "rk4":
            return _rk4(rhs, y0, t0, t1, cfg.steps_for(t1 - t0), keep)
        return _dp45(rhs, y0, t0, t1, cfg, keep)


def flow(field_obj, Y0, T: float, cfg: IntegratorConfig | None = None, t0: float = 0.0) -> np.ndarray:
    """States at ``t0 + T`` for a batch of initial states (shape ``(4, m)``)."""
    rhs = make_field(field_obj)
    _, y, _, _ = _integrate(rhs, Y0, t0, t0 + T, cfg or IntegratorConfig(), keep=False)
    return y


# --- trajectories ----------------------------------------------------------


@dataclass
class Trajectory:
    """Samples of ``(z, w, z', w')`` with their time derivatives."""

    t: np.ndarray
    y: np.ndarray  # (n, 4)
    dy: np.ndarray  # (n, 4)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.dy = np.asarray(self.dy, dtype=float)
        if self.t.ndim != 1 or len(self.t) < 2 or np.any(np.diff(self.t) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        self._spline = None

    z = property(lambda self: self.y[:, 0])
    w = property(lambda self: self.y[:, 1])
    zp = property(lambda self: self.y[:, 2])
    wp = property(lambda self: self.y[:, 3])
    zpp = property(lambda self: self.dy[:, 2])
    wpp = property(lambda self: self.dy[:, 3])

    @property
    def T(self) -> float:
        return float(self.t[-1] - self.t[0])

    @property
    def samples(self) -> list:
        return [(float(ti), StatePoint(*map(float, yi))) for ti, yi in zip(self.t, self.y)]

    @property
    def initial_state(self) -> StatePoint:
        return StatePoint.from_array(self.y[0])

    @property
    def periodic_residual(self) -> float:
        return float(np.max(np.abs(self.y[-1] - self.y[0])))

    def at(self, t):
        """Cubic Hermite interpolation of the state at ``t``."""
        if self._spline is None:
            self._spline = CubicHermiteSpline(self.t, self.y, self.dy, axis=0)
        return self._spline(t)

    def resample(self, n: int) -> "Trajectory":
        t = np.linspace(self.t[0], self.t[-1], n)
        y = self.at(t)
        dy = CubicHermiteSpline(self.t, self.dy, np.gradient(self.dy, self.t, axis=0), axis=0)(t)
        dy[:, :2] = y[:, 2:]
        return Trajectory(t, y, dy, dict(self.diagnostics, resampled_from=len(self.t)))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "z", "w", "zp", "wp"])
            for ti, row in zip(self.t, self.y):
                w.writerow([repr(float(ti))] + [repr(float(v)) for v in row])


def _trajectory(ts, ys, ks, info) -> Trajectory:
    return Trajectory(ts, ys[:, :, 0], ks[:, :, 0], dict(info))


def integrate_ivp(field_obj, s0, T: float, cfg: IntegratorConfig | None = None) -> Trajectory:
    """Integrate from ``s0`` over ``[0, T]``."""
    if not T > 0:
        raise ValueError("T must be positive")
    cfg = cfg or IntegratorConfig()
    rhs = make_field(field_obj)
    y0 = s0.as_array() if isinstance(s0, StatePoint) else np.asarray(s0, dtype=float)
    ts, ys, ks, info = _integrate(rhs, y0, 0.0, T, cfg)
    info["method"] = cfg.method
    return _trajectory(ts, ys, ks, info)


# --- shooting --------------------------------------------------------------


@dataclass(frozen=True)
class NewtonConfig:
    max_iter: int = 50
    residual_tol: float = 1e-10
    fd_eps: float = 1e-7
    cond_max: float = 1e12
    min_damping: float = 2.0**-10

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not (self.residual_tol > 0 and self.fd_eps > 0):
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class ShootingProblem:
    field: object
    T: float | None = None
    integrator: IntegratorConfig = IntegratorConfig()
    newton: NewtonConfig = NewtonConfig()
    segments: int = 1

    def __post_init__(self):
        T = self.T if self.T is not None else period_of(self.field)
        if T is None or not T > 0:
            raise ValueError("a positive period is required")
        object.__setattr__(self, "T", float(T))
        if self.segments < 1:
            raise ValueError("segments must be >= 1")

    def rhs(self):
        return make_field(self.field)


def shoot_residual(prob: ShootingProblem, s0) -> np.ndarray:
    """``state(T) - s0`` for the single-shooting map."""
    y0 = np.asarray(s0, dtype=float).reshape(4)
    yT = flow(prob.field, y0[:, None], prob.T, prob.integrator)[:, 0]
    return yT - y0


class _SingleShooting:
    def __init__(self, prob: ShootingProblem):
        self.prob = prob
        self.rhs = prob.rhs()

    def residual(self, x):
        _, y, _, _ = _integrate(self.rhs, x[:, None], 0.0, self.prob.T, self.prob.integrator, keep=False)
        return y[:, 0] - x

    def jacobian(self, x, eps):
        hs = eps * np.maximum(1.0, np.abs(x))
        Y0 = np.repeat(x[:, None], 5, axis=1)
        Y0[np.arange(4), np.arange(1, 5)] += hs
        _, Y, _, _ = _integrate(self.rhs, Y0, 0.0, self.prob.T, self.prob.integrator, keep=False)
        return (Y[:, 1:] - Y[:, :1]) / hs[None, :] - np.eye(4)

    def initial(self, s0):
        return np.asarray(s0, dtype=float).reshape(4)

    def state(self, x):
        return x


class _MultipleShooting:
    def __init__(self, prob: ShootingProblem):
        self.prob = prob
        self.rhs = prob.rhs()
        self.m = prob.segments
        self.nodes = np.linspace(0.0, prob.T, self.m + 1)

    def _segment(self, k, Y0):
        _, y, _, _ = _integrate(self.rhs, Y0, self.nodes[k], self.nodes[k + 1], self.prob.integrator, keep=False)
        return y

    def residual(self, x):
        S = x.reshape(self.m, 4)
        out = np.empty_like(S)
        for k in range(self.m):
            out[k] = self._segment(k, S[k][:, None])[:, 0] - S[(k + 1) % self.m]
        return out.ravel()

    def jacobian(self, x, eps):
        m = self.m
        S = x.reshape(m, 4)
        J = np.zeros((4 * m, 4 * m))
        for k in range(m):
            hs = eps * np.maximum(1.0, np.abs(S[k]))
            Y0 = np.repeat(S[k][:, None], 5, axis=1)
            Y0[np.arange(4), np.arange(1, 5)] += hs
            Y = self._segment(k, Y0)
            J[4 * k:4 * k + 4, 4 * k:4 * k + 4] = (Y[:, 1:] - Y[:, :1]) / hs[None, :]
            nxt = (k + 1) % m
            J[4 * k:4 * k + 4, 4 * nxt:4 * nxt + 4] -= np.eye(4)
        return J

    def initial(self, s0):
        s0 = np.asarray(s0, dtype=float).reshape(4)
        S = [s0]
        for k in range(self.m - 1):
            try:
                S.append(self._segment(k, S[-1][:, None])[:, 0])
            except IntegrationError:
                S.append(s0)
        return np.concatenate(S)

    def state(self, x):
        return x[:4]


def _condition(J, fd_eps):
    """Condition estimate of a finite-difference Jacobian.

    Singular values under the difference-quotient noise floor count as zero,
    so an exactly degenerate map is not hidden by rounding noise.
    """
    sv = np.linalg.svd(J, compute_uv=False)
    if not np.all(np.isfinite(sv)):
        return math.inf
    scale = max(sv[0], 1.0)
    floor = 10.0 * np.finfo(float).eps / fd_eps * scale
    if sv[-1] <= floor:
        return math.inf
    return scale / sv[-1]


def _newton(solver, x, cfg: NewtonConfig):
    def safe_residual(v):
        try:
            r = solver.residual(v)
        except IntegrationError:
            return None
        return r if np.all(np.isfinite(r)) else None

    R = safe_residual(x)
    if R is None:
        raise NewtonError("integration failed at the initial guess", x, None, 0)
    norm = float(np.max(np.abs(R)))
    history = [norm]
    it = 0
    while norm > cfg.residual_tol:
        if it >= cfg.max_iter:
            raise NewtonError(f"no convergence in {cfg.max_iter} iterations (residual {norm:.3g})",
                              x, norm, it)
        it += 1
        try:
            J = solver.jacobian(x, cfg.fd_eps)
        except IntegrationError as exc:
            raise NewtonError(f"integration failed while building the Jacobian: {exc}", x, norm, it)
        cond = _condition(J, cfg.fd_eps)
        if not cond < cfg.cond_max:
            raise SingularJacobianError(f"singular shooting Jacobian (condition {cond:.3g})", x, norm, it)
        dx = np.linalg.solve(J, -R)
        a = 1.0
        while True:
            trial = x + a * dx
            Rt = safe_residual(trial)
            if Rt is not None:
                nt = float(np.max(np.abs(Rt)))
                if nt < norm or nt <= cfg.residual_tol:
                    break
            a *= 0.5
            if a < cfg.min_damping:
                raise NewtonError(f"line search failed (residual {norm:.3g})", x, norm, it)
        x, R, norm = trial, Rt, nt
        history.append(norm)
    return x, norm, it, history


def newton_solve(prob: ShootingProblem, s0_guess) -> tuple[StatePoint, Trajectory]:
    """Periodic initial state by damped Newton on the shooting residual."""
    guess = np.asarray(s0_guess, dtype=float).reshape(4)
    if not np.all(np.isfinite(guess)):
        raise ValueError("initial guess must be finite")
    solver = _MultipleShooting(prob) if prob.segments > 1 else _SingleShooting(prob)
    x, norm, it, history = _newton(solver, solver.initial(guess), prob.newton)
    s = solver.state(x)
    traj = _periodic_trajectory(prob, solver, x)
    traj.diagnostics.update(iterations=it, residual=norm, residual_history=history,
                            segments=prob.segments)
    return StatePoint.from_array(s), traj


def _periodic_trajectory(prob, solver, x) -> Trajectory:
    rhs = solver.rhs
    if isinstance(solver, _SingleShooting):
        ts, ys, ks, info = _integrate(rhs, x[:, None], 0.0, prob.T, prob.integrator)
        return _trajectory(ts, ys, ks, info)
    parts_t, parts_y, parts_k = [], [], []
    S = x.reshape(solver.m, 4)
    for k in range(solver.m):
        ts, ys, ks, _ = _integrate(rhs, S[k][:, None], solver.nodes[k], solver.nodes[k + 1], prob.integrator)
        sl = slice(0 if k == 0 else 1, None)
        parts_t.append(ts[sl])
        parts_y.append(ys[sl, :, 0])
        parts_k.append(ks[sl, :, 0])
    return Trajectory(np.concatenate(parts_t), np.concatenate(parts_y), np.concatenate(parts_k))


# --- continuation ----------------------------------------------------------


@dataclass(frozen=True)
class ContinuationSchedule:
    path: tuple = ()
    min_step: float = 1.0 / 64

    def __post_init__(self):
        path = tuple((float(a), float(b)) for a, b in (self.path or default_path()))
        if path[0] != (0.0, 0.0):
            raise ValueError("continuation must start at (0, 0)")
        for (a0, b0), (a1, b1) in zip(path, path[1:]):
            if a1 < a0 or b1 < b0:
                raise ValueError("continuation path must be non-decreasing in both parameters")
        for a, b in path:
            if not (0 <= a <= 1 and 0 <= b <= 1):
                raise ValueError("continuation parameters must lie in [0, 1]")
        object.__setattr__(self, "path", path)

    @classmethod
    def diagonal(cls, n_steps: int = 11, min_step: float = 1.0 / 64) -> "ContinuationSchedule":
        return cls(default_path(n_steps), min_step)

    @property
    def reaches_original(self) -> bool:
        return self.path[-1] == (1.0, 1.0)


def default_path(n_steps: int = 11) -> tuple:
    """``n_steps`` equal steps along the diagonal from (0, 0) to (1, 1)."""
    if n_steps < 1:
        raise ValueError("need at least one continuation step")
    return tuple((k / n_steps, k / n_steps) for k in range(n_steps + 1))


@dataclass(frozen=True)
class SolverConfig:
    integrator: IntegratorConfig = IntegratorConfig()
    newton: NewtonConfig = NewtonConfig()
    n_samples: int = 8001
    polish: bool = True
    segments: int = 1
    localization_tol: float = 1e-9
    r_slack: float = 1.1


@dataclass
class LocalizationReport:
    passed: bool
    margins: dict
    witness: dict
    tol: float

    def to_dict(self) -> dict:
        return {"verdict": "PASS" if self.passed else "FAIL",
                "margins": {k: _num(v) for k, v in self.margins.items()},
                "witness": self.witness, "tol": self.tol}


def _num(v):
    return float(v) if v is not None and math.isfinite(v) else None


def localize_check(traj: Trajectory, q: BoundQuadruple, n_star=None, tol: float = 1e-9) -> LocalizationReport:
    """Strip membership of ``z, w`` and derivative bounds at every sample."""
    t = traj.t
    checks = {
        "z_lower": traj.z - np.asarray(q.alpha1_0(t), float),
        "z_upper": np.asarray(q.beta1_0(t), float) - traj.z,
        "w_lower": traj.w - np.asarray(q.alpha2_0(t), float),
        "w_upper": np.asarray(q.beta2_0(t), float) - traj.w,
    }
    if n_star is not None:
        checks["zp"] = n_star[0] - np.abs(traj.zp)
        checks["wp"] = n_star[1] - np.abs(traj.wp)
    margins, witness, ok = {}, {}, True
    for k, m in checks.items():
        i = int(np.argmin(m))
        margins[k] = float(m[i])
        if m[i] < -tol:
            ok = False
            witness[k] = {"t": float(t[i]), "margin": float(m[i])}
    return LocalizationReport(ok, margins, witness, tol)


def clamps_active(traj: Trajectory, q: BoundQuadruple, tol: float = 1e-9) -> bool:
    loc = localize_check(traj, q, None, tol)
    return not loc.passed


@dataclass
class SolveReport:
    converged: bool = False
    status: str = "FAILED"  # PASS | INCONCLUSIVE | FAILED
    lambda_mu_path: list = field(default_factory=list)
    residual: float | None = None
    initial_state: list | None = None
    iterations: list = field(default_factory=list)
    r_bounds: RBounds | None = None
    n_star: tuple | None = None
    n_star_auxiliary: tuple | None = None
    clamps_active: bool | None = None
    localization: LocalizationReport | None = None
    apriori: object = None
    last_good: tuple | None = None
    message: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "status": self.status,
            "lambda_mu_path": [list(p) for p in self.lambda_mu_path],
            "residual": _num(self.residual) if self.residual is not None else None,
            "initial_state": self.initial_state,
            "newton_iterations": self.iterations,
            "r_bounds": self.r_bounds.to_dict() if self.r_bounds else None,
            "n_star": list(self.n_star) if self.n_star else None,
            "n_star_auxiliary": list(self.n_star_auxiliary) if self.n_star_auxiliary else None,
            "clamps_active": self.clamps_active,
            "localization": self.localization.to_dict() if self.localization else None,
            "apriori": self.apriori.to_dict() if self.apriori else None,
            "last_good": list(self.last_good) if self.last_good is not None else None,
            "message": self.message,
            **self.extra,
        }


def continuation_solve(base: CoupledSystem, q: BoundQuadruple, schedule: ContinuationSchedule | None = None,
                       cfg: SolverConfig | None = None, envelopes: tuple | None = None):
    """Track the periodic solution of the auxiliary problem from (0, 0) along ``schedule``.

    Returns ``(trajectory, report)``; ``trajectory`` is ``None`` when Newton
    fails before any step converges. On failure the report names the last
    parameter pair that converged.
    """
    from .certify import derivative_bound

    schedule = schedule or ContinuationSchedule()
    cfg = cfg or SolverConfig()
    T = base.period_T
    report = SolveReport()
    aux0 = AuxiliarySystem.from_bounds(base, q, 0.0, 0.0)

    def solve_at(p, guess, integrator):
        prob = ShootingProblem(aux0.at(*p), T, integrator, cfg.newton, cfg.segments)
        return newton_solve(prob, guess)

    s = np.zeros(4)
    cur = None
    traj = None
    for target in schedule.path:
        pending = [target]
        while pending:
            nxt = pending[-1]
            try:
                state, traj = solve_at(nxt, s, cfg.integrator)
            except NewtonError as exc:
                step = max(abs(nxt[0] - cur[0]), abs(nxt[1] - cur[1])) if cur else 0.0
                if cur is None or step / 2 < schedule.min_step:
                    report.last_good = cur
                    report.message = f"Newton failed at (lambda, mu) = {nxt}: {exc}"
                    return traj, report
                pending.append(((cur[0] + nxt[0]) / 2, (cur[1] + nxt[1]) / 2))
                continue
            s = state.as_array()
            cur = nxt
            pending.pop()
            report.lambda_mu_path.append(cur)
            report.iterations.append(traj.diagnostics["iterations"])
    report.last_good = cur

    # resolve on a uniform fixed-step mesh so samples are mutually consistent
    out_cfg = IntegratorConfig("rk4", n_steps=cfg.n_samples - 1)
    final_aux = aux0.at(*cur)
    if cfg.polish:
        try:
            state, traj = solve_at(cur, s, out_cfg)
        except NewtonError as exc:
            report.message = f"fixed-step polish failed at {cur}: {exc}"
            return traj, report
    else:
        traj = integrate_ivp(final_aux, s, T, out_cfg)
    report.converged = True
    report.residual = traj.periodic_residual
    report.initial_state = [float(v) for v in traj.y[0]]

    if envelopes is not None:
        env_f, env_g = envelopes
        report.n_star = (derivative_bound(env_f, T), derivative_bound(env_g, T))
        report.r_bounds = compute_r(base, q, report.n_star, slack=cfg.r_slack)
        report.n_star_auxiliary = claim2_bounds(env_f, env_g, report.r_bounds, T)
        report.apriori = verify_apriori(traj, report.r_bounds, report.n_star_auxiliary)
    report.localization = localize_check(traj, q, report.n_star, cfg.localization_tol)
    report.clamps_active = clamps_active(traj, q, cfg.localization_tol)
    if not schedule.reaches_original:
        report.status = "INCONCLUSIVE"
        report.message = f"schedule ends at {cur}; the original problem was not reached"
    elif report.clamps_active or not report.localization.passed:
        report.status = "INCONCLUSIVE"
        report.message = ("solution of the truncated problem leaves the strips; "
                          "it is not certified as a solution of the original system")
    else:
        report.status = "PASS"
    return traj, report


def second_derivative_residual(traj: Trajectory, sys: CoupledSystem) -> float:
    """Sup-norm mismatch between central second differences of (z, w) and (f, g)."""
    t, y = traj.t, traj.y
    h = np.diff(t)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise ValueError("second differences need uniformly spaced samples")
    h = h[0]
    zpp = (y[2:, 0] - 2 * y[1:-1, 0] + y[:-2, 0]) / h**2
    wpp = (y[2:, 1] - 2 * y[1:-1, 1] + y[:-2, 1]) / h**2
    ti, yi = t[1:-1], y[1:-1]
    f = sys.f(ti, yi[:, 0], yi[:, 1], yi[:, 2], yi[:, 3])
    g = sys.g(ti, yi[:, 0], yi[:, 1], yi[:, 2], yi[:, 3])
    return float(max(np.max(np.abs(zpp - f)), np.max(np.abs(wpp - g))))
