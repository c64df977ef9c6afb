"""Sampling-based verification of the existence theorem's hypotheses.

Every universally quantified inequality is checked on a grid: ``t`` on a
uniform grid, state variables across the shifted strips, and the free
derivative variables over a compact box plus a few large "asymptote"
magnitudes. Declared cross-envelopes (see :class:`CoupledSystem`) are used as
a consistency check on the free-variable dependence; an inconsistency makes
a condition INCONCLUSIVE rather than PASS.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import integrate

from .bounds import BoundQuadruple
from .system import CoupledSystem, RhsEvaluationError

PASS, FAIL, INCONCLUSIVE = "PASS", "FAIL", "INCONCLUSIVE"

CONDITION_NAMES = (
    "lower_f", "lower_g", "lower_endpoints",
    "upper_f", "upper_g", "upper_endpoints",
    "monotone_f_w0", "monotone_g_z0",
    "nagumo",
)

INFLATE = 1.0 + 1e-6


def max_threads() -> int:
    env = os.environ.get("PERISOLVE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _map_ordered(fn, items: Sequence):
    """Map ``fn`` over ``items``, possibly in threads; results keep input order."""
    n = min(max_threads(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# --- envelopes -------------------------------------------------------------


class EnvelopeError(ValueError):
    pass


class QuadratureError(ArithmeticError):
    pass


@dataclass(frozen=True)
class NagumoEnvelope:
    """Positive growth bound ``phi`` on ``[0, inf)``.

    ``affine``: ``a + b*s``. ``tabulated``: linear interpolation through
    ``(s_k, phi_k)`` with ``s_0 = 0``, continued linearly with slope
    ``tail_rate`` past the last sample. A finite tail slope keeps
    ``int ds/phi`` divergent.
    """

    kind: str
    a: float = 0.0
    b: float = 0.0
    s: tuple = ()
    values: tuple = ()
    tail_rate: float = 0.0

    def __post_init__(self):
        if self.kind == "affine":
            if not (self.a > 0 and math.isfinite(self.a)):
                raise EnvelopeError(f"affine envelope needs a > 0, got {self.a!r}")
            if not (self.b >= 0 and math.isfinite(self.b)):
                raise EnvelopeError(f"affine envelope needs b >= 0, got {self.b!r}")
        elif self.kind == "tabulated":
            s = np.asarray(self.s, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if s.ndim != 1 or len(s) < 1 or len(s) != len(v):
                raise EnvelopeError("tabulated envelope needs matching non-empty samples")
            if s[0] != 0 or np.any(np.diff(s) <= 0):
                raise EnvelopeError("samples must start at 0 and increase strictly")
            if np.any(v <= 0) or not np.all(np.isfinite(v)):
                raise EnvelopeError("envelope values must be positive and finite")
            if np.any(np.diff(v) < 0):
                raise EnvelopeError("envelope values must be non-decreasing")
            if not (self.tail_rate >= 0 and math.isfinite(self.tail_rate)):
                raise EnvelopeError("tail_rate must be finite and >= 0 for divergence")
            object.__setattr__(self, "s", tuple(float(x) for x in s))
            object.__setattr__(self, "values", tuple(float(x) for x in v))
        else:
            raise EnvelopeError(f"unknown envelope kind {self.kind!r}")

    @classmethod
    def affine(cls, a: float, b: float = 0.0) -> "NagumoEnvelope":
        return cls("affine", a=float(a), b=float(b))

    @classmethod
    def tabulated(cls, s, values, tail_rate: float = 0.0) -> "NagumoEnvelope":
        return cls("tabulated", s=tuple(s), values=tuple(values), tail_rate=float(tail_rate))

    def __call__(self, s):
        s = np.abs(np.asarray(s, dtype=float))
        if self.kind == "affine":
            return self.a + self.b * s
        xs, vs = self.s, self.values
        inner = np.interp(s, xs, vs)
        return np.where(s > xs[-1], vs[-1] + self.tail_rate * (s - xs[-1]), inner)

    def plus(self, c: float) -> "NagumoEnvelope":
        """Envelope shifted up by a constant (``phi + c``)."""
        if self.kind == "affine":
            return NagumoEnvelope.affine(self.a + c, self.b)
        return NagumoEnvelope.tabulated(self.s, [v + c for v in self.values], self.tail_rate)

    def breakpoints(self) -> tuple:
        return self.s if self.kind == "tabulated" else ()

    def to_dict(self) -> dict:
        if self.kind == "affine":
            return {"kind": "affine", "a": self.a, "b": self.b}
        return {"kind": "tabulated", "s": list(self.s), "values": list(self.values),
                "tail_rate": self.tail_rate}

    @classmethod
    def from_dict(cls, d: dict) -> "NagumoEnvelope":
        kind = d.get("kind", "affine")
        if kind == "affine":
            return cls.affine(d["a"], d.get("b", 0.0))
        if kind == "tabulated":
            return cls.tabulated(d["s"], d["values"], d.get("tail_rate", 0.0))
        raise EnvelopeError(f"unknown envelope kind {kind!r}")


def _inv_integral(env: NagumoEnvelope, lo: float, hi: float) -> float:
    pts = [p for p in env.breakpoints() if lo < p < hi] or None
    val, err = integrate.quad(lambda s: 1.0 / float(env(s)), lo, hi, epsabs=0.0,
                              epsrel=1e-13, limit=200, points=pts)
    if not math.isfinite(val) or err > 1e-9 * max(abs(val), 1e-300):
        raise QuadratureError(f"quadrature of 1/phi on [{lo}, {hi}] did not converge (err={err:g})")
    return val


def _bound_by_quadrature(env: NagumoEnvelope, T: float, rtol: float) -> float:
    # bracket by doubling, accumulating the integral segment by segment
    hi = max(float(env(0.0)) * T, 1e-300)
    acc = _inv_integral(env, 0.0, hi)
    lo, acc_lo = 0.0, 0.0
    for _ in range(2000):
        if acc >= T:
            break
        lo, acc_lo = hi, acc
        hi *= 2.0
        acc += _inv_integral(env, lo, hi)
    else:
        raise QuadratureError("could not bracket the derivative bound")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        acc_mid = acc_lo + _inv_integral(env, lo, mid)
        if acc_mid >= T:
            hi = mid
        else:
            lo, acc_lo = mid, acc_mid
    return 0.5 * (lo + hi)


def derivative_bound(env: NagumoEnvelope, T: float, method: str = "auto",
                     inflate: bool = True, rtol: float = 1e-12) -> float:
    """Smallest ``N`` with ``int_0^N ds/phi(s) = T`` (times ``1 + 1e-6`` when ``inflate``).

    Any larger value satisfies the strict inequality needed for the a-priori
    derivative estimate. ``method`` is ``"closed"`` (affine only),
    ``"quadrature"`` or ``"auto"``.
    """
    if not (T > 0 and math.isfinite(T)):
        raise ValueError(f"T must be positive, got {T!r}")
    if method == "auto":
        method = "closed" if env.kind == "affine" else "quadrature"
    if method == "closed":
        if env.kind != "affine":
            raise ValueError("closed form is only available for affine envelopes")
        a, b = env.a, env.b
        n = a * T if b == 0 else (a / b) * math.expm1(b * T)
    elif method == "quadrature":
        n = _bound_by_quadrature(env, T, rtol)
    else:
        raise ValueError(f"unknown method {method!r}")
    return n * INFLATE if inflate else n


# --- config and report -----------------------------------------------------


@dataclass(frozen=True)
class CertificationConfig:
    grid_t: int = 2001
    box_z1: float | None = None
    box_w1: float | None = None
    asymptote_samples: tuple = (1e2, 1e4, 1e6)
    tol_margin: float = 1e-9
    free_samples: int = 21
    state_samples: int = 5
    box_factor: float = 10.0
    default_box: float = 100.0

    def __post_init__(self):
        if self.grid_t < 3:
            raise ValueError("grid_t must be >= 3")
        for name in ("box_z1", "box_w1"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be > 0")
        if self.free_samples < 3 or self.state_samples < 2:
            raise ValueError("free_samples >= 3 and state_samples >= 2 required")
        if not self.tol_margin >= 0:
            raise ValueError("tol_margin must be >= 0")

    def resolved(self, n_star: tuple | None = None) -> "CertificationConfig":
        """Fill unset box half-widths from derivative bounds (``box_factor * N``)."""
        bz, bw = self.box_z1, self.box_w1
        if bz is None:
            bz = self.box_factor * n_star[0] if n_star else self.default_box
        if bw is None:
            bw = self.box_factor * n_star[1] if n_star else self.default_box
        return replace(self, box_z1=float(bz), box_w1=float(bw))

    def t_grid(self, T: float) -> np.ndarray:
        return np.linspace(0.0, T, self.grid_t)

    def grid_meta(self) -> dict:
        return {"grid_t": self.grid_t, "box_z1": self.box_z1, "box_w1": self.box_w1,
                "asymptote_samples": list(self.asymptote_samples),
                "free_samples": self.free_samples, "state_samples": self.state_samples,
                "tol_margin": self.tol_margin}


@dataclass
class Condition:
    name: str
    verdict: str
    worst_margin: float
    witness: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    detail: str = ""
    parts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"name": self.name, "verdict": self.verdict,
             "worst_margin": _json_num(self.worst_margin),
             "witness": _jsonable(self.witness)}
        if self.detail:
            d["detail"] = self.detail
        if self.parts:
            d["parts"] = _jsonable(self.parts)
        d["grid"] = _jsonable(self.grid)
        return d

    def line(self) -> str:
        return f"{self.name:<16} {self.verdict:<12} worst_margin={self.worst_margin:.6g}"


def _json_num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, str)) or obj is None:
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    try:
        return _json_num(obj)
    except (TypeError, ValueError):
        return str(obj)


def overall_verdict(conditions: Sequence[Condition]) -> str:
    verdicts = {c.verdict for c in conditions}
    if FAIL in verdicts:
        return FAIL
    if INCONCLUSIVE in verdicts:
        return INCONCLUSIVE
    return PASS


@dataclass
class CertificationReport:
    conditions: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    bounds_note: str = ""
    derivative_bounds: dict = field(default_factory=dict)

    @property
    def overall(self) -> str:
        return overall_verdict(self.conditions)

    def __getitem__(self, name: str) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def extend(self, other: "CertificationReport") -> "CertificationReport":
        self.conditions.extend(other.conditions)
        self.notes.extend(n for n in other.notes if n not in self.notes)
        return self

    def to_dict(self) -> dict:
        return {
            "conditions": [c.to_dict() for c in self.conditions],
            "overall": self.overall,
            "bounds_note": self.bounds_note,
            "notes": list(self.notes),
            "derivative_bounds": _jsonable(self.derivative_bounds),
        }


# --- sampling helpers ------------------------------------------------------


def free_grid(half_width: float, n: int, asymptotes: Sequence[float] = ()) -> np.ndarray:
    """Symmetric sample set for a free derivative variable (always contains 0)."""
    n = n if n % 2 else n + 1
    lin = np.linspace(-half_width, half_width, n)
    geo = np.geomspace(1e-3 * half_width, half_width, max(3, n // 2))
    extra = np.asarray([a for a in asymptotes if a > 0], dtype=float)
    pts = np.concatenate([lin, geo, -geo, extra, -extra, [0.0]])
    return np.unique(pts)


def _eval_checked(fn, which, t, z0, w0, z1, w1):
    with np.errstate(all="ignore"):
        vals = np.asarray(fn(t, z0, w0, z1, w1), dtype=float)
    bad = ~np.isfinite(vals)
    if bad.any():
        idx = np.unravel_index(int(np.argmax(bad)), vals.shape)
        pick = lambda a: float(np.broadcast_to(a, vals.shape)[idx])
        point = dict(t=pick(t), z0=pick(z0), w0=pick(w0), z1=pick(z1), w1=pick(w1))
        raise RhsEvaluationError(which, point, float(vals[idx]))
    return vals


def _cross_verdict(spread: float, declared: float | None, tol: float):
    """Consistency of the observed free-variable range with the declaration."""
    if spread <= tol:
        return True, ""
    if declared is None:
        return False, f"free-variable dependence observed (range {spread:.3g}) but no cross envelope declared"
    if spread > declared + tol:
        return False, f"observed free-variable range {spread:.6g} exceeds declared cross envelope {declared:.6g}"
    return True, ""


def _differential_condition(name, sys, q, cfg, which, side):
    """``alpha'' >= sup f`` (side='lower') or ``beta'' <= inf f`` (side='upper')."""
    T = sys.period_T
    tol = cfg.tol_margin
    t = cfg.t_grid(T)
    if side == "lower":
        b1, b2 = q.alpha1_0, q.alpha2_0
        own = q.alpha1 if which == "f" else q.alpha2
    else:
        b1, b2 = q.beta1_0, q.beta2_0
        own = q.beta1 if which == "f" else q.beta2
    z0, w0 = np.asarray(b1(t), float), np.asarray(b2(t), float)
    dd = np.asarray(own.d2(t), float) * np.ones_like(t)
    d1 = np.asarray(own.d1(t), float) * np.ones_like(t)
    if which == "f":
        free = free_grid(cfg.box_w1, cfg.free_samples, cfg.asymptote_samples)
        vals = _eval_checked(sys.f, "f", t[:, None], z0[:, None], w0[:, None], d1[:, None], free[None, :])
        free_name, declared = "w1", sys.cross_env_f
    else:
        free = free_grid(cfg.box_z1, cfg.free_samples, cfg.asymptote_samples)
        vals = _eval_checked(sys.g, "g", t[:, None], z0[:, None], w0[:, None], free[None, :], d1[:, None])
        free_name, declared = "z1", sys.cross_env_g
    if side == "lower":
        extreme_idx = np.argmax(vals, axis=1)
        extreme = vals[np.arange(len(t)), extreme_idx]
        margin = dd - extreme
    else:
        extreme_idx = np.argmin(vals, axis=1)
        extreme = vals[np.arange(len(t)), extreme_idx]
        margin = extreme - dd
    k = int(np.argmin(margin))
    worst = float(margin[k])
    spread = float(np.max(vals.max(axis=1) - vals.min(axis=1)))
    point = {"t": float(t[k]), "z0": float(z0[k]), "w0": float(w0[k])}
    if which == "f":
        point.update(z1=float(d1[k]), w1=float(free[extreme_idx[k]]))
    else:
        point.update(z1=float(free[extreme_idx[k]]), w1=float(d1[k]))
    witness = {"t": float(t[k]), "free": {free_name: float(free[extreme_idx[k]])},
               "point": point, "second_derivative": float(dd[k])}
    grid = {"grid_t": cfg.grid_t, f"box_{free_name}": cfg.box_w1 if which == "f" else cfg.box_z1,
            "free_points": int(len(free)), "asymptote_samples": list(cfg.asymptote_samples)}
    if worst < -tol:
        return Condition(name, FAIL, worst, witness, grid, "differential inequality violated")
    ok, why = _cross_verdict(spread, declared, tol)
    if not ok:
        return Condition(name, INCONCLUSIVE, worst, witness, grid, why)
    return Condition(name, PASS, worst, witness, grid)


def _endpoint_condition(name, q, cfg, side):
    tol = cfg.tol_margin
    T = q.T
    margins, eqs = [], []
    worst, witness = math.inf, {}
    funcs = (("alpha1", q.alpha1), ("alpha2", q.alpha2)) if side == "lower" else \
            (("beta1", q.beta1), ("beta2", q.beta2))
    for label, fn in funcs:
        eq = abs(float(fn(0.0)) - float(fn(T)))
        d0, dT = float(fn.d1(0.0)), float(fn.d1(T))
        ineq = d0 - dT if side == "lower" else dT - d0
        eqs.append(eq)
        margins.append(ineq)
        for m, check in ((ineq, "derivative"), (-eq if eq > tol else math.inf, "value")):
            if m < worst:
                worst = m
                witness = {"t": 0.0, "free": {"function": label, "check": check},
                           "values": {"at_0": float(fn(0.0)), "at_T": float(fn(T)),
                                      "d_at_0": d0, "d_at_T": dT}}
    grid = {"T": T}
    detail = f"max periodic value mismatch {max(eqs):.3g}"
    if max(eqs) > tol or min(margins) < -tol:
        return Condition(name, FAIL, worst, witness, grid, detail)
    return Condition(name, PASS, worst, witness, grid, detail)


def certify_lower(sys: CoupledSystem, q: BoundQuadruple, cfg: CertificationConfig | None = None) -> CertificationReport:
    """Lower-solution inequalities for both components and their endpoint conditions."""
    cfg = (cfg or CertificationConfig()).resolved()
    return CertificationReport([
        _differential_condition("lower_f", sys, q, cfg, "f", "lower"),
        _differential_condition("lower_g", sys, q, cfg, "g", "lower"),
        _endpoint_condition("lower_endpoints", q, cfg, "lower"),
    ])


def certify_upper(sys: CoupledSystem, q: BoundQuadruple, cfg: CertificationConfig | None = None) -> CertificationReport:
    cfg = (cfg or CertificationConfig()).resolved()
    return CertificationReport([
        _differential_condition("upper_f", sys, q, cfg, "f", "upper"),
        _differential_condition("upper_g", sys, q, cfg, "g", "upper"),
        _endpoint_condition("upper_endpoints", q, cfg, "upper"),
    ])


def derivative_ranges(q: BoundQuadruple, cfg: CertificationConfig) -> tuple:
    """Ranges of z1 and w1 spanned by the bound derivatives.

    ``[min(min a1', min b1'), max(max a1', max b1')]`` and likewise for the
    second component.
    """
    t = cfg.t_grid(q.T)
    out = []
    for a, b in ((q.alpha1, q.beta1), (q.alpha2, q.beta2)):
        da = np.asarray(a.d1(t), float) * np.ones_like(t)
        db = np.asarray(b.d1(t), float) * np.ones_like(t)
        out.append((float(min(da.min(), db.min())), float(max(da.max(), db.max()))))
    return tuple(out)


def _monotone_condition(name, sys, q, cfg, which):
    tol = cfg.tol_margin
    t = cfg.t_grid(q.T)
    (z1lo, z1hi), (w1lo, w1hi) = derivative_ranges(q, cfg)
    u_state = np.linspace(0.0, 1.0, cfg.state_samples)
    u_fine = np.linspace(0.0, 1.0, 2 * cfg.state_samples - 1)
    z1s = np.linspace(z1lo, z1hi, cfg.state_samples)
    w1s = np.linspace(w1lo, w1hi, cfg.state_samples)
    a1, b1 = np.asarray(q.alpha1_0(t), float), np.asarray(q.beta1_0(t), float)
    a2, b2 = np.asarray(q.alpha2_0(t), float), np.asarray(q.beta2_0(t), float)

    def chunk(sl):
        tt = t[sl][:, None, None, None, None]
        if which == "f":
            fixed = (a1[sl][:, None] + (b1[sl] - a1[sl])[:, None] * u_state[None, :])[:, :, None, None, None]
            moving = (a2[sl][:, None] + (b2[sl] - a2[sl])[:, None] * u_fine[None, :])[:, None, :, None, None]
            vals = _eval_checked(sys.f, "f", tt, fixed, moving, z1s[None, None, None, :, None], w1s[None, None, None, None, :])
            diffs = np.diff(vals, axis=2)
        else:
            moving = (a1[sl][:, None] + (b1[sl] - a1[sl])[:, None] * u_fine[None, :])[:, :, None, None, None]
            fixed = (a2[sl][:, None] + (b2[sl] - a2[sl])[:, None] * u_state[None, :])[:, None, :, None, None]
            vals = _eval_checked(sys.g, "g", tt, moving, fixed, z1s[None, None, None, :, None], w1s[None, None, None, None, :])
            diffs = np.diff(vals, axis=1)
        k = int(np.argmax(diffs))
        return float(diffs.flat[k]), np.unravel_index(k, diffs.shape), sl.start

    slices = _chunks(len(t), 256)
    results = _map_ordered(chunk, slices)
    worst_diff, idx, start = max(results, key=lambda r: r[0])  # first max wins on ties
    ti = start + idx[0]
    if which == "f":
        z0 = a1[ti] + (b1[ti] - a1[ti]) * u_state[idx[1]]
        w_lo = a2[ti] + (b2[ti] - a2[ti]) * u_fine[idx[2]]
        w_hi = a2[ti] + (b2[ti] - a2[ti]) * u_fine[idx[2] + 1]
        witness = {"t": float(t[ti]), "free": {"z0": float(z0), "w0_pair": [float(w_lo), float(w_hi)],
                                               "z1": float(z1s[idx[3]]), "w1": float(w1s[idx[4]])}}
    else:
        z_lo = a1[ti] + (b1[ti] - a1[ti]) * u_fine[idx[1]]
        z_hi = a1[ti] + (b1[ti] - a1[ti]) * u_fine[idx[1] + 1]
        w0 = a2[ti] + (b2[ti] - a2[ti]) * u_state[idx[2]]
        witness = {"t": float(t[ti]), "free": {"z0_pair": [float(z_lo), float(z_hi)], "w0": float(w0),
                                               "z1": float(z1s[idx[3]]), "w1": float(w1s[idx[4]])}}
    worst = 0.0 - worst_diff
    declared = sys.monotone_f_w0 if which == "f" else sys.monotone_g_z0
    grid = {"grid_t": cfg.grid_t, "z1_range": [z1lo, z1hi], "w1_range": [w1lo, w1hi],
            "state_samples": cfg.state_samples}
    detail = "" if declared else "monotonicity not declared; sampled only"
    verdict = FAIL if worst_diff > tol else PASS
    return Condition(name, verdict, worst, witness, grid, detail)


def _chunks(n: int, size: int) -> list:
    return [slice(i, min(i + size, n)) for i in range(0, n, size)]


def check_monotonicity(sys: CoupledSystem, q: BoundQuadruple, cfg: CertificationConfig | None = None) -> CertificationReport:
    """f non-increasing in w0 and g non-increasing in z0 on the strips."""
    cfg = (cfg or CertificationConfig()).resolved()
    rep = CertificationReport([
        _monotone_condition("monotone_f_w0", sys, q, cfg, "f"),
        _monotone_condition("monotone_g_z0", sys, q, cfg, "g"),
    ])
    rep.notes.append(
        "derivative ranges for the monotonicity check use max(max alpha', max beta') as the upper "
        "end (the printed hypothesis has min beta', which leaves the range empty for the worked cases)")
    return rep


def _nagumo_part(sys, q, env, cfg, which):
    tol = cfg.tol_margin
    t = cfg.t_grid(q.T)
    u = np.linspace(0.0, 1.0, cfg.state_samples)
    zfree = free_grid(cfg.box_z1, cfg.free_samples, cfg.asymptote_samples)
    wfree = free_grid(cfg.box_w1, cfg.free_samples, cfg.asymptote_samples)
    a1, b1 = np.asarray(q.alpha1_0(t), float), np.asarray(q.beta1_0(t), float)
    a2, b2 = np.asarray(q.alpha2_0(t), float), np.asarray(q.beta2_0(t), float)
    fn = sys.f if which == "f" else sys.g
    own = zfree if which == "f" else wfree
    bound = env(own)

    def chunk(sl):
        tt = t[sl][:, None, None, None, None]
        z0 = (a1[sl][:, None] + (b1[sl] - a1[sl])[:, None] * u[None, :])[:, :, None, None, None]
        w0 = (a2[sl][:, None] + (b2[sl] - a2[sl])[:, None] * u[None, :])[:, None, :, None, None]
        vals = _eval_checked(fn, which, tt, z0, w0, zfree[None, None, None, :, None], wfree[None, None, None, None, :])
        if which == "f":
            margin = bound[None, None, None, :, None] - np.abs(vals)
            spread = vals.max(axis=4) - vals.min(axis=4)
        else:
            margin = bound[None, None, None, None, :] - np.abs(vals)
            spread = vals.max(axis=3) - vals.min(axis=3)
        k = int(np.argmin(margin))
        return float(margin.flat[k]), np.unravel_index(k, margin.shape), sl.start, float(spread.max())

    results = _map_ordered(chunk, _chunks(len(t), 64))
    worst, idx, start, _ = min(results, key=lambda r: r[0])
    spread = max(r[3] for r in results)
    ti = start + idx[0]
    point = {"t": float(t[ti]),
             "z0": float(a1[ti] + (b1[ti] - a1[ti]) * u[idx[1]]),
             "w0": float(a2[ti] + (b2[ti] - a2[ti]) * u[idx[2]]),
             "z1": float(zfree[idx[3]]), "w1": float(wfree[idx[4]])}
    declared = sys.cross_env_f if which == "f" else sys.cross_env_g
    ok, why = _cross_verdict(spread, declared, tol)
    if worst < -tol:
        verdict = FAIL
    elif not ok:
        verdict = INCONCLUSIVE
    else:
        verdict = PASS
    return {"verdict": verdict, "worst_margin": worst, "point": point,
            "envelope": env.to_dict(), "cross_spread": spread, "detail": why}


def certify_nagumo(sys: CoupledSystem, q: BoundQuadruple, env_f: NagumoEnvelope,
                   env_g: NagumoEnvelope, cfg: CertificationConfig | None = None) -> CertificationReport:
    """``|f| <= phi(|z1|)`` and ``|g| <= psi(|w1|)`` over the strips and free boxes."""
    cfg = cfg or CertificationConfig()
    if cfg.box_z1 is None or cfg.box_w1 is None:
        T = sys.period_T
        cfg = cfg.resolved((derivative_bound(env_f, T), derivative_bound(env_g, T)))
    parts = {"f": _nagumo_part(sys, q, env_f, cfg, "f"),
             "g": _nagumo_part(sys, q, env_g, cfg, "g")}
    worst_key = min(parts, key=lambda k: parts[k]["worst_margin"])
    worst = parts[worst_key]
    verdict = overall_verdict([Condition(k, p["verdict"], p["worst_margin"]) for k, p in parts.items()])
    witness = {"t": worst["point"]["t"], "free": {"rhs": worst_key, **{k: v for k, v in worst["point"].items() if k != "t"}},
               "point": worst["point"]}
    detail = "; ".join(f"{k}: {p['detail']}" for k, p in parts.items() if p["detail"])
    return CertificationReport([Condition("nagumo", verdict, worst["worst_margin"], witness,
                                          cfg.grid_meta(), detail, parts)])


def certify_all(sys: CoupledSystem, q: BoundQuadruple, env_f: NagumoEnvelope,
                env_g: NagumoEnvelope, cfg: CertificationConfig | None = None) -> CertificationReport:
    """All theorem hypotheses; free-variable boxes default to ``box_factor`` times the bounds."""
    cfg = cfg or CertificationConfig()
    T = sys.period_T
    if abs(q.T - T) > 1e-12 * T:
        raise ValueError(f"bounds live on [0, {q.T}] but the system period is {T}")
    n_star = (derivative_bound(env_f, T), derivative_bound(env_g, T))
    cfg = cfg.resolved(n_star)
    report = CertificationReport()
    report.extend(certify_lower(sys, q, cfg))
    report.extend(certify_upper(sys, q, cfg))
    report.extend(check_monotonicity(sys, q, cfg))
    report.extend(certify_nagumo(sys, q, env_f, env_g, cfg))
    report.derivative_bounds = {"N1": n_star[0], "N2": n_star[1],
                                "envelope_f": env_f.to_dict(), "envelope_g": env_g.to_dict()}
    return report


def recheck_witness(sys: CoupledSystem, q: BoundQuadruple, cond: Condition,
                    env_f: NagumoEnvelope | None = None, env_g: NagumoEnvelope | None = None) -> float:
    """Recompute a differential or Nagumo condition's margin at its witness point."""
    p = cond.witness["point"]
    args = (p["t"], p["z0"], p["w0"], p["z1"], p["w1"])
    if cond.name in ("lower_f", "lower_g", "upper_f", "upper_g"):
        fn = sys.f if cond.name.endswith("f") else sys.g
        val = float(fn(*args))
        dd = cond.witness["second_derivative"]
        return dd - val if cond.name.startswith("lower") else val - dd
    if cond.name == "nagumo":
        which = cond.witness["free"]["rhs"]
        if which == "f":
            return float(env_f(p["z1"])) - abs(float(sys.f(*args)))
        return float(env_g(p["w1"])) - abs(float(sys.g(*args)))
    raise ValueError(f"no witness recomputation for {cond.name!r}")
