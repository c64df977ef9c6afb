"""Truncated, homotopic auxiliary problem and its a-priori constants.

For ``lam, mu`` in ``[0, 1]``::

    z'' = z + lam * (f(t, d1(t, z), d2(t, w), z', w') - d1(t, z))
    w'' = w + mu  * (g(t, d1(t, z), d2(t, w), z', w') - d2(t, w))

where ``d1``, ``d2`` clamp the states into the shifted strips. At
``lam = mu = 0`` this is ``z'' = z, w'' = w`` whose only periodic solution
is zero; at ``lam = mu = 1`` with both clamps inactive it is the original
system.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bounds import BoundQuadruple
from .certify import NagumoEnvelope, derivative_bound
from .system import CoupledSystem


@dataclass(frozen=True)
class TruncationBand:
    lower: object
    upper: object

    def __call__(self, t, x):
        return truncate(self, t, x)


def truncate(band: TruncationBand, t, x):
    """Clamp ``x`` into ``[lower(t), upper(t)]``."""
    lo = band.lower(t)
    hi = band.upper(t)
    return np.minimum(np.maximum(x, lo), hi)


def bands_of(q: BoundQuadruple) -> tuple:
    return TruncationBand(q.alpha1_0, q.beta1_0), TruncationBand(q.alpha2_0, q.beta2_0)


@dataclass(frozen=True)
class AuxiliarySystem:
    base: CoupledSystem
    bands: tuple
    lam: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        for name in ("lam", "mu"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")

    @classmethod
    def from_bounds(cls, base: CoupledSystem, q: BoundQuadruple, lam=1.0, mu=1.0) -> "AuxiliarySystem":
        return cls(base, bands_of(q), lam, mu)

    def at(self, lam: float, mu: float) -> "AuxiliarySystem":
        return AuxiliarySystem(self.base, self.bands, lam, mu)

    @property
    def period_T(self) -> float:
        return self.base.period_T


def aux_rhs(aux: AuxiliarySystem, t, z0, w0, z1, w1):
    """Second derivatives ``(z'', w'')`` of the auxiliary problem."""
    d1 = truncate(aux.bands[0], t, z0)
    d2 = truncate(aux.bands[1], t, w0)
    zpp = z0
    wpp = w0
    if aux.lam != 0.0:
        zpp = z0 + aux.lam * (aux.base.f(t, d1, d2, z1, w1) - d1)
    if aux.mu != 0.0:
        wpp = w0 + aux.mu * (aux.base.g(t, d1, d2, z1, w1) - d2)
    return zpp, wpp


# --- r bounds --------------------------------------------------------------


@dataclass
class RBounds:
    r1: float
    r2: float
    slack: float
    audit: dict = field(default_factory=dict)
    raw: tuple = ()

    @property
    def ok(self) -> bool:
        return all(v > 0 for v in self.audit.values())

    def to_dict(self) -> dict:
        return {"r1": self.r1, "r2": self.r2, "slack": self.slack,
                "raw": list(self.raw), "audit": dict(self.audit)}


DEFAULT_LAMBDAS = (0.0, 0.25, 0.5, 0.75, 1.0)


def _r_terms(base, q, n_star, t, free_n, lambdas):
    """Per-component suprema that r must strictly exceed."""
    lam = np.asarray(lambdas, dtype=float)[None, None, :]
    a1, b1 = np.asarray(q.alpha1_0(t), float), np.asarray(q.beta1_0(t), float)
    a2, b2 = np.asarray(q.alpha2_0(t), float), np.asarray(q.beta2_0(t), float)
    wfree = np.linspace(-n_star[1], n_star[1], free_n)
    zfree = np.linspace(-n_star[0], n_star[0], free_n)
    with np.errstate(all="ignore"):
        fb = np.asarray(base.f(t[:, None], b1[:, None], b2[:, None], 0.0, wfree[None, :]), float)
        fa = np.asarray(base.f(t[:, None], a1[:, None], a2[:, None], 0.0, wfree[None, :]), float)
        gb = np.asarray(base.g(t[:, None], b1[:, None], b2[:, None], zfree[None, :], 0.0), float)
        ga = np.asarray(base.g(t[:, None], a1[:, None], a2[:, None], zfree[None, :], 0.0), float)
    for name, arr in (("f", fb), ("f", fa), ("g", gb), ("g", ga)):
        if not np.all(np.isfinite(arr)):
            raise ArithmeticError(f"{name} is not finite on the r search set")
    # r1 > beta1_0 - lam f(beta...) ; r1 > lam f(alpha...) - alpha1_0 ; r1 > beta1_0, -alpha1_0
    terms1 = {
        "upper_f": float(np.max(b1[:, None, None] - lam * fb[:, :, None])),
        "lower_f": float(np.max(lam * fa[:, :, None] - a1[:, None, None])),
        "strip": float(max(b1.max(), -a1.min())),
    }
    terms2 = {
        "upper_g": float(np.max(b2[:, None, None] - lam * gb[:, :, None])),
        "lower_g": float(np.max(lam * ga[:, :, None] - a2[:, None, None])),
        "strip": float(max(b2.max(), -a2.min())),
    }
    return terms1, terms2


def compute_r(base: CoupledSystem, q: BoundQuadruple, n_star: tuple, grid_t: int = 2001,
              free_samples: int = 41, slack: float = 1.1, lambdas=DEFAULT_LAMBDAS) -> RBounds:
    """Constants ``r1, r2`` making all four strict inequalities hold on the grid.

    The free derivative ranges over ``[-N, N]`` and ``lambda`` over a grid
    containing 0 and 1 (the inequalities are affine in ``lambda``).
    """
    if slack < 1:
        raise ValueError("slack must be >= 1")
    t = np.linspace(0.0, q.T, grid_t)
    terms1, terms2 = _r_terms(base, q, n_star, t, free_samples, lambdas)
    raw1 = max(max(terms1.values()), 1e-12)
    raw2 = max(max(terms2.values()), 1e-12)
    r1, r2 = slack * raw1, slack * raw2
    rb = RBounds(r1, r2, slack, raw=(raw1, raw2))
    rb.audit = audit_r(base, q, rb, n_star, grid_t, free_samples, lambdas)
    return rb


def audit_r(base, q, rb: RBounds, n_star, grid_t=2001, free_samples=41, lambdas=DEFAULT_LAMBDAS) -> dict:
    """Worst margins (positive is good) of the strip and the four inequalities."""
    t = np.linspace(0.0, q.T, grid_t)
    terms1, terms2 = _r_terms(base, q, n_star, t, free_samples, lambdas)
    audit = {f"z_{k}": rb.r1 - v for k, v in terms1.items()}
    audit.update({f"w_{k}": rb.r2 - v for k, v in terms2.items()})
    return audit


def claim2_bounds(env_f: NagumoEnvelope, env_g: NagumoEnvelope, rb: RBounds, T: float) -> tuple:
    """Derivative bounds for the auxiliary problem (envelopes raised by ``2 r``)."""
    return (derivative_bound(env_f.plus(2 * rb.r1), T), derivative_bound(env_g.plus(2 * rb.r2), T))


@dataclass
class AprioriReport:
    passed: bool
    max_abs: dict
    limits: dict
    witness: dict

    def to_dict(self) -> dict:
        return {"verdict": "PASS" if self.passed else "FAIL", "max_abs": self.max_abs,
                "limits": self.limits, "witness": self.witness}


def verify_apriori(traj, r: RBounds, n_star: tuple) -> AprioriReport:
    """Check ``|z| < r1, |w| < r2, |z'| < N1, |w'| < N2`` at every sample."""
    cols = {"z": traj.z, "w": traj.w, "zp": traj.zp, "wp": traj.wp}
    limits = {"z": r.r1, "w": r.r2, "zp": n_star[0], "wp": n_star[1]}
    max_abs, witness, ok = {}, {}, True
    for k, v in cols.items():
        a = np.abs(v)
        i = int(np.argmax(a))
        max_abs[k] = float(a[i])
        if not a[i] < limits[k]:
            ok = False
            witness[k] = {"t": float(traj.t[i]), "value": float(v[i])}
    return AprioriReport(ok, max_abs, {k: float(v) for k, v in limits.items()}, witness)
