"""Coupled second-order systems ``z'' = f(t, z, w, z', w')``, ``w'' = g(...)``."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Callable

import numpy as np

from .expr import Expression

Rhs = Callable  # vectorised (t, z0, w0, z1, w1) -> value


class RhsEvaluationError(ArithmeticError):
    """A right-hand side produced a non-finite value."""

    def __init__(self, which, point, value):
        self.which = which
        self.point = point
        self.value = value
        args = ", ".join(f"{k}={v!r}" for k, v in point.items())
        super().__init__(f"{which} is not finite ({value!r}) at {args}")


@dataclass(frozen=True)
class CoupledSystem:
    """Right-hand sides plus the declarations the certifier relies on.

    ``cross_env_f`` bounds the range of ``f`` as ``w1`` varies with the other
    arguments fixed (likewise ``cross_env_g`` for ``g`` and ``z1``). ``None``
    means undeclared.
    """

    f: Rhs
    g: Rhs
    period_T: float = 1.0
    monotone_f_w0: bool = True
    monotone_g_z0: bool = True
    cross_env_f: float | None = None
    cross_env_g: float | None = None
    name: str = "custom"
    f_source: str | None = None
    g_source: str | None = None

    def __post_init__(self):
        if not (self.period_T > 0 and math.isfinite(self.period_T)):
            raise ValueError(f"period_T must be a positive finite number, got {self.period_T!r}")
        for attr in ("cross_env_f", "cross_env_g"):
            value = getattr(self, attr)
            if value is not None and not value >= 0:
                raise ValueError(f"{attr} must be >= 0, got {value!r}")

    @classmethod
    def from_expressions(cls, f: str, g: str, **kwargs) -> "CoupledSystem":
        fe, ge = Expression(f), Expression(g)
        return cls(fe, ge, f_source=fe.source, g_source=ge.source, **kwargs)

    def rhs(self, which: str) -> Rhs:
        if which == "f":
            return self.f
        if which == "g":
            return self.g
        raise ValueError(f"which must be 'f' or 'g', got {which!r}")

    def describe(self) -> dict:
        return {
            "name": self.name,
            "f": self.f_source,
            "g": self.g_source,
            "T": self.period_T,
            "monotone_f_w0": self.monotone_f_w0,
            "monotone_g_z0": self.monotone_g_z0,
            "cross_env_f": self.cross_env_f,
            "cross_env_g": self.cross_env_g,
        }


def eval_rhs(sys: CoupledSystem, which: str, t, z0, w0, z1, w1) -> float:
    """Evaluate ``f`` or ``g`` at one point, rejecting non-finite results."""
    T = sys.period_T
    if not (-1e-12 * T <= t <= T * (1 + 1e-12)):
        raise ValueError(f"t={t!r} outside [0, {T}]")
    fn = sys.rhs(which)
    with np.errstate(all="ignore"):
        value = float(fn(t, z0, w0, z1, w1))
    if not math.isfinite(value):
        point = dict(t=t, z0=z0, w0=w0, z1=z1, w1=w1)
        raise RhsEvaluationError(which, point, value)
    return value


# --- catalogue -------------------------------------------------------------


def _example_f(t, z0, w0, z1, w1):
    return 2 * z0**3 - w0 + 3 * z1 - 2 / (1 + w1**2) - 10 * t


def _example_g(t, z0, w0, z1, w1):
    return -z0 + 10 * w0**3 - np.exp(-(z1**2)) - 3 * w1 - 12 * t


EXAMPLE_F = "2*z0^3 - w0 + 3*z1 - 2/(1+w1^2) - 10*t"
EXAMPLE_G = "-z0 + 10*w0^3 - exp(-z1^2) - 3*w1 - 12*t"


@dataclass(frozen=True)
class VdpParams:
    """Coefficients of the coupled forced Van der Pol pair (default: published set)."""

    A1: float = 1.0
    B1: float = 0.5
    C1: float = 1.0
    D1: float = 6.0
    E1: float = 3.0
    F1: float = 2.0
    G1: float = 1.0
    A2: float = 1.0
    B2: float = 0.5
    C2: float = 1.0
    D2: float = 8.0
    E2: float = 2.0
    F2: float = 1.0
    G2: float = -1.0

    def __post_init__(self):
        for name in ("A1", "B1", "C1", "D1", "F1", "A2", "B2", "C2", "D2", "F2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "VdpParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown Van der Pol parameters: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in d.items()})

    def f_source(self) -> str:
        p = self
        return (f"z1*({p.A1!r} - {p.B1!r}*z0^2) - {p.C1!r}*z0 "
                f"+ {p.D1!r}*tanh({p.E1!r}*z0 - {p.F1!r}*w0) + {p.G1!r}*cos(t)")

    def g_source(self) -> str:
        p = self
        return (f"w1*({p.A2!r} - {p.B2!r}*w0^2) - {p.C2!r}*w0 "
                f"+ {p.D2!r}*atan({p.E2!r}*w0 - {p.F2!r}*z0) + {p.G2!r}*cos(t)")


def vdp_system(params: VdpParams | None = None) -> CoupledSystem:
    p = params or VdpParams()

    def f(t, z0, w0, z1, w1):
        return z1 * (p.A1 - p.B1 * z0**2) - p.C1 * z0 + p.D1 * np.tanh(p.E1 * z0 - p.F1 * w0) + p.G1 * np.cos(t)

    def g(t, z0, w0, z1, w1):
        return w1 * (p.A2 - p.B2 * w0**2) - p.C2 * w0 + p.D2 * np.arctan(p.E2 * w0 - p.F2 * z0) + p.G2 * np.cos(t)

    # f and g carry no w1 / z1 dependence; the declared ranges are the
    # coupling amplitudes, which trivially cover it.
    return CoupledSystem(
        _vectorised(f), _vectorised(g), 1.0,
        monotone_f_w0=True, monotone_g_z0=True,
        cross_env_f=p.D1, cross_env_g=p.D2,
        name="vdp", f_source=p.f_source(), g_source=p.g_source(),
    )


def _manufactured_f(t, z0, w0, z1, w1):
    return -z0 - z1 + np.cos(2 * np.pi * t)


def _manufactured_g(t, z0, w0, z1, w1):
    return -w0 - w1 + np.cos(2 * np.pi * t)


def _vectorised(fn):
    """Promote inputs to float64 and broadcast the result to the input shape."""

    def wrapped(t, z0, w0, z1, w1):
        if (type(z0) is np.ndarray and z0.dtype == np.float64 and type(w0) is np.ndarray
                and type(z1) is np.ndarray and type(w1) is np.ndarray
                and z0.shape == w0.shape == z1.shape == w1.shape and np.ndim(t) == 0):
            # fast path for batched states inside the integrators
            res = fn(float(t), z0, w0, z1, w1)
            if np.shape(res) != z0.shape:
                res = np.broadcast_to(res, z0.shape).copy()
            return res
        args = [np.asarray(a, dtype=np.float64)[()] for a in (t, z0, w0, z1, w1)]
        with np.errstate(all="ignore"):
            res = fn(*args)
        shape = np.broadcast_shapes(*(np.shape(a) for a in args))
        if np.shape(res) != shape:
            res = np.broadcast_to(res, shape).copy()
        return res

    wrapped.__name__ = fn.__name__
    wrapped.__doc__ = fn.__doc__
    return wrapped


BUILTINS = ("example", "vdp", "manufactured_linear")


def builtin_system(name: str, params: dict | VdpParams | None = None) -> CoupledSystem:
    """One of the catalogue systems, all with period 1."""
    if name == "example":
        return CoupledSystem(
            _vectorised(_example_f), _vectorised(_example_g), 1.0,
            monotone_f_w0=True, monotone_g_z0=True,
            cross_env_f=2.0, cross_env_g=1.0,
            name="example", f_source=EXAMPLE_F, g_source=EXAMPLE_G,
        )
    if name == "vdp":
        if isinstance(params, dict):
            params = VdpParams.from_dict(params)
        return vdp_system(params)
    if name == "manufactured_linear":
        return CoupledSystem(
            _vectorised(_manufactured_f), _vectorised(_manufactured_g), 1.0,
            monotone_f_w0=True, monotone_g_z0=True,
            cross_env_f=0.0, cross_env_g=0.0,
            name="manufactured_linear",
            f_source="-z0 - z1 + cos(2*pi*t)", g_source="-w0 - w1 + cos(2*pi*t)",
        )
    raise ValueError(f"unknown builtin system {name!r}; expected one of {BUILTINS}")


def manufactured_coefficients() -> tuple[float, float]:
    """(A, B) of the periodic solution A cos 2πt + B sin 2πt of x'' + x' + x = cos 2πt."""
    w2 = 4 * math.pi**2
    den = (1 - w2) ** 2 + w2
    return (1 - w2) / den, 2 * math.pi / den
