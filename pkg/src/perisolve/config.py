"""JSON run configuration.

Schema (all top-level keys except ``system`` optional for built-in cases)::

    {
      "system": {"f": "<expr>", "g": "<expr>", "T": 1.0,
                 "monotone_f_w0": true, "monotone_g_z0": true,
                 "cross_env_f": 2.0, "cross_env_g": 1.0}
              | {"builtin": "vdp", "params": {...}},
      "bounds": {"alpha1": [...], "beta1": [...], "alpha2": [...], "beta2": [...]},
      "envelopes": {"f": {"a": 41.6, "b": 3}, "g": {"a": 95.4, "b": 3}},
      "certification": {"grid_t": 2001, ...},
      "solver": {"steps": 11, "tol": 1e-10, "method": "rk45", ...}
    }

Decimal coefficients are read exactly (``1.2`` becomes ``6/5``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from fractions import Fraction

from .bounds import BoundQuadruple
from .cases import Case, builtin_case
from .certify import CertificationConfig, EnvelopeError, NagumoEnvelope
from .expr import ExpressionError
from .system import BUILTINS, CoupledSystem


class ConfigError(ValueError):
    pass


_SYSTEM_KEYS = {"f", "g", "T", "monotone_f_w0", "monotone_g_z0", "cross_env_f", "cross_env_g", "name"}
_SOLVER_KEYS = {"steps", "tol", "method", "n_samples", "segments", "max_iter", "fd_eps",
                "atol", "rtol", "min_step"}
_TOP_KEYS = {"system", "bounds", "envelopes", "certification", "solver"}


@dataclass(frozen=True)
class SolverOptions:
    steps: int = 11
    tol: float = 1e-10
    method: str = "rk45"
    n_samples: int = 8001
    segments: int = 1
    max_iter: int = 50
    fd_eps: float = 1e-7
    atol: float = 1e-10
    rtol: float = 1e-8
    min_step: float = 1.0 / 64

    def __post_init__(self):
        if not 1 <= self.steps <= 10_000:
            raise ConfigError("solver.steps must lie in [1, 10000]")
        if not 0 < self.tol < 1:
            raise ConfigError("solver.tol must lie in (0, 1)")
        if self.method not in ("rk45", "rk45_adaptive", "rk4", "rk4_fixed"):
            raise ConfigError(f"solver.method {self.method!r} is not one of rk45, rk4_fixed")
        if not 3 <= self.n_samples <= 10**6:
            raise ConfigError("solver.n_samples must lie in [3, 1e6]")
        if not 1 <= self.segments <= 64:
            raise ConfigError("solver.segments must lie in [1, 64]")
        if self.max_iter < 1:
            raise ConfigError("solver.max_iter must be >= 1")
        for name in ("fd_eps", "atol", "rtol", "min_step"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"solver.{name} must be > 0")

    def solver_config(self):
        from .solver import IntegratorConfig, NewtonConfig, SolverConfig

        return SolverConfig(
            integrator=IntegratorConfig(self.method, atol=self.atol, rtol=self.rtol),
            newton=NewtonConfig(self.max_iter, self.tol, self.fd_eps),
            n_samples=self.n_samples, segments=self.segments,
        )

    def schedule(self):
        from .solver import ContinuationSchedule

        return ContinuationSchedule.diagonal(self.steps, self.min_step)


@dataclass
class RunConfig:
    system: CoupledSystem
    bounds: BoundQuadruple
    env_f: NagumoEnvelope
    env_g: NagumoEnvelope
    certification: CertificationConfig = field(default_factory=CertificationConfig)
    solver: SolverOptions = field(default_factory=SolverOptions)
    case: Case | None = None

    @property
    def certify_by_default(self) -> bool:
        return self.case.certify_by_default if self.case else True

    def with_overrides(self, grid=None, steps=None, tol=None, method=None) -> "RunConfig":
        from dataclasses import replace

        cert, solv = self.certification, self.solver
        try:
            if grid is not None:
                cert = replace(cert, grid_t=grid)
            kw = {k: v for k, v in (("steps", steps), ("tol", tol), ("method", method)) if v is not None}
            if kw:
                solv = replace(solv, **kw)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return replace(self, certification=cert, solver=solv)


def _coeff(x, where):
    if isinstance(x, bool) or not isinstance(x, (int, float, str)):
        raise ConfigError(f"{where}: coefficient {x!r} is not a number")
    try:
        return Fraction(str(x)) if not isinstance(x, int) else Fraction(x)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{where}: bad coefficient {x!r}") from exc


def _bounds(d, T) -> BoundQuadruple:
    if not isinstance(d, dict):
        raise ConfigError("bounds must be an object")
    need = ("alpha1", "alpha2", "beta1", "beta2")
    missing = [k for k in need if k not in d]
    extra = set(d) - set(need)
    if missing or extra:
        raise ConfigError(f"bounds: missing {missing}, unknown {sorted(extra)}")
    arrs = {}
    for k in need:
        if not isinstance(d[k], list) or not d[k]:
            raise ConfigError(f"bounds.{k} must be a non-empty coefficient array")
        arrs[k] = [_coeff(c, f"bounds.{k}") for c in d[k]]
    try:
        return BoundQuadruple.from_coefficients(arrs["alpha1"], arrs["alpha2"], arrs["beta1"],
                                                arrs["beta2"], T=T)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bounds: {exc}") from exc


def _envelope(d, which) -> NagumoEnvelope:
    if not isinstance(d, dict):
        raise ConfigError(f"envelopes.{which} must be an object")
    try:
        return NagumoEnvelope.from_dict(d)
    except (KeyError, TypeError, ValueError, EnvelopeError) as exc:
        raise ConfigError(f"envelopes.{which}: {exc!r}") from exc


def _system(d) -> tuple[CoupledSystem, Case | None]:
    if not isinstance(d, dict):
        raise ConfigError("system must be an object")
    if "builtin" in d:
        extra = set(d) - {"builtin", "params"}
        if extra:
            raise ConfigError(f"system: unknown keys {sorted(extra)} next to 'builtin'")
        name = d["builtin"]
        if name not in BUILTINS:
            raise ConfigError(f"unknown builtin system {name!r}; expected one of {BUILTINS}")
        params = d.get("params")
        if params is not None and name != "vdp":
            raise ConfigError(f"builtin {name!r} takes no parameters")
        try:
            case = builtin_case(name, params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"system.params: {exc}") from exc
        return case.system, case
    extra = set(d) - _SYSTEM_KEYS
    if extra:
        raise ConfigError(f"system: unknown keys {sorted(extra)}")
    for k in ("f", "g"):
        if k not in d:
            raise ConfigError(f"system: missing {k!r} expression")
        if not isinstance(d[k], str):
            raise ConfigError(f"system.{k} must be a string")
    kw = {k: d[k] for k in _SYSTEM_KEYS - {"f", "g", "T"} if k in d}
    try:
        sys = CoupledSystem.from_expressions(d["f"], d["g"], period_T=float(d.get("T", 1.0)), **kw)
    except ExpressionError as exc:
        raise ConfigError(f"system: {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"system: {exc}") from exc
    return sys, None


def _section(d, cls, name, allowed=None):
    if d is None:
        return cls()
    if not isinstance(d, dict):
        raise ConfigError(f"{name} must be an object")
    allowed = allowed or {f.name for f in fields(cls)}
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"{name}: unknown keys {sorted(extra)}")
    d = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def parse_config(d: dict) -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError("configuration must be a JSON object")
    extra = set(d) - _TOP_KEYS
    if extra:
        raise ConfigError(f"unknown top-level keys {sorted(extra)}")
    if "system" not in d:
        raise ConfigError("missing 'system'")
    sys, case = _system(d["system"])
    if "bounds" in d:
        bounds = _bounds(d["bounds"], sys.period_T)
    elif case is not None:
        bounds = case.bounds
    else:
        raise ConfigError("missing 'bounds'")
    envs = d.get("envelopes")
    if envs is not None:
        if not isinstance(envs, dict) or set(envs) != {"f", "g"}:
            raise ConfigError("envelopes must have exactly the keys 'f' and 'g'")
        env_f, env_g = _envelope(envs["f"], "f"), _envelope(envs["g"], "g")
    elif case is not None:
        env_f, env_g = case.env_f, case.env_g
    else:
        raise ConfigError("missing 'envelopes'")
    cert = _section(d.get("certification"), CertificationConfig, "certification")
    solver = _section(d.get("solver"), SolverOptions, "solver", _SOLVER_KEYS)
    return RunConfig(sys, bounds, env_f, env_g, cert, solver, case)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(d)


def builtin_config(name: str) -> RunConfig:
    if name not in BUILTINS:
        raise ConfigError(f"unknown builtin {name!r}; expected one of {BUILTINS}")
    return parse_config({"system": {"builtin": name}})
