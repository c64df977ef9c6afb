"""Candidate lower/upper functions, sup-norms and the constant shifts.

Polynomials keep exact :class:`fractions.Fraction` coefficients when given
them, so shifted bounds can be compared coefficient-exactly.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Callable, Sequence

import numpy as np

MAX_DEGREE = 16
ROOT_TOL = 1e-12
GRID_POINTS = 10_001


def _is_exact(c) -> bool:
    return isinstance(c, Rational)


def as_coefficient(c):
    """Normalise one coefficient: ints/Fractions/rational strings stay exact."""
    if isinstance(c, bool):
        raise TypeError("boolean is not a coefficient")
    if isinstance(c, Rational):
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    c = float(c)
    if not math.isfinite(c):
        raise ValueError(f"non-finite coefficient {c!r}")
    return c


@dataclass(frozen=True)
class PolyFunction:
    """``sum(c[k] * t**k)`` on ``[0, T]`` (ascending coefficients)."""

    coefficients: tuple
    T: float = 1.0

    def __post_init__(self):
        coeffs = tuple(as_coefficient(c) for c in self.coefficients) or (Fraction(0),)
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs = coeffs[:-1]
        if len(coeffs) - 1 > MAX_DEGREE:
            raise ValueError(f"degree {len(coeffs) - 1} exceeds the cap of {MAX_DEGREE}")
        if not self.T > 0:
            raise ValueError(f"domain length must be positive, got {self.T!r}")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def exact(self) -> bool:
        return all(_is_exact(c) for c in self.coefficients)

    @property
    def float_coefficients(self) -> np.ndarray:
        return np.array(self._floats)

    @functools.cached_property
    def _floats(self) -> tuple:
        return tuple(float(c) for c in self.coefficients)

    def __call__(self, t):
        if isinstance(t, (float, int)):
            acc = 0.0
            for c in reversed(self._floats):
                acc = acc * t + c
            return acc
        return np.polynomial.polynomial.polyval(t, self._floats)

    value = __call__

    def exact_value(self, t):
        acc = Fraction(0) if self.exact else 0.0
        for c in reversed(self.coefficients):
            acc = acc * t + c
        return acc

    def deriv(self, k: int = 1) -> "PolyFunction":
        c = list(self.coefficients)
        for _ in range(k):
            c = [i * c[i] for i in range(1, len(c))] or [Fraction(0)]
        return PolyFunction(tuple(c), self.T)

    def d1(self, t):
        return self.deriv(1)(t)

    def d2(self, t):
        return self.deriv(2)(t)

    def shifted(self, amount) -> "PolyFunction":
        c = list(self.coefficients)
        if _is_exact(amount) and _is_exact(c[0]):
            c[0] = Fraction(c[0]) + Fraction(amount)
        else:
            c[0] = float(c[0]) + float(amount)
        return PolyFunction(tuple(c), self.T)

    def to_json(self) -> list:
        return [float(c) for c in self.coefficients]

    def pretty(self) -> str:
        terms = []
        for k, c in enumerate(self.coefficients):
            if c == 0:
                continue
            mag = abs(c)
            coef = str(mag) if _is_exact(mag) else repr(float(mag))
            if k == 0:
                body = coef
            else:
                var = "t" if k == 1 else f"t^{k}"
                body = var if mag == 1 else f"{coef}*{var}"
            terms.append(("-" if c < 0 else "+", body))
        if not terms:
            return "0"
        sign, body = terms[0]
        out = ("-" if sign == "-" else "") + body
        for sign, body in terms[1:]:
            out += f" {sign} {body}"
        return out


@dataclass(frozen=True)
class SmoothFunction:
    """Twice-differentiable bound given by (value, first, second derivative) callables."""

    value_fn: Callable
    d1_fn: Callable
    d2_fn: Callable
    T: float = 1.0
    offset: float = 0.0

    def __call__(self, t):
        return np.asarray(self.value_fn(t), dtype=float) + self.offset

    value = __call__

    def d1(self, t):
        return np.asarray(self.d1_fn(t), dtype=float)

    def d2(self, t):
        return np.asarray(self.d2_fn(t), dtype=float)

    def shifted(self, amount) -> "SmoothFunction":
        return SmoothFunction(self.value_fn, self.d1_fn, self.d2_fn, self.T, self.offset + float(amount))


# --- Sturm sequences (exact) ----------------------------------------------


def _trim(p: list) -> list:
    while len(p) > 1 and p[-1] == 0:
        p = p[:-1]
    return p


def _polyrem(num: list, den: list) -> list:
    num = list(num)
    dd = len(den) - 1
    while num and len(num) - 1 >= dd:
        q = num[-1] / den[-1]
        k = len(num) - 1 - dd
        for i, c in enumerate(den):
            num[i + k] -= q * c
        num.pop()
    return _trim(num) if num else [Fraction(0)]


def _polyder(p: list) -> list:
    return [i * p[i] for i in range(1, len(p))] or [Fraction(0)]


def sturm_sequence(p: Sequence) -> list[list[Fraction]]:
    """Exact Sturm chain of ``p`` (ascending coefficients)."""
    p0 = _trim([Fraction(c) for c in p])
    seq = [p0]
    if len(p0) == 1:
        return seq
    seq.append(_polyder(p0))
    while len(seq[-1]) > 1 or seq[-1][0] != 0:
        r = _polyrem(seq[-2], seq[-1])
        if len(r) == 1 and r[0] == 0:
            break
        # normalise to keep coefficient growth in check; sign is preserved
        scale = max(abs(c) for c in r)
        seq.append([-c / scale for c in r])
        if len(r) == 1:
            break
    return seq


def _eval_exact(p: list, x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(p):
        acc = acc * x + c
    return acc


def _sign_changes(seq, x: Fraction) -> int:
    signs = [v for v in (_eval_exact(p, x) for p in seq) if v != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if (a > 0) != (b > 0))


def count_roots(seq, a: float, b: float) -> int:
    """Distinct real roots of ``seq[0]`` in ``(a, b]``."""
    return _sign_changes(seq, Fraction(a)) - _sign_changes(seq, Fraction(b))


def real_roots_in(p: Sequence, a: float, b: float, tol: float = ROOT_TOL) -> list[float]:
    """Distinct real roots of ``p`` in ``(a, b)``, isolated by Sturm counts.

    Each isolated root is refined by bisection (on a sign change) or by Sturm
    count halving (even multiplicity) to width ``tol``, then Newton-polished
    while it stays inside its bracket.
    """
    p = _trim([Fraction(c) for c in p])
    if len(p) == 1:
        return []
    seq = sturm_sequence(p)
    fp = [float(c) for c in p]
    dfp = [float(c) for c in _polyder(p)]
    roots = []
    stack = [(float(a), float(b), count_roots(seq, a, b))]
    depth = 0
    while stack:
        lo, hi, n = stack.pop()
        if n <= 0:
            continue
        if n == 1 or hi - lo <= tol:
            roots.append(_refine(seq, fp, dfp, lo, hi, tol))
            continue
        depth += 1
        if depth > 10_000:
            raise ArithmeticError("root isolation did not terminate")
        mid = 0.5 * (lo + hi)
        n_left = count_roots(seq, lo, mid)
        stack.append((mid, hi, n - n_left))
        stack.append((lo, mid, n_left))
    return sorted(r for r in roots if a < r < b)


def _refine(seq, fp, dfp, lo, hi, tol):
    val = lambda x: np.polynomial.polynomial.polyval(x, fp)
    # exact root at the right bracket end is counted in (lo, hi]
    if _eval_exact(seq[0], Fraction(hi)) == 0:
        return hi
    flo, fhi = val(lo), val(hi)
    if flo * fhi < 0:
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            fm = val(mid)
            if fm == 0:
                return mid
            if (fm < 0) == (flo < 0):
                lo, flo = mid, fm
            else:
                hi = mid
    else:
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if count_roots(seq, lo, mid) >= 1:
                hi = mid
            else:
                lo = mid
    x = 0.5 * (lo + hi)
    for _ in range(3):
        d = np.polynomial.polynomial.polyval(x, dfp)
        if d == 0:
            break
        nx = x - val(x) / d
        if not (lo - tol <= nx <= hi + tol):
            break
        x = nx
    return x


# --- sup norm --------------------------------------------------------------


def _golden_max(fn, a, b, tol=1e-13, max_iter=200):
    invphi = (math.sqrt(5) - 1) / 2
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    x = 0.5 * (a + b)
    return x, fn(x)


def _grid_sup(fn, T, n=GRID_POINTS):
    """Dense-grid maximum of |fn| refined by golden-section around the best cell."""
    t = np.linspace(0.0, T, n)
    vals = np.abs(np.asarray(fn(t), dtype=float))
    k = int(np.argmax(vals))
    best_t, best = float(t[k]), float(vals[k])
    lo, hi = t[max(k - 1, 0)], t[min(k + 1, n - 1)]
    x, v = _golden_max(lambda s: abs(float(fn(s))), float(lo), float(hi))
    if v > best:
        best_t, best = x, v
    return best, best_t


@dataclass(frozen=True)
class NormResult:
    value: float | Fraction
    witness_t: float
    method: str  # 'sturm' or 'grid'


def sup_norm_info(p) -> NormResult:
    """``max |p(t)|`` on ``[0, T]`` with the smallest maximising ``t``."""
    if not isinstance(p, PolyFunction):
        value, t = _grid_sup(p, p.T)
        return NormResult(value, t, "grid")
    T = p.T
    if p.degree == 0:
        c = p.coefficients[0]
        return NormResult(abs(c), 0.0, "sturm")
    dp = p.deriv().coefficients
    try:
        crit = real_roots_in(dp, 0.0, T)
    except ArithmeticError:
        crit = None
    cands = [0.0] + (crit or []) + [T]
    vals = [abs(float(p(c))) for c in cands]
    best = max(vals)
    # independent dense-grid guard: the Sturm path must not be beaten
    grid_best, grid_t = _grid_sup(p, T)
    if crit is None or grid_best > best + 1e-10 * max(1.0, best):
        return NormResult(grid_best, grid_t, "grid")
    tie = 1e-12 * max(1.0, best)
    idx = min(i for i, v in enumerate(vals) if v >= best - tie)
    witness = cands[idx]
    value: float | Fraction = best
    if p.exact:
        exact = _exact_candidate_max(p, cands, vals, best, tie)
        if exact is not None:
            value = exact
    return NormResult(value, float(witness), "sturm")


def _exact_candidate_max(p: PolyFunction, cands, vals, best, tie):
    """Exact maximum when every near-maximal candidate is a verified rational point."""
    dp = p.deriv()
    T = Fraction(p.T)
    exact_vals = []
    for c, v in zip(cands, vals):
        if c == 0.0:
            x = Fraction(0)
        elif c == p.T:
            x = T
        else:
            x = Fraction(c).limit_denominator(10**6)
            if dp.exact_value(x) != 0:
                if v >= best - 1e-9 * max(1.0, best):
                    return None
                continue
        exact_vals.append(abs(p.exact_value(x)))
    if not exact_vals:
        return None
    m = max(exact_vals)
    if abs(float(m) - best) > tie:
        return None
    return m


def sup_norm(p) -> float | Fraction:
    """Sup-norm on the function's domain (exact Fraction when certifiable)."""
    return sup_norm_info(p).value


def shift_lower(alpha):
    """``alpha - ||alpha||``; non-positive on the domain."""
    return alpha.shifted(-sup_norm(alpha))


def shift_upper(beta):
    """``beta + ||beta||``; non-negative on the domain."""
    return beta.shifted(sup_norm(beta))


# --- quadruples ------------------------------------------------------------


@dataclass(frozen=True)
class BoundQuadruple:
    alpha1: PolyFunction | SmoothFunction
    alpha2: PolyFunction | SmoothFunction
    beta1: PolyFunction | SmoothFunction
    beta2: PolyFunction | SmoothFunction
    alpha1_0: object = field(init=False, repr=False)
    alpha2_0: object = field(init=False, repr=False)
    beta1_0: object = field(init=False, repr=False)
    beta2_0: object = field(init=False, repr=False)

    def __post_init__(self):
        Ts = {self.alpha1.T, self.alpha2.T, self.beta1.T, self.beta2.T}
        if len(Ts) != 1:
            raise ValueError(f"bound functions have different domains: {sorted(Ts)}")
        object.__setattr__(self, "alpha1_0", shift_lower(self.alpha1))
        object.__setattr__(self, "alpha2_0", shift_lower(self.alpha2))
        object.__setattr__(self, "beta1_0", shift_upper(self.beta1))
        object.__setattr__(self, "beta2_0", shift_upper(self.beta2))

    @property
    def T(self) -> float:
        return self.alpha1.T

    @classmethod
    def from_coefficients(cls, alpha1, alpha2, beta1, beta2, T: float = 1.0) -> "BoundQuadruple":
        return cls(*(PolyFunction(tuple(c), T) for c in (alpha1, alpha2, beta1, beta2)))

    def lower(self, i: int):
        return (self.alpha1_0, self.alpha2_0)[i - 1]

    def upper(self, i: int):
        return (self.beta1_0, self.beta2_0)[i - 1]

    def shifted(self) -> dict:
        return {"alpha1_0": self.alpha1_0, "alpha2_0": self.alpha2_0,
                "beta1_0": self.beta1_0, "beta2_0": self.beta2_0}


@dataclass(frozen=True)
class Membership:
    inside: bool
    violations: tuple = ()  # (component, side, bound value)


def band_membership(q: BoundQuadruple, t: float, z: float, w: float) -> Membership:
    if not (0.0 <= t <= q.T):
        raise ValueError(f"t={t!r} outside [0, {q.T}]")
    out = []
    for comp, x, lo, hi in (("z", z, q.alpha1_0, q.beta1_0), ("w", w, q.alpha2_0, q.beta2_0)):
        lo_v, hi_v = float(lo(t)), float(hi(t))
        if x > hi_v:
            out.append((comp, "above", hi_v))
        elif x < lo_v:
            out.append((comp, "below", lo_v))
    return Membership(not out, tuple(out))
