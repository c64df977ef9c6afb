"""Built-in case definitions: bound candidates, envelopes and published shifts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction as Fr

from .bounds import BoundQuadruple, PolyFunction
from .certify import NagumoEnvelope
from .system import CoupledSystem, builtin_system


@dataclass(frozen=True)
class Case:
    name: str
    system: CoupledSystem
    bounds: BoundQuadruple
    env_f: NagumoEnvelope
    env_g: NagumoEnvelope
    # shifted bounds and envelopes as printed in the source publication
    published_shifts: dict = field(default_factory=dict)
    published_envelopes: dict = field(default_factory=dict)
    certify_by_default: bool = True
    notes: tuple = ()


def _quad(a1, a2, b1, b2) -> BoundQuadruple:
    return BoundQuadruple.from_coefficients(a1, a2, b1, b2, T=1.0)


def example_case() -> Case:
    bounds = _quad(
        (1, 0, 2, -2),
        (0, 2, -2),
        (Fr(6, 5), 0, -2, 2),
        (1, -3, 3),
    )
    published = {
        "alpha1_0": PolyFunction((Fr(-8, 27), 0, 2, -2)),
        "alpha2_0": PolyFunction((Fr(-1, 2), 2, -2)),
        "beta1_0": PolyFunction((Fr(12, 5), 0, -2, 2)),
        "beta2_0": PolyFunction((2, -3, 3)),
    }
    # Sound envelope for f on the strip: 2|z|^3 <= 2 (12/5)^3, |w| <= 2,
    # |2/(1+w1^2)| <= 2, |10 t| <= 10.
    a_f = 2 * Fr(12, 5) ** 3 + 2 + 2 + 10
    return Case(
        name="example",
        system=builtin_system("example"),
        bounds=bounds,
        env_f=NagumoEnvelope.affine(float(a_f), 3.0),
        env_g=NagumoEnvelope.affine(477 / 5, 3.0),
        published_shifts=published,
        published_envelopes={"f": NagumoEnvelope.affine(94 / 5, 3.0),
                             "g": NagumoEnvelope.affine(477 / 5, 3.0)},
        notes=(
            "published envelope for f is 94/5 + 3s, but 2 z^3 reaches 2 (12/5)^3 = 27.648 on the "
            f"strip; the default envelope uses a = {a_f} = {float(a_f):g} instead",
        ),
    )


def vdp_case(params=None) -> Case:
    bounds = _quad(
        (-1, 1, -1),
        (Fr(-3, 4), 1, -1),
        (1, 0, Fr(-1, 2), Fr(1, 2)),
        (1, 0, -1, 1),
    )
    published = {
        "alpha1_0": PolyFunction((Fr(-5, 4), 1, -1)),
        "alpha2_0": PolyFunction((-1, 1, -1)),
        "beta1_0": PolyFunction((2, 0, Fr(-1, 2), Fr(1, 2))),
        "beta2_0": PolyFunction((2, 0, -1, 1)),
    }
    env_f = NagumoEnvelope.affine(9.0, 3.0)
    env_g = NagumoEnvelope.affine(3.0 + 4.0 * math.pi, 3.0)
    return Case(
        name="vdp",
        system=builtin_system("vdp", params),
        bounds=bounds,
        env_f=env_f,
        env_g=env_g,
        published_shifts=published,
        published_envelopes={"f": env_f, "g": env_g},
    )


def manufactured_case() -> Case:
    # Wide constant strips [-1, 1]; the periodic orbit has amplitude ~0.026.
    bounds = _quad((Fr(-1, 2),), (Fr(-1, 2),), (Fr(1, 2),), (Fr(1, 2),))
    # |f| <= |z0| + |z1| + 1 <= 2 + s on the strip
    env = NagumoEnvelope.affine(2.0, 1.0)
    return Case(
        name="manufactured_linear",
        system=builtin_system("manufactured_linear"),
        bounds=bounds,
        env_f=env,
        env_g=env,
        certify_by_default=False,
        notes=("solver oracle with a closed-form periodic orbit; it admits no lower/upper "
               "pair in the theorem's sense, so certification is skipped by default",),
    )


CASES = {"example": example_case, "vdp": vdp_case, "manufactured_linear": manufactured_case}


def builtin_case(name: str, params=None) -> Case:
    if name not in CASES:
        raise ValueError(f"unknown builtin case {name!r}; expected one of {tuple(CASES)}")
    if name == "vdp":
        return vdp_case(params)
    return CASES[name]()


def compare_shifts(bounds: BoundQuadruple, published: dict) -> dict:
    """Coefficient-wise comparison of computed and published shifted bounds."""
    out = {}
    for key, pub in published.items():
        got = getattr(bounds, key)
        out[key] = {
            "computed": got.pretty(),
            "published": pub.pretty(),
            "match": tuple(got.coefficients) == tuple(pub.coefficients),
            "constant_difference": str(Fr(got.coefficients[0]) - Fr(pub.coefficients[0]))
            if got.exact and pub.exact else float(got.coefficients[0]) - float(pub.coefficients[0]),
        }
    return out


def shift_discrepancy_note(comparison: dict) -> str:
    bad = [k for k, v in comparison.items() if not v["match"]]
    if not bad:
        return ""
    parts = [f"{k}: computed {comparison[k]['computed']}, published {comparison[k]['published']}" for k in bad]
    return "shifted bounds differ from the published expressions (" + "; ".join(parts) + ")"
