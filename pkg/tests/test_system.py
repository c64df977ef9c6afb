import math

import numpy as np
import pytest

from perisolve.expr import Expression
from perisolve.system import (EXAMPLE_F, EXAMPLE_G, CoupledSystem, RhsEvaluationError, VdpParams,
                              builtin_system, eval_rhs, manufactured_coefficients)


def test_example_values():
    s = builtin_system("example")
    assert eval_rhs(s, "f", 0, 0, 0, 0, 0) == -2.0
    assert eval_rhs(s, "g", 0, 0, 0, 0, 0) == -1.0
    assert s.period_T == 1.0 and s.cross_env_f == 2.0


def test_vdp_values():
    s = builtin_system("vdp")
    assert eval_rhs(s, "f", 0, 0, 0, 0, 0) == 1.0
    assert eval_rhs(s, "g", 0, 0, 0, 0, 0) == -1.0
    assert s.cross_env_f == 6.0 and s.cross_env_g == 8.0


def test_manufactured_value():
    s = builtin_system("manufactured_linear")
    assert eval_rhs(s, "f", 0, 1, 0, 1, 0) == -1.0


def test_example_native_matches_text_at_point():
    s = builtin_system("example")
    p = (1.0, -8 / 27, 0.3, -1.2, 0.7)
    assert abs(s.f(*p) - Expression(EXAMPLE_F)(*p)) <= 1e-15


@pytest.mark.parametrize("name", ["example", "vdp"])
def test_native_matches_parsed_on_random_box(name):
    s = builtin_system(name)
    rng = np.random.default_rng(7)
    n = 10_000
    t = rng.uniform(0, 1, n)
    z0, w0 = rng.uniform(-3, 3, (2, n))
    z1, w1 = rng.uniform(-50, 50, (2, n))
    for native, src in ((s.f, s.f_source), (s.g, s.g_source)):
        a = native(t, z0, w0, z1, w1)
        b = Expression(src)(t, z0, w0, z1, w1)
        rel = np.abs(a - b) / np.maximum(1.0, np.abs(a))
        assert rel.max() <= 1e-14


def test_example_sources_are_the_published_forms():
    s = builtin_system("example")
    assert s.f_source == EXAMPLE_F and s.g_source == EXAMPLE_G


def test_eval_rhs_errors():
    s = CoupledSystem.from_expressions("1/z0", "0")
    with pytest.raises(RhsEvaluationError) as err:
        eval_rhs(s, "f", 0.5, 0.0, 0.0, 0.0, 0.0)
    assert err.value.which == "f"
    with pytest.raises(ValueError):
        eval_rhs(s, "g", 2.0, 0, 0, 0, 0)
    with pytest.raises(ValueError):
        s.rhs("h")


def test_invalid_construction():
    with pytest.raises(ValueError):
        CoupledSystem.from_expressions("0", "0", period_T=0.0)
    with pytest.raises(ValueError):
        VdpParams(B1=-1.0)
    with pytest.raises(ValueError):
        VdpParams.from_dict({"H1": 1})
    with pytest.raises(ValueError):
        builtin_system("duffing")


def test_vdp_params_override():
    s = builtin_system("vdp", {"G1": 2.0})
    assert eval_rhs(s, "f", 0, 0, 0, 0, 0) == 2.0


def test_manufactured_coefficients_by_undetermined_coefficients():
    # independent oracle: substitute A cos + B sin into x'' + x' + x = cos(2 pi t)
    w = 2 * math.pi
    M = np.array([[1 - w**2, w], [-w, 1 - w**2]])
    A, B = np.linalg.solve(M, [1.0, 0.0])
    np.testing.assert_allclose(manufactured_coefficients(), (A, B), rtol=1e-14)
