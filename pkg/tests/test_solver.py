import math

import numpy as np
import pytest

from perisolve.bounds import BoundQuadruple
from perisolve.cases import example_case, manufactured_case
from perisolve.homotopy import AuxiliarySystem
from perisolve.solver import (ContinuationSchedule, IntegrationError, IntegratorConfig, NewtonConfig,
                              NewtonError, ShootingProblem, SingularJacobianError, StatePoint, Trajectory,
                              continuation_solve, integrate_ivp, localize_check, newton_solve,
                              second_derivative_residual, shoot_residual)
from perisolve.system import CoupledSystem, builtin_system, manufactured_coefficients

# periodic orbit of x'' + x' + x = cos(2 pi t): coefficients from a 2x2 solve,
# frozen here so the solver is checked against fixed numbers
A_ORACLE = -0.025313631977177762
B_ORACLE = 0.004133492238317597


def harmonic(t, y):
    return np.stack([y[2], y[3], -y[0], np.zeros_like(y[1])])


def homogeneous():
    c = example_case()
    return AuxiliarySystem.from_bounds(c.system, c.bounds, 0.0, 0.0)


def fit(traj, col):
    basis = np.column_stack([np.cos(2 * np.pi * traj.t), np.sin(2 * np.pi * traj.t)])
    return np.linalg.lstsq(basis, col, rcond=None)[0]


def test_oracle_constants():
    np.testing.assert_allclose(manufactured_coefficients(), (A_ORACLE, B_ORACLE), rtol=1e-15)


def test_cosine_rk4():
    tr = integrate_ivp(harmonic, StatePoint(1, 0, 0, 0), 2 * np.pi, IntegratorConfig("rk4_fixed", h=1e-3))
    assert abs(tr.z[-1] - 1) < 1e-6
    assert len(tr.t) == math.ceil(2 * np.pi / 1e-3) + 1
    assert tr.t[0] == 0.0 and tr.t[-1] == 2 * np.pi


def test_cosine_rk45_tolerance():
    tr = integrate_ivp(harmonic, StatePoint(1, 0, 0, 0), 2 * np.pi)
    assert abs(tr.z[-1] - 1) < 1e-7
    assert np.max(np.abs(tr.z - np.cos(tr.t))) < 1e-7
    assert tr.diagnostics["max_error_ratio"] <= 1.0


def test_zero_field_stays_zero():
    tr = integrate_ivp(lambda t, y: np.zeros_like(y), StatePoint(0, 0, 0, 0), 1.0)
    assert np.all(tr.y == 0)


def test_rk4_order():
    errs = []
    for h in (1e-2, 5e-3, 2.5e-3):
        tr = integrate_ivp(harmonic, StatePoint(1, 0, 0, 0), 2 * np.pi, IntegratorConfig("rk4", h=h))
        # whole-state error: the phase error enters z only quadratically at t = 2 pi
        errs.append(np.max(np.abs(tr.y[-1, [0, 2]] - [1.0, 0.0])))
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(12 <= r <= 20 for r in ratios), ratios


def test_manufactured_orbit_from_steady_state():
    s = builtin_system("manufactured_linear")
    A, B = A_ORACLE, B_ORACLE
    w = 2 * np.pi
    s0 = StatePoint(A, A, B * w, B * w)
    tr = integrate_ivp(s, s0, 1.0)
    exact = A * np.cos(w * tr.t) + B * np.sin(w * tr.t)
    assert np.max(np.abs(tr.z - exact)) < 1e-8
    assert np.max(np.abs(tr.w - exact)) < 1e-8


def test_non_finite_field_raises():
    with pytest.raises(IntegrationError):
        integrate_ivp(lambda t, y: np.stack([y[2], y[3], y[0] ** 2, y[1]]), StatePoint(10, 0, 0, 0), 1.0)
    with pytest.raises(ValueError):
        integrate_ivp(harmonic, StatePoint(0, 0, 0, 0), 0.0)


def test_shoot_residual_homogeneous():
    prob = ShootingProblem(homogeneous())
    assert np.all(shoot_residual(prob, StatePoint(0, 0, 0, 0)) == 0)
    r = shoot_residual(prob, StatePoint(1, 0, 0, 0))
    np.testing.assert_allclose(r, [math.cosh(1) - 1, 0, math.sinh(1), 0], atol=1e-9)


def test_newton_homogeneous_from_guess():
    s, tr = newton_solve(ShootingProblem(homogeneous()), (0.1, 0.1, 0, 0))
    assert max(map(abs, s)) < 1e-10
    assert np.max(np.abs(shoot_residual(ShootingProblem(homogeneous()), s))) <= 1e-10


def test_newton_manufactured():
    prob = ShootingProblem(builtin_system("manufactured_linear"))
    s, tr = newton_solve(prob, (0, 0, 0, 0))
    assert np.max(np.abs(shoot_residual(prob, s))) <= 1e-10
    np.testing.assert_allclose([s.z, s.zp / (2 * np.pi)], [A_ORACLE, B_ORACLE], atol=1e-8)
    again, tr2 = newton_solve(prob, s)
    assert tr2.diagnostics["iterations"] <= 1
    np.testing.assert_allclose(again, s, atol=1e-12)


def test_multiple_shooting_agrees():
    s1, _ = newton_solve(ShootingProblem(builtin_system("manufactured_linear")), (0, 0, 0, 0))
    s4, tr = newton_solve(ShootingProblem(builtin_system("manufactured_linear"), segments=4), (0, 0, 0, 0))
    np.testing.assert_allclose(s4, s1, atol=1e-9)
    assert tr.t[0] == 0 and tr.t[-1] == 1.0


def test_shooting_consistency():
    prob = ShootingProblem(builtin_system("manufactured_linear"))
    s, tr = newton_solve(prob, (0, 0, 0, 0))
    re = integrate_ivp(prob.field, s, 1.0)
    assert np.max(np.abs(re.y - tr.y)) <= 10 * prob.newton.residual_tol


def test_singular_jacobian_reported():
    # resonant forcing of an undamped oscillator: D(flow) - I vanishes, no periodic orbit
    osc = CoupledSystem.from_expressions("-4*pi^2*z0 + cos(2*pi*t)", "-4*pi^2*w0")
    prob = ShootingProblem(osc, integrator=IntegratorConfig("rk4", n_steps=2000))
    with pytest.raises(SingularJacobianError):
        newton_solve(prob, (0.3, 0.1, 0.2, 0.0))


def test_newton_max_iter():
    prob = ShootingProblem(builtin_system("vdp"), newton=NewtonConfig(max_iter=1, residual_tol=1e-14))
    with pytest.raises(NewtonError):
        newton_solve(prob, (1.0, 1.0, 0.0, 0.0))


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig("euler")
    with pytest.raises(ValueError):
        NewtonConfig(max_iter=0)
    with pytest.raises(ValueError):
        ContinuationSchedule(((0.5, 0.5), (1, 1)))
    with pytest.raises(ValueError):
        ContinuationSchedule(((0, 0), (0.5, 0.5), (0.25, 1)))
    with pytest.raises(ValueError):
        Trajectory([0, 0], np.zeros((2, 4)), np.zeros((2, 4)))


def test_default_schedule():
    sch = ContinuationSchedule()
    assert len(sch.path) == 12 and sch.path[0] == (0, 0) and sch.path[-1] == (1, 1)


def test_single_point_schedule_gives_zero():
    c = example_case()
    tr, rep = continuation_solve(c.system, c.bounds, ContinuationSchedule(((0, 0),)))
    assert rep.converged and np.all(tr.y == 0)
    assert rep.status == "INCONCLUSIVE"  # the original problem was not reached


def test_manufactured_continuation_recovers_oracle():
    c = manufactured_case()
    tr, rep = continuation_solve(c.system, c.bounds)
    assert rep.converged and rep.residual <= 1e-10
    for col in (tr.z, tr.w):
        np.testing.assert_allclose(fit(tr, col), [A_ORACLE, B_ORACLE], atol=1e-6)


def test_localize_check_trivial():
    c = example_case()
    t = np.linspace(0, 1, 11)
    zero = Trajectory(t, np.zeros((11, 4)), np.zeros((11, 4)))
    assert localize_check(zero, c.bounds).passed
    y = np.zeros((11, 4))
    y[:, 0] = 3.0
    rep = localize_check(Trajectory(t, y, np.zeros((11, 4))), c.bounds)
    assert not rep.passed and rep.margins["z_upper"] < 0


def test_hermite_interpolation():
    tr = integrate_ivp(harmonic, StatePoint(1, 0, 0, 0), 1.0, IntegratorConfig("rk4", n_steps=100))
    assert abs(tr.at(0.505)[0] - math.cos(0.505)) < 1e-8
    assert len(tr.samples) == 101 and tr.samples[-1][0] == 1.0


def test_example_end_to_end(example_solution):
    c, tr, rep = example_solution
    assert rep.converged and rep.status == "PASS"
    assert rep.residual <= 1e-8 and not rep.clamps_active
    assert len(tr.t) == 8001 and rep.localization.passed
    assert rep.apriori.passed and rep.r_bounds.ok
    assert second_derivative_residual(tr, c.system) <= 1e-5


def test_vdp_end_to_end(vdp_solution):
    c, tr, rep = vdp_solution
    assert rep.converged and rep.residual <= 1e-8
    assert np.std(tr.z, ddof=1) > 1e-3
    assert rep.localization.passed
    assert second_derivative_residual(tr, c.system) <= 1e-5


def test_clamp_activity_marks_inconclusive():
    # auxiliary z'' = z + lam (3 - z'): periodic solution z = -3 lam, outside [-1/2, 1/2] at lam = 1
    s = CoupledSystem.from_expressions("z0 + 3 - z1", "w0 - w1")
    q = BoundQuadruple.from_coefficients(("-1/2",), ("-1/2",), ("1/2",), ("1/2",))
    tr, rep = continuation_solve(s, q, ContinuationSchedule.diagonal(4))
    assert rep.converged and rep.clamps_active and rep.status == "INCONCLUSIVE"
    np.testing.assert_allclose(tr.z, -3.0, atol=1e-8)
