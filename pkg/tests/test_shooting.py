import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from gravcav.errors import DegeneracyError, DomainError, InvalidParameterError
from gravcav.gravity import DensityProfile
from gravcav.radial_field import el_residual
from gravcav.shooting import (
    IvpSpec,
    el_rhs,
    integrate_ivp,
    shoot_residual,
    solve_free_boundary,
    solve_shooting,
)


def test_el_rhs_identity_without_gravity(model, no_gravity):
    for R in (0.01, 0.3, 0.9):
        assert abs(el_rhs(model, no_gravity, R, R, 1.0)) <= 1e-14


def test_el_rhs_identity_with_gravity(model, unit_density):
    # only the gravity term survives: (4 pi/3) R / phi11(1,1,1), phi11 = 12
    expect = (4 * math.pi / 3 * 0.5) / 12.0
    assert_allclose(el_rhs(model, unit_density, 0.5, 0.5, 1.0), expect, rtol=1e-13)
    assert_allclose(expect, 0.174533, atol=5e-7)


@pytest.mark.parametrize("R,r,rp", [(0.3, 0.35, 0.9), (0.7, 0.6, 1.3), (0.05, 0.2, 0.4), (0.9, 1.1, 1.05)])
def test_el_rhs_matches_divergence_form(model, unit_density, R, r, rp):
    # along r(s) with r''(R) = el_rhs, d/ds[s^2 phi1] must equal 2 s phi2 + s^2 rho0 M / r^2
    rpp = el_rhs(model, unit_density, R, r, rp)
    traj = lambda s: (r + rp * (s - R) + 0.5 * rpp * (s - R) ** 2, rp + rpp * (s - R))
    flux = lambda s: s**2 * model.partials(s, traj(s)[1], traj(s)[0] / s).phi1
    h = 1e-5
    lhs = (flux(R + h) - flux(R - h)) / (2 * h)
    pt = model.partials(R, rp, r / R)
    rhs = 2 * R * pt.phi2 + R**2 * unit_density.mass(R) / r**2
    assert abs(lhs - rhs) <= 1e-5 * max(1.0, abs(rhs))


def test_el_rhs_domain(model, unit_density):
    with pytest.raises(DomainError):
        el_rhs(model, unit_density, 0.5, -0.1, 1.0)
    with pytest.raises(DomainError):
        el_rhs(model, unit_density, 0.0, 0.1, 1.0)


def test_el_rhs_degenerate_material(unit_density):
    from gravcav.energy_model import PowerLawModel, VolumetricTerm

    # p < 1 and no volumetric stiffness: phi11 < 0
    m = PowerLawModel(0.5, 1.0, VolumetricTerm(0.0, 0.0, 2.0, 2.0))
    with pytest.raises(DegeneracyError):
        el_rhs(m, unit_density, 0.5, 0.5, 1.0)


def test_ivp_spec_validation(model, unit_density):
    with pytest.raises(InvalidParameterError):
        IvpSpec(model, unit_density, 1.0, 1.0, epsilon=0.0)
    with pytest.raises(InvalidParameterError):
        IvpSpec(model, unit_density, 1.0, -1.0)


def test_identity_trajectory_without_gravity(model, no_gravity):
    traj = integrate_ivp(IvpSpec(model, no_gravity, 1.0, 1.0))
    assert traj.completed and traj.R_end == 1e-3
    R = np.linspace(1e-3, 1, 50)
    r, rp = traj(R)
    assert_allclose(r, R, atol=1e-12)
    assert_allclose(rp, 1.0, atol=1e-12)


def test_reaches_eps_near_paper_slope(model, unit_density):
    traj = integrate_ivp(IvpSpec(model, unit_density, 1.15, 1.1418944645))
    assert traj.completed
    assert abs(traj.r_end - 0.483) < 0.01


def test_small_slope_over_compresses(model, unit_density):
    # r' decays toward zero without crossing it; the inner stress is strongly compressive
    g, traj = shoot_residual(IvpSpec(model, unit_density, 1.15, 0.2))
    assert traj.rp_end < 1e-6
    assert g < -1e6


def test_large_slope_collapses_before_eps(model, unit_density):
    traj = integrate_ivp(IvpSpec(model, unit_density, 1.15, 2.0))
    assert not traj.completed
    assert traj.R_end > 1e-3
    assert traj.r_end < 1e-5


def test_event_predicate_holds(model, unit_density):
    for nu in (0.05, 0.2, 1.6, 2.5):
        traj = integrate_ivp(IvpSpec(model, unit_density, 1.15, nu))
        if traj.status == "event_r":
            assert abs(traj.r_end) <= 1e-12
        elif traj.status == "event_rp":
            assert abs(traj.rp_end) <= 1e-12


def test_step_budget(model, unit_density):
    traj = integrate_ivp(IvpSpec(model, unit_density, 1.15, 1.14, max_steps=3))
    assert traj.status == "budget"


def test_residual_zero_at_stress_free_identity(model, no_gravity):
    g, traj = shoot_residual(IvpSpec(model, no_gravity, 1.0, 1.0))
    # round-off grows like R^-2 inward; the solver's acceptance level is tol*(1 + v1*phi11)
    assert abs(g) <= 1e-8 * (1 + 12.0)
    assert abs(traj.r_end - 1e-3) <= 1e-10


def test_residual_sign_change_near_root(model, unit_density):
    res = solve_shooting(model, unit_density, 1.15)
    lo, _ = shoot_residual(IvpSpec(model, unit_density, 1.15, res.nu_star - 1e-6))
    hi, _ = shoot_residual(IvpSpec(model, unit_density, 1.15, res.nu_star + 1e-6))
    assert lo * hi < 0


def test_penalty_signs(model, unit_density):
    from gravcav.shooting import PENALTY_SCALE

    g_small, _ = shoot_residual(IvpSpec(model, unit_density, 1.15, 0.2))
    g_big, t_big = shoot_residual(IvpSpec(model, unit_density, 1.15, 2.0))
    assert not t_big.completed
    assert g_big >= PENALTY_SCALE
    assert g_small * g_big < 0


def test_shooting_without_gravity(model, no_gravity):
    res = solve_shooting(model, no_gravity, 1.0)
    assert res.converged
    assert abs(res.nu_star - 1.0) <= 1e-8
    assert np.max(np.abs(res.field.values - res.field.nodes)) <= 1e-8


def test_shooting_paper_case_b(model, unit_density):
    res = solve_shooting(model, unit_density, 1.15)
    assert res.converged
    assert abs(res.cavity - 0.48346) <= 5e-3
    assert abs(res.residual) <= 1e-8 * (1 + res.residual_scale)
    assert np.all(np.diff(res.field.values) > 0)


def test_converged_field_is_weak_equilibrium(model, unit_density):
    res = solve_shooting(model, unit_density, 1.15)
    assert el_residual(model, unit_density, res.field) <= 1e-3


def test_tolerance_convergence_near_zero_cavity(model, unit_density):
    coarse = solve_shooting(model, unit_density, 1.0, rtol=1e-10, atol=1e-12)
    fine = solve_shooting(model, unit_density, 1.0, rtol=5e-11, atol=5e-13)
    assert abs(coarse.cavity - fine.cavity) <= 10 * 5e-11


def test_bracket_failure_reported(model, unit_density):
    res = solve_shooting(model, unit_density, 1.15, bracket=(1.14, 1.141), max_iter=0)
    assert res.status in ("max_iterations", "converged")


def test_shooting_rejects_bad_grid(model, unit_density):
    with pytest.raises(InvalidParameterError):
        solve_shooting(model, unit_density, 1.15, grid=np.linspace(0.002, 1, 11))


def test_free_boundary_without_gravity(model, no_gravity):
    res = solve_free_boundary(model, no_gravity)
    assert res.converged
    assert abs(res.lam - 1.0) <= 1e-8 and abs(res.nu - 1.0) <= 1e-8


def test_free_boundary_compressed(model, unit_density):
    res = solve_free_boundary(model, unit_density)
    assert res.converged and res.lam < 1.0
    f = res.field
    # traction-free outer surface and intact centre
    assert abs(model.partials(1.0, res.nu, res.lam).phi1) <= 1e-10
    assert f.cavity <= 1e-3 * f.slopes[0] * (1 + 1e-3)
    ratio = f.values / f.nodes
    assert np.all(np.diff(ratio) > -1e-9)
    assert ratio[-1] < 1.0


def test_free_boundary_weak_gravity_scaling(model):
    a = solve_free_boundary(model, DensityProfile.constant(0.1))
    b = solve_free_boundary(model, DensityProfile.constant(0.2))
    # forcing scales like rho0^2, so the deficit quadruples
    assert_allclose((1 - b.lam) / (1 - a.lam), 4.0, rtol=0.05)
    assert 1 - a.lam < 0.1**2
