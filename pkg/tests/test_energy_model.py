import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from gravcav.energy_model import (
    InhomogeneousModel,
    PowerLawModel,
    PowerTerm,
    StretchState,
    VolumetricTerm,
    WeightFunction,
    baker_ericksen_margin,
    energy_density,
    h_min_argument,
    identity_residual,
    paper_model,
    partials,
    stress_free_D,
    validate_growth,
)
from gravcav.errors import DomainError, InvalidParameterError

stretch = st.floats(0.2, 5.0)


def reference_density(v1, v2, v3, p=2.0, kappa=1.0, C=1.0, g=2.0, dl=2.0, D=1.5):
    # independent scalar evaluation
    d = v1 * v2 * v3
    return kappa / p * (v1**p + v2**p + v3**p) + C * d**g + D * d ** (-dl)


def test_stress_free_D_values():
    assert stress_free_D(1.0, 1.0, 2.0, 2.0) == 1.5
    assert stress_free_D(1.0, 0.0, 2.0, 1.0) == 1.0


def test_stress_free_D_rejects_zero_delta():
    with pytest.raises(InvalidParameterError):
        stress_free_D(1.0, 1.0, 2.0, 0.0)


def test_density_at_identity(model):
    assert_allclose(energy_density(model, 0.5, StretchState(1, 1, 1)), 4.0, rtol=1e-15)
    assert_allclose(energy_density(model, 0.5, (1, 1, 1)), 3 / 2 + 1 + 1.5, rtol=1e-15)


def test_density_uniaxial_stretch(model):
    # 0.5*(4+1+1) + h(2) = 3 + 4 + 1.5/4
    value = energy_density(model, 0.3, (2.0, 1.0, 1.0))
    assert_allclose(value, 7.375, rtol=1e-15)
    assert_allclose(value, reference_density(2.0, 1.0, 1.0), rtol=1e-15)


def test_density_rejects_bad_input(model):
    with pytest.raises(DomainError):
        energy_density(model, 0.5, (1.0, -1.0, 1.0))
    with pytest.raises(DomainError):
        energy_density(model, 1.5, (1.0, 1.0, 1.0))
    with pytest.raises(DomainError):
        StretchState(0.0, 1.0, 1.0)


def test_partials_at_identity(model):
    pt = partials(model, 0.5, (1.0, 1.0, 1.0))
    assert abs(pt.phi1) <= 1e-15
    assert abs(pt.phi2) <= 1e-15
    # kappa + h''(1) = 1 + C g (g-1) + D dl (dl+1)
    assert_allclose(pt.phi11, 12.0, rtol=1e-14)


@pytest.mark.parametrize("kappa,C,g,dl", [(1, 1, 2, 2), (0.5, 2, 1.5, 3), (3, 0, 2, 1), (2, 0.7, 4, 0.5)])
def test_stress_free_construction(kappa, C, g, dl):
    m = paper_model(2.0, kappa, C, g, dl)
    assert abs(identity_residual(m)) <= 1e-12


def fd_partials(m, v1, v2, v3, R=0.5):
    h1, h2 = 1e-6 * max(1, v1), 1e-6 * max(1, v2)
    f = lambda a, b: m.density(R, a, b, v3)
    p1 = lambda a, b: m.partials(R, a, b, v3).phi1
    return {
        "phi1": (f(v1 + h1, v2) - f(v1 - h1, v2)) / (2 * h1),
        "phi2": (f(v1, v2 + h2) - f(v1, v2 - h2)) / (2 * h2),
        "phi11": (p1(v1 + h1, v2) - p1(v1 - h1, v2)) / (2 * h1),
        "phi12": (p1(v1, v2 + h2) - p1(v1, v2 - h2)) / (2 * h2),
    }


def test_partials_match_finite_differences(model):
    rng = np.random.default_rng(7)
    for v in rng.uniform(0.2, 5.0, size=(100, 3)):
        pt = model.partials(0.5, *v)
        for name, approx in fd_partials(model, *v).items():
            exact = getattr(pt, name)
            assert abs(exact - approx) <= 1e-5 * max(abs(exact), 1.0), (name, v)


def test_phi11_positive(model):
    rng = np.random.default_rng(3)
    v = rng.uniform(0.05, 20.0, size=(500, 3))
    assert np.all(model.partials(0.5, v[:, 0], v[:, 1], v[:, 2]).phi11 > 0)


@settings(max_examples=200, deadline=None)
@given(stretch, stretch, stretch)
def test_permutation_invariance(a, b, c):
    m = paper_model()
    base = m.density(0.4, a, b, c)
    for perm in [(a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]:
        assert abs(m.density(0.4, *perm) - base) <= 1e-14 * max(1.0, abs(base))


@settings(max_examples=200, deadline=None)
@given(stretch, stretch)
def test_baker_ericksen(v1, v2):
    m = paper_model()
    if abs(v1 - v2) < 1e-9:
        return
    pt = m.partials(0.5, v1, v2, 1.3)
    assert (v1 * pt.phi1 - v2 * pt.phi2) * (v1 - v2) > 0


def test_baker_ericksen_margin_positive(model):
    assert baker_ericksen_margin(model) > 0


def test_h_min_argument(model):
    d0 = h_min_argument(model.vol)
    assert_allclose(d0, 1.5**0.25, rtol=1e-15)
    assert_allclose(d0 ** (1 / 3), 1.0344, atol=5e-5)
    assert abs(model.vol.d1(d0)) <= 1e-10
    grid = np.geomspace(1e-2, 1e2, 2001)
    assert np.all(model.vol.value(d0) <= model.vol.value(grid) + 1e-15)
    assert np.all(model.vol.d1(grid[grid < d0]) < 0)


def test_h_min_argument_independent_minimiser(model):
    from scipy.optimize import minimize_scalar

    res = minimize_scalar(model.vol.value, bounds=(0.5, 2.0), method="bounded",
                          options={"xatol": 1e-12})
    assert_allclose(h_min_argument(model.vol), res.x, atol=1e-7)


def test_h_min_argument_symmetric_case():
    assert_allclose(h_min_argument(VolumetricTerm(2.0, 2.0, 3.0, 3.0)), 1.0, rtol=1e-15)


def test_h_min_argument_needs_C():
    with pytest.raises(InvalidParameterError):
        h_min_argument(VolumetricTerm(0.0, 1.0, 2.0, 2.0))


def test_growth_report_default_passes(model):
    report = validate_growth(model)
    for name in ("H1", "H2", "H3", "H4", "convex_phi", "convex_h"):
        assert report[name].passed, report[name].detail
    assert report["derivative_bound"].passed is None
    assert report.passed


def test_growth_report_flags_D_zero():
    m = PowerLawModel(2.0, 1.0, VolumetricTerm(1.0, 0.0, 2.0, 2.0))
    assert validate_growth(m)["H3"].passed is False


def test_growth_report_flags_linear_phi():
    m = PowerLawModel(1.0, 1.0, VolumetricTerm(1.0, 2.0, 2.0, 2.0))
    assert validate_growth(m)["H1"].passed is False


def test_offset_shifts_density_only():
    base = paper_model()
    shifted = PowerLawModel(base.p, base.kappa, base.vol, offset=-4.0)
    assert_allclose(shifted.density(0.5, 1.0, 1.0, 1.0), 0.0, atol=1e-15)
    assert_allclose(shifted.partials(0.5, 1.3, 0.9).phi1, base.partials(0.5, 1.3, 0.9).phi1)


def test_radial_energy_terms_fast_path(model):
    rng = np.random.default_rng(11)
    v1, v2 = rng.uniform(0.2, 4.0, size=(2, 50))
    phi, p1, p2 = model.radial_energy_terms(0.5, v1, v2)
    generic = PowerLawModel(2.0 + 0.0, 1.0, VolumetricTerm(1.0, 1.5, 2.0, 2.0))
    assert_allclose(phi, generic.density(0.5, v1, v2), rtol=1e-14)
    pt = generic.partials(0.5, v1, v2)
    assert_allclose(p1, pt.phi1, rtol=1e-12, atol=1e-12)
    assert_allclose(p2, pt.phi2, rtol=1e-12, atol=1e-12)


def inhomogeneous():
    R = np.linspace(0, 1, 11)
    return InhomogeneousModel(
        alpha=WeightFunction(1.5 - 0.5 * R),
        phi_fn=PowerTerm(0.5, 2.0),
        vol=VolumetricTerm(1.0, 1.5, 2.0, 2.0),
        gamma_w=WeightFunction(1.0 + 0.3 * R**2),
        beta=WeightFunction(0.8 + 0.2 * R),
        psi_fn=PowerTerm(0.25, 2.0),
    )


def test_inhomogeneous_partials_match_finite_differences():
    m = inhomogeneous()
    rng = np.random.default_rng(5)
    for R, *v in rng.uniform([0.05, 0.3, 0.3, 0.3], [0.95, 3.0, 3.0, 3.0], size=(40, 4)):
        pt = m.partials(R, *v)
        for name, approx in fd_partials(m, *v, R=R).items():
            exact = getattr(pt, name)
            assert abs(exact - approx) <= 1e-5 * max(abs(exact), 1.0), name
        h = 1e-6
        fd_R = (m.partials(R + h, *v).phi1 - m.partials(R - h, *v).phi1) / (2 * h)
        assert abs(pt.phi1R - fd_R) <= 1e-5 * max(abs(fd_R), 1.0)


def test_inhomogeneous_isotropic_at_fixed_R():
    m = inhomogeneous()
    a, b, c = 0.7, 1.9, 1.2
    vals = [m.density(0.3, *p) for p in [(a, b, c), (c, a, b), (b, c, a), (b, a, c)]]
    assert_allclose(vals, vals[0], rtol=1e-14)


def test_inhomogeneous_comparison_and_weights():
    m = inhomogeneous()
    assert not m.is_homogeneous
    cmp = m.comparison()
    assert cmp.is_homogeneous
    assert_allclose(m.comparison_density(1, 1, 1), cmp.density(0.0, 1, 1, 1))
    with pytest.raises(InvalidParameterError):
        WeightFunction([1.0, -0.5])
    w = WeightFunction([2.0], derivative=lambda R: 0.0 * R + 1.0)
    assert w.deriv(0.3) == 1.0


def test_model_parameter_validation():
    with pytest.raises(InvalidParameterError):
        PowerLawModel(2.0, -1.0, VolumetricTerm(1, 1, 2, 2))
    with pytest.raises(InvalidParameterError):
        VolumetricTerm(-1.0, 1.0, 2.0, 2.0)
    with pytest.raises(InvalidParameterError):
        VolumetricTerm(1.0, 1.0, 0.0, 2.0)


def test_density_nonnegative_on_samples(model):
    rng = np.random.default_rng(2)
    v = rng.uniform(0.2, 5.0, size=(200, 3))
    assert np.all(model.density(0.5, v[:, 0], v[:, 1], v[:, 2]) >= 0)
    assert math.isfinite(energy_density(model, 0.0, (0.3, 3.0, 2.0)))
