import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from gravcav.energy_model import PowerLawModel
from gravcav.errors import DomainError, GridError
from gravcav.radial_field import (
    Mesh,
    RadialField,
    affine_map,
    best_comparison_map,
    canonical_grid,
    cauchy_stress,
    constant_det_map,
    el_residual,
    field_from_csv,
    incompressible_map,
    mechanical_energy,
    total_energy,
)


def test_canonical_grid_shape():
    g = canonical_grid()
    h = np.diff(g)
    assert g.size == 2001 and g[0] == 1e-3 and g[-1] == 1.0
    assert np.all(h > 0)
    assert_allclose(h[0] / h[-1], 1e-3, rtol=1e-9)
    assert_allclose(h[1:] / h[:-1], h[1] / h[0], rtol=1e-9)


def test_canonical_grid_errors():
    with pytest.raises(GridError):
        canonical_grid(1.0)
    with pytest.raises(GridError):
        canonical_grid(0.1, 1)
    with pytest.raises(GridError):
        Mesh([0.0, 0.5, 0.5, 1.0])
    with pytest.raises(GridError):
        Mesh([0.0, 0.5, 0.9])


def test_field_invariants():
    g = canonical_grid(0.1, 11, 1.0)
    with pytest.raises(DomainError):
        RadialField(g, np.r_[g[:5], g[5:][::-1]])
    with pytest.raises(GridError):
        RadialField(g, g[:-1])


def test_affine_map():
    g = canonical_grid()
    f = affine_map(1.2, g)
    assert_allclose(f(0.5), 0.6, rtol=1e-15)
    st = f.strains()
    assert_allclose(st.v1, 1.2, rtol=1e-14)
    assert_allclose(st.v2, 1.2, rtol=1e-14)
    assert_allclose(affine_map(1.0, g).strains().det, 1.0, rtol=1e-14)
    with pytest.raises(DomainError):
        affine_map(0.0, g)


def test_affine_density_constant_in_R(model):
    f = affine_map(1.1, canonical_grid())
    q = f.quadrature()
    phi = model.density(q.R, q.v1, q.r / q.R)
    assert_allclose(phi, phi.flat[0], rtol=1e-13)


def test_incompressible_map():
    g = canonical_grid()
    f = incompressible_map(1.15, g)
    assert_allclose(f.cavity, np.cbrt(g[0] ** 3 + 0.520875), rtol=1e-14)
    assert_allclose(incompressible_map(1.15, canonical_grid(0.0, 11, 1.0)).cavity,
                    0.80460, atol=5e-6)
    assert_allclose(f.strains().det, 1.0, rtol=1e-10)
    assert_allclose(incompressible_map(1.0, g).values, g)
    with pytest.raises(DomainError, match="lambda >= 1"):
        incompressible_map(0.95, g)


def test_constant_det_family_endpoints():
    g = canonical_grid()
    assert_allclose(constant_det_map(1.15, 0.0, g).values, affine_map(1.15, g).values, rtol=1e-14)
    c = (1.15**3 - 1) ** (1 / 3)
    assert_allclose(constant_det_map(1.15, c, g).values, incompressible_map(1.15, g).values,
                    rtol=1e-12)


def test_best_comparison_map_beats_endpoints(model, unit_density):
    g = canonical_grid()
    best = best_comparison_map(model, unit_density, 1.15, g)
    e = total_energy(model, unit_density, best)
    assert e <= total_energy(model, unit_density, affine_map(1.15, g))
    assert e <= total_energy(model, unit_density, incompressible_map(1.15, g))


def test_mechanical_energy_identity(model):
    f = affine_map(1.0, canonical_grid(0.0, 101, 1.0))
    assert_allclose(mechanical_energy(model, f), 4 / 3, rtol=1e-13)


def test_mechanical_energy_affine_above_identity(model):
    g = canonical_grid()
    e = mechanical_energy(model, affine_map(1.15, g))
    # Phi(1.15, 1.15, 1.15) / 3 on [eps, 1]
    d = 1.15**3
    exact = (1.5 * 1.15**2 + d**2 + 1.5 / d**2) * (1 - 1e-9) / 3
    assert_allclose(e, exact, rtol=1e-12)
    assert e > mechanical_energy(model, affine_map(1.0, g))


def test_shifted_model_zero_energy(model):
    shifted = PowerLawModel(model.p, model.kappa, model.vol, offset=-4.0)
    f = affine_map(1.0, canonical_grid(0.0, 51, 1.0))
    assert abs(mechanical_energy(shifted, f)) <= 1e-14


def test_total_energy_identity(model, unit_density):
    f = affine_map(1.0, canonical_grid(0.0, 2001, 1.0))
    assert_allclose(total_energy(model, unit_density, f), 4 / 3 - 4 * math.pi / 15, atol=1e-9)


def test_cauchy_stress(model):
    g = canonical_grid()
    assert_allclose(cauchy_stress(model, affine_map(1.0, g), g[1:]), 0.0, atol=1e-14)
    lam = 1.1
    T = cauchy_stress(model, affine_map(lam, g), np.linspace(0.01, 1, 7))
    expect = model.partials(0.5, lam, lam).phi1 / lam**2
    assert_allclose(T, expect, rtol=1e-13)
    with pytest.raises(DomainError):
        cauchy_stress(model, affine_map(1.0, canonical_grid(0.0, 11, 1.0)), 0.0)


def test_el_residual_identity_without_gravity(model, no_gravity):
    f = affine_map(1.0, canonical_grid())
    assert el_residual(model, no_gravity, f) <= 1e-10


def test_el_residual_affine_is_not_equilibrium(model, unit_density):
    f = affine_map(1.15, canonical_grid())
    euclid = el_residual(model, unit_density, f)
    dual = el_residual(model, unit_density, f, norm="dual")
    assert euclid > 1e-2
    assert dual > 1e-1
    with pytest.raises(ValueError):
        el_residual(model, unit_density, f, norm="max")


def test_csv_round_trip(tmp_path, model):
    g = canonical_grid(1e-3, 201)
    f = constant_det_map(1.15, 0.4, g)
    path = tmp_path / "f.csv"
    f.to_csv(path, model)
    assert path.read_text().splitlines()[0] == "R,r,dr,T,det"
    back = field_from_csv(path)
    assert np.array_equal(back.nodes, f.nodes)
    assert np.array_equal(back.values, f.values)
    assert np.array_equal(back.slopes, f.slopes)


def test_derivative_and_resample():
    g = canonical_grid(0.0, 11, 1.0)
    f = RadialField(g, g**2 + 0.1)
    assert_allclose(f.derivative(0.05), 0.1, rtol=1e-12)
    s = f.nodal_slopes()
    assert_allclose(s[1:-1], 2 * g[1:-1], rtol=1e-12)
    r2 = f.resample(canonical_grid(0.0, 21, 1.0))
    assert_allclose(r2(g), f(g))
    assert f.sup_distance(r2) <= 1e-15


def test_det_positive_for_admitted_fields(model, unit_density):
    g = canonical_grid()
    for f in (affine_map(0.9, g), incompressible_map(1.2, g), constant_det_map(1.1, 0.3, g),
              best_comparison_map(model, unit_density, 1.05, g)):
        assert np.all(f.strains().det > 0)
