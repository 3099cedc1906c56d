"""Reference mass distribution and the gravitational self-energy.

Energies follow the convention in which the overall factor 4*pi of the
three-dimensional functional is dropped, and the gravitational constant is
normalised to 1/2.  With that convention the potential part of the energy is

    I_pot(r) = int rho0(R) M_R / r(R) R^2 dR,    M_R = 4 pi int_0^R rho0 u^2 du,

and the full double integral ``V`` over the ball equals ``4 pi I_pot``;
:func:`brute_force_potential` evaluates ``V`` independently of ``M_R``.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import PchipInterpolator

from .errors import ConfigError, DomainError, InvalidParameterError

__all__ = [
    "DensityProfile",
    "MassFunction",
    "mass_within",
    "potential_energy",
    "brute_force_potential",
    "QuadSpec",
]

FOUR_PI_3 = 4.0 * math.pi / 3.0
MASS_GRID_NODES = 4096


class MassFunction:
    """Cumulative mass M_R tabulated on a uniform grid and PCHIP-interpolated."""

    def __init__(self, rho0, n_nodes=MASS_GRID_NODES, gauss_order=4):
        self.grid = np.linspace(0.0, 1.0, n_nodes)
        x, w = leggauss(gauss_order)
        a, b = self.grid[:-1], self.grid[1:]
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        pts = mid[:, None] + half[:, None] * x[None, :]
        cell = 4.0 * math.pi * np.sum(w[None, :] * half[:, None] * rho0(pts) * pts**2, axis=1)
        self.values = np.concatenate([[0.0], np.cumsum(cell)])
        self._interp = PchipInterpolator(self.grid, self.values)

    def __call__(self, R):
        return self._interp(R)


class DensityProfile:
    """Reference mass density rho0(R) with bounds k0 <= rho0 <= k1.

    A zero constant density is accepted; it switches gravity off.
    """

    def __init__(self, rho0, k0=None, k1=None, *, _constant=None):
        self._constant = _constant
        self._fn = rho0
        if _constant is None:
            probe = np.asarray(rho0(np.linspace(0.0, 1.0, 1001)), dtype=float)
            k0 = float(probe.min()) if k0 is None else k0
            k1 = float(probe.max()) if k1 is None else k1
            if np.any(probe < k0 - 1e-12) or np.any(probe > k1 + 1e-12):
                raise InvalidParameterError("density violates the stated bounds k0 <= rho0 <= k1")
            self.mass_function = MassFunction(rho0)
        self.k0 = k0
        self.k1 = k1
        if self.k0 < 0:
            raise InvalidParameterError("density must be nonnegative")

    @classmethod
    def constant(cls, value):
        value = float(value)
        if value < 0:
            raise InvalidParameterError("density must be nonnegative")
        return cls(None, value, value, _constant=value)

    @classmethod
    def from_samples(cls, R, rho):
        R = np.asarray(R, dtype=float)
        rho = np.asarray(rho, dtype=float)
        if R.ndim != 1 or R.shape != rho.shape or R.size < 2:
            raise ConfigError("density samples must be two equal-length 1-D columns")
        if np.any(np.diff(R) <= 0):
            raise ConfigError("density sample radii must be strictly increasing")
        if R[0] > 0 or R[-1] < 1:
            raise ConfigError("density samples must cover [0, 1]")
        interp = PchipInterpolator(R, rho)
        return cls(interp, float(rho.min()), float(rho.max()))

    @classmethod
    def from_csv(cls, path):
        """Read a two-column CSV ``R,rho0`` (a header row is optional)."""
        rows = []
        with open(Path(path), newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except ValueError:
                    if rows:
                        raise ConfigError(f"bad density row {row!r} in {path}")
        if not rows:
            raise ConfigError(f"no density samples in {path}")
        R, rho = np.array(rows).T
        return cls.from_samples(R, rho)

    @property
    def is_constant(self):
        return self._constant is not None

    @property
    def value(self):
        """The constant density (only for constant profiles)."""
        return self._constant

    def rho(self, R):
        if self._constant is not None:
            return self._constant if np.ndim(R) == 0 else np.full(np.shape(R), self._constant)
        return self._fn(R)

    __call__ = rho

    def mass(self, R):
        """M_R without domain checking (hot path)."""
        if self._constant is not None:
            return FOUR_PI_3 * self._constant * R**3
        return self.mass_function(R)

    def __repr__(self):
        if self._constant is not None:
            return f"DensityProfile.constant({self._constant!r})"
        return f"DensityProfile(k0={self.k0:.4g}, k1={self.k1:.4g})"


def mass_within(profile, R):
    """M_R = 4 pi int_0^R rho0(u) u^2 du for R in [0, 1]."""
    R_arr = np.asarray(R, dtype=float)
    if np.any(R_arr < 0) or np.any(R_arr > 1):
        raise DomainError("mass_within needs R in [0, 1]")
    out = profile.mass(R_arr)
    return float(out) if np.ndim(out) == 0 else out


def potential_energy(profile, field):
    """I_pot(r) by composite two-point Gauss quadrature over the field's elements."""
    q = field.quadrature()
    if np.any(q.r <= 0):
        raise DomainError("potential energy needs r > 0 at every quadrature point")
    Rq = q.R
    integrand = profile.rho(Rq) * profile.mass(Rq) / q.r * Rq**2
    return float(np.sum(q.w * integrand))


class QuadSpec:
    """Node counts for the (R, U) double quadrature of the brute-force oracle."""

    def __init__(self, n_outer=2000, n_inner=2000, chunk=200):
        self.n_outer = int(n_outer)
        self.n_inner = int(n_inner)
        self.chunk = int(chunk)


def brute_force_potential(profile, field, quad_spec=None):
    """Self-energy V from the reduced double integral, without using M_R.

    Evaluates

        2V = 4 pi int rho0(R) R^2 [ 2 pi int rho0(U) U^2 / (r(R) r(U))
                                     (r(R) + r(U) - |r(R) - r(U)|) dU ] dR

    over the field's domain, with the inner integral split at U = R so that
    each piece has a smooth integrand.  Returns V; ``V / (4 pi)`` should
    agree with :func:`potential_energy`.
    """
    qs = quad_spec or QuadSpec()
    a = float(field.nodes[0])
    vals = np.asarray(field.values)
    if np.any(vals[1:] <= 0) or vals[0] < 0 or (vals[0] == 0 and a > 0):
        raise DomainError("brute-force potential needs a strictly positive field")

    xo, wo = leggauss(qs.n_outer)
    xi, wi = leggauss(qs.n_inner)
    R = a + (1.0 - a) * 0.5 * (xo + 1.0)
    wR = 0.5 * (1.0 - a) * wo
    rR = field(R)
    rhoR = profile.rho(R)

    inner = np.empty_like(R)
    for s in range(0, R.size, qs.chunk):
        Rc = R[s:s + qs.chunk, None]
        rc = rR[s:s + qs.chunk, None]
        # U in [a, R]
        lo_half = 0.5 * (Rc - a)
        U1 = a + lo_half * (xi[None, :] + 1.0)
        r1 = field(U1)
        k1 = profile.rho(U1) * U1**2 / (rc * r1) * (rc + r1 - np.abs(rc - r1))
        # U in [R, 1]
        hi_half = 0.5 * (1.0 - Rc)
        U2 = Rc + hi_half * (xi[None, :] + 1.0)
        r2 = field(U2)
        k2 = profile.rho(U2) * U2**2 / (rc * r2) * (rc + r2 - np.abs(rc - r2))
        inner[s:s + qs.chunk] = (
            lo_half[:, 0] * (k1 @ wi) + hi_half[:, 0] * (k2 @ wi)
        )
    two_V = 4.0 * math.pi * np.sum(wR * rhoR * R**2 * 2.0 * math.pi * inner)
    return float(0.5 * two_V)
