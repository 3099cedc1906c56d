"""Discretised radial deformations and the energy functionals.

A radial deformation u(x) = r(R) x/R is represented by nodal values of r on a
strictly increasing grid ``eps = R_0 < ... < R_N = 1`` and interpolated
piecewise linearly, so r' is constant on each element.  Energies use
composite two-point Gauss quadrature on the elements; the same quadrature
assembles the weak form of the Euler-Lagrange equation, so the assembled
load is the exact gradient of the discrete energy.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded
from scipy.optimize import minimize_scalar

from .errors import DomainError, GridError
from .gravity import potential_energy

__all__ = [
    "canonical_grid",
    "Mesh",
    "Quadrature",
    "RadialField",
    "StrainSample",
    "affine_map",
    "incompressible_map",
    "constant_det_map",
    "best_comparison_map",
    "mechanical_energy",
    "total_energy",
    "cauchy_stress",
    "el_residual",
    "field_from_csv",
]

_GAUSS_X = np.array([-1.0, 1.0]) / math.sqrt(3.0)
_LEFT = 0.5 * (1.0 - _GAUSS_X)  # left hat value at the two Gauss points
_RIGHT = 1.0 - _LEFT


def canonical_grid(epsilon=1e-3, n_nodes=2001, ratio=1e-3):
    """Nodes on [epsilon, 1] clustered geometrically toward epsilon.

    Consecutive intervals grow by a constant factor so that the first one
    is ``ratio`` times the last.  ``ratio=1`` gives a uniform grid.
    """
    if not 0.0 <= epsilon < 1.0:
        raise GridError("epsilon must lie in [0, 1)")
    if n_nodes < 2:
        raise GridError("a grid needs at least two nodes")
    m = n_nodes - 1
    if m == 1 or ratio == 1.0:
        widths = np.ones(m)
    else:
        q = ratio ** (-1.0 / (m - 1))
        widths = q ** np.arange(m)
    widths *= (1.0 - epsilon) / widths.sum()
    nodes = np.empty(n_nodes)
    nodes[0] = epsilon
    nodes[1:] = epsilon + np.cumsum(widths)
    nodes[-1] = 1.0
    return nodes


@dataclass(frozen=True)
class Quadrature:
    """Gauss data of a field: points R, weights w, values r and slope v1 per point."""

    R: np.ndarray
    w: np.ndarray
    r: np.ndarray
    v1: np.ndarray


class Mesh:
    """Element geometry and Gauss points for a node grid."""

    def __init__(self, nodes):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise GridError("grid must be a 1-D array with at least two nodes")
        if np.any(np.diff(nodes) <= 0):
            raise GridError("grid nodes must be strictly increasing")
        if nodes[0] < 0 or nodes[-1] != 1.0:
            raise GridError("grid must start at epsilon >= 0 and end at R = 1")
        self.nodes = nodes
        self.h = np.diff(nodes)
        mid = 0.5 * (nodes[1:] + nodes[:-1])
        self.Rq = mid[:, None] + 0.5 * self.h[:, None] * _GAUSS_X[None, :]
        self.wq = np.repeat(0.5 * self.h[:, None], 2, axis=1)
        self.Rq2 = self.Rq**2

    @property
    def n_nodes(self):
        return self.nodes.size

    def interpolate(self, r):
        """Values of the piecewise-linear interpolant of ``r`` at the Gauss points."""
        return r[:-1, None] * _LEFT + r[1:, None] * _RIGHT

    def slopes(self, r):
        return np.diff(r) / self.h

    def energy_terms(self, model, profile, r):
        """Per-point integrand pieces: (v1, rq, Phi, phi1, phi2, rho*M)."""
        v1 = self.slopes(r)[:, None]
        rq = self.interpolate(r)
        v2 = rq / self.Rq
        phi, p1, p2 = model.radial_energy_terms(self.Rq, v1, v2)
        rhoM = self._rho_mass(profile)
        return v1, rq, phi, p1, p2, rhoM

    def _rho_mass(self, profile):
        key = id(profile)
        cache = self.__dict__.setdefault("_rhoM_cache", {})
        hit = cache.get(key)
        if hit is None or hit[0] is not profile:
            hit = (profile, profile.rho(self.Rq) * profile.mass(self.Rq))
            cache.clear()
            cache[key] = hit
        return hit[1]

    def energy(self, model, profile, r):
        v1, rq, phi, _, _, rhoM = self.energy_terms(model, profile, r)
        return float(np.sum(self.wq * (phi - rhoM / rq) * self.Rq2))

    def energy_and_load(self, model, profile, r):
        """Discrete energy and its gradient with respect to the nodal values.

        The gradient is the weak-form load

            F_j = int R^2 phi1 v_j' + (2 R phi2 + R^2 rho0 M_R / r^2) v_j dR

        against each hat function v_j, including the Dirichlet node R = 1.
        """
        v1, rq, phi, p1, p2, rhoM = self.energy_terms(model, profile, r)
        w, R, R2 = self.wq, self.Rq, self.Rq2
        energy = float(np.sum(w * (phi - rhoM / rq) * R2))
        a = np.sum(w * R2 * p1, axis=1) / self.h
        b = w * (2.0 * R * p2 + R2 * rhoM / rq**2)
        bl = b @ _LEFT
        br = b @ _RIGHT
        load = np.zeros_like(r)
        load[:-1] += bl - a
        load[1:] += br + a
        return energy, load

    @cached_property
    def stiffness_factor(self):
        """Banded Cholesky factor of int z' v' dR on the free nodes (all but R = 1)."""
        n = self.n_nodes - 1
        inv_h = 1.0 / self.h
        diag = inv_h.copy()
        diag[1:] += inv_h[:-1]
        ab = np.zeros((2, n))
        ab[1] = diag
        ab[0, 1:] = -inv_h[:-1]
        return cholesky_banded(ab)

    def solve_stiffness(self, rhs):
        return cho_solve_banded((self.stiffness_factor, False), rhs)

    def stiffness_apply(self, z):
        """int z' v_j' dR for every free hat v_j (z given on the free nodes, z(1) = 0)."""
        full = np.append(z, 0.0)
        g = np.diff(full) / self.h
        out = np.zeros_like(z)
        out -= g
        out[1:] += g[:-1]
        return out


@dataclass(frozen=True)
class StrainSample:
    R: np.ndarray
    v1: np.ndarray
    v2: np.ndarray

    @property
    def det(self):
        return self.v1 * self.v2**2


@dataclass(frozen=True, eq=False)
class RadialField:
    """Nodal values of r(R) on a node grid, linearly interpolated.

    ``slopes`` optionally carries nodal values of r' (available when the
    field comes from the ODE integrator); it is used for nodal strain and
    stress output, never for energies.
    """

    nodes: np.ndarray
    values: np.ndarray
    slopes: np.ndarray | None = None

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        values = np.array(self.values, dtype=float)
        if nodes.shape != values.shape:
            raise GridError("nodes and values must have the same shape")
        mesh = Mesh(nodes)
        if np.any(np.diff(values) <= 0):
            raise DomainError("r must be strictly increasing")
        if values[0] < 0 or (values[0] == 0 and nodes[0] > 0):
            raise DomainError("r must be positive away from R = 0")
        nodes.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mesh", mesh)
        if self.slopes is not None:
            s = np.array(self.slopes, dtype=float)
            if s.shape != nodes.shape:
                raise GridError("slopes must match the node grid")
            s.flags.writeable = False
            object.__setattr__(self, "slopes", s)

    @property
    def epsilon(self):
        return float(self.nodes[0])

    @property
    def lam(self):
        return float(self.values[-1])

    @property
    def cavity(self):
        """r at the inner cutoff, reported as the cavity value."""
        return float(self.values[0])

    def __call__(self, R):
        return np.interp(R, self.nodes, self.values)

    def element_slopes(self):
        return self.mesh.slopes(self.values)

    def derivative(self, R):
        """r'(R): nodal slopes interpolated if known, else the element slope."""
        R = np.asarray(R, dtype=float)
        if self.slopes is not None:
            return np.interp(R, self.nodes, self.slopes)
        idx = np.clip(np.searchsorted(self.nodes, R, side="right") - 1, 0, self.nodes.size - 2)
        return self.element_slopes()[idx]

    def nodal_slopes(self):
        if self.slopes is not None:
            return np.array(self.slopes)
        s = self.element_slopes()
        out = np.empty_like(self.values)
        out[0], out[-1] = s[0], s[-1]
        hl, hr = self.mesh.h[:-1], self.mesh.h[1:]
        out[1:-1] = (s[:-1] * hr + s[1:] * hl) / (hl + hr)
        return out

    def quadrature(self):
        m = self.mesh
        return Quadrature(m.Rq, m.wq, m.interpolate(self.values),
                          np.broadcast_to(m.slopes(self.values)[:, None], m.Rq.shape))

    def strains(self):
        """Nodal strains (r', r/R); at R = 0 the hoop stretch is taken as r'(0)."""
        v1 = self.nodal_slopes()
        with np.errstate(divide="ignore", invalid="ignore"):
            v2 = np.where(self.nodes > 0, self.values / np.where(self.nodes > 0, self.nodes, 1.0), v1)
        return StrainSample(self.nodes, v1, v2)

    def sup_distance(self, other):
        """max |r_a - r_b| over the union of both node sets."""
        pts = np.union1d(self.nodes, other.nodes)
        lo = max(self.epsilon, other.epsilon)
        pts = pts[pts >= lo]
        return float(np.max(np.abs(self(pts) - other(pts))))

    def resample(self, nodes):
        """Interpolate onto another grid (monotone linear interpolation)."""
        nodes = np.asarray(nodes, dtype=float)
        slopes = None if self.slopes is None else np.interp(nodes, self.nodes, self.slopes)
        return RadialField(nodes, self(nodes), slopes)

    def to_csv(self, path, model):
        """Write ``R,r,dr,T,det`` rows with 17 significant digits."""
        st = self.strains()
        with np.errstate(divide="ignore", invalid="ignore"):
            T = _nodal_stress(model, self, st)
        with open(Path(path), "w", newline="") as fh:
            fh.write("R,r,dr,T,det\n")
            for row in zip(self.nodes, self.values, st.v1, T, st.det):
                fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def _nodal_stress(model, field, st):
    R, r = field.nodes, field.values
    p1 = model.radial_partials(R, st.v1, st.v2)[0]
    p1 = np.broadcast_to(p1, R.shape)
    out = np.where(r > 0, R**2 / np.where(r > 0, r, 1.0) ** 2 * p1, np.nan)
    return out


def field_from_csv(path):
    """Read a field written by :meth:`RadialField.to_csv`."""
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or reader.fieldnames[:3] != ["R", "r", "dr"]:
            raise ValueError(f"{path}: expected header R,r,dr,T,det")
        rows = [(float(x["R"]), float(x["r"]), float(x["dr"])) for x in reader]
    R, r, dr = np.array(rows).T
    return RadialField(R, r, dr)


def _check_lambda(lam):
    if not lam > 0:
        raise DomainError("lambda must be positive")


def affine_map(lam, grid):
    """r(R) = lambda R."""
    _check_lambda(lam)
    grid = np.asarray(grid, dtype=float)
    return RadialField(grid, lam * grid, np.full_like(grid, lam))


def incompressible_map(lam, grid):
    """r(R) = (R^3 + lambda^3 - 1)^(1/3), the volume-preserving comparison map."""
    _check_lambda(lam)
    if lam < 1.0:
        raise DomainError(
            f"incompressible map needs lambda >= 1 (lambda = {lam}): "
            "R^3 + lambda^3 - 1 is negative near R = 0"
        )
    grid = np.asarray(grid, dtype=float)
    if lam == 1.0:
        return RadialField(grid, grid.copy(), np.ones_like(grid))
    r = np.cbrt(grid**3 + lam**3 - 1.0)
    return RadialField(grid, r, grid**2 / r**2)


def constant_det_map(lam, cavity, grid):
    """r^3 = c^3 + (lambda^3 - c^3) R^3: constant determinant lambda^3 - c^3.

    c = 0 gives the affine map and c^3 = lambda^3 - 1 the incompressible one.
    """
    _check_lambda(lam)
    if not 0.0 <= cavity < lam:
        raise DomainError("cavity must lie in [0, lambda)")
    grid = np.asarray(grid, dtype=float)
    c3 = cavity**3
    det = lam**3 - c3
    r = np.cbrt(c3 + det * grid**3)
    with np.errstate(divide="ignore", invalid="ignore"):
        slopes = np.where(r > 0, det * grid**2 / np.where(r > 0, r, 1.0) ** 2, lam)
    return RadialField(grid, r, slopes)


def best_comparison_map(model, profile, lam, grid, xatol=1e-10):
    """Lowest-energy member of :func:`constant_det_map` for this lambda."""
    _check_lambda(lam)
    mesh = Mesh(grid)

    def energy(c):
        try:
            return mesh.energy(model, profile, constant_det_map(lam, c, grid).values)
        except DomainError:
            return math.inf

    res = minimize_scalar(energy, bounds=(0.0, lam * (1.0 - 1e-9)), method="bounded",
                          options={"xatol": xatol})
    c = float(res.x) if energy(res.x) <= energy(0.0) else 0.0
    return constant_det_map(lam, c, grid)


def mechanical_energy(model, field):
    """I_mec = int Phi(R, r', r/R, r/R) R^2 dR over the field's domain."""
    q = field.quadrature()
    if np.any(q.r <= 0):
        raise DomainError("non-positive r at a quadrature point")
    v2 = q.r / q.R
    return float(np.sum(q.w * model.density(q.R, q.v1, v2, v2) * q.R**2))


def total_energy(model, profile, field):
    """I = I_mec - I_pot."""
    return mechanical_energy(model, field) - potential_energy(profile, field)


def cauchy_stress(model, field, R):
    """Radial Cauchy stress T = (R^2 / r^2) phi1(R, r', r/R, r/R)."""
    R_arr = np.asarray(R, dtype=float)
    r = field(R_arr)
    if np.any(r <= 0) or np.any(R_arr <= 0):
        raise DomainError("Cauchy stress needs R > 0 and r(R) > 0")
    v1 = field.derivative(R_arr)
    pt = model.partials(R_arr, v1, r / R_arr)
    T = R_arr**2 / r**2 * pt.phi1
    return float(T) if np.ndim(T) == 0 else T


def el_residual(model, profile, field, norm="euclidean"):
    """Norm of the weak Euler-Lagrange residual against the free hat functions.

    ``norm="euclidean"`` is the plain 2-norm of the assembled load vector;
    ``norm="dual"`` is the mesh-independent H^1-dual norm sqrt(F . K^-1 F)
    with K the stiffness of int z' v'.
    """
    _, load = field.mesh.energy_and_load(model, profile, np.asarray(field.values))
    F = load[:-1]
    if norm == "euclidean":
        return float(np.linalg.norm(F))
    if norm == "dual":
        return float(math.sqrt(max(F @ field.mesh.solve_stiffness(F), 0.0)))
    raise ValueError(f"unknown norm {norm!r}")
