"""H^1 gradient flow for the radial energy.

Each step solves the finite-element problem

    int z' v' dR = -int [R^2 phi1 v' + (2 R phi2 + R^2 rho0 M_R / r^2) v] dR

for all hat functions v vanishing at R = 1 and updates r <- r + dt z.  The
left end R = eps carries the natural (zero-flux) condition, so z(eps) is
free.  The right-hand side is the exact gradient of the discrete energy, so
for small dt every step decreases it; backtracking enforces this.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .errors import DomainError, GridError, InvalidParameterError
from .radial_field import Mesh, RadialField, affine_map, canonical_grid

__all__ = ["FlowConfig", "FlowState", "FlowResult", "flow_step", "flow_minimize"]

log = logging.getLogger(__name__)


@dataclass
class FlowConfig:
    """Flow parameters.

    ``init`` defaults to the affine map r = lam R on ``grid``.  ``dt`` is
    halved on rejected steps and doubled after ``grow_after`` consecutive
    accepted ones, never above ``dt_max``.
    """

    lam: float
    grid: np.ndarray = None
    dt: float = 1e-3
    max_steps: int = 20_000
    stop_tol: float = 1e-8
    init: RadialField | None = None
    grow_after: int = 10
    dt_max: float = 1.0
    dt_min: float = 1e-14
    trace_path: str | None = None

    def __post_init__(self):
        if not self.lam > 0:
            raise DomainError("lambda must be positive")
        if self.grid is None:
            self.grid = canonical_grid() if self.init is None else np.asarray(self.init.nodes)
        self.grid = np.asarray(self.grid, dtype=float)
        if not (self.dt > 0 and self.stop_tol > 0 and self.max_steps >= 0):
            raise InvalidParameterError("dt, stop_tol must be positive and max_steps >= 0")
        if self.init is None:
            self.init = affine_map(self.lam, self.grid)
        elif not np.array_equal(self.init.nodes, self.grid):
            self.init = self.init.resample(self.grid)
        if abs(self.init.lam - self.lam) > 1e-14 * max(1.0, self.lam):
            raise InvalidParameterError("initial field must satisfy r(1) = lambda")


@dataclass
class FlowState:
    """Current iterate of the flow."""

    field: RadialField
    step_index: int = 0
    last_step_norm: float = math.inf
    energy_history: list = dc_field(default_factory=list)
    t: float = 0.0


@dataclass
class FlowResult:
    field: RadialField
    converged: bool
    steps: int
    energy: float
    energy_history: list
    last_step_norm: float
    rejected: int

    @property
    def cavity(self):
        return self.field.cavity


def _check_grid(field, grid):
    if grid is not None and not np.array_equal(np.asarray(grid, dtype=float), field.nodes):
        raise GridError("field is not defined on the given grid")


def flow_step(model, profile, field, grid=None):
    """Flow direction z on the field's nodes (z = 0 at R = 1)."""
    _check_grid(field, grid)
    mesh = field.mesh
    _, load = mesh.energy_and_load(model, profile, np.asarray(field.values))
    z = np.zeros(mesh.n_nodes)
    z[:-1] = -mesh.solve_stiffness(load[:-1])
    return z


def _admissible(r):
    return r[0] >= 0 and np.all(np.diff(r) > 0)


def flow_minimize(model, profile, config):
    """Run the flow from ``config.init`` until the sup-norm step drops below stop_tol.

    Steps that break monotonicity, make r(eps) negative or raise the energy
    by more than 1e-12 |I| are retried with dt halved.  The run counts as
    converged when an accepted step has sup-norm at most ``stop_tol`` and
    was taken either at the nominal dt or after ``grow_after`` steps without
    backtracking, so a collapsed dt cannot fake convergence.
    """
    mesh = Mesh(config.grid)
    r = np.array(config.init.values, dtype=float)
    energy, load = mesh.energy_and_load(model, profile, r)
    history = [energy]
    dt = config.dt
    run = 0
    rejected = 0
    t = 0.0
    step_norm = math.inf
    converged = False
    trace = [(0, 0.0, energy, math.nan)] if config.trace_path else None
    steps = 0
    with np.errstate(all="ignore"):
        while steps < config.max_steps:
            z = -mesh.solve_stiffness(load[:-1])
            backtracked = False
            while True:
                trial = r.copy()
                trial[:-1] += dt * z
                if _admissible(trial):
                    e_new, l_new = mesh.energy_and_load(model, profile, trial)
                    if np.isfinite(e_new) and e_new <= energy + 1e-12 * abs(energy):
                        break
                dt *= 0.5
                rejected += 1
                backtracked = True
                if dt < config.dt_min:
                    log.warning("flow step size underflow after %d steps", steps)
                    return _finish(r, mesh, energy, history, step_norm, False, steps, rejected, trace, config)
            steps += 1
            t += dt
            step_norm = float(np.max(np.abs(trial - r)))
            r, energy, load = trial, e_new, l_new
            history.append(energy)
            if trace is not None:
                trace.append((steps, t, energy, step_norm))
            run = 0 if backtracked else run + 1
            settled = run >= config.grow_after or (not backtracked and dt >= config.dt)
            if step_norm <= config.stop_tol and settled:
                converged = True
                break
            if run and run % config.grow_after == 0:
                dt = min(2.0 * dt, config.dt_max)
    return _finish(r, mesh, energy, history, step_norm, converged, steps, rejected, trace, config)


def _finish(r, mesh, energy, history, step_norm, converged, steps, rejected, trace, config):
    if trace is not None:
        _write_trace(config.trace_path, trace)
    field = RadialField(mesh.nodes, r)
    return FlowResult(field, converged, steps, energy, history, step_norm, rejected)


def _write_trace(path, rows):
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "t", "energy", "step_norm"])
        for s, t, e, n in rows:
            w.writerow([s, f"{t:.17g}", f"{e:.17g}", f"{n:.17g}"])
