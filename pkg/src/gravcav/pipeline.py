"""Solve orchestration: hybrid flow/shooting solves, sweeps over (lambda, rho0),
critical-displacement search, oracle and validation reports, file output.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .config import SolverConfig
from .energy_model import (
    baker_ericksen_margin,
    h_min_argument,
    identity_residual,
    is_beta_free_form,
    validate_growth,
)
from .errors import AmbiguityError, DomainError, SolverError
from .flow import FlowConfig, flow_minimize
from .gravity import DensityProfile, QuadSpec, brute_force_potential, potential_energy
from .radial_field import (
    best_comparison_map,
    canonical_grid,
    el_residual,
    total_energy,
)
from .shooting import solve_shooting

__all__ = [
    "SweepRecord",
    "SolveOutcome",
    "solve",
    "sweep",
    "CriticalResult",
    "find_critical_lambda",
    "OracleReport",
    "oracle_check",
    "validate",
    "write_records",
    "emit_plots",
    "RECORD_HEADER",
]

log = logging.getLogger(__name__)

RECORD_HEADER = ["lambda", "rho0", "cavity", "energy", "nu", "status", "method", "wall_time_s"]


@dataclass
class SweepRecord:
    lam: float
    rho0: float
    cavity: float
    energy: float
    nu: float
    status: str
    method: str
    wall_time: float = 0.0

    def row(self):
        return [
            f"{self.lam:.17g}", f"{self.rho0:.17g}", f"{self.cavity:.17g}",
            f"{self.energy:.17g}", f"{self.nu:.17g}", self.status, self.method,
            f"{self.wall_time:.3f}",
        ]


@dataclass
class SolveOutcome:
    record: SweepRecord
    field: object
    epsilon: float
    flow_energy: float = math.nan
    shoot_energy: float = math.nan
    sup_distance: float = math.nan
    flow_converged: bool | None = None
    residual: float = math.nan
    notes: list = dc_field(default_factory=list)
    diagnostics: dict = dc_field(default_factory=dict)

    @property
    def converged(self):
        return self.record.status in ("converged", "flagged")


def _profile_rho(profile):
    return profile.value if profile.is_constant else math.nan


def solve(model, profile, lam, solver=None, *, warm_nu=None, trace_path=None):
    """Run one solve with the method in ``solver`` (default hybrid).

    hybrid: a gradient flow started from the lowest-energy constant-
    determinant comparison map predicts the field, and the shooting solver
    corrects it, seeded with nu0 = lam (or ``warm_nu``) and nu1 = the
    predictor's outer slope.  Returns the shooting field when it converges,
    else the flow field with status ``flow_only``.
    """
    cfg = solver or SolverConfig()
    if not lam > 0:
        raise DomainError("lambda must be positive")
    t0 = time.perf_counter()
    grid = canonical_grid(cfg.epsilon, cfg.n_nodes, cfg.grid_ratio)
    out = SolveOutcome(None, None, cfg.epsilon)
    flow_res = shoot_res = None

    if cfg.method in ("hybrid", "flow"):
        init = best_comparison_map(model, profile, lam, grid)
        fcfg = FlowConfig(lam, grid, dt=cfg.flow_dt, max_steps=cfg.flow_max_steps,
                          stop_tol=cfg.flow_stop_tol, init=init, trace_path=trace_path)
        flow_res = flow_minimize(model, profile, fcfg)
        out.flow_energy = flow_res.energy
        out.flow_converged = flow_res.converged

    if cfg.method in ("hybrid", "shoot"):
        nu0 = warm_nu if warm_nu is not None else lam
        if flow_res is not None:
            nu1 = float(flow_res.field.element_slopes()[-1])
        else:
            nu1 = 0.5 * lam if warm_nu is None else lam
        if nu1 == nu0:
            nu1 = nu0 * (1.0 - 1e-3)
        try:
            shoot_res = solve_shooting(model, profile, lam, cfg.epsilon, (nu0, nu1), cfg.tol,
                                       rtol=cfg.rtol, atol=cfg.atol, max_iter=cfg.max_iter, grid=grid)
        except SolverError as exc:
            out.diagnostics["shooting_error"] = str(exc)
        if shoot_res is not None:
            out.diagnostics["shooting_status"] = shoot_res.status
            out.diagnostics["shooting_iterations"] = shoot_res.iterations
            if shoot_res.converged:
                out.shoot_energy = total_energy(model, profile, shoot_res.field)

    if shoot_res is not None and shoot_res.converged:
        fld, nu, status, energy = shoot_res.field, shoot_res.nu_star, "converged", out.shoot_energy
        out.residual = el_residual(model, profile, fld)
        if flow_res is not None:
            out.sup_distance = fld.sup_distance(flow_res.field)
            gap = abs(out.flow_energy - out.shoot_energy)
            if gap > cfg.consistency_tol or out.sup_distance > cfg.consistency_tol:
                status = "flagged"
                out.notes.append(
                    f"flow/shooting gap: energy {gap:.3g}, sup-distance {out.sup_distance:.3g}"
                )
    elif flow_res is not None:
        fld, status, energy = flow_res.field, "flow_only", flow_res.energy
        nu = float(fld.element_slopes()[-1])
        if cfg.method == "flow":
            status = "converged" if flow_res.converged else "unconverged"
        out.residual = el_residual(model, profile, fld)
    else:
        fld, nu, status, energy = None, math.nan, "failed", math.nan
        if shoot_res is not None:
            status = shoot_res.status
            nu = shoot_res.nu_star

    if fld is not None and fld.cavity < 1e-2 and cfg.method != "shoot":
        out.notes.append(
            "no cavity: the flow's free condition at eps leaves an artificial "
            "boundary layer in the strains near eps"
        )
    out.field = fld
    out.record = SweepRecord(float(lam), _profile_rho(profile),
                             fld.cavity if fld is not None else math.nan,
                             energy, nu, status, cfg.method, time.perf_counter() - t0)
    return out


def _solve_row(args):
    model, rho0, lams, cfg = args
    profile = DensityProfile.constant(rho0)
    out = []
    warm = None
    for lam in lams:
        o = solve(model, profile, lam, cfg, warm_nu=warm)
        if o.converged and o.record.method != "flow":
            warm = o.record.nu
        out.append(o)
    return out


def sweep(model, lambdas, rho0s, solver=None, workers=None):
    """Solve every (lambda, rho0) pair with constant densities.

    Each rho0 row runs sequentially in increasing lambda, warm-starting the
    shooting bracket from the previous nu*; rows run in parallel when
    ``workers`` > 1.  Outcomes are returned in row-major order (rho0
    outer, lambda inner) whatever the execution order.
    """
    cfg = solver or SolverConfig()
    lams = [float(x) for x in lambdas]
    tasks = [(model, float(rho), lams, cfg) for rho in rho0s]
    if workers is None or workers <= 1 or len(tasks) == 1:
        rows = [_solve_row(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_solve_row, tasks))
    return [o for row in rows for o in row]


@dataclass
class CriticalResult:
    lam_c: float
    bracket: tuple
    c_tol: float
    samples: list
    d0_floor: float | None

    @property
    def width(self):
        return self.bracket[1] - self.bracket[0]


def find_critical_lambda(model, profile, lam_lo=1.0, lam_hi=1.2, c_tol=1e-2, tol=1e-3,
                         solver=None, n_scan=5):
    """Bisection for the smallest lambda whose cavity r(eps) reaches c_tol.

    A coarse scan of ``n_scan`` points first checks that the indicator
    cavity >= c_tol switches once from False to True across the bracket;
    otherwise an :class:`AmbiguityError` lists the samples.  For materials of
    the beta = 0 class the theoretical floor d0^(1/3) is recorded.
    """
    cfg = solver or SolverConfig(method="shoot")
    if cfg.method != "shoot":
        cfg = SolverConfig(**{**cfg.__dict__, "method": "shoot"})
    samples = []

    def cavity(lam):
        o = solve(model, profile, lam, cfg)
        if not o.converged:
            raise SolverError(f"solve failed at lambda = {lam}", status=o.record.status,
                              diagnostics={"samples": samples})
        samples.append((float(lam), o.record.cavity))
        return o.record.cavity

    scan = np.linspace(lam_lo, lam_hi, max(n_scan, 2))
    flags = [cavity(l) >= c_tol for l in scan]
    if flags[0] or not flags[-1]:
        raise AmbiguityError(
            f"indicator must be False at {lam_lo} and True at {lam_hi}", list(samples))
    switch = [i for i in range(1, len(flags)) if flags[i] != flags[i - 1]]
    if len(switch) != 1:
        raise AmbiguityError("cavity indicator is not monotone across the bracket", list(samples))
    lo, hi = float(scan[switch[0] - 1]), float(scan[switch[0]])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if cavity(mid) >= c_tol:
            hi = mid
        else:
            lo = mid
    floor = None
    if is_beta_free_form(model) and model.vol.C > 0 and model.vol.D > 0:
        floor = h_min_argument(model.vol) ** (1.0 / 3.0)
    return CriticalResult(0.5 * (lo + hi), (lo, hi), c_tol, sorted(samples), floor)


@dataclass
class OracleReport:
    potential: float
    brute_force: float
    abs_error: float
    rel_error: float

    def lines(self):
        return [
            f"I_pot (mass function)      = {self.potential:.12g}",
            f"V/(4 pi) (double integral) = {self.brute_force:.12g}",
            f"absolute error = {self.abs_error:.3e}",
            f"relative error = {self.rel_error:.3e}",
        ]


def oracle_check(profile, field, quad_spec=None):
    """Compare I_pot with the brute-force self-energy V/(4 pi)."""
    ip = potential_energy(profile, field)
    bf = brute_force_potential(profile, field, quad_spec or QuadSpec()) / (4.0 * math.pi)
    err = abs(ip - bf)
    return OracleReport(ip, bf, err, err / abs(ip) if ip else err)


@dataclass
class ValidationReport:
    growth: object
    stress_free: float
    baker_ericksen: float
    derivative_error: float

    @property
    def checks(self):
        extra = [
            ("stress_free", abs(self.stress_free) <= 1e-12, f"phi1(1,1,1) = {self.stress_free:.3g}"),
            ("baker_ericksen", self.baker_ericksen > 0, f"min margin {self.baker_ericksen:.4g}"),
            ("derivatives", self.derivative_error <= 1e-5,
             f"max relative finite-difference error {self.derivative_error:.3g}"),
        ]
        return [(c.name, c.passed, c.detail) for c in self.growth.checks] + extra

    @property
    def passed(self):
        return all(p for _, p, _ in self.checks if p is not None)

    def lines(self):
        lab = {True: "PASS", False: "FAIL", None: "INFO"}
        return [f"{lab[p]:4s} {n}: {d}" for n, p, d in self.checks]


def derivative_error(model, n=100, seed=0, low=0.2, high=5.0):
    """Max relative error of the analytic partials against central differences."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for v1, v2, v3 in rng.uniform(low, high, size=(n, 3)):
        pt = model.partials(0.5, v1, v2, v3)
        h1, h2 = 1e-6 * max(1.0, v1), 1e-6 * max(1.0, v2)
        f = lambda a, b: model.density(0.5, a, b, v3)
        g1 = lambda a, b: model.partials(0.5, a, b, v3).phi1
        fd = {
            "phi1": (f(v1 + h1, v2) - f(v1 - h1, v2)) / (2 * h1),
            "phi2": (f(v1, v2 + h2) - f(v1, v2 - h2)) / (2 * h2),
            "phi11": (g1(v1 + h1, v2) - g1(v1 - h1, v2)) / (2 * h1),
            "phi12": (g1(v1, v2 + h2) - g1(v1, v2 - h2)) / (2 * h2),
        }
        for k, approx in fd.items():
            exact = getattr(pt, k)
            worst = max(worst, abs(exact - approx) / max(abs(exact), 1.0))
    return worst


def validate(model):
    """Aggregate the constitutive checks into one report."""
    return ValidationReport(
        validate_growth(model),
        float(identity_residual(model)),
        baker_ericksen_margin(model),
        derivative_error(model),
    )


def write_records(records, path):
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_HEADER)
        for rec in records:
            w.writerow(rec.row())


def _fmt(x):
    return f"{x:.17g}"


def profile_name(rec):
    return f"profile_{rec.lam:.6g}_{rec.rho0:.6g}.csv"


_SURFACE_SCRIPT = """\
import numpy as np
import matplotlib.pyplot as plt

for name in ("cavity", "energy"):
    data = np.genfromtxt(f"surface_{name}.csv", delimiter=",")
    lam = data[0, 1:]
    rho = data[1:, 0]
    Z = data[1:, 1:]
    L, P = np.meshgrid(lam, rho)
    ax = plt.figure().add_subplot(projection="3d")
    ax.plot_surface(L, P, Z, cmap="viridis")
    ax.set_xlabel("lambda")
    ax.set_ylabel("rho0")
    ax.set_zlabel(name)
    plt.savefig(f"surface_{name}.png", dpi=150)
"""

_PROFILE_SCRIPT = """\
import glob
import numpy as np
import matplotlib.pyplot as plt

for path in sorted(glob.glob("profile_*.csv")):
    d = np.genfromtxt(path, delimiter=",", names=True)
    fig, axes = plt.subplots(2, 2, figsize=(9, 7))
    axes[0, 0].plot(d["R"], d["r"]); axes[0, 0].set_ylabel("r")
    axes[0, 1].plot(d["R"], d["dr"]); axes[0, 1].set_ylabel("r'")
    axes[1, 0].plot(d["R"], d["det"]); axes[1, 0].set_ylabel("det")
    axes[1, 1].plot(d["R"], d["T"]); axes[1, 1].set_ylabel("T")
    for ax in axes.flat:
        ax.set_xlabel("R")
    fig.tight_layout()
    fig.savefig(path.replace(".csv", ".png"), dpi=150)
"""


def emit_plots(outcomes, out_dir, model, profiles=True):
    """Write surface CSVs, per-solve profile CSVs and plotting scripts.

    ``outcomes`` is a list of :class:`SolveOutcome`.  Surfaces are matrices
    with lambda along the first row and rho0 down the first column.
    """
    if not outcomes:
        raise ValueError("nothing to write: the result table is empty")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    recs = [o.record for o in outcomes]
    lams = sorted({r.lam for r in recs})
    rhos = sorted({r.rho0 for r in recs})
    written = []
    if len(lams) > 1 or len(rhos) > 1:
        table = {(r.rho0, r.lam): r for r in recs}
        for name in ("cavity", "energy"):
            path = out / f"surface_{name}.csv"
            with open(path, "w", newline="") as fh:
                fh.write(",".join(["rho0\\lambda"] + [_fmt(l) for l in lams]) + "\n")
                for rho in rhos:
                    vals = [getattr(table[(rho, l)], name) if (rho, l) in table else math.nan
                            for l in lams]
                    fh.write(",".join([_fmt(rho)] + [_fmt(v) for v in vals]) + "\n")
            written.append(path)
        (out / "plot_surfaces.py").write_text(_SURFACE_SCRIPT)
        written.append(out / "plot_surfaces.py")
    if profiles:
        for o in outcomes:
            if o.field is not None:
                path = out / profile_name(o.record)
                o.field.to_csv(path, model)
                written.append(path)
        (out / "plot_profiles.py").write_text(_PROFILE_SCRIPT)
        written.append(out / "plot_profiles.py")
    return written
