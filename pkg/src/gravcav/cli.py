"""Command-line interface.

Subcommands: solve, sweep, critical, free-boundary, validate, oracle.
Exit codes: 0 success, 2 solver non-convergence, 3 invalid configuration,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import load_config
from .errors import AmbiguityError, ConfigError, DomainError, InvalidParameterError, SolverError
from .gravity import DensityProfile, QuadSpec
from .pipeline import (
    emit_plots,
    find_critical_lambda,
    oracle_check,
    solve,
    sweep,
    validate,
    write_records,
)
from .radial_field import affine_map, canonical_grid, incompressible_map
from .shooting import solve_free_boundary

log = logging.getLogger("gravcav")

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG, EXIT_IO = 0, 2, 3, 4


def _common(p):
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--lambda", dest="lam", type=float, help="outer displacement r(1)")
    p.add_argument("--rho0", type=float, help="constant reference density")
    p.add_argument("--epsilon", type=float, help="inner cutoff radius")
    p.add_argument("--method", choices=["hybrid", "shoot", "flow"])
    p.add_argument("--out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gravcav",
        description="Radial cavitation solver for a self-gravitating elastic ball.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one displacement problem")
    _common(p)
    p.add_argument("--trace", action="store_true", help="write the flow energy trace")

    p = sub.add_parser("sweep", help="solve a (lambda, rho0) grid")
    _common(p)
    p.add_argument("--n-lambda", type=int)
    p.add_argument("--n-rho0", type=int)
    p.add_argument("--workers", type=int)

    p = sub.add_parser("critical", help="bisect for the critical displacement")
    _common(p)
    p.add_argument("--lambda-lo", type=float)
    p.add_argument("--lambda-hi", type=float)
    p.add_argument("--c-tol", type=float)
    p.add_argument("--tol", type=float)

    p = sub.add_parser("free-boundary", help="equilibrium with a traction-free outer surface")
    _common(p)

    p = sub.add_parser("validate", help="check the constitutive hypotheses")
    _common(p)

    p = sub.add_parser("oracle", help="cross-check the potential energy by double quadrature")
    _common(p)
    p.add_argument("--field", choices=["identity", "affine", "incompressible", "solved"],
                   default="identity")
    p.add_argument("--nodes", type=int, default=2000, help="Gauss nodes per direction")
    return parser


def _config(args):
    cfg = load_config(args.config)
    if args.rho0 is not None:
        cfg.override("density", "rho0", args.rho0)
        cfg.override("density", "csv", None)
    if args.epsilon is not None:
        cfg.override("solver", "epsilon", args.epsilon)
    if args.method is not None:
        cfg.override("solver", "method", args.method)
    if args.out is not None:
        cfg.override("output", "dir", args.out)
    return cfg


def _outdir(cfg):
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_solve(args, cfg):
    model, profile = cfg.material.build(), cfg.density.build()
    lam = args.lam if args.lam is not None else 1.0
    if not lam > 0:
        raise DomainError("lambda must be positive")
    out = _outdir(cfg)
    trace = out / "flow_trace.csv" if (args.trace or cfg.output.trace) else None
    res = solve(model, profile, lam, cfg.solver, trace_path=trace)
    rec = res.record
    write_records([rec], out / "records.csv")
    if res.field is not None:
        emit_plots([res], out, model, profiles=cfg.output.profiles)
    print(f"lambda = {rec.lam:g}, rho0 = {rec.rho0:g}, eps = {res.epsilon:g}")
    print(f"status   = {rec.status} ({rec.method})")
    print(f"cavity   = r({res.epsilon:g}) = {rec.cavity:.6g}")
    print(f"energy   = {rec.energy:.6g}")
    print(f"nu       = {rec.nu:.10g}")
    if not math.isnan(res.flow_energy) and not math.isnan(res.shoot_energy):
        print(f"flow energy {res.flow_energy:.6g}, shooting energy {res.shoot_energy:.6g}, "
              f"sup-distance {res.sup_distance:.3g}")
    for note in res.notes:
        print(f"note: {note}")
    return EXIT_OK if res.converged else EXIT_SOLVER


def cmd_sweep(args, cfg):
    s = cfg.sweep
    n_lam = args.n_lambda or s.n_lambda
    n_rho = args.n_rho0 or s.n_rho0
    if n_lam < 2 or n_rho < 2:
        raise ConfigError("a sweep needs at least two points per axis")
    lams = np.linspace(s.lambda_min, s.lambda_max, n_lam)
    rhos = np.linspace(s.rho0_min, s.rho0_max, n_rho)
    workers = args.workers if args.workers is not None else s.workers
    model = cfg.material.build()
    outcomes = sweep(model, lams, rhos, cfg.solver, workers=workers)
    out = _outdir(cfg)
    write_records([o.record for o in outcomes], out / "records.csv")
    emit_plots(outcomes, out, model, profiles=cfg.output.profiles)
    bad = [o for o in outcomes if not o.converged]
    print(f"{len(outcomes)} solves, {len(bad)} not converged; results in {out}")
    return EXIT_OK if not bad else EXIT_SOLVER


def cmd_critical(args, cfg):
    c = cfg.critical
    model, profile = cfg.material.build(), cfg.density.build()
    res = find_critical_lambda(
        model, profile,
        args.lambda_lo if args.lambda_lo is not None else c.lambda_lo,
        args.lambda_hi if args.lambda_hi is not None else c.lambda_hi,
        args.c_tol if args.c_tol is not None else c.c_tol,
        args.tol if args.tol is not None else c.tol,
        solver=cfg.solver, n_scan=c.n_scan,
    )
    out = _outdir(cfg)
    with open(out / "critical.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rho0", "lambda_c", "lambda_lo", "lambda_hi", "c_tol", "d0_floor"])
        floor = "" if res.d0_floor is None else f"{res.d0_floor:.17g}"
        w.writerow([f"{cfg.density.rho0:.17g}" if not cfg.density.csv else cfg.density.csv,
                    f"{res.lam_c:.17g}", f"{res.bracket[0]:.17g}", f"{res.bracket[1]:.17g}",
                    f"{res.c_tol:.17g}", floor])
    print(f"lambda_c = {res.lam_c:.6f} in [{res.bracket[0]:.6f}, {res.bracket[1]:.6f}]")
    if res.d0_floor is not None:
        print(f"no-cavitation floor d0^(1/3) = {res.d0_floor:.6f}")
    return EXIT_OK


def cmd_free_boundary(args, cfg):
    model, profile = cfg.material.build(), cfg.density.build()
    res = solve_free_boundary(model, profile, cfg.solver.epsilon, rtol=cfg.solver.rtol,
                              atol=cfg.solver.atol)
    out = _outdir(cfg)
    res.field.to_csv(out / "profile_free.csv", model)
    print(f"lambda = {res.lam:.10g}, nu = {res.nu:.10g}, inner defect = {res.defect:.3g}")
    return EXIT_OK if res.converged else EXIT_SOLVER


def cmd_validate(args, cfg):
    report = validate(cfg.material.build())
    for line in report.lines():
        print(line)
    return EXIT_OK


def cmd_oracle(args, cfg):
    model, profile = cfg.material.build(), cfg.density.build()
    lam = args.lam if args.lam is not None else 1.15
    eps = cfg.solver.epsilon
    if args.field == "identity":
        fld = affine_map(1.0, canonical_grid(0.0, cfg.solver.n_nodes, 1.0))
    elif args.field == "affine":
        fld = affine_map(lam, canonical_grid(eps, cfg.solver.n_nodes, cfg.solver.grid_ratio))
    elif args.field == "incompressible":
        fld = incompressible_map(lam, canonical_grid(eps, cfg.solver.n_nodes, cfg.solver.grid_ratio))
    else:
        res = solve(model, profile, lam, cfg.solver)
        if res.field is None:
            raise SolverError("no field to check", status=res.record.status)
        fld = res.field
    rep = oracle_check(profile, fld, QuadSpec(args.nodes, args.nodes))
    for line in rep.lines():
        print(line)
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "critical": cmd_critical,
    "free-boundary": cmd_free_boundary,
    "validate": cmd_validate,
    "oracle": cmd_oracle,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, InvalidParameterError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AmbiguityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for lam, cav in exc.samples:
            print(f"  lambda = {lam:.6f}: cavity = {cav:.4g}", file=sys.stderr)
        return EXIT_SOLVER
    except SolverError as exc:
        print(f"error: {exc} [{exc.status}]", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
