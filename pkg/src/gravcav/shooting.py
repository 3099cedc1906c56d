"""Shooting solver for the radial Euler-Lagrange equation.

The second-order equation d/dR[R^2 phi1] = 2 R phi2 + R^2 rho0 M_R / r^2 is
integrated backwards from R = 1, where r = lambda and r' = nu, down to the
inner cutoff eps with an embedded Runge-Kutta 4(5) pair.  The outer slope nu
is then adjusted until the radial stress phi1 vanishes at R = eps.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field
from typing import Any

import numpy as np
from scipy.integrate import RK45, OdeSolution
from scipy.optimize import brentq

from .errors import DegeneracyError, DomainError, InvalidParameterError, SolverError
from .radial_field import RadialField, canonical_grid

__all__ = [
    "IvpSpec",
    "Trajectory",
    "ShootingResult",
    "el_rhs",
    "integrate_ivp",
    "shoot_residual",
    "solve_shooting",
    "solve_free_boundary",
    "FreeBoundaryResult",
    "PENALTY_SCALE",
]

log = logging.getLogger(__name__)

# Magnitude of the signed residual assigned to trajectories that die before eps.
PENALTY_SCALE = 1.0e12


@dataclass(frozen=True)
class IvpSpec:
    """Initial-value problem r(1) = lam, r'(1) = nu integrated down to epsilon."""

    model: Any
    profile: Any
    lam: float
    nu: float
    epsilon: float = 1e-3
    rtol: float = 1e-10
    atol: float = 1e-12
    max_steps: int = 200_000

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidParameterError("epsilon must lie in (0, 1)")
        if not (self.lam > 0 and self.nu > 0):
            raise InvalidParameterError("lambda and nu must be positive")
        if not (self.rtol > 0 and self.atol > 0):
            raise InvalidParameterError("tolerances must be positive")

    def with_nu(self, nu):
        return IvpSpec(self.model, self.profile, self.lam, nu, self.epsilon,
                       self.rtol, self.atol, self.max_steps)


@dataclass
class Trajectory:
    """Backward trajectory and how it ended.

    ``status`` is ``"completed"`` when eps was reached, ``"event_r"`` or
    ``"event_rp"`` when r or r' reached zero at ``R_end``, ``"underflow"``
    when the step size collapsed, ``"budget"`` when max_steps ran out.
    """

    status: str
    R_end: float
    r_end: float
    rp_end: float
    sol: OdeSolution | None
    n_steps: int

    @property
    def completed(self):
        return self.status == "completed"

    def __call__(self, R):
        """Dense (r, r') at R, within the integrated range."""
        return self.sol(R)


def _rho_mass(profile, R):
    return profile.rho(R) * profile.mass(R)


def _rhs_value(model, profile, R, r, rp):
    v2 = r / R
    p1, p2, p11, p12, p1R = model.radial_partials(R, rp, v2)
    num = 2.0 * (p2 - p1) / R + _rho_mass(profile, R) / (r * r) - p1R - 2.0 * p12 * (rp - v2) / R
    return num / p11, p11


def el_rhs(model, profile, R, r, rp):
    """r'' from the expanded Euler-Lagrange equation at the state (R, r, r')."""
    if not (R > 0 and r > 0 and rp > 0):
        raise DomainError("el_rhs needs R > 0, r > 0 and r' > 0")
    rpp, p11 = _rhs_value(model, profile, R, r, rp)
    if not p11 > 0:
        raise DegeneracyError(f"phi11 = {p11} <= 0: cannot solve for r''")
    return float(rpp)


def _event_radius(interp, t_old, t_new, comp):
    """Radius in [t_new, t_old] at which component ``comp`` crosses zero."""
    f = lambda t: float(interp(t)[comp])
    if f(t_old) * f(t_new) > 0:
        return t_new
    return brentq(f, t_new, t_old, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def integrate_ivp(spec):
    """Integrate the IVP from R = 1 towards R = eps.

    Stops early on r <= 0, r' <= 0, step underflow or when the step budget
    is exhausted.  The returned :class:`Trajectory` holds a dense-output
    interpolant over the accepted steps.
    """
    model, profile = spec.model, spec.profile

    def fun(R, y):
        r, rp = y
        if r <= 0 or rp <= 0:
            return np.array([rp, 0.0])
        rpp, _ = _rhs_value(model, profile, R, r, rp)
        return np.array([rp, rpp])

    solver = RK45(fun, 1.0, np.array([spec.lam, spec.nu]), spec.epsilon,
                  rtol=spec.rtol, atol=spec.atol)
    ts = [1.0]
    interps = []
    status = "budget"
    R_end, y_end = 1.0, np.array([spec.lam, spec.nu])
    with np.errstate(all="ignore"):
        for n in range(spec.max_steps):
            msg = solver.step()
            if solver.status == "failed":
                status = "underflow"
                log.debug("step underflow at R=%.6g: %s", solver.t, msg)
                break
            y = solver.y
            if not np.all(np.isfinite(y)):
                status = "underflow"
                break
            interp = solver.dense_output()
            if y[0] <= 0 or y[1] <= 0:
                comp = 0 if y[0] <= 0 else 1
                # pick whichever component crossed first going inward
                if y[0] <= 0 and y[1] <= 0:
                    t0 = _event_radius(interp, solver.t_old, solver.t, 0)
                    t1 = _event_radius(interp, solver.t_old, solver.t, 1)
                    comp = 0 if t0 >= t1 else 1
                R_ev = _event_radius(interp, solver.t_old, solver.t, comp)
                ts.append(solver.t)
                interps.append(interp)
                status = "event_r" if comp == 0 else "event_rp"
                R_end, y_end = R_ev, interp(R_ev)
                break
            ts.append(solver.t)
            interps.append(interp)
            R_end, y_end = solver.t, y
            if solver.status == "finished":
                status = "completed"
                break
    sol = OdeSolution(np.array(ts), interps) if interps else None
    return Trajectory(status, float(R_end), float(y_end[0]), float(y_end[1]), sol, len(interps))


def _inner_scale(model, R, rp, v2):
    """v1 * phi11 at the inner state: the natural size of changes in phi1."""
    p11 = model.radial_partials(R, rp, v2)[2]
    return float(abs(rp * p11))


def shoot_residual(spec, trajectory=None):
    """g(nu) = phi1(eps, r'(eps), r(eps)/eps, r(eps)/eps).

    Positive when the inner radial stress is tensile.  Trajectories that end
    before eps get a signed penalty: negative for r' -> 0 (over-compressed),
    positive for r -> 0 or a blow-up of r'.  Returns ``(g, trajectory)``.
    """
    traj = trajectory if trajectory is not None else integrate_ivp(spec)
    if traj.completed:
        g = model_phi1(spec.model, spec.epsilon, traj.rp_end, traj.r_end)
        return float(g), traj
    excess = 1.0 + (traj.R_end - spec.epsilon)
    if traj.status == "event_rp":
        return -PENALTY_SCALE * excess, traj
    if traj.status == "budget":
        raise SolverError("step budget exhausted", status="ode_failure",
                          diagnostics={"nu": spec.nu, "R_end": traj.R_end})
    return PENALTY_SCALE * excess, traj


def model_phi1(model, R, rp, r):
    return float(model.radial_partials(R, rp, r / R)[0])


@dataclass
class ShootingResult:
    nu_star: float
    field: RadialField | None
    residual: float
    iterations: int
    status: str
    epsilon: float
    lam: float
    residual_scale: float = 1.0
    energy: float = math.nan
    history: list = dc_field(default_factory=list)

    @property
    def converged(self):
        return self.status == "converged"

    @property
    def cavity(self):
        return self.field.cavity if self.field is not None else math.nan


def _trajectory_field(traj, grid):
    grid = np.asarray(grid, dtype=float)
    y = traj.sol(grid)
    r, rp = y[0], y[1]
    r[-1] = traj.sol(1.0)[0]
    return RadialField(grid, r, rp)


def _expand_bracket(g, a, ga, b, gb, lam, max_expand=60):
    """Move the pair (a, b) until g changes sign.  Returns (lo, glo, hi, ghi) or None."""
    for _ in range(max_expand):
        if ga == 0:
            return a, ga, a, ga
        if gb == 0:
            return b, gb, b, gb
        if ga * gb < 0:
            return (a, ga, b, gb) if a < b else (b, gb, a, ga)
        lo, glo, hi, ghi = (a, ga, b, gb) if a < b else (b, gb, a, ga)
        if glo > 0:  # both too steep: go down
            a, ga, b = lo, glo, 0.5 * lo
        else:  # both too flat: go up
            a, ga, b = hi, ghi, hi + 2.0 * max(hi - lo, 0.05 * lam)
        gb = g(b)
    return None


def _safeguarded_secant(f, lo, flo, hi, fhi, done, regular, max_iter):
    """Secant iteration kept inside a sign-change bracket.

    The secant step uses the last two iterates when both are ``regular``;
    it falls back to bisection when the step leaves the bracket or when the
    bracket has not halved over three iterations.  ``done(x, dx)`` decides
    convergence.  Returns ``(x, iterations, reason)`` with reason one of
    ``"done"``, ``"collapsed"`` or ``"max_iterations"``.
    """
    x_prev, f_prev, x_cur, f_cur = lo, flo, hi, fhi
    widths = [hi - lo]
    for it in range(1, max_iter + 1):
        width = hi - lo
        x_new = None
        if regular(x_prev) and regular(x_cur) and f_cur != f_prev:
            x_new = x_cur - f_cur * (x_cur - x_prev) / (f_cur - f_prev)
        stalled = len(widths) > 3 and width > 0.5 * widths[-4]
        margin = 1e-3 * width
        if x_new is None or stalled or not lo + margin < x_new < hi - margin:
            x_new = 0.5 * (lo + hi)
        if not lo < x_new < hi:
            return x_cur, it, "collapsed"
        f_new = f(x_new)
        dx = x_new - x_cur
        x_prev, f_prev, x_cur, f_cur = x_cur, f_cur, x_new, f_new
        if f_new == 0 or done(x_new, dx):
            return x_new, it, "done"
        if (f_new < 0) == (flo < 0):
            lo, flo = x_new, f_new
        else:
            hi, fhi = x_new, f_new
        widths.append(hi - lo)
        if hi - lo <= 4 * np.finfo(float).eps * abs(hi):
            return x_cur, it, "collapsed"
    return x_cur, max_iter, "max_iterations"


def solve_shooting(model, profile, lam, epsilon=1e-3, bracket=None, tol=1e-8, *,
                   nu_tol=1e-10, rtol=1e-10, atol=1e-12, max_iter=100, grid=None,
                   max_steps=200_000):
    """Find the outer slope nu* giving zero radial stress at R = eps.

    ``bracket`` gives two starting slopes (default ``(lam, 0.5*lam)``); they
    need not bracket the root, the pair is expanded until g changes sign.
    Converged when ``|g| <= tol*(1 + v1*phi11)`` at the inner state and the
    last update is below ``nu_tol``.  When the sign-change bracket shrinks
    to floating-point resolution first, the root is located as well as nu
    can be represented; the solve then counts as converged if |g| does not
    exceed the variation of g across that bracket.
    """
    if not lam > 0:
        raise DomainError("lambda must be positive")
    grid = canonical_grid(epsilon) if grid is None else np.asarray(grid, dtype=float)
    if abs(grid[0] - epsilon) > 1e-15:
        raise InvalidParameterError("grid must start at epsilon")
    base = IvpSpec(model, profile, lam, lam, epsilon, rtol, atol, max_steps)
    nu0, nu1 = bracket if bracket is not None else (lam, 0.5 * lam)
    if nu0 == nu1:
        nu1 = nu0 * (1.0 - 1e-3)
    cache = {}
    history = []

    def g(nu):
        if nu not in cache:
            val, traj = shoot_residual(base.with_nu(nu))
            cache[nu] = (val, traj)
            history.append((nu, val))
        return cache[nu][0]

    def scale(nu):
        traj = cache[nu][1]
        return _inner_scale(model, epsilon, traj.rp_end, traj.r_end / epsilon)

    def small(nu, slack=0.0):
        traj = cache[nu][1]
        return traj.completed and abs(cache[nu][0]) <= tol * (1.0 + scale(nu)) + slack

    def result(nu, status, iters):
        val, traj = cache[nu]
        fld = _trajectory_field(traj, grid) if traj.completed else None
        sc = scale(nu) if traj.completed else 1.0
        return ShootingResult(nu, fld, val, iters, status, epsilon, lam, sc, history=history)

    try:
        g0 = g(nu0)
        if small(nu0):
            return result(nu0, "converged", 0)
        g1 = g(nu1)
        br = _expand_bracket(g, nu0, g0, nu1, g1, lam)
        if br is None:
            best = min(cache, key=lambda k: abs(cache[k][0]))
            return result(best, "bracket_failure", 0)
        lo, glo, hi, ghi = br
        if lo == hi:
            return result(lo, "converged", 0)
        x, it, reason = _safeguarded_secant(
            g, lo, glo, hi, ghi,
            done=lambda x, dx: abs(dx) <= nu_tol and small(x),
            regular=lambda x: cache[x][1].completed,
            max_iter=max_iter,
        )
    except SolverError as exc:
        raise SolverError(str(exc), status="ode_failure", diagnostics={"history": history}) from exc
    if reason == "done":
        return result(x, "converged", it)
    done_pts = [k for k in cache if cache[k][1].completed]
    if not done_pts:
        return result(x, "ode_failure", it)
    best = min(done_pts, key=lambda k: abs(cache[k][0]))
    if reason == "collapsed":
        # the two closest points on either side of the root
        left = max((k for k in cache if (cache[k][0] < 0) == (glo < 0)), default=best)
        right = min((k for k in cache if (cache[k][0] < 0) != (glo < 0)), default=best)
        spread = abs(cache[right][0] - cache[left][0])
        if small(best, slack=spread):
            return result(best, "converged", it)
    return result(best, "max_iterations", it)


@dataclass
class FreeBoundaryResult:
    lam: float
    nu: float
    field: RadialField
    defect: float
    iterations: int
    status: str

    @property
    def converged(self):
        return self.status == "converged"


def _outer_slope(model, lam):
    """nu with phi1(1, nu, lam, lam) = 0 (zero outer Cauchy stress)."""
    f = lambda nu: model_phi1(model, 1.0, nu, lam)
    lo, hi = 1e-3 * lam, lam
    while f(hi) < 0:
        hi *= 2.0
    while f(lo) > 0:
        lo *= 0.5
    return brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def solve_free_boundary(model, profile, epsilon=1e-3, tol=1e-6, *, lam0=1.0, lam1=None,
                        rtol=1e-10, atol=1e-12, max_iter=100, grid=None):
    """Equilibrium of the unloaded ball: zero outer stress and an intact centre.

    For a trial outer radius lam, the outer slope is fixed exactly by
    phi1(1, nu, lam, lam) = 0; lam is then corrected by a safeguarded secant
    iteration on the inner defect r(eps)/(eps r'(eps)) - 1.
    """
    grid = canonical_grid(epsilon) if grid is None else np.asarray(grid, dtype=float)
    cache = {}

    def q(lam):
        if lam not in cache:
            nu = _outer_slope(model, lam)
            traj = integrate_ivp(IvpSpec(model, profile, lam, nu, epsilon, rtol, atol))
            if traj.completed:
                val = traj.r_end / (epsilon * traj.rp_end) - 1.0
            elif traj.status == "event_rp":
                # r' collapsing leaves r(eps)/(eps r') unbounded above
                val = 1e6 * (1.0 + traj.R_end)
            else:
                # r collapsing: lam too small, the defect tends to -1
                val = -1.0 - traj.R_end
            cache[lam] = (val, nu, traj)
        return cache[lam][0]

    def result(lam, status, it):
        val, nu, traj = cache[lam]
        return FreeBoundaryResult(lam, nu, _trajectory_field(traj, grid), val, it, status)

    a = lam0
    b = lam1 if lam1 is not None else lam0 * (1.0 - 1e-2)
    qa = q(a)
    if cache[a][2].completed and abs(qa) <= tol:
        return result(a, "converged", 0)
    qb = q(b)
    for _ in range(60):
        if qa * qb < 0:
            break
        step = b - a
        a, qa = b, qb
        b = b + 2.0 * step if b + 2.0 * step > 0 else 0.5 * a
        qb = q(b)
    else:
        raise SolverError("no sign change of the inner defect", status="bracket_failure")
    lo, qlo, hi, qhi = (a, qa, b, qb) if a < b else (b, qb, a, qa)
    x, it, reason = _safeguarded_secant(
        q, lo, qlo, hi, qhi,
        done=lambda x, dx: cache[x][2].completed and abs(cache[x][0]) <= tol,
        regular=lambda x: cache[x][2].completed and abs(cache[x][0]) < 1.0,
        max_iter=max_iter,
    )
    if reason == "done":
        return result(x, "converged", it)
    done_pts = [k for k in cache if cache[k][2].completed]
    if reason == "collapsed" and done_pts:
        best = min(done_pts, key=lambda k: abs(cache[k][0]))
        if abs(cache[best][0]) <= 1e-3:
            return result(best, "converged", it)
    raise SolverError("free-boundary iteration did not converge", status="max_iterations",
                      diagnostics={"lam": x, "defect": cache[x][0]})
