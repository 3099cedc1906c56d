"""Stored-energy densities for isotropic compressible materials.

Two families are provided, both written in terms of the principal stretches
``(v1, v2, v3)``:

* :class:`PowerLawModel`, the homogeneous family

      Phi(v) = (kappa/p) (v1^p + v2^p + v3^p) + h(v1 v2 v3),
      h(d)   = C d^gamma + D d^(-delta);

* :class:`InhomogeneousModel`, with radius-dependent weights

      Phi(R, v) = alpha(R) sum phi(v_i) + beta(R) sum_{i<j} psi(v_i v_j)
                  + gamma(R) h(v1 v2 v3).

Every model exposes the energy density and the analytic partial derivatives
used by the solvers.  All expressions are written with plain arithmetic so
that they accept Python floats (fast path inside the ODE right-hand side)
as well as numpy arrays (quadrature over a mesh).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, InvalidParameterError

__all__ = [
    "StretchState",
    "VolumetricTerm",
    "PowerTerm",
    "WeightFunction",
    "PowerLawModel",
    "InhomogeneousModel",
    "EnergyPartials",
    "stress_free_D",
    "h_min_argument",
    "energy_density",
    "partials",
    "GrowthProbe",
    "CheckResult",
    "GrowthReport",
    "validate_growth",
    "paper_model",
]


def _check_positive(*values):
    for v in values:
        if isinstance(v, float):
            bad = not v > 0.0
        else:
            bad = not np.all(np.asarray(v) > 0.0)
        if bad:
            raise DomainError("principal stretches must be strictly positive")


@dataclass(frozen=True)
class StretchState:
    """Principal stretches at a material point."""

    v1: float
    v2: float
    v3: float

    def __post_init__(self):
        _check_positive(float(self.v1), float(self.v2), float(self.v3))

    @classmethod
    def radial(cls, v1, v2):
        return cls(v1, v2, v2)

    @property
    def d(self):
        return self.v1 * self.v2 * self.v3

    def as_tuple(self):
        return (self.v1, self.v2, self.v3)


@dataclass(frozen=True)
class VolumetricTerm:
    """h(d) = C d^gamma + D d^(-delta)."""

    C: float
    D: float
    gamma_exp: float
    delta_exp: float

    def __post_init__(self):
        if self.C < 0 or self.D < 0:
            raise InvalidParameterError("C and D must be nonnegative")
        if not (self.gamma_exp > 0 and self.delta_exp > 0):
            raise InvalidParameterError("gamma and delta exponents must be positive")

    def value(self, d):
        return self.C * d**self.gamma_exp + self.D * d ** (-self.delta_exp)

    def d1(self, d):
        g, s = self.gamma_exp, self.delta_exp
        return self.C * g * d ** (g - 1.0) - self.D * s * d ** (-s - 1.0)

    def d2(self, d):
        g, s = self.gamma_exp, self.delta_exp
        return self.C * g * (g - 1.0) * d ** (g - 2.0) + self.D * s * (s + 1.0) * d ** (-s - 2.0)


@dataclass(frozen=True)
class PowerTerm:
    """Scalar convex function f(t) = coef * t^exponent (t > 0)."""

    coef: float
    exponent: float

    def value(self, t):
        return self.coef * t**self.exponent

    def d1(self, t):
        return self.coef * self.exponent * t ** (self.exponent - 1.0)

    def d2(self, t):
        e = self.exponent
        return self.coef * e * (e - 1.0) * t ** (e - 2.0)


def stress_free_D(kappa, C, gamma_exp, delta_exp):
    """Coefficient D making the reference configuration stress free.

    Returns ``(kappa + C*gamma)/delta``.
    """
    if delta_exp == 0:
        raise InvalidParameterError("delta exponent must be nonzero")
    if kappa <= 0 or C < 0 or gamma_exp <= 0 or delta_exp < 0:
        raise InvalidParameterError("stress_free_D needs kappa > 0, C >= 0, gamma > 0, delta > 0")
    return (kappa + C * gamma_exp) / delta_exp


def h_min_argument(vol):
    """Location d0 of the global minimum of the volumetric term h.

    h'(d) < 0 for d < d0, which is what the no-cavitation bound
    ``lambda**3 < d0`` relies on.
    """
    if vol.C <= 0:
        raise InvalidParameterError("C = 0: h is monotone decreasing and has no interior minimum")
    if vol.D <= 0:
        raise InvalidParameterError("D = 0: h is monotone increasing on (0, inf)")
    g, s = vol.gamma_exp, vol.delta_exp
    return (vol.D * s / (vol.C * g)) ** (1.0 / (g + s))


@dataclass(frozen=True)
class EnergyPartials:
    """First and second partial derivatives of Phi at one state."""

    phi1: float
    phi2: float
    phi11: float
    phi12: float
    phi1R: float


class _ModelBase:
    """Shared public surface; subclasses implement ``_density`` and ``_partials``."""

    def density(self, R, v1, v2, v3=None):
        if v3 is None:
            v3 = v2
        _check_positive(v1, v2, v3)
        return self._density(R, v1, v2, v3)

    def partials(self, R, v1, v2, v3=None):
        if v3 is None:
            v3 = v2
        _check_positive(v1, v2, v3)
        return EnergyPartials(*self._partials(R, v1, v2, v3))

    def radial_partials(self, R, v1, v2):
        """Unchecked ``(phi1, phi2, phi11, phi12, phi1R)`` at (v1, v2, v2)."""
        return self._partials(R, v1, v2, v2)

    def radial_density(self, R, v1, v2):
        """Unchecked Phi(R, v1, v2, v2)."""
        return self._density(R, v1, v2, v2)

    def radial_energy_terms(self, R, v1, v2):
        """Unchecked ``(Phi, phi1, phi2)`` at (v1, v2, v2); the solver hot path."""
        pt = self._partials(R, v1, v2, v2)
        return self._density(R, v1, v2, v2), pt[0], pt[1]


@dataclass(frozen=True)
class PowerLawModel(_ModelBase):
    """Homogeneous power-law material with volumetric term ``vol``.

    ``offset`` is an additive constant; it does not change any derivative.
    """

    p: float
    kappa: float
    vol: VolumetricTerm
    offset: float = 0.0

    def __post_init__(self):
        if not self.p > 0:
            raise InvalidParameterError("p must be positive")
        if not self.kappa > 0:
            raise InvalidParameterError("kappa must be positive")

    @property
    def phi_fn(self):
        return PowerTerm(self.kappa / self.p, self.p)

    @property
    def psi_fn(self):
        return None

    @property
    def is_homogeneous(self):
        return True

    def comparison_density(self, v1, v2, v3):
        return self._density(0.0, v1, v2, v3)

    def _density(self, R, v1, v2, v3):
        p = self.p
        return (
            self.kappa / p * (v1**p + v2**p + v3**p)
            + self.vol.value(v1 * v2 * v3)
            + self.offset
        )

    def _partials(self, R, v1, v2, v3):
        p, k = self.p, self.kappa
        d = v1 * v2 * v3
        h1 = self.vol.d1(d)
        h2 = self.vol.d2(d)
        phi1 = k * v1 ** (p - 1.0) + h1 * v2 * v3
        phi2 = k * v2 ** (p - 1.0) + h1 * v1 * v3
        phi11 = k * (p - 1.0) * v1 ** (p - 2.0) + h2 * (v2 * v3) ** 2
        phi12 = h2 * d * v3 + h1 * v3
        return phi1, phi2, phi11, phi12, 0.0

    def radial_energy_terms(self, R, v1, v2):
        vol, p, k = self.vol, self.p, self.kappa
        d = v1 * v2 * v2
        if p == 2.0:
            s1, s2 = v1 * v1, v2 * v2
            a1, a2 = v1, v2
        else:
            a1, a2 = v1 ** (p - 1.0), v2 ** (p - 1.0)
            s1, s2 = a1 * v1, a2 * v2
        if vol.gamma_exp == 2.0 and vol.delta_exp == 2.0:
            dinv2 = 1.0 / (d * d)
            h = vol.C * d * d + vol.D * dinv2
            h1 = 2.0 * vol.C * d - 2.0 * vol.D * dinv2 / d
        else:
            h = vol.value(d)
            h1 = vol.d1(d)
        phi = k / p * (s1 + 2.0 * s2) + h + self.offset
        return phi, k * a1 + h1 * v2 * v2, k * a2 + h1 * v1 * v2


class WeightFunction:
    """Positive weight w(R) on [0, 1] with derivative access.

    Either a constant, or samples on a uniform grid of [0, 1] interpolated
    with a monotone cubic (PCHIP); an analytic derivative may be supplied.
    """

    def __init__(self, values, derivative: Optional[Callable] = None):
        arr = np.atleast_1d(np.asarray(values, dtype=float))
        if np.any(arr <= 0):
            raise InvalidParameterError("weight functions must be positive on [0, 1]")
        self.samples = arr
        self._derivative = derivative
        if arr.size == 1:
            self._const = float(arr[0])
            self._interp = None
        else:
            self._const = None
            grid = np.linspace(0.0, 1.0, arr.size)
            self._interp = PchipInterpolator(grid, arr)
            self._dinterp = self._interp.derivative()

    @classmethod
    def constant(cls, c):
        return cls([c])

    @property
    def is_constant(self):
        return self._const is not None and self._derivative is None

    def __call__(self, R):
        if self._const is not None:
            return self._const
        return self._interp(R)

    def deriv(self, R):
        if self._derivative is not None:
            return self._derivative(R)
        if self._const is not None:
            return 0.0
        return self._dinterp(R)

    def __repr__(self):
        if self._const is not None:
            return f"WeightFunction({self._const!r})"
        return f"WeightFunction(<{self.samples.size} samples>)"


@dataclass(frozen=True)
class InhomogeneousModel(_ModelBase):
    """alpha(R) sum phi(v_i) + beta(R) sum psi(v_i v_j) + gamma(R) h(v1 v2 v3).

    ``psi_fn=None`` means psi is identically zero (then beta is ignored).
    """

    alpha: WeightFunction
    phi_fn: PowerTerm
    vol: VolumetricTerm
    gamma_w: WeightFunction = field(default_factory=lambda: WeightFunction.constant(1.0))
    beta: WeightFunction = field(default_factory=lambda: WeightFunction.constant(1.0))
    psi_fn: Optional[PowerTerm] = None

    @property
    def is_homogeneous(self):
        return self.alpha.is_constant and self.gamma_w.is_constant and (
            self.psi_fn is None or self.beta.is_constant
        )

    def comparison(self):
        """The R-independent comparison material with unit weights."""
        one = WeightFunction.constant(1.0)
        return InhomogeneousModel(one, self.phi_fn, self.vol, one, one, self.psi_fn)

    def comparison_density(self, v1, v2, v3):
        return self.comparison()._density(0.0, v1, v2, v3)

    def _psi_sum(self, v1, v2, v3):
        f = self.psi_fn
        return f.value(v1 * v2) + f.value(v1 * v3) + f.value(v2 * v3)

    def _density(self, R, v1, v2, v3):
        f = self.phi_fn
        out = self.alpha(R) * (f.value(v1) + f.value(v2) + f.value(v3))
        out = out + self.gamma_w(R) * self.vol.value(v1 * v2 * v3)
        if self.psi_fn is not None:
            out = out + self.beta(R) * self._psi_sum(v1, v2, v3)
        return out

    def _partials(self, R, v1, v2, v3):
        f = self.phi_fn
        a, da = self.alpha(R), self.alpha.deriv(R)
        g, dg = self.gamma_w(R), self.gamma_w.deriv(R)
        d = v1 * v2 * v3
        h1 = self.vol.d1(d)
        h2 = self.vol.d2(d)
        vol1 = h1 * v2 * v3
        phi1 = a * f.d1(v1) + g * vol1
        phi2 = a * f.d1(v2) + g * h1 * v1 * v3
        phi11 = a * f.d2(v1) + g * h2 * (v2 * v3) ** 2
        phi12 = g * (h2 * v1 * v2 * v3 * v3 + h1 * v3)
        phi1R = da * f.d1(v1) + dg * vol1
        if self.psi_fn is not None:
            s = self.psi_fn
            b, db = self.beta(R), self.beta.deriv(R)
            p12, p13, p23 = s.d1(v1 * v2), s.d1(v1 * v3), s.d1(v2 * v3)
            mech1 = p12 * v2 + p13 * v3
            phi1 = phi1 + b * mech1
            phi2 = phi2 + b * (p12 * v1 + p23 * v3)
            phi11 = phi11 + b * (s.d2(v1 * v2) * v2 * v2 + s.d2(v1 * v3) * v3 * v3)
            phi12 = phi12 + b * (s.d2(v1 * v2) * v1 * v2 + p12)
            phi1R = phi1R + db * mech1
        return phi1, phi2, phi11, phi12, phi1R


def paper_model(p=2.0, kappa=1.0, C=1.0, gamma_exp=2.0, delta_exp=2.0, D=None):
    """Power-law model with the stress-free D unless D is given explicitly."""
    if D is None:
        D = stress_free_D(kappa, C, gamma_exp, delta_exp)
    return PowerLawModel(p=p, kappa=kappa, vol=VolumetricTerm(C, D, gamma_exp, delta_exp))


def energy_density(model, R, stretch):
    """Phi(R, v1, v2, v3) for a :class:`StretchState` (or a 3-tuple)."""
    v1, v2, v3 = stretch.as_tuple() if isinstance(stretch, StretchState) else stretch
    if not 0.0 <= R <= 1.0:
        raise DomainError(f"R = {R} outside [0, 1]")
    return model.density(R, v1, v2, v3)


def partials(model, R, stretch):
    v1, v2, v3 = stretch.as_tuple() if isinstance(stretch, StretchState) else stretch
    if not 0.0 <= R <= 1.0:
        raise DomainError(f"R = {R} outside [0, 1]")
    return model.partials(R, v1, v2, v3)


# --------------------------------------------------------------------------
# growth-hypothesis probes


@dataclass(frozen=True)
class GrowthProbe:
    """Sample ranges for :func:`validate_growth`."""

    v_min: float = 0.05
    v_max: float = 1.0e3
    d_min: float = 1.0e-6
    d_max: float = 1.0e6
    n_samples: int = 400
    eta: float = 1.5
    v_tails: tuple = (1.0e1, 1.0e2, 1.0e3, 1.0e4)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: Optional[bool]
    value: float
    detail: str

    def __post_init__(self):
        if self.passed is not None:
            object.__setattr__(self, "passed", bool(self.passed))

    @property
    def label(self):
        if self.passed is None:
            return "INFO"
        return "PASS" if self.passed else "FAIL"


@dataclass
class GrowthReport:
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks if c.passed is not None)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def lines(self):
        return [f"{c.label:4s} {c.name}: {c.detail}" for c in self.checks]


def _log_slope(x, y):
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        return float("nan")
    return np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0]


def _convex_on(fn, t):
    vals = fn(t)
    # second differences on a geometric grid, normalised to a uniform stencil
    h0 = t[1:-1] - t[:-2]
    h1 = t[2:] - t[1:-1]
    dd = (vals[2:] - vals[1:-1]) / h1 - (vals[1:-1] - vals[:-2]) / h0
    scale = np.abs(vals[1:-1]) * 1e-12 + 1e-300
    return bool(np.all(dd > -scale)), float(dd.min())


def validate_growth(model, probe: Optional[GrowthProbe] = None):
    """Numerical probes of the constitutive growth hypotheses.

    Checks H1 (power-law lower bound for phi with exponent in (1, 3)),
    H2 (h(d)/d unbounded), H3 (d^s h(d) bounded below with
    s = gamma*/(gamma*-1), gamma* the fitted H1 exponent), H4 (integrability
    of v^2/(v^3-1)^2 Phi~(1/v^2, v, v) on (eta, inf)) and convexity of phi
    and h.  A ratio probe of |Phi_k v_k| / (Phi + 1) is reported without a
    verdict.  The result is advisory; nothing here gates a solve.
    """
    probe = probe or GrowthProbe()
    checks = []
    phi = model.phi_fn
    vol = model.vol

    v = np.geomspace(probe.v_min, probe.v_max, probe.n_samples)
    tail = v[v >= 1.0]
    phi_vals = phi.value(tail)
    if np.all(phi_vals > 0):
        expo = _log_slope(tail[-probe.n_samples // 4:], phi_vals[-probe.n_samples // 4:])
        const = float(np.min(phi_vals / tail**expo))
        ok = 1.0 < expo - 1e-9 and expo < 3.0 and const > 0
        detail = f"phi(v) >= {const:.4g} v^{expo:.4g} on v >= 1 (need exponent in (1, 3))"
    else:
        expo, ok, detail = float("nan"), False, "phi not positive on probe range"
    checks.append(CheckResult("H1", ok, expo, detail))

    d = np.geomspace(probe.d_min, probe.d_max, probe.n_samples)
    ratio = vol.value(d) / d
    big = d >= 1.0
    growth = _log_slope(d[big][-probe.n_samples // 4:], ratio[big][-probe.n_samples // 4:])
    incr = bool(np.all(np.diff(ratio[big][-probe.n_samples // 4:]) > 0))
    ok = incr and growth > 1e-3
    checks.append(CheckResult(
        "H2", ok, float(growth),
        f"h(d)/d grows like d^{growth:.4g} at large d (increasing: {incr})",
    ))

    if np.isfinite(expo) and expo > 1.0:
        s = expo / (expo - 1.0)
        small = d <= 1.0
        lower = d[small] ** s * vol.value(d[small])
        K = float(lower.min())
        trend = _log_slope(d[small][: probe.n_samples // 8], lower[: probe.n_samples // 8])
        ok = K > 0 and trend < 1e-6
        detail = f"min d^{s:.4g} h(d) = {K:.4g} on d <= 1, log-slope toward 0: {trend:.3g}"
    else:
        s, K, ok = float("nan"), float("nan"), False
        detail = "no admissible H1 exponent, s undefined"
    checks.append(CheckResult("H3", ok, K, detail))

    def h4_integrand(t):
        return t**2 / (t**3 - 1.0) ** 2 * model.comparison_density(1.0 / t**2, t, t)

    pieces = []
    a = probe.eta
    for b in probe.v_tails:
        val, _ = integrate.quad(h4_integrand, a, b, limit=200)
        pieces.append(val)
        a = b
    total = float(np.sum(pieces))
    ratios = [pieces[i + 1] / pieces[i] for i in range(1, len(pieces) - 1) if pieces[i] > 0]
    ok = bool(ratios) and all(r < 0.9 for r in ratios) and pieces[-1] < 1e-2 * total
    checks.append(CheckResult(
        "H4", ok, total,
        f"integral on [{probe.eta}, {probe.v_tails[-1]:.0e}] = {total:.6g}; "
        f"decade increments {', '.join(f'{x:.3g}' for x in pieces)}",
    ))

    ok_phi, m_phi = _convex_on(phi.value, v)
    checks.append(CheckResult("convex_phi", ok_phi, m_phi, f"min second difference {m_phi:.3g}"))
    ok_h, m_h = _convex_on(vol.value, d)
    checks.append(CheckResult("convex_h", ok_h, m_h, f"min second difference {m_h:.3g}"))

    rng = np.random.default_rng(0)
    states = rng.uniform(0.2, 5.0, size=(200, 3))
    ratios = []
    for v1, v2, v3 in states:
        pt = model.partials(0.5, v1, v2, v3)
        phi_val = model.density(0.5, v1, v2, v3)
        ratios.append(max(abs(pt.phi1 * v1), abs(pt.phi2 * v2)) / (phi_val + 1.0))
    m_est = float(np.max(ratios))
    checks.append(CheckResult(
        "derivative_bound", None, m_est,
        f"max |Phi_k v_k| / (Phi + 1) over 200 samples in [0.2, 5]^3 = {m_est:.4g}",
    ))
    return GrowthReport(checks)


def identity_residual(model):
    """phi1 at the undeformed state; zero for a stress-free reference."""
    return model.partials(0.0, 1.0, 1.0, 1.0).phi1


def baker_ericksen_margin(model, n=200, seed=0, low=0.2, high=5.0):
    """Minimum of (v1 phi1 - v2 phi2)(v1 - v2) over random pairs with v1 != v2.

    Positive for materials satisfying the Baker-Ericksen inequality.
    """
    rng = np.random.default_rng(seed)
    v = rng.uniform(low, high, size=(n, 3))
    v1, v2, v3 = v[:, 0], v[:, 1], v[:, 2]
    pt = model.partials(0.5, v1, v2, v3)
    be = (v1 * pt.phi1 - v2 * pt.phi2) * (v1 - v2)
    return float(np.min(be / np.maximum(np.abs(v1 - v2), 1e-300)))


def is_beta_free_form(model, n=101):
    """True when the model fits the beta = 0, gamma = 1 no-cavitation class.

    That class additionally needs alpha' <= 0 and phi' >= 0; both are
    sampled here.
    """
    t = np.linspace(0.0, 1.0, n)
    if isinstance(model, PowerLawModel):
        return bool(np.all(model.phi_fn.d1(np.geomspace(1e-3, 1e3, n)) >= 0))
    if model.psi_fn is not None:
        return False
    if not model.gamma_w.is_constant or not math.isclose(model.gamma_w(0.0), 1.0):
        return False
    alpha_slope = np.broadcast_to(model.alpha.deriv(t), t.shape)
    return bool(np.all(alpha_slope <= 1e-12) and np.all(model.phi_fn.d1(np.geomspace(1e-3, 1e3, n)) >= 0))
