"""Cylindrical screw-pinch steady states driven by a radial pressure profile.

The azimuthal field is reconstructed from the pressure gradient,

    B_theta(r)^2 = -(2/r^2) * int_0^r s^2 p'(s) ds,

which makes the radial force balance p' + B B' + B^2/r = 0 an identity for
any profile with p'(0)=0.  The axial current density follows from
J_z = (1/r)(r B_theta)' = -p'/B_theta, with the removable singularity on the
axis handled by the limit J_z(0) = 2 B_theta'(0).  Outside the column the
field is curl-free: r * Bhat_theta is constant on (r0, rw].
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import integrate
from scipy.interpolate import CubicSpline

from .errors import InvalidGrid, NegativeFieldSquare, NonAdmissibleProfile

__all__ = [
    "PressureProfile",
    "Equilibrium",
    "AdmissibilityReport",
    "CriterionReport",
    "build_equilibrium",
    "check_admissibility",
    "criterion_scan",
]

_QUAD_TOL = 1.0e-12  # absolute tolerance of all adaptive quadratures here


def _as_array(r) -> np.ndarray:
    return np.atleast_1d(np.asarray(r, dtype=float))


@dataclass(frozen=True)
class PressureProfile:
    """Analytic radial pressure with exact derivative evaluators.

    Use the classmethod constructors; they fill the evaluator slots.

    Parameters
    ----------
    kind : str
        One of ``parabolic``, ``powerlaw``, ``hollow-current``, ``table``.
    r0 : float
        Plasma radius; p(r0) = 0 by construction.
    parameters : dict
        Kind-specific scalars, kept for reporting/round-trips.
    """

    kind: str
    r0: float
    parameters: dict = field(default_factory=dict)
    _p: Callable = None
    _dp: Callable = None
    _btheta2: Callable = None  # closed form when available, else None

    # -- constructors ------------------------------------------------------

    @classmethod
    def parabolic(cls, p0: float = 1.0, r0: float = 1.0) -> "PressureProfile":
        """p(r) = p0 (1 - (r/r0)^2); B_theta = sqrt(p0) r/r0 in closed form."""
        if p0 <= 0 or r0 <= 0:
            raise NonAdmissibleProfile("parabolic profile needs p0 > 0 and r0 > 0")

        def p(r):
            u = _as_array(r) / r0
            return p0 * (1.0 - u * u)

        def dp(r):
            r = _as_array(r)
            return -2.0 * p0 * r / (r0 * r0)

        def b2(r):
            u = _as_array(r) / r0
            return p0 * u * u

        return cls("parabolic", r0, {"p0": p0}, p, dp, b2)

    @classmethod
    def powerlaw(cls, p0: float = 1.0, nu: float = 2.0, r0: float = 1.0) -> "PressureProfile":
        """p(r) = p0 (1 - (r/r0)^2)^nu, nu >= 1 (nu = 1 is the parabolic case).

        The field integral has the closed form

            B^2(r) = (4 nu p0 / u^2) * I(u),    u = r/r0,
            I(u) = (1/2) [ 1/(nu(nu+1)) - (1-u^2)^nu / nu + (1-u^2)^(nu+1)/(nu+1) ].
        """
        if p0 <= 0 or r0 <= 0 or nu < 1:
            raise NonAdmissibleProfile("powerlaw profile needs p0 > 0, r0 > 0, nu >= 1")

        def p(r):
            u = _as_array(r) / r0
            return p0 * np.clip(1.0 - u * u, 0.0, None) ** nu

        def dp(r):
            u = _as_array(r) / r0
            core = np.clip(1.0 - u * u, 0.0, None) ** (nu - 1.0)
            return -2.0 * nu * p0 * u * core / r0

        def b2(r):
            u = _as_array(r) / r0
            w = np.clip(1.0 - u * u, 0.0, None)
            iu = 0.5 * (1.0 / (nu * (nu + 1.0)) - w**nu / nu + w ** (nu + 1.0) / (nu + 1.0))
            out = np.empty_like(u)
            small = u < 1.0e-8
            # I(u) ~ u^4/4 for u -> 0, so B^2 ~ nu p0 u^2
            out[small] = nu * p0 * u[small] ** 2
            out[~small] = 4.0 * nu * p0 * iu[~small] / u[~small] ** 2
            return out

        return cls("powerlaw", r0, {"p0": p0, "nu": nu}, p, dp, b2)

    @classmethod
    def hollow_current(
        cls,
        j0: float = 1.0,
        a: float = 0.3,
        b: float = 0.7,
        pedestal: float = 1.0e-2,
        r0: float = 1.0,
    ) -> "PressureProfile":
        """Profile parameterized by an off-axis current channel.

        J_z is the C^2 bump j0 t^3 (1-t)^3, t = (r-a)/(b-a), supported on
        [a, b].  The current part of the pressure follows from integrating
        p_J' = -B_J J_z backward from p_J(r0) = 0, and a linear pedestal
        pedestal*(1 - r/r0) keeps p > 0 inside the column.  The field is
        rebuilt from the *total* pressure gradient, which adds
        2*pedestal*r/(3 r0) to B^2 and keeps force balance exact.
        """
        if not (0.0 < a < b < r0):
            raise NonAdmissibleProfile("hollow-current needs 0 < a < b < r0")
        if j0 <= 0 or pedestal < 0:
            raise NonAdmissibleProfile("hollow-current needs j0 > 0 and pedestal >= 0")

        width = b - a
        # s * J_z(s) as a polynomial in t on [0,1]; its antiderivative gives
        # cum(r) = int_0^r s J_z ds exactly.
        t_poly = npoly.Polynomial([0.0, 1.0])
        bump = j0 * t_poly**3 * (1.0 - t_poly) ** 3
        s_of_t = npoly.Polynomial([a, width])
        integrand = s_of_t * bump
        anti = integrand.integ()  # antiderivative in t, zero at t=0
        cum_full = width * anti(1.0)

        def jz_profile(r):
            r = _as_array(r)
            t = np.clip((r - a) / width, 0.0, 1.0)
            out = j0 * t**3 * (1.0 - t) ** 3
            out[(r < a) | (r > b)] = 0.0
            return out

        def cum(r):
            r = _as_array(r)
            t = np.clip((r - a) / width, 0.0, 1.0)
            return width * anti(t)

        def btheta_j(r):
            r = _as_array(r)
            out = np.zeros_like(r)
            pos = r > 0
            out[pos] = cum(r[pos]) / r[pos]
            return out

        def b2(r):
            r = _as_array(r)
            bj = btheta_j(r)
            return bj * bj + 2.0 * pedestal * r / (3.0 * r0)

        pj_at_a = integrate.quad(
            lambda s: btheta_j(s)[0] * jz_profile(s)[0], a, b, epsabs=_QUAD_TOL, limit=200
        )[0]

        def p(r):
            r = _as_array(r)
            out = np.empty_like(r)
            for i, ri in enumerate(r):
                if ri >= b:
                    pj = 0.0
                elif ri <= a:
                    pj = pj_at_a
                else:
                    pj = integrate.quad(
                        lambda s: btheta_j(s)[0] * jz_profile(s)[0],
                        ri,
                        b,
                        epsabs=_QUAD_TOL,
                        limit=200,
                    )[0]
                out[i] = pj + pedestal * (1.0 - ri / r0)
            return out

        def dp(r):
            r = _as_array(r)
            return -btheta_j(r) * jz_profile(r) - pedestal / r0

        params = {"j0": j0, "a": a, "b": b, "pedestal": pedestal, "cum_full": cum_full}
        return cls("hollow-current", r0, params, p, dp, b2)

    @classmethod
    def table(cls, r_nodes, p_nodes, r0: float | None = None) -> "PressureProfile":
        """Tabulated profile; cubic interpolation with one-sided (not-a-knot)
        end conditions, derivatives taken from the interpolant itself."""
        r_nodes = np.asarray(r_nodes, dtype=float)
        p_nodes = np.asarray(p_nodes, dtype=float)
        if r_nodes.ndim != 1 or r_nodes.size < 4 or np.any(np.diff(r_nodes) <= 0):
            raise NonAdmissibleProfile("table profile needs >= 4 strictly increasing radii")
        if r_nodes[0] != 0.0:
            raise NonAdmissibleProfile("table profile must start at r = 0")
        r0 = float(r_nodes[-1]) if r0 is None else float(r0)
        spline = CubicSpline(r_nodes, p_nodes, bc_type="not-a-knot")
        dspline = spline.derivative()

        def p(r):
            return np.clip(spline(_as_array(r)), 0.0, None)

        def dp(r):
            return np.asarray(dspline(_as_array(r)), dtype=float)

        return cls("table", r0, {"n_nodes": int(r_nodes.size)}, p, dp, None)

    # -- evaluators --------------------------------------------------------

    def p(self, r):
        return self._p(r)

    def dp(self, r):
        return self._dp(r)


@dataclass(frozen=True)
class Equilibrium:
    """Immutable steady state; all evaluators are pure and vectorized."""

    profile: PressureProfile
    rw: float
    gamma: float
    entropyA: float
    _btheta2: Callable = None

    @property
    def r0(self) -> float:
        return self.profile.r0

    def p(self, r):
        return self.profile.p(r)

    def dp(self, r):
        return self.profile.dp(r)

    def btheta2(self, r):
        return self._btheta2(r)

    def btheta(self, r):
        return np.sqrt(np.clip(self._btheta2(r), 0.0, None))

    def dbtheta(self, r):
        """B_theta'(r) from the identity (B^2)' = -2p' - 2B^2/r (r > 0)."""
        r = _as_array(r)
        b2 = self._btheta2(r)
        b = np.sqrt(np.clip(b2, 0.0, None))
        out = np.empty_like(r)
        on_axis = r < 1.0e-13 * self.r0
        interior = ~on_axis
        safe = interior & (b > 0)
        out[safe] = (-self.dp(r[safe]) - b2[safe] / r[safe]) / b[safe]
        out[interior & ~safe] = 0.0
        if np.any(on_axis):
            out[on_axis] = self._dbtheta_axis()
        return out

    def _dbtheta_axis(self) -> float:
        # B ~ B'(0) r near the axis; estimate the slope just off axis.
        delta = 1.0e-6 * self.r0
        return float(self.btheta(np.array([delta]))[0] / delta)

    def jz(self, r):
        """J_z = -p'/B_theta; 2 B'(0) on axis; 0 where both p' and B vanish."""
        r = _as_array(r)
        b = self.btheta(r)
        dpr = self.dp(r)
        out = np.zeros_like(r)
        scale = max(1.0, float(self.btheta(np.array([self.r0]))[0]))
        live = b > 1.0e-13 * scale
        out[live] = -dpr[live] / b[live]
        on_axis = (~live) & (r < 1.0e-13 * self.r0)
        if np.any(on_axis):
            out[on_axis] = 2.0 * self._dbtheta_axis()
        return out

    def rho(self, r):
        return (np.clip(self.p(r), 0.0, None) / self.entropyA) ** (1.0 / self.gamma)

    def bhat(self, r):
        """Vacuum azimuthal field on (r0, rw]: B_theta(r0) * r0 / r."""
        r = _as_array(r)
        b0 = float(self.btheta(np.array([self.r0]))[0])
        return b0 * self.r0 / r

    def force_balance_residual(self, r):
        """|p' + B B' + B^2/r| / max(1, |p'|), pointwise for r in (0, r0)."""
        r = _as_array(r)
        num = np.abs(self.dp(r) + self.btheta(r) * self.dbtheta(r) + self.btheta2(r) / r)
        return num / np.maximum(1.0, np.abs(self.dp(r)))


@dataclass(frozen=True)
class AdmissibilityReport:
    admissible: bool
    pressure_positive: bool
    pressure_zero_only_at_edge: bool
    gradient_nonpositive_near_edge: bool
    field_square_nonnegative: bool
    p_over_dp_vanishes: bool
    reasons: tuple[str, ...]
    p_over_dp_samples: tuple[float, ...]


@dataclass(frozen=True)
class CriterionReport:
    m: int
    minimum: float
    argmin: float
    drive_negative: bool
    values: np.ndarray


def build_equilibrium(
    profile: PressureProfile, rw: float, gamma: float, entropyA: float
) -> Equilibrium:
    """Construct the steady state and validate its defining identities.

    Raises
    ------
    NonAdmissibleProfile
        If p(r0) != 0 or p < 0 on the sample grid.
    NegativeFieldSquare
        If the reconstructed B^2 dips below -tol anywhere.
    """
    if rw <= profile.r0:
        raise NonAdmissibleProfile("wall radius rw must exceed the plasma radius r0")
    if gamma <= 1.0:
        raise NonAdmissibleProfile("adiabatic exponent gamma must exceed 1")
    if entropyA <= 0.0:
        raise NonAdmissibleProfile("entropy constant A must be positive")

    r0 = profile.r0
    sample = np.linspace(0.0, r0, 2049)
    p_vals = profile.p(sample)
    p_scale = float(np.max(np.abs(p_vals)))
    if p_scale <= 0.0:
        raise NonAdmissibleProfile("pressure is identically zero")
    if abs(float(profile.p(np.array([r0]))[0])) > 1.0e-10 * p_scale:
        raise NonAdmissibleProfile("p(r0) must vanish")
    if np.any(p_vals < -1.0e-12 * p_scale):
        raise NonAdmissibleProfile("pressure negative inside the column")

    btheta2 = profile._btheta2
    if btheta2 is None:
        btheta2 = _btheta2_from_quadrature(profile)

    b2_vals = btheta2(sample[1:])
    if np.any(b2_vals < -1.0e-10 * max(1.0, p_scale)):
        raise NegativeFieldSquare("field square from the pressure integral went negative")

    def clipped_b2(r):
        return np.clip(btheta2(_as_array(r)), 0.0, None)

    return Equilibrium(profile, float(rw), float(gamma), float(entropyA), clipped_b2)


def _btheta2_from_quadrature(profile: PressureProfile) -> Callable:
    """B^2(r) = -(2/r^2) int_0^r s^2 p'(s) ds by adaptive quadrature."""

    def integrand(s):
        return s * s * profile.dp(np.array([s]))[0]

    def b2(r):
        r = _as_array(r)
        order = np.argsort(r)
        sorted_r = r[order]
        acc = np.empty_like(sorted_r)
        total = 0.0
        prev = 0.0
        for i, ri in enumerate(sorted_r):
            if ri > prev:
                total += integrate.quad(integrand, prev, ri, epsabs=_QUAD_TOL, limit=200)[0]
                prev = ri
            acc[i] = total
        out = np.zeros_like(r)
        pos = sorted_r > 0
        vals = np.zeros_like(sorted_r)
        vals[pos] = -2.0 * acc[pos] / sorted_r[pos] ** 2
        out[order] = vals
        return out

    return b2


def check_admissibility(eq: Equilibrium, tol: float = 1.0e-4) -> AdmissibilityReport:
    """Pointwise admissibility screen for the pressure profile.

    Checks: p >= 0 with its only zero at r0; p' <= 0 near the edge; the
    reconstructed B^2 >= 0 on a grid; and the flatness indicator
    p/p' -> 0 as r -> r0, sampled at r0 - 2^-j r0 for j = 4..20 (monotone
    decay to below `tol` required).
    """
    r0 = eq.r0
    reasons: list[str] = []
    interior = np.linspace(0.0, r0, 2049)[:-1]
    p_in = eq.p(interior)
    p_scale = float(np.max(np.abs(p_in)))

    pressure_positive = bool(np.all(p_in >= -1.0e-12 * p_scale))
    if not pressure_positive:
        reasons.append("p < 0 inside the column")

    zero_only_at_edge = bool(np.all(p_in[interior < r0 * (1 - 1e-6)] > 1.0e-12 * p_scale))
    if abs(float(eq.p(np.array([r0]))[0])) > 1.0e-10 * p_scale:
        zero_only_at_edge = False
        reasons.append("p(r0) != 0")
    elif not zero_only_at_edge:
        reasons.append("p touches zero before r0")

    near = np.linspace(0.9 * r0, r0, 257)
    gradient_ok = bool(np.all(eq.dp(near) <= 1.0e-12 * max(1.0, p_scale)))
    if not gradient_ok:
        reasons.append("p' > 0 near r0")

    b2_ok = bool(np.all(eq.btheta2(interior[1:]) >= 0.0))
    if not b2_ok:
        reasons.append("B^2 < 0 on the check grid")

    js = np.arange(4, 21)
    rs = r0 - (0.5**js) * r0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.abs(eq.p(rs) / eq.dp(rs))
        ratio = np.where(np.isfinite(ratio), ratio, np.inf)
        monotone = bool(np.all(np.diff(ratio) <= 1.0e-12 + 1.0e-6 * ratio[:-1]))
    vanishes = monotone and ratio[-1] < tol
    if not vanishes:
        reasons.append("p/p' does not decay to zero at r0")

    admissible = (
        pressure_positive and zero_only_at_edge and gradient_ok and b2_ok and vanishes
    )
    return AdmissibilityReport(
        admissible,
        pressure_positive,
        zero_only_at_edge,
        gradient_ok,
        b2_ok,
        vanishes,
        tuple(reasons),
        tuple(float(x) for x in ratio),
    )


def criterion_scan(eq: Equilibrium, m: int, grid) -> CriterionReport:
    """Pointwise drive criterion for azimuthal mode number m.

    m = 0:  p' + 2 gamma p B^2 / (r (gamma p + B^2));  the mode family can
    be driven wherever this is negative.
    m != 0: 2 p' + m^2 B^2 / r.

    `grid` is a RadialGrid over a closed subinterval of (0, r0) or any
    array of radii strictly inside (0, r0).
    """
    nodes = np.asarray(getattr(grid, "nodes", grid), dtype=float)
    if nodes.ndim != 1 or nodes.size == 0 or np.any(np.diff(nodes) <= 0):
        raise InvalidGrid("criterion grid must be strictly increasing and nonempty")
    if nodes[0] <= 0.0 or nodes[-1] >= eq.r0:
        raise InvalidGrid("criterion grid must lie strictly inside (0, r0)")

    p = eq.p(nodes)
    dp = eq.dp(nodes)
    b2 = eq.btheta2(nodes)
    if m == 0:
        gp = eq.gamma * p
        vals = dp + 2.0 * gp * b2 / (nodes * (gp + b2))
    else:
        vals = 2.0 * dp + (m * m) * b2 / nodes
    idx = int(np.argmin(vals))
    return CriterionReport(
        m=int(m),
        minimum=float(vals[idx]),
        argmin=float(nodes[idx]),
        drive_negative=bool(vals[idx] < 0.0),
        values=vals,
    )
