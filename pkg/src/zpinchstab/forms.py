"""Per-mode discrete quadratic forms.

For each Fourier pair (m, k) three symmetric forms are assembled over the
free displacement dofs (xi, eta, zeta):

* ``K0`` — the s-independent energy: field-line bending, compression, the
  m^2-weighted radial correction, the sign-indefinite drive term, and (for
  m != 0) the condensed vacuum energy attached to the edge displacement;
* ``K1`` — the viscous dissipation form with unit strength (epsilon- and
  delta-weighted squares); the energy at viscosity parameter s is
  ``v^T (K0 + s K1) v``, affine in s by construction;
* ``M``  — the constraint mass 2*pi^2 * int rho (xi^2+eta^2+zeta^2) r dr.

Everything is expressed as a list of weighted squares

    sum_t int c_t(r) ( sum_f a_{t,f}(r) u_f + b_{t,f}(r) u_f' )^2  r dr,

accumulated by the selected backend kernel and scattered into dense
symmetric matrices with a fixed small bandwidth.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from . import backend
from .errors import ModeSpaceMismatch, NonPositiveViscosity, SingularVacuumBlock
from .mesh import ETA, XI, ZETA, FemSpace

__all__ = [
    "TAU",
    "ModePair",
    "ModeForms",
    "Term",
    "VacuumOperator",
    "term_combo",
    "ideal_terms",
    "dissipation_terms",
    "mass_terms",
    "pencil_terms",
    "assemble_constraint",
    "assemble_ideal",
    "assemble_dissipation",
    "condense_vacuum",
    "vacuum_operator",
    "assemble_mode_forms",
    "assemble_ideal_m0_completed_square",
    "energy_quadrature",
    "constraint_quadrature",
    "dissipation_quadrature",
    "dump_triplets",
]

TAU = 2.0 * np.pi**2  # common prefactor of every energy; cancels in ratios


@dataclass(frozen=True)
class ModePair:
    m: int
    k: int


@dataclass(frozen=True)
class Term:
    """One weighted square: int c(r) (sum_f a_f(r) u_f + b_f(r) u_f')^2 r dr.

    `coeff` and the `alpha`/`beta` entries are vectorized callables of r
    (or plain scalars).  Terms are the single source of truth shared by the
    matrix assembly and the strong-form residual evaluation.
    """

    coeff: object
    alpha: dict
    beta: dict

    def all_fields(self):
        return set(self.alpha) | set(self.beta)

    def scaled(self, factor: float) -> "Term":
        base = self.coeff
        return Term(lambda r: factor * _call(base, r), self.alpha, self.beta)


def _call(fun, r: np.ndarray) -> np.ndarray:
    if callable(fun):
        return np.broadcast_to(np.asarray(fun(r), dtype=float), r.shape)
    return np.broadcast_to(np.asarray(float(fun)), r.shape)


def term_combo(term: Term, r: np.ndarray, values: dict, derivs: dict) -> np.ndarray:
    """L_t(r) = sum_f a_f u_f + b_f u_f' for given field samples."""
    out = np.zeros_like(r)
    for fld, fun in term.alpha.items():
        out = out + _call(fun, r) * values[fld]
    for fld, fun in term.beta.items():
        out = out + _call(fun, r) * derivs[fld]
    return out


class _TermList:
    """Collect terms on one space and assemble their global matrix."""

    def __init__(self, space: FemSpace, weight_r: bool = True):
        r, w, phi, dphi = space.quad_basis()
        self.space = space
        self.r = r
        self.w = TAU * w * (r if weight_r else 1.0)
        self.phi = phi
        self.dphi = dphi
        self._coeffs: list[np.ndarray] = []
        self._alphas: list[np.ndarray] = []
        self._betas: list[np.ndarray] = []

    def add(self, c, alpha: dict | None = None, beta: dict | None = None) -> None:
        shape = self.r.shape
        nf = self.space.nfields
        a = np.zeros(shape + (nf,))
        b = np.zeros(shape + (nf,))
        for fld, val in (alpha or {}).items():
            a[..., fld] = val
        for fld, val in (beta or {}).items():
            b[..., fld] = val
        self._coeffs.append(np.broadcast_to(np.asarray(c, dtype=float), shape))
        self._alphas.append(a)
        self._betas.append(b)

    def add_term(self, term: Term) -> None:
        flat = self.r.ravel()
        shp = self.r.shape
        self.add(
            _call(term.coeff, flat).reshape(shp),
            {f: _call(v, flat).reshape(shp) for f, v in term.alpha.items()},
            {f: _call(v, flat).reshape(shp) for f, v in term.beta.items()},
        )

    def assemble(self) -> np.ndarray:
        coeff = np.ascontiguousarray(np.stack(self._coeffs))
        alpha = np.ascontiguousarray(np.stack(self._alphas))
        beta = np.ascontiguousarray(np.stack(self._betas))
        local = backend.accumulate_forms(
            np.ascontiguousarray(self.w),
            coeff,
            alpha,
            beta,
            np.ascontiguousarray(self.phi),
            np.ascontiguousarray(self.dphi),
        )
        return _scatter(self.space, np.asarray(local))


def _scatter(space: FemSpace, local: np.ndarray) -> np.ndarray:
    """Sum element matrices into the global free-dof matrix."""
    nf = space.nfields
    conn = space.element_node_indices()  # (E, A)
    gdof = space.free_index[conn]  # (E, A, F)
    gdof = gdof.reshape(conn.shape[0], -1)
    out = np.zeros((space.n_free, space.n_free))
    for e in range(conn.shape[0]):
        idx = gdof[e]
        keep = idx >= 0
        ii = idx[keep]
        out[np.ix_(ii, ii)] += local[e][np.ix_(keep, keep)]
    return out


# ---------------------------------------------------------------------------
# Pointwise equilibrium coefficients, cached per (profile, sample array)

_POINT_CACHE: dict = {}


def _eq_fun(eq, name: str):
    fun = getattr(eq, name)

    def wrapped(r: np.ndarray) -> np.ndarray:
        key = (id(eq), name, hash(r.tobytes()))
        hit = _POINT_CACHE.get(key)
        if hit is None:
            hit = np.asarray(fun(r), dtype=float)
            if len(_POINT_CACHE) > 256:
                _POINT_CACHE.clear()
            _POINT_CACHE[key] = hit
        return hit

    return wrapped


def mass_terms(eq) -> list[Term]:
    """rho-weighted squares of the three displacement fields."""
    rho = _eq_fun(eq, "rho")
    return [Term(rho, {fld: 1.0}, {}) for fld in (XI, ETA, ZETA)]


def dissipation_terms(eq, mode: ModePair, epsilon: float, delta: float) -> list[Term]:
    """Unit-strength viscous squares: three 2/9-weighted traceless shears,
    two curl-type shears, the helical shear, and the delta-weighted
    divergence square."""
    if epsilon <= 0.0 or delta <= 0.0:
        raise NonPositiveViscosity("viscosity coefficients must be positive")
    m, k = float(mode.m), float(mode.k)

    def inv(r):
        return 1.0 / r

    def m_over_r(r):
        return m / r

    c29 = (2.0 / 9.0) * epsilon
    return [
        Term(c29, {XI: inv, ZETA: m_over_r, ETA: -k}, {XI: -2.0}),
        Term(c29, {XI: lambda r: -2.0 / r, ZETA: lambda r: -2.0 * m / r, ETA: -k}, {XI: 1.0}),
        Term(c29, {XI: inv, ZETA: m_over_r, ETA: 2.0 * k}, {XI: 1.0}),
        Term(epsilon, {ZETA: inv, XI: m_over_r}, {ZETA: -1.0}),
        Term(epsilon, {XI: k}, {ETA: 1.0}),
        Term(epsilon, {ETA: m_over_r, ZETA: -k}, {}),
        Term(delta, {XI: inv, ZETA: m_over_r, ETA: -k}, {XI: 1.0}),
    ]


def ideal_terms(eq, mode: ModePair) -> list[Term]:
    """s-independent energy density as a term list: field-line bending,
    compression, the m^2-weighted radial correction, and the sign-indefinite
    drive.  The axisymmetric k=0 pair collapses to its own reduced form."""
    m, k = mode.m, mode.k
    dp = _eq_fun(eq, "dp")
    b2 = _eq_fun(eq, "btheta2")
    p = _eq_fun(eq, "p")
    gamma = eq.gamma

    def gp(r):
        return gamma * p(r)

    def b(r):
        return np.sqrt(np.clip(b2(r), 0.0, None))

    def inv(r):
        return 1.0 / r

    if m == 0 and k == 0:
        return [
            Term(b2, {XI: inv}, {XI: -1.0}),
            Term(gp, {XI: inv}, {XI: 1.0}),
            Term(lambda r: 2.0 * dp(r) / r, {XI: 1.0}, {}),
        ]

    def G(r):
        return m * m + (k * k) * r * r

    out = [
        Term(
            G,
            {ETA: lambda r: b(r) / r, XI: lambda r: k * b(r) / G(r)},
            {XI: lambda r: -k * r * b(r) / G(r)},
        ),
        Term(gp, {XI: inv, ETA: -float(k), ZETA: lambda r: m / r}, {XI: 1.0}),
    ]
    if m != 0:
        out.append(
            Term(lambda r: m * m * b2(r) / (r * r * G(r)), {XI: 1.0}, {XI: lambda r: -r})
        )
    out.append(Term(lambda r: (2.0 * dp(r) + m * m * b2(r) / r) / r, {XI: 1.0}, {}))
    return out


def pencil_terms(eq, mode: ModePair, epsilon: float, delta: float, s: float) -> list[Term]:
    """Term list of the full energy K0 + s K1 (condensed vacuum excluded)."""
    visc = [t.scaled(s) for t in dissipation_terms(eq, mode, epsilon, delta)]
    return ideal_terms(eq, mode) + visc


def _assemble_terms(space: FemSpace, term_list: list[Term]) -> np.ndarray:
    tl = _TermList(space)
    for t in term_list:
        tl.add_term(t)
    return tl.assemble()


def _check_pins(space: FemSpace, mode: ModePair) -> None:
    pins = set(space.essential_pins)
    want = {(0, XI), (0, ZETA)} if mode.m == 0 else {(0, XI), (0, ETA), (0, ZETA)}
    if pins != want:
        raise ModeSpaceMismatch(
            f"space pins {sorted(pins)} do not match mode m={mode.m} (expected {sorted(want)})"
        )


def assemble_constraint(eq, space: FemSpace, mode: ModePair) -> np.ndarray:
    """Mass form of the normalization 2*pi^2 int rho (xi^2+eta^2+zeta^2) r dr."""
    return _assemble_terms(space, mass_terms(eq))


def assemble_dissipation(
    eq, space: FemSpace, mode: ModePair, epsilon: float, delta: float
) -> np.ndarray:
    """Unit-strength viscous form; scaled by s when entering the pencil."""
    return _assemble_terms(space, dissipation_terms(eq, mode, epsilon, delta))


def assemble_ideal(
    eq, space: FemSpace, mode: ModePair, vac_space: FemSpace | None = None
) -> np.ndarray:
    """s-independent energy form, including the condensed vacuum energy for
    m != 0 (which then requires `vac_space`)."""
    _check_pins(space, mode)
    K0 = _assemble_terms(space, ideal_terms(eq, mode))
    if mode.m != 0:
        if vac_space is None:
            raise ModeSpaceMismatch("m != 0 needs a vacuum space for condensation")
        w_edge = condense_vacuum(eq, vac_space, mode)
        edge_dof = space.free_index[space.n_nodes - 1, XI]
        K0[edge_dof, edge_dof] += w_edge
    return K0


@dataclass(frozen=True)
class VacuumOperator:
    """Condensed vacuum energy and the interior recovery map.

    The vacuum form 2*pi^2 int [Q^2 + ((rQ)')^2/(m^2+k^2 r^2)] r dr is
    assembled on `space` (wall dof pinned), interior dofs are eliminated by
    a Schur complement with respect to the trace Q(r0), and the trace is
    slaved to the edge displacement through m*Bhat(r0)*xi(r0) = r0*Q(r0).
    """

    space: FemSpace
    matrix: np.ndarray  # full free-dof vacuum form (trace dof first)
    couple: float  # trace per unit edge displacement: m*Bhat(r0)/r0
    schur: float  # condensed energy per unit trace value squared
    _interior_map: np.ndarray  # interior dofs per unit trace value

    @property
    def condensed_coefficient(self) -> float:
        """Energy per unit edge displacement squared: schur * couple^2."""
        return self.schur * self.couple**2

    def interior_nodal(self, xi_edge: float) -> np.ndarray:
        """Nodal vacuum solution (including pinned wall zero) for a given
        edge displacement."""
        q_trace = self.couple * xi_edge
        free = np.concatenate([[q_trace], self._interior_map * q_trace])
        return self.space.full_vector(free)[:, 0]

    def energy(self, xi_edge: float) -> float:
        return self.condensed_coefficient * xi_edge**2


def vacuum_operator(eq, vac_space: FemSpace, mode: ModePair) -> VacuumOperator:
    m, k = mode.m, mode.k
    if m == 0:
        raise ModeSpaceMismatch("vacuum condensation applies to m != 0 only")
    wall = vac_space.n_nodes - 1
    if (wall, 0) not in set(vac_space.essential_pins):
        raise ModeSpaceMismatch("vacuum space must pin the wall dof")
    r, _, _, _ = vac_space.quad_basis()
    G = m * m + (k * k) * r * r
    terms = _TermList(vac_space)
    terms.add(1.0, alpha={0: 1.0})
    terms.add(1.0 / G, alpha={0: 1.0}, beta={0: r})
    V = terms.assemble()
    # trace dof is the first free dof (node 0, ascending numbering)
    V00 = V[0, 0]
    Vi0 = V[1:, 0]
    Vii = V[1:, 1:]
    try:
        fact = sla.cho_factor(Vii, lower=True)
    except sla.LinAlgError as exc:
        raise SingularVacuumBlock(str(exc)) from None
    interior_map = -sla.cho_solve(fact, Vi0)
    schur = float(V00 + Vi0 @ interior_map)
    r0 = eq.r0
    couple = m * float(eq.bhat(np.array([r0]))[0]) / r0
    return VacuumOperator(vac_space, V, couple, schur, interior_map)


def condense_vacuum(eq, vac_space: FemSpace, mode: ModePair) -> float:
    """Nonnegative coefficient multiplying xi(r0)^2 inside K0."""
    return vacuum_operator(eq, vac_space, mode).condensed_coefficient


def assemble_ideal_m0_completed_square(eq, space: FemSpace, k: int) -> np.ndarray:
    """Alternative m=0 route via the completed-square rewriting

        [2p'/r + 4 gp B^2/(r^2 (gp+B^2))] xi^2
        + (gp+B^2) [k eta - ((r xi)' - 2 B^2 xi/(gp+B^2))/r]^2.

    Pointwise identical to the bending+compression+drive sum; assembled
    independently as a transcription cross-check.
    """
    r = space.quad_basis()[0]
    flat = r.ravel()
    b2 = eq.btheta2(flat).reshape(r.shape)
    gp = eq.gamma * eq.p(flat).reshape(r.shape)
    dp = eq.dp(flat).reshape(r.shape)
    tot = gp + b2
    terms = _TermList(space)
    terms.add(2.0 * dp / r + 4.0 * gp * b2 / (r * r * tot), alpha={XI: 1.0})
    terms.add(tot, alpha={ETA: float(k), XI: (2.0 * b2 / tot - 1.0) / r}, beta={XI: -1.0})
    return terms.assemble()


@dataclass(frozen=True)
class ModeForms:
    """Assembled forms of one mode; immutable after construction."""

    mode: ModePair
    space: FemSpace
    K0: np.ndarray
    K1: np.ndarray
    M: np.ndarray
    vacuum_condensed: float
    eq: object
    epsilon: float
    delta: float
    vacuum: VacuumOperator | None

    @property
    def dof_map(self) -> np.ndarray:
        """(node, field) -> free dof index, -1 at essential pins."""
        return self.space.free_index

    @property
    def n_free(self) -> int:
        return self.space.n_free

    @property
    def bandwidth(self) -> int:
        s = self.space
        return s.order * s.nfields + s.nfields - 1

    def pencil(self, s: float) -> np.ndarray:
        return self.K0 + s * self.K1

    def scale(self, s: float) -> float:
        """Norm scale |K0| + s |K1| used by residual tolerances."""
        return float(np.linalg.norm(self.K0, np.inf) + s * np.linalg.norm(self.K1, np.inf))


def assemble_mode_forms(
    eq,
    space: FemSpace,
    mode: ModePair,
    epsilon: float,
    delta: float,
    vac_space: FemSpace | None = None,
) -> ModeForms:
    """Assemble all three forms plus the vacuum condensation for one mode."""
    _check_pins(space, mode)
    vac = None
    K0 = _assemble_terms(space, ideal_terms(eq, mode))
    w_edge = 0.0
    if mode.m != 0:
        if vac_space is None:
            raise ModeSpaceMismatch("m != 0 needs a vacuum space for condensation")
        vac = vacuum_operator(eq, vac_space, mode)
        w_edge = vac.condensed_coefficient
        edge_dof = space.free_index[space.n_nodes - 1, XI]
        K0[edge_dof, edge_dof] += w_edge
    K1 = assemble_dissipation(eq, space, mode, epsilon, delta)
    M = assemble_constraint(eq, space, mode)
    return ModeForms(mode, space, K0, K1, M, w_edge, eq, epsilon, delta, vac)


# ---------------------------------------------------------------------------
# FEM-free quadrature routes (independent oracles for tests and diagnostics)


def _panel_rule(a: float, b: float, n_panels: int, npts: int):
    x, w = np.polynomial.legendre.leggauss(npts)
    edges = np.linspace(a, b, n_panels + 1)
    h = np.diff(edges)
    r = edges[:-1, None] + h[:, None] * 0.5 * (x[None, :] + 1.0)
    wt = h[:, None] * 0.5 * w[None, :]
    return r.ravel(), wt.ravel()


def _eval_fields(fields: dict, r: np.ndarray):
    z = np.zeros_like(r)
    def get(name):
        f = fields.get(name)
        return z if f is None else np.asarray(f(r), dtype=float)
    return (get("xi"), get("dxi"), get("eta"), get("deta"), get("zeta"), get("dzeta"))


def energy_quadrature(
    eq,
    mode: ModePair,
    fields: dict,
    s: float = 0.0,
    epsilon: float = 1.0,
    delta: float = 1.0,
    n_panels: int = 512,
    npts: int = 8,
) -> float:
    """Evaluate the energy on callables by plain Gauss panels (no FEM).

    `fields` maps names xi, dxi, eta, deta, zeta, dzeta to vectorized
    callables; missing entries are zero.  The vacuum part is not included
    (intended for trial fields with zero edge displacement; add
    VacuumOperator.energy separately otherwise).
    """
    m, k = mode.m, mode.k
    r, w = _panel_rule(0.0, eq.r0, n_panels, npts)
    xi, dxi, eta, deta, zeta, dzeta = _eval_fields(fields, r)
    p = eq.p(r)
    dp = eq.dp(r)
    b2 = eq.btheta2(r)
    b = np.sqrt(np.clip(b2, 0.0, None))
    gp = eq.gamma * p
    if m == 0 and k == 0:
        acc = b2 * (xi / r - dxi) ** 2
    else:
        G = m * m + (k * k) * r * r
        acc = G * (b / r * eta + k * b / G * xi - k * r * b / G * dxi) ** 2
        if m != 0:
            acc = acc + m * m * b2 / (r * r * G) * (xi - r * dxi) ** 2
    acc = acc + gp * (xi / r + dxi - k * eta + m * zeta / r) ** 2
    acc = acc + (2.0 * dp + m * m * b2 / r) / r * xi**2
    if s != 0.0:
        e29 = (2.0 / 9.0) * epsilon
        acc = acc + s * (
            e29 * (-2.0 * dxi + xi / r + m * zeta / r - k * eta) ** 2
            + e29 * (dxi - 2.0 * xi / r - 2.0 * m * zeta / r - k * eta) ** 2
            + e29 * (dxi + xi / r + m * zeta / r + 2.0 * k * eta) ** 2
            + epsilon * (-dzeta + zeta / r + m * xi / r) ** 2
            + epsilon * (deta + k * xi) ** 2
            + epsilon * (m * eta / r - k * zeta) ** 2
            + delta * (dxi + xi / r + m * zeta / r - k * eta) ** 2
        )
    return TAU * float(np.sum(acc * r * w))


def dissipation_quadrature(
    eq,
    mode: ModePair,
    fields: dict,
    epsilon: float = 1.0,
    delta: float = 1.0,
    n_panels: int = 512,
    npts: int = 8,
) -> float:
    """Unit-s viscous form on callables (FEM-free)."""
    zero = energy_quadrature(eq, mode, fields, 0.0, epsilon, delta, n_panels, npts)
    one = energy_quadrature(eq, mode, fields, 1.0, epsilon, delta, n_panels, npts)
    return one - zero


def constraint_quadrature(eq, fields: dict, n_panels: int = 512, npts: int = 8) -> float:
    r, w = _panel_rule(0.0, eq.r0, n_panels, npts)
    xi, _, eta, _, zeta, _ = _eval_fields(fields, r)
    rho = eq.rho(r)
    return TAU * float(np.sum(rho * (xi**2 + eta**2 + zeta**2) * r * w))


def dump_triplets(matrix: np.ndarray, path: str, tol: float = 0.0) -> None:
    """Write a matrix as `row col value` lines (17 significant digits)."""
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(matrix.shape[0]):
            for j in range(matrix.shape[1]):
                v = matrix[i, j]
                if abs(v) > tol:
                    fh.write(f"{i} {j} {v:.17g}\n")
