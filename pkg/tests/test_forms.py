"""Quadratic-form assembly: structure, dual quadrature routes, vacuum."""
import numpy as np
import pytest

from zpinchstab import ModePair, assemble_mode_forms, condense_vacuum, make_grid
from zpinchstab import plasma_space, vacuum_space
from zpinchstab.errors import ModeSpaceMismatch, NonPositiveViscosity
from zpinchstab.forms import (
    assemble_ideal_m0_completed_square,
    constraint_quadrature,
    dissipation_quadrature,
    dump_triplets,
    energy_quadrature,
    vacuum_operator,
)
from zpinchstab.mesh import ETA, XI, ZETA
from zpinchstab.scan import reflection_signature

TAU = 2.0 * np.pi**2
MODES = [ModePair(0, 1), ModePair(1, 1), ModePair(2, 3), ModePair(0, 0)]


def _interpolate(space, trial: dict) -> np.ndarray:
    """Free-dof vector of (field -> callable) nodal interpolation."""
    v = np.zeros(space.n_free)
    for fld, fun in trial.items():
        for node, r in enumerate(space.node_positions):
            dof = space.free_index[node, fld]
            if dof >= 0:
                v[dof] = fun(r)
    return v


# quadratic trial fields: zero at the axis and (xi only) at the edge, so the
# FE interpolant is exact and the vacuum term drops out
TRIAL = {
    XI: lambda r: r - r * r,
    ETA: lambda r: 0.7 * r + 0.2 * r * r,
    ZETA: lambda r: r - 0.5 * r * r,
}
TRIAL_CALLS = {
    "xi": TRIAL[XI],
    "dxi": lambda r: 1.0 - 2.0 * r,
    "eta": TRIAL[ETA],
    "deta": lambda r: 0.7 + 0.4 * r,
    "zeta": TRIAL[ZETA],
    "dzeta": lambda r: 1.0 - r,
}


@pytest.mark.parametrize("mode", MODES)
def test_symmetry_and_definiteness(eq, mk_forms, mode):
    f = mk_forms(mode.m, mode.k, n=12, nv=6)
    for a in (f.K0, f.K1, f.M):
        assert np.max(np.abs(a - a.T)) <= 1e-12 * np.max(np.abs(a))
    np.linalg.cholesky(f.M)  # raises if not SPD
    k1_eigs = np.linalg.eigvalsh(f.K1)
    assert k1_eigs[0] >= -1e-10 * np.max(np.abs(f.K1))


@pytest.mark.parametrize("mode", MODES)
def test_matrix_vs_quadrature_routes(eq, mk_forms, mode):
    """The assembled forms agree with FEM-free Gauss-panel evaluation."""
    f = mk_forms(mode.m, mode.k, n=24, nv=8)
    v = _interpolate(f.space, TRIAL)
    e0 = float(v @ (f.K0 @ v))
    e1 = float(v @ (f.K1 @ v))
    j = float(v @ (f.M @ v))
    assert e0 == pytest.approx(
        energy_quadrature(eq, mode, TRIAL_CALLS, 0.0), rel=1e-9, abs=1e-11
    )
    assert e1 == pytest.approx(
        dissipation_quadrature(eq, mode, TRIAL_CALLS, 0.1, 0.1), rel=1e-9
    )
    # the density (1-r^2)^(3/5) has unbounded curvature at the edge, which
    # caps the element Gauss rule's accuracy on the mass form
    assert j == pytest.approx(constraint_quadrature(eq, TRIAL_CALLS), rel=1e-4)


def test_mass_route_exact_for_polynomial_density():
    # powerlaw exponent equal to gamma makes rho = p0^(3/5) (1 - r^2) exactly,
    # so both routes integrate polynomials and must agree to rounding
    from zpinchstab import PressureProfile, build_equilibrium

    gamma = 5.0 / 3.0
    e = build_equilibrium(PressureProfile.powerlaw(1.0, gamma, 1.0), 2.0, gamma, 1.0)
    grid = make_grid("plasma", 16, 1.05)
    space = plasma_space(grid, 2, 0)
    f = assemble_mode_forms(e, space, ModePair(0, 1), 0.1, 0.1)
    v = _interpolate(space, TRIAL)
    j = float(v @ (f.M @ v))
    assert j == pytest.approx(constraint_quadrature(e, TRIAL_CALLS), rel=1e-12)


def test_energy_affine_in_s_quadrature_route(eq):
    mode = ModePair(1, 2)
    e0 = energy_quadrature(eq, mode, TRIAL_CALLS, 0.0, 0.3, 0.2)
    e1 = dissipation_quadrature(eq, mode, TRIAL_CALLS, 0.3, 0.2)
    for s in (0.05, 0.7, 3.0):
        es = energy_quadrature(eq, mode, TRIAL_CALLS, s, 0.3, 0.2)
        assert es == pytest.approx(e0 + s * e1, rel=1e-12)


def test_completed_square_matches_term_list(eq):
    grid = make_grid("plasma", 16, 1.05)
    space = plasma_space(grid, 2, 0)
    for k in (0, 1, 4):
        f = assemble_mode_forms(eq, space, ModePair(0, k), 0.1, 0.1)
        alt = assemble_ideal_m0_completed_square(eq, space, k)
        scale = np.max(np.abs(f.K0))
        assert np.max(np.abs(f.K0 - alt)) <= 1e-12 * scale


def test_vacuum_condensed_kink_value(eq):
    # m=1, k=0, wall at 2: interior span {1, r^-2} gives energy 5/3 per unit
    # trace (times the 2 pi^2 measure); coupling is 1 for the parabolic column
    grid = make_grid("vacuum", 64, 1.0, rw=2.0)
    w = condense_vacuum(eq, vacuum_space(grid, 2), ModePair(1, 0))
    assert w == pytest.approx(TAU * 5.0 / 3.0, rel=1e-8)


def test_vacuum_interior_matches_bvp(eq):
    # k=0, m=2: interior solutions span {r, r^-3}
    grid = make_grid("vacuum", 64, 1.0, rw=2.0)
    vac = vacuum_operator(eq, vacuum_space(grid, 2), ModePair(2, 0))
    numeric = vac.interior_nodal(1.0)
    rn = vac.space.node_positions
    a = np.array([[1.0, 1.0], [2.0, 2.0**-3]])
    alpha, beta = np.linalg.solve(a, [vac.couple, 0.0])
    exact = alpha * rn + beta * rn**-3
    assert np.max(np.abs(numeric - exact)) <= 1e-6 * np.max(np.abs(exact))


def test_vacuum_couple_and_wall(eq):
    grid = make_grid("vacuum", 16, 1.0, rw=2.0)
    vac = vacuum_operator(eq, vacuum_space(grid, 2), ModePair(3, 2))
    assert vac.couple == pytest.approx(3.0 * eq.bhat(np.array([1.0]))[0], rel=1e-14)
    assert vac.interior_nodal(0.8)[-1] == 0.0  # pinned at the wall
    assert vac.energy(2.0) == pytest.approx(4.0 * vac.condensed_coefficient)


def test_reflection_conjugation_exact(eq, mk_forms):
    f = mk_forms(2, 3, n=8, nv=4)
    g = mk_forms(-2, -3, n=8, nv=4)
    sg = reflection_signature(f.space)
    for a, b in ((f.K0, g.K0), (f.K1, g.K1), (f.M, g.M)):
        conj = sg[:, None] * a * sg[None, :]
        assert np.array_equal(conj, b)


def test_pencil_and_scale(mk_forms):
    f = mk_forms(1, 1, n=8, nv=4)
    s = 0.37
    assert np.array_equal(f.pencil(s), f.K0 + s * f.K1)
    assert f.scale(s) > f.scale(0.0) > 0.0


def test_bandwidth_bound(mk_forms):
    f = mk_forms(1, 2, n=10, nv=4)
    bw = f.bandwidth
    i, j = np.nonzero(f.K0)
    assert np.max(np.abs(i - j)) <= bw
    assert bw == 2 * 3 + 3 - 1


def test_viscosity_must_be_positive(eq, mk_forms):
    with pytest.raises(NonPositiveViscosity):
        mk_forms(0, 1, n=8, epsilon=0.0)
    with pytest.raises(NonPositiveViscosity):
        mk_forms(0, 1, n=8, delta=-0.1)


def test_vacuum_required_for_nonzero_m(eq):
    grid = make_grid("plasma", 8, 1.0)
    space = plasma_space(grid, 2, 1)
    with pytest.raises(ModeSpaceMismatch):
        assemble_mode_forms(eq, space, ModePair(1, 1), 0.1, 0.1)


def test_wrong_pins_detected(eq):
    grid = make_grid("plasma", 8, 1.0)
    space_m0 = plasma_space(grid, 2, 0)
    with pytest.raises(ModeSpaceMismatch):
        assemble_mode_forms(eq, space_m0, ModePair(1, 1), 0.1, 0.1)


def test_dump_triplets_roundtrip(mk_forms, tmp_path):
    f = mk_forms(0, 1, n=6)
    path = tmp_path / "k0.txt"
    dump_triplets(f.K0, path, tol=0.0)
    rebuilt = np.zeros_like(f.K0)
    for line in path.read_text().splitlines():
        i, j, val = line.split()
        rebuilt[int(i), int(j)] = float(val)
    assert np.array_equal(rebuilt, f.K0)


def test_backends_agree(eq):
    pytest.importorskip("zpinchstab._asm_c")
    from zpinchstab import _asm_c, _asm_py, backend

    grid = make_grid("plasma", 12, 1.05)
    space = plasma_space(grid, 2, 0)
    saved = backend.accumulate_forms
    try:
        backend.accumulate_forms = _asm_c.accumulate_forms
        f_c = assemble_mode_forms(eq, space, ModePair(0, 2), 0.1, 0.1)
        backend.accumulate_forms = _asm_py.accumulate_forms
        f_p = assemble_mode_forms(eq, space, ModePair(0, 2), 0.1, 0.1)
    finally:
        backend.accumulate_forms = saved
    for a, b in ((f_c.K0, f_p.K0), (f_c.K1, f_p.K1), (f_c.M, f_p.M)):
        assert np.max(np.abs(a - b)) <= 1e-13 * np.max(np.abs(a))
