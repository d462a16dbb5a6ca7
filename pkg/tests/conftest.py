import numpy as np
import pytest

from zpinchstab import (
    ModePair,
    PressureProfile,
    assemble_mode_forms,
    build_equilibrium,
    make_grid,
    plasma_space,
    vacuum_space,
)

GAMMA = 5.0 / 3.0


@pytest.fixture(scope="session")
def eq():
    """Parabolic reference column: p = 1 - r^2, wall at twice the radius."""
    return build_equilibrium(PressureProfile.parabolic(1.0, 1.0), 2.0, GAMMA, 1.0)


@pytest.fixture(scope="session")
def mk_forms(eq):
    """Assemble the forms of one mode on a configurable small mesh."""

    def build(
        m,
        k,
        n=32,
        nv=8,
        ratio=1.05,
        order=2,
        epsilon=0.1,
        delta=0.1,
        equilibrium=None,
    ):
        e = eq if equilibrium is None else equilibrium
        grid = make_grid("plasma", n, ratio, r0=e.r0)
        space = plasma_space(grid, order, m)
        vac = None
        if m != 0:
            vgrid = make_grid("vacuum", nv, ratio, r0=e.r0, rw=e.rw)
            vac = vacuum_space(vgrid, order)
        return assemble_mode_forms(
            e, space, ModePair(m, k), epsilon, delta, vac_space=vac
        )

    return build


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
