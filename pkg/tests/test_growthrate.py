"""Per-mode classification and the viscous fixed point s = sqrt(-lambda(s))."""
import numpy as np
import pytest

from zpinchstab import lambda_curve, solve_fixed_point
from zpinchstab.errors import BracketExhausted

# regression anchors: default discretization (64 plasma / 16 vacuum elements,
# grading 1.05, quadratic elements), bisection to |Phi - 1| <= 1e-8
MU_01 = 0.71887911718749997
MU_11 = 0.71522407812500011
LAM_21 = 0.91496619854357819
LAM_10 = 0.271074411209001


def _default_forms(mk_forms, m, k):
    return mk_forms(m, k, n=64, nv=16, ratio=1.05)


def test_sausage_fixed_point(mk_forms):
    res = solve_fixed_point(_default_forms(mk_forms, 0, 1))
    assert res.status == "unstable"
    assert res.mu == pytest.approx(MU_01, rel=1e-9)
    assert res.mu == res.s_star
    assert res.fixed_point_residual <= 1e-8
    # the defining identity: lambda(s*) = -mu^2 up to the Phi tolerance
    assert res.lambda_at_star == pytest.approx(-res.mu**2, rel=3e-8)


def test_kink_fixed_point(mk_forms):
    res = solve_fixed_point(_default_forms(mk_forms, 1, 1))
    assert res.status == "unstable"
    assert res.mu == pytest.approx(MU_11, rel=1e-9)


def test_quadratic_eigenrelation_residual(mk_forms):
    f = _default_forms(mk_forms, 1, 1)
    res = solve_fixed_point(f)
    scale = float(
        np.abs(f.K0).max() + res.mu * np.abs(f.K1).max() + res.mu**2 * np.abs(f.M).max()
    )
    assert res.quadratic_residual <= 1e-6 * scale
    # minimizer is mass-normalized
    assert res.minimizer @ (f.M @ res.minimizer) == pytest.approx(1.0, rel=1e-10)


def test_flute_mode_is_stable(mk_forms):
    res = solve_fixed_point(_default_forms(mk_forms, 2, 1))
    assert res.status == "stable" and res.mu == 0.0
    assert res.lambda_at_star == pytest.approx(LAM_21, rel=1e-9)


def test_axisymmetric_k0_is_marginal(mk_forms):
    res = solve_fixed_point(_default_forms(mk_forms, 0, 0))
    assert res.status == "stable" and res.mu == 0.0
    assert abs(res.lambda_at_star) <= 1e-10


def test_helical_k0_is_stable(mk_forms):
    res = solve_fixed_point(_default_forms(mk_forms, 1, 0))
    assert res.status == "stable"
    assert res.lambda_at_star == pytest.approx(LAM_10, rel=1e-6)


def test_reflection_partner_same_rate(mk_forms):
    plus = solve_fixed_point(_default_forms(mk_forms, 0, 1))
    minus = solve_fixed_point(_default_forms(mk_forms, 0, -1))
    assert minus.mu == pytest.approx(plus.mu, rel=1e-7)


def test_curve_monotone_and_sandwiched(mk_forms):
    f = mk_forms(0, 1, n=32)
    s_grid = [1e-3 * 2.0**j for j in range(10)]
    samples = lambda_curve(f, s_grid)
    for (s1, l1, e1), (s2, l2, _) in zip(samples, samples[1:]):
        assert l2 >= l1 - 1e-9
        assert l2 <= l1 + (s2 - s1) * e1 + 1e-9
        assert e1 > 0.0


def test_curve_input_validation(mk_forms):
    f = mk_forms(0, 1, n=8)
    with pytest.raises(ValueError):
        lambda_curve(f, [0.5, 0.1])
    with pytest.raises(ValueError):
        lambda_curve(f, [0.0, 0.1])


def test_samples_recorded_sorted(mk_forms):
    res = solve_fixed_point(mk_forms(0, 1, n=16))
    s_vals = [s for s, _ in res.lambda_samples]
    assert s_vals == sorted(s_vals)
    assert s_vals[0] == pytest.approx(1e-6)
    assert res.eigen_iterations >= 0


def test_bracket_exhaustion(mk_forms):
    with pytest.raises(BracketExhausted):
        solve_fixed_point(mk_forms(0, 1, n=16), s_max=0.01)
