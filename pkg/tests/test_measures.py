"""Exact-formula and quadrature tests for the measure-theory helpers.

Derived constants are frozen from independent computations (high-resolution
quadrature/MC cross-checks); identities are asserted at closed-form accuracy.
"""

import math

import numpy as np
import pytest
from scipy import integrate

from fractalcyl import measures as ms

TWO_PI = 2.0 * math.pi


# ============================================================================
# sphere areas and basic normalizations
# ============================================================================

def test_psi_small_values():
    assert ms.psi(0) == pytest.approx(2.0, rel=1e-15)
    assert ms.psi(1) == pytest.approx(TWO_PI, rel=1e-15)
    assert ms.psi(2) == pytest.approx(4.0 * math.pi, rel=1e-15)
    assert ms.psi(3) == pytest.approx(2.0 * math.pi ** 2, rel=1e-15)


def test_psi_recursion():
    for m in range(1, 20):
        lhs = ms.psi(m + 1)
        rhs = TWO_PI / m * ms.psi(m - 1)
        assert abs(lhs - rhs) <= 1e-12 * abs(rhs)


def test_upsilon():
    assert ms.upsilon(3) == pytest.approx(1.0 / (2.0 * math.pi ** 2), rel=1e-14)
    for d in range(2, 8):
        assert ms.upsilon(d) == pytest.approx(
            4.0 * math.pi / (ms.psi(d) * ms.psi(d - 1)), rel=1e-14)


def test_ball_volume():
    assert ms.ball_volume(1) == pytest.approx(2.0)
    assert ms.ball_volume(2) == pytest.approx(math.pi)
    assert ms.ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0)
    for m in range(1, 10):
        assert ms.ball_volume(m) == pytest.approx(ms.psi(m + 1) / TWO_PI,
                                                  rel=1e-14)


@pytest.mark.parametrize("d", [2, 3, 4, 6])
@pytest.mark.parametrize("r", [0.25, 0.5, 1.0, 3.0])
def test_nu_ball_power_law(d, r):
    assert ms.nu_ball(d, r) == pytest.approx(r ** (d - 1), rel=1e-14)


def test_vacancy_prob():
    assert ms.vacancy_prob(0.0, 5) == 1.0
    assert ms.vacancy_prob(2.0, 3) == pytest.approx(2.0 ** -6)
    with pytest.raises(ValueError):
        ms.vacancy_prob(-1.0, 2)


# ============================================================================
# two-ball measure and covering constants
# ============================================================================

def test_nu_two_balls_quad_frozen_values():
    assert ms.nu_two_balls_quad(2, 8.0) == pytest.approx(7.999993328601e-02,
                                                         rel=1e-9)
    assert ms.nu_two_balls_quad(3, 8.0) == pytest.approx(7.874760956035e-03,
                                                         rel=1e-9)
    assert ms.nu_two_balls_quad(4, 8.0) == pytest.approx(8.368637072552e-04,
                                                         rel=1e-9)


@pytest.mark.parametrize("d,dist", [(2, 6.0), (3, 8.0), (4, 10.0)])
def test_nu_two_balls_mc_matches_quad(d, dist):
    est, se = ms.nu_two_balls_mc(d, dist, n_samples=200_000, seed=11)
    quad = ms.nu_two_balls_quad(d, dist)
    assert abs(est - quad) <= 3.0 * se
    assert se > 0


def test_two_ball_scaling_bracket():
    # dist^{d-1} * nu stays bounded on the estimation grid (c1/c2 existence)
    for d in (2, 3, 4):
        vals = [ms.nu_two_balls_quad(d, s) * s ** (d - 1)
                for s in (4.0, 8.0, 16.0, 32.0)]
        assert max(vals) / min(vals) < 2.0
        assert ms.estimate_c2(d) >= max(vals)


def test_constants_frozen_values():
    c2e = ms.estimate_c2(3)
    cc = ms.constants(3, c2e)
    assert cc.C1 == pytest.approx(4.964101615137754, rel=1e-12)
    assert cc.C3 == pytest.approx(2.549306144334055, rel=1e-12)
    assert cc.C2 == pytest.approx(c2e / (2 * 16) + math.log(4.0), rel=1e-12)
    assert ms.constants(2, 0.0).C1 == pytest.approx(math.sqrt(2.0), rel=1e-12)
    assert ms.constants(4, 0.0).C1 == pytest.approx(44.0 / 3.0, rel=1e-12)
    assert ms.constants(2, 0.0).C3 == pytest.approx(1.3465735902799727,
                                                    rel=1e-12)
    assert ms.constants(4, 0.0).C3 == pytest.approx(4.026480513893278,
                                                    rel=1e-12)
    with pytest.raises(ValueError):
        ms.constants(1, 0.0)
    with pytest.raises(ValueError):
        ms.constants(3, -1.0)


# ============================================================================
# truncated radius masses
# ============================================================================

def test_cylinder_window_mass_zero_radius_is_log():
    # (0 + r)^{d-1} r^{-d} = 1/r, so the mass is log(r_hi / r_lo)
    for d in (2, 3, 5):
        got = ms.cylinder_window_mass(d, 0.0, 0.125, 1.0)
        assert got == pytest.approx(math.log(8.0), rel=1e-12)


@pytest.mark.parametrize("d,radius,r_lo", [(2, 0.7, 0.05), (3, 1.5, 0.01),
                                           (4, 2.2, 0.25), (6, 0.3, 0.5)])
def test_cylinder_window_mass_matches_quadrature(d, radius, r_lo):
    closed = ms.cylinder_window_mass(d, radius, r_lo, 1.0)
    num, _ = integrate.quad(lambda r: (radius + r) ** (d - 1) * r ** -d,
                            r_lo, 1.0, epsabs=1e-13, epsrel=1e-11)
    assert closed == pytest.approx(num, rel=1e-9)


def test_cylinder_window_cdf_endpoints_and_monotonicity():
    d, radius, r_lo = 3, 1.2, 0.03125
    rs = np.linspace(r_lo, 1.0, 200)
    cdf = ms.cylinder_window_cdf(d, radius, r_lo, rs)
    assert cdf[0] == pytest.approx(0.0, abs=1e-12)
    assert cdf[-1] == pytest.approx(ms.cylinder_window_mass(d, radius, r_lo),
                                    rel=1e-12)
    assert np.all(np.diff(cdf) > 0)


def test_cylinder_window_mass_validation():
    with pytest.raises(ValueError):
        ms.cylinder_window_mass(3, 1.0, 0.0)
    with pytest.raises(ValueError):
        ms.cylinder_window_mass(3, 1.0, 0.5, 0.25)
    with pytest.raises(ValueError):
        ms.cylinder_window_mass(3, -0.5, 0.5)


# ============================================================================
# induced shape measure: total variation and moments
# ============================================================================

def test_xi_tv_frozen_values():
    assert ms.xi_tv(4, 2, 1.0) == pytest.approx(1.0 / math.pi, rel=1e-14)
    # k = d-1: constant in r
    for r in (0.1, 0.5, 1.0):
        assert ms.xi_tv(3, 2, r) == pytest.approx(1.0 / TWO_PI, rel=1e-14)
    assert ms.xi_tv(5, 2, 0.5) == pytest.approx(
        0.25 * ms.psi(2) / ms.psi(4), rel=1e-14)
    with pytest.raises(ValueError):
        ms.xi_tv(3, 1, 1.0)
    with pytest.raises(ValueError):
        ms.xi_tv(2, 2, 1.0)


def test_diam_moment_frozen_values():
    assert ms.diam_moment(4, 2, 1, 1.0) == pytest.approx(0.75 * math.pi,
                                                         rel=1e-14)
    assert ms.diam_moment(4, 2, 2, 1.0) == pytest.approx(8.0, rel=1e-13)
    assert ms.diam_moment(4, 2, 3, 1.0) == math.inf
    assert ms.diam_moment(3, 2, 2, 1.0) == math.inf
    # scaling: n-th moment is homogeneous of degree n in r
    for n in (1, 2):
        assert ms.diam_moment(4, 2, n, 0.5) == pytest.approx(
            0.5 ** n * ms.diam_moment(4, 2, n, 1.0), rel=1e-13)


def test_shape_tail_prob_basics():
    assert ms.shape_tail_prob(4, 2, 0.0) == 1.0
    assert ms.shape_tail_prob(4, 2, 1.0) < 1.0
    # k = d-1 shapes have diam >= 2r a.s.; k <= d-2 shapes do not
    assert ms.shape_tail_prob(3, 2, 2.0) == pytest.approx(1.0, rel=1e-12)
    assert ms.shape_tail_prob(4, 2, 2.0) < 1.0
    taus = [2.0, 3.0, 5.0, 9.0]
    vals = [ms.shape_tail_prob(4, 2, t) for t in taus]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_shape_tail_prob_closed_form_4_2():
    # hand integration of the Beta(3/2, 1) x uniform-t law gives
    # P(diam >= x) = (3 pi / 2) x^-3 for x >= 2 (equality 3 pi/16 at x = 2)
    assert ms.shape_tail_prob(4, 2, 2.0) == pytest.approx(3.0 * math.pi / 16.0,
                                                          rel=1e-10)
    for x in (2.0, 3.0, 6.0, 12.0):
        assert ms.shape_tail_prob(4, 2, x) == pytest.approx(
            1.5 * math.pi * x ** -3.0, rel=1e-9)


def test_shape_tail_prob_matches_moment_derivative_route():
    # k = d-1 branch: P(diam >= x) = I_{4/x^2}(alpha, beta) regularized Beta
    from scipy.special import betainc
    for x in (2.5, 4.0, 10.0):
        got = ms.shape_tail_prob(3, 2, x)
        assert got == pytest.approx(float(betainc(1.0, 1.0, 4.0 / x ** 2)),
                                    rel=1e-10)


def test_shape_tail_kmoment_recovers_full_moment():
    got = ms.shape_tail_kmoment(4, 2, 0.0)
    assert got == pytest.approx(ms.diam_moment(4, 2, 2, 1.0), rel=1e-8)
    with pytest.raises(ValueError):
        ms.shape_tail_kmoment(3, 2, 1.0)  # 2k > d


def test_fractal_tail_exact_power_law():
    # frozen: xi tail = 1.5 tau^-3 exactly for tau >= 2 at (d,k) = (4,2)
    for tau in (2.0, 4.0, 6.0, 16.0):
        got = ms.xi_fractal_tail(4, 2, tau)
        assert got == pytest.approx(1.5 * tau ** -3.0, rel=1e-9)


def test_fractal_tail_identity_two_routes():
    # truncated-moment identity vs direct radial mixture: independent codes
    for tau in (2.0, 6.0, 20.0):
        lhs = ms.xi_fractal_tail(4, 2, tau)
        rhs = ms.xi_fractal_tail_integral(4, 2, tau)
        assert lhs == pytest.approx(rhs, rel=1e-6)
    assert ms.xi_fractal_tail(4, 2, 6.0) == pytest.approx(6.944444444444e-3,
                                                          rel=1e-9)


def test_fractal_tail_loglog_slope():
    taus = np.geomspace(4.0, 64.0, 9)
    vals = np.array([ms.xi_fractal_tail(4, 2, t) for t in taus])
    slope = np.polyfit(np.log(taus), np.log(vals), 1)[0]
    assert slope == pytest.approx(-3.0, abs=1e-9)


def test_beta_factor_monotone_and_limits():
    b0 = ms.beta_factor(4, 2, 0.0)
    assert b0 == pytest.approx(8.0, rel=1e-12)
    prev = b0
    for R in (0.25, 0.5, 1.0, 2.0, 4.0):
        cur = ms.beta_factor(4, 2, R)
        assert 0.0 < cur <= prev + 1e-12
        prev = cur
    # combining the exact tails: E[diam^2; diam >= 2R] = 2.25 pi / R, R >= 1
    for R in (1.0, 2.0, 4.0):
        assert ms.beta_factor(4, 2, R) == pytest.approx(2.25 * math.pi / R,
                                                        rel=1e-8)


# ============================================================================
# direction integral quadrature
# ============================================================================

@pytest.mark.parametrize("d,k", [(5, 2), (6, 2), (6, 3), (7, 2), (7, 4),
                                 (8, 2), (8, 5)])
def test_idk_quadrature_closed_form(d, k):
    closed = ms.psi(d - k - 1) * ms.psi(d - k - 2) / 2.0
    assert ms.idk_quadrature(d, k) == pytest.approx(closed, rel=1e-6)


def test_idk_quadrature_named_values():
    assert ms.idk_quadrature(5, 2) == pytest.approx(4.0 * math.pi ** 2,
                                                    rel=1e-8)
    assert ms.idk_quadrature(6, 2) == pytest.approx(4.0 * math.pi ** 3,
                                                    rel=1e-8)
    with pytest.raises(ValueError):
        ms.idk_quadrature(4, 2)


# ============================================================================
# survival / energy bounds
# ============================================================================

def test_survival_lower_bound_range():
    c2e = ms.estimate_c2(3)
    for lam in (0.0, 0.5, 1.5):
        val = ms.survival_lower_bound(3, 2, lam, c2e)
        assert 0.0 < val <= 1.0
    assert ms.survival_lower_bound(3, 2, 0.0, c2e) == pytest.approx(
        2.0 / (ms.psi(1) + 2.0), rel=1e-12)
    with pytest.raises(ValueError):
        ms.survival_lower_bound(3, 2, 2.0, c2e)


def test_zeta_energy_bound_finite_and_blows_up_at_edge():
    c2e = ms.estimate_c2(3)
    mid = ms.zeta_energy_bound(3, 2, 0.5, 0.75, c2e)
    assert math.isfinite(mid) and mid > 0
    near = ms.zeta_energy_bound(3, 2, 0.5, 1.499, c2e)
    assert near > mid
    with pytest.raises(ValueError):
        ms.zeta_energy_bound(3, 2, 0.5, 1.5, c2e)
    with pytest.raises(ValueError):
        ms.zeta_energy_bound(3, 2, 0.5, 0.0, c2e)
