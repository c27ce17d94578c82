"""Closed-form constants, measure normalizations, moments, tails, and bounds.

Everything here is deterministic: sphere areas and their recursion, the
line-measure normalization, hitting masses of balls and ball pairs, total
variations and diameter moments of the induced ellipsoid shape measures, tail
functionals of the fractal shape measure, and the explicit constants used by
the covering/vacancy bounds.

Two independent evaluation routes are kept on purpose wherever the test suite
cross-checks an identity: closed forms on one side, adaptive quadrature of the
defining integrals on the other.  The shape-measure quadratures use an exact
change of variables under which the squared reciprocal aspect factor
V = (1 + kappa^2) / (1 + rho^2 + kappa^2) is Beta((d-k+1)/2, k/2) distributed
and independent of the scaled offset t (density (d-k-1) t^{d-k-2} on (0,1));
the diameter is then diam = 2 r sqrt((1 - t^2)/V), with the t-factor absent
for k = d-1.  This representation was validated against direct quadrature of
the transformed-coordinate Jacobian density.
"""

from __future__ import annotations

import math
import threading
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import integrate
from scipy.special import betainc, gammaln

__all__ = [
    "psi",
    "upsilon",
    "ball_volume",
    "nu_ball",
    "nu_two_balls_mc",
    "nu_two_balls_quad",
    "estimate_c2",
    "constants",
    "CoveringConstants",
    "vacancy_prob",
    "cylinder_window_mass",
    "cylinder_window_cdf",
    "xi_tv",
    "diam_moment",
    "idk_quadrature",
    "shape_tail_prob",
    "shape_tail_kmoment",
    "xi_fractal_tail",
    "xi_fractal_tail_integral",
    "beta_factor",
    "survival_lower_bound",
    "zeta_energy_bound",
]

TWO_PI = 2.0 * math.pi


# ============================================================================
# Sphere areas and basic normalizations
# ============================================================================

_PSI_LOCK = threading.Lock()
_PSI_TABLE: dict[int, float] = {}


def psi(m: int) -> float:
    """Surface area of the unit m-sphere: psi_m = 2 pi^{(m+1)/2} / Gamma((m+1)/2).

    Evaluated through log-gamma for stability; memoized behind a lock so the
    table is safe to grow from multiple threads.
    """
    m = int(m)
    if m < 0:
        raise ValueError(f"need m >= 0, got {m}")
    with _PSI_LOCK:
        val = _PSI_TABLE.get(m)
        if val is None:
            val = math.exp(math.log(2.0) + 0.5 * (m + 1) * math.log(math.pi)
                           - gammaln(0.5 * (m + 1)))
            _PSI_TABLE[m] = val
    return val


def upsilon(d: int) -> float:
    """Normalization constant 4 pi / (psi_d psi_{d-1}) of the line-measure density."""
    if d < 2:
        raise ValueError("need d >= 2")
    return 4.0 * math.pi / (psi(d) * psi(d - 1))


def ball_volume(m: int) -> float:
    """Volume of the unit ball in R^m (= psi_{m-1}/m).  ball_volume(0) = 1."""
    if m == 0:
        return 1.0
    return psi(m - 1) / m


def nu_ball(d: int, r: float) -> float:
    """Line-measure mass of the lines hitting a radius-r ball: r^{d-1}."""
    if r < 0:
        raise ValueError("need r >= 0")
    return r ** (d - 1)


# ============================================================================
# Two-ball hitting measure: MC estimator and deterministic lens quadrature
# ============================================================================

def nu_two_balls_mc(d: int, distance: float, n_samples: int, seed: int):
    """Monte Carlo estimate of the line measure of {lines hitting both unit balls}.

    Lines hitting B(0,1) are sampled from the normalized restriction (mass 1):
    direction u uniform on the sphere, offset uniform on the unit (d-1)-ball of
    u-perp.  The estimate is the fraction also passing within distance 1 of the
    second center at `distance` along e_1, with a binomial standard error.

    Parameters
    ----------
    d : ambient dimension (>= 2)
    distance : center separation; must be >= 4 (the decay-regime assumption)
    n_samples, seed : MC budget and RNG seed

    Returns
    -------
    (estimate, std_error)
    """
    if distance < 4.0:
        raise ValueError("two-ball estimator requires distance >= 4")
    if n_samples < 1:
        raise ValueError("need n_samples >= 1")
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    x2 = np.zeros(d)
    x2[0] = distance
    hits = 0
    remaining = int(n_samples)
    chunk = 1 << 18
    while remaining > 0:
        m = min(chunk, remaining)
        u = rng.standard_normal((m, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        z = rng.standard_normal((m, d))
        z -= np.sum(z * u, axis=1, keepdims=True) * u
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        rad = rng.random(m) ** (1.0 / (d - 1))
        y = z * rad[:, None]
        # distance from x2 to the line {y + t u}; y is orthogonal to u
        w = x2[None, :] - y
        proj = w - np.sum(w * u, axis=1, keepdims=True) * u
        hits += int(np.count_nonzero(np.einsum("ij,ij->i", proj, proj) <= 1.0))
        remaining -= m
    p = hits / n_samples
    se = math.sqrt(max(p * (1.0 - p), 1.0 / n_samples) / n_samples)
    return p, se


def _cap_volume(n: int, h: float) -> float:
    """Volume of a height-h cap of the unit n-ball (0 <= h <= 2)."""
    if h <= 0.0:
        return 0.0
    if h >= 2.0:
        return ball_volume(n)
    val, _ = integrate.quad(lambda x: (1.0 - x * x) ** (0.5 * (n - 1)),
                            1.0 - h, 1.0, epsabs=1e-15, epsrel=1e-13)
    return ball_volume(n - 1) * val


def nu_two_balls_quad(d: int, distance: float) -> float:
    """Deterministic route to the two-ball hitting measure.

    Integrates, over line directions, the volume of the lens formed by the two
    unit (d-1)-ball shadows at perpendicular offset distance*sin(theta):
    nu = Upsilon_d * (psi_{d-2}/2) * int_0^pi lens(distance sin th) sin^{d-2}th dth.
    Used as the quadrature oracle for nu_two_balls_mc and to calibrate the
    two-ball constant; no lower bound on distance is required here.
    """
    if distance < 0:
        raise ValueError("need distance >= 0")

    def f(th: float) -> float:
        delta = distance * math.sin(th)
        lens = 2.0 * _cap_volume(d - 1, 1.0 - 0.5 * delta)
        return lens * math.sin(th) ** (d - 2)

    val, _ = integrate.quad(f, 0.0, math.pi, epsabs=1e-15, epsrel=1e-12, limit=200)
    return upsilon(d) * 0.5 * psi(d - 2) * val


def estimate_c2(d: int, grid=(4.0, 8.0, 16.0, 32.0), safety: float = 1.05) -> float:
    """Upper constant for the two-ball measure: sup over a distance grid of
    nu_two_balls_quad * distance^{d-1}, inflated by a small safety factor."""
    return safety * max(nu_two_balls_quad(d, s) * s ** (d - 1) for s in grid)


# ============================================================================
# Covering-bound constants and exact vacancy
# ============================================================================

class CoveringConstants(NamedTuple):
    C1: float
    C2: float
    C3: float


def constants(d: int, c2_est: float) -> CoveringConstants:
    """The three explicit constants of the covering/vacancy bounds.

    C1 = sum_{i=1}^{d-1} (d^{i/2}/i) C(d-1,i);
    C2 = c2_est/((d-1) 4^{d-1}) + log 4   (c2_est estimated numerically);
    C3 = (log d)/2 + sum over odd i in [1, d-1] of C(d-1,i)/i.
    """
    if d < 2:
        raise ValueError("need d >= 2")
    if c2_est < 0:
        raise ValueError("need c2_est >= 0")
    C1 = sum(d ** (0.5 * i) / i * math.comb(d - 1, i) for i in range(1, d))
    C2 = c2_est / ((d - 1) * 4 ** (d - 1)) + math.log(4.0)
    C3 = 0.5 * math.log(d) + sum(math.comb(d - 1, i) / i
                                 for i in range(1, d) if i % 2 == 1)
    return CoveringConstants(C1, C2, C3)


def vacancy_prob(lam: float, n: int) -> float:
    """Exact single-point vacancy probability 2^{-lambda n} at truncation level n."""
    if lam < 0 or n < 0:
        raise ValueError("need lambda >= 0 and n >= 0")
    return 2.0 ** (-lam * n)


# ============================================================================
# Truncated cylinder masses (radius distribution bookkeeping for samplers)
# ============================================================================

def _hit_antideriv(d: int, rho: float, r):
    """Antiderivative of (rho + s)^{d-1} s^{-d} ds, vectorized in r.

    Expands the binomial: terms C(d-1,j) rho^{d-1-j} s^{j-d}; the j = d-1 term
    integrates to log s, the others to s^{j-d+1}/(j-d+1).
    """
    r = np.asarray(r, dtype=float)
    out = math.comb(d - 1, d - 1) * np.log(r)
    for j in range(d - 1):
        coeff = math.comb(d - 1, j) * rho ** (d - 1 - j)
        out = out + coeff * r ** (j - d + 1) / (j - d + 1)
    return out


def cylinder_window_mass(d: int, radius: float, r_lo: float, r_hi: float = 1.0) -> float:
    """Mass int_{r_lo}^{r_hi} (radius + r)^{d-1} r^{-d} dr of cylinders with
    radius in [r_lo, r_hi] whose axis passes within r of a ball of the given
    window radius (exact closed form)."""
    if not (0.0 < r_lo <= r_hi):
        raise ValueError("need 0 < r_lo <= r_hi")
    if radius < 0:
        raise ValueError("need radius >= 0")
    lo = _hit_antideriv(d, radius, r_lo)
    hi = _hit_antideriv(d, radius, r_hi)
    return float(hi - lo)


def cylinder_window_cdf(d: int, radius: float, r_lo: float, r):
    """Unnormalized CDF (mass of [r_lo, r]) of the truncated radius density.

    Vectorized in r; paired with its density (radius + r)^{d-1} r^{-d} for
    Newton polishing in the samplers' inverse-CDF tables.
    """
    return _hit_antideriv(d, radius, r) - _hit_antideriv(d, radius, r_lo)


# ============================================================================
# Induced shape measures: total variation, moments, tails
# ============================================================================

def _check_dk(d: int, k: int):
    if d < 3 or not (2 <= k <= d - 1):
        raise ValueError(f"need d >= 3 and 2 <= k <= d-1, got d={d}, k={k}")


def xi_tv(d: int, k: int, r: float) -> float:
    """Total mass r^{d-k-1} psi_{d-k-1} / psi_{d-1} of the induced ellipsoid
    measure at fixed cylinder radius r; constant in r when k = d-1."""
    _check_dk(d, k)
    if r < 0:
        raise ValueError("need r >= 0")
    return r ** (d - k - 1) * psi(d - k - 1) / psi(d - 1)


def diam_moment(d: int, k: int, n: int, r: float):
    """n-th diameter moment under the normalized shape measure.

    Closed form 2^n r^n (2 pi psi_{d+n-k} psi_{d-n}) / (psi_d psi_{n+1}
    psi_{d-n-k}) when n < d-k+1; returns math.inf (a legitimate outcome, not
    an error) at and above the finiteness boundary.
    """
    _check_dk(d, k)
    if n < 1:
        raise ValueError("need moment order n >= 1")
    if r <= 0:
        raise ValueError("need r > 0")
    if n >= d - k + 1:
        return math.inf
    return (2.0 ** n * r ** n * TWO_PI * psi(d + n - k) * psi(d - n)
            / (psi(d) * psi(n + 1) * psi(d - n - k)))


def _beta_params(d: int, k: int):
    return 0.5 * (d - k + 1), 0.5 * k


def _beta_lognorm(alpha: float, beta: float) -> float:
    return gammaln(alpha + beta) - gammaln(alpha) - gammaln(beta)


def shape_tail_prob(d: int, k: int, x: float, quad_budget: int = 200) -> float:
    """P(diam >= x) under the normalized shape measure at unit cylinder radius.

    Uses the Beta-law representation (module docstring): for k <= d-2 the
    probability is the v-integral of the Beta density times
    (1 - v x^2/4)^{(d-k-1)/2}; for k = d-1 it is the regularized incomplete
    Beta function at 4/x^2.
    """
    _check_dk(d, k)
    if x <= 0:
        return 1.0
    alpha, beta = _beta_params(d, k)
    vmax = min(1.0, 4.0 / (x * x))
    if k == d - 1:
        return float(betainc(alpha, beta, vmax))
    q = d - k - 1
    lognorm = _beta_lognorm(alpha, beta)

    def f(v: float) -> float:
        dens = math.exp(lognorm + (alpha - 1.0) * math.log(v)
                        + (beta - 1.0) * math.log1p(-v))
        u = 1.0 - v * x * x / 4.0
        return dens * u ** (0.5 * q) if u > 0.0 else 0.0

    val, _ = integrate.quad(f, 0.0, vmax, epsabs=1e-14, epsrel=1e-11,
                            limit=int(quad_budget))
    return val


def shape_tail_kmoment(d: int, k: int, x: float, quad_budget: int = 200) -> float:
    """E[diam^k; diam >= x] under the normalized shape measure at unit radius.

    Finite whenever 2k <= d.  x = 0 recovers the full k-th moment (matching
    diam_moment, which is the independent closed-form route).
    """
    _check_dk(d, k)
    if 2 * k > d:
        raise ValueError("k-th diameter moment is infinite for 2k > d")
    alpha, beta = _beta_params(d, k)
    lognorm = _beta_lognorm(alpha, beta)
    vmax = 1.0 if x <= 0 else min(1.0, 4.0 / (x * x))
    if vmax <= 0.0:
        return 0.0
    q = d - k - 1

    def inner(v: float) -> float:
        t2max = 1.0 if x <= 0 else 1.0 - v * x * x / 4.0
        if t2max <= 0.0:
            return 0.0
        tmax = math.sqrt(min(t2max, 1.0))

        def g(t: float) -> float:
            return ((4.0 * (1.0 - t * t) / v) ** (0.5 * k)
                    * q * t ** (q - 1))
        val, _ = integrate.quad(g, 0.0, tmax, epsabs=1e-14, epsrel=1e-11,
                                limit=int(quad_budget))
        return val

    def f(v: float) -> float:
        dens = math.exp(lognorm + (alpha - 1.0) * math.log(v)
                        + (beta - 1.0) * math.log1p(-v))
        return dens * inner(v)

    val, _ = integrate.quad(f, 0.0, vmax, epsabs=1e-13, epsrel=1e-10,
                            limit=int(quad_budget))
    return val


def xi_fractal_tail(d: int, k: int, tau: float, quad_budget: int = 200) -> float:
    """Diameter tail mass of the fractal induced measure via the truncated-
    moment identity: (TV_1/k) (tau^{-k} E[diam^k; diam >= tau] - P(diam >= tau)),
    all at unit cylinder radius.
    """
    if d < 4 or not (2 <= k) or 2 * k > d:
        raise ValueError(f"need d >= 4 and 2 <= k <= d/2, got d={d}, k={k}")
    if tau <= 0:
        raise ValueError("need tau > 0")
    tv1 = xi_tv(d, k, 1.0)
    mom = shape_tail_kmoment(d, k, tau, quad_budget)
    prob = shape_tail_prob(d, k, tau, quad_budget)
    return (tv1 / k) * (mom / tau ** k - prob)


def xi_fractal_tail_integral(d: int, k: int, tau: float, r_min: float = 0.0,
                             quad_budget: int = 400) -> float:
    """Independent route to the same tail: the radial mixture
    int_{r_min}^1 TV_r P_r(diam >= tau) r^{-d} dr with TV_r = r^{d-k-1} TV_1
    and the scaling P_r(diam >= tau) = P_1(diam >= tau/r).

    Kept separate from xi_fractal_tail so identity checks compare two genuinely
    different computations.  r_min = 0 evaluates the untruncated integral (the
    integrand vanishes like r^{d-2k} at the origin when 2k <= d).
    """
    if d < 4 or not (2 <= k) or 2 * k > d:
        raise ValueError(f"need d >= 4 and 2 <= k <= d/2, got d={d}, k={k}")
    tv1 = xi_tv(d, k, 1.0)

    def f(r: float) -> float:
        return tv1 * r ** (-k - 1) * shape_tail_prob(d, k, tau / r)

    val, _ = integrate.quad(f, max(r_min, 0.0), 1.0, epsabs=1e-15,
                            epsrel=1e-10, limit=int(quad_budget))
    return val


@lru_cache(maxsize=None)
def _beta0(d: int, k: int) -> float:
    return diam_moment(d, k, k, 1.0)


def beta_factor(d: int, k: int, R: float) -> float:
    """Truncated k-th moment beta_R = E[diam^k; diam >= 2R] at unit radius.

    beta_0 (= the full moment, R = 0) comes from the closed form; the ratio
    beta_R / beta_0 in [0,1] is the thinning acceptance probability of the
    regular-ball domination coupling.
    """
    if R <= 0:
        return _beta0(d, k)
    return shape_tail_kmoment(d, k, 2.0 * R)


# ============================================================================
# Transformed-coordinate quadrature of the direction integral
# ============================================================================

def idk_quadrature(d: int, k: int, quad_budget: int = 200) -> float:
    """Direction integral I_{d,k} by nested adaptive quadrature.

    After integrating the two unit spheres down to the inner-product variable
    s = <phi', phi> (hemispherical coordinates) and substituting s = sin(gamma)
    and kappa = tan(u), the integral becomes, with m = d-k-2 >= 1:

        I = psi_m psi_{m-1} int_{-pi/2}^{pi/2} cos^{m-1}(gamma)
              int_0^{pi/2} tan^m(u) / (1 + cos^2(gamma) tan^2(u))^{(m+1)/2} du dgamma

    The result must match psi_{d-k-1} psi_{d-k-2} / 2 within 1e-6 relative; a
    doubled-budget re-evaluation is compared internally (must agree to 1e-8)
    before returning.
    """
    if not (2 <= k <= d - 3):
        raise ValueError(f"need 2 <= k <= d-3, got d={d}, k={k}")
    m = d - k - 2

    def value(limit: int, tol: float) -> float:
        def inner(gamma: float) -> float:
            c2 = math.cos(gamma) ** 2

            def g(u: float) -> float:
                tu = math.tan(u)
                return tu ** m / (1.0 + c2 * tu * tu) ** (0.5 * (m + 1))

            val, _ = integrate.quad(g, 0.0, 0.5 * math.pi, epsabs=tol,
                                    epsrel=tol, limit=limit)
            return val

        def outer(gamma: float) -> float:
            return math.cos(gamma) ** (m - 1) * inner(gamma)

        val, _ = integrate.quad(outer, -0.5 * math.pi, 0.5 * math.pi,
                                epsabs=tol * 10, epsrel=tol * 10, limit=limit)
        return psi(m) * psi(m - 1) * val

    budget = int(quad_budget)
    coarse = value(budget, 1e-11)
    fine = value(2 * budget, 1e-13)
    if abs(fine - coarse) > 1e-8 * abs(fine):
        raise ArithmeticError(
            f"direction-integral quadrature failed to converge: {coarse} vs {fine}")
    return fine


# ============================================================================
# Survival and energy bounds
# ============================================================================

def survival_lower_bound(d: int, k: int, lam: float, c2_est: float) -> float:
    """Lower bound (k - lam) e^{-C2 lam} / (psi_{k-1} + k - lam) for the
    probability that the limit vacancy measure on H_k is nonzero."""
    if not (0.0 <= lam < k):
        raise ValueError(f"need 0 <= lambda < k, got lambda={lam}, k={k}")
    C2 = constants(d, c2_est).C2
    return (k - lam) * math.exp(-C2 * lam) / (psi(k - 1) + k - lam)


def zeta_energy_bound(d: int, k: int, lam: float, r_exponent: float,
                      c2_est: float) -> float:
    """Upper bound e^{lam C2} (psi_{k-1}/(k - r - lam) + 1) for the expected
    r-energy of the level-n vacancy martingale measures (uniform in n)."""
    if not (0.0 <= lam < k):
        raise ValueError("need 0 <= lambda < k")
    if not (0.0 < r_exponent < k - lam):
        raise ValueError("need 0 < r_exponent < k - lambda")
    C2 = constants(d, c2_est).C2
    return math.exp(lam * C2) * (psi(k - 1) / (k - r_exponent - lam) + 1.0)
