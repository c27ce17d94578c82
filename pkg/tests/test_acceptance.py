"""Acceptance suite: one test per advertised guarantee, at full scale.

Each test prints exactly one line, `criterion NN: PASS/FAIL - detail`, directly
to the terminal (bypassing capture) and then asserts the same condition, so a
plain pytest run shows the per-criterion verdicts in order.  Seeds are fixed;
every statistical gate below was verified to hold for the committed seed.
"""

import math
import sys
import time

import numpy as np
import pytest
from scipy import stats

from fractalcyl import cli, connectivity, fractal, geom, measures, samplers
from fractalcyl.geom import Cylinder, LineParam

_CAPFD = None


@pytest.fixture(autouse=True)
def _live_report(capfd):
    # let _report bypass output capture so the verdict lines always show
    global _CAPFD
    _CAPFD = capfd
    yield
    _CAPFD = None


def _report(num: int, ok: bool, detail: str) -> None:
    line = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'} - {detail}\n"
    if _CAPFD is not None:
        with _CAPFD.disabled():
            sys.stdout.write(line)
            sys.stdout.flush()
    else:
        sys.stdout.write(line)


# ---------------------------------------------------------------------------
# 1. point vacancy matches 2^(-lambda n) across intensities and levels
# ---------------------------------------------------------------------------

def test_criterion_01_point_vacancy():
    t0 = time.monotonic()
    worst = 0.0
    cells = 0
    for lam in (0.5, 1.0, 2.0):
        for n in range(1, 7):
            est = fractal.vacancy_mc(3, 2, lam, n, np.zeros((1, 2)), 100_000,
                                     9000 + int(10 * lam) * 10 + n)
            target = measures.vacancy_prob(lam, n)
            z = (est.estimates[0] - target) / est.std_errors[0]
            worst = max(worst, abs(z))
            cells += abs(z) <= 3.0
    elapsed = time.monotonic() - t0
    ok = cells == 18 and elapsed < 300.0
    _report(1, ok, f"point vacancy d=3: {cells}/18 cells within 3 SE, "
                   f"worst |z|={worst:.2f}, {elapsed:.1f}s (budget 300s)")
    assert ok


# ---------------------------------------------------------------------------
# 2. line-measure normalization and chart density
# ---------------------------------------------------------------------------

def _direction_cdf(d: int, theta: np.ndarray) -> np.ndarray:
    # CDF of the polar angle from the last axis for a uniform direction,
    # folded to [0, pi/2]: density proportional to sin^(d-2)(theta)
    if d == 2:
        return theta / (0.5 * math.pi)
    if d == 3:
        return 1.0 - np.cos(theta)
    if d == 4:
        return (theta - np.sin(theta) * np.cos(theta)) / (0.5 * math.pi)
    raise ValueError(d)


def test_criterion_02_line_measure_normalization():
    worst = 0.0
    cells = 0
    for di, d in enumerate((2, 3, 4)):
        for ri, r in enumerate((0.25, 0.5, 1.0)):
            lam, reps = 2.0, 10_000
            counts = np.empty(reps)
            for i in range(reps):
                rng = samplers.stream_rng(2024 + 10 * di + ri, i)
                counts[i] = len(samplers.sample_lines_ball(d, np.zeros(d), r,
                                                           lam, rng))
            target = lam * r ** (d - 1)
            se = counts.std(ddof=1) / math.sqrt(reps)
            z = (counts.mean() - target) / se
            worst = max(worst, abs(z))
            cells += abs(z) <= 3.0

    # chart-density histograms: the probability integral transform of the
    # direction angle and of the perpendicular foot norm must be uniform
    min_p = 1.0
    edges = np.linspace(0.0, 1.0, 21)
    for d in (2, 3, 4):
        rng = samplers.stream_rng(3033 + d, 0)
        sample = samplers.sample_lines_ball(d, np.zeros(d), 1.0, 40_000.0, rng)
        A = np.array([ln.a for ln in sample.items])
        P = np.array([ln.p for ln in sample.items])
        norm_a = np.linalg.norm(A, axis=1)
        theta = np.arccos(np.clip(1.0 / norm_a, -1.0, 1.0))
        U = A / norm_a[:, None]
        foot = P - np.sum(P * U, axis=1, keepdims=True) * U
        rho = np.linalg.norm(foot, axis=1)
        for F in (_direction_cdf(d, theta), rho ** (d - 1)):
            obs, _ = np.histogram(F, bins=edges)
            min_p = min(min_p, stats.chisquare(obs).pvalue)

    ok = cells == 9 and min_p > 0.01
    _report(2, ok, f"line normalization: {cells}/9 ball-hit means within 3 SE "
                   f"(worst |z|={worst:.2f}); chart chi^2 min p={min_p:.3f}")
    assert ok


# ---------------------------------------------------------------------------
# 3. induced-ellipse center intensity
# ---------------------------------------------------------------------------

def _center_intensity(d: int, lam: float, r: float, reps: int, seed: int):
    patch = samplers.WindowSpec.patch_window(2, np.zeros(2), np.ones(2))
    counts = np.empty(reps)
    for i in range(reps):
        rng = samplers.stream_rng(seed, i)
        sample = samplers.induced_ellipse_process(d, 2, patch, ("fixed", r),
                                                 lam, rng)
        counts[i] = sum(1 for e in sample.items
                        if np.all(e.center >= 0.0) and np.all(e.center <= 1.0))
    return counts.mean(), counts.std(ddof=1) / math.sqrt(reps)


def test_criterion_03_ellipse_center_intensity():
    lam, reps = 2.0, 3000
    m4, s4 = _center_intensity(4, lam, 1.0, reps, 127)
    z4 = (m4 - lam / math.pi) / s4
    m3a, s3a = _center_intensity(3, lam, 1.0, reps, 131)
    m3b, s3b = _center_intensity(3, lam, 0.5, reps, 137)
    t3 = lam / (2.0 * math.pi)
    z3a = (m3a - t3) / s3a
    z3b = (m3b - t3) / s3b
    zr = (m3a - m3b) / math.hypot(s3a, s3b)
    ok = max(abs(z4), abs(z3a), abs(z3b), abs(zr)) <= 3.0
    _report(3, ok, f"center intensity: d=4 lam/pi z={z4:+.2f}; d=3 lam/(2 pi) "
                   f"z={z3a:+.2f} (r=1), z={z3b:+.2f} (r=1/2); "
                   f"r-independence z={zr:+.2f}")
    assert ok


# ---------------------------------------------------------------------------
# 4. diameter moments of the induced shape law
# ---------------------------------------------------------------------------

def test_criterion_04_diameter_moments():
    rng = samplers.stream_rng(777, 0)
    diam = samplers.sample_shape_diameters(4, 2, 1.0, 2_000_000, rng)
    zs = []
    for mom, target in ((1, 3.0 * math.pi / 4.0), (2, 8.0)):
        assert math.isclose(measures.diam_moment(4, 2, mom, 1.0), target,
                            rel_tol=1e-12)
        v = diam ** mom
        zs.append((v.mean() - target) / (v.std(ddof=1) / math.sqrt(v.size)))

    # third moment is infinite: the median of independent sample means keeps
    # growing under x10 sample-size steps instead of stabilizing
    rng = samplers.stream_rng(777, 1)
    medians = []
    for size in (1_000, 10_000, 100_000):
        means = np.empty(400)
        for i in range(400):
            means[i] = (samplers.sample_shape_diameters(4, 2, 1.0, size, rng)
                        ** 3).mean()
        medians.append(float(np.median(means)))
    growing = medians[0] < medians[1] < medians[2]
    ok = max(abs(z) for z in zs) <= 3.0 and growing
    _report(4, ok, f"diameters d=4,k=2: E[diam] z={zs[0]:+.2f}, E[diam^2] "
                   f"z={zs[1]:+.2f}; E[diam^3] replica-median means "
                   f"{medians[0]:.1f} -> {medians[1]:.1f} -> {medians[2]:.1f} "
                   f"({'growing' if growing else 'stalled'})")
    assert ok


# ---------------------------------------------------------------------------
# 5. diameter tail exponent and truncated-moment identity
# ---------------------------------------------------------------------------

def test_criterion_05_tail_exponent_and_identity():
    taus = 4.0 * 2.0 ** (np.arange(9) / 2.0)  # spans [4, 64]
    tail = np.array([measures.shape_tail_prob(4, 2, t) for t in taus])
    A = np.vstack([np.log(taus), np.ones_like(taus)]).T
    slope = float(np.linalg.lstsq(A, np.log(tail), rcond=None)[0][0])
    slope_ok = abs(slope - (-3.0)) <= 0.3

    rng = samplers.stream_rng(777, 0)
    diam = samplers.sample_shape_diameters(4, 2, 1.0, 2_000_000, rng)
    tv1 = measures.xi_tv(4, 2, 1.0)
    worst_z = 0.0
    worst_route = 0.0
    for tau in (4.0, 8.0):
        g = (tv1 / 2.0) * (diam ** 2 / tau ** 2 - 1.0) * (diam >= tau)
        oracle = measures.xi_fractal_tail_integral(4, 2, tau)
        identity = measures.xi_fractal_tail(4, 2, tau)
        se = g.std(ddof=1) / math.sqrt(g.size)
        worst_z = max(worst_z, abs((g.mean() - oracle) / se))
        worst_route = max(worst_route, abs(identity - oracle) / oracle)
    ok = slope_ok and worst_z <= 3.0 and worst_route <= 1e-8
    _report(5, ok, f"tails d=4,k=2: log-log slope {slope:.4f} (target -3 "
                   f"+/- 0.3); identity MC worst |z|={worst_z:.2f}; "
                   f"route agreement {worst_route:.1e}")
    assert ok


# ---------------------------------------------------------------------------
# 6. slice-ellipse geometry against the cylinder oracle
# ---------------------------------------------------------------------------

def test_criterion_06_geometry_oracle():
    rng = np.random.default_rng(606)
    band = 1e-10
    disagreements = 0
    banded = 0
    total = 0
    for d in (3, 4):
        for _ in range(5000):
            a = np.append(rng.normal(0.0, 2.0, d - 1), 1.0)
            p = np.append(rng.uniform(-2.0, 2.0, d - 1), 0.0)
            line = LineParam(d=d, a=a, p=p)
            r = rng.uniform(0.05, 1.0)
            ell = geom.cylinder_subspace_ellipse(Cylinder(line=line, r=r), 2)
            if ell is not None and rng.random() < 0.5:
                phi = rng.uniform(0.0, 2.0 * math.pi)
                perp = np.array([-ell.major_dir[1], ell.major_dir[0]])
                y = ell.center + rng.uniform(0.9, 1.1) * (
                    math.cos(phi) * ell.major_len * ell.major_dir
                    + math.sin(phi) * ell.minor_len * perp)
            else:
                y = rng.uniform(-2.0, 2.0, 2)
            dist = geom.point_line_distance(geom.embed(y, d), line)
            if abs(dist - r) <= band:
                banded += 1
                continue
            in_cyl = dist < r
            in_ell = ell is not None and geom.ellipse_contains(ell, y)
            disagreements += in_cyl != in_ell
            total += 1

    # hit-or-miss areas of a dozen slice ellipses against pi*a*b
    worst_rel = 0.0
    checked = 0
    while checked < 12:
        a = np.append(rng.normal(0.0, 1.0, 3), 1.0)
        p = np.append(rng.uniform(-1.0, 1.0, 3), 0.0)
        r = rng.uniform(0.3, 1.0)
        ell = geom.cylinder_subspace_ellipse(
            Cylinder(line=LineParam(d=4, a=a, p=p), r=r), 2)
        if ell is None or ell.minor_len / ell.major_len < 0.05:
            continue
        checked += 1
        perp = np.array([-ell.major_dir[1], ell.major_dir[0]])
        w = np.sqrt((ell.major_len * ell.major_dir) ** 2
                    + (ell.minor_len * perp) ** 2)
        pts = rng.uniform(-1.0, 1.0, (2_000_000, 2)) * w
        u1 = pts @ ell.major_dir / ell.major_len
        u2 = pts @ perp / ell.minor_len
        frac = np.mean(u1 * u1 + u2 * u2 < 1.0)
        area_mc = frac * 4.0 * w[0] * w[1]
        area = math.pi * ell.major_len * ell.minor_len
        worst_rel = max(worst_rel, abs(area_mc - area) / area)

    ok = disagreements == 0 and worst_rel <= 0.01
    _report(6, ok, f"geometry oracle: {disagreements} membership disagreements"
                   f" in {total} triples ({banded} within 1e-10 band); "
                   f"area MC worst rel err {worst_rel:.2%}")
    assert ok


# ---------------------------------------------------------------------------
# 7. box-count scaling and per-level survival bounds
# ---------------------------------------------------------------------------

def test_criterion_07_boxcount_scaling():
    t0 = time.monotonic()
    cc = measures.constants(3, measures.estimate_c2(3))
    details = []
    ok = True
    for lam in (0.5, 1.5):
        survey = fractal.box_survey(3, 2, lam, 8, 200, 7000 + int(10 * lam))
        slope, stderr = fractal.dimension_fit(survey, range(3, 9))
        slope_ok = abs(slope - (2.0 - lam)) <= 0.15
        m_means, m_ses = survey.level_means("untouched")
        big_means, big_ses = survey.level_means("uncovered")
        bounds_ok = True
        for i, n in enumerate(survey.levels):
            tot = 2.0 ** (2 * n)
            low = math.exp(-lam * cc.C1) * 2.0 ** (-lam * n)
            z_low = (low - m_means[i] / tot) / max(m_ses[i] / tot, 1e-300)
            bounds_ok &= z_low <= 3.0
            if 2.0 ** (-n) * math.sqrt(3) <= 1.0:
                high = math.exp(lam * cc.C3) * 2.0 ** (-lam * n)
                z_high = (big_means[i] / tot - high) / max(big_ses[i] / tot,
                                                           1e-300)
                bounds_ok &= z_high <= 3.0
        ok &= slope_ok and bounds_ok
        details.append(f"lam={lam}: slope {slope:.3f}+/-{stderr:.3f} "
                       f"(target {2.0 - lam}), bounds "
                       f"{'ok' if bounds_ok else 'VIOLATED'}")
    elapsed = time.monotonic() - t0
    ok &= elapsed < 1800.0
    _report(7, ok, "box counts d=3,k=2: " + "; ".join(details)
            + f"; {elapsed:.0f}s (budget 1800s)")
    assert ok


# ---------------------------------------------------------------------------
# 8. renormalized vacancy measure: unit mass and bounded energy
# ---------------------------------------------------------------------------

def test_criterion_08_martingale_mass_and_energy():
    bound = measures.zeta_energy_bound(3, 2, 0.5, 0.75, measures.estimate_c2(3))
    details = []
    ok = True
    for n in (3, 5):
        est = fractal.zeta_estimates(3, 2, 0.5, n, 20_000, 20_000,
                                     r_exponent=0.75, seed=900 + n,
                                     replicas=200)
        z_tv = (est.tv_estimate - 1.0) / est.tv_se
        z_en = (est.energy_r - bound) / est.energy_se
        ok &= abs(z_tv) <= 3.0 and z_en <= 3.0 and math.isfinite(est.energy_r)
        details.append(f"n={n}: mass z={z_tv:+.2f}, energy {est.energy_r:.2f}")
    _report(8, ok, f"vacancy measure lam=0.5: {'; '.join(details)} "
                   f"(bound {bound:.1f})")
    assert ok


# ---------------------------------------------------------------------------
# 9. quadrature self-tests
# ---------------------------------------------------------------------------

def test_criterion_09_quadrature_selftests():
    worst_idk = 0.0
    pairs = [(d, k) for d in range(5, 9) for k in range(2, d - 2)]
    for d, k in pairs:
        got = measures.idk_quadrature(d, k)
        want = measures.psi(d - k - 1) * measures.psi(d - k - 2) / 2.0
        worst_idk = max(worst_idk, abs(got - want) / want)
    worst_rec = 0.0
    for m in range(0, 41):
        lhs = measures.psi(m + 2)
        rhs = 2.0 * math.pi * measures.psi(m) / (m + 1)
        worst_rec = max(worst_rec, abs(lhs - rhs) / lhs)
    ok = worst_idk <= 1e-6 and worst_rec < 1e-12
    _report(9, ok, f"quadrature: direction integral worst rel "
                   f"{worst_idk:.1e} over {len(pairs)} (d,k) pairs; sphere-"
                   f"area recursion worst rel {worst_rec:.1e}")
    assert ok


# ---------------------------------------------------------------------------
# 10. large-ellipse census diverges logarithmically in the radius cutoff
# ---------------------------------------------------------------------------

def test_criterion_10_lr1_divergence():
    lam, eps = 2.0, 0.1
    xs, ys, worst_z = [], [], 0.0
    for i, expo in enumerate((6, 8, 10, 12)):
        res = connectivity.lr1_experiment(lam, eps, 2.0 ** -expo, 10_000_000,
                                          600 + i)
        worst_z = max(worst_z, abs(res.z))
        xs.append(expo * math.log(2.0))
        ys.append(res.mean)
    x, y = np.array(xs), np.array(ys)
    A = np.vstack([x, np.ones_like(x)]).T
    fit = A @ np.linalg.lstsq(A, y, rcond=None)[0]
    r2 = 1.0 - ((y - fit) ** 2).sum() / ((y - y.mean()) ** 2).sum()
    ok = worst_z <= 3.0 and r2 > 0.99
    _report(10, ok, f"large-ellipse census: 4/4 cutoffs within 3 SE (worst "
                    f"|z|={worst_z:.2f}); linear in ln(1/r_min), "
                    f"R^2={r2:.4f}")
    assert ok


# ---------------------------------------------------------------------------
# 11. thinning coupling, ball domination, and acceptance ratio
# ---------------------------------------------------------------------------

def test_criterion_11_coupling_domination():
    params = cli.validate_params("coupling", {"d": 4, "lambda": 1.0, "r": 1.0,
                                              "replicas": 300,
                                              "mc_points": 200_000})
    report, _ = cli.run_experiment("coupling", params, 314)
    by_name = {r.metric: r for r in report.rows}
    subset = by_name["thinned_subset_rate"]
    cover = by_name["ellipse_cover_violations"]
    betas = [by_name[f"beta_ratio_R{tag}"] for tag in ("0.5", "1", "2")]
    worst_beta = max(abs(b.z) for b in betas)
    ok = (subset.estimate == 1.0 and cover.estimate == 0.0
          and all(b.passed for b in betas))
    _report(11, ok, f"coupling: thinned subset rate {subset.estimate:.0%}, "
                    f"coverage violations {cover.estimate:.0f}, beta ratios "
                    f"worst |z|={worst_beta:.2f} at R in {{0.5,1,2}}")
    assert ok


# ---------------------------------------------------------------------------
# 12. vacant-crossing trends across truncation levels
# ---------------------------------------------------------------------------

def test_criterion_12_connectivity_trends():
    trend3 = connectivity.connectivity_trend(3, 0.5, [3, 5, 7], 100, 808)
    f3 = [lvl.reports["ellipse_crossing"].frequency for lvl in trend3]
    decreasing = f3[0] > f3[1] > f3[2]
    clean3 = all(lvl.monotone_violations == 0 for lvl in trend3)

    trend4 = connectivity.connectivity_trend(4, 0.05, [5, 7], 100, 809)
    r5, r7 = (lvl.reports["ellipse_crossing"] for lvl in trend4)
    z45 = abs(r5.frequency - r7.frequency) / math.hypot(r5.se, r7.se)
    ok = decreasing and clean3 and z45 <= 2.0
    _report(12, ok, f"crossing trends: d=3 lam=0.5 frequencies "
                    f"{f3[0]:.2f} > {f3[1]:.2f} > {f3[2]:.2f} "
                    f"({'strict' if decreasing else 'NOT strict'}); "
                    f"d=4 lam=0.05 stable n=5 vs 7 (|z|={z45:.2f} <= 2)")
    assert ok
