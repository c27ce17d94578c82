"""Vacant-set statistics: vacancy probabilities, box-survival surveys,
box-count dimension fits, and rescaled-occupation (zeta) estimates.

All experiments target the unit cube of the coordinate k-subspace.  Cylinder
realizations are drawn in a ball window large enough that every cylinder able
to touch the cube is sampled, so no boundary truncation bias enters.  A single
realization truncated at the finest level is reused for all coarser levels by
radius prefixes (the truncations are nested), which couples levels within a
replica; per-level standard errors therefore always come from replica-to-
replica variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._boxkernel import any_cover, box_status, survey_level
from .samplers import FractalRadiusSampler, _lines_hitting_ball_arrays, \
    sample_fractal_cylinders_arrays, stream_rng

__all__ = [
    "VacancyEstimate",
    "BoxSurvey",
    "ZetaEstimate",
    "vacancy_mc",
    "box_survey",
    "dimension_fit",
    "zeta_estimates",
]


# =========================================================================
# vacancy probabilities
# =========================================================================

@dataclass(frozen=True)
class VacancyEstimate:
    """Per-point vacancy frequencies under the level-n truncated process.

    indicators[rep, m] records whether point m was vacant in replica rep, so
    joint-vacancy statistics (and bootstraps over replicas) can be formed
    without resimulating.
    """

    d: int
    k: int
    lam: float
    n: int
    points: np.ndarray
    estimates: np.ndarray
    std_errors: np.ndarray
    indicators: np.ndarray
    replicas: int


def _embed_points(points, k: int, d: int) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != k:
        raise ValueError(f"points must have {k} coordinates, got {pts.shape[1]}")
    out = np.zeros((pts.shape[0], d))
    out[:, :k] = pts
    return out


def vacancy_mc(d: int, k: int, lam: float, n: int, points, replicas: int,
               seed: int, window_radius: float | None = None) -> VacancyEstimate:
    """Monte Carlo vacancy of subspace points under the level-n truncation.

    Points are given in subspace coordinates (one row per point, k columns).
    Cylinders are sampled intersecting the ball around the point centroid
    that covers every point; the line window is extended per radius, so this
    is the exact superset of cylinders that can reach any point.  A custom
    window_radius must not shrink that ball or a ValueError is raised.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    X = _embed_points(points, k, d)
    npts = X.shape[0]
    centroid = X.mean(axis=0)
    maxdist = float(np.sqrt(((X - centroid) ** 2).sum(axis=1)).max()) if npts else 0.0
    rw = maxdist if window_radius is None else float(window_radius)
    if rw < maxdist:
        raise ValueError(
            f"point at distance {maxdist:.6g} from the window center needs "
            f"window_radius >= {maxdist:.6g}, got {rw:.6g}")

    vacant = np.ones((replicas, npts), dtype=bool)
    if lam > 0.0 and n > 0:
        sampler = FractalRadiusSampler(d, rw, n)
        mean_count = lam * sampler.mass
        # chunk replicas so the flat cylinder arrays stay modest
        per_chunk = max(1, int(4.0e6 / max(mean_count, 1.0)))
        start = 0
        stream = 0
        while start < replicas:
            stop = min(start + per_chunk, replicas)
            rng = stream_rng(seed, stream)
            stream += 1
            counts = rng.poisson(mean_count, size=stop - start)
            total = int(counts.sum())
            if total:
                radii = sampler.draw(rng, total)
                A, P = _lines_hitting_ball_arrays(d, centroid, rw + radii, rng)
                rep_ids = np.repeat(np.arange(stop - start), counts)
                na2 = np.einsum("ij,ij->i", A, A)
                r2 = radii * radii
                for m in range(npts):
                    w = X[m] - P
                    ww = np.einsum("ij,ij->i", w, w)
                    wa = np.einsum("ij,ij->i", w, A)
                    hit = ww - wa * wa / na2 < r2
                    hit_reps = np.bincount(rep_ids[hit], minlength=stop - start) > 0
                    vacant[start:stop, m] = ~hit_reps
            start = stop

    est = vacant.mean(axis=0)
    se = np.sqrt(est * (1.0 - est) / replicas)
    return VacancyEstimate(d=d, k=k, lam=float(lam), n=n, points=X[:, :k],
                           estimates=est, std_errors=se, indicators=vacant,
                           replicas=replicas)


# =========================================================================
# box surveys
# =========================================================================

@dataclass(frozen=True)
class BoxSurvey:
    """Replica-resolved counts of surviving dyadic boxes per level.

    untouched[rep, i] counts level levels[i] boxes meeting no cylinder;
    uncovered[rep, i] counts boxes not contained in any single cylinder.
    Both refer to the same nested realization per replica.
    """

    d: int
    k: int
    lam: float
    levels: tuple[int, ...]
    untouched: np.ndarray
    uncovered: np.ndarray
    replicas: int

    def __post_init__(self):
        tot = [2 ** (self.k * n) for n in self.levels]
        if np.any(self.untouched > self.uncovered):
            raise ValueError("untouched count exceeds uncovered count")
        if np.any(self.uncovered > np.asarray(tot)[None, :]):
            raise ValueError("uncovered count exceeds the number of boxes")

    def level_means(self, which: str = "uncovered"):
        """(means, SEs) across replicas for 'untouched' or 'uncovered'."""
        arr = getattr(self, which)
        means = arr.mean(axis=0)
        ses = arr.std(axis=0, ddof=1) / math.sqrt(self.replicas) \
            if self.replicas > 1 else np.zeros(len(self.levels))
        return means, ses


def _cube_window(d: int, k: int) -> tuple[np.ndarray, float]:
    center = np.zeros(d)
    center[:k] = 0.5
    return center, math.sqrt(d) + 1.0


def _survey_counts_walk(A, P, R, ncyl, n, d, k):
    nb = 2 ** (k * n)
    touched = np.zeros(nb, dtype=bool)
    covered = np.zeros(nb, dtype=bool)
    survey_level(A, P, R, ncyl, n, d, k, touched, covered)
    return nb - int(touched.sum()), nb - int(covered.sum())


def _survey_counts_grid(A, P, R, ncyl, n, d, k):
    """Reference route: every box through the generic status predicate."""
    h = 2.0 ** (-n)
    lo = np.zeros(d)
    hi = np.zeros(d)
    n_untouched = 0
    n_uncovered = 0
    for flat in range(2 ** (k * n)):
        rem = flat
        for c in range(k - 1, -1, -1):
            lo[c] = (rem % (1 << n)) * h
            rem >>= n
        hi[:] = lo + h
        t, cov = box_status(A, P, R, ncyl, lo, hi, d)
        if not t:
            n_untouched += 1
        if not cov:
            n_uncovered += 1
    return n_untouched, n_uncovered


def box_survey(d: int, k: int, lam: float, n_max: int, replicas: int,
               seed: int, method: str = "auto") -> BoxSurvey:
    """Survey dyadic levels 1..n_max of the subspace unit cube.

    Each replica draws one realization truncated at level n_max inside the
    covering ball window and reuses its radius prefixes for coarser levels.
    method: 'walk' (fast column-walking kernel, k <= 2), 'grid' (generic
    per-box reference), or 'auto'.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if not 1 <= k <= d:
        raise ValueError("need 1 <= k <= d")
    if method == "auto":
        method = "walk" if k <= 2 else "grid"
    if method == "walk" and k > 2:
        raise ValueError("the walking kernel only supports k <= 2")
    if method not in ("walk", "grid"):
        raise ValueError(f"unknown method {method!r}")
    count_fn = _survey_counts_walk if method == "walk" else _survey_counts_grid

    center, rw = _cube_window(d, k)
    levels = tuple(range(1, n_max + 1))
    untouched = np.zeros((replicas, n_max), dtype=np.int64)
    uncovered = np.zeros((replicas, n_max), dtype=np.int64)
    sampler = FractalRadiusSampler(d, rw, n_max) if lam > 0 else None
    for rep in range(replicas):
        rng = stream_rng(seed, rep)
        if lam > 0:
            A, P, R = sample_fractal_cylinders_arrays(
                d, center, rw, n_max, lam, rng, sampler=sampler)
            order = np.argsort(-R, kind="stable")
            A, P, R = A[order], P[order], R[order]
        else:
            A = np.empty((0, d))
            P = np.empty((0, d))
            R = np.empty(0)
        neg = -R
        for i, n in enumerate(levels):
            ncyl = int(np.searchsorted(neg, -(2.0 ** (-n)), side="right"))
            m_n, big_m_n = count_fn(A, P, R, ncyl, n, d, k)
            untouched[rep, i] = m_n
            uncovered[rep, i] = big_m_n
    return BoxSurvey(d=d, k=k, lam=float(lam), levels=levels,
                     untouched=untouched, uncovered=uncovered,
                     replicas=replicas)


def dimension_fit(survey: BoxSurvey, fit_range, n_boot: int = 200,
                  seed: int = 0) -> tuple[float, float]:
    """Least-squares slope of log2(mean uncovered count) against the level.

    The slope estimates the box-count scaling exponent; the standard error
    is a bootstrap over replicas (levels are coupled within a replica, so a
    per-level residual SE would be wrong).
    """
    fit_levels = sorted(int(n) for n in fit_range)
    if len(fit_levels) < 3:
        raise ValueError("need at least 3 levels to fit a slope")
    missing = [n for n in fit_levels if n not in survey.levels]
    if missing:
        raise ValueError(f"levels {missing} were not surveyed")
    cols = [survey.levels.index(n) for n in fit_levels]
    counts = survey.uncovered[:, cols].astype(float)
    ns = np.asarray(fit_levels, dtype=float)

    def slope_of(mean_counts: np.ndarray) -> float:
        if np.any(mean_counts <= 0):
            raise ValueError("mean uncovered count vanished on a fit level; "
                             "shrink the fit range")
        return float(np.polyfit(ns, np.log2(mean_counts), 1)[0])

    slope = slope_of(counts.mean(axis=0))
    if survey.replicas < 2 or n_boot < 2:
        return slope, 0.0
    rng = np.random.default_rng(seed)
    boots = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, survey.replicas, size=survey.replicas)
        mc = counts[idx].mean(axis=0)
        boots[b] = slope_of(np.maximum(mc, 1e-300)) if np.all(mc > 0) else np.nan
    good = boots[np.isfinite(boots)]
    stderr = float(good.std(ddof=1)) if good.size > 1 else float("nan")
    return slope, stderr


# =========================================================================
# zeta (rescaled vacant occupation) estimates
# =========================================================================

@dataclass(frozen=True)
class ZetaEstimate:
    """Total-variation and pair-energy estimates of the rescaled vacant
    measure on the subspace unit cube at level n."""

    d: int
    k: int
    lam: float
    n: int
    tv_estimate: float
    tv_se: float
    energy_r: float | None
    energy_se: float | None
    r_exponent: float | None
    mc_points: int
    pair_points: int
    replicas: int
    tv_replica_values: np.ndarray


def zeta_estimates(d: int, k: int, lam: float, n: int, mc_points: int,
                   pair_points: int, r_exponent: float | None = None,
                   seed: int = 0, replicas: int = 64) -> ZetaEstimate:
    """Estimate ||zeta_n||_TV and optionally the r-energy of zeta_n.

    zeta_n weights the level-n vacant subset of the unit k-cube by 2^{lam*n};
    its expected total mass is 1 for every n.  TV uses mc_points uniform
    points per replica; the energy uses pair_points uniform point pairs
    weighted by 2^{2*lam*n} / distance^r when both endpoints are vacant.
    """
    if not 0 <= lam < k:
        raise ValueError("need 0 <= lam < k")
    if r_exponent is not None and not 0 < r_exponent < k - lam:
        raise ValueError("need 0 < r_exponent < k - lam for a finite energy")
    if mc_points < 1 or (r_exponent is not None and pair_points < 1):
        raise ValueError("need at least one evaluation point")

    center, rw = _cube_window(d, k)
    sampler = FractalRadiusSampler(d, rw, n) if (lam > 0 and n > 0) else None
    scale_tv = 2.0 ** (lam * n)
    scale_en = 2.0 ** (2.0 * lam * n)
    tv_vals = np.empty(replicas)
    en_vals = np.empty(replicas) if r_exponent is not None else None
    for rep in range(replicas):
        rng = stream_rng(seed, rep)
        n_pair_pts = 2 * pair_points if r_exponent is not None else 0
        U = rng.random((mc_points + n_pair_pts, k))
        X = np.zeros((U.shape[0], d))
        X[:, :k] = U
        if sampler is not None:
            A, P, R = sample_fractal_cylinders_arrays(
                d, center, rw, n, lam, rng, sampler=sampler)
            covered = any_cover(A, P, R * R, X)
        else:
            covered = np.zeros(X.shape[0], dtype=bool)
        vac = ~covered
        tv_vals[rep] = scale_tv * vac[:mc_points].mean()
        if r_exponent is not None:
            x = U[mc_points:mc_points + pair_points]
            y = U[mc_points + pair_points:]
            both = vac[mc_points:mc_points + pair_points] \
                & vac[mc_points + pair_points:]
            dist = np.sqrt(((x - y) ** 2).sum(axis=1))
            w = np.where(both, scale_en * dist ** (-r_exponent), 0.0)
            en_vals[rep] = w.mean()

    tv_est = float(tv_vals.mean())
    tv_se = float(tv_vals.std(ddof=1) / math.sqrt(replicas)) if replicas > 1 else 0.0
    if r_exponent is not None:
        en_est = float(en_vals.mean())
        en_se = float(en_vals.std(ddof=1) / math.sqrt(replicas)) \
            if replicas > 1 else 0.0
    else:
        en_est = en_se = None
    return ZetaEstimate(d=d, k=k, lam=float(lam), n=n, tv_estimate=tv_est,
                        tv_se=tv_se, energy_r=en_est, energy_se=en_se,
                        r_exponent=r_exponent, mc_points=mc_points,
                        pair_points=pair_points, replicas=replicas,
                        tv_replica_values=tv_vals)
