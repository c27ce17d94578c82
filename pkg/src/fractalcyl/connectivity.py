"""Crossing and arm events on planar windows, ellipse censuses, and the
truncation-level connectivity trend of the induced vacant set.

Windows follow the centered-rectangle convention K(s, t) =
[-s/2, s/2] x [-t/2, t/2] and K(s) = K(s, s).  Vacant connectivity uses the
4-neighborhood, covered connectivity the 8-neighborhood — the standard dual
pair that rules out simultaneous crossings of both phases.

The large-ellipse census counts ellipses with center in K(eps/2), diameter at
least 10*eps, and axis angle within 1/10 of horizontal.  The angle uses the
signed direction atan2(m2, m1) of major_dir as produced by the slicing chart
(sign conventions matter: the folded-axis event has twice the intensity, and
the closed-form expectation below corresponds to the signed one).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import ndimage

from .geom import Ellipsoid
from .measures import upsilon, xi_tv
from .samplers import Ball, ProcessSample, WindowSpec, induced_ball_process, \
    induced_ellipse_process, stream_rng, thinning_coupling

__all__ = [
    "RasterGrid",
    "CrossingReport",
    "TrendLevel",
    "Lr1Result",
    "rasterize",
    "vacant_crossing",
    "covered_crossing",
    "arm_event",
    "lr1_census",
    "lr1_expected",
    "lr1_expected_quadrature",
    "lr1_experiment",
    "connectivity_trend",
    "line_crosses_square",
]


# =========================================================================
# rasterization
# =========================================================================

@dataclass(frozen=True)
class RasterGrid:
    """Cell-center occupancy raster of a rectangle; True means covered."""

    lo: np.ndarray
    hi: np.ndarray
    delta: float
    occupancy: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.occupancy.shape


@njit(cache=True)
def _fill_shapes(occ, xlo, ylo, delta, nx, ny, cx, cy, mx, my, maj, mino,
                 closed):
    for s in range(cx.shape[0]):
        i0 = int(np.floor((cx[s] - maj[s] - xlo) / delta)) - 1
        i1 = int(np.floor((cx[s] + maj[s] - xlo) / delta)) + 1
        j0 = int(np.floor((cy[s] - maj[s] - ylo) / delta)) - 1
        j1 = int(np.floor((cy[s] + maj[s] - ylo) / delta)) + 1
        if i0 < 0:
            i0 = 0
        if j0 < 0:
            j0 = 0
        if i1 > nx - 1:
            i1 = nx - 1
        if j1 > ny - 1:
            j1 = ny - 1
        inv_a2 = 1.0 / (maj[s] * maj[s])
        inv_b2 = 1.0 / (mino[s] * mino[s])
        for i in range(i0, i1 + 1):
            zx = xlo + (i + 0.5) * delta - cx[s]
            for j in range(j0, j1 + 1):
                if occ[i, j]:
                    continue
                zy = ylo + (j + 0.5) * delta - cy[s]
                u = zx * mx[s] + zy * my[s]
                q = u * u * inv_a2 + (zx * zx + zy * zy - u * u) * inv_b2
                if q < 1.0 or (closed and q == 1.0):
                    occ[i, j] = True


def _window_bounds(window) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(window, WindowSpec):
        if window.kind != "patch" or window.k != 2:
            raise ValueError("window must be a planar patch")
        return window.lo, window.hi
    lo, hi = window
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.shape != (2,) or hi.shape != (2,) or np.any(hi <= lo):
        raise ValueError("window must be ((xlo, ylo), (xhi, yhi)) with hi > lo")
    return lo, hi


def _shape_items(shapes):
    if isinstance(shapes, ProcessSample):
        if shapes.kind not in ("ellipses", "balls"):
            raise ValueError("sample must contain ellipses or balls")
        return shapes.items
    return tuple(shapes)


def rasterize(shapes, window, delta: float) -> RasterGrid:
    """Occupancy grid: a cell is covered iff its center lies in some shape.

    Ellipsoids are open sets (slices of open cylinders), balls closed; cell
    centers on a shape boundary follow that convention.  Shapes may be a
    planar ProcessSample or any iterable of 2-D Ellipsoid/Ball objects.
    """
    lo, hi = _window_bounds(window)
    side = hi - lo
    if not delta > 0.0:
        raise ValueError("delta must be positive")
    if delta > min(side) / 8.0:
        raise ValueError(f"delta={delta:.6g} too coarse for window sides "
                         f"{side[0]:.6g} x {side[1]:.6g} (need <= min/8)")
    nx = int(math.ceil(side[0] / delta - 1e-12))
    ny = int(math.ceil(side[1] / delta - 1e-12))
    occ = np.zeros((nx, ny), dtype=np.bool_)
    ell_params, ball_params = [], []
    for sh in _shape_items(shapes):
        if isinstance(sh, Ellipsoid):
            if sh.k != 2:
                raise ValueError("only planar (k=2) ellipsoids can be rasterized")
            ell_params.append((sh.center[0], sh.center[1], sh.major_dir[0],
                               sh.major_dir[1], sh.major_len, sh.minor_len))
        elif isinstance(sh, Ball):
            if sh.k != 2:
                raise ValueError("only planar (k=2) balls can be rasterized")
            ball_params.append((sh.center[0], sh.center[1], 1.0, 0.0,
                                sh.radius, sh.radius))
        else:
            raise TypeError(f"cannot rasterize {type(sh).__name__}")
    for params, closed in ((ell_params, False), (ball_params, True)):
        if params:
            arr = np.asarray(params, dtype=float).T
            _fill_shapes(occ, float(lo[0]), float(lo[1]), float(delta), nx, ny,
                         *(np.ascontiguousarray(row) for row in arr), closed)
    return RasterGrid(lo=lo, hi=hi, delta=float(delta), occupancy=occ)


_STRUCT8 = np.ones((3, 3), dtype=bool)


def _crossing(mask: np.ndarray, direction: str, structure) -> bool:
    labels, nlab = ndimage.label(mask, structure=structure)
    if nlab == 0:
        return False
    if direction == "lr":
        first, last = labels[0, :], labels[-1, :]
    elif direction == "tb":
        first, last = labels[:, 0], labels[:, -1]
    else:
        raise ValueError("direction must be 'lr' or 'tb'")
    common = np.intersect1d(first[first > 0], last[last > 0])
    return common.size > 0


def vacant_crossing(grid: RasterGrid, direction: str = "lr") -> bool:
    """True iff a 4-connected vacant path joins the two opposite sides."""
    return _crossing(~grid.occupancy, direction, None)


def covered_crossing(grid: RasterGrid, direction: str = "tb") -> bool:
    """True iff an 8-connected covered path joins the two opposite sides
    (the dual blocker of the perpendicular vacant crossing)."""
    return _crossing(grid.occupancy, direction, _STRUCT8)


def arm_event(shapes, center, epsilon: float, delta: float) -> bool:
    """Covered arm from the inner square K(eps) to the boundary of K(3*eps).

    Both squares are centered at `center`; the event holds iff an 8-connected
    covered component of the rasterized annulus touches both the inner
    square's neighborhood and the outer rim of the grid.
    """
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    center = np.asarray(center, dtype=float)
    lo = center - 1.5 * epsilon
    hi = center + 1.5 * epsilon
    grid = rasterize(shapes, (lo, hi), delta)
    nx, ny = grid.shape
    xs = lo[0] + (np.arange(nx) + 0.5) * grid.delta - center[0]
    ys = lo[1] + (np.arange(ny) + 0.5) * grid.delta - center[1]
    inner = (np.abs(xs)[:, None] < epsilon / 2.0) \
        & (np.abs(ys)[None, :] < epsilon / 2.0)
    annulus_cov = grid.occupancy & ~inner
    labels, nlab = ndimage.label(annulus_cov, structure=_STRUCT8)
    if nlab == 0:
        return False
    ring = np.zeros_like(annulus_cov)
    ring[0, :] = ring[-1, :] = True
    ring[:, 0] = ring[:, -1] = True
    near_inner = ndimage.binary_dilation(inner, structure=_STRUCT8) & ~inner
    inner_labs = np.unique(labels[near_inner & annulus_cov])
    outer_labs = np.unique(labels[ring & annulus_cov])
    common = np.intersect1d(inner_labs[inner_labs > 0],
                            outer_labs[outer_labs > 0])
    return common.size > 0


# =========================================================================
# large-ellipse (LR_1) census and its expectation
# =========================================================================

def _ellipse_meets_vsegment(e: Ellipsoid, x: float, y_lo: float,
                            y_hi: float) -> bool:
    """Closed ellipse meets the vertical segment {x} x [y_lo, y_hi]."""
    zx = x - e.center[0]
    mx, my = float(e.major_dir[0]), float(e.major_dir[1])
    ia2 = 1.0 / e.major_len ** 2
    ib2 = 1.0 / e.minor_len ** 2
    dd = ia2 - ib2
    alpha = dd * my * my + ib2
    beta = 2.0 * dd * mx * my * zx
    gamma = dd * mx * mx * zx * zx + zx * zx * ib2
    zy = min(max(-beta / (2.0 * alpha), y_lo - e.center[1]),
             y_hi - e.center[1])
    return alpha * zy * zy + beta * zy + gamma <= 1.0


def lr1_census(ellipses, epsilon: float) -> int:
    """Count ellipses with center in K(eps/2), diameter >= 10*eps, and signed
    axis angle within 1/10 of horizontal.

    Every censused ellipse provably crosses both vertical sides of
    K(3*eps, eps); that implication is asserted against the direct
    segment-intersection test and a violation raises RuntimeError.
    """
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    count = 0
    for e in _shape_items(ellipses):
        if not isinstance(e, Ellipsoid) or e.k != 2:
            raise ValueError("census requires planar (k=2) ellipsoids")
        if abs(e.center[0]) > epsilon / 4.0 or abs(e.center[1]) > epsilon / 4.0:
            continue
        if 2.0 * e.major_len < 10.0 * epsilon:
            continue
        ang = math.atan2(e.major_dir[1], e.major_dir[0])
        if abs(ang) >= 0.1:
            continue
        count += 1
        for side in (-1.5 * epsilon, 1.5 * epsilon):
            if not _ellipse_meets_vsegment(e, side, -epsilon / 2.0,
                                           epsilon / 2.0):
                raise RuntimeError(
                    "censused ellipse fails the side-crossing guarantee")
    return count


def _check_lr1_params(epsilon: float, r_min: float) -> None:
    if not 0.0 < r_min <= 5.0 * epsilon:
        raise ValueError("need 0 < r_min <= 5*epsilon")
    if not 5.0 * epsilon <= 1.0:
        raise ValueError("need 5*epsilon <= 1")


def lr1_expected(lam: float, epsilon: float, r_min: float, d: int = 3) -> float:
    """Expected census count per unit intensity window, closed form.

    Diverges logarithmically as r_min -> 0: the un-truncated expectation is
    infinite, which is the engine of the planar connectivity collapse.
    """
    if d != 3:
        raise ValueError("the closed form is specific to d=3 slices")
    _check_lr1_params(epsilon, r_min)
    return lam * upsilon(3) * (math.log(5.0 * epsilon / r_min) / 1000.0
                               + 1.0 / 2000.0 - epsilon ** 2 / 80.0)


def lr1_expected_quadrature(lam: float, epsilon: float, r_min: float) -> float:
    """Independent route to lr1_expected: numerically integrate the radius
    profile of the census intensity.

    Factors: center area (eps/2)^2, signed-angle window 0.2/(2 pi), shape
    mass ||xi_{2,r}|| = 1/(2 pi) for d=3, and per-radius diameter survival
    P(D >= 10 eps | r) = min(1, (r / (5 eps))^2) from D = 2r/sqrt(V) with V
    uniform on (0, 1).
    """
    from scipy.integrate import quad

    _check_lr1_params(epsilon, r_min)
    tau = 10.0 * epsilon

    def integrand(r: float) -> float:
        surv = min(1.0, 4.0 * r * r / (tau * tau))
        return r ** -3.0 * surv

    val, _ = quad(integrand, r_min, 1.0, points=[min(1.0, tau / 2.0)],
                  limit=200)
    angle = 0.2 / (2.0 * math.pi)
    return lam * (epsilon / 2.0) ** 2 * angle * xi_tv(3, 2, 1.0) * val


def _sample_lr1_ellipses(lam: float, epsilon: float, r_min: float,
                         rng: np.random.Generator) -> list[Ellipsoid]:
    """Draw the restriction of the induced d=3 ellipse process to shapes with
    diameter >= 10*eps and center in K(eps), radii truncated to [r_min, 1].

    Restricting the Poisson intensity is exact (independent thinning), and
    keeps the expected census cost O(1) while the census predicates on center
    and angle remain nontrivial.
    """
    tau = 10.0 * epsilon
    rcut = tau / 2.0
    m1 = (4.0 / tau ** 2) * math.log(rcut / r_min)
    m2 = 0.5 * (rcut ** -2.0 - 1.0)
    mass = lam * epsilon ** 2 * (m1 + m2) / (2.0 * math.pi)
    count = int(rng.poisson(mass))
    out = []
    if count == 0:
        return out
    u = rng.random(count)
    pick1 = rng.random(count) < m1 / (m1 + m2)
    r = np.where(
        pick1,
        r_min * (rcut / r_min) ** u,
        (rcut ** -2.0 - u * (rcut ** -2.0 - 1.0)) ** -0.5,
    )
    y0 = np.maximum(1.0, (tau / (2.0 * r)) ** 2)
    y = y0 / rng.random(count)
    theta = rng.uniform(-math.pi, math.pi, size=count)
    centers = rng.uniform(-epsilon / 2.0, epsilon / 2.0, size=(count, 2))
    major = r * np.sqrt(y)
    for i in range(count):
        out.append(Ellipsoid(
            k=2, center=centers[i],
            major_dir=np.array([math.cos(theta[i]), math.sin(theta[i])]),
            major_len=float(major[i]), minor_len=float(r[i])))
    return out


@dataclass(frozen=True)
class Lr1Result:
    """Replica censuses of the restricted large-ellipse process."""

    lam: float
    epsilon: float
    r_min: float
    counts: np.ndarray
    expected: float

    @property
    def mean(self) -> float:
        return float(self.counts.mean())

    @property
    def se(self) -> float:
        n = self.counts.size
        return float(self.counts.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0

    @property
    def z(self) -> float:
        diff = self.mean - self.expected
        if self.se > 0:
            return diff / self.se
        return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)


_LR1_CHUNK = 16384


def lr1_experiment(lam: float, epsilon: float, r_min: float, replicas: int,
                   seed: int) -> Lr1Result:
    """Monte Carlo census counts versus the closed-form expectation.

    Replicas are generated in fixed-size chunks, one RNG stream per chunk, so
    very large replica counts stay vectorized; the result is deterministic in
    (seed, replicas) and independent of threading.  The census predicates are
    identical to lr1_census, including the side-crossing guarantee check on
    every counted ellipse.
    """
    _check_lr1_params(epsilon, r_min)
    if replicas < 2:
        raise ValueError("need at least 2 replicas for a standard error")
    tau = 10.0 * epsilon
    rcut = tau / 2.0
    m1 = (4.0 / tau ** 2) * math.log(rcut / r_min)
    m2 = 0.5 * (rcut ** -2.0 - 1.0)
    mass = lam * epsilon ** 2 * (m1 + m2) / (2.0 * math.pi)
    counts = np.zeros(replicas, dtype=np.int64)
    for start in range(0, replicas, _LR1_CHUNK):
        size = min(_LR1_CHUNK, replicas - start)
        rng = stream_rng(seed, start // _LR1_CHUNK)
        per_rep = rng.poisson(mass, size=size)
        total = int(per_rep.sum())
        if total == 0:
            continue
        u = rng.random(total)
        pick1 = rng.random(total) < m1 / (m1 + m2)
        r = np.where(
            pick1,
            r_min * (rcut / r_min) ** u,
            (rcut ** -2.0 - u * (rcut ** -2.0 - 1.0)) ** -0.5,
        )
        y = np.maximum(1.0, (tau / (2.0 * r)) ** 2) / rng.random(total)
        theta = rng.uniform(-math.pi, math.pi, size=total)
        centers = rng.uniform(-epsilon / 2.0, epsilon / 2.0, size=(total, 2))
        major = r * np.sqrt(y)
        hit = ((np.abs(centers[:, 0]) <= epsilon / 4.0)
               & (np.abs(centers[:, 1]) <= epsilon / 4.0)
               & (2.0 * major >= tau)
               & (np.abs(theta) < 0.1))
        rep_ids = np.repeat(np.arange(size), per_rep)
        counts[start:start + size] = np.bincount(rep_ids[hit], minlength=size)
        for idx in np.flatnonzero(hit):
            ell = Ellipsoid(
                k=2, center=centers[idx],
                major_dir=np.array([math.cos(theta[idx]),
                                    math.sin(theta[idx])]),
                major_len=float(major[idx]), minor_len=float(r[idx]))
            for side in (-1.5 * epsilon, 1.5 * epsilon):
                if not _ellipse_meets_vsegment(ell, side, -epsilon / 2.0,
                                               epsilon / 2.0):
                    raise RuntimeError(
                        "censused ellipse fails the side-crossing guarantee")
    return Lr1Result(lam=lam, epsilon=epsilon, r_min=r_min, counts=counts,
                     expected=lr1_expected(lam, epsilon, r_min))


# =========================================================================
# connectivity trend across truncation levels
# =========================================================================

@dataclass(frozen=True)
class CrossingReport:
    """Per-replica outcomes of one boolean crossing/arm event."""

    event: str
    outcomes: np.ndarray

    @property
    def frequency(self) -> float:
        return float(self.outcomes.mean())

    @property
    def se(self) -> float:
        p, n = self.frequency, self.outcomes.size
        return math.sqrt(p * (1.0 - p) / n) if n > 0 else 0.0


@dataclass(frozen=True)
class TrendLevel:
    """Crossing statistics of one truncation level n."""

    n: int
    delta: float
    reports: dict[str, CrossingReport]
    monotone_violations: int
    domination_violations: int


def connectivity_trend(d: int, lam: float, n_list, replicas: int, seed: int,
                       k: int = 2, window=None,
                       delta: float | None = None) -> list[TrendLevel]:
    """Vacant-crossing frequency of the unit square versus truncation level.

    Per replica the induced ellipse process is compared with its covering
    ball process (ball vacancy is a subset, so a ball-model crossing must
    imply an ellipse-model crossing — violations are counted and should be
    zero).  For d >= 4 the thinning/domination coupling is also exercised:
    the dominating regular-ball model's vacant set sits inside the thinned
    one, and the no-large-ball event frequency is reported.
    """
    if k != 2:
        raise ValueError("crossings are defined on planar (k=2) windows")
    if lam < 0.0:
        raise ValueError("lam must be >= 0")
    if window is None:
        window = WindowSpec.patch_window(2, (0.0, 0.0), (1.0, 1.0))
    couple = d >= 4 and 2 * k <= d
    out = []
    for li, n in enumerate(sorted(int(x) for x in n_list)):
        dlt = delta if delta is not None else 2.0 ** (-(n + 2))
        cross_e = np.zeros(replicas, dtype=bool)
        cross_b = np.zeros(replicas, dtype=bool)
        cross_dom = np.zeros(replicas, dtype=bool)
        h_empty = np.zeros(replicas, dtype=bool)
        mono_bad = 0
        dom_bad = 0
        for rep in range(replicas):
            rng = stream_rng(seed, li * replicas + rep)
            ells = induced_ellipse_process(d, 2, window, ("fractal", n), lam,
                                           rng)
            balls = induced_ball_process(ells)
            grid_e = rasterize(ells, window, dlt)
            grid_b = rasterize(balls, window, dlt)
            if np.any(grid_e.occupancy & ~grid_b.occupancy):
                mono_bad += 1
            cross_e[rep] = vacant_crossing(grid_e)
            cross_b[rep] = vacant_crossing(grid_b)
            if cross_b[rep] and not cross_e[rep]:
                mono_bad += 1
            if couple:
                thinned, dominating = thinning_coupling(balls, rng)
                h_empty[rep] = all(b.radius <= 2.0 for b in balls.items)
                grid_t = rasterize(thinned, window, dlt)
                grid_d = rasterize(dominating, window, dlt)
                if np.any(grid_t.occupancy & ~grid_d.occupancy):
                    dom_bad += 1
                cross_dom[rep] = vacant_crossing(grid_d)
        reports = {
            "ellipse_crossing": CrossingReport("ellipse_crossing", cross_e),
            "ball_crossing": CrossingReport("ball_crossing", cross_b),
        }
        if couple:
            reports["dominating_crossing"] = CrossingReport(
                "dominating_crossing", cross_dom)
            reports["h_empty"] = CrossingReport("h_empty", h_empty)
        out.append(TrendLevel(n=n, delta=dlt, reports=reports,
                              monotone_violations=mono_bad,
                              domination_violations=dom_bad))
    return out


# =========================================================================
# planar smoke helper
# =========================================================================

def line_crosses_square(line, half: float, tol: float = 1e-12) -> bool:
    """d=2 smoke check: does the line meet the centered square of half-side
    `half`?  Exact slab clipping; boundary grazes within tol count as
    crossings.  (No quantitative targets are attached to this event.)"""
    if not half > 0.0:
        raise ValueError("half must be positive")
    t0, t1 = -math.inf, math.inf
    for c in range(2):
        ac, pc = float(line.a[c]), float(line.p[c])
        lo, hi = -half - tol, half + tol
        if ac == 0.0:
            if pc < lo or pc > hi:
                return False
        else:
            u0, u1 = (lo - pc) / ac, (hi - pc) / ac
            if u0 > u1:
                u0, u1 = u1, u0
            t0, t1 = max(t0, u0), min(t1, u1)
    return t0 <= t1
