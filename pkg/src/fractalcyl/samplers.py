"""Exact Poisson sampling of line, cylinder, ellipse, and ball processes.

All samplers draw from finite-window restrictions with per-radius exact
hitting sets (a cylinder of radius r intersects a ball window of radius rho
iff its axis passes within rho + r of the center), so no boundary truncation
bias enters.  Randomness comes exclusively from counter-based Philox streams
keyed by (seed, stream_id); nothing global, so replicas are reproducible and
order-independent.

Array-level helpers (suffix `_arrays`) carry the hot paths used by the
experiment drivers; the public samplers wrap their output into ProcessSample
objects for API consumers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import measures
from .geom import Cylinder, Ellipsoid, LineParam, cylinder_subspace_ellipse, embed

__all__ = [
    "Ball",
    "WindowSpec",
    "ProcessSample",
    "stream_rng",
    "sample_lines_ball",
    "sample_fractal_cylinders",
    "induced_ellipse_process",
    "induced_ball_process",
    "regular_ball_process",
    "thinning_coupling",
    "sample_shape_diameters",
    "ellipse_touches_box",
    "FractalRadiusSampler",
    "dump_sample_csv",
]

_UD_EPS = 1e-14  # lines this close to parallel with H_{d-1} are resampled


# ============================================================================
# RNG plumbing
# ============================================================================

def stream_rng(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Philox generator keyed by the 128-bit pair (seed, stream_id).

    Distinct stream ids give statistically independent streams; identical
    pairs reproduce byte-identical draws on any platform.
    """
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
                    np.uint64(stream_id & 0xFFFFFFFFFFFFFFFF)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


# ============================================================================
# Sample containers
# ============================================================================

@dataclass(frozen=True)
class Ball:
    """Closed ball in R^k."""

    k: int
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        if c.shape != (self.k,):
            raise ValueError(f"center must have shape ({self.k},)")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center", c)

    def contains(self, x) -> bool:
        z = np.asarray(x, dtype=float) - self.center
        return float(np.dot(z, z)) <= self.radius ** 2


@dataclass(frozen=True)
class WindowSpec:
    """Sampling window: a d-ball ('ball') or an axis rectangle in R^k ('patch')."""

    kind: str
    d: int = 0
    center: np.ndarray | None = None
    radius: float = 0.0
    k: int = 0
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "ball":
            c = np.asarray(self.center, dtype=float)
            if c.shape != (self.d,):
                raise ValueError("ball window needs center of shape (d,)")
            if self.radius <= 0:
                raise ValueError("ball window needs radius > 0")
            object.__setattr__(self, "center", c)
        elif self.kind == "patch":
            lo = np.asarray(self.lo, dtype=float)
            hi = np.asarray(self.hi, dtype=float)
            if lo.shape != (self.k,) or hi.shape != (self.k,):
                raise ValueError("patch window needs lo/hi of shape (k,)")
            if not np.all(hi > lo):
                raise ValueError("patch window must be non-degenerate")
            object.__setattr__(self, "lo", lo)
            object.__setattr__(self, "hi", hi)
        else:
            raise ValueError(f"unknown window kind {self.kind!r}")

    @staticmethod
    def ball_window(d: int, center, radius: float) -> "WindowSpec":
        return WindowSpec(kind="ball", d=d, center=np.asarray(center, float),
                          radius=radius)

    @staticmethod
    def patch_window(k: int, lo, hi) -> "WindowSpec":
        return WindowSpec(kind="patch", k=k, lo=np.asarray(lo, float),
                          hi=np.asarray(hi, float))

    def circumball(self) -> tuple[np.ndarray, float]:
        """Center and radius of the patch's circumscribed ball (patch kind)."""
        if self.kind != "patch":
            raise ValueError("circumball is defined for patch windows")
        c = 0.5 * (self.lo + self.hi)
        return c, 0.5 * float(np.linalg.norm(self.hi - self.lo))


@dataclass(frozen=True)
class ProcessSample:
    """A realized point-process sample restricted to a window.

    kind is one of {"lines", "cylinders", "ellipses", "balls"}; every item
    intersects the window; (seed, stream_id) plus the generating parameters
    reproduce the items exactly.  d records the ambient dimension of the
    underlying cylinder process (equal to k for intrinsic ball models).
    r_min is the radius truncation (0 for fixed-radius models).
    """

    kind: str
    items: tuple
    window: WindowSpec
    r_min: float
    lam: float
    seed: int
    stream_id: int
    d: int

    def __post_init__(self):
        if self.kind not in ("lines", "cylinders", "ellipses", "balls"):
            raise ValueError(f"unknown sample kind {self.kind!r}")
        object.__setattr__(self, "items", tuple(self.items))

    def __len__(self) -> int:
        return len(self.items)


# ============================================================================
# Uniform sphere / ball draws and chart conversion
# ============================================================================

def _lines_hitting_ball_arrays(d: int, center: np.ndarray, radii: np.ndarray,
                               rng: np.random.Generator):
    """Chart arrays (A, P) of lines hitting B(center, radii[i]), one per entry.

    Direction uniform on the sphere (entries with |u_d| < 1e-14 are resampled
    — a null set kept out of the chart), offset uniform on the perpendicular
    (d-1)-ball of the hitting radius.
    """
    n = radii.shape[0]
    u = rng.standard_normal((n, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    bad = np.abs(u[:, d - 1]) < _UD_EPS
    while np.any(bad):
        nb = int(np.count_nonzero(bad))
        ur = rng.standard_normal((nb, d))
        ur /= np.linalg.norm(ur, axis=1, keepdims=True)
        u[bad] = ur
        bad = np.abs(u[:, d - 1]) < _UD_EPS
    z = rng.standard_normal((n, d))
    z -= np.sum(z * u, axis=1, keepdims=True) * u
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    offs = z * (radii * rng.random(n) ** (1.0 / (d - 1)))[:, None]
    q = center[None, :] + offs  # a point on the line
    a = u / u[:, d - 1:d]
    p = q - a * q[:, d - 1:d]
    a[:, d - 1] = 1.0  # pin the chart constraints exactly
    p[:, d - 1] = 0.0
    return a, p


def _lines_to_objects(d: int, a: np.ndarray, p: np.ndarray) -> list[LineParam]:
    return [LineParam(d=d, a=a[i].copy(), p=p[i].copy()) for i in range(a.shape[0])]


# ============================================================================
# Radius inverse-CDF sampler for the truncated fractal density
# ============================================================================

class FractalRadiusSampler:
    """Inverse-CDF sampler for the density ∝ (rho + r)^{d-1} r^{-d} on (2^-n, 1].

    A 10^4-knot table (log-spaced in r, exact closed-form CDF values) supplies
    the monotone-interpolation bracket; two vectorized Newton steps with the
    exact CDF and density polish each draw to |F(x) - u| <= 1e-10 of total
    mass.  Built once per (d, n, rho).
    """

    KNOTS = 10_000

    def __init__(self, d: int, rho: float, n: int):
        if n < 1:
            raise ValueError("radius sampler needs truncation level n >= 1")
        self.d = int(d)
        self.rho = float(rho)
        self.r_lo = 2.0 ** (-n)
        self.grid = np.exp(np.linspace(math.log(self.r_lo), 0.0, self.KNOTS))
        self.grid[0] = self.r_lo
        self.grid[-1] = 1.0
        self.cdf = measures.cylinder_window_cdf(d, rho, self.r_lo, self.grid)
        self.cdf[0] = 0.0
        self.mass = float(self.cdf[-1])

    def _density(self, r: np.ndarray) -> np.ndarray:
        return (self.rho + r) ** (self.d - 1) * r ** (-self.d)

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if size == 0:
            return np.empty(0)
        u = rng.random(size) * self.mass
        idx = np.searchsorted(self.cdf, u, side="right")
        idx = np.clip(idx, 1, self.KNOTS - 1)
        c0 = self.cdf[idx - 1]
        c1 = self.cdf[idx]
        r0 = self.grid[idx - 1]
        r1 = self.grid[idx]
        r = r0 + (u - c0) * (r1 - r0) / (c1 - c0)
        for _ in range(2):
            f = measures.cylinder_window_cdf(self.d, self.rho, self.r_lo, r) - u
            r = np.clip(r - f / self._density(r), r0, r1)
        return r


# ============================================================================
# Line and cylinder processes
# ============================================================================

def sample_lines_ball(d: int, center, radius: float, lam: float,
                      rng: np.random.Generator, *, seed: int = -1,
                      stream_id: int = 0) -> ProcessSample:
    """Poisson line process restricted to lines hitting B(center, radius).

    The count is Poisson(lam * radius^{d-1}); each line is drawn uniformly
    from the normalized restriction (direction uniform, perpendicular offset
    uniform on the shadow ball) and converted to the (a, p) chart.
    """
    if lam < 0:
        raise ValueError("need lambda >= 0")
    center = np.asarray(center, dtype=float)
    count = int(rng.poisson(lam * measures.nu_ball(d, radius)))
    a, p = _lines_hitting_ball_arrays(d, center, np.full(count, float(radius)), rng)
    window = WindowSpec.ball_window(d, center, radius)
    return ProcessSample(kind="lines", items=_lines_to_objects(d, a, p),
                         window=window, r_min=0.0, lam=lam, seed=seed,
                         stream_id=stream_id, d=d)


def sample_fractal_cylinders_arrays(d: int, center: np.ndarray, radius: float,
                                    n: int, lam: float,
                                    rng: np.random.Generator,
                                    sampler: FractalRadiusSampler | None = None):
    """Array form (A, P, R) of the truncated fractal cylinder process
    restricted to cylinders intersecting B(center, radius)."""
    if n == 0 or lam == 0.0:
        return (np.empty((0, d)), np.empty((0, d)), np.empty(0))
    if sampler is None:
        sampler = FractalRadiusSampler(d, radius, n)
    count = int(rng.poisson(lam * sampler.mass))
    r = sampler.draw(rng, count)
    a, p = _lines_hitting_ball_arrays(d, center, radius + r, rng)
    return a, p, r


def sample_fractal_cylinders(d: int, window: WindowSpec, n: int, lam: float,
                             rng: np.random.Generator, *, seed: int = -1,
                             stream_id: int = 0) -> ProcessSample:
    """Truncated fractal cylinder process (radii in (2^-n, 1], density r^{-d})
    restricted to cylinders intersecting the ball window.

    The total mass is lam * int_{2^-n}^1 (rho + r)^{d-1} r^{-d} dr (exact
    closed form); radii come from the inverse-CDF table, and each axis line is
    drawn hitting B(center, rho + r) — the exact per-radius hitting set.
    n = 0 yields the empty process (degenerate truncation interval).
    """
    if window.kind != "ball":
        raise ValueError("fractal cylinder sampling uses a ball window")
    if lam < 0 or n < 0:
        raise ValueError("need lambda >= 0 and n >= 0")
    a, p, r = sample_fractal_cylinders_arrays(d, window.center, window.radius,
                                              n, lam, rng)
    items = [Cylinder(line=ln, r=float(r[i]))
             for i, ln in enumerate(_lines_to_objects(d, a, p))]
    return ProcessSample(kind="cylinders", items=items, window=window,
                         r_min=2.0 ** (-n) if n > 0 else 0.0, lam=lam,
                         seed=seed, stream_id=stream_id, d=d)


# ============================================================================
# Induced ellipse / ball processes on a subspace patch
# ============================================================================

def ellipse_touches_box(ell: Ellipsoid, lo, hi, tol: float = 1e-12) -> bool:
    """Whether an open ellipsoid meets an axis box, by minimizing its quadratic
    form over the box (convex; cyclic coordinate descent with exact
    per-coordinate clamps)."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    m = ell.major_dir
    c = ell.center
    ima2 = 1.0 / ell.major_len ** 2
    imi2 = 1.0 / ell.minor_len ** 2
    # Q(z) = imi2 |z-c|^2 + (ima2 - imi2) <z-c, m>^2  (positive definite)
    z = np.clip(c, lo, hi)
    if _quadform(z - c, m, ima2, imi2) < 1.0:
        return True
    for _ in range(200):
        moved = 0.0
        for i in range(ell.k):
            # minimize Q over z_i with the others fixed: quadratic in z_i
            w = z - c
            wi = w[i]
            s = float(np.dot(w, m)) - wi * m[i]
            # Q(zi) = imi2*(zi-ci)^2 + (ima2-imi2)*(s + (zi-ci) m_i)^2 + const
            alpha = imi2 + (ima2 - imi2) * m[i] * m[i]
            beta = (ima2 - imi2) * s * m[i]
            zi_new = c[i] - beta / alpha
            zi_new = min(max(zi_new, lo[i]), hi[i])
            moved = max(moved, abs(zi_new - z[i]))
            z[i] = zi_new
        if moved < tol:
            break
    return _quadform(z - c, m, ima2, imi2) < 1.0


def _quadform(w: np.ndarray, m: np.ndarray, ima2: float, imi2: float) -> float:
    u = float(np.dot(w, m))
    return imi2 * float(np.dot(w, w)) + (ima2 - imi2) * u * u


def induced_ellipse_process(d: int, k: int, patch: WindowSpec, radius_mode,
                            lam: float, rng: np.random.Generator, *,
                            seed: int = -1, stream_id: int = 0) -> ProcessSample:
    """Ellipsoid process induced on H_k by slicing sampled cylinders.

    radius_mode is ("fixed", r) for the fixed-radius model or ("fractal", n)
    for the truncated fractal model.  Cylinders are sampled intersecting the
    patch's circumscribed ball (an exact superset of those whose slice meets
    the patch, with per-radius line windows inside the ball's 1-neighborhood);
    misses of H_k and slices missing the patch are discarded.
    """
    if not (1 <= k <= d - 1):
        raise ValueError(f"need 1 <= k <= d-1, got k={k}")
    if patch.kind != "patch" or patch.k != k:
        raise ValueError("patch window of matching k required")
    mode, value = radius_mode
    c_k, R_p = patch.circumball()
    center = embed(c_k, d)

    if mode == "fixed":
        r_fix = float(value)
        if not (0.0 < r_fix <= 1.0):
            raise ValueError("fixed radius must lie in (0, 1]")
        count = int(rng.poisson(lam * measures.nu_ball(d, R_p + r_fix)))
        a, p = _lines_hitting_ball_arrays(d, center, np.full(count, R_p + r_fix), rng)
        radii = np.full(count, r_fix)
        r_min = 0.0
    elif mode == "fractal":
        n = int(value)
        a, p, radii = sample_fractal_cylinders_arrays(d, center, R_p, n, lam, rng)
        r_min = 2.0 ** (-n) if n > 0 else 0.0
    else:
        raise ValueError(f"unknown radius mode {mode!r}")

    items = []
    for i in range(radii.shape[0]):
        cyl = Cylinder(line=LineParam(d=d, a=a[i].copy(), p=p[i].copy()),
                       r=float(radii[i]))
        ell = cylinder_subspace_ellipse(cyl, k)
        if ell is not None and ellipse_touches_box(ell, patch.lo, patch.hi):
            items.append(ell)
    return ProcessSample(kind="ellipses", items=items, window=patch,
                         r_min=r_min, lam=lam, seed=seed, stream_id=stream_id,
                         d=d)


def induced_ball_process(ellipses: ProcessSample) -> ProcessSample:
    """Replace each ellipsoid by the closed ball with the same center and
    diameter (radius = major_len); the ball covers its ellipsoid."""
    if ellipses.kind != "ellipses":
        raise ValueError("input sample must have kind 'ellipses'")
    balls = [Ball(k=e.k, center=e.center, radius=e.major_len)
             for e in ellipses.items]
    return ProcessSample(kind="balls", items=balls, window=ellipses.window,
                         r_min=ellipses.r_min, lam=ellipses.lam,
                         seed=ellipses.seed, stream_id=ellipses.stream_id,
                         d=ellipses.d)


# ============================================================================
# Regular ball model and the domination coupling
# ============================================================================

def regular_ball_process(k: int, lam: float, patch: WindowSpec,
                         rng: np.random.Generator, *, r_min: float,
                         seed: int = -1, stream_id: int = 0) -> ProcessSample:
    """Poisson ball model with homogeneous centers and radius density
    ∝ R^{-k-1} on (r_min, 2], restricted to balls meeting the patch.

    Centers are drawn in the patch inflated by 2 (no ball with R <= 2 from
    farther away can reach it) and the sample keeps exactly the balls whose
    closed set intersects the patch.
    """
    if r_min <= 0:
        raise ValueError("regular ball model needs r_min > 0")
    if lam < 0:
        raise ValueError("need lambda >= 0")
    if patch.kind != "patch" or patch.k != k:
        raise ValueError("patch window of matching k required")
    items: list[Ball] = []
    if r_min < 2.0 and lam > 0:
        lo = patch.lo - 2.0
        hi = patch.hi + 2.0
        area = float(np.prod(hi - lo))
        radial_mass = (r_min ** (-k) - 2.0 ** (-k)) / k
        count = int(rng.poisson(lam * area * radial_mass))
        centers = lo[None, :] + rng.random((count, k)) * (hi - lo)[None, :]
        u = rng.random(count)
        radii = (r_min ** (-k) - u * (r_min ** (-k) - 2.0 ** (-k))) ** (-1.0 / k)
        gap = np.maximum(patch.lo[None, :] - centers, 0.0) \
            + np.maximum(centers - patch.hi[None, :], 0.0)
        dist = np.linalg.norm(gap, axis=1)
        for i in np.nonzero(dist <= radii)[0]:
            items.append(Ball(k=k, center=centers[i], radius=float(radii[i])))
    return ProcessSample(kind="balls", items=items, window=patch, r_min=r_min,
                         lam=lam, seed=seed, stream_id=stream_id, d=k)


class _ExtraRadiusTable:
    """Inverse-CDF table for the superposed radii of the domination coupling,
    density ∝ (beta_0 - beta_R) R^{-k-1} on (0, 2] (vanishes like R at 0)."""

    def __init__(self, d: int, k: int, knots: int = 2000):
        self.d, self.k = d, k
        beta0 = measures.beta_factor(d, k, 0.0)
        grid = np.linspace(0.0, 2.0, knots)
        dens = np.zeros(knots)
        for i in range(1, knots):
            R = grid[i]
            dens[i] = (beta0 - measures.beta_factor(d, k, R)) * R ** (-k - 1)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1])
                                               * np.diff(grid))])
        self.grid = grid
        self.cdf = cdf
        self.mass = float(cdf[-1]) * 2.0 ** (-k) * measures.xi_tv(d, k, 1.0)
        self._norm = cdf[-1]

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size) * self._norm
        return np.interp(u, self.cdf, self.grid)


_EXTRA_TABLES: dict[tuple[int, int], _ExtraRadiusTable] = {}


def _extra_table(d: int, k: int) -> _ExtraRadiusTable:
    tab = _EXTRA_TABLES.get((d, k))
    if tab is None:
        tab = _ExtraRadiusTable(d, k)
        _EXTRA_TABLES[(d, k)] = tab
    return tab


def thinning_coupling(ellipse_balls: ProcessSample, rng: np.random.Generator, *,
                      seed: int = -1, stream_id: int = 0):
    """Couple the induced ball sample with a dominating regular ball sample.

    The thinned side is the input with every ball of radius > 2 removed.  The
    dominating side superposes an independent Poisson process whose radius
    intensity is the difference 2^{-k} (beta_0 - beta_R) TV R^{-k-1} dR on
    (0, 2] — exactly the mass removed by the beta_R/beta_0 thinning — so
    thinned ⊆ dominating holds by construction and the dominating marginal is
    the regular model with radius intensity 2^{-k} beta_0 TV R^{-k-1} dR.
    beta values come from cached deterministic tables.

    Requires d >= 4 and 2k <= d so that beta_0 is finite.
    """
    if ellipse_balls.kind != "balls":
        raise ValueError("input sample must have kind 'balls'")
    d, k = ellipse_balls.d, ellipse_balls.window.k
    if d < 4 or 2 * k > d:
        raise ValueError(
            f"coupling needs d >= 4 and k <= d/2 (beta_0 finite); got d={d}, k={k}")
    patch = ellipse_balls.window
    lam = ellipse_balls.lam

    thinned_items = [b for b in ellipse_balls.items if b.radius <= 2.0]
    tab = _extra_table(d, k)
    lo = patch.lo - 2.0
    hi = patch.hi + 2.0
    area = float(np.prod(hi - lo))
    count = int(rng.poisson(lam * area * tab.mass))
    centers = lo[None, :] + rng.random((count, k)) * (hi - lo)[None, :]
    radii = tab.draw(rng, count)
    extra = []
    for i in range(count):
        gap = np.maximum(patch.lo - centers[i], 0.0) \
            + np.maximum(centers[i] - patch.hi, 0.0)
        if float(np.linalg.norm(gap)) <= radii[i] and radii[i] > 0:
            extra.append(Ball(k=k, center=centers[i], radius=float(radii[i])))

    thinned = ProcessSample(kind="balls", items=thinned_items, window=patch,
                            r_min=ellipse_balls.r_min, lam=lam, seed=seed,
                            stream_id=stream_id, d=d)
    dominating = ProcessSample(kind="balls", items=thinned_items + extra,
                               window=patch, r_min=0.0, lam=lam, seed=seed,
                               stream_id=stream_id, d=d)
    return thinned, dominating


# ============================================================================
# Direct shape sampling from the normalized induced shape measure
# ============================================================================

def sample_shape_diameters(d: int, k: int, r: float, size: int,
                           rng: np.random.Generator, full: bool = False):
    """Draw iid shapes from the normalized induced shape measure at radius r.

    Works in the untransformed chart.  The direction block A = (a_in, a_out)
    in R^{d-1} has target marginal ∝ (1 + |A|^2)^{-(d+1)/2} sqrt(1 + kappa^2)
    (kappa = |a_out|): propose A from a multivariate Student-t with 1 degree
    of freedom (density ∝ (1 + |A|^2)^{-d/2}, drawn as Z/|g|) and accept with
    probability sqrt((1 + kappa^2)/(1 + |A|^2)) <= 1 — the documented
    envelope.  Given A, the offset is uniform in the solid ellipsoid of
    admissible p (semi-axis r sqrt(1+kappa^2) along a_out, r elsewhere), which
    only enters the shape through the norm of a uniform unit-ball point.
    For k = d-1 there is no offset block and A is drawn exactly as
    Z / sqrt(chi^2_2) (no rejection).

    Returns diam array, or (diam, major, minor, rho, kappa) when full=True.
    """
    if not (2 <= k <= d - 1):
        raise ValueError(f"need 2 <= k <= d-1, got k={k}")
    if r <= 0:
        raise ValueError("need r > 0")
    if k == d - 1:
        z = rng.standard_normal((size, d - 1))
        w = rng.chisquare(2, size)
        A = z / np.sqrt(w)[:, None]
        rho2 = np.einsum("ij,ij->i", A, A)
        major = r * np.sqrt(1.0 + rho2)
        minor = np.full(size, r)
        diam = 2.0 * major
        if full:
            return diam, major, minor, np.sqrt(rho2), np.zeros(size)
        return diam

    m = d - 1 - k  # transverse direction components
    got = 0
    A = np.empty((size, d - 1))
    while got < size:
        todo = size - got
        batch = max(256, int(2.2 * todo))
        z = rng.standard_normal((batch, d - 1))
        g = np.abs(rng.standard_normal(batch))
        cand = z / g[:, None]
        n2 = np.einsum("ij,ij->i", cand, cand)
        kap2 = np.einsum("ij,ij->i", cand[:, k:], cand[:, k:])
        acc = rng.random(batch) < np.sqrt((1.0 + kap2) / (1.0 + n2))
        take = min(int(np.count_nonzero(acc)), todo)
        A[got:got + take] = cand[acc][:take]
        got += take
    rho2 = np.einsum("ij,ij->i", A[:, :k], A[:, :k])
    kap2 = np.einsum("ij,ij->i", A[:, k:], A[:, k:])
    # |w| of a uniform point of the unit (d-k-1)-ball: F(t) = t^{d-k-1}
    wnorm = rng.random(size) ** (1.0 / (d - k - 1))
    tau = r * np.sqrt(1.0 - wnorm ** 2)
    S = 1.0 + kap2
    major = tau * np.sqrt((S + rho2) / S)
    diam = 2.0 * major
    if full:
        return diam, major, tau, np.sqrt(rho2), np.sqrt(kap2)
    return diam


# ============================================================================
# Sample dump (CSV external interface)
# ============================================================================

def dump_sample_csv(sample: ProcessSample, path: str) -> None:
    """Write a ProcessSample as CSV, one object per line, header mandatory.

    Numbers use the shortest exact round-trip decimal form.
    """
    import csv

    def num(v) -> str:
        return repr(float(v))

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if sample.kind == "lines":
            d = sample.d
            w.writerow(["d"] + [f"a_{i}" for i in range(1, d)]
                       + [f"p_{i}" for i in range(1, d)])
            for ln in sample.items:
                w.writerow([d] + [num(v) for v in ln.a[:d - 1]]
                           + [num(v) for v in ln.p[:d - 1]])
        elif sample.kind == "cylinders":
            d = sample.d
            w.writerow(["d"] + [f"a_{i}" for i in range(1, d)]
                       + [f"p_{i}" for i in range(1, d)] + ["r"])
            for cyl in sample.items:
                w.writerow([d] + [num(v) for v in cyl.line.a[:d - 1]]
                           + [num(v) for v in cyl.line.p[:d - 1]]
                           + [num(cyl.r)])
        elif sample.kind == "ellipses":
            k = sample.window.k
            w.writerow(["k"] + [f"center_{i}" for i in range(1, k + 1)]
                       + [f"major_dir_{i}" for i in range(1, k + 1)]
                       + ["major_len", "minor_len"])
            for e in sample.items:
                w.writerow([k] + [num(v) for v in e.center]
                           + [num(v) for v in e.major_dir]
                           + [num(e.major_len), num(e.minor_len)])
        elif sample.kind == "balls":
            k = sample.window.k
            w.writerow(["k"] + [f"center_{i}" for i in range(1, k + 1)] + ["R"])
            for b in sample.items:
                w.writerow([k] + [num(v) for v in b.center] + [num(b.radius)])
