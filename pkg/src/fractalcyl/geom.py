"""Exact geometry of lines, cylinders, and their slices by coordinate subspaces.

Lines in R^d are parameterized by the chart L(a, p) = {a t + p : t in R} with
a = (a_1, ..., a_{d-1}, 1) and p = (p_1, ..., p_{d-1}, 0); this chart covers
every line not parallel to the hyperplane x_d = 0 (a null set for the isometry
invariant line measure).  A cylinder is the open r-neighborhood of a line.  Its
trace on the coordinate subspace H_k = {x : x_{k+1} = ... = x_d = 0} is an open
ellipsoid with one long axis along the projected direction and k-1 equal short
axes; `cylinder_subspace_ellipse` computes that trace in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measures import psi

__all__ = [
    "LineParam",
    "Cylinder",
    "Ellipsoid",
    "DyadicBox",
    "embed",
    "point_line_distance",
    "line_hits_ball",
    "line_box_distance",
    "cylinder_subspace_ellipse",
    "ellipse_contains",
    "ellipse_stats",
    "folded_angle",
    "oriented_angle",
]

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0  # golden-section step ratio


# ============================================================================
# Types
# ============================================================================

@dataclass(frozen=True)
class LineParam:
    """Line {a t + p} in chart coordinates; a[-1] == 1 and p[-1] == 0 exactly."""

    d: int
    a: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if a.shape != (self.d,) or p.shape != (self.d,):
            raise ValueError(f"a and p must have shape ({self.d},)")
        if a[-1] != 1.0:
            raise ValueError("last component of a must be exactly 1")
        if p[-1] != 0.0:
            raise ValueError("last component of p must be exactly 0")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "p", p)

    # -- split accessors: a = (a_in(k), a_out(k), 1), likewise for p ---------
    def a_in(self, k: int) -> np.ndarray:
        """First k direction components (the part lying along H_k)."""
        return self.a[:k]

    def a_out(self, k: int) -> np.ndarray:
        """Direction components k+1 .. d-1 (transverse part, excluding a_d=1)."""
        return self.a[k:self.d - 1]

    def p_in(self, k: int) -> np.ndarray:
        return self.p[:k]

    def p_out(self, k: int) -> np.ndarray:
        return self.p[k:self.d - 1]

    def point_at(self, t: float) -> np.ndarray:
        return self.a * t + self.p


@dataclass(frozen=True)
class Cylinder:
    """Open r-neighborhood of a line, 0 < r <= 1."""

    line: LineParam
    r: float

    def __post_init__(self):
        if not (0.0 < self.r <= 1.0):
            raise ValueError(f"cylinder radius must lie in (0, 1], got {self.r}")

    def contains(self, x: np.ndarray) -> bool:
        return point_line_distance(x, self.line) < self.r


@dataclass(frozen=True)
class Ellipsoid:
    """Open ellipsoid in R^k with one distinguished long axis.

    The shape has semi-axis `major_len` along the unit vector `major_dir` and
    k-1 equal semi-axes `minor_len` orthogonal to it; major_len >= minor_len.
    """

    k: int
    center: np.ndarray
    major_dir: np.ndarray
    major_len: float
    minor_len: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        m = np.asarray(self.major_dir, dtype=float)
        if c.shape != (self.k,) or m.shape != (self.k,):
            raise ValueError(f"center and major_dir must have shape ({self.k},)")
        if abs(np.dot(m, m) - 1.0) > 1e-9:
            raise ValueError("major_dir must be a unit vector")
        if not (0.0 < self.minor_len <= self.major_len):
            raise ValueError("need 0 < minor_len <= major_len")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "major_dir", m)


@dataclass(frozen=True)
class DyadicBox:
    """Level-n dyadic box: base cell index * 2^-n + [0, 2^-n]^d inside R^d.

    The integer index vector addresses the first k coordinates (the box base
    ranges over the unit cube of H_k); in the remaining d-k coordinates the
    box always spans [0, 2^-n].
    """

    d: int
    k: int
    n: int
    index: tuple

    def __post_init__(self):
        if not (1 <= self.k <= self.d):
            raise ValueError("need 1 <= k <= d")
        if self.n < 0:
            raise ValueError("need n >= 0")
        idx = tuple(int(i) for i in self.index)
        if len(idx) != self.k:
            raise ValueError(f"index must have length k={self.k}")
        if any(i < 0 or i >= 2 ** self.n for i in idx):
            raise ValueError("index out of range for level n")
        object.__setattr__(self, "index", idx)

    @property
    def side(self) -> float:
        return 2.0 ** (-self.n)

    def lower(self) -> np.ndarray:
        lo = np.zeros(self.d)
        lo[:self.k] = np.asarray(self.index, dtype=float) * self.side
        return lo

    def upper(self) -> np.ndarray:
        return self.lower() + self.side

    def corners(self) -> np.ndarray:
        """All 2^d corners, shape (2^d, d)."""
        lo, hi = self.lower(), self.upper()
        bits = ((np.arange(2 ** self.d)[:, None] >> np.arange(self.d)) & 1)
        return np.where(bits.astype(bool), hi[None, :], lo[None, :])


# ============================================================================
# Core operations
# ============================================================================

def embed(y: np.ndarray, d: int) -> np.ndarray:
    """Lift a point of H_k (given by its k coordinates) to R^d by zero padding."""
    y = np.asarray(y, dtype=float)
    out = np.zeros(d)
    out[:y.shape[0]] = y
    return out


def point_line_distance(x: np.ndarray, line: LineParam) -> float:
    """Euclidean distance from x to the line {a t + p}.

    The minimizing parameter is t* = -<a, p - x> / ||a||^2; the distance is
    the norm of the residual at t*.
    """
    x = np.asarray(x, dtype=float)
    a, p = line.a, line.p
    t_star = -np.dot(a, p - x) / np.dot(a, a)
    return float(np.linalg.norm(a * t_star + p - x))


def line_hits_ball(line: LineParam, center: np.ndarray, radius: float) -> bool:
    """Whether the line passes strictly within `radius` of `center`."""
    return point_line_distance(np.asarray(center, dtype=float), line) < radius


def _box_distance_at(pt: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> float:
    excess = np.maximum(lo - pt, 0.0) + np.maximum(pt - hi, 0.0)
    return float(np.linalg.norm(excess))


def line_box_distance(line: LineParam, box: DyadicBox) -> float:
    """Distance between a line and an axis-aligned dyadic box.

    The squared distance t -> dist(L(t), box)^2 is convex in t, so a
    golden-section search over the bracket spanned by the parameter values of
    the corner projections converges unconditionally (200 iterations, interval
    tolerance 1e-12).
    """
    a, p = line.a, line.p
    lo, hi = box.lower(), box.upper()
    na2 = float(np.dot(a, a))
    t_corners = (box.corners() - p[None, :]) @ a / na2
    t_lo = float(np.min(t_corners))
    t_hi = float(np.max(t_corners))
    if t_hi - t_lo < 1e-15:
        return _box_distance_at(a * t_lo + p, lo, hi)

    def phi(t: float) -> float:
        return _box_distance_at(a * t + p, lo, hi)

    x1 = t_hi - _INVPHI * (t_hi - t_lo)
    x2 = t_lo + _INVPHI * (t_hi - t_lo)
    f1, f2 = phi(x1), phi(x2)
    for _ in range(200):
        if t_hi - t_lo < 1e-12:
            break
        if f1 <= f2:
            t_hi, x2, f2 = x2, x1, f1
            x1 = t_hi - _INVPHI * (t_hi - t_lo)
            f1 = phi(x1)
        else:
            t_lo, x1, f1 = x1, x2, f2
            x2 = t_lo + _INVPHI * (t_hi - t_lo)
            f2 = phi(x2)
    return phi(0.5 * (t_lo + t_hi))


def cylinder_subspace_ellipse(cyl: Cylinder, k: int):
    """Trace of an open cylinder on the subspace H_k, or None if it misses.

    With the direction split a = (a_in, a_out, 1) and offset split
    p = (p_in, p_out, 0), write S = 1 + ||a_out||^2 and
    h = ||p_out||^2 - <a_out, p_out>^2 / S (the squared distance from the
    origin-slice geometry).  The cylinder meets H_k iff h < r^2; the trace is
    then the open ellipsoid with

        center     = p_in - (<a_out, p_out> / S) a_in
        major axis = (||a|| / sqrt(S)) * sqrt(r^2 - h)  along a_in
        minor axes = sqrt(r^2 - h)                      (k - 1 of them)

    When a_in = 0 the trace is a ball and major_dir defaults to e_1.
    """
    d = cyl.line.d
    if not (1 <= k <= d - 1):
        raise ValueError(f"need 1 <= k <= d-1, got k={k}, d={d}")
    r = cyl.r
    a_in = cyl.line.a_in(k)
    a_out = cyl.line.a_out(k)
    p_in = cyl.line.p_in(k)
    p_out = cyl.line.p_out(k)

    S = 1.0 + float(np.dot(a_out, a_out))
    cross = float(np.dot(a_out, p_out))
    h = float(np.dot(p_out, p_out)) - cross * cross / S
    if h >= r * r:
        return None
    tau = math.sqrt(r * r - h)
    center = p_in - (cross / S) * a_in
    rho2 = float(np.dot(a_in, a_in))
    if rho2 == 0.0:
        major_dir = np.zeros(k)
        major_dir[0] = 1.0
        major_len = tau * math.sqrt((S + rho2) / S)  # == tau
    else:
        major_dir = a_in / math.sqrt(rho2)
        major_len = tau * math.sqrt((S + rho2) / S)
    return Ellipsoid(k=k, center=center, major_dir=major_dir,
                     major_len=major_len, minor_len=tau)


def ellipse_contains(ell: Ellipsoid, y: np.ndarray) -> bool:
    """Strict membership in the open ellipsoid (matches open-cylinder slices)."""
    z = np.asarray(y, dtype=float) - ell.center
    u = float(np.dot(z, ell.major_dir))
    w2 = max(float(np.dot(z, z)) - u * u, 0.0)
    q = (u / ell.major_len) ** 2 + w2 / ell.minor_len ** 2
    return q < 1.0


def folded_angle(v: np.ndarray) -> float:
    """Axis direction of a 2-vector folded to [-pi/2, pi/2), with pi/2 -> -pi/2."""
    ang = math.atan2(v[1], v[0]) % math.pi  # [0, pi)
    if ang >= math.pi / 2.0:
        ang -= math.pi
    return ang


def oriented_angle(v: np.ndarray) -> float:
    """Signed direction angle of a 2-vector in (-pi, pi]."""
    return math.atan2(v[1], v[0])


def ellipse_stats(ell: Ellipsoid, with_arg: bool | None = None):
    """(diameter, volume, arg) of an ellipsoid.

    diameter = 2 * major_len; volume = (psi_{k+1} / 2 pi) * major * minor^{k-1}
    (the unit-ball volume formula applied to the semi-axes).  The axial
    direction statistic `arg` is defined for k = 2 only and is reported folded
    to [-pi/2, pi/2) with pi/2 mapping to -pi/2; explicitly requesting it in
    any other dimension raises ValueError.  With the default with_arg=None the
    arg slot is filled for k = 2 and None otherwise.
    """
    k = ell.k
    diameter = 2.0 * ell.major_len
    volume = psi(k + 1) / (2.0 * math.pi) * ell.major_len * ell.minor_len ** (k - 1)
    if with_arg is None:
        with_arg = (k == 2)
    arg = None
    if with_arg:
        if k != 2:
            raise ValueError("arg statistic is only defined for k = 2")
        arg = folded_angle(ell.major_dir)
    return diameter, volume, arg
