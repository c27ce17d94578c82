"""Numba kernels for dyadic box surveys against cylinder samples.

The exact line-box squared distance minimizes the convex piecewise-quadratic
t -> dist^2(L(t), box) segment by segment: breakpoints occur where a
coordinate of the moving point crosses a box face; on each segment the active
coordinate set is fixed and the quadratic minimizer is closed-form.  Coverage
(box inside the open cylinder) is decided by the corner test — the distance
to the axis line is convex, so its maximum over the box is attained at a
corner.

Box addressing convention: boxes are full d-dimensional cubes of side
h = 2^-n whose bases tile the unit cube of the coordinate k-subspace.  The
first k coordinates carry the integer index and extend over
[idx*h, idx*h + h]; all remaining coordinates span [0, h].  The fast kernel
specializes k = 1 and k = 2, walking the columns a cylinder can reach;
`box_status` is the generic reference used both for k >= 3 grids and as the
independent oracle for the fast path.

The corner test is only attempted when r exceeds the box inradius h/2: the
box's inscribed ball projects to a disc of radius h/2 in the cylinder
cross-section, so no thinner cylinder can contain the box whatever its
orientation.  (The circumradius h*sqrt(d)/2 would be a wrong gate: an
oblique cylinder can cover the box at radii below it.)
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _box_lo(c, i, j, h, k):
    if c == 0:
        return i * h
    if c == 1 and k >= 2:
        return j * h
    return 0.0


@njit(cache=True, inline="always")
def _dist2_box(a, p, d, t, i, j, h, k):
    s = 0.0
    for c in range(d):
        x = p[c] + a[c] * t
        lo = _box_lo(c, i, j, h, k)
        hi = lo + h
        if x < lo:
            r = lo - x
        elif x > hi:
            r = x - hi
        else:
            r = 0.0
        s += r * r
    return s


@njit(cache=True)
def _line_box_dist2(a, p, d, i, j, h, k, bps):
    """Exact squared distance from the line {a t + p} to the box addressed by
    (i, j) at level side h (see module docstring for the addressing)."""
    nb = 0
    for c in range(d):
        ac = a[c]
        if ac != 0.0:
            lo = _box_lo(c, i, j, h, k)
            bps[nb] = (lo - p[c]) / ac
            bps[nb + 1] = (lo + h - p[c]) / ac
            nb += 2
    # insertion sort (tiny array)
    for ii in range(1, nb):
        key = bps[ii]
        jj = ii - 1
        while jj >= 0 and bps[jj] > key:
            bps[jj + 1] = bps[jj]
            jj -= 1
        bps[jj + 1] = key

    best = 1e300
    for seg in range(nb + 1):
        if seg == 0:
            s_lo = -1.0e30
            s_hi = bps[0]
            t_eval = bps[0] - 1.0
        elif seg == nb:
            s_lo = bps[nb - 1]
            s_hi = 1.0e30
            t_eval = bps[nb - 1] + 1.0
        else:
            s_lo = bps[seg - 1]
            s_hi = bps[seg]
            if s_hi - s_lo <= 0.0:
                continue
            t_eval = 0.5 * (s_lo + s_hi)
        # quadratic coefficients of the active set at t_eval
        alpha = 0.0
        beta = 0.0
        for c in range(d):
            lo = _box_lo(c, i, j, h, k)
            hi = lo + h
            x = p[c] + a[c] * t_eval
            if x < lo:
                alpha += a[c] * a[c]
                beta += 2.0 * a[c] * (p[c] - lo)
            elif x > hi:
                alpha += a[c] * a[c]
                beta += 2.0 * a[c] * (p[c] - hi)
        if alpha > 0.0:
            t_star = -beta / (2.0 * alpha)
            if t_star < s_lo:
                t_star = s_lo
            elif t_star > s_hi:
                t_star = s_hi
        else:
            t_star = t_eval
        v = _dist2_box(a, p, d, t_star, i, j, h, k)
        if v < best:
            best = v
    return best


@njit(cache=True, inline="always")
def _corners_inside(a, p, inv_na2, d, i, j, h, k, r2):
    """All 2^d box corners strictly within sqrt(r2) of the axis line."""
    for mask in range(1 << d):
        ww = 0.0
        wa = 0.0
        for c in range(d):
            x = _box_lo(c, i, j, h, k)
            if (mask >> c) & 1:
                x += h
            w = x - p[c]
            ww += w * w
            wa += w * a[c]
        if ww - wa * wa * inv_na2 >= r2:
            return False
    return True


@njit(cache=True)
def survey_level(A, P, R, ncyl, n, d, k, touched, covered):
    """Mark level-n boxes touched / covered by the first ncyl cylinders.

    touched and covered are flat bool arrays of length 2^{kn} indexed by
    i * nb + j (k=2) or i (k=1); marks accumulate (arrays are not cleared).
    """
    h = 2.0 ** (-n)
    nb = 1 << n
    inradius2 = h * h / 4.0
    bps = np.empty(2 * d + 2)
    for ci in range(ncyl):
        r = R[ci]
        r2 = r * r
        a = A[ci]
        p = P[ci]
        na2 = 0.0
        for c in range(d):
            na2 += a[c] * a[c]
        inv_na2 = 1.0 / na2
        can_cover = r2 > inradius2
        # parameter window where the moving point can be within r of any box
        t0 = -1.0e30
        t1 = 1.0e30
        feasible = True
        for c in range(d):
            if c < k:
                blo = -r
                bhi = 1.0 + r
            else:
                blo = -r
                bhi = h + r
            ac = a[c]
            pc = p[c]
            if ac != 0.0:
                u0 = (blo - pc) / ac
                u1 = (bhi - pc) / ac
                if u0 > u1:
                    u0, u1 = u1, u0
                if u0 > t0:
                    t0 = u0
                if u1 < t1:
                    t1 = u1
            elif pc < blo or pc > bhi:
                feasible = False
                break
        if not feasible or t0 > t1:
            continue

        x0 = p[0] + a[0] * t0
        x1 = p[0] + a[0] * t1
        if x0 > x1:
            x0, x1 = x1, x0
        i_lo = int(np.floor((x0 - r) / h))
        i_hi = int(np.floor((x1 + r) / h))
        if i_lo < 0:
            i_lo = 0
        if i_hi > nb - 1:
            i_hi = nb - 1
        for i in range(i_lo, i_hi + 1):
            # tighten the parameter window to this column
            s0 = t0
            s1 = t1
            ac = a[0]
            pc = p[0]
            blo = i * h - r
            bhi = (i + 1) * h + r
            if ac != 0.0:
                u0 = (blo - pc) / ac
                u1 = (bhi - pc) / ac
                if u0 > u1:
                    u0, u1 = u1, u0
                if u0 > s0:
                    s0 = u0
                if u1 < s1:
                    s1 = u1
                if s0 > s1:
                    continue
            elif pc < blo or pc > bhi:
                continue
            if k == 1:
                idx = i
                if touched[idx] and (not can_cover or covered[idx]):
                    continue
                if _line_box_dist2(a, p, d, i, 0, h, k, bps) < r2:
                    touched[idx] = True
                    if can_cover and _corners_inside(a, p, inv_na2, d, i, 0, h, k, r2):
                        covered[idx] = True
            else:
                y0 = p[1] + a[1] * s0
                y1 = p[1] + a[1] * s1
                if y0 > y1:
                    y0, y1 = y1, y0
                j_lo = int(np.floor((y0 - r) / h))
                j_hi = int(np.floor((y1 + r) / h))
                if j_lo < 0:
                    j_lo = 0
                if j_hi > nb - 1:
                    j_hi = nb - 1
                for j in range(j_lo, j_hi + 1):
                    idx = i * nb + j
                    if touched[idx] and (not can_cover or covered[idx]):
                        continue
                    if _line_box_dist2(a, p, d, i, j, h, k, bps) < r2:
                        touched[idx] = True
                        if can_cover and _corners_inside(a, p, inv_na2, d, i, j,
                                                         h, k, r2):
                            covered[idx] = True


@njit(cache=True)
def box_status(A, P, R, ncyl, lo, hi, d):
    """(touched, covered) of one arbitrary axis box against ncyl cylinders.

    Generic-k reference route: no walking, no addressing convention — the box
    is given by its corner vectors directly (degenerate extents hi[c] == lo[c]
    are fine).  Used for k >= 3 surveys on small grids and as the independent
    oracle for survey_level.
    """
    touched = False
    covered = False
    minext = 1.0e300
    for c in range(d):
        ext = hi[c] - lo[c]
        if ext < minext:
            minext = ext
    inradius2 = minext * minext / 4.0
    bps = np.empty(2 * d + 2)
    for ci in range(ncyl):
        r = R[ci]
        r2 = r * r
        a = A[ci]
        p = P[ci]
        # exact distance via the generic segment scan
        nb = 0
        for c in range(d):
            ac = a[c]
            if ac != 0.0:
                bps[nb] = (lo[c] - p[c]) / ac
                nb += 1
                if hi[c] > lo[c]:
                    bps[nb] = (hi[c] - p[c]) / ac
                    nb += 1
        for ii in range(1, nb):
            key = bps[ii]
            jj = ii - 1
            while jj >= 0 and bps[jj] > key:
                bps[jj + 1] = bps[jj]
                jj -= 1
            bps[jj + 1] = key
        best = 1.0e300
        for seg in range(nb + 1):
            if seg == 0:
                s_lo = -1.0e30
                s_hi = bps[0]
                t_eval = bps[0] - 1.0
            elif seg == nb:
                s_lo = bps[nb - 1]
                s_hi = 1.0e30
                t_eval = bps[nb - 1] + 1.0
            else:
                s_lo = bps[seg - 1]
                s_hi = bps[seg]
                if s_hi - s_lo <= 0.0:
                    continue
                t_eval = 0.5 * (s_lo + s_hi)
            alpha = 0.0
            beta = 0.0
            for c in range(d):
                x = p[c] + a[c] * t_eval
                if x < lo[c]:
                    alpha += a[c] * a[c]
                    beta += 2.0 * a[c] * (p[c] - lo[c])
                elif x > hi[c]:
                    alpha += a[c] * a[c]
                    beta += 2.0 * a[c] * (p[c] - hi[c])
            if alpha > 0.0:
                t_star = -beta / (2.0 * alpha)
                if t_star < s_lo:
                    t_star = s_lo
                elif t_star > s_hi:
                    t_star = s_hi
            else:
                t_star = t_eval
            s = 0.0
            for c in range(d):
                x = p[c] + a[c] * t_star
                if x < lo[c]:
                    resid = lo[c] - x
                elif x > hi[c]:
                    resid = x - hi[c]
                else:
                    resid = 0.0
                s += resid * resid
            if s < best:
                best = s
        if best < r2:
            touched = True
            if r2 > inradius2:
                na2 = 0.0
                for c in range(d):
                    na2 += a[c] * a[c]
                inv_na2 = 1.0 / na2
                inside = True
                for mask in range(1 << d):
                    ww = 0.0
                    wa = 0.0
                    for c in range(d):
                        x = hi[c] if (mask >> c) & 1 else lo[c]
                        w = x - p[c]
                        ww += w * w
                        wa += w * a[c]
                    if ww - wa * wa * inv_na2 >= r2:
                        inside = False
                        break
                if inside:
                    covered = True
                    break
    return touched, covered


@njit(cache=True)
def any_cover(A, P, R2, X):
    """covered[m] = point X[m] strictly inside at least one cylinder."""
    ncyl = A.shape[0]
    npts = X.shape[0]
    d = A.shape[1]
    out = np.zeros(npts, dtype=np.bool_)
    inv = np.empty(ncyl)
    for i in range(ncyl):
        na2 = 0.0
        for c in range(d):
            na2 += A[i, c] * A[i, c]
        inv[i] = 1.0 / na2
    for m in range(npts):
        for i in range(ncyl):
            ww = 0.0
            wa = 0.0
            for c in range(d):
                w = X[m, c] - P[i, c]
                ww += w * w
                wa += w * A[i, c]
            if ww - wa * wa * inv[i] < R2[i]:
                out[m] = True
                break
    return out


@njit(cache=True)
def cover_points(A, P, R2, X):
    """Boolean matrix: cover[i, m] = point X[m] strictly inside cylinder i."""
    ncyl = A.shape[0]
    npts = X.shape[0]
    d = A.shape[1]
    out = np.zeros((ncyl, npts), dtype=np.bool_)
    for i in range(ncyl):
        na2 = 0.0
        for c in range(d):
            na2 += A[i, c] * A[i, c]
        inv = 1.0 / na2
        for m in range(npts):
            ww = 0.0
            wa = 0.0
            for c in range(d):
                w = X[m, c] - P[i, c]
                ww += w * w
                wa += w * A[i, c]
            if ww - wa * wa * inv < R2[i]:
                out[i, m] = True
    return out
