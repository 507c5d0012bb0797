"""Compiled stencil kernels.

Grid arrays are indexed ``[i]`` in 1D and ``[i, j]`` in 2D with ``i`` along
x. ``periodic`` selects wrap-around neighbours; otherwise nodes are mirrored
about the boundary nodes (homogeneous Neumann).
"""

import math

import numpy as np
from numba import njit

# --------------------------------------------------------------------------
# Allen-Cahn, explicit Euler


@njit(cache=True, fastmath=False)
def ac_explicit_1d(u, n_steps, dt, dx, eps, forcing, periodic, bound):
    """Advance ``u_t = u_xx - (u^3 - u)/eps^2 + forcing[k]``.

    Returns ``(u, steps_done, max_abs)``; stops early when ``|u| > bound``.
    """
    n = u.shape[0]
    a = u.copy()
    b = np.empty_like(a)
    r = dt / (dx * dx)
    k2 = dt / (eps * eps)
    max_abs = 0.0
    for s in range(n_steps):
        g = dt * forcing[s]
        peak = 0.0
        for i in range(n):
            if periodic:
                im = i - 1 if i > 0 else n - 1
                ip = i + 1 if i < n - 1 else 0
            else:
                im = i - 1 if i > 0 else 1
                ip = i + 1 if i < n - 1 else n - 2
            c = a[i]
            v = c + r * (a[im] - 2.0 * c + a[ip]) - k2 * (c * c * c - c) + g
            b[i] = v
            av = abs(v)
            if av > peak:
                peak = av
        a, b = b, a
        if peak > max_abs:
            max_abs = peak
        if peak > bound:
            return a, s + 1, max_abs
    return a, n_steps, max_abs


@njit(cache=True, fastmath=False)
def ac_explicit_2d(u, n_steps, dt, dx, dy, eps, forcing, periodic, bound):
    nx, ny = u.shape
    a = u.copy()
    b = np.empty_like(a)
    rx = dt / (dx * dx)
    ry = dt / (dy * dy)
    k2 = dt / (eps * eps)
    max_abs = 0.0
    for s in range(n_steps):
        g = dt * forcing[s]
        peak = 0.0
        for i in range(nx):
            if periodic:
                im = i - 1 if i > 0 else nx - 1
                ip = i + 1 if i < nx - 1 else 0
            else:
                im = i - 1 if i > 0 else 1
                ip = i + 1 if i < nx - 1 else nx - 2
            for j in range(ny):
                if periodic:
                    jm = j - 1 if j > 0 else ny - 1
                    jp = j + 1 if j < ny - 1 else 0
                else:
                    jm = j - 1 if j > 0 else 1
                    jp = j + 1 if j < ny - 1 else ny - 2
                c = a[i, j]
                v = (
                    c
                    + rx * (a[im, j] - 2.0 * c + a[ip, j])
                    + ry * (a[i, jm] - 2.0 * c + a[i, jp])
                    - k2 * (c * c * c - c)
                    + g
                )
                b[i, j] = v
                av = abs(v)
                if av > peak:
                    peak = av
        a, b = b, a
        if peak > max_abs:
            max_abs = peak
        if peak > bound:
            return a, s + 1, max_abs
    return a, n_steps, max_abs


# --------------------------------------------------------------------------
# level set: curvature by the median of values on a circle


@njit(cache=True, inline="always")
def _fold(x, n, periodic):
    # map a fractional index into [0, n-1] (mirror) or [0, n) (wrap)
    if periodic:
        x = x % n
        return x
    period = 2.0 * (n - 1)
    x = x % period
    if x > n - 1:
        x = period - x
    return x


@njit(cache=True, inline="always")
def _bilinear(w, fx, fy, periodic):
    nx, ny = w.shape
    i0 = int(math.floor(fx))
    j0 = int(math.floor(fy))
    if periodic:
        a = fx - i0
        bb = fy - j0
        i0 = i0 % nx
        j0 = j0 % ny
        i1 = (i0 + 1) % nx
        j1 = (j0 + 1) % ny
    else:
        if i0 > nx - 2:
            i0 = nx - 2
        if j0 > ny - 2:
            j0 = ny - 2
        a = fx - i0
        bb = fy - j0
        i1 = i0 + 1
        j1 = j0 + 1
    # difference form: reproduces constants exactly in floating point
    w00 = w[i0, j0]
    dx_ = w[i1, j0] - w00
    dy_ = w[i0, j1] - w00
    return w00 + a * dx_ + bb * dy_ + a * bb * (w[i1, j1] - w[i1, j0] - dy_)


@njit(cache=True)
def _split_offsets(o):
    # integer and fractional parts of the offsets; these are the same at every node
    m = o.shape[0]
    d = np.empty(m, dtype=np.int64)
    f = np.empty(m)
    for k in range(m):
        d[k] = int(math.floor(o[k]))
        f[k] = o[k] - d[k]
    return d, f


@njit(cache=True)
def _interior(d, n):
    # nodes whose whole stencil lies on unclamped, unfolded cells
    lo = 0
    hi = n - 2
    for k in range(d.shape[0]):
        lo = max(lo, -d[k])
        hi = min(hi, n - 2 - d[k])
    return lo, hi


@njit(cache=True, inline="always")
def _bilinear_at(w, i0, j0, a, bb):
    w00 = w[i0, j0]
    dx_ = w[i0 + 1, j0] - w00
    dy_ = w[i0, j0 + 1] - w00
    return w00 + a * dx_ + bb * dy_ + a * bb * (w[i0 + 1, j0 + 1] - w[i0 + 1, j0] - dy_)


@njit(cache=True)
def median_curvature_2d(w, ox, oy, periodic):
    """One curvature step: ``w(x) <- median_k w(x + r e_k)``.

    ``ox``, ``oy`` are the circle offsets in grid units (an even number of
    points, symmetric about the origin). Off-grid values are bilinear. Every
    stencil value is a nonnegative combination of grid values and the median
    is nondecreasing in each argument, so the step is monotone.
    """
    nx, ny = w.shape
    m = ox.shape[0]
    out = np.empty_like(w)
    buf = np.empty(m)
    half = m // 2
    di, fa = _split_offsets(ox)
    dj, fb = _split_offsets(oy)
    ilo, ihi = _interior(di, nx)
    jlo, jhi = _interior(dj, ny)
    for i in range(nx):
        for j in range(ny):
            inside = ilo <= i <= ihi and jlo <= j <= jhi
            for k in range(m):
                if inside:
                    v = _bilinear_at(w, i + di[k], j + dj[k], fa[k], fb[k])
                else:
                    v = _bilinear(w, _fold(i + ox[k], nx, periodic), _fold(j + oy[k], ny, periodic), periodic)
                # insertion into the sorted prefix
                p = k
                while p > 0 and buf[p - 1] > v:
                    buf[p] = buf[p - 1]
                    p -= 1
                buf[p] = v
            out[i, j] = 0.5 * (buf[half - 1] + buf[half])
    return out


# --------------------------------------------------------------------------
# level set: transport w <- w + s |Dw| (Godunov)


@njit(cache=True)
def godunov_transport_1d(w, s, dx, periodic):
    n = w.shape[0]
    out = np.empty_like(w)
    for i in range(n):
        if periodic:
            im = i - 1 if i > 0 else n - 1
            ip = i + 1 if i < n - 1 else 0
        else:
            im = i - 1 if i > 0 else 1
            ip = i + 1 if i < n - 1 else n - 2
        dm = (w[i] - w[im]) / dx
        dp = (w[ip] - w[i]) / dx
        if s > 0:
            g = min(dm, 0.0) ** 2 + max(dp, 0.0) ** 2
        else:
            g = max(dm, 0.0) ** 2 + min(dp, 0.0) ** 2
        out[i] = w[i] + s * math.sqrt(g)
    return out


@njit(cache=True)
def godunov_transport_2d(w, s, dx, dy, periodic):
    nx, ny = w.shape
    out = np.empty_like(w)
    for i in range(nx):
        if periodic:
            im = i - 1 if i > 0 else nx - 1
            ip = i + 1 if i < nx - 1 else 0
        else:
            im = i - 1 if i > 0 else 1
            ip = i + 1 if i < nx - 1 else nx - 2
        for j in range(ny):
            if periodic:
                jm = j - 1 if j > 0 else ny - 1
                jp = j + 1 if j < ny - 1 else 0
            else:
                jm = j - 1 if j > 0 else 1
                jp = j + 1 if j < ny - 1 else ny - 2
            c = w[i, j]
            dxm = (c - w[im, j]) / dx
            dxp = (w[ip, j] - c) / dx
            dym = (c - w[i, jm]) / dy
            dyp = (w[i, jp] - c) / dy
            if s > 0:
                g = min(dxm, 0.0) ** 2 + max(dxp, 0.0) ** 2 + min(dym, 0.0) ** 2 + max(dyp, 0.0) ** 2
            else:
                g = max(dxm, 0.0) ** 2 + min(dxp, 0.0) ** 2 + max(dym, 0.0) ** 2 + min(dyp, 0.0) ** 2
            out[i, j] = c + s * math.sqrt(g)
    return out


# --------------------------------------------------------------------------
# level set: transport by the Hopf-Lax formula (dilation / erosion by a disk)


@njit(cache=True)
def hopf_lax_1d(w, r, sign, periodic):
    """``max`` (``sign > 0``) or ``min`` of ``w`` over ``[x - r, x + r]``, ``r`` in cells.

    The extremum over the interval is taken over its centre and both ends
    (linear interpolation), which is exact for monotone data.
    """
    n = w.shape[0]
    out = np.empty_like(w)
    for i in range(n):
        best = w[i]
        for d in (-r, r):
            x = _fold(i + d, n, periodic)
            i0 = int(math.floor(x))
            if periodic:
                a = x - i0
                i0 = i0 % n
                i1 = (i0 + 1) % n
            else:
                if i0 > n - 2:
                    i0 = n - 2
                a = x - i0
                i1 = i0 + 1
            v = w[i0] + a * (w[i1] - w[i0])
            if (sign > 0 and v > best) or (sign < 0 and v < best):
                best = v
        out[i] = best
    return out


@njit(cache=True)
def hopf_lax_2d(w, ox, oy, sign, periodic):
    """``max`` (``sign > 0``) or ``min`` of ``w`` over the centre and a circle of offsets.

    Monotone and commuting with constants, like the median step.
    """
    nx, ny = w.shape
    m = ox.shape[0]
    out = np.empty_like(w)
    di, fa = _split_offsets(ox)
    dj, fb = _split_offsets(oy)
    ilo, ihi = _interior(di, nx)
    jlo, jhi = _interior(dj, ny)
    for i in range(nx):
        for j in range(ny):
            best = w[i, j]
            inside = ilo <= i <= ihi and jlo <= j <= jhi
            for k in range(m):
                if inside:
                    v = _bilinear_at(w, i + di[k], j + dj[k], fa[k], fb[k])
                else:
                    v = _bilinear(w, _fold(i + ox[k], nx, periodic), _fold(j + oy[k], ny, periodic), periodic)
                if (sign > 0 and v > best) or (sign < 0 and v < best):
                    best = v
            out[i, j] = best
    return out


# --------------------------------------------------------------------------
# marching squares


@njit(cache=True, inline="always")
def _edge_point(e, i, j, v0, v1, v2, v3, x0, y0, dx, dy):
    # corners: 0=(i,j) 1=(i+1,j) 2=(i+1,j+1) 3=(i,j+1)
    if e == 0:
        t = v0 / (v0 - v1)
        return x0 + (i + t) * dx, y0 + j * dy
    if e == 1:
        t = v1 / (v1 - v2)
        return x0 + (i + 1) * dx, y0 + (j + t) * dy
    if e == 2:
        t = v3 / (v3 - v2)
        return x0 + (i + t) * dx, y0 + (j + 1) * dy
    t = v0 / (v0 - v3)
    return x0 + i * dx, y0 + (j + t) * dy


@njit(cache=True)
def marching_squares(w, x0, y0, dx, dy, periodic):
    """Zero-level segments, shape ``(m, 2, 2)``; ``w > 0`` counts as inside.

    Saddle cells are split according to the sign of the cell average.
    Zero-length segments are dropped.
    """
    nx, ny = w.shape
    cx = nx if periodic else nx - 1
    cy = ny if periodic else ny - 1
    segs = np.empty((2 * cx * cy if cx * cy < 4096 else 4096, 2, 2))
    m = 0
    pair = np.empty((2, 2), dtype=np.int64)
    for i in range(cx):
        i1 = (i + 1) % nx
        for j in range(cy):
            j1 = (j + 1) % ny
            v0 = w[i, j]
            v1 = w[i1, j]
            v2 = w[i1, j1]
            v3 = w[i, j1]
            idx = (v0 > 0) * 1 + (v1 > 0) * 2 + (v2 > 0) * 4 + (v3 > 0) * 8
            if idx == 0 or idx == 15:
                continue
            npair = 1
            if idx == 5 or idx == 10:
                centre_in = (v0 + v1 + v2 + v3) > 0
                npair = 2
                if (idx == 5) == centre_in:
                    pair[0, 0], pair[0, 1], pair[1, 0], pair[1, 1] = 0, 1, 2, 3
                else:
                    pair[0, 0], pair[0, 1], pair[1, 0], pair[1, 1] = 3, 0, 1, 2
            else:
                c = 0
                s0 = v0 > 0
                s1 = v1 > 0
                s2 = v2 > 0
                s3 = v3 > 0
                if s0 != s1:
                    pair[0, c] = 0
                    c += 1
                if s1 != s2:
                    pair[0, c] = 1
                    c += 1
                if s2 != s3:
                    pair[0, c] = 2
                    c += 1
                if s3 != s0:
                    pair[0, c] = 3
                    c += 1
            for p in range(npair):
                ax, ay = _edge_point(pair[p, 0], i, j, v0, v1, v2, v3, x0, y0, dx, dy)
                bx, by = _edge_point(pair[p, 1], i, j, v0, v1, v2, v3, x0, y0, dx, dy)
                if ax == bx and ay == by:
                    continue
                if m == segs.shape[0]:
                    grown = np.empty((2 * m, 2, 2))
                    grown[:m] = segs[:m]
                    segs = grown
                segs[m, 0, 0] = ax
                segs[m, 0, 1] = ay
                segs[m, 1, 0] = bx
                segs[m, 1, 1] = by
                m += 1
    return segs[:m].copy()
