"""Pure numpy implementations of the hot kernels.

Each function here has a compiled twin in ``_kernels_ext.pyx`` with the same
signature and semantics; ``pulsefront.kernels`` picks one at import time.
"""
from __future__ import annotations

import numpy as np


def _hermite(s, H, y0, m0, y1, m1):
    s2 = s * s
    s3 = s2 * s
    p = (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * H * m0 + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * H * m1
    dp = ((6 * s2 - 6 * s) * y0 + (3 * s2 - 4 * s + 1) * H * m0 + (-6 * s2 + 6 * s) * y1 + (3 * s2 - 2 * s) * H * m1) / H
    ddp = ((12 * s - 6) * y0 + (6 * s - 4) * H * m0 + (-12 * s + 6) * y1 + (6 * s - 2) * H * m1) / (H * H)
    return p, dp, ddp


def _cubic(theta, u):
    f = u * (1.0 - u) * (u - theta)
    fu = -3.0 * u * u + 2.0 * (1.0 + theta) * u - theta
    fuu = -6.0 * u + 2.0 * (1.0 + theta)
    return f, fu, fuu


def _reaction_all(theta, u, u0, width):
    theta, u = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(u, dtype=float))
    f, fu, fuu = _cubic(theta, u)
    lo_a, lo_b = -u0, -u0 - width
    hi_a, hi_b = 1.0 + u0, 1.0 + u0 + width

    m = u <= lo_b
    if m.any():
        f = np.where(m, -theta * u, f)
        fu = np.where(m, -theta, fu)
        fuu = np.where(m, 0.0, fuu)
    m = (u > lo_b) & (u < lo_a)
    if m.any():
        ya, ma, _ = _cubic(theta, lo_a)
        p, dp, ddp = _hermite((u - lo_b) / width, width, -theta * lo_b, -theta, ya, ma)
        f, fu, fuu = np.where(m, p, f), np.where(m, dp, fu), np.where(m, ddp, fuu)
    m = u >= hi_b
    if m.any():
        f = np.where(m, (theta - 1.0) * (u - 1.0), f)
        fu = np.where(m, theta - 1.0, fu)
        fuu = np.where(m, 0.0, fuu)
    m = (u > hi_a) & (u < hi_b)
    if m.any():
        ya, ma, _ = _cubic(theta, hi_a)
        p, dp, ddp = _hermite((u - hi_a) / width, width, ya, ma, (theta - 1.0) * (hi_b - 1.0), theta - 1.0)
        f, fu, fuu = np.where(m, p, f), np.where(m, dp, fu), np.where(m, ddp, fuu)
    if f.ndim == 0:
        return f[()], fu[()], fuu[()]
    return f, fu, fuu


def cubic_reaction(theta, u, u0, width):
    """Return ``(f, f_u)`` of the extended cubic, broadcasting theta against u."""
    f, fu, _ = _reaction_all(theta, u, u0, width)
    return f, fu


def cubic_reaction_fuu(theta, u, u0, width):
    return _reaction_all(theta, u, u0, width)[2]


def tridiag_factor(sub, diag, sup):
    """LU-factor a batch of tridiagonal systems without pivoting.

    Arrays have shape (n, m): row index first, one system per column.
    ``sub[i]`` multiplies x[i-1] in row i, ``sup[i]`` multiplies x[i+1].
    Returns ``(mult, piv)`` for :func:`tridiag_solve`.
    """
    sub = np.asarray(sub, dtype=complex)
    diag = np.asarray(diag, dtype=complex)
    sup = np.asarray(sup, dtype=complex)
    n = diag.shape[0]
    mult = np.zeros_like(diag)
    piv = np.empty_like(diag)
    piv[0] = diag[0]
    for i in range(1, n):
        mult[i] = sub[i] / piv[i - 1]
        piv[i] = diag[i] - mult[i] * sup[i - 1]
    return mult, piv


def tridiag_solve(mult, piv, sup, rhs):
    """Solve the factored batch for ``rhs`` of shape (n, m); returns a new array."""
    x = np.array(rhs, dtype=complex)
    n = x.shape[0]
    for i in range(1, n):
        x[i] -= mult[i] * x[i - 1]
    x[n - 1] /= piv[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = (x[i] - sup[i] * x[i + 1]) / piv[i]
    return x


def ray_crossings(u, origin, h, angles, dr, nr, levels):
    """Outermost crossings of each level along rays through a 2-D node field.

    ``u`` is indexed ``u[i, j]`` at ``(origin[0] + i*h, origin[1] + j*h)``.
    Rays start at (0, 0) and are sampled at ``r = k*dr`` for k < nr by
    bilinear interpolation. A crossing is the last k with
    ``u(r_k) >= level > u(r_{k+1})``; missing crossings are NaN.
    Returns an array of shape (len(angles), len(levels)).
    """
    u = np.asarray(u, dtype=float)
    angles = np.asarray(angles, dtype=float)
    levels = np.asarray(levels, dtype=float)
    r = np.arange(nr) * dr
    px = (r[None, :] * np.cos(angles)[:, None] - origin[0]) / h
    py = (r[None, :] * np.sin(angles)[:, None] - origin[1]) / h
    n0, n1 = u.shape
    inside = (px >= 0) & (px <= n0 - 1) & (py >= 0) & (py <= n1 - 1)
    i0 = np.clip(np.floor(px).astype(int), 0, n0 - 2)
    j0 = np.clip(np.floor(py).astype(int), 0, n1 - 2)
    sx = px - i0
    sy = py - j0
    vals = (
        (1 - sx) * (1 - sy) * u[i0, j0]
        + sx * (1 - sy) * u[i0 + 1, j0]
        + (1 - sx) * sy * u[i0, j0 + 1]
        + sx * sy * u[i0 + 1, j0 + 1]
    )
    vals = np.where(inside, vals, np.nan)
    out = np.full((angles.size, levels.size), np.nan)
    a, b = vals[:, :-1], vals[:, 1:]
    for li, lev in enumerate(levels):
        hit = (a >= lev) & (b < lev)
        any_hit = hit.any(axis=1)
        last = hit.shape[1] - 1 - np.argmax(hit[:, ::-1], axis=1)
        rows = np.nonzero(any_hit)[0]
        k = last[rows]
        ua, ub = a[rows, k], b[rows, k]
        out[rows, li] = (k + (ua - lev) / (ua - ub)) * dr
    return out
