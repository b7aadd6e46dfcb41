# cython: language_level=3
"""Compiled twins of the kernels in ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, floor, NAN

cnp.import_array()


cdef inline void _cubic(double th, double u, double* f, double* fu, double* fuu) noexcept nogil:
    f[0] = u * (1.0 - u) * (u - th)
    fu[0] = -3.0 * u * u + 2.0 * (1.0 + th) * u - th
    fuu[0] = -6.0 * u + 2.0 * (1.0 + th)


cdef inline void _hermite(double s, double H, double y0, double m0, double y1, double m1,
                          double* p, double* dp, double* ddp) noexcept nogil:
    cdef double s2 = s * s
    cdef double s3 = s2 * s
    p[0] = (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * H * m0 + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * H * m1
    dp[0] = ((6 * s2 - 6 * s) * y0 + (3 * s2 - 4 * s + 1) * H * m0 + (-6 * s2 + 6 * s) * y1 + (3 * s2 - 2 * s) * H * m1) / H
    ddp[0] = ((12 * s - 6) * y0 + (6 * s - 4) * H * m0 + (-12 * s + 6) * y1 + (6 * s - 2) * H * m1) / (H * H)


cdef inline void _reaction(double th, double u, double u0, double w,
                           double* f, double* fu, double* fuu) noexcept nogil:
    cdef double ya, ma, da
    if u <= -u0 - w:
        f[0] = -th * u
        fu[0] = -th
        fuu[0] = 0.0
    elif u < -u0:
        _cubic(th, -u0, &ya, &ma, &da)
        _hermite((u + u0 + w) / w, w, th * (u0 + w), -th, ya, ma, f, fu, fuu)
    elif u <= 1.0 + u0:
        _cubic(th, u, f, fu, fuu)
    elif u < 1.0 + u0 + w:
        _cubic(th, 1.0 + u0, &ya, &ma, &da)
        _hermite((u - 1.0 - u0) / w, w, ya, ma, (th - 1.0) * (u0 + w), th - 1.0, f, fu, fuu)
    else:
        f[0] = (th - 1.0) * (u - 1.0)
        fu[0] = th - 1.0
        fuu[0] = 0.0


def _flat(a, shape):
    return np.ascontiguousarray(np.broadcast_to(np.asarray(a, dtype=np.float64), shape)).ravel()


def cubic_reaction(theta, u, double u0, double width):
    shape = np.broadcast_shapes(np.shape(theta), np.shape(u))
    cdef const double[::1] th = _flat(theta, shape)
    cdef const double[::1] uu = _flat(u, shape)
    cdef Py_ssize_t n = uu.shape[0], i
    f_arr = np.empty(n)
    fu_arr = np.empty(n)
    cdef double[::1] f = f_arr
    cdef double[::1] fu = fu_arr
    cdef double dummy
    with nogil:
        for i in range(n):
            _reaction(th[i], uu[i], u0, width, &f[i], &fu[i], &dummy)
    return f_arr.reshape(shape), fu_arr.reshape(shape)


def cubic_reaction_fuu(theta, u, double u0, double width):
    shape = np.broadcast_shapes(np.shape(theta), np.shape(u))
    cdef const double[::1] th = _flat(theta, shape)
    cdef const double[::1] uu = _flat(u, shape)
    cdef Py_ssize_t n = uu.shape[0], i
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef double a, b
    with nogil:
        for i in range(n):
            _reaction(th[i], uu[i], u0, width, &a, &b, &out[i])
    return out_arr.reshape(shape)


def tridiag_factor(sub, diag, sup):
    cdef const double complex[:, ::1] s = np.ascontiguousarray(sub, dtype=np.complex128)
    cdef const double complex[:, ::1] d = np.ascontiguousarray(diag, dtype=np.complex128)
    cdef const double complex[:, ::1] p = np.ascontiguousarray(sup, dtype=np.complex128)
    cdef Py_ssize_t n = d.shape[0], m = d.shape[1], i, j
    mult_arr = np.zeros((n, m), dtype=np.complex128)
    piv_arr = np.empty((n, m), dtype=np.complex128)
    cdef double complex[:, ::1] mult = mult_arr
    cdef double complex[:, ::1] piv = piv_arr
    with nogil:
        for j in range(m):
            piv[0, j] = d[0, j]
        for i in range(1, n):
            for j in range(m):
                mult[i, j] = s[i, j] / piv[i - 1, j]
                piv[i, j] = d[i, j] - mult[i, j] * p[i - 1, j]
    return mult_arr, piv_arr


def tridiag_solve(mult, piv, sup, rhs):
    cdef const double complex[:, ::1] ml = np.ascontiguousarray(mult, dtype=np.complex128)
    cdef const double complex[:, ::1] pv = np.ascontiguousarray(piv, dtype=np.complex128)
    cdef const double complex[:, ::1] p = np.ascontiguousarray(sup, dtype=np.complex128)
    x_arr = np.array(rhs, dtype=np.complex128, order="C", copy=True)
    cdef double complex[:, ::1] x = x_arr
    cdef Py_ssize_t n = x.shape[0], m = x.shape[1], i, j
    with nogil:
        for i in range(1, n):
            for j in range(m):
                x[i, j] = x[i, j] - ml[i, j] * x[i - 1, j]
        for j in range(m):
            x[n - 1, j] = x[n - 1, j] / pv[n - 1, j]
        for i in range(n - 2, -1, -1):
            for j in range(m):
                x[i, j] = (x[i, j] - p[i, j] * x[i + 1, j]) / pv[i, j]
    return x_arr


def ray_crossings(u, origin, double h, angles, double dr, Py_ssize_t nr, levels):
    cdef const double[:, ::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef const double[::1] ang = np.ascontiguousarray(angles, dtype=np.float64).ravel()
    cdef const double[::1] lev = np.ascontiguousarray(levels, dtype=np.float64).ravel()
    cdef double ox = origin[0], oy = origin[1]
    cdef Py_ssize_t K = ang.shape[0], NL = lev.shape[0]
    cdef Py_ssize_t n0 = uu.shape[0], n1 = uu.shape[1]
    out_arr = np.full((K, NL), np.nan)
    cdef double[:, ::1] out = out_arr
    vals_arr = np.empty(nr)
    cdef double[::1] vals = vals_arr
    cdef Py_ssize_t k, q, li, i0, j0
    cdef double ca, sa, px, py, sx, sy, r, a, b, L
    with nogil:
        for k in range(K):
            ca = cos(ang[k])
            sa = sin(ang[k])
            for q in range(nr):
                r = q * dr
                px = (r * ca - ox) / h
                py = (r * sa - oy) / h
                if px < 0 or py < 0 or px > n0 - 1 or py > n1 - 1:
                    vals[q] = NAN
                    continue
                i0 = <Py_ssize_t> floor(px)
                j0 = <Py_ssize_t> floor(py)
                if i0 > n0 - 2:
                    i0 = n0 - 2
                if j0 > n1 - 2:
                    j0 = n1 - 2
                sx = px - i0
                sy = py - j0
                vals[q] = ((1 - sx) * (1 - sy) * uu[i0, j0] + sx * (1 - sy) * uu[i0 + 1, j0]
                           + (1 - sx) * sy * uu[i0, j0 + 1] + sx * sy * uu[i0 + 1, j0 + 1])
            for li in range(NL):
                L = lev[li]
                for q in range(nr - 2, -1, -1):
                    a = vals[q]
                    b = vals[q + 1]
                    # NaN compares false, so samples outside the box never match
                    if a >= L and b < L:
                        out[k, li] = (q + (a - L) / (a - b)) * dr
                        break
    return out_arr
