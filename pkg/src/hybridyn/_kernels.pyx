# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled kernels for matrix fields stored entry-major as ``(d, d, n_x, n_p)``.

Mirrors ``_kernels_py`` function for function. Loops run in a fixed order and
single-threaded, so results are reproducible bit for bit.
"""

import numpy as np
from libc.math cimport sqrt

ctypedef double complex cplx

DEF MAXD = 4


cdef _as_real(a):
    return np.ascontiguousarray(a, dtype=np.complex128).view(np.float64)


def diff_zero(f, double h, int axis):
    cdef cplx[:, :, :, ::1] src = np.ascontiguousarray(f, dtype=np.complex128)
    cdef Py_ssize_t d0 = src.shape[0], d1 = src.shape[1]
    cdef Py_ssize_t nx = src.shape[2], npp = src.shape[3]
    out_arr = np.empty((d0, d1, nx, npp), dtype=np.complex128)
    cdef cplx[:, :, :, ::1] out = out_arr
    cdef double inv = 1.0 / (2.0 * h)
    cdef Py_ssize_t a, b, i, j
    for a in range(d0):
        for b in range(d1):
            if axis == 0:
                for j in range(npp):
                    out[a, b, 0, j] = src[a, b, 1, j] * inv
                    out[a, b, nx - 1, j] = -src[a, b, nx - 2, j] * inv
                for i in range(1, nx - 1):
                    for j in range(npp):
                        out[a, b, i, j] = (src[a, b, i + 1, j] - src[a, b, i - 1, j]) * inv
            else:
                for i in range(nx):
                    out[a, b, i, 0] = src[a, b, i, 1] * inv
                    out[a, b, i, npp - 1] = -src[a, b, i, npp - 2] * inv
                    for j in range(1, npp - 1):
                        out[a, b, i, j] = (src[a, b, i, j + 1] - src[a, b, i, j - 1]) * inv
    return out_arr


cdef inline void _cmul(double ar, double ai, double br, double bi, double* r, double* i) noexcept nogil:
    r[0] = ar * br - ai * bi
    i[0] = ar * bi + ai * br


cdef inline void _entry2(const double* h, const double* X, const double* P, const double* r,
                         const double* dx, const double* dp, Py_ssize_t s, Py_ssize_t q,
                         int a, int b, double c, double* outr, double* outi) noexcept nogil:
    # d = 2, flat interleaved storage: entry (a, k) of cell q sits at ((2a + k) s + q) * 2
    cdef int k
    cdef Py_ssize_t ak, kb
    cdef double cr = 0, ci = 0, txr = 0, txi = 0, tpr = 0, tpi = 0
    cdef double tr, ti, ur, ui, mr, mi
    for k in range(2):
        ak = ((a * 2 + k) * s + q) * 2
        kb = ((k * 2 + b) * s + q) * 2
        _cmul(h[ak], h[ak + 1], r[kb], r[kb + 1], &tr, &ti)
        _cmul(r[ak], r[ak + 1], h[kb], h[kb + 1], &ur, &ui)
        cr = cr + (tr - ur)
        ci = ci + (ti - ui)
        mr = dp[kb] + c * dx[kb + 1]
        mi = dp[kb + 1] - c * dx[kb]
        _cmul(X[ak], X[ak + 1], mr, mi, &tr, &ti)
        mr = dp[ak] - c * dx[ak + 1]
        mi = dp[ak + 1] + c * dx[ak]
        _cmul(mr, mi, X[kb], X[kb + 1], &ur, &ui)
        txr = txr + (tr + ur)
        txi = txi + (ti + ui)
        mr = dx[kb] - c * dp[kb + 1]
        mi = dx[kb + 1] + c * dp[kb]
        _cmul(P[ak], P[ak + 1], mr, mi, &tr, &ti)
        mr = dx[ak] + c * dp[ak + 1]
        mi = dx[ak + 1] - c * dp[ak]
        _cmul(mr, mi, P[kb], P[kb + 1], &ur, &ui)
        tpr = tpr + (tr + ur)
        tpi = tpi + (ti + ui)
    outr[0] = ci + 0.5 * txr - 0.5 * tpr
    outi[0] = -cr + 0.5 * txi - 0.5 * tpi


cdef _flat(a):
    return np.ascontiguousarray(a, dtype=np.complex128).view(np.float64).reshape(-1)


cdef _assemble2(H, Hx, Hp, rho, rx, rp, double c):
    cdef double[::1] h = _flat(H)
    cdef double[::1] X = _flat(Hx)
    cdef double[::1] P = _flat(Hp)
    cdef double[::1] r = _flat(rho)
    cdef double[::1] dx = _flat(rx)
    cdef double[::1] dp = _flat(rp)
    out_arr = np.empty(rho.shape, dtype=np.complex128)
    cdef double[::1] o = out_arr.view(np.float64).reshape(-1)
    cdef Py_ssize_t s = rho.shape[2] * rho.shape[3], q
    cdef double* po = &o[0]
    cdef double re, im
    with nogil:
        for q in range(s):
            _entry2(&h[0], &X[0], &P[0], &r[0], &dx[0], &dp[0], s, q, 0, 0, c,
                    &po[2 * q], &po[2 * q + 1])
            _entry2(&h[0], &X[0], &P[0], &r[0], &dx[0], &dp[0], s, q, 0, 1, c, &re, &im)
            po[2 * (s + q)] = re
            po[2 * (s + q) + 1] = im
            # the (1, 0) entry evaluates to exactly this conjugate, so skip the work
            po[2 * (2 * s + q)] = re
            po[2 * (2 * s + q) + 1] = -im
            _entry2(&h[0], &X[0], &P[0], &r[0], &dx[0], &dp[0], s, q, 1, 1, c,
                    &po[2 * (3 * s + q)], &po[2 * (3 * s + q) + 1])
    return out_arr


def assemble(H, Hx, Hp, rho, rx, rp, bint corrected):
    if rho.shape[0] == 2:
        return _assemble2(H, Hx, Hp, rho, rx, rp, 1.0 if corrected else 0.0)
    cdef double[:, :, :, ::1] h = _as_real(H)
    cdef double[:, :, :, ::1] hx = _as_real(Hx)
    cdef double[:, :, :, ::1] hp = _as_real(Hp)
    cdef double[:, :, :, ::1] r = _as_real(rho)
    cdef double[:, :, :, ::1] dx = _as_real(rx)
    cdef double[:, :, :, ::1] dp = _as_real(rp)
    cdef Py_ssize_t d = r.shape[0], nx = r.shape[2], n2 = r.shape[3]
    if d > MAXD:
        raise ValueError("compiled kernel supports d <= 4")
    out_arr = np.empty((d, d, nx, n2 // 2), dtype=np.complex128)
    cdef double[:, :, :, ::1] out = out_arr.view(np.float64)
    cdef double c = 1.0 if corrected else 0.0
    cdef Py_ssize_t i, j, a, b, k, jr, ji
    cdef double cr, ci, txr, txi, tpr, tpi
    cdef double ar, ai, br, bi, mr, mi_, tr, ti
    for i in range(nx):
        for a in range(d):
            for b in range(d):
                for j in range(n2 // 2):
                    jr = 2 * j
                    ji = jr + 1
                    cr = 0.0
                    ci = 0.0
                    txr = 0.0
                    txi = 0.0
                    tpr = 0.0
                    tpi = 0.0
                    for k in range(d):
                        # commutator H rho - rho H
                        ar = h[a, k, i, jr]; ai = h[a, k, i, ji]
                        br = r[k, b, i, jr]; bi = r[k, b, i, ji]
                        tr = ar * br - ai * bi
                        ti = ar * bi + ai * br
                        ar = r[a, k, i, jr]; ai = r[a, k, i, ji]
                        br = h[k, b, i, jr]; bi = h[k, b, i, ji]
                        cr = cr + (tr - (ar * br - ai * bi))
                        ci = ci + (ti - (ar * bi + ai * br))
                        # Hx M + Mt Hx with M = rp - c i rx, Mt = rp + c i rx
                        ar = hx[a, k, i, jr]; ai = hx[a, k, i, ji]
                        mr = dp[k, b, i, jr] + c * dx[k, b, i, ji]
                        mi_ = dp[k, b, i, ji] - c * dx[k, b, i, jr]
                        tr = ar * mr - ai * mi_
                        ti = ar * mi_ + ai * mr
                        mr = dp[a, k, i, jr] - c * dx[a, k, i, ji]
                        mi_ = dp[a, k, i, ji] + c * dx[a, k, i, jr]
                        br = hx[k, b, i, jr]; bi = hx[k, b, i, ji]
                        txr = txr + (tr + (mr * br - mi_ * bi))
                        txi = txi + (ti + (mr * bi + mi_ * br))
                        # Hp N + Nt Hp with N = rx + c i rp, Nt = rx - c i rp
                        ar = hp[a, k, i, jr]; ai = hp[a, k, i, ji]
                        mr = dx[k, b, i, jr] - c * dp[k, b, i, ji]
                        mi_ = dx[k, b, i, ji] + c * dp[k, b, i, jr]
                        tr = ar * mr - ai * mi_
                        ti = ar * mi_ + ai * mr
                        mr = dx[a, k, i, jr] + c * dp[a, k, i, ji]
                        mi_ = dx[a, k, i, ji] - c * dp[a, k, i, jr]
                        br = hp[k, b, i, jr]; bi = hp[k, b, i, ji]
                        tpr = tpr + (tr + (mr * br - mi_ * bi))
                        tpi = tpi + (ti + (mr * bi + mi_ * br))
                    # -i * comm + tx / 2 - tp / 2
                    out[a, b, i, jr] = ci + 0.5 * txr - 0.5 * tpr
                    out[a, b, i, ji] = -cr + 0.5 * txi - 0.5 * tpi
    return out_arr


def min_eig(rho):
    cdef cplx[:, :, :, ::1] r = np.ascontiguousarray(rho, dtype=np.complex128)
    cdef Py_ssize_t d = r.shape[0], nx = r.shape[2], npp = r.shape[3]
    if d != 2:
        raise ValueError("compiled min_eig handles d == 2 only")
    out_arr = np.empty((nx, npp), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double a, cc, br, bi, half
    cdef Py_ssize_t i, j
    for i in range(nx):
        for j in range(npp):
            a = r[0, 0, i, j].real
            cc = r[1, 1, i, j].real
            br = r[0, 1, i, j].real
            bi = r[0, 1, i, j].imag
            half = 0.5 * (a - cc)
            out[i, j] = 0.5 * (a + cc) - sqrt(half * half + (br * br + bi * bi))
    return out_arr
