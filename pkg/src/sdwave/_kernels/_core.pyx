# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the fallback kernels.

Same contracts as ``_fallback``: flat float64 interior arrays, zero Dirichlet
ghosts, identical stopping rules for the iterative solver.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

BACKEND = "cython"


def laplacian_1d(double[::1] u, double h):
    cdef Py_ssize_t m = u.shape[0]
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double inv = 1.0 / (h * h)
    cdef Py_ssize_t i
    cdef double left, right
    for i in range(m):
        left = u[i - 1] if i > 0 else 0.0
        right = u[i + 1] if i < m - 1 else 0.0
        out[i] = (left - 2.0 * u[i] + right) * inv
    return out_arr


cdef void _lap2(double[::1] u, Py_ssize_t nxi, Py_ssize_t nyi,
                double ix, double iy, double[::1] out) noexcept:
    cdef Py_ssize_t i, j, k
    cdef double c = -2.0 * (ix + iy)
    cdef double s
    for j in range(nyi):
        for i in range(nxi):
            k = j * nxi + i
            s = c * u[k]
            if i > 0:
                s += ix * u[k - 1]
            if i < nxi - 1:
                s += ix * u[k + 1]
            if j > 0:
                s += iy * u[k - nxi]
            if j < nyi - 1:
                s += iy * u[k + nxi]
            out[k] = s


def laplacian_2d(double[::1] u, Py_ssize_t nxi, Py_ssize_t nyi,
                 double hx, double hy):
    out_arr = np.empty(nxi * nyi, dtype=np.float64)
    cdef double[::1] out = out_arr
    _lap2(u, nxi, nyi, 1.0 / (hx * hx), 1.0 / (hy * hy), out)
    return out_arr


def grad_inner_1d(double[::1] u, double[::1] v, double h):
    cdef Py_ssize_t m = u.shape[0]
    cdef double s = 0.0
    cdef double up = 0.0, vp = 0.0
    cdef Py_ssize_t i
    for i in range(m):
        s += (u[i] - up) * (v[i] - vp)
        up = u[i]
        vp = v[i]
    # closing edge against the right boundary ghost
    s += up * vp
    return s / h


def grad_inner_2d(double[::1] u, double[::1] v, Py_ssize_t nxi, Py_ssize_t nyi,
                  double hx, double hy):
    cdef double sx = 0.0, sy = 0.0
    cdef Py_ssize_t i, j, k
    cdef double up, vp, uc, vc
    for j in range(nyi):
        up = 0.0
        vp = 0.0
        for i in range(nxi):
            k = j * nxi + i
            uc = u[k]
            vc = v[k]
            sx += (uc - up) * (vc - vp)
            up = uc
            vp = vc
        sx += up * vp
    for i in range(nxi):
        up = 0.0
        vp = 0.0
        for j in range(nyi):
            k = j * nxi + i
            uc = u[k]
            vc = v[k]
            sy += (uc - up) * (vc - vp)
            up = uc
            vp = vc
        sy += up * vp
    return (hy / hx) * sx + (hx / hy) * sy


def solve_shifted_1d(double alpha, double beta, double h, double[::1] rhs):
    """Thomas elimination for the constant tridiagonal (alpha*I - beta*Lap)."""
    cdef Py_ssize_t m = rhs.shape[0]
    cdef double c = beta / (h * h)
    cdef double diag = alpha + 2.0 * c
    cdef double off = -c
    out_arr = np.empty(m, dtype=np.float64)
    cp_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] x = out_arr
    cdef double[::1] cp = cp_arr
    cdef Py_ssize_t i
    cdef double denom = diag
    cp[0] = off / denom
    x[0] = rhs[0] / denom
    for i in range(1, m):
        denom = diag - off * cp[i - 1]
        cp[i] = off / denom
        x[i] = (rhs[i] - off * x[i - 1]) / denom
    for i in range(m - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]
    return out_arr


def cg_shifted_2d(double alpha, double beta, Py_ssize_t nxi, Py_ssize_t nyi,
                  double hx, double hy, double[::1] rhs, double[::1] x0,
                  double rel_tol, max_iter):
    cdef Py_ssize_t m = rhs.shape[0]
    cdef double ix = 1.0 / (hx * hx)
    cdef double iy = 1.0 / (hy * hy)
    cdef Py_ssize_t i, k
    cdef double rhs_norm = 0.0
    for i in range(m):
        rhs_norm += rhs[i] * rhs[i]
    rhs_norm = sqrt(rhs_norm)
    x_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] x = x_arr
    if rhs_norm == 0.0:
        for i in range(m):
            x[i] = 0.0
        return x_arr, 0
    r_arr = np.empty(m, dtype=np.float64)
    p_arr = np.empty(m, dtype=np.float64)
    ap_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] r = r_arr
    cdef double[::1] p = p_arr
    cdef double[::1] ap = ap_arr
    cdef double rs = 0.0, rs_new, a, denom, target, bcoef
    cdef Py_ssize_t iters = int(max_iter)
    for i in range(m):
        x[i] = x0[i]
    _lap2(x, nxi, nyi, ix, iy, ap)
    for i in range(m):
        r[i] = rhs[i] - (alpha * x[i] - beta * ap[i])
        p[i] = r[i]
        rs += r[i] * r[i]
    target = rel_tol * rhs_norm
    for k in range(iters):
        if sqrt(rs) <= target:
            return x_arr, k
        _lap2(p, nxi, nyi, ix, iy, ap)
        denom = 0.0
        for i in range(m):
            ap[i] = alpha * p[i] - beta * ap[i]
            denom += p[i] * ap[i]
        if denom <= 0.0:
            raise RuntimeError("conjugate gradient breakdown: non-positive curvature")
        a = rs / denom
        rs_new = 0.0
        for i in range(m):
            x[i] += a * p[i]
            r[i] -= a * ap[i]
            rs_new += r[i] * r[i]
        bcoef = rs_new / rs
        for i in range(m):
            p[i] = r[i] + bcoef * p[i]
        rs = rs_new
    raise RuntimeError(f"conjugate gradient failed to converge in {max_iter} iterations")
