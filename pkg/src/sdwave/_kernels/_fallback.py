"""NumPy/SciPy reference implementations of the hot kernels.

Every function here has a compiled twin in ``_core``; the two must agree to
rounding.  Fields are flat float64 arrays over interior nodes of a uniform
grid with homogeneous Dirichlet boundary (ghost values are identically zero).
"""

import numpy as np
from scipy.linalg import solve_banded

BACKEND = "python"


def laplacian_1d(u, h):
    out = np.empty_like(u)
    out[:] = -2.0 * u
    out[:-1] += u[1:]
    out[1:] += u[:-1]
    out /= h * h
    return out


def laplacian_2d(u, nxi, nyi, hx, hy):
    g = u.reshape(nyi, nxi)
    out = np.zeros_like(g)
    # x-direction second difference, zero ghosts outside the strip
    out[:, :] = -2.0 * (1.0 / (hx * hx) + 1.0 / (hy * hy)) * g
    out[:, :-1] += g[:, 1:] / (hx * hx)
    out[:, 1:] += g[:, :-1] / (hx * hx)
    out[:-1, :] += g[1:, :] / (hy * hy)
    out[1:, :] += g[:-1, :] / (hy * hy)
    return out.reshape(-1)


def grad_inner_1d(u, v, h):
    # sum over all n edges of the first differences, Dirichlet ghosts included
    du = np.diff(u, prepend=0.0, append=0.0)
    dv = np.diff(v, prepend=0.0, append=0.0)
    return float(np.dot(du, dv) / h)


def grad_inner_2d(u, v, nxi, nyi, hx, hy):
    gu = u.reshape(nyi, nxi)
    gv = v.reshape(nyi, nxi)
    dux = np.diff(gu, axis=1, prepend=0.0, append=0.0)
    dvx = np.diff(gv, axis=1, prepend=0.0, append=0.0)
    duy = np.diff(gu, axis=0, prepend=0.0, append=0.0)
    dvy = np.diff(gv, axis=0, prepend=0.0, append=0.0)
    sx = float(np.sum(dux * dvx))
    sy = float(np.sum(duy * dvy))
    return (hy / hx) * sx + (hx / hy) * sy


def solve_shifted_1d(alpha, beta, h, rhs):
    """Solve (alpha*I - beta*Lap_h) x = rhs on the interior of an interval."""
    m = rhs.shape[0]
    c = beta / (h * h)
    ab = np.zeros((3, m))
    ab[0, 1:] = -c
    ab[1, :] = alpha + 2.0 * c
    ab[2, :-1] = -c
    return solve_banded((1, 1), ab, rhs, overwrite_ab=True, check_finite=False)


def cg_shifted_2d(alpha, beta, nxi, nyi, hx, hy, rhs, x0, rel_tol, max_iter):
    """Conjugate gradients for (alpha*I - beta*Lap_h) x = rhs on a rectangle.

    Returns (x, iterations).  Raises RuntimeError when the iteration cap is
    reached; callers translate that into a package error.
    """

    def matvec(w):
        return alpha * w - beta * laplacian_2d(w, nxi, nyi, hx, hy)

    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        return np.zeros_like(rhs), 0
    x = x0.copy()
    r = rhs - matvec(x)
    p = r.copy()
    rs = float(np.dot(r, r))
    target = rel_tol * rhs_norm
    for k in range(int(max_iter)):
        if np.sqrt(rs) <= target:
            return x, k
        ap = matvec(p)
        denom = float(np.dot(p, ap))
        if denom <= 0.0:
            raise RuntimeError("conjugate gradient breakdown: non-positive curvature")
        a = rs / denom
        x += a * p
        r -= a * ap
        rs_new = float(np.dot(r, r))
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise RuntimeError(f"conjugate gradient failed to converge in {max_iter} iterations")
