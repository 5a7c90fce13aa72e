"""Uniform Dirichlet grids on an interval or rectangle, and the discrete
inner products the rest of the package is built on.

Conventions
-----------
Fields store interior node values only, as flat float64 arrays; boundary
values are identically zero.  The discrete L2 product is the node sum scaled
by the cell volume.  The gradient product sums first differences over all
edges including the two boundary edges of each grid line, so that

    grad_inner(u, v) == inner_l2(-laplacian(u), v)

holds exactly (summation by parts).  Every energy identity downstream relies
on this being an identity of the discretization, not an approximation.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import _kernels as K
from .errors import ConfigurationError, NumericalError, OverflowEvent, UsageError


@dataclass(frozen=True)
class DiscreteDomain:
    """Uniform grid over (0, L1) or (0, L1) x (0, L2), Dirichlet boundary."""

    dimension: int
    lengths: tuple
    cells: tuple
    spacing: tuple
    interior_shape: tuple
    n_interior: int
    # flat coordinate arrays over interior nodes, x fastest
    coords: dict = field(compare=False, repr=False)

    @property
    def volume(self):
        out = 1.0
        for L in self.lengths:
            out *= L
        return out

    @property
    def cell_volume(self):
        out = 1.0
        for h in self.spacing:
            out *= h
        return out


def build_domain(dimension, lengths, cells):
    """Construct a DiscreteDomain.

    Parameters
    ----------
    dimension : 1 or 2
    lengths : float or sequence of floats, one per axis, all > 0
    cells : int or sequence of ints, cells per axis, all >= 2
    """
    if dimension not in (1, 2):
        raise ConfigurationError(f"dimension must be 1 or 2, got {dimension!r}")
    if np.isscalar(lengths):
        lengths = (float(lengths),) * dimension
    else:
        lengths = tuple(float(L) for L in lengths)
    if np.isscalar(cells):
        cells = (int(cells),) * dimension
    else:
        cells = tuple(int(n) for n in cells)
    if len(lengths) != dimension or len(cells) != dimension:
        raise ConfigurationError(
            f"expected {dimension} lengths and cell counts, got {lengths} / {cells}"
        )
    for L in lengths:
        if not (L > 0.0) or not math.isfinite(L):
            raise ConfigurationError(f"lengths must be positive finite, got {lengths}")
    for n in cells:
        if n < 2:
            raise ConfigurationError(f"need at least 2 cells per axis, got {cells}")
    spacing = tuple(L / n for L, n in zip(lengths, cells))
    interior_shape = tuple(n - 1 for n in cells)
    n_interior = 1
    for m in interior_shape:
        n_interior *= m

    axes = [
        np.linspace(h, L - h, n - 1)
        for L, n, h in zip(lengths, cells, spacing)
    ]
    if dimension == 1:
        coords = {"x": axes[0].copy()}
    else:
        X, Y = np.meshgrid(axes[0], axes[1], indexing="xy")
        coords = {"x": X.ravel(), "y": Y.ravel()}
    return DiscreteDomain(
        dimension=dimension,
        lengths=lengths,
        cells=cells,
        spacing=spacing,
        interior_shape=interior_shape,
        n_interior=n_interior,
        coords=coords,
    )


@dataclass(frozen=True)
class Field:
    """Interior node values of a scalar field on a DiscreteDomain."""

    domain: DiscreteDomain
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if v.shape[0] != self.domain.n_interior:
            raise UsageError(
                f"field has {v.shape[0]} values, domain has "
                f"{self.domain.n_interior} interior nodes"
            )
        if not np.all(np.isfinite(v)):
            raise OverflowEvent("field contains non-finite values")
        object.__setattr__(self, "values", v)

    def copy(self):
        return Field(self.domain, self.values.copy())


def zeros(domain):
    return Field(domain, np.zeros(domain.n_interior))


def _same_domain(u, v):
    if u.domain is not v.domain and u.domain != v.domain:
        raise UsageError("fields live on different domains")


# array-level forms; the integrator uses these directly on raw arrays

def lap_arr(domain, a):
    if domain.dimension == 1:
        return K.laplacian_1d(a, domain.spacing[0])
    (nxi, nyi) = (domain.interior_shape[0], domain.interior_shape[1])
    return K.laplacian_2d(a, nxi, nyi, domain.spacing[0], domain.spacing[1])


def l2_inner_arr(domain, a, b):
    return domain.cell_volume * float(np.dot(a, b))


def grad_inner_arr(domain, a, b):
    if domain.dimension == 1:
        return K.grad_inner_1d(a, b, domain.spacing[0])
    (nxi, nyi) = (domain.interior_shape[0], domain.interior_shape[1])
    return K.grad_inner_2d(a, b, nxi, nyi, domain.spacing[0], domain.spacing[1])


def full_inner_arr(domain, a, b):
    return l2_inner_arr(domain, a, b) + grad_inner_arr(domain, a, b)


def solve_shifted_arr(domain, alpha, beta, rhs, x0=None, rel_tol=1e-10):
    """Solve (alpha*I - beta*Lap_h) x = rhs; direct in 1D, CG in 2D."""
    if domain.dimension == 1:
        return K.solve_shifted_1d(alpha, beta, domain.spacing[0], rhs)
    (nxi, nyi) = (domain.interior_shape[0], domain.interior_shape[1])
    if x0 is None:
        x0 = np.zeros_like(rhs)
    max_iter = 20 * domain.n_interior + 100
    try:
        x, _ = K.cg_shifted_2d(
            alpha, beta, nxi, nyi, domain.spacing[0], domain.spacing[1],
            rhs, x0, rel_tol, max_iter,
        )
    except RuntimeError as exc:
        raise NumericalError(str(exc)) from exc
    return x


# field-level API

def laplacian(u: Field) -> Field:
    return Field(u.domain, lap_arr(u.domain, u.values))


def inner_l2(u: Field, v: Field) -> float:
    _same_domain(u, v)
    return l2_inner_arr(u.domain, u.values, v.values)


def norm_l2_sq(u: Field) -> float:
    return l2_inner_arr(u.domain, u.values, u.values)


def inner_grad(u: Field, v: Field) -> float:
    _same_domain(u, v)
    return grad_inner_arr(u.domain, u.values, v.values)


def norm_grad_sq(u: Field) -> float:
    return grad_inner_arr(u.domain, u.values, u.values)


def inner_full(u: Field, v: Field) -> float:
    _same_domain(u, v)
    return full_inner_arr(u.domain, u.values, v.values)


def norm_full_sq(u: Field) -> float:
    return norm_l2_sq(u) + norm_grad_sq(u)


def quad_sum(domain, node_values) -> float:
    """Cell-volume-weighted node sum, the quadrature behind every integral."""
    s = float(np.sum(node_values))
    if not math.isfinite(s):
        raise OverflowEvent("quadrature over non-finite values")
    return domain.cell_volume * s


def lambda1(domain) -> float:
    """First Dirichlet eigenvalue of -Lap on the continuous domain."""
    out = 0.0
    for L in domain.lengths:
        out += (math.pi / L) ** 2
    return out


def lambda1_discrete(domain, rel_tol=1e-10, max_iter=5000) -> float:
    """First eigenvalue of the discrete -Lap_h, by inverse power iteration."""
    rng = np.random.default_rng(12345)
    v = rng.standard_normal(domain.n_interior)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(int(max_iter)):
        # one inverse iteration: solve (0*I - (-1)*Lap_h) w = v, i.e. -Lap_h w = v
        w = solve_shifted_arr(domain, 0.0, 1.0, v, x0=v, rel_tol=1e-13)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            raise NumericalError("inverse iteration produced the zero vector")
        w /= nw
        lam_new = float(np.dot(w, -lap_arr(domain, w)))
        if abs(lam_new - lam) <= rel_tol * abs(lam_new):
            return lam_new
        lam = lam_new
        v = w
    raise NumericalError(f"eigenvalue iteration did not converge in {max_iter} steps")


@dataclass(frozen=True)
class EmbedConstant:
    """Constant S_r with ||v||_r <= S_r ||grad v||_2 on the domain."""

    r: float
    value: float
    certified: bool
    note: str


def embed_const(domain, r, seed=0) -> EmbedConstant:
    """Embedding constant of H^1_0 into L^r.

    On an interval the returned value is a proved upper bound.  On a
    rectangle it is a numerical estimate (maximized discrete Rayleigh
    quotient times a 1.25 safety factor) and is flagged accordingly.
    """
    if r != math.inf and r < 2.0:
        raise ConfigurationError(f"embedding constant requires r >= 2, got {r}")
    if domain.dimension == 1:
        L = domain.lengths[0]
        if r == math.inf:
            return EmbedConstant(r, math.sqrt(L) / 2.0, True,
                                 "sup bound sqrt(L)/2 from the fundamental theorem")
        if r == 2.0:
            return EmbedConstant(r, L / math.pi, True,
                                 "optimal constant 1/sqrt(lambda1) on an interval")
        value = L ** (1.0 / r + 0.5) / 2.0
        return EmbedConstant(r, value, True,
                             "interpolated sup bound L^(1/r+1/2)/2")
    if r == math.inf:
        raise ConfigurationError(
            "H^1_0 does not embed into L^inf on a rectangle; finite r only"
        )
    value = 1.25 * _rayleigh_max(domain, r, seed)
    return EmbedConstant(r, value, False,
                         "estimated: discrete Rayleigh ascent with 1.25 safety factor")


def _rayleigh_max(domain, r, seed):
    """Maximize ||v||_r / ||grad v||_2 over the discrete space.

    Fixed point iteration on the extremal condition -Lap v = c sign(v)|v|^(r-1):
    solve, renormalize, repeat.  For r = 2 this is exactly inverse power
    iteration for the first eigenvalue.
    """
    rng = np.random.default_rng(seed)
    hv = domain.cell_volume
    best = 0.0
    for _ in range(8):
        v = rng.standard_normal(domain.n_interior)
        v /= math.sqrt(grad_inner_arr(domain, v, v))
        ratio = (hv * np.sum(np.abs(v) ** r)) ** (1.0 / r)
        for _ in range(200):
            z = np.sign(v) * np.abs(v) ** (r - 1.0)
            w = solve_shifted_arr(domain, 0.0, 1.0, z, x0=v, rel_tol=1e-12)
            gn = grad_inner_arr(domain, w, w)
            if gn <= 0.0:
                break
            w = w / math.sqrt(gn)
            new_ratio = (hv * np.sum(np.abs(w) ** r)) ** (1.0 / r)
            v = w
            done = abs(new_ratio - ratio) <= 1e-11 * max(ratio, 1e-300)
            ratio = new_ratio
            if done:
                break
        best = max(best, ratio)
    return best
