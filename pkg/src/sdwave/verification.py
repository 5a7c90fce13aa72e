"""Refinement study against a manufactured solution.

The linear strongly damped wave equation is solved exactly by
u*(x, t) = e^{-t} prod_i sin(pi x_i / L_i): the decay rate -1 cancels the
damping regardless of the eigenvalue.  Any nonlinearity is balanced by the
compensating source g = -f(u*), so the same u* stays exact and the full
nonlinear update path is exercised.  Halving h and dt together should reduce
the final-time L2 error by 4 per level for a second order scheme.
"""

import math

import numpy as np

from .errors import ConfigurationError
from .integrator import State, step
from .mesh import Field, build_domain, l2_inner_arr


def manufactured_profile(domain) -> np.ndarray:
    """Spatial factor of the manufactured solution on the interior nodes."""
    phi = np.ones(domain.n_interior)
    names = ("x", "y")[: domain.dimension]
    for name, L in zip(names, domain.lengths):
        phi = phi * np.sin(math.pi * domain.coords[name] / L)
    return phi


def convergence_study(dimension, lengths, nl, levels=3, cells0=32,
                      dt0=2e-3, t_end=0.5):
    """Run the study and return ({"levels": [...], "orders": [...]}).

    Each level halves both the grid spacing and the time step; the error is
    the discrete L2 distance to u* at t_end.  dt0 must divide t_end.
    """
    if levels < 2:
        raise ConfigurationError(f"need at least 2 levels, got {levels}")
    n_steps = t_end / dt0
    if abs(n_steps - round(n_steps)) > 1e-9 * max(1.0, n_steps):
        raise ConfigurationError(
            f"dt0={dt0} must divide t_end={t_end} for a fixed-step study"
        )
    rows = []
    for k in range(levels):
        cells = [c * 2 ** k for c in (
            (cells0,) * dimension if np.isscalar(cells0) else cells0)]
        dt = dt0 / 2 ** k
        domain = build_domain(dimension, lengths, cells)
        phi = manufactured_profile(domain)

        def source(dom, t, _phi=phi):
            # cancels the nonlinearity along u*, keeping u* exact
            return -np.asarray(nl.f(math.exp(-t) * _phi), dtype=np.float64)

        state = State(u=Field(domain, phi), v=Field(domain, -phi), t=0.0)
        for _ in range(int(round(t_end / dt))):
            state = step(state, dt, nl, source=source)
        diff = state.u.values - math.exp(-t_end) * phi
        err = math.sqrt(l2_inner_arr(domain, diff, diff))
        rows.append({"cells": list(cells), "dt": dt, "error": err})
    orders = []
    for a, b in zip(rows[:-1], rows[1:]):
        if b["error"] == 0.0:
            orders.append(math.inf)
        else:
            orders.append(math.log2(a["error"] / b["error"]))
    return {"levels": rows, "orders": orders}
