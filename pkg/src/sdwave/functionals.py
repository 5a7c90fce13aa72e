"""Scalar functionals of the evolving field, the trace that records them,
and the concavity diagnostic behind the finite-time blow-up argument.

Norm conventions (inherited from mesh): unsubscripted ||.||^2 always means
the full product ||.||_2^2 + ||grad .||_2^2; the L2-only quantity is written
with an explicit l2 tag.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import mesh
from .errors import UsageError
from .mesh import Field
from .nonlinearity import Nonlinearity

# every column a trace row carries; csv output uses CSV_COLUMNS order
COLUMNS = (
    "t", "dt", "E", "I", "K", "M", "Q", "sup_abs_u", "energy_residual",
    "u_l2_sq", "u_full_sq", "v_l2_sq", "ip_uv_l2",
    "acc_unorm", "acc_cross", "acc_diss",
)

CSV_COLUMNS = ("t", "E", "I", "K", "M", "Q", "sup_abs_u", "dt", "energy_residual")


def potential_total(u: Field, nl: Nonlinearity) -> float:
    """Integral of the potential F(u) over the domain."""
    return mesh.quad_sum(u.domain, np.asarray(nl.F(u.values), dtype=np.float64))


def energy(u: Field, v: Field, nl: Nonlinearity) -> float:
    """E = 1/2 ||v||_2^2 + 1/2 ||grad u||_2^2 - integral F(u)."""
    return 0.5 * mesh.norm_l2_sq(v) + 0.5 * mesh.norm_grad_sq(u) - potential_total(u, nl)


def nehari(u: Field, nl: Nonlinearity) -> float:
    """I = ||grad u||_2^2 - integral f(u) u; I < 0 marks the unstable set."""
    fu = np.asarray(nl.f(u.values), dtype=np.float64)
    return mesh.norm_grad_sq(u) - mesh.quad_sum(u.domain, fu * u.values)


def k_functional(u: Field, v: Field) -> float:
    """K = ||u||^2 + 2 (u, v)_2, the quantity whose growth certifies escape."""
    return mesh.norm_full_sq(u) + 2.0 * mesh.inner_l2(u, v)


def m_functional(u: Field, v: Field) -> float:
    """M = ||v||_2^2 + ||grad u||_2^2, the quantity the lower bound controls."""
    return mesh.norm_l2_sq(v) + mesh.norm_grad_sq(u)


def q_functional(state) -> float:
    """Q = integral of ||u||^2 over elapsed time + ||u||_2^2; divergence of Q
    is what blow-up at finite time means here.  Accepts any object with
    ``u`` (Field) and ``acc_unorm`` attributes."""
    return state.acc_unorm + mesh.norm_l2_sq(state.u)


@dataclass
class Trace:
    """Row-per-accepted-step record of a run.

    Besides the reported functionals each row keeps the raw norms and the
    three time accumulators (full-norm integral of u, full-product integral
    of (u, u_t), dissipation integral) so later diagnostics can be formed
    without re-running.
    """

    nl_name: str
    p: float
    E0: float
    u0_l2_sq: float
    u0_full_sq: float
    dimension: int
    t_threshold_M: Optional[float] = None
    t_threshold_Q: Optional[float] = None
    _cols: dict = field(default_factory=lambda: {c: [] for c in COLUMNS}, repr=False)

    def append(self, **row):
        if set(row) != set(COLUMNS):
            missing = set(COLUMNS) - set(row)
            extra = set(row) - set(COLUMNS)
            raise UsageError(f"bad trace row: missing {missing}, extra {extra}")
        for k, v in row.items():
            self._cols[k].append(float(v))

    def __len__(self):
        return len(self._cols["t"])

    def column(self, name) -> np.ndarray:
        return np.asarray(self._cols[name], dtype=np.float64)

    def last(self, name) -> float:
        return self._cols[name][-1]

    def row(self, i) -> dict:
        return {k: self._cols[k][i] for k in COLUMNS}


def make_row(u: Field, v: Field, nl: Nonlinearity, t, dt, acc_unorm, acc_cross,
             acc_diss, E0) -> dict:
    """Assemble one full trace row from the current state."""
    u_l2 = mesh.norm_l2_sq(u)
    u_grad = mesh.norm_grad_sq(u)
    v_l2 = mesh.norm_l2_sq(v)
    ip = mesh.inner_l2(u, v)
    E = 0.5 * v_l2 + 0.5 * u_grad - potential_total(u, nl)
    I = nehari(u, nl)
    return {
        "t": t, "dt": dt,
        "E": E, "I": I,
        "K": u_l2 + u_grad + 2.0 * ip,
        "M": v_l2 + u_grad,
        "Q": acc_unorm + u_l2,
        "sup_abs_u": float(np.max(np.abs(u.values))) if u.values.size else 0.0,
        "energy_residual": E + acc_diss - E0,
        "u_l2_sq": u_l2, "u_full_sq": u_l2 + u_grad,
        "v_l2_sq": v_l2, "ip_uv_l2": ip,
        "acc_unorm": acc_unorm, "acc_cross": acc_cross, "acc_diss": acc_diss,
    }


def energy_residual(trace: Trace, index: int = -1) -> float:
    """Drift E(t) + dissipation integral - E(0) at one recorded row; zero for
    the exact flow, O(dt^2) for the discrete one."""
    if len(trace) == 0:
        raise UsageError("empty trace")
    return trace.column("energy_residual")[index]


@dataclass(frozen=True)
class ConcavityReport:
    """Pointwise defect of the concavity inequality along a recorded run.

    defect(t) = G(t) G''(t) - ((lam + 2)/4) G'(t)^2 evaluated from trace
    rows; nonnegative defect at every row is the discrete footprint of the
    blow-up mechanism.  min_G is tracked because the argument also needs
    G > 0 throughout.
    """

    min_defect: float
    argmin_t: float
    min_G: float
    max_scale: float
    n_rows: int
    lam: float
    b: float
    eta: float
    T: float


def concavity_check(trace: Trace, lam: float, b: float, eta: float, T: float) -> ConcavityReport:
    """Evaluate the concavity defect along a trace.

    G combines the running full-norm integral of u, the instantaneous L2
    norm, the leftover (T - t) ||u0||^2 weight, and the shift b (t + eta)^2.
    Requires lam > 2, b >= 0, eta > 0 and T at or beyond the last trace time.
    """
    if len(trace) == 0:
        raise UsageError("empty trace")
    if not lam > 2.0:
        raise UsageError(f"concavity exponent must exceed 2, got {lam}")
    if b < 0.0 or not eta > 0.0:
        raise UsageError(f"need b >= 0 and eta > 0, got b={b}, eta={eta}")
    t = trace.column("t")
    if T < t[-1] - 1e-12 * max(1.0, abs(t[-1])):
        raise UsageError(f"horizon T={T} precedes the last trace time {t[-1]}")
    G = (trace.column("acc_unorm") + trace.column("u_l2_sq")
         + (T - t) * trace.u0_full_sq + b * (t + eta) ** 2)
    Gp = 2.0 * trace.column("ip_uv_l2") + 2.0 * trace.column("acc_cross") \
        + 2.0 * b * (t + eta)
    Gpp = 2.0 * (trace.column("v_l2_sq") - trace.column("I")) + 2.0 * b
    defect = G * Gpp - ((lam + 2.0) / 4.0) * Gp ** 2
    i = int(np.argmin(defect))
    return ConcavityReport(
        min_defect=float(defect[i]),
        argmin_t=float(t[i]),
        min_G=float(np.min(G)),
        max_scale=float(np.max(np.abs(G * Gpp))),
        n_rows=len(trace),
        lam=lam, b=b, eta=eta, T=T,
    )
