"""Adaptive time integration of the strongly damped semilinear wave equation

    u_tt - Lap u - Lap u_t + u_t = f(u) + g(x, t)

on a Dirichlet grid, written as a first order system in (u, v = u_t).

Scheme: midpoint-implicit in the linear part, explicit predictor-corrector in
f, one symmetric-positive-definite solve per pass.  Eliminating u_{n+1} from
the midpoint system leaves

    [(1 + dt/2) I - (dt/2 + dt^2/4) Lap] v_{n+1}
        = (1 - dt/2) v_n + dt Lap u_n + (dt/2 + dt^2/4) Lap v_n
          + dt [f(u_mid) + g(t_mid)]
    u_{n+1} = u_n + (dt/2)(v_n + v_{n+1})

with u_mid from an explicit Euler predictor, refined once with the corrected
u_{n+1}.  The scheme is second order; the predictor-corrector gap doubles as
the step-size error proxy.

Step control rejects and halves when either the gap or the relative growth of
the gradient-velocity quantity M exceeds ``adapt_target``, and regrows the
step gently when both are comfortably below it.  Blow-up is declared when the
divergence quantity Q passes ``blowup_threshold``; the final time is then
estimated by extrapolating the recorded growth of sup|u|.
"""

from dataclasses import dataclass, field, fields as dc_fields
import math
from typing import ClassVar, Optional, Tuple, Union

import numpy as np

from . import mesh
from .errors import ConfigurationError, EstimationError, OverflowEvent, UsageError
from .exprparse import Expr, sample_at_time
from .functionals import Trace, energy, make_row, q_functional
from .mesh import Field
from .nonlinearity import Nonlinearity


@dataclass
class State:
    """Instantaneous solver state plus the running time integrals
    (dissipation, full norm of u, full product of u and u_t)."""

    u: Field
    v: Field
    t: float
    acc_diss: float = 0.0
    acc_unorm: float = 0.0
    acc_cross: float = 0.0
    # cached integrand values at time t, for trapezoid accumulation
    _integrands: Optional[tuple] = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class SolverConfig:
    t_end: float
    dt0: float = 1e-3
    dt_min: float = 1e-14
    dt_max: float = 1e-2
    adapt_target: float = 0.05
    blowup_threshold: float = 1e10
    record_every: int = 1
    source: Optional[Expr] = None
    source_bindings: Optional[dict] = None
    solve_rel_tol: float = 1e-10

    def __post_init__(self):
        if not (math.isfinite(self.t_end) and self.t_end > 0.0):
            raise ConfigurationError(f"t_end must be positive finite, got {self.t_end}")
        if not (0.0 < self.dt_min <= self.dt0 <= self.dt_max):
            raise ConfigurationError(
                f"need 0 < dt_min <= dt0 <= dt_max, got "
                f"{self.dt_min}, {self.dt0}, {self.dt_max}"
            )
        if not self.adapt_target > 0.0:
            raise ConfigurationError(f"adapt_target must be positive, got {self.adapt_target}")
        if not self.blowup_threshold > 0.0:
            raise ConfigurationError(
                f"blowup_threshold must be positive, got {self.blowup_threshold}"
            )
        if int(self.record_every) < 1:
            raise ConfigurationError(f"record_every must be >= 1, got {self.record_every}")


@dataclass(frozen=True)
class Completed:
    kind: ClassVar[str] = "completed"
    t_end: float


@dataclass(frozen=True)
class BlowupDetected:
    kind: ClassVar[str] = "blowup_detected"
    t_stop: float
    T_extrapolated: float
    extrapolation_quality: float


@dataclass(frozen=True)
class DtUnderflow:
    kind: ClassVar[str] = "dt_underflow"
    t_stop: float
    q_at_stop: float


@dataclass(frozen=True)
class Overflow:
    kind: ClassVar[str] = "overflow"
    t_stop: float


Outcome = Union[Completed, BlowupDetected, DtUnderflow, Overflow]


def outcome_to_dict(outcome: Outcome) -> dict:
    out = {"kind": outcome.kind}
    for f in dc_fields(outcome):
        out[f.name] = getattr(outcome, f.name)
    return out


def _integrand_triple(domain, u, v):
    return (
        mesh.full_inner_arr(domain, v, v),
        mesh.full_inner_arr(domain, u, u),
        mesh.full_inner_arr(domain, u, v),
    )


def _step_arrays(domain, nl, u, v, t, dt, source, source_bindings, rel_tol):
    lap_u = mesh.lap_arr(domain, u)
    lap_v = mesh.lap_arr(domain, v)
    a = 1.0 + 0.5 * dt
    b = 0.5 * dt + 0.25 * dt * dt
    base = (1.0 - 0.5 * dt) * v + dt * lap_u + b * lap_v
    if source is not None:
        tm = t + 0.5 * dt
        if isinstance(source, Expr):
            src = sample_at_time(source, domain, tm, source_bindings)
        else:
            # any callable (domain, t) -> array works, e.g. manufactured sources
            src = np.asarray(source(domain, tm), dtype=np.float64)
        base = base + dt * src
    with np.errstate(all="ignore"):
        u_pred = u + dt * v
        f_mid = np.asarray(nl.f(0.5 * (u + u_pred)), dtype=np.float64)
        v1 = mesh.solve_shifted_arr(domain, a, b, base + dt * f_mid, x0=v,
                                    rel_tol=rel_tol)
        u1 = u + 0.5 * dt * (v + v1)
        f_mid = np.asarray(nl.f(0.5 * (u + u1)), dtype=np.float64)
        v2 = mesh.solve_shifted_arr(domain, a, b, base + dt * f_mid, x0=v1,
                                    rel_tol=rel_tol)
        u2 = u + 0.5 * dt * (v + v2)
        du = u2 - u1
        dv = v2 - v1
        gap_u = mesh.l2_inner_arr(domain, du, du)
        gap_v = mesh.l2_inner_arr(domain, dv, dv)
        scale_u = 1.0 + mesh.l2_inner_arr(domain, u2, u2)
        scale_v = 1.0 + mesh.l2_inner_arr(domain, v2, v2)
    if not (math.isfinite(gap_u) and math.isfinite(gap_v)
            and math.isfinite(scale_u) and math.isfinite(scale_v)):
        return u2, v2, math.inf
    gap = max(math.sqrt(gap_u / scale_u), math.sqrt(gap_v / scale_v))
    return u2, v2, gap


def _step_full(state: State, dt, nl, source, source_bindings, rel_tol):
    """Returns (new_state, gap, m_new), or (None, inf, inf) on overflow."""
    if not dt > 0.0:
        raise UsageError(f"step size must be positive, got {dt}")
    domain = state.u.domain
    u, v = state.u.values, state.v.values
    u2, v2, gap = _step_arrays(domain, nl, u, v, state.t, dt,
                               source, source_bindings, rel_tol)
    if not (np.all(np.isfinite(u2)) and np.all(np.isfinite(v2))):
        return None, math.inf, math.inf
    with np.errstate(all="ignore"):
        m_new = mesh.l2_inner_arr(domain, v2, v2) + mesh.grad_inner_arr(domain, u2, u2)
        old = state._integrands
        if old is None:
            old = _integrand_triple(domain, u, v)
        new = _integrand_triple(domain, u2, v2)
    if not (math.isfinite(m_new) and all(math.isfinite(x) for x in new)):
        return None, math.inf, math.inf
    half = 0.5 * dt
    out = State(
        u=Field(domain, u2),
        v=Field(domain, v2),
        t=state.t + dt,
        acc_diss=state.acc_diss + half * (old[0] + new[0]),
        acc_unorm=state.acc_unorm + half * (old[1] + new[1]),
        acc_cross=state.acc_cross + half * (old[2] + new[2]),
    )
    out._integrands = new
    return out, gap, m_new


def step(state: State, dt: float, nl: Nonlinearity, source: Optional[Expr] = None,
         source_bindings: Optional[dict] = None, rel_tol: float = 1e-10) -> State:
    """Advance one step of size dt.  Raises OverflowEvent if the update
    leaves floating point range."""
    out, _, _ = _step_full(state, dt, nl, source, source_bindings, rel_tol)
    if out is None:
        raise OverflowEvent("time step produced non-finite values")
    return out


def run(config: SolverConfig, u0: Field, v0: Field,
        nl: Nonlinearity) -> Tuple[Trace, Outcome]:
    """Integrate from (u0, v0) until t_end, blow-up detection, or failure.

    Returns the functional trace and the outcome.  The trace always contains
    the initial row and the row at the final accepted state.
    """
    domain = u0.domain
    if v0.domain != domain:
        raise UsageError("u0 and v0 live on different domains")
    E0 = energy(u0, v0, nl)
    trace = Trace(
        nl_name=nl.name,
        p=nl.p,
        E0=E0,
        u0_l2_sq=mesh.norm_l2_sq(u0),
        u0_full_sq=mesh.norm_full_sq(u0),
        dimension=domain.dimension,
    )
    state = State(u=u0.copy(), v=v0.copy(), t=0.0)

    def record(st: State, dt_used: float):
        if len(trace) > 0 and trace.last("t") == st.t:
            return
        row = make_row(st.u, st.v, nl, st.t, dt_used, st.acc_unorm,
                       st.acc_cross, st.acc_diss, E0)
        trace.append(**row)

    record(state, 0.0)
    m_prev = trace.last("M")
    dt = min(config.dt0, config.dt_max)
    accepted = 0
    last_dt = 0.0
    tiny = 1e-12 * config.t_end

    while True:
        remaining = config.t_end - state.t
        if remaining <= tiny:
            record(state, last_dt)
            return trace, Completed(t_end=state.t)
        dt_try = min(dt, remaining)
        new_state, gap, m_new = _step_full(state, dt_try, nl, config.source,
                                           config.source_bindings,
                                           config.solve_rel_tol)
        if new_state is None:
            # overflow inside one step: refine if possible, else report
            if 0.5 * dt_try >= config.dt_min:
                dt = 0.5 * dt_try
                continue
            record(state, last_dt)
            return trace, Overflow(t_stop=state.t)
        growth = (m_new - m_prev) / max(m_prev, 1.0)
        if growth > config.adapt_target or gap > config.adapt_target:
            if 0.5 * dt_try >= config.dt_min:
                dt = 0.5 * dt_try
                continue
            record(state, last_dt)
            return trace, DtUnderflow(t_stop=state.t, q_at_stop=q_functional(state))

        state = new_state
        accepted += 1
        last_dt = dt_try
        m_prev = m_new
        try:
            q_now = q_functional(state)
            if accepted % config.record_every == 0:
                record(state, dt_try)
        except OverflowEvent:
            # the state is finite but a functional is not; blow-up evidence
            return trace, Overflow(t_stop=state.t)
        if trace.t_threshold_M is None and m_new > config.blowup_threshold:
            trace.t_threshold_M = state.t
        if trace.t_threshold_Q is None and q_now > config.blowup_threshold:
            trace.t_threshold_Q = state.t
        if q_now > config.blowup_threshold:
            try:
                record(state, dt_try)
                T_est, quality = extrapolate_Tmax(trace)
            except (OverflowEvent, EstimationError):
                T_est, quality = state.t, 0.0
            return trace, BlowupDetected(
                t_stop=state.t, T_extrapolated=T_est,
                extrapolation_quality=quality,
            )
        if growth < 0.5 * config.adapt_target and gap < 0.5 * config.adapt_target:
            dt = min(dt_try * 1.2, config.dt_max)
        else:
            dt = dt_try


def extrapolate_Tmax(trace: Trace, p: Optional[float] = None) -> Tuple[float, float]:
    """Estimate the blow-up time from the recorded growth of sup|u|.

    If sup|u| ~ C (T - t)^(-gamma) near blow-up, then sup|u|^(-1/gamma) is
    asymptotically linear in t and hits zero at T.  The exponent is not known
    a priori, so both natural candidates gamma = 1/(p-2) (first order
    balance) and gamma = 2/(p-2) (second order balance) are fitted by least
    squares on the late tail, and the better linear fit (by R^2) wins.
    Returns (T_estimate, quality); quality below 0.9 falls back to the last
    recorded time.  Raises EstimationError when fewer than 8 rows qualify as
    tail data (sup|u| above 10x its initial value), which is in particular
    the case for traces of runs that never approached blow-up.
    """
    if len(trace) < 2:
        raise EstimationError("trace too short to extrapolate")
    if p is None:
        p = trace.p
    t = trace.column("t")
    sup = trace.column("sup_abs_u")
    sup0 = sup[0]
    mask = np.isfinite(sup) & (sup > 10.0 * max(sup0, 1e-300))
    if int(np.sum(mask)) < 8:
        raise EstimationError(
            f"only {int(np.sum(mask))} rows show tail growth; need 8"
        )
    tq = t[mask][-32:]
    sq = sup[mask][-32:]
    t_last = float(t[-1])
    best = (t_last, 0.0)
    for expo in (p - 2.0, 0.5 * (p - 2.0)):
        with np.errstate(all="ignore"):
            y = sq ** (-expo)
        if not np.all(np.isfinite(y)) or np.max(y) <= 0.0:
            continue
        y = y / np.max(y)
        A = np.vstack([np.ones_like(tq), tq]).T
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        a0, a1 = float(coef[0]), float(coef[1])
        if a1 >= 0.0:
            continue
        resid = y - (a0 + a1 * tq)
        ss_tot = float(np.sum((y - np.mean(y)) ** 2))
        if ss_tot <= 0.0:
            continue
        r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot
        T_est = -a0 / a1
        if T_est <= t_last:
            continue
        if r2 > best[1]:
            best = (T_est, r2)
    T_est, quality = best
    if quality < 0.9:
        return t_last, quality
    return T_est, quality
