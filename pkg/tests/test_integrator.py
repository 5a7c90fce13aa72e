"""Time integrator: exact semi-discrete solution, accumulators, outcomes,
step control, and blow-up time extrapolation.

The workhorse oracle: for the linear equation (f = 0) the semi-discrete
system on any grid has the exact solution u(t) = e^{-t} u0 when v0 = -u0,
because the symbol factors as (sigma + 1)(sigma + lambda) for every discrete
eigenvalue lambda.  All remaining error is then time discretization, so the
observed convergence order is the scheme's order with nothing mixed in.
"""

import math

import numpy as np
import pytest

from sdwave import (
    BlowupDetected,
    Completed,
    ConfigurationError,
    DtUnderflow,
    EstimationError,
    Field,
    OverflowEvent,
    Overflow,
    SolverConfig,
    State,
    UsageError,
    build_domain,
    extrapolate_Tmax,
    run,
    step,
    zeros,
)
from sdwave.exprparse import parse
from sdwave.functionals import COLUMNS, Trace
from sdwave.mesh import norm_full_sq, norm_l2_sq
from sdwave.nonlinearity import power, zero


def sin_data(n=64, amplitude=1.0, L=1.0):
    d = build_domain(1, L, n)
    u = Field(d, amplitude * np.sin(math.pi * d.coords["x"] / L))
    return d, u


def fixed_dt_config(dt, t_end, **kw):
    kw.setdefault("adapt_target", 1e9)
    return SolverConfig(t_end=t_end, dt0=dt, dt_min=dt, dt_max=dt, **kw)


# -------------------------------------------------------------- configuration


def test_config_validation():
    with pytest.raises(ConfigurationError):
        SolverConfig(t_end=0.0)
    with pytest.raises(ConfigurationError):
        SolverConfig(t_end=1.0, dt0=1e-3, dt_min=1e-2)
    with pytest.raises(ConfigurationError):
        SolverConfig(t_end=1.0, dt0=1e-1, dt_max=1e-2)
    with pytest.raises(ConfigurationError):
        SolverConfig(t_end=1.0, adapt_target=0.0)
    with pytest.raises(ConfigurationError):
        SolverConfig(t_end=1.0, record_every=0)
    with pytest.raises(ConfigurationError):
        SolverConfig(t_end=1.0, blowup_threshold=-1.0)


def test_run_rejects_mismatched_domains():
    d1, u = sin_data(16)
    d2 = build_domain(1, 1.0, 24)
    with pytest.raises(UsageError):
        run(SolverConfig(t_end=0.1), u, zeros(d2), zero())


# ------------------------------------------------- exact decay mode, order 2


def decay_error(dt, n=64, t_end=0.5):
    d, u0 = sin_data(n)
    v0 = Field(d, -u0.values)
    trace, outcome = run(fixed_dt_config(dt, t_end), u0, v0, zero())
    assert isinstance(outcome, Completed)
    # reconstruct the final field is not exposed; compare through the norms
    want = math.exp(-2.0 * t_end) * norm_l2_sq(u0)
    return abs(trace.last("u_l2_sq") - want), trace


def test_linear_decay_is_second_order():
    e1, _ = decay_error(2e-3)
    e2, _ = decay_error(1e-3)
    assert e1 < 1e-6
    assert 3.5 < e1 / e2 < 4.5


def test_accumulators_match_closed_forms():
    # for u = e^{-t} u0 all three time integrals equal
    # (1 - e^{-2t})/2 * ||u0||_full^2 up to sign
    t_end, dt = 0.75, 1e-3
    d, u0 = sin_data(64)
    v0 = Field(d, -u0.values)
    trace, _ = run(fixed_dt_config(dt, t_end), u0, v0, zero())
    base = 0.5 * (1.0 - math.exp(-2.0 * t_end)) * norm_full_sq(u0)
    assert trace.last("acc_diss") == pytest.approx(base, rel=1e-5)
    assert trace.last("acc_unorm") == pytest.approx(base, rel=1e-5)
    assert trace.last("acc_cross") == pytest.approx(-base, rel=1e-5)
    # energy identity: E(t) - E0 = -dissipation, so the recorded residual
    # is pure scheme error
    assert abs(trace.last("energy_residual")) < 1e-6 * norm_full_sq(u0)


def test_energy_residual_shrinks_at_second_order():
    _, tr1 = decay_error(2e-3)
    _, tr2 = decay_error(1e-3)
    r1 = abs(tr1.last("energy_residual"))
    r2 = abs(tr2.last("energy_residual"))
    assert 3.5 < r1 / r2 < 4.5


# ----------------------------------------------------------------- outcomes


def test_tame_run_completes():
    d, u0 = sin_data(48, amplitude=0.5)
    cfg = SolverConfig(t_end=0.3)
    trace, outcome = run(cfg, u0, zeros(d), power(4.0))
    assert isinstance(outcome, Completed)
    assert outcome.t_end == pytest.approx(0.3, abs=1e-9)
    assert trace.last("t") == pytest.approx(0.3, abs=1e-9)
    assert trace.column("t")[0] == 0.0
    assert trace.t_threshold_M is None and trace.t_threshold_Q is None


def test_growing_sine_blows_up():
    d, u0 = sin_data(64, amplitude=6.0)
    cfg = SolverConfig(t_end=5.0)
    trace, outcome = run(cfg, u0, zeros(d), power(4.0))
    assert isinstance(outcome, BlowupDetected)
    assert 0.4 < outcome.t_stop < 0.65
    assert outcome.T_extrapolated >= outcome.t_stop
    assert outcome.extrapolation_quality > 0.99
    assert trace.last("Q") > cfg.blowup_threshold
    assert trace.t_threshold_Q == pytest.approx(outcome.t_stop, rel=0.05)
    assert trace.t_threshold_M is not None
    assert trace.t_threshold_M <= outcome.t_stop + 1e-12
    assert len(trace) > 100


def test_dt_underflow_reports_q():
    d, u0 = sin_data(32)
    cfg = SolverConfig(t_end=1.0, dt0=1e-3, dt_min=1e-6, adapt_target=1e-18)
    trace, outcome = run(cfg, u0, zeros(d), power(4.0))
    assert isinstance(outcome, DtUnderflow)
    assert outcome.t_stop == 0.0
    assert outcome.q_at_stop == pytest.approx(norm_l2_sq(u0), rel=1e-12)
    assert len(trace) == 1  # only the initial row; nothing was accepted


def test_overflow_when_step_cannot_refine():
    d, u0 = sin_data(48, amplitude=6.0)
    # adapt_target=inf disables rejection, so the first non-finite step with
    # no room to halve below dt_min must surface as Overflow
    cfg = fixed_dt_config(2e-3, 5.0, blowup_threshold=1e300,
                          adapt_target=math.inf)
    trace, outcome = run(cfg, u0, zeros(d), power(4.0))
    assert isinstance(outcome, Overflow)
    assert outcome.t_stop > 0.3
    assert np.all(np.isfinite(trace.column("sup_abs_u")))


def test_step_advances_and_guards():
    d, u0 = sin_data(32, amplitude=0.5)
    st = State(u=u0, v=zeros(d), t=0.0)
    out = step(st, 1e-3, power(4.0))
    assert out.t == pytest.approx(1e-3)
    assert out.acc_diss > 0.0
    hot = State(u=Field(d, 1e200 * u0.values), v=zeros(d), t=0.0)
    with pytest.raises(OverflowEvent):
        step(hot, 1e-3, power(4.0))


# --------------------------------------------------------------- step control


def test_record_every_thins_but_keeps_last():
    d, u0 = sin_data(32, amplitude=0.5)
    dt, t_end = 1e-3, 0.1
    full, _ = run(fixed_dt_config(dt, t_end), u0, zeros(d), power(4.0))
    thin, _ = run(fixed_dt_config(dt, t_end, record_every=7), u0, zeros(d), power(4.0))
    assert len(thin) < len(full)
    assert thin.last("t") == pytest.approx(full.last("t"), abs=1e-12)
    # interior recorded times step by 7 dt
    tcol = thin.column("t")
    assert np.diff(tcol)[1:-1] == pytest.approx(7.0 * dt, rel=1e-9)


def test_adaptive_run_rejects_when_target_tightened():
    d, u0 = sin_data(64, amplitude=6.0)
    loose, _ = run(SolverConfig(t_end=0.2, adapt_target=0.05), u0, zeros(d), power(4.0))
    tight, _ = run(SolverConfig(t_end=0.2, adapt_target=0.005), u0, zeros(d), power(4.0))
    # tighter target forces smaller accepted steps
    assert np.min(tight.column("dt")[1:]) < np.min(loose.column("dt")[1:])
    assert len(tight) > len(loose)


def test_runs_are_deterministic():
    d, u0 = sin_data(48, amplitude=6.0)
    cfg = SolverConfig(t_end=5.0)
    tr1, out1 = run(cfg, u0, zeros(d), power(4.0))
    tr2, out2 = run(cfg, u0, zeros(d), power(4.0))
    assert out1 == out2
    for c in COLUMNS:
        assert np.array_equal(tr1.column(c), tr2.column(c))


# -------------------------------------------------------------- source terms


def test_constant_source_reaches_steady_state():
    # g = sin(pi x) drives u toward the discrete solve of -Lap u = g,
    # which for this g is g / lambda1_h
    d = build_domain(1, 1.0, 32)
    h = d.spacing[0]
    lam1h = (4.0 / h ** 2) * math.sin(math.pi * h / 2.0) ** 2
    cfg = SolverConfig(t_end=20.0, dt_max=1e-2, record_every=100,
                      source=parse("sin(pi*x)"))
    trace, outcome = run(cfg, zeros(d), zeros(d), zero())
    assert isinstance(outcome, Completed)
    want_l2 = norm_l2_sq(Field(d, np.sin(math.pi * d.coords["x"]))) / lam1h ** 2
    assert trace.last("u_l2_sq") == pytest.approx(want_l2, rel=1e-6)
    assert trace.last("v_l2_sq") < 1e-12


def test_time_dependent_source_direction():
    d = build_domain(1, 1.0, 32)
    cfg = SolverConfig(t_end=0.5, source=parse("exp(-t)*sin(pi*x)"))
    trace, _ = run(cfg, zeros(d), zeros(d), zero())
    assert trace.last("u_l2_sq") > 0.0


# ------------------------------------------------------------- extrapolation


def synthetic_blowup_trace(T=1.0, p=4.0):
    tr = Trace(nl_name="synthetic", p=p, E0=0.0, u0_l2_sq=1.0,
               u0_full_sq=2.0, dimension=1)
    ts = [0.0] + [0.990 + 0.0008 * i for i in range(12)]
    for t in ts:
        row = {c: 0.0 for c in COLUMNS}
        row["t"] = t
        row["sup_abs_u"] = (T - t) ** (-1.0 / (p - 2.0))
        tr.append(**row)
    return tr


def test_extrapolation_recovers_power_law():
    tr = synthetic_blowup_trace(T=1.0)
    T_est, quality = extrapolate_Tmax(tr)
    # sup^{-(p-2)} = (T - t) is exactly linear, so the fit is perfect
    assert T_est == pytest.approx(1.0, rel=1e-9)
    assert quality > 1.0 - 1e-12


def test_extrapolation_requires_tail_growth():
    tr = Trace(nl_name="flat", p=4.0, E0=0.0, u0_l2_sq=1.0, u0_full_sq=2.0,
               dimension=1)
    for t in np.linspace(0.0, 1.0, 20):
        row = {c: 0.0 for c in COLUMNS}
        row["t"] = float(t)
        row["sup_abs_u"] = 1.0
        tr.append(**row)
    with pytest.raises(EstimationError, match="tail growth"):
        extrapolate_Tmax(tr)
    short = Trace(nl_name="short", p=4.0, E0=0.0, u0_l2_sq=1.0,
                  u0_full_sq=2.0, dimension=1)
    with pytest.raises(EstimationError):
        extrapolate_Tmax(short)


def test_extrapolation_falls_back_on_poor_fit():
    tr = Trace(nl_name="noisy", p=4.0, E0=0.0, u0_l2_sq=1.0, u0_full_sq=2.0,
               dimension=1)
    sups = [1.0, 11.0, 30.0, 12.0, 28.0, 13.0, 26.0, 14.0, 24.0, 15.0, 22.0]
    for i, s in enumerate(sups):
        row = {c: 0.0 for c in COLUMNS}
        row["t"] = 0.1 * i
        row["sup_abs_u"] = s
        tr.append(**row)
    T_est, quality = extrapolate_Tmax(tr)
    assert quality < 0.9
    assert T_est == pytest.approx(1.0)  # last recorded time
