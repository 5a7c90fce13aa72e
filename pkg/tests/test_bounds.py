"""Explicit horizons around the blow-up time, checked against independent
arithmetic.

Every derived number here is recomputed inside the test from scratch (closed
trig sums for the functionals, the horizon algebra spelled out step by step,
arctan for the envelope integral), so agreement is evidence the module does
the algebra it claims and not merely that it equals itself.
"""

import math

import numpy as np
import pytest

from sdwave import (
    ConfigurationError,
    DegenerateDataError,
    Field,
    NumericalError,
    PreconditionError,
    build_domain,
    zeros,
)
from sdwave.bounds import (
    GrowthEnvelope,
    construct_high_energy_data,
    criterion_high_energy,
    derive_constants,
    lower_bound,
    threshold_factor,
    upper_bound,
)
from sdwave.mesh import EmbedConstant, inner_l2, norm_full_sq, norm_grad_sq, norm_l2_sq
from sdwave.nonlinearity import logpower, power, zero

from _simpson import adaptive_simpson


def fixture(n=64, amplitude=6.0):
    d = build_domain(1, 1.0, n)
    u0 = Field(d, amplitude * np.sin(math.pi * d.coords["x"]))
    return d, u0, zeros(d), power(4.0)


def lam1_h(d):
    h = d.spacing[0]
    return (4.0 / h ** 2) * math.sin(math.pi * h / 2.0) ** 2


def horizon_by_hand(lam, b, u_l2, u_full, ip):
    a = 2.0 * u_full - (lam - 2.0) * ip
    root = math.sqrt(a * a + (lam - 2.0) ** 2 * b * u_l2)
    eta = (root + a) / ((lam - 2.0) * b)
    T = 4.0 * (root + a) / ((lam - 2.0) ** 2 * b)
    return T, eta, a


# ------------------------------------------------------------- the criterion


def test_threshold_factor_value():
    # p = 4, lam1 = pi^2: 16 (1 + pi^2) / (2 pi^2)
    want = 8.0 * (1.0 + math.pi ** 2) / math.pi ** 2
    assert threshold_factor(4.0, math.pi ** 2) == pytest.approx(want, rel=1e-15)


def test_criterion_on_sine_fixture():
    d, u0, v0, nl = fixture()
    lam = lam1_h(d)
    rep = criterion_high_energy(u0, v0, nl)
    # closed forms: E0 = 9 lam1_h - 121.5, I0 = 18 lam1_h - 486,
    # K0 = 18 + 18 lam1_h, factor from the continuum eigenvalue
    assert rep.E0 == pytest.approx(9.0 * lam - 121.5, rel=1e-12)
    assert rep.I0 == pytest.approx(18.0 * lam - 486.0, rel=1e-12)
    assert rep.K0 == pytest.approx(18.0 + 18.0 * lam, rel=1e-12)
    assert rep.lambda1 == pytest.approx(math.pi ** 2, rel=1e-15)
    factor = 8.0 * (1.0 + math.pi ** 2) / math.pi ** 2
    assert rep.factor == pytest.approx(factor, rel=1e-14)
    assert rep.margin == pytest.approx(rep.K0 - factor * rep.E0, rel=1e-12)
    assert rep.in_unstable_set and rep.satisfied
    # continuum value of the margin, for scale: about 483.5
    cont = (18.0 + 18.0 * math.pi ** 2) - factor * (9.0 * math.pi ** 2 - 121.5)
    assert rep.margin == pytest.approx(cont, rel=1e-3)


def test_criterion_fails_for_small_data():
    d, _, v0, nl = fixture(amplitude=0.1)
    u0 = Field(d, 0.1 * np.sin(math.pi * d.coords["x"]))
    rep = criterion_high_energy(u0, v0, nl)
    assert not rep.in_unstable_set
    assert not rep.satisfied


# ------------------------------------------------------------ upper horizon


def test_upper_bound_negative_energy_variant():
    d, u0, v0, nl = fixture()
    rep = upper_bound(u0, v0, nl)
    neg = rep.negative_energy_variant
    assert neg.applicable
    assert neg.lam == 4.0
    assert neg.b == pytest.approx(-2.0 * rep.criterion.E0, rel=1e-14)
    T, eta, a = horizon_by_hand(4.0, neg.b, norm_l2_sq(u0), norm_full_sq(u0),
                                inner_l2(u0, v0))
    assert neg.T == pytest.approx(T, rel=1e-12)
    assert neg.eta == pytest.approx(eta, rel=1e-12)
    assert neg.a == pytest.approx(a, rel=1e-12)


def test_upper_bound_margin_variant():
    d, u0, v0, nl = fixture()
    rep = upper_bound(u0, v0, nl)
    mv = rep.margin_variant
    assert mv.applicable
    lam1 = math.pi ** 2
    lam = 4.0 - 2.0 * lam1 / (1.0 + lam1)
    assert mv.lam == pytest.approx(lam, rel=1e-14)
    b = (2.0 * lam1 / (2.0 * lam * (1.0 + lam1))) * rep.criterion.margin
    assert mv.b == pytest.approx(b, rel=1e-12)
    T, eta, a = horizon_by_hand(lam, b, norm_l2_sq(u0), norm_full_sq(u0), 0.0)
    assert mv.T == pytest.approx(T, rel=1e-12)
    assert mv.eta == pytest.approx(eta, rel=1e-12)


def test_upper_bound_picks_smaller_horizon():
    d, u0, v0, nl = fixture()
    rep = upper_bound(u0, v0, nl)
    assert rep.T_upper == min(rep.margin_variant.T, rep.negative_energy_variant.T)
    assert rep.variant_used == "negative_energy"
    # continuum arithmetic for the winning variant, as an order-of-magnitude
    # anchor: T = (root + a)/b with a = 36 + 36 pi^2, b = 2(121.5 - 9 pi^2)
    a = 36.0 + 36.0 * math.pi ** 2
    b = 2.0 * (121.5 - 9.0 * math.pi ** 2)
    root = math.sqrt(a * a + 4.0 * b * 18.0)
    assert rep.T_upper == pytest.approx((root + a) / b, rel=1e-3)


def test_upper_bound_precondition_failure_carries_diagnostics():
    d, _, v0, nl = fixture()
    u0 = Field(d, 0.1 * np.sin(math.pi * d.coords["x"]))
    with pytest.raises(PreconditionError) as err:
        upper_bound(u0, v0, nl)
    diag = err.value.diagnostics
    assert diag["E0"] > 0.0
    assert diag["margin"] <= 0.0 or diag["I0"] >= 0.0
    with pytest.raises(PreconditionError):
        upper_bound(zeros(d), zeros(d), nl)


# --------------------------------------------------------- envelope constants


def test_derive_constants_power_interval():
    d = build_domain(1, 1.0, 32)
    env = derive_constants(power(4.0), d)
    # alpha = 0 kills C4; S = L^(1/6 + 1/2)/2 = 1/2 on the unit interval,
    # so C5 = (1/2)^6 = 1/64 exactly
    assert env.C4 == 0.0
    assert env.C5 == pytest.approx(1.0 / 64.0, rel=1e-14)
    assert env.q == 3.0
    assert env.embed.certified
    assert "certified" in env.note


def test_derive_constants_logpower_interval():
    d = build_domain(1, 1.0, 32)
    nl = logpower(4.0)
    env = derive_constants(nl, d)
    assert env.C4 == pytest.approx(nl.alpha ** 2, rel=1e-14)  # |domain| = 1
    assert env.C5 == pytest.approx(nl.beta ** 2 * 0.5 ** 6.2, rel=1e-13)
    assert env.q == pytest.approx(3.1)


def test_derive_constants_rectangle_is_estimated():
    d = build_domain(2, 1.0, 10)
    env = derive_constants(power(4.0), d)
    assert not env.embed.certified
    assert "estimated" in env.note
    assert env.C5 > 0.0


# -------------------------------------------------------------- lower horizon


def test_lower_bound_closed_form():
    d, u0, v0, nl = fixture()
    rep = lower_bound(u0, v0, nl)
    M0 = 18.0 * lam1_h(d)
    assert rep.M0 == pytest.approx(M0, rel=1e-12)
    # T = M0^(1-q) / (C5 (q-1)) with q = 3, C5 = 1/64: T = 32 / M0^2
    assert rep.T_lower == pytest.approx(32.0 / M0 ** 2, rel=1e-12)
    assert "closed form" in rep.method
    assert rep.tail_bound == 0.0


def test_lower_bound_quadrature_against_arctan():
    # hand-built envelope with C4 = C5 = 1, q = 2: the divergence time is
    # exactly pi/2 - arctan(M0)
    d, u0, v0, nl = fixture(n=32, amplitude=1.0)
    env = GrowthEnvelope(C4=1.0, C5=1.0, q=2.0,
                         embed=EmbedConstant(4.0, 0.5, True, "test"),
                         note="test")
    rep = lower_bound(u0, v0, nl, envelope=env)
    M0 = norm_grad_sq(u0)
    want = math.pi / 2.0 - math.atan(M0)
    assert rep.T_lower == pytest.approx(want, rel=1e-9)
    assert rep.T_lower < want  # truncation may only lower the value
    assert "quadrature" in rep.method
    assert rep.tail_bound <= 1e-11 * rep.T_lower


def test_lower_bound_quadrature_against_simpson():
    d, u0, v0, _ = fixture()
    nl = logpower(4.0)
    env = derive_constants(nl, d)
    rep = lower_bound(u0, v0, nl, envelope=env)
    M0 = rep.M0

    def integrand(s):
        return 1.0 / (env.C4 + env.C5 * s ** env.q)

    S = 1e6 * M0
    finite = adaptive_simpson(integrand, M0, S, tol=1e-15)
    tail = S ** (1.0 - env.q) / (env.C5 * (env.q - 1.0))
    assert rep.T_lower == pytest.approx(finite, rel=1e-8, abs=tail)


def test_lower_bound_degenerate_cases():
    d, u0, v0, nl = fixture()
    with pytest.raises(DegenerateDataError, match="M"):
        lower_bound(zeros(d), zeros(d), nl)
    with pytest.raises(DegenerateDataError, match="C5"):
        lower_bound(u0, v0, zero())


# ------------------------------------------------------- constructed profiles


def test_construct_lands_energy_on_target():
    d, ubar, _, nl = fixture(amplitude=1.0)
    for H in (1.0, 10.0):
        got = construct_high_energy_data(ubar, ubar, H, nl)
        assert got.E0 == pytest.approx(H, abs=1e-9)
        assert got.criterion.satisfied
        assert got.criterion.E0 == pytest.approx(H, abs=1e-9)
        assert got.alpha >= 1.0
        assert math.log2(got.alpha) == round(math.log2(got.alpha))
        assert got.u0.values == pytest.approx(got.alpha * ubar.values)
        assert got.v0.values == pytest.approx(got.beta * ubar.values)


def test_construct_preconditions():
    d, ubar, _, nl = fixture(amplitude=1.0)
    with pytest.raises(PreconditionError):
        construct_high_energy_data(ubar, ubar, 0.0, nl)
    anti = Field(d, -ubar.values)
    with pytest.raises(PreconditionError, match="pairing"):
        construct_high_energy_data(ubar, anti, 1.0, nl)


def test_construct_exhausts_without_potential():
    # with f = 0 the radicand 2(H - alpha^2 |grad|^2/2) only gets worse as
    # alpha grows, so the search must fail cleanly
    d, ubar, _, _ = fixture(amplitude=1.0)
    with pytest.raises(NumericalError):
        construct_high_energy_data(ubar, ubar, 1.0, zero())
