"""Explicit bounds that sandwich the numerical blow-up time.

Upper bound: a concavity argument applied to a shifted time integral of the
solution norm gives a finite horizon T once the initial data either escapes
the unstable set with enough margin or has negative energy.  Both variants
are computed when applicable and the smaller horizon is reported, together
with the auxiliary parameters (lam, b, eta) so the concavity inequality can
be checked pointwise along a recorded run.

Lower bound: the gradient-velocity quantity M = ||u_t||_2^2 + ||grad u||_2^2
obeys M' <= C4 + C5 M^q, with C4, C5 assembled from the growth constants of
the nonlinearity and an embedding constant of the domain.  Integrating the
envelope from M(0) gives a time before which M stays finite.
"""

from dataclasses import dataclass
import math
from typing import Optional

from scipy.integrate import quad

from . import functionals, mesh
from .errors import (ConfigurationError, DegenerateDataError, NumericalError,
                     PreconditionError)
from .mesh import EmbedConstant, Field
from .nonlinearity import Nonlinearity


def threshold_factor(p: float, lam1: float) -> float:
    """Multiple of E(0) that K(0) must exceed in the escape criterion."""
    return 4.0 * p * (1.0 + lam1) / ((p - 2.0) * lam1)


@dataclass(frozen=True)
class CriterionReport:
    """Escape criterion for blow-up from data in the unstable set."""

    satisfied: bool
    margin: float
    K0: float
    E0: float
    I0: float
    lambda1: float
    factor: float
    in_unstable_set: bool


def criterion_high_energy(u0: Field, v0: Field, nl: Nonlinearity) -> CriterionReport:
    """Check K(0) > factor * E(0) together with I(u0) < 0.

    The margin K(0) - factor * E(0) is the quantity the upper bound spends;
    it must be strictly positive.
    """
    domain = u0.domain
    lam1 = mesh.lambda1(domain)
    E0 = functionals.energy(u0, v0, nl)
    I0 = functionals.nehari(u0, nl)
    K0 = functionals.k_functional(u0, v0)
    fac = threshold_factor(nl.p, lam1)
    margin = math.fsum([K0, -fac * E0])
    in_neg = bool(I0 < 0.0)
    return CriterionReport(
        satisfied=bool(in_neg and margin > 0.0),
        margin=margin, K0=K0, E0=E0, I0=I0,
        lambda1=lam1, factor=fac, in_unstable_set=in_neg,
    )


@dataclass(frozen=True)
class UpperVariant:
    """One concavity-based horizon with its auxiliary parameters."""

    name: str
    applicable: bool
    reason: str
    T: Optional[float] = None
    lam: Optional[float] = None
    b: Optional[float] = None
    eta: Optional[float] = None
    a: Optional[float] = None


@dataclass(frozen=True)
class UpperBoundReport:
    T_upper: float
    variant_used: str
    margin_variant: UpperVariant
    negative_energy_variant: UpperVariant
    criterion: CriterionReport


def _horizon(lam, b, u0_l2_sq, u0_full_sq, ip01):
    """Minimized horizon of the concavity argument for given lam and b."""
    a = math.fsum([2.0 * u0_full_sq, -(lam - 2.0) * ip01])
    lm2 = lam - 2.0
    root = math.sqrt(math.fsum([a * a, lm2 * lm2 * b * u0_l2_sq]))
    eta = (root + a) / (lm2 * b)
    T = 4.0 * (root + a) / (lm2 * lm2 * b)
    return T, eta, a


def upper_bound(u0: Field, v0: Field, nl: Nonlinearity) -> UpperBoundReport:
    """Concavity horizon before which the solution must leave every bounded
    set.  Applicable when the escape criterion holds or when E(0) < 0; raises
    PreconditionError (with the computed diagnostics attached) otherwise.
    """
    crit = criterion_high_energy(u0, v0, nl)
    p = nl.p
    lam1 = crit.lambda1
    u0_l2 = mesh.norm_l2_sq(u0)
    u0_full = mesh.norm_full_sq(u0)
    ip01 = mesh.inner_l2(u0, v0)

    if crit.satisfied:
        lam = p - (p - 2.0) * lam1 / (1.0 + lam1)
        b = ((p - 2.0) * lam1 / (2.0 * lam * (1.0 + lam1))) * crit.margin
        T, eta, a = _horizon(lam, b, u0_l2, u0_full, ip01)
        margin_var = UpperVariant("margin", True, "escape criterion satisfied",
                                  T=T, lam=lam, b=b, eta=eta, a=a)
    else:
        margin_var = UpperVariant(
            "margin", False,
            f"criterion not met (margin={crit.margin:.6g}, "
            f"I0={crit.I0:.6g})",
        )

    if crit.E0 < 0.0:
        b = -2.0 * crit.E0
        T, eta, a = _horizon(p, b, u0_l2, u0_full, ip01)
        neg_var = UpperVariant("negative_energy", True, "E(0) < 0",
                               T=T, lam=p, b=b, eta=eta, a=a)
    else:
        neg_var = UpperVariant("negative_energy", False,
                               f"E(0)={crit.E0:.6g} is not negative")

    candidates = [v for v in (margin_var, neg_var) if v.applicable]
    if not candidates:
        raise PreconditionError(
            "upper bound needs the escape criterion or negative energy; "
            f"margin={crit.margin:.6g}, E0={crit.E0:.6g}, I0={crit.I0:.6g}",
            margin=crit.margin, E0=crit.E0, I0=crit.I0,
        )
    best = min(candidates, key=lambda v: v.T)
    return UpperBoundReport(
        T_upper=best.T,
        variant_used=best.name,
        margin_variant=margin_var,
        negative_energy_variant=neg_var,
        criterion=crit,
    )


@dataclass(frozen=True)
class GrowthEnvelope:
    """Coefficients of the differential inequality M' <= C4 + C5 M^q."""

    C4: float
    C5: float
    q: float
    embed: EmbedConstant
    note: str


def derive_constants(nl: Nonlinearity, domain, seed=0) -> GrowthEnvelope:
    """Assemble the envelope constants from the growth bound of f.

    Chain: testing the equation with u_t and dropping the negative damping
    terms leaves 2 integral |f(u)| |u_t|; the growth bound splits it into an
    alpha part handled by Cauchy-Schwarz on the volume and a beta part
    handled by the L^{2q} embedding, and Young's inequality (weight 1 on
    each) absorbs both ||u_t||_2^2 contributions into the damping.
    """
    if not nl.q > 1.0:
        raise ConfigurationError(f"growth exponent must exceed 1, got {nl.q}")
    emb = mesh.embed_const(domain, 2.0 * nl.q, seed=seed)
    C4 = nl.alpha * nl.alpha * domain.volume
    C5 = nl.beta * nl.beta * emb.value ** (2.0 * nl.q)
    note = (
        "C4 = alpha^2 |domain|; C5 = beta^2 S^(2q) with S the H^1_0 -> "
        f"L^(2q) embedding constant ({'certified' if emb.certified else 'estimated'}); "
        "both Young splits use weight 1 and are absorbed by the damping"
    )
    return GrowthEnvelope(C4=C4, C5=C5, q=nl.q, embed=emb, note=note)


@dataclass(frozen=True)
class LowerBoundReport:
    T_lower: float
    M0: float
    envelope: GrowthEnvelope
    method: str
    tail_bound: float
    quad_error: float


def lower_bound(u0: Field, v0: Field, nl: Nonlinearity,
                envelope: Optional[GrowthEnvelope] = None,
                seed=0) -> LowerBoundReport:
    """Time for the envelope ODE to diverge from M(0): no blow-up can happen
    earlier.  Exact closed form when C4 = 0; otherwise a truncated quadrature
    whose neglected tail keeps the result a valid lower bound.
    """
    domain = u0.domain
    if envelope is None:
        envelope = derive_constants(nl, domain, seed=seed)
    C4, C5, q = envelope.C4, envelope.C5, envelope.q
    M0 = math.fsum([mesh.norm_l2_sq(v0), mesh.norm_grad_sq(u0)])
    if M0 <= 0.0:
        raise DegenerateDataError(
            "M(0) = 0: the envelope never leaves zero and no finite "
            "divergence time exists for this data"
        )
    if C5 == 0.0:
        raise DegenerateDataError(
            "C5 = 0: the envelope is at most linear and never diverges; "
            "no finite lower bound is defined"
        )
    if C4 == 0.0:
        T = M0 ** (1.0 - q) / (C5 * (q - 1.0))
        return LowerBoundReport(T_lower=T, M0=M0, envelope=envelope,
                                method="closed form (C4 = 0)",
                                tail_bound=0.0, quad_error=0.0)

    def integrand(s):
        try:
            return 1.0 / (C4 + C5 * s ** q)
        except OverflowError:
            return 0.0

    # truncate where the neglected tail (bounded by the C5-only tail) is
    # negligible; truncation only lowers the value, so the bound stays valid.
    # One decade per quad call keeps each piece well inside the subdivision
    # budget no matter how slowly the tail decays.
    lo = M0
    s_star = max(10.0 * M0, (C4 / C5) ** (1.0 / q) * 10.0)
    finite = 0.0
    err_total = 0.0
    for _ in range(200):
        piece, err = quad(integrand, lo, s_star, epsabs=0.0, epsrel=1e-11,
                          limit=400)
        finite += piece
        err_total += err
        try:
            tail = s_star ** (1.0 - q) / (C5 * (q - 1.0))
        except OverflowError:
            tail = 0.0
        if tail <= 1e-12 * finite:
            return LowerBoundReport(T_lower=finite, M0=M0, envelope=envelope,
                                    method="quadrature, truncated tail",
                                    tail_bound=tail, quad_error=err_total)
        lo = s_star
        s_star *= 10.0
    raise NumericalError("lower bound quadrature did not stabilize")


@dataclass(frozen=True)
class ConstructedData:
    u0: Field
    v0: Field
    alpha: float
    beta: float
    E0: float
    criterion: CriterionReport


def construct_high_energy_data(ubar0: Field, ubar1: Field, H: float,
                               nl: Nonlinearity) -> ConstructedData:
    """Scale profiles (ubar0, ubar1) into data with E(0) = H > 0 that still
    satisfies the escape criterion.

    u0 = alpha * ubar0 and v0 = beta * ubar1 with alpha doubled until the
    unstable-set and margin conditions hold, and beta chosen each time so the
    energy lands exactly on H.  Requires a positive L2 pairing of the two
    profiles and a nonzero velocity profile.
    """
    domain = ubar0.domain
    if not H > 0.0:
        raise PreconditionError(f"target energy must be positive, got {H}", H=H)
    pair = mesh.inner_l2(ubar0, ubar1)
    if not pair > 0.0:
        raise PreconditionError(
            f"profiles must have positive L2 pairing, got {pair:.6g}", pairing=pair
        )
    v1_l2 = mesh.norm_l2_sq(ubar1)
    if v1_l2 == 0.0:
        raise PreconditionError("velocity profile must be nonzero")

    grad0 = mesh.norm_grad_sq(ubar0)
    alpha = 1.0
    for _ in range(64):
        u0 = Field(domain, alpha * ubar0.values)
        radicand = 2.0 * math.fsum([
            H,
            -0.5 * alpha * alpha * grad0,
            functionals.potential_total(u0, nl),
        ]) / v1_l2
        if radicand > 0.0:
            beta = math.sqrt(radicand)
            v0 = Field(domain, beta * ubar1.values)
            crit = criterion_high_energy(u0, v0, nl)
            if crit.in_unstable_set and crit.margin > 0.0:
                E0 = functionals.energy(u0, v0, nl)
                return ConstructedData(u0=u0, v0=v0, alpha=alpha, beta=beta,
                                       E0=E0, criterion=crit)
        alpha *= 2.0
    raise NumericalError(
        f"no scaling up to alpha=2^64 produced admissible data "
        f"(H={H}, pairing={pair:.6g})"
    )
