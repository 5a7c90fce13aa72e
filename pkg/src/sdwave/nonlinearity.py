"""Source nonlinearities f, their potentials F, and the three structure
conditions the blow-up theory needs:

  superlinearity       s f(s) >= p F(s) for some p > 2
  growth               |f(s)| <= alpha + beta |s|^q with q > 1
  derivative growth    |f'(s)| <= k0 + k1 |s|^l1

Each built-in family ships the constants that make these hold, with the
derivation recorded on the instance; the ``check_*`` functions verify them by
dense sampling and report the worst signed residual (negative = violation).
"""

from dataclasses import dataclass
import math
from typing import Callable, Optional

import numpy as np

from .errors import CheckerError, ConfigurationError

_CHECK_HEADROOM = 1e-12


@dataclass(frozen=True)
class Nonlinearity:
    """A nonlinearity f with potential F (F' = f, F(0) = 0) and the
    constants under which the structure conditions are claimed."""

    name: str
    f: Callable
    F: Callable
    fprime: Callable
    p: float
    alpha: float
    beta: float
    q: float
    k0: float
    k1: float
    l1: float
    constants_note: str = ""

    def __post_init__(self):
        if not self.p > 2.0:
            raise ConfigurationError(f"superlinearity exponent must exceed 2, got {self.p}")
        if not self.q > 1.0:
            raise ConfigurationError(f"growth exponent must exceed 1, got {self.q}")
        if self.alpha < 0 or self.beta < 0 or self.k0 < 0 or self.k1 < 0 or self.l1 < 0:
            raise ConfigurationError("growth constants must be nonnegative")


def power(p: float) -> Nonlinearity:
    """f(s) = |s|^(p-2) s, the classical superlinear family."""
    if not p > 2.0:
        raise ConfigurationError(f"power family needs p > 2, got {p}")

    def f(s):
        s = np.asarray(s, dtype=np.float64)
        return np.abs(s) ** (p - 2.0) * s

    def F(s):
        s = np.asarray(s, dtype=np.float64)
        return np.abs(s) ** p / p

    def fprime(s):
        s = np.asarray(s, dtype=np.float64)
        return (p - 1.0) * np.abs(s) ** (p - 2.0)

    return Nonlinearity(
        name=f"power:{p:g}",
        f=f, F=F, fprime=fprime,
        p=p,
        alpha=0.0, beta=1.0, q=p - 1.0,
        k0=0.0, k1=p - 1.0, l1=p - 2.0,
        constants_note=(
            "s f = p F exactly; |f| = |s|^(p-1) so alpha=0, beta=1, q=p-1; "
            "|f'| = (p-1)|s|^(p-2) so k0=0, k1=p-1, l1=p-2"
        ),
    )


def logpower(p: float, q: Optional[float] = None) -> Nonlinearity:
    """f(s) = |s|^(p-2) s log|s| (continued by 0 at s=0).

    The potential is F(s) = |s|^p log|s| / p - |s|^p / p^2, so
    s f - p F = |s|^p / p exactly.  The growth constants are chosen so the
    bounds hold for all s, not just asymptotically:

    - pick q slightly above p-1 (default p-1+0.1) and set
      beta = (p-1) / (q (q-p+1)); then sigma^(p-1) log sigma <= beta sigma^q
      for all sigma >= 1, because the gap beta sigma^q - sigma^(p-1) log sigma
      is minimized where its log-derivative vanishes and is positive there.
      On |s| <= 1, |f| peaks at |s| = e^(-1/(p-1)) with value 1/(e (p-1)),
      which alpha covers.
    - |f'(s)| = |s|^(p-2) |(p-1) log|s| + 1|: with l1 = p-2+0.1 and
      d = l1-(p-2), the ratio on sigma >= 1 peaks at log sigma = 1/d - 1/(p-1)
      giving k1 = ((p-1)/d) e^(d/(p-1) - 1); on sigma <= 1 the magnitude
      peaks at e^(-(p-2)/(p-1) ... ) below max(1, ((p-1)/(p-2)) e^(-(p-2)/(p-1)-1)),
      which k0 covers.
    """
    if not p > 2.0:
        raise ConfigurationError(f"logpower family needs p > 2, got {p}")
    if q is None:
        q = p - 1.0 + 0.1
    if not q > p - 1.0:
        raise ConfigurationError(
            f"logpower growth exponent must exceed p-1={p - 1}, got {q}"
        )

    def f(s):
        s = np.asarray(s, dtype=np.float64)
        a = np.abs(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(a == 0.0, 0.0, a ** (p - 2.0) * s * np.log(a))
        return out

    def F(s):
        s = np.asarray(s, dtype=np.float64)
        a = np.abs(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(a == 0.0, 0.0,
                           a ** p * np.log(a) / p - a ** p / (p * p))
        return out

    def fprime(s):
        s = np.asarray(s, dtype=np.float64)
        a = np.abs(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(a == 0.0, 0.0,
                           a ** (p - 2.0) * ((p - 1.0) * np.log(a) + 1.0))
        return out

    d2 = q - (p - 1.0)
    beta = (p - 1.0) / (q * d2)
    alpha = 1.0 / (math.e * (p - 1.0))
    l1 = p - 2.0 + 0.1
    d3 = l1 - (p - 2.0)
    k1 = ((p - 1.0) / d3) * math.exp(d3 / (p - 1.0) - 1.0)
    k0 = max(1.0, ((p - 1.0) / (p - 2.0)) * math.exp(-(p - 2.0) / (p - 1.0) - 1.0))
    return Nonlinearity(
        name=f"logpower:{p:g}",
        f=f, F=F, fprime=fprime,
        p=p,
        alpha=alpha, beta=beta, q=q,
        k0=k0, k1=k1, l1=l1,
        constants_note=(
            "s f - p F = |s|^p / p exactly; alpha = 1/(e(p-1)); "
            "beta = (p-1)/(q(q-p+1)) with q = p-1+0.1; "
            "k1 = ((p-1)/d) e^(d/(p-1)-1) with d = 0.1, l1 = p-2+0.1; "
            "k0 = max(1, ((p-1)/(p-2)) e^(-(p-2)/(p-1)-1))"
        ),
    )


def zero(p: float = 4.0) -> Nonlinearity:
    """f = 0: the linear strongly damped wave equation, for validation runs."""

    def z(s):
        s = np.asarray(s, dtype=np.float64)
        return np.zeros_like(s)

    return Nonlinearity(
        name="zero", f=z, F=z, fprime=z,
        p=p, alpha=0.0, beta=0.0, q=2.0, k0=0.0, k1=0.0, l1=1.0,
        constants_note="identically zero; all conditions trivial",
    )


def from_callables(name, f, F, fprime, *, p, alpha, beta, q, k0, k1, l1,
                   note="user-supplied") -> Nonlinearity:
    """Wrap user callables; the claimed constants are taken on faith here and
    can be vetted with the checkers."""
    return Nonlinearity(name=name, f=f, F=F, fprime=fprime, p=p,
                        alpha=alpha, beta=beta, q=q, k0=k0, k1=k1, l1=l1,
                        constants_note=note)


@dataclass(frozen=True)
class CheckReport:
    """Outcome of sampling one structure condition."""

    condition: str
    nonlinearity: str
    passed: bool
    worst_residual: float
    worst_s: float
    n_samples: int
    s_max: float
    note: str = "sampled on a symmetric log-spaced grid; not a proof"


def _sample_grid(s_max, n_samples):
    if not s_max > 0.0:
        raise ConfigurationError(f"s_max must be positive, got {s_max}")
    if n_samples < 1000:
        raise ConfigurationError(f"need at least 1000 samples, got {n_samples}")
    m = n_samples // 2
    mags = np.logspace(math.log10(s_max) - 9.0, math.log10(s_max), m)
    return np.concatenate([-mags[::-1], mags])


def _finish(condition, nl, residual, tol, s, s_max):
    if not np.all(np.isfinite(residual)):
        i = int(np.argmin(np.isfinite(residual)))
        raise CheckerError(
            f"{condition} residual is non-finite at s={s[i]!r} for {nl.name}"
        )
    # headroom absorbs rounding in the residual; reported value stays raw
    i = int(np.argmin(residual + tol))
    return CheckReport(
        condition=condition,
        nonlinearity=nl.name,
        passed=bool(np.all(residual + tol >= 0.0)),
        worst_residual=float(residual[i]),
        worst_s=float(s[i]),
        n_samples=len(s),
        s_max=s_max,
    )


def check_superlinearity(nl: Nonlinearity, s_max=100.0, n_samples=10000) -> CheckReport:
    """Residual s f(s) - p F(s), which must be nonnegative."""
    s = _sample_grid(s_max, n_samples)
    lhs = s * np.asarray(nl.f(s), dtype=np.float64)
    rhs = nl.p * np.asarray(nl.F(s), dtype=np.float64)
    tol = _CHECK_HEADROOM * (1.0 + np.abs(lhs) + np.abs(rhs))
    return _finish("superlinearity", nl, lhs - rhs, tol, s, s_max)


def check_growth(nl: Nonlinearity, s_max=100.0, n_samples=10000) -> CheckReport:
    """Residual alpha + beta |s|^q - |f(s)|, which must be nonnegative."""
    s = _sample_grid(s_max, n_samples)
    bound = nl.alpha + nl.beta * np.abs(s) ** nl.q
    val = np.abs(np.asarray(nl.f(s), dtype=np.float64))
    tol = _CHECK_HEADROOM * (1.0 + bound)
    return _finish("growth", nl, bound - val, tol, s, s_max)


def check_derivative_growth(nl: Nonlinearity, s_max=100.0, n_samples=10000) -> CheckReport:
    """Residual k0 + k1 |s|^l1 - |f'(s)|, which must be nonnegative."""
    s = _sample_grid(s_max, n_samples)
    bound = nl.k0 + nl.k1 * np.abs(s) ** nl.l1
    val = np.abs(np.asarray(nl.fprime(s), dtype=np.float64))
    tol = _CHECK_HEADROOM * (1.0 + bound)
    return _finish("derivative growth", nl, bound - val, tol, s, s_max)


def check_all(nl: Nonlinearity, s_max=100.0, n_samples=10000):
    return (
        check_superlinearity(nl, s_max, n_samples),
        check_growth(nl, s_max, n_samples),
        check_derivative_growth(nl, s_max, n_samples),
    )
