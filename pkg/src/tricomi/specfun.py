"""Scalar special functions underlying the degenerate propagators.

The decaying profile lambda(t) solves u'' = t^m u with u(0) = 1,
u(+inf) = 0, and is built from the modified Bessel function K_nu of
fractional order nu = 1/(m+2):

    lambda(t) = C_nu * sqrt(t) * K_nu((2/(m+2)) t^((m+2)/2)),
    C_nu      = 2 / (Gamma(nu) (m+2)^nu),

where C_nu is pinned by the small-argument law of K_nu so that
lambda(0) = 1 exactly.  Differentiating kills the 1/(2 sqrt(t)) term
against the K_nu recurrence and leaves the closed form

    lambda'(t) = -C_nu * t^((m+1)/2) * K_{1-nu}((2/(m+2)) t^((m+2)/2)).

Both are evaluated through exponentially scaled Bessel functions, so the
log variants stay finite far beyond the underflow point of the direct
values (arguments up to ~1e3 in t*s are routine in the kernel modules).

Kummer's function Phi(a, b; z) = M(a, b, z) is evaluated on (a strip
around) the imaginary axis by its Maclaurin series for small |z| and by
the standard large-|z| expansion in 1/z beyond.  In double precision the
series loses roughly e^{|z|} * eps absolute accuracy to cancellation,
which caps its useful range near |z| ~ 22; the switch point and
cross-validation band below reflect that.

All functions are pure; scalars in, scalars out, with ``_many`` variants
operating on numpy arrays for the propagator hot loops.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sp

from .errors import AccuracyError, DomainError, UnderflowError

__all__ = [
    "SpecFunConfig",
    "LambdaEval",
    "DEFAULT_CONFIG",
    "bessel_k",
    "log_bessel_k",
    "bessel_k_integral_oracle",
    "lambda_fn",
    "lambda_value",
    "lambda_deriv",
    "log_lambda",
    "log_abs_lambda_deriv",
    "lambda_deriv_at_zero",
    "gamma_fn",
    "kummer_m",
    "kummer_m_many",
]

_LOG_TINY = math.log(2.2250738585072014e-308)  # smallest normal double


@dataclass(frozen=True)
class SpecFunConfig:
    """Tolerances and switch points for the scalar special functions.

    asymptotic_switch_bessel is the Bessel argument beyond which direct
    (unscaled) values are treated as underflowed and only the log/scaled
    forms are meaningful.  asymptotic_switch_kummer is the |z| where the
    Kummer evaluation changes from the Maclaurin series to the large-|z|
    expansion; both methods are cross-checked against each other on the
    band [0.6, 1.1] * switch.
    """

    series_tol: float = 1e-12
    series_max_terms: int = 400
    asymptotic_switch_bessel: float = 600.0
    asymptotic_switch_kummer: float = 20.0
    quadrature_nodes: int = 400

    def __post_init__(self):
        if self.series_tol <= 0:
            raise DomainError("series_tol must be positive")
        if self.asymptotic_switch_bessel <= 0 or self.asymptotic_switch_kummer <= 0:
            raise DomainError("asymptotic switch thresholds must be positive")
        if self.quadrature_nodes < 16:
            raise DomainError("quadrature_nodes must be >= 16")
        if self.series_max_terms < 16:
            raise DomainError("series_max_terms must be >= 16")


DEFAULT_CONFIG = SpecFunConfig()


@dataclass(frozen=True)
class LambdaEval:
    """One evaluation of the decaying profile and its derivative.

    ``value = exp(log_value)`` whenever the value is above the underflow
    range; ``deriv <= 0`` always; the log fields are valid for every t.
    """

    value: float
    deriv: float
    log_value: float
    log_abs_deriv: float


# ---------------------------------------------------------------------------
# modified Bessel K
# ---------------------------------------------------------------------------

def bessel_k(nu, x, config=DEFAULT_CONFIG):
    """Modified Bessel function K_nu(x) for 0 < nu <= 1, x > 0.

    Raises UnderflowError once the true value drops below the
    representable range (use :func:`log_bessel_k` there).
    """
    if not 0.0 < nu <= 1.0:
        raise DomainError(f"order nu={nu} outside (0, 1]")
    if not x > 0.0:
        raise DomainError(f"argument x={x} must be positive")
    logk = log_bessel_k(nu, x)
    if logk < _LOG_TINY:
        raise UnderflowError(
            f"K_{nu}({x}) underflows double precision; use log_bessel_k",
            log_value=logk,
        )
    return math.exp(logk)


def log_bessel_k(nu, x):
    """log K_nu(x), valid for arbitrarily large x (scaled evaluation)."""
    if not 0.0 < nu <= 1.0:
        raise DomainError(f"order nu={nu} outside (0, 1]")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise DomainError("argument must be positive")
    out = np.log(sp.kve(nu, x)) - x
    return float(out) if out.ndim == 0 else out


def bessel_k_integral_oracle(nu, x, config=DEFAULT_CONFIG):
    """K_nu(x) by double-exponential quadrature of its defining integral.

    K_nu(x) = integral over z in (0, inf) of exp(-x cosh z) cosh(nu z).
    Slow; kept as an independent oracle for tests only.
    """
    from .quadrature import exp_sinh_rule

    if x <= 0:
        raise DomainError("argument must be positive")
    z, w = exp_sinh_rule(config.quadrature_nodes)
    # work with the exponent directly; the tail underflows harmlessly to zero
    expo = -x * np.cosh(z) + np.log(np.cosh(nu * z))
    with np.errstate(under="ignore"):
        vals = np.where(expo > -745.0, np.exp(expo), 0.0)
    return float(np.sum(w * vals))


def gamma_fn(x):
    """Gamma function restricted to positive real arguments."""
    if not x > 0:
        raise DomainError(f"gamma_fn needs x > 0, got {x}")
    return float(sp.gamma(x))


# ---------------------------------------------------------------------------
# the profile lambda(t)
# ---------------------------------------------------------------------------

def _profile_constants(m):
    if not (isinstance(m, (int, np.integer)) and m >= 0):
        raise DomainError(f"degeneracy exponent m must be an integer >= 0, got {m}")
    nu = 1.0 / (m + 2)
    log_c = math.log(2.0) - math.lgamma(nu) - nu * math.log(m + 2)
    return nu, log_c


def _bessel_arg(m, t):
    return (2.0 / (m + 2)) * np.power(t, 0.5 * (m + 2))


def log_lambda(m, t):
    """log lambda(t); finite for every t >= 0 (lambda > 0)."""
    nu, log_c = _profile_constants(m)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise DomainError("lambda profile is defined for t >= 0; flip time first")
    x = _bessel_arg(m, np.maximum(t, 1e-300))
    with np.errstate(divide="ignore"):
        out = log_c + 0.5 * np.log(np.maximum(t, 1e-300)) + np.log(sp.kve(nu, x)) - x
    out = np.where(t == 0.0, 0.0, out)
    return float(out) if out.ndim == 0 else out


def lambda_value(m, t):
    """lambda(t); underflows smoothly to 0 for very large t."""
    logv = log_lambda(m, t)
    with np.errstate(under="ignore"):
        out = np.exp(logv)
    return float(out) if np.ndim(out) == 0 else out


def lambda_deriv_at_zero(m):
    """lambda'(0) = -(Gamma(1-nu)/Gamma(nu)) (m+2)^(1-2nu), nu = 1/(m+2)."""
    nu, _ = _profile_constants(m)
    return -math.exp(math.lgamma(1 - nu) - math.lgamma(nu) + (1 - 2 * nu) * math.log(m + 2))


def log_abs_lambda_deriv(m, t):
    """log |lambda'(t)|; finite for every t >= 0."""
    nu, log_c = _profile_constants(m)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise DomainError("lambda profile is defined for t >= 0; flip time first")
    x = _bessel_arg(m, np.maximum(t, 1e-300))
    out = log_c + 0.5 * (m + 1) * np.log(np.maximum(t, 1e-300)) + np.log(sp.kve(1.0 - nu, x)) - x
    out = np.where(t == 0.0, math.log(-lambda_deriv_at_zero(m)), out)
    return float(out) if out.ndim == 0 else out


def lambda_deriv(m, t):
    """lambda'(t) <= 0."""
    with np.errstate(under="ignore"):
        out = -np.exp(log_abs_lambda_deriv(m, t))
    return float(out) if np.ndim(out) == 0 else out


def lambda_fn(m, t, config=DEFAULT_CONFIG):
    """Full evaluation of the profile at one point t >= 0."""
    if t < 0:
        raise DomainError("lambda profile is defined for t >= 0; flip time first")
    lv = log_lambda(m, t)
    ld = log_abs_lambda_deriv(m, t)
    with np.errstate(under="ignore"):
        return LambdaEval(value=math.exp(lv) if lv > _LOG_TINY else 0.0,
                          deriv=-math.exp(ld) if ld > _LOG_TINY else 0.0,
                          log_value=lv,
                          log_abs_deriv=ld)


# ---------------------------------------------------------------------------
# Kummer's confluent hypergeometric on the imaginary strip
# ---------------------------------------------------------------------------

def _check_kummer_domain(a, b, z):
    if b <= 0 and float(b) == int(b):
        raise DomainError(f"Kummer parameter b={b} is a nonpositive integer (pole)")
    z = complex(z)
    if abs(z) > 1e-8 and abs(z.real) > abs(z.imag) * (1 + 1e-12):
        raise DomainError(
            f"z={z} is outside the supported strip |Re z| <= |Im z|"
        )
    return z


def _kummer_series_many(a, b, z, config):
    """Maclaurin series, vectorized over z.  Valid while eps*e^|z| is small."""
    z = np.asarray(z, dtype=complex)
    term = np.ones_like(z)
    total = np.ones_like(z)
    for k in range(config.series_max_terms):
        term = term * z * ((a + k) / ((b + k) * (k + 1.0)))
        total = total + term
        if np.all(np.abs(term) <= config.series_tol * (1.0 + np.abs(total))):
            return total
    raise AccuracyError(
        "Kummer series failed to converge",
        max_abs_z=float(np.max(np.abs(z))),
        terms=config.series_max_terms,
    )


def _kummer_asymptotic_many(a, b, z, config):
    """Large-|z| expansion with optimal truncation, vectorized over z.

    M(a,b,z) ~ Gamma(b) [ (-z)^(-a)/Gamma(b-a) * S1 + e^z z^(a-b)/Gamma(a) * S2 ],
    S1 = sum (a)_k (1+a-b)_k / (k! (-z)^k),  S2 = sum (b-a)_k (1-a)_k / (k! z^k).

    Each sum is truncated at its smallest term; the recorded estimate is the
    size of that term relative to the result.
    """
    z = np.asarray(z, dtype=complex)

    def optimal_sum(alpha, beta, w):
        # sum_k (alpha)_k (beta)_k / (k! w^k), truncating before terms grow
        term = np.ones_like(w)
        total = np.ones_like(w)
        err = np.full(w.shape, np.inf)
        active = np.ones(w.shape, dtype=bool)
        for k in range(config.series_max_terms):
            new = term * ((alpha + k) * (beta + k) / (k + 1.0)) / w
            grow = np.abs(new) >= np.abs(term)
            # freeze entries whose terms started growing
            err = np.where(active & grow, np.abs(term), err)
            active &= ~grow
            term = np.where(active, new, 0.0)
            total = total + term
            small = np.abs(term) <= config.series_tol * np.abs(total)
            err = np.where(active & small, np.abs(term), err)
            active &= ~small
            if not np.any(active):
                break
        return total, err

    rg_bma = sp.rgamma(b - a)
    rg_a = sp.rgamma(a)
    pref = sp.gamma(b)
    s1, e1 = optimal_sum(a, 1.0 + a - b, -z)
    s2, e2 = optimal_sum(b - a, 1.0 - a, z)
    with np.errstate(invalid="ignore"):
        branch1 = np.exp(-a * np.log(-z)) * rg_bma * s1 if rg_bma != 0.0 else 0.0 * z
        branch2 = np.exp(z + (a - b) * np.log(z)) * rg_a * s2 if rg_a != 0.0 else 0.0 * z
    val = pref * (branch1 + branch2)
    est = pref * (abs(rg_bma) * np.where(rg_bma != 0.0, e1, 0.0)
                  + abs(rg_a) * np.where(rg_a != 0.0, e2, 0.0))
    return val, est


def kummer_m_many(a, b, z, config=DEFAULT_CONFIG):
    """Vectorized Kummer Phi(a, b; z) for z on the imaginary strip.

    Series below the switch modulus, large-|z| expansion above, with a
    mandatory agreement check on the overlap band.
    """
    if b <= 0 and float(b) == int(b):
        raise DomainError(f"Kummer parameter b={b} is a nonpositive integer (pole)")
    z = np.asarray(z, dtype=complex)
    bad = (np.abs(z) > 1e-8) & (np.abs(z.real) > np.abs(z.imag) * (1 + 1e-12))
    if np.any(bad):
        raise DomainError("some z lie outside the supported strip |Re z| <= |Im z|")

    switch = config.asymptotic_switch_kummer
    band_lo, band_hi = 0.6 * switch, 1.1 * switch
    r = np.abs(z)
    out = np.empty_like(z)

    lo = r < switch
    if np.any(lo):
        out[lo] = _kummer_series_many(a, b, z[lo], config)
    if np.any(~lo):
        val, est = _kummer_asymptotic_many(a, b, z[~lo], config)
        tol = 1e-7 * (1.0 + np.abs(val))
        if np.any(est > tol):
            raise AccuracyError(
                "Kummer asymptotic expansion could not reach tolerance",
                worst_estimate=float(np.max(est / (1.0 + np.abs(val)))),
                min_abs_z=float(np.min(np.abs(z[~lo]))),
            )
        out[~lo] = val

    band = (r >= band_lo) & (r <= band_hi)
    if np.any(band):
        zb = z[band]
        ser = _kummer_series_many(a, b, zb, config)
        asy, _ = _kummer_asymptotic_many(a, b, zb, config)
        gap = np.abs(ser - asy) / (1.0 + np.abs(asy))
        if np.any(gap > 1e-5):
            raise AccuracyError(
                "Kummer series and asymptotic expansion disagree on the overlap band",
                worst_gap=float(np.max(gap)),
                series_value=complex(ser[np.argmax(gap)]),
                asymptotic_value=complex(asy[np.argmax(gap)]),
            )
    return out


def kummer_m(a, b, z, config=DEFAULT_CONFIG):
    """Kummer's confluent hypergeometric Phi(a, b; z), z on the imaginary strip."""
    z = _check_kummer_domain(a, b, z)
    if z == 0:
        return complex(1.0)
    return complex(kummer_m_many(a, b, np.array([z]), config)[0])
