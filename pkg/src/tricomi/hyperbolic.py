"""Degenerate-hyperbolic propagation for t >= 0.

The homogeneous flow is diagonalized by two real multiplier symbols
built from Kummer functions,

    V1(t, rho) = e^(-z/2) Phi(g0, 2 g0; z),        g0 = (2l-1)/(2(2l+1)),
    V2(t, rho) = t e^(-z/2) Phi(1-g0, 2(1-g0); z),
    z = (4 i / (2l+1)) t^((2l+1)/2) rho = 2 i phi(t) rho,

normalized so V1(0) = 1, V2(0) = 0, dV2/dt(0) = 1.  Both parameter
pairs have b = 2a, which is what makes the symbols real on the
imaginary axis.

The independent oracle is the subordination representation: the
degenerate propagator is a weighted average of wave propagators
cos(phi(t) sigma rho) at rescaled time, with Jacobi weights
(1 - sigma^2)^(g0 - 1) and (1 - sigma^2)^(-g0) on (0, 1).  Those
algebraic endpoint weights are handled exactly by Gauss-Jacobi rules
(the integrands are even, so the (-1, 1) rule folds onto (0, 1)).

The Duhamel operator uses the constancy of the Wronskian
V1 dV2/dt - V2 dV1/dt = 1 (no first-order term in the mode ODE):

    (T f)(t) = V2(t) int_0^t V1 f - V1(t) int_0^t V2 f,

so one cumulative integral pair per mode covers every evaluation time.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sp

from .errors import DomainError
from .grid import (SpatialField, SpectralField, TimeGrid, forward_transform,
                   inverse_transform, lp_norm)
from .quadrature import cumulative_integration_matrix
from .specfun import DEFAULT_CONFIG, kummer_m_many

__all__ = [
    "PropagatorSymbols",
    "v1_symbol",
    "v2_symbol",
    "subordination_v1",
    "subordination_v2",
    "homogeneous_evolve",
    "SymbolCache",
    "duhamel_T",
    "operator_norm_probe",
]

_IMAG_TOL = 1e-8


@dataclass(frozen=True)
class PropagatorSymbols:
    """Derived constants of the propagator pair for a given l >= 1."""

    l: int

    def __post_init__(self):
        if not (isinstance(self.l, (int, np.integer)) and self.l >= 1):
            raise DomainError("l must be an integer >= 1")

    @property
    def gamma(self):
        return (2 * self.l - 1) / (2.0 * (2 * self.l + 1))

    def phase(self, t):
        """phi(t) = (2/(2l+1)) t^((2l+1)/2), the degenerate time rescaling."""
        return (2.0 / (2 * self.l + 1)) * np.power(t, 0.5 * (2 * self.l + 1))

    def z(self, t, rho):
        return 2j * self.phase(t) * np.asarray(rho, dtype=float)


def _symbol_values(l, t, rho, which, config):
    syms = PropagatorSymbols(l)
    rho = np.asarray(rho, dtype=float)
    if t < 0 or np.any(rho < 0):
        raise DomainError("symbols are defined for t >= 0, rho >= 0")
    z = syms.z(t, rho)
    g0 = syms.gamma
    if which == 1:
        a = g0
    else:
        a = 1.0 - g0
    vals = np.exp(-z / 2.0) * kummer_m_many(a, 2.0 * a, z, config)
    if which == 2:
        vals = t * vals
    worst = np.max(np.abs(vals.imag) / (1.0 + np.abs(vals)))
    if worst > _IMAG_TOL:
        raise DomainError(
            f"V{which} symbol came out non-real (defect {worst:.2e}); "
            "Kummer evaluation is suspect")
    return vals


def v1_symbol(l, t, rho, config=DEFAULT_CONFIG):
    """V1(t, rho); scalar rho gives a complex scalar, arrays give arrays."""
    vals = _symbol_values(l, t, rho, 1, config)
    return complex(vals) if vals.ndim == 0 else vals


def v2_symbol(l, t, rho, config=DEFAULT_CONFIG):
    """V2(t, rho), the slope-normalized companion symbol."""
    vals = _symbol_values(l, t, rho, 2, config)
    return complex(vals) if vals.ndim == 0 else vals


# ---------------------------------------------------------------------------
# subordination oracle (independent of the Kummer path)
# ---------------------------------------------------------------------------

def _jacobi_fold(alpha, n_nodes):
    x, w = sp.roots_jacobi(n_nodes, alpha, alpha)
    return x, w


def subordination_v1(l, t, rho, n_nodes=96):
    """V1 via the wave-propagator average with weight (1-s^2)^(gamma-1)."""
    syms = PropagatorSymbols(l)
    g0 = syms.gamma
    x, w = _jacobi_fold(g0 - 1.0, n_nodes)
    theta = syms.phase(t) * np.asarray(rho, dtype=float)
    pref = 2.0 ** (2 - 2 * g0) * sp.gamma(2 * g0) / sp.gamma(g0) ** 2
    vals = 0.5 * pref * np.cos(np.multiply.outer(theta, x)) @ w
    return float(vals) if np.ndim(vals) == 0 else vals


def subordination_v2(l, t, rho, n_nodes=96):
    """V2 via the wave-propagator average with weight (1-s^2)^(-gamma), times t."""
    syms = PropagatorSymbols(l)
    g0 = syms.gamma
    x, w = _jacobi_fold(-g0, n_nodes)
    theta = syms.phase(t) * np.asarray(rho, dtype=float)
    pref = 2.0 ** (2 * g0) * sp.gamma(2 - 2 * g0) / sp.gamma(1 - g0) ** 2
    vals = 0.5 * pref * t * (np.cos(np.multiply.outer(theta, x)) @ w)
    return float(vals) if np.ndim(vals) == 0 else vals


# ---------------------------------------------------------------------------
# field-level evolution
# ---------------------------------------------------------------------------

def homogeneous_evolve(l, phi: SpectralField, psi: SpectralField, t) -> SpatialField:
    """w1(t) = V1(t, D) phi + V2(t, D) psi."""
    if phi.grid is not psi.grid and phi.grid != psi.grid:
        raise DomainError("phi and psi must share a grid")
    rho = phi.grid.freq_modulus().ravel()
    v1 = _unique_symbol(l, t, rho, 1)
    v2 = _unique_symbol(l, t, rho, 2)
    out = v1.reshape(phi.grid.shape) * phi.values + v2.reshape(phi.grid.shape) * psi.values
    return inverse_transform(SpectralField(phi.grid, out))


def _unique_symbol(l, t, rho, which, config=DEFAULT_CONFIG):
    ru, inv = np.unique(rho, return_inverse=True)
    vals = _symbol_values(l, t, ru, which, config).real
    return vals[inv]


class SymbolCache:
    """V1/V2 values per (time node, unique frequency), built once then read-only.

    Safe for concurrent reads after construction; the fixed-point loops
    reuse it across every iterate.
    """

    def __init__(self, l, times, rho, config=DEFAULT_CONFIG):
        self.l = l
        self.times = np.asarray(times, dtype=float)
        self.rho_unique, self._inv = np.unique(np.asarray(rho, float), return_inverse=True)
        v1 = np.empty((self.times.size, self.rho_unique.size))
        v2 = np.empty_like(v1)
        for i, t in enumerate(self.times):
            v1[i] = _symbol_values(l, t, self.rho_unique, 1, config).real
            v2[i] = _symbol_values(l, t, self.rho_unique, 2, config).real
        self._v1 = v1
        self._v2 = v2

    def v1_row(self, i):
        return self._v1[i][self._inv]

    def v2_row(self, i):
        return self._v2[i][self._inv]


def duhamel_T(l, f_hats, tgrid: TimeGrid, eval_times=None, cache=None, rho=None):
    """Duhamel operator over the snapshot grid, mode-wise.

    f_hats : (n_nodes, n_modes) source spectra at the Gauss-Legendre nodes
    rho    : (n_modes,) frequency moduli
    Returns an (n_eval, n_modes) array with T f at ``eval_times``
    (default: the nodes themselves; other times must be breakpoints).

    T f(t) = V2(t) A(t) - V1(t) B(t), A = int_0^t V1 f, B = int_0^t V2 f.
    """
    rule = tgrid.rule()
    f_hats = np.asarray(f_hats)
    if f_hats.shape[0] != rule.nodes.size:
        raise DomainError("f_hats must be sampled at the time-grid nodes")
    if rho is None and cache is None:
        raise DomainError("pass rho or a SymbolCache")
    if cache is None:
        cache = SymbolCache(l, rule.nodes, rho)
    eval_at_nodes = eval_times is None

    n_nodes, n_modes = f_hats.shape
    V1f = np.empty_like(f_hats)
    V2f = np.empty_like(f_hats)
    for i in range(n_nodes):
        V1f[i] = cache.v1_row(i) * f_hats[i]
        V2f[i] = cache.v2_row(i) * f_hats[i]

    from .elliptic import _cumulative_at_nodes

    A = _cumulative_at_nodes(rule, V1f)
    B = _cumulative_at_nodes(rule, V2f)

    if eval_at_nodes:
        out = np.empty_like(f_hats)
        for i in range(n_nodes):
            out[i] = cache.v2_row(i) * A[i] - cache.v1_row(i) * B[i]
        return out
    # evaluation at arbitrary breakpoints: reuse cumulative values at nodes
    eval_times = np.asarray(eval_times, dtype=float)
    out = np.empty((eval_times.size, n_modes), dtype=f_hats.dtype)
    Acum = _breakpoint_cumulatives(rule, V1f)
    Bcum = _breakpoint_cumulatives(rule, V2f)
    ru = cache.rho_unique
    for k, t in enumerate(eval_times):
        j = _breakpoint_index(rule, t)
        v1 = _unique_symbol(l, t, ru, 1)[cache._inv]
        v2 = _unique_symbol(l, t, ru, 2)[cache._inv]
        out[k] = v2 * Acum[j] - v1 * Bcum[j]
    return out


def _breakpoint_cumulatives(rule, values):
    npp = rule.nodes_per_panel
    cum = [np.zeros(values.shape[1:], dtype=values.dtype)]
    for p in range(rule.n_panels):
        w = rule.weights[p * npp:(p + 1) * npp]
        cum.append(cum[-1] + np.tensordot(w, values[p * npp:(p + 1) * npp], axes=(0, 0)))
    return cum


def _breakpoint_index(rule, t):
    bp = rule.breakpoints
    j = int(np.argmin(np.abs(bp - t)))
    if abs(bp[j] - t) > 1e-12 * (1 + abs(t)):
        raise DomainError(f"evaluation time {t} is not a panel breakpoint")
    return j


def operator_norm_probe(l, g: SpatialField, p, t):
    """(||V1 g||_p / ||g||_p, ||V2 g||_p / (t ||g||_p)) on the torus."""
    if t <= 0:
        raise DomainError("probe needs t > 0 (V2 ratio is normalized by t)")
    gn = lp_norm(g, p)
    if gn == 0.0:
        raise DomainError("undefined ratio: g is identically zero")
    G = forward_transform(g)
    rho = g.grid.freq_modulus().ravel()
    v1 = _unique_symbol(l, t, rho, 1).reshape(g.grid.shape)
    v2 = _unique_symbol(l, t, rho, 2).reshape(g.grid.shape)
    g1 = inverse_transform(SpectralField(g.grid, v1 * G.values))
    g2 = inverse_transform(SpectralField(g.grid, v2 * G.values))
    return lp_norm(g1, p) / gn, lp_norm(g2, p) / (t * gn)
