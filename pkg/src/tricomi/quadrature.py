"""Panelized Gauss-Legendre quadrature and related helpers.

All time integrals in the package run over composite Gauss-Legendre
panels.  Panels are explicit so that kernel kinks (the ``min(t, sigma)``
crease of the Duhamel kernel) can be placed on panel boundaries, and so
that geometric grading toward an endpoint is a property of the panel
layout rather than of the rule.
"""

import numpy as np

from .errors import DomainError

__all__ = [
    "gauss_legendre",
    "panel_rule",
    "geometric_breakpoints",
    "graded_breakpoints",
    "cumulative_integration_matrix",
    "PanelRule",
    "exp_sinh_rule",
]

_GL_CACHE = {}


def gauss_legendre(n):
    """Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1]."""
    if n < 1:
        raise DomainError("Gauss-Legendre rule needs at least one node")
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


class PanelRule:
    """Composite Gauss-Legendre rule over explicit panel breakpoints.

    Attributes
    ----------
    breakpoints : (P+1,) array of panel edges, strictly increasing
    nodes, weights : flattened arrays over all panels
    nodes_per_panel : points per panel
    """

    def __init__(self, breakpoints, nodes_per_panel):
        bp = np.asarray(breakpoints, dtype=float)
        if bp.ndim != 1 or bp.size < 2 or np.any(np.diff(bp) <= 0):
            raise DomainError("breakpoints must be strictly increasing with >= 2 entries")
        x, w = gauss_legendre(int(nodes_per_panel))
        lo, hi = bp[:-1], bp[1:]
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        self.breakpoints = bp
        self.nodes_per_panel = int(nodes_per_panel)
        self.nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        self.weights = (half[:, None] * w[None, :]).ravel()

    @property
    def n_panels(self):
        return self.breakpoints.size - 1

    def integrate(self, values):
        """Integral of samples taken at ``self.nodes`` (last axis)."""
        values = np.asarray(values)
        return values @ self.weights

    def refined(self, factor=2):
        """Same panel layout with ``factor`` times the nodes per panel."""
        return PanelRule(self.breakpoints, self.nodes_per_panel * factor)


def panel_rule(t0, t1, panels, nodes_per_panel):
    """Uniform composite Gauss-Legendre rule on [t0, t1]."""
    return PanelRule(np.linspace(t0, t1, panels + 1), nodes_per_panel)


def geometric_breakpoints(t0, t1, panels, ratio=2.0):
    """Breakpoints of [t0, t1] with panel widths growing geometrically from t0."""
    if panels < 1:
        raise DomainError("need at least one panel")
    widths = ratio ** np.arange(panels)
    edges = np.concatenate(([0.0], np.cumsum(widths)))
    return t0 + (t1 - t0) * edges / edges[-1]


def graded_breakpoints(t0, t1, panels, grading=2.0):
    """Breakpoints clustered algebraically toward t0 (for sigma^nu endpoints)."""
    u = np.linspace(0.0, 1.0, panels + 1) ** float(grading)
    return t0 + (t1 - t0) * u


def cumulative_integration_matrix(nodes, t0):
    """Matrix S with (S @ f)[i] = integral of the interpolant of f from t0 to nodes[i].

    ``nodes`` are the Gauss-Legendre points of a single panel starting at
    ``t0``; the interpolant is the degree n-1 polynomial through them.
    Stable for the modest node counts (<= 16) used here.
    """
    nodes = np.asarray(nodes, dtype=float)
    n = nodes.size
    scale = max(nodes[-1] - t0, 1e-300)
    u = (nodes - t0) / scale
    # Vandermonde solve for the Lagrange coefficients, then antidifferentiate.
    V = np.vander(u, n, increasing=True)
    C = np.linalg.inv(V)  # C[k, j]: coefficient of u^k in ell_j
    powers = np.arange(1, n + 1)
    anti = (u[:, None] ** powers[None, :]) / powers[None, :]  # (i, k+1)
    return scale * (anti @ C)


def exp_sinh_rule(n_nodes, t_max=3.8):
    """Double-exponential rule for integrals over (0, inf) of decaying integrands.

    Substitution z = exp((pi/2) sinh t); returns (nodes, weights) such that
    integral f(z) dz over (0, inf) ~= sum w_k f(z_k).  Used only by the
    defining-integral test oracles.
    """
    if n_nodes < 16:
        raise DomainError("exp-sinh rule needs at least 16 nodes")
    t = np.linspace(-t_max, t_max, int(n_nodes))
    h = t[1] - t[0]
    z = np.exp(0.5 * np.pi * np.sinh(t))
    w = h * 0.5 * np.pi * np.cosh(t) * z
    return z, w
