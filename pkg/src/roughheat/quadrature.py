"""Panel quadrature helpers shared by the integral-heavy modules.

Three recurring difficulties drive the design here:

* integrands with an algebraic singularity h^power at h = 0 that is
  integrable only because the smooth factor vanishes there (power in
  (-2, -1), factor O(h) or O(h^2)): handled by the substitution
  h = u^p with p = 1/(power + vanish_order + 1), which flattens the
  product to O(1), plus geometrically shrinking panels toward 0 to
  absorb the residual fractional powers of u;
* slowly decaying tails: geometric panels plus closed-form tail
  corrections supplied by the caller;
* oscillatory cosine factors: panels sized to at most half the local
  period, standard Gauss-Legendre inside each panel.

Everything takes vectorized callables (ndarray in, ndarray out) and
evaluates the integrand once on the full node set.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def _gl_rule(n):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return nodes, weights


def panel_nodes(edges, n=24):
    """Gauss-Legendre nodes and weights on each [edges[i], edges[i+1]].

    Returns flat arrays (nodes, weights); integrating f is then simply
    (f(nodes) * weights).sum().
    """
    edges = np.asarray(edges, dtype=float)
    u, w = _gl_rule(n)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * u[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def integrate_panels(f, edges, n=24):
    nodes, weights = panel_nodes(edges, n)
    return float(np.dot(f(nodes), weights))


def edges_linear(a, b, n_panels):
    return np.linspace(a, b, n_panels + 1)


def edges_geometric(a, b, n_panels):
    """Geometric edges for a decaying integrand; requires 0 < a < b."""
    if not 0 < a < b:
        raise ValueError(f"need 0 < a < b, got ({a}, {b})")
    return np.geomspace(a, b, n_panels + 1)


def edges_shrink(b, levels):
    """Edges [0, b/2^(levels-1), ..., b/2, b] shrinking toward 0."""
    return np.concatenate(([0.0], b * 2.0 ** np.arange(1 - levels, 1.0)))


def singular_power_nodes(upper, power, vanish_order, levels=32, n=24):
    """Nodes/weights for int_0^upper g(h) h^power dh with g = O(h^vanish_order).

    The caller evaluates g at the returned nodes and dots with the weights;
    the h^power factor and the substitution Jacobian are already folded into
    the weights.  Valid for power + vanish_order > -1.
    """
    p = 1.0 / (power + vanish_order + 1.0)
    if p <= 0:
        raise ValueError(
            f"power {power} with vanishing order {vanish_order} is not integrable"
        )
    u_edges = edges_shrink(upper ** (1.0 / p), levels)
    u, wu = panel_nodes(u_edges, n)
    h = u**p
    weights = wu * p * u ** (p - 1.0) * h**power
    return h, weights


def oscillatory_cosine(f, x, cutoff, n=24, min_panels=8):
    """int_0^cutoff f(eta) cos(x*eta) d eta with period-resolving panels."""
    x = abs(float(x))
    width = cutoff / min_panels
    if x > 0:
        width = min(width, np.pi / (2.0 * x))
    n_panels = int(np.ceil(cutoff / width))
    nodes, weights = panel_nodes(edges_linear(0.0, cutoff, n_panels), n)
    return float(np.dot(f(nodes) * np.cos(x * nodes), weights))
