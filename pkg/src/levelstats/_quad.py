"""Composite Gauss-Legendre quadrature on uniform panels."""

import numpy as np
from numpy.polynomial.legendre import leggauss

_RULE_CACHE: dict = {}


def _rule(n):
    if n not in _RULE_CACHE:
        _RULE_CACHE[n] = leggauss(n)
    return _RULE_CACHE[n]


def gauss_panels(a, b, panel_len, nodes_per_panel=24):
    """Nodes and weights for [a, b] split into panels of <= panel_len."""
    a, b = float(a), float(b)
    if b <= a:
        return np.empty(0), np.empty(0)
    m = max(1, int(np.ceil((b - a) / panel_len)))
    edges = np.linspace(a, b, m + 1)
    xg, wg = _rule(nodes_per_panel)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    return (mid + half * xg).ravel(), (half * np.broadcast_to(wg, (m, len(wg)))).ravel()
