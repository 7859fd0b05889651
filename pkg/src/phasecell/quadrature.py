"""Panel quadrature and analytic oscillatory tail integrals.

The momentum-space densities handled here are rational-times-oscillatory with
known power-law envelopes, so a fixed-order Gauss-Legendre rule on narrow
panels plus closed-form tails of sin^2(u/2)/u^k reaches 1e-8 accuracy cheaply.
"""
from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import sici

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gl_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    if order not in _GL_CACHE:
        _GL_CACHE[order] = leggauss(order)
    return _GL_CACHE[order]


def panel_quad(f, lo: float, hi: float, panel_width: float, order: int = 10) -> float:
    """Integrate f over [lo, hi] with Gauss-Legendre panels of at most panel_width."""
    n_panels = max(1, int(np.ceil((hi - lo) / panel_width)))
    edges = np.linspace(lo, hi, n_panels + 1)
    x0, w0 = gl_nodes(order)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    # nodes: (n_panels, order)
    x = mid[:, None] + half[:, None] * x0[None, :]
    w = half[:, None] * w0[None, :]
    vals = f(x.ravel())
    return float(np.real(np.sum(vals * w.ravel())))


def cos_tail(c: float, k: int) -> float:
    """Exact ∫_c^∞ cos(u)/u^k du for k >= 1 via Si/Ci recursion."""
    si, ci = sici(c)
    if k == 1:
        return -ci
    if k == 2:
        return np.cos(c) / c - (np.pi / 2 - si)
    # ∫ cos u / u^k = cos c/((k-1)c^{k-1}) - (1/(k-1)) ∫ sin u/u^{k-1}
    return np.cos(c) / ((k - 1) * c ** (k - 1)) - sin_tail(c, k - 1) / (k - 1)


def sin_tail(c: float, k: int) -> float:
    """Exact ∫_c^∞ sin(u)/u^k du for k >= 1."""
    si, ci = sici(c)
    if k == 1:
        return np.pi / 2 - si
    return np.sin(c) / ((k - 1) * c ** (k - 1)) + cos_tail(c, k - 1) / (k - 1)


def power_tail(c: float, k: int) -> float:
    """∫_c^∞ u^{-k} du for k >= 2."""
    return c ** (1 - k) / (k - 1)


def sin2_half_tail(c: float, k: int) -> float:
    """Exact ∫_c^∞ sin^2(u/2)/u^k du = (1/2)∫ (1-cos u)/u^k du for k >= 2."""
    return 0.5 * (power_tail(c, k) - cos_tail(c, k))
