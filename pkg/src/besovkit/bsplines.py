"""Cardinal B-splines and the identity linking differences to derivatives:
the k-th difference of a smooth function equals the integral of its k-th
directional derivative against B_k.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "bspline_eval",
    "difference_spline_identity",
    "MonomialTestFunction",
    "SineTestFunction",
]


def bspline_eval(k: int, t) -> float | np.ndarray:
    """B_k(t), the k-fold convolution of the unit-interval indicator.

    Evaluated by the Cox-de-Boor recurrence
    B_k(t) = (t B_{k-1}(t) + (k - t) B_{k-1}(t-1)) / (k - 1),
    which stays in closed piecewise-polynomial form.  The order-1 spline uses
    the half-open interval [0, 1) so the recurrence telescopes cleanly.
    """
    if k < 1:
        raise ValueError("B-spline order must be >= 1")
    t_arr = np.asarray(t, dtype=float)
    out = _bk(k, np.atleast_1d(t_arr))
    return float(out[0]) if t_arr.ndim == 0 else out


def _bk(k: int, t: np.ndarray) -> np.ndarray:
    if k == 1:
        return np.where((t >= 0.0) & (t < 1.0), 1.0, 0.0)
    prev = _bk(k - 1, t)
    prev_shift = _bk(k - 1, t - 1.0)
    return (t * prev + (k - t) * prev_shift) / (k - 1)


# ---------------------------------------------------------------------------
# Closed-form test family with exact directional derivatives
# ---------------------------------------------------------------------------


class MonomialTestFunction:
    """f(x) = x_axis ** degree with exact directional derivatives."""

    def __init__(self, degree: int, axis: int = 0):
        self.degree = int(degree)
        self.axis = int(axis)

    def value(self, x) -> float:
        return float(np.asarray(x, dtype=float).reshape(-1)[self.axis] ** self.degree)

    def directional_derivative(self, x, h, order: int) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        h = np.asarray(h, dtype=float).reshape(-1)
        a, k = self.degree, order
        if k > a:
            return 0.0
        coeff = math.prod(range(a - k + 1, a + 1))
        return float(coeff * h[self.axis] ** k * x[self.axis] ** (a - k))


class SineTestFunction:
    """f(x) = sin(freq * x_axis) with exact directional derivatives."""

    def __init__(self, axis: int = 0, freq: float = 1.0):
        self.axis = int(axis)
        self.freq = float(freq)

    def value(self, x) -> float:
        return float(math.sin(self.freq * np.asarray(x, dtype=float).reshape(-1)[self.axis]))

    def directional_derivative(self, x, h, order: int) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        h = np.asarray(h, dtype=float).reshape(-1)
        u = self.freq * x[self.axis]
        phase = order % 4
        base = [math.sin(u), math.cos(u), -math.sin(u), -math.cos(u)][phase]
        return float(base * (self.freq * h[self.axis]) ** order)


def _gauss_panels(lo: float, hi: float, n_panels: int, order: int = 8):
    """Nodes/weights of composite Gauss-Legendre panels on [lo, hi]."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, n_panels + 1)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        nodes.append(0.5 * (a + b) + half * xg)
        weights.append(half * wg)
    return np.concatenate(nodes), np.concatenate(weights)


def difference_spline_identity(f, x, h, k: int, n_nodes: int = 10_000) -> dict:
    """Compare Delta^k_h f(x) with the B-spline integral of g^(k).

    `f` supplies exact values and directional derivatives (test family above).
    Returns {'lhs', 'rhs', 'gap'}.  The quadrature integrates piecewise over
    the spline knot intervals so the polynomial family is handled exactly.
    """
    if k < 1:
        raise ValueError("order k must be >= 1")
    x = np.asarray(x, dtype=float).reshape(-1)
    h = np.asarray(h, dtype=float).reshape(-1)

    lhs = 0.0
    for i in range(k + 1):
        lhs += (-1) ** (k - i) * math.comb(k, i) * f.value(x + i * h)

    order = 8
    panels_per_knot = max(1, n_nodes // (order * k))
    rhs = 0.0
    for knot in range(k):
        nodes, weights = _gauss_panels(knot, knot + 1, panels_per_knot, order)
        vals = np.array([f.directional_derivative(x + t * h, h, k) for t in nodes])
        rhs += float(np.sum(weights * vals * bspline_eval(k, nodes)))
    return {"lhs": lhs, "rhs": rhs, "gap": abs(lhs - rhs)}
