"""Hand-built models and sequences used by the bundled scenarios."""

import numpy as np

from .operators import CallableMap, GraphPiece, Linear, PiecewiseGraph1D
from .setgeom import Box


def interval_normal_cone(half_width=1.0):
    """Graph of the normal cone of ``[-w, w]``: ``(-inf, 0]`` at -w, ``{0}``
    inside, ``[0, inf)`` at w.  Its inverse is ``w * Sign``."""
    w = float(half_width)
    return PiecewiseGraph1D([
        GraphPiece.ray((-w, 0.0), "down"),
        GraphPiece.segment((-w, 0.0), (w, 0.0)),
        GraphPiece.ray((w, 0.0), "up"),
    ])


def open_end_graph():
    """Sign-like graph whose middle piece misses its right endpoint, so the
    graph is not closed at 0: ``{-1}`` on x < 0 and ``{1}`` on x >= 0 only."""
    return PiecewiseGraph1D([
        GraphPiece.ray((0.0, -1.0), "left", include_start=False),
        GraphPiece.ray((0.0, 1.0), "right"),
    ])


def _sign_interval(t):
    if t > 0:
        return 1.0, 1.0
    if t < 0:
        return -1.0, -1.0
    return -1.0, 1.0


def sign_coupled(weight=3.0):
    """``B(x) = (Sign(x2) + w x2 + sin|x1|, Sign(x1) + w x1 + cos|x2|)``.

    Not monotone on its own, but paired with the swap map ``w * [[0,1],[1,0]]``
    the increments satisfy ``<B(x)-B(y), C(x)-C(y)> >= 2w |x-y|^2``.
    """
    w = float(weight)

    def func(x):
        x1, x2 = float(x[0]), float(x[1])
        s2, s1 = _sign_interval(x2), _sign_interval(x1)
        c1 = w * x2 + np.sin(abs(x1))
        c2 = w * x1 + np.cos(abs(x2))
        return Box([s2[0] + c1, s1[0] + c2], [s2[1] + c1, s1[1] + c2])

    return CallableMap(func, 2, 2, name=f"sign_coupled(w={w:g})")


def swap_linear(weight=3.0):
    w = float(weight)
    return Linear([[0.0, w], [w, 0.0]])


BUILTIN_MAPS = {
    "intervalNormalCone": interval_normal_cone,
    "openEndGraph": open_end_graph,
    "signCoupled": sign_coupled,
    "swapLinear": swap_linear,
}


def square_indexed(length):
    """``a_n = 1/n`` when n is a perfect square, else 0 (n = 1..length).

    Summable, not monotone, and ``n a_n = 1`` along the squares."""
    a = np.zeros(length)
    k = np.arange(1, int(np.sqrt(length)) + 1)
    a[k * k - 1] = 1.0 / (k * k)
    return a


def inverse_power(length, power):
    return 1.0 / np.arange(1, length + 1, dtype=float) ** power


def geometric(length, ratio):
    return float(ratio) ** np.arange(1, length + 1, dtype=float)
