"""Central finite differences for mixed partial derivatives of a cost."""

import itertools

import numpy as np

# step as a fraction of the local scale, indexed by total derivative order
_STEP = {1: 1e-4, 2: 1e-4, 3: 1e-3, 4: 1e-2}


def _stencil(func, x, y, xdirs, ydirs, h):
    """Product of central first differences along each listed direction."""
    q = len(xdirs) + len(ydirs)
    total = 0.0
    for signs in itertools.product((1.0, -1.0), repeat=q):
        dx = np.zeros_like(x)
        dy = np.zeros_like(y)
        for s, d in zip(signs[: len(xdirs)], xdirs):
            dx = dx + s * h * d
        for s, d in zip(signs[len(xdirs) :], ydirs):
            dy = dy + s * h * d
        total += np.prod(signs) * func(x + dx, y + dy)
    return total / (2.0 * h) ** q


def mixed_derivative(func, x, y, xdirs, ydirs, scale=1.0, richardson=None):
    """Directional derivative d/dx[xdirs] d/dy[ydirs] of ``func`` at ``(x, y)``.

    ``xdirs``/``ydirs`` are lists of direction vectors (repeat a direction
    for higher order). Third- and fourth-order terms are Richardson
    extrapolated by default.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    xdirs = [np.atleast_1d(np.asarray(d, dtype=float)) for d in xdirs]
    ydirs = [np.atleast_1d(np.asarray(d, dtype=float)) for d in ydirs]
    q = len(xdirs) + len(ydirs)
    h = _STEP[min(q, 4)] * scale
    if richardson is None:
        richardson = q >= 3
    coarse = _stencil(func, x, y, xdirs, ydirs, h)
    if not richardson:
        return float(coarse)
    fine = _stencil(func, x, y, xdirs, ydirs, h / 2.0)
    return float((4.0 * fine - coarse) / 3.0)
