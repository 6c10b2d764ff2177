"""Gluing finite joint distributions along a shared middle axis."""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ValidationError

MIDDLE_TOL = 1e-10


def _is_exact(mass):
    return mass.dtype == object


@dataclass(frozen=True, eq=False)
class FiniteJoint:
    """A pmf on a product of 2 or 3 finite supports.

    ``mass`` may be a float array or an object array of Fractions; the
    latter keeps every operation exact.
    """

    axes: tuple
    mass: np.ndarray

    def __post_init__(self):
        mass = np.asarray(self.mass)
        if mass.dtype != object:
            mass = mass.astype(float)
        axes = tuple(list(a) for a in self.axes)
        if len(axes) not in (2, 3) or mass.ndim != len(axes):
            raise ValidationError("a joint needs 2 or 3 axes matching the mass array")
        if mass.shape != tuple(len(a) for a in axes):
            raise ValidationError("mass shape does not match the axis supports")
        if np.any(mass < 0):
            raise ValidationError("mass must be nonnegative")
        total = mass.sum()
        if _is_exact(mass):
            if total != 1:
                raise ValidationError("exact mass must sum to 1")
        elif abs(total - 1.0) > 1e-12:
            raise ValidationError("mass must sum to 1")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "mass", mass)

    def marginal(self, keep):
        """Projection onto the axes listed in ``keep`` (in that order)."""
        keep = tuple(keep)
        drop = tuple(i for i in range(self.mass.ndim) if i not in keep)
        m = self.mass.sum(axis=drop) if drop else self.mass
        order = sorted(keep)
        m = np.moveaxis(m, [order.index(k) for k in keep], range(len(keep)))
        if len(keep) == 1:
            return m
        return FiniteJoint(tuple(self.axes[k] for k in keep), m)


def glue_finite(p12, p23, tol=MIDDLE_TOL):
    """Three-axis joint with 12-marginal ``p12``, 23-marginal ``p23`` and axes 1, 3
    conditionally independent given axis 2.

    Middle atoms of zero probability carry no mass and are skipped.
    """
    if len(p12.axes) != 2 or len(p23.axes) != 2:
        raise ValidationError("glue_finite expects two-axis joints")
    if list(p12.axes[1]) != list(p23.axes[0]):
        raise ValidationError("middle supports differ")
    a = p12.mass
    b = p23.mass
    exact = _is_exact(a) and _is_exact(b)
    if not exact:
        a = a.astype(float)
        b = b.astype(float)
    mid12 = a.sum(axis=0)
    mid23 = b.sum(axis=1)
    if exact:
        if np.any(mid12 != mid23):
            raise ValidationError("middle marginals of the two joints disagree")
    elif np.max(np.abs(mid12 - mid23)) > tol:
        raise ValidationError("middle marginals of the two joints disagree")
    out = np.zeros(a.shape + (b.shape[1],), dtype=object if exact else float)
    if exact:
        out[...] = Fraction(0)
    for j in range(a.shape[1]):
        if mid12[j] == 0:
            continue
        out[:, j, :] = np.multiply.outer(a[:, j], b[j, :]) / mid12[j]
    return FiniteJoint((p12.axes[0], p12.axes[1], p23.axes[1]), out)


def conditional_independence_gap(p123):
    """``max |P(i,j,k) P(j) - P(i,j) P(j,k)|``, zero iff axes 1, 3 are independent given 2."""
    m = p123.mass
    pj = m.sum(axis=(0, 2))
    pij = m.sum(axis=2)
    pjk = m.sum(axis=0)
    lhs = m * pj[None, :, None]
    rhs = pij[:, :, None] * pjk[None, :, :]
    return abs(lhs - rhs).max()


def alternating_sign_harness(length, seed):
    """X, Y independent fair +-1 coins and ``Z_t = (-1)^t X_t Y_t``.

    Each pair (X, Z) and (Y, Z) is stationary, yet ``X_t Y_t Z_t = (-1)^t``
    so the triple is not. Returns the paths and whether the identity holds
    at every t.
    """
    if length < 1:
        raise ValidationError("length must be >= 1")
    rng = np.random.default_rng(seed)
    X = rng.choice(np.array([-1, 1]), size=length)
    Y = rng.choice(np.array([-1, 1]), size=length)
    sign = np.where(np.arange(length) % 2 == 0, 1, -1)
    Z = sign * X * Y
    product = X * Y * Z
    return {"X": X, "Y": Y, "Z": Z, "product": product, "holds": bool(np.array_equal(product, sign))}
