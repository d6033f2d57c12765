"""Finite differences on local sample lattices.

Every sample point (q1, q2, u) gets a small tensor lattice of offsets
``k*h`` around it.  Scalar fields are stored as ``(B, n1, n2, n3)`` arrays
(B samples) and wrapped in :class:`Patch`; a derivative along one axis
applies the five-point stencil ``(f[-2] - 8 f[-1] + 8 f[1] - f[2]) / 12h``
(one Richardson level over central differences at h and 2h) and trims two
lattice points at each end of that axis.  Binary operations centre-crop
both operands to their common extent, so nested derivatives compose
without bookkeeping.
"""

from __future__ import annotations

import numpy as np

Q1, Q2, U = 0, 1, 2


def lattice_points(q1, q2, u, h, half_q, half_u):
    """Lattice coordinates, each of shape (B, 2*half_q+1, 2*half_q+1, 2*half_u+1)."""
    q1, q2, u = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (q1, q2, u))
    kq = np.arange(-half_q, half_q + 1) * h
    ku = np.arange(-half_u, half_u + 1) * h
    Q1g = q1[:, None, None, None] + kq[None, :, None, None] + 0 * ku[None, None, None, :]
    Q2g = q2[:, None, None, None] + kq[None, None, :, None] + 0 * ku[None, None, None, :]
    Ug = u[:, None, None, None] + ku[None, None, None, :] + 0 * kq[None, :, None, None]
    shape = (q1.shape[0], kq.size, kq.size, ku.size)
    return (np.broadcast_to(Q1g, shape).copy(), np.broadcast_to(Q2g, shape).copy(),
            np.broadcast_to(Ug, shape).copy())


def _crop_to(a, shape):
    sl = [slice(None)]
    for n, m in zip(a.shape[1:], shape):
        d = n - m
        if d < 0 or d % 2:
            raise ValueError(f"cannot crop lattice extent {n} to {m}")
        sl.append(slice(d // 2, n - d // 2))
    return a[tuple(sl)]


class Patch:
    """A scalar field sampled on per-sample lattices with spacing ``h``."""

    __slots__ = ("a", "h")

    def __init__(self, a, h):
        self.a = a
        self.h = h

    @property
    def extent(self):
        return self.a.shape[1:]

    def _binary(self, other, fn):
        if isinstance(other, Patch):
            shape = tuple(min(x, y) for x, y in zip(self.extent, other.extent))
            return Patch(fn(_crop_to(self.a, shape), _crop_to(other.a, shape)), self.h)
        other = np.asarray(other)
        if other.ndim == 1:  # per-sample scalar
            other = other[:, None, None, None]
        return Patch(fn(self.a, other), self.h)

    def __add__(self, o):
        return self._binary(o, np.add)

    def __radd__(self, o):
        return self._binary(o, lambda x, y: y + x)

    def __sub__(self, o):
        return self._binary(o, np.subtract)

    def __rsub__(self, o):
        return self._binary(o, lambda x, y: y - x)

    def __mul__(self, o):
        return self._binary(o, np.multiply)

    def __rmul__(self, o):
        return self._binary(o, lambda x, y: y * x)

    def __truediv__(self, o):
        return self._binary(o, np.divide)

    def __rtruediv__(self, o):
        return self._binary(o, lambda x, y: y / x)

    def __neg__(self):
        return Patch(-self.a, self.h)

    def __pow__(self, p):
        return Patch(self.a ** p, self.h)

    def map(self, fn):
        return Patch(fn(self.a), self.h)

    def d(self, axis):
        """Derivative along lattice axis 0 (q1), 1 (q2) or 2 (u)."""
        ax = axis + 1
        n = self.a.shape[ax]
        if n < 5:
            raise ValueError("lattice too small for another derivative")

        def take(lo):
            sl = [slice(None)] * 4
            sl[ax] = slice(lo, n - 4 + lo)
            return self.a[tuple(sl)]

        return Patch((take(0) - 8.0 * take(1) + 8.0 * take(3) - take(4)) / (12.0 * self.h), self.h)

    def center(self):
        i, j, k = (n // 2 for n in self.extent)
        return self.a[:, i, j, k]

    def crop(self, shape):
        return Patch(_crop_to(self.a, shape), self.h)


def lie(field, scalar):
    """Lie derivative of ``scalar`` along a 3-component field ``(X_q1, X_q2, X_u)``; None skips a component."""
    out = None
    for axis, comp in enumerate(field):
        if comp is None:
            continue
        term = comp * scalar.d(axis)
        out = term if out is None else out + term
    return out


def bracket(X, Y):
    """Lie bracket ``[X, Y]^i = X^j d_j Y^i - Y^j d_j X^i`` of 3-component lattice fields."""
    out = []
    for i in range(3):
        out.append(lie(X, Y[i]) - lie(Y, X[i]))
    return out
