"""Forward-mode Taylor (jet) arithmetic in one scalar variable.

A jet stores the coefficients of a truncated Taylor series at an expansion
point; arithmetic propagates them by the usual Cauchy-product recurrences.
Axis 0 indexes the coefficient order; trailing axes broadcast, so a jet can
carry one series per quadrature node.  Derivatives of order n are
n! * coeff[n].
"""

from __future__ import annotations

import math

import numpy as np


def _align(a: np.ndarray, b: np.ndarray):
    """Pad trailing singleton axes so node axes broadcast from the left."""
    nd = max(a.ndim, b.ndim)
    a2 = a.reshape(a.shape + (1,) * (nd - a.ndim))
    b2 = b.reshape(b.shape + (1,) * (nd - b.ndim))
    return a2, b2


def _out_shape(a: np.ndarray, b: np.ndarray):
    a, b = _align(a, b)
    trail = np.broadcast_shapes(a.shape[1:], b.shape[1:])
    return (a.shape[0],) + trail


class Jet:
    __slots__ = ("c",)

    def __init__(self, coeffs):
        self.c = np.asarray(coeffs, dtype=float)

    @property
    def order(self) -> int:
        return self.c.shape[0] - 1

    @staticmethod
    def variable(value: float, order: int) -> "Jet":
        c = np.zeros(order + 1)
        c[0] = value
        if order >= 1:
            c[1] = 1.0
        return Jet(c)

    @staticmethod
    def constant(value, order: int) -> "Jet":
        value = np.asarray(value, dtype=float)
        c = np.zeros((order + 1,) + value.shape)
        c[0] = value
        return Jet(c)

    def derivatives(self) -> np.ndarray:
        """Array of d^n/dx^n values, n = 0..order."""
        fact = np.array([math.factorial(n) for n in range(self.order + 1)])
        return self.c * fact.reshape((-1,) + (1,) * (self.c.ndim - 1))

    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        return Jet.constant(other, self.order)

    def __add__(self, other):
        o = self._coerce(other)
        a, b = _align(self.c, o.c)
        return Jet(a + b)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c)

    def __sub__(self, other):
        o = self._coerce(other)
        a, b = _align(self.c, o.c)
        return Jet(a - b)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        a, b = _align(self.c, o.c)
        out = np.zeros(_out_shape(self.c, o.c))
        for k in range(self.order + 1):
            for j in range(k + 1):
                out[k] += a[j] * b[k - j]
        return Jet(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        a, b = _align(self.c, o.c)
        out = np.zeros(_out_shape(self.c, o.c))
        out[0] = a[0] / b[0]
        for k in range(1, self.order + 1):
            acc = a[k] + np.zeros_like(out[0])
            for j in range(k):
                acc = acc - out[j] * b[k - j]
            out[k] = acc / b[0]
        return Jet(out)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def sqrt(self):
        out = np.zeros_like(self.c)
        out[0] = np.sqrt(self.c[0])
        for k in range(1, self.order + 1):
            acc = self.c[k].copy() if isinstance(self.c[k], np.ndarray) else self.c[k]
            for j in range(1, k):
                acc = acc - out[j] * out[k - j]
            out[k] = acc / (2.0 * out[0])
        return Jet(out)

    def log(self):
        out = np.zeros_like(self.c)
        out[0] = np.log(self.c[0])
        for k in range(1, self.order + 1):
            acc = k * self.c[k]
            for j in range(1, k):
                acc = acc - j * out[j] * self.c[k - j]
            out[k] = acc / (k * self.c[0])
        return Jet(out)

    def powi(self, p: int):
        """Integer power by repeated squaring (p may be negative)."""
        if p < 0:
            return 1.0 / self.powi(-p)
        result = Jet.constant(np.ones(self.c.shape[1:]), self.order)
        base = self
        while p:
            if p & 1:
                result = result * base
            base = base * base
            p >>= 1
        return result
