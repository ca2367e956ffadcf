"""Forward-mode automatic differentiation with vector-valued dual parts.

A :class:`Dual` carries a value (scalar or ndarray of shape ``S``) and a
gradient of shape ``S + (n,)`` with respect to ``n`` seed variables.  The
module-level functions (``exp``, ``log``, ...) accept plain floats/arrays or
duals, so numerical kernels can be written once and differentiated by
passing seeded inputs.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Dual",
    "seed",
    "value",
    "gradient",
    "exp",
    "log",
    "log1p",
    "expm1",
    "sqrt",
    "dsum",
    "elementwise",
    "is_dual",
]


def _expand(v):
    return np.asarray(v, dtype=float)[..., None]


class Dual:
    """Value plus gradient; arithmetic propagates the chain rule."""

    __slots__ = ("val", "grad")
    __array_priority__ = 1000

    def __init__(self, val, grad):
        self.val = np.asarray(val, dtype=float) if np.ndim(val) else float(val)
        self.grad = np.asarray(grad, dtype=float)

    @property
    def nvars(self) -> int:
        return self.grad.shape[-1]

    @property
    def shape(self):
        return np.shape(self.val)

    def __repr__(self) -> str:
        return f"Dual({self.val!r}, grad={self.grad!r})"

    def _coerce(self, other) -> "Dual":
        if isinstance(other, Dual):
            return other
        o = np.asarray(other, dtype=float)
        return Dual(other, np.zeros(o.shape + (self.nvars,)))

    def __add__(self, other):
        if not isinstance(other, Dual):
            return Dual(self.val + other, self.grad + np.zeros(np.shape(other) + (1,)))
        return Dual(self.val + other.val, self.grad + other.grad)

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.val, -self.grad)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Dual):
            return Dual(self.val * other, self.grad * _expand(other))
        return Dual(
            self.val * other.val,
            self.grad * _expand(other.val) + _expand(self.val) * other.grad,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Dual):
            return Dual(self.val / other, self.grad / _expand(other))
        q = self.val / other.val
        return Dual(q, (self.grad - _expand(q) * other.grad) / _expand(other.val))

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, p):
        if isinstance(p, Dual):
            return exp(p * log(self))
        v = np.asarray(self.val, dtype=float)
        return Dual(v**p, _expand(p * v ** (p - 1)) * self.grad)

    def __getitem__(self, idx):
        return Dual(np.asarray(self.val)[idx], self.grad[idx])

    def __len__(self):
        return len(self.val)

    # comparisons act on the value only
    def __lt__(self, other):
        return self.val < value(other)

    def __le__(self, other):
        return self.val <= value(other)

    def __gt__(self, other):
        return self.val > value(other)

    def __ge__(self, other):
        return self.val >= value(other)

    def __float__(self):
        return float(self.val)


def is_dual(x) -> bool:
    return isinstance(x, Dual)


def seed(x) -> Dual:
    """Independent variables: ``x[i]`` gets gradient ``e_i``."""
    x = np.asarray(x, dtype=float)
    return Dual(x, np.eye(x.size).reshape(x.shape + (x.size,)))


def value(x):
    return x.val if isinstance(x, Dual) else x


def gradient(x):
    return x.grad if isinstance(x, Dual) else None


def elementwise(x, f, df):
    """Apply ``f`` with known derivative ``df`` (both evaluated on values)."""
    if isinstance(x, Dual):
        return Dual(f(x.val), _expand(df(x.val)) * x.grad)
    return f(x)


def exp(x):
    if isinstance(x, Dual):
        e = np.exp(x.val)
        return Dual(e, _expand(e) * x.grad)
    return np.exp(x)


def log(x):
    return elementwise(x, np.log, lambda v: 1.0 / v)


def log1p(x):
    return elementwise(x, np.log1p, lambda v: 1.0 / (1.0 + v))


def expm1(x):
    return elementwise(x, np.expm1, np.exp)


def sqrt(x):
    return elementwise(x, np.sqrt, lambda v: 0.5 / np.sqrt(v))


def dsum(x, axis=None):
    """Sum over value axes (``axis`` refers to the value shape)."""
    if not isinstance(x, Dual):
        return np.sum(x, axis=axis)
    nd = np.ndim(x.val)
    if axis is None:
        axes = tuple(range(nd))
    else:
        axes = tuple(a % nd for a in np.atleast_1d(axis))
    return Dual(np.sum(x.val, axis=axes), np.sum(x.grad, axis=axes))
