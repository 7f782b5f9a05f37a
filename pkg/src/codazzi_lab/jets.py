"""Truncated multivariate Taylor arithmetic (forward-mode AD to arbitrary order).

A :class:`Jet` holds the Taylor coefficients of a function of ``nvars`` chart
variables about a base point, truncated at total degree ``order``.  The
coefficients live along axis 0 of ``coef``; every remaining axis is a batch
axis (grid points, vector components, ...) that broadcasts like numpy.

This is the multivariate generalisation of nested dual numbers: seeding the
chart variables and pushing them through arithmetic yields every mixed partial
derivative up to ``order`` exactly (to rounding).
"""
from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np


@lru_cache(maxsize=None)
def multi_indices(nvars: int, order: int) -> tuple[tuple[int, ...], ...]:
    """All multi-indices of total degree <= order, graded then lexicographic."""
    out = []
    for deg in range(order + 1):
        for combo in combinations_with_replacement(range(nvars), deg):
            m = [0] * nvars
            for a in combo:
                m[a] += 1
            out.append(tuple(m))
    return tuple(out)


@lru_cache(maxsize=None)
def _index_of(nvars: int, order: int) -> dict:
    return {m: i for i, m in enumerate(multi_indices(nvars, order))}


@lru_cache(maxsize=None)
def _product_table(nvars: int, order: int):
    """Gather indices (left, right) sorted by output slot, plus reduceat offsets."""
    mids = multi_indices(nvars, order)
    index = _index_of(nvars, order)
    triples = []
    for i, mi in enumerate(mids):
        for j, mj in enumerate(mids):
            mk = tuple(a + b for a, b in zip(mi, mj))
            if sum(mk) <= order:
                triples.append((index[mk], i, j))
    triples.sort()
    out = np.array([t[0] for t in triples])
    left = np.array([t[1] for t in triples])
    right = np.array([t[2] for t in triples])
    starts = np.flatnonzero(np.r_[True, out[1:] != out[:-1]])
    return left, right, starts


@lru_cache(maxsize=None)
def _derivative_table(nvars: int, order: int, axis: int):
    """Map coefficients of a degree-``order`` jet to those of d/du_axis (degree order-1)."""
    src_index = _index_of(nvars, order)
    dst = multi_indices(nvars, order - 1)
    src = []
    factor = []
    for m in dst:
        shifted = list(m)
        shifted[axis] += 1
        src.append(src_index[tuple(shifted)])
        factor.append(shifted[axis])
    return np.array(src), np.array(factor, dtype=float)


@lru_cache(maxsize=None)
def _truncate_table(nvars: int, order: int) -> int:
    return len(multi_indices(nvars, order))


class Jet:
    """Truncated Taylor polynomial with batched coefficients."""

    __array_priority__ = 1000

    def __init__(self, coef, nvars: int, order: int):
        coef = np.asarray(coef, dtype=float)
        if coef.shape[0] != len(multi_indices(nvars, order)):
            raise ValueError("coefficient count does not match (nvars, order)")
        self.coef = coef
        self.nvars = nvars
        self.order = order

    # -- construction -------------------------------------------------------
    @classmethod
    def constant(cls, value, nvars: int, order: int) -> "Jet":
        value = np.asarray(value, dtype=float)
        coef = np.zeros((len(multi_indices(nvars, order)),) + value.shape)
        coef[0] = value
        return cls(coef, nvars, order)

    @classmethod
    def variables(cls, point, order: int) -> list["Jet"]:
        """Seed jets for the chart coordinates at ``point`` (sequence of arrays)."""
        nvars = len(point)
        index = _index_of(nvars, order)
        seeds = []
        for a, value in enumerate(point):
            value = np.asarray(value, dtype=float)
            coef = np.zeros((len(index),) + value.shape)
            coef[0] = value
            if order >= 1:
                unit = [0] * nvars
                unit[a] = 1
                coef[index[tuple(unit)]] = 1.0
            seeds.append(cls(coef, nvars, order))
        return seeds

    @classmethod
    def from_derivatives(cls, derivs: dict, nvars: int, order: int) -> "Jet":
        """Build from a mapping multi-index -> partial derivative value."""
        mids = multi_indices(nvars, order)
        first = np.asarray(derivs[mids[0]], dtype=float)
        coef = np.zeros((len(mids),) + first.shape)
        for i, m in enumerate(mids):
            scale = math.prod(math.factorial(k) for k in m)
            coef[i] = np.asarray(derivs[m], dtype=float) / scale
        return cls(coef, nvars, order)

    @classmethod
    def stack(cls, jets, axis: int = -1) -> "Jet":
        ref = next(j for j in jets if isinstance(j, Jet))
        jets = [j if isinstance(j, Jet) else Jet.constant(j, ref.nvars, ref.order) for j in jets]
        order = min(j.order for j in jets)
        nvars = ref.nvars
        coefs = [j.truncate(order).coef for j in jets]
        bshape = np.broadcast_shapes(*(c.shape for c in coefs))
        coefs = [np.broadcast_to(c, bshape) for c in coefs]
        ax = axis if axis < 0 else axis + 1
        return cls(np.stack(coefs, axis=ax), nvars, order)

    # -- introspection ------------------------------------------------------
    @property
    def value(self) -> np.ndarray:
        return self.coef[0]

    @property
    def shape(self) -> tuple:
        return self.coef.shape[1:]

    def partial(self, m) -> np.ndarray:
        """Mixed partial derivative d^m f at the base point."""
        m = tuple(m)
        if sum(m) > self.order:
            raise ValueError(f"derivative order {sum(m)} exceeds jet order {self.order}")
        scale = math.prod(math.factorial(k) for k in m)
        return self.coef[_index_of(self.nvars, self.order)[m]] * scale

    def gradient(self) -> np.ndarray:
        """First partials, stacked on a trailing axis."""
        out = []
        for a in range(self.nvars):
            unit = [0] * self.nvars
            unit[a] = 1
            out.append(self.partial(unit))
        return np.stack(out, axis=-1)

    def truncate(self, order: int) -> "Jet":
        if order == self.order:
            return self
        if order > self.order:
            raise ValueError("cannot raise jet order")
        k = _truncate_table(self.nvars, order)
        return Jet(self.coef[:k], self.nvars, order)

    def d(self, axis: int) -> "Jet":
        """Exact derivative along a chart variable; drops one order."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        src, factor = _derivative_table(self.nvars, self.order, axis)
        fac = factor.reshape((-1,) + (1,) * (self.coef.ndim - 1))
        return Jet(self.coef[src] * fac, self.nvars, self.order - 1)

    # -- batch manipulation ---------------------------------------------------
    def __getitem__(self, idx) -> "Jet":
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.coef[(slice(None),) + idx], self.nvars, self.order)

    def sum(self, axis: int = -1) -> "Jet":
        ax = axis if axis < 0 else axis + 1
        return Jet(self.coef.sum(axis=ax), self.nvars, self.order)

    def expand_dims(self, axis: int) -> "Jet":
        ax = axis if axis < 0 else axis + 1
        return Jet(np.expand_dims(self.coef, ax), self.nvars, self.order)

    def swapaxes(self, a: int, b: int) -> "Jet":
        a = a if a < 0 else a + 1
        b = b if b < 0 else b + 1
        return Jet(np.swapaxes(self.coef, a, b), self.nvars, self.order)

    # -- arithmetic -----------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.nvars != self.nvars:
                raise ValueError("jets over different variable counts")
            order = min(self.order, other.order)
            return self.truncate(order), other.truncate(order)
        return self, None

    def __add__(self, other):
        a, b = self._coerce(other)
        if b is None:
            other = np.asarray(other, dtype=float)
            shape = (a.coef.shape[0],) + np.broadcast_shapes(a.shape, other.shape)
            coef = np.array(np.broadcast_to(a.coef, shape))
            coef[0] = coef[0] + other
            return Jet(coef, a.nvars, a.order)
        return Jet(a.coef + b.coef, a.nvars, a.order)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.coef, self.nvars, self.order)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        a, b = self._coerce(other)
        if b is None:
            return Jet(a.coef * np.asarray(other, dtype=float), a.nvars, a.order)
        left, right, starts = _product_table(a.nvars, a.order)
        if a.order == 0:
            return Jet(a.coef * b.coef, a.nvars, 0)
        prod = a.coef[left] * b.coef[right]
        return Jet(np.add.reduceat(prod, starts, axis=0), a.nvars, a.order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return Jet(self.coef / np.asarray(other, dtype=float), self.nvars, self.order)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, power):
        if isinstance(power, (int, np.integer)) and power >= 0:
            result = Jet.constant(np.ones(self.shape), self.nvars, self.order)
            base = self
            p = int(power)
            while p:
                if p & 1:
                    result = result * base
                p >>= 1
                if p:
                    base = base * base
            return result
        p = float(power)
        x0 = self.value
        derivs = [x0**p]
        coeff = 1.0
        for k in range(1, self.order + 1):
            coeff *= p - k + 1
            derivs.append(coeff * x0 ** (p - k))
        return self._compose(derivs)

    # -- elementary functions -------------------------------------------------
    def _compose(self, derivs) -> "Jet":
        """f(self) given f^(k)(x0) for k = 0..order (Taylor composition)."""
        delta = Jet(self.coef.copy(), self.nvars, self.order)
        delta.coef[0] = 0.0
        # Horner in the nilpotent increment
        k = self.order
        result = Jet.constant(derivs[k] / math.factorial(k), self.nvars, self.order)
        for k in range(self.order - 1, -1, -1):
            result = result * delta + derivs[k] / math.factorial(k)
        return result

    def reciprocal(self) -> "Jet":
        x0 = self.value
        derivs = [1.0 / x0]
        for k in range(1, self.order + 1):
            derivs.append(-k * derivs[-1] / x0)
        return self._compose(derivs)

    def sqrt(self) -> "Jet":
        return self**0.5

    def exp(self) -> "Jet":
        e = np.exp(self.value)
        return self._compose([e] * (self.order + 1))

    def log(self) -> "Jet":
        x0 = self.value
        derivs = [np.log(x0)]
        for k in range(1, self.order + 1):
            derivs.append((-1.0) ** (k - 1) * math.factorial(k - 1) / x0**k)
        return self._compose(derivs)

    def sin(self) -> "Jet":
        s, c = np.sin(self.value), np.cos(self.value)
        cycle = [s, c, -s, -c]
        return self._compose([cycle[k % 4] for k in range(self.order + 1)])

    def cos(self) -> "Jet":
        s, c = np.sin(self.value), np.cos(self.value)
        cycle = [c, -s, -c, s]
        return self._compose([cycle[k % 4] for k in range(self.order + 1)])

    def sinh(self) -> "Jet":
        s, c = np.sinh(self.value), np.cosh(self.value)
        return self._compose([s if k % 2 == 0 else c for k in range(self.order + 1)])

    def cosh(self) -> "Jet":
        s, c = np.sinh(self.value), np.cosh(self.value)
        return self._compose([c if k % 2 == 0 else s for k in range(self.order + 1)])

    def tan(self) -> "Jet":
        return self.sin() / self.cos()

    def __repr__(self) -> str:
        return f"Jet(nvars={self.nvars}, order={self.order}, batch={self.shape})"
