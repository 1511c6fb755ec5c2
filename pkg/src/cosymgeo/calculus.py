"""Exact differentiation engine: truncated multivariate Taylor (jet) arithmetic.

Jets carry Taylor coefficients up to a fixed order in 1..8 variables.  The
coefficient of the monomial ``prod(x_i**a_i)`` is stored once, so mixed
partials are symmetric by construction.  Coefficients may be scalars or
numpy arrays of any common broadcast shape, which makes grid-batched
evaluation a plain jet evaluation with array-valued seeds.

Central finite differences are kept as an independent cross-check oracle
(`finite_difference_jet`); they never feed the primary computations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product as _iproduct
from typing import Callable, Sequence

import numpy as np

from .errors import NonAnalyticError

MAX_ORDER = 3


@lru_cache(maxsize=None)
def jet_table(nvars: int, order: int):
    """Monomial basis and truncated multiplication table for (nvars, order)."""
    monos = []
    for total in range(order + 1):
        level = [m for m in _iproduct(range(total + 1), repeat=nvars) if sum(m) == total]
        level.sort(reverse=True)
        monos.extend(level)
    index = {m: i for i, m in enumerate(monos)}
    prod = []
    for ia, ma in enumerate(monos):
        for ib, mb in enumerate(monos):
            if sum(ma) + sum(mb) <= order:
                mc = tuple(a + b for a, b in zip(ma, mb))
                prod.append((ia, ib, index[mc]))
    return _JetTable(nvars, order, tuple(monos), index, tuple(prod))


@dataclass(frozen=True)
class _JetTable:
    nvars: int
    order: int
    monos: tuple
    index: dict
    prod: tuple

    @property
    def size(self) -> int:
        return len(self.monos)


class Jet:
    """Truncated Taylor polynomial with scalar- or array-valued coefficients."""

    __slots__ = ("table", "c")

    def __init__(self, table, coeffs):
        self.table = table
        self.c = coeffs

    # -- constructors -------------------------------------------------------

    @staticmethod
    def constant(value, nvars: int, order: int) -> "Jet":
        t = jet_table(nvars, order)
        value = np.asarray(value, dtype=float)
        c = np.zeros((t.size,) + value.shape)
        c[0] = value
        return Jet(t, c)

    @staticmethod
    def variable(value, var: int, nvars: int, order: int) -> "Jet":
        t = jet_table(nvars, order)
        value = np.asarray(value, dtype=float)
        c = np.zeros((t.size,) + value.shape)
        c[0] = value
        seed = tuple(1 if i == var else 0 for i in range(nvars))
        c[t.index[seed]] = 1.0
        return Jet(t, c)

    @staticmethod
    def from_taylor(table_or_pair, coeff_map: dict) -> "Jet":
        """Build a jet from {multi-index: taylor coefficient} (missing = 0)."""
        t = table_or_pair if isinstance(table_or_pair, _JetTable) else jet_table(*table_or_pair)
        shape = np.broadcast_shapes(*(np.shape(v) for v in coeff_map.values())) if coeff_map else ()
        c = np.zeros((t.size,) + shape)
        for m, v in coeff_map.items():
            c[t.index[tuple(m)]] = v
        return Jet(t, c)

    # -- inspection ---------------------------------------------------------

    @property
    def value(self):
        return self.c[0]

    def coeff(self, mono):
        """Taylor coefficient of the given monomial."""
        return self.c[self.table.index[tuple(mono)]]

    def deriv(self, mono):
        """Partial derivative d^|mono| / prod dx_i^{mono_i} at the base point."""
        fac = 1.0
        for a in mono:
            fac *= math.factorial(a)
        return self.coeff(mono) * fac

    def truncate(self, order: int) -> "Jet":
        if order == self.table.order:
            return self
        if order > self.table.order:
            raise ValueError("cannot extend a jet to higher order")
        t = jet_table(self.table.nvars, order)
        c = np.zeros((t.size,) + self.c.shape[1:])
        for i, m in enumerate(t.monos):
            c[i] = self.c[self.table.index[m]]
        return Jet(t, c)

    def partial(self, var: int) -> "Jet":
        """Jet of the partial derivative with respect to variable `var`
        (one order lower, exact)."""
        t = jet_table(self.table.nvars, self.table.order - 1)
        c = np.zeros((t.size,) + self.c.shape[1:])
        for i, m in enumerate(t.monos):
            shifted = tuple(a + (1 if v == var else 0) for v, a in enumerate(m))
            c[i] = self.c[self.table.index[shifted]] * (m[var] + 1)
        return Jet(t, c)

    # -- arithmetic ---------------------------------------------------------

    def _align(self, other):
        if isinstance(other, Jet):
            if other.table is self.table:
                return self, other
            if other.table.nvars != self.table.nvars:
                raise ValueError("jet variable-count mismatch")
            order = min(self.table.order, other.table.order)
            return self.truncate(order), other.truncate(order)
        return self, Jet.constant(other, self.table.nvars, self.table.order)

    @staticmethod
    def _pad_pair(ac, bc):
        # Value shapes broadcast numpy-style; padding keeps the leading
        # monomial axis out of the broadcast.
        nd = max(ac.ndim, bc.ndim)
        if ac.ndim < nd:
            ac = ac.reshape(ac.shape[:1] + (1,) * (nd - ac.ndim) + ac.shape[1:])
        if bc.ndim < nd:
            bc = bc.reshape(bc.shape[:1] + (1,) * (nd - bc.ndim) + bc.shape[1:])
        return ac, bc

    def __add__(self, other):
        a, b = self._align(other)
        ac, bc = Jet._pad_pair(a.c, b.c)
        return Jet(a.table, ac + bc)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self._align(other)
        ac, bc = Jet._pad_pair(a.c, b.c)
        return Jet(a.table, ac - bc)

    def __rsub__(self, other):
        a, b = self._align(other)
        ac, bc = Jet._pad_pair(a.c, b.c)
        return Jet(a.table, bc - ac)

    def __neg__(self):
        return Jet(self.table, -self.c)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            c = self.c
            if other.ndim > c.ndim - 1:
                c = c.reshape(c.shape[:1] + (1,) * (other.ndim - (c.ndim - 1)) + c.shape[1:])
            return Jet(self.table, c * other)
        a, b = self._align(other)
        t = a.table
        ac, bc = Jet._pad_pair(a.c, b.c)
        shape = np.broadcast_shapes(ac.shape[1:], bc.shape[1:])
        out = np.zeros((t.size,) + shape)
        for ia, ib, ic in t.prod:
            out[ic] += ac[ia] * bc[ib]
        return Jet(t, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.table, self.c / np.asarray(other, dtype=float))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise TypeError("jet powers must be non-negative integers")
        out = Jet.constant(np.ones(self.c.shape[1:]), self.table.nvars, self.table.order)
        for _ in range(k):
            out = out * self
        return out

    def compose_series(self, taylor_coeffs: Sequence) -> "Jet":
        """Evaluate sum_k a_k (self - value)^k by Horner; a_k = f^(k)(value)/k!."""
        delta = Jet(self.table, self.c.copy())
        delta.c[0] = np.zeros_like(delta.c[0])
        out = Jet.constant(taylor_coeffs[-1], self.table.nvars, self.table.order)
        for a in reversed(taylor_coeffs[:-1]):
            out = out * delta + a
        return out

    def reciprocal(self) -> "Jet":
        v = np.asarray(self.value, dtype=float)
        if np.any(v == 0.0):
            raise NonAnalyticError("division by a jet with zero value")
        inv = 1.0 / v
        coeffs = [inv]
        for _ in range(self.table.order):
            coeffs.append(-coeffs[-1] * inv)
        return self.compose_series(coeffs)

    def sqrt(self) -> "Jet":
        v = np.asarray(self.value, dtype=float)
        if np.any(v <= 0.0):
            raise NonAnalyticError("sqrt of a jet with non-positive value")
        s = np.sqrt(v)
        coeffs = [s]
        fac, power = 1.0, 0.5
        for k in range(1, self.table.order + 1):
            fac *= power / k
            power -= 1.0
            coeffs.append(fac * s / v**k)
        return self.compose_series(coeffs)

    def sin(self) -> "Jet":
        v = np.asarray(self.value, dtype=float)
        cyc = [np.sin(v), np.cos(v), -np.sin(v), -np.cos(v)]
        coeffs = [cyc[k % 4] / math.factorial(k) for k in range(self.table.order + 1)]
        return self.compose_series(coeffs)

    def cos(self) -> "Jet":
        v = np.asarray(self.value, dtype=float)
        cyc = [np.cos(v), -np.sin(v), -np.cos(v), np.sin(v)]
        coeffs = [cyc[k % 4] / math.factorial(k) for k in range(self.table.order + 1)]
        return self.compose_series(coeffs)

    def exp(self) -> "Jet":
        e = np.exp(np.asarray(self.value, dtype=float))
        coeffs = [e / math.factorial(k) for k in range(self.table.order + 1)]
        return self.compose_series(coeffs)

    def log(self) -> "Jet":
        v = np.asarray(self.value, dtype=float)
        if np.any(v <= 0.0):
            raise NonAnalyticError("log of a jet with non-positive value")
        coeffs = [np.log(v)]
        for k in range(1, self.table.order + 1):
            coeffs.append((-1.0) ** (k + 1) / (k * v**k))
        return self.compose_series(coeffs)

    def __repr__(self):
        return f"Jet(nvars={self.table.nvars}, order={self.table.order}, value={self.value!r})"


def variables(values: Sequence, order: int):
    """Seed one jet variable per entry of `values` (scalars or arrays)."""
    n = len(values)
    return [Jet.variable(v, i, n, order) for i, v in enumerate(values)]


# -- jets of parametrized maps ----------------------------------------------


@dataclass
class MapJet:
    """Per-coordinate jets of a map from a 1- or 2-parameter domain."""

    coords: list
    params: tuple
    order: int

    @property
    def nvars(self) -> int:
        return self.coords[0].table.nvars

    def values(self):
        return np.stack([c.value for c in self.coords])

    def deriv(self, mono):
        return np.stack([c.deriv(mono) for c in self.coords])


def jet_eval(mapping, params: Sequence[float], order: int) -> MapJet:
    """Exact jets of `mapping` at `params`.

    `mapping` is either a callable acting on a list of jets, or an object
    exposing ``chart_jets(u, v, order)`` (the immersion protocol).
    """
    if order not in (1, 2, 3):
        raise ValueError("jet order must be 1, 2 or 3")
    if hasattr(mapping, "chart_jets"):
        u, v = params
        coords = mapping.chart_jets(np.asarray(u, dtype=float), np.asarray(v, dtype=float), order)
    else:
        coords = mapping(variables(list(params), order))
    return MapJet(list(coords), tuple(params), order)


# -- finite-difference oracle ------------------------------------------------

# 4th-order-accurate central stencils.  The step must grow with the derivative
# order: at h=1e-5 the rounding term eps/h^k already exceeds 1e-6 for k >= 2.
_FD_STENCILS = {
    0: ((0,), (1.0,)),
    1: ((-2, -1, 1, 2), (1 / 12, -2 / 3, 2 / 3, -1 / 12)),
    2: ((-2, -1, 0, 1, 2), (-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12)),
    3: ((-3, -2, -1, 1, 2, 3), (1 / 8, -1.0, 13 / 8, -13 / 8, 1.0, -1 / 8)),
}
FD_STEPS = {0: 0.0, 1: 1e-5, 2: 1e-3, 3: 5e-3}


def finite_difference_partial(f: Callable, params: Sequence[float], mono, steps=None):
    """Central-difference estimate of the partial derivative `mono` of f.

    f maps a tuple of parameter values to a float or ndarray.  Mixed partials
    use tensor products of 1-D stencils; every participating axis uses the
    step of the total derivative order, which keeps the rounding term at
    eps/h^total instead of blowing up on mixed monomials.
    """
    steps = dict(FD_STEPS, **(steps or {}))
    total = sum(mono)
    axes = [(_FD_STENCILS[k], steps[total] if k else 0.0) for k in mono]
    total = None
    for combo in _iproduct(*[range(len(st[0][0])) for st in axes]):
        pt = list(params)
        w = 1.0
        for ax, ci in enumerate(combo):
            (offsets, weights), h = axes[ax]
            pt[ax] = pt[ax] + offsets[ci] * h
            w *= weights[ci] / (h ** mono[ax] if mono[ax] else 1.0)
        val = w * np.asarray(f(tuple(pt)), dtype=float)
        total = val if total is None else total + val
    return total


def finite_difference_jet(f: Callable, params: Sequence[float], order: int, steps=None) -> dict:
    """All partials of f up to `order`, keyed by multi-index, via stencils."""
    nvars = len(params)
    out = {}
    for mono in jet_table(nvars, order).monos:
        out[mono] = finite_difference_partial(f, params, mono, steps=steps)
    return out


# -- covariant derivatives along maps ----------------------------------------


def covariant_derivative_along(chart, map_jet: MapJet, field_jets: Sequence[Jet], direction):
    """Ambient covariant derivative of a vector field along a parametrized map.

    D_X V = dV(X) + Gamma(df(X), V) evaluated at the map's base point, where X
    is the tangent vector with parameter-space components `direction`.
    """
    if map_jet.order < 1:
        raise ValueError("need at least order-1 jets of the map")
    d = chart.dim
    direction = np.asarray(direction, dtype=float)
    gamma = chart.christoffel_values(map_jet.values().T.reshape(-1, d))
    gamma = gamma.reshape((d, d, d) + np.shape(map_jet.coords[0].value))
    nv = map_jet.nvars
    dV = 0.0
    dfX = 0.0
    for ax in range(nv):
        mono = tuple(1 if i == ax else 0 for i in range(nv))
        dV = dV + direction[ax] * np.stack([c.deriv(mono) for c in field_jets])
        dfX = dfX + direction[ax] * map_jet.deriv(mono)
    V = np.stack([c.value for c in field_jets])
    corr = np.einsum("kij...,i...,j...->k...", gamma, dfX, V)
    return dV + corr
