"""Built-in analytic immersion families.

Each family returns an `Immersion` with exact jets; curve-based cylinders and
rotational spheres live in their own modules and register here lazily.
"""

from __future__ import annotations

import numpy as np

from .calculus import Jet
from .errors import ConfigError
from .spaces import ProductChart, SpaceFormSpec
from .surface import CallableImmersion, Immersion


def _default_box(spec: SpaceFormSpec, scale: float = 1.0):
    half = 0.35 if spec.family == "CH" else 0.8
    half *= scale
    return (-half, half)


def plane_slice(spec: SpaceFormSpec, t0: float = 0.0, box=None) -> Immersion:
    """Holomorphic coordinate plane {z2 = ... = 0} x {t0} (phi-invariant)."""
    chart = ProductChart(spec)
    rng = box or _default_box(spec)

    def fn(u, v):
        rest = [0.0] * (2 * spec.n - 2)
        return [u, v, *rest, t0 + 0.0 * u]

    return CallableImmersion(chart, fn, rng, rng, isothermal=True)


def lagrangian_slice(spec: SpaceFormSpec, t0: float = 0.0, box=None) -> Immersion:
    """Sheet inside the real-points slice {y = 0} x {t0} (anti-invariant)."""
    if spec.n < 2:
        raise ConfigError("lagrangian_slice needs complex dimension n >= 2")
    chart = ProductChart(spec)
    rng = box or _default_box(spec)

    def fn(u, v):
        rest = [0.0] * (2 * spec.n - 4)
        return [u, 0.0 * u, v, 0.0 * v, *rest, t0 + 0.0 * u]

    return CallableImmersion(chart, fn, rng, rng, isothermal=False)


def vertical_sheet(spec: SpaceFormSpec, x2: float = 0.25, box=None) -> Immersion:
    """Vertical sheet in the real slice: (u, 0, x2, 0, ..., t = v)."""
    chart = ProductChart(spec)
    rng = box or _default_box(spec)

    def fn(u, v):
        if spec.n == 1:
            return [u, 0.0 * u, v]
        rest = [0.0] * (2 * spec.n - 4)
        return [u, 0.0 * u, x2 + 0.0 * u, 0.0 * u, *rest, v]

    return CallableImmersion(chart, fn, rng, rng, isothermal=False)


def bumpy_sheet(spec: SpaceFormSpec, amp: float = 0.15, box=None) -> Immersion:
    """Generic analytic non-pmc sheet; exercises full-rank generic geometry."""
    chart = ProductChart(spec)
    rng = box or _default_box(spec, scale=0.8)

    def fn(u, v):
        wiggle = amp * u.sin() * v.cos()
        if spec.n == 1:
            return [u, wiggle, v]
        rest = [0.0] * (2 * spec.n - 4)
        return [u, wiggle, v, amp * (u + v).cos(), *rest, 0.3 * v]

    return CallableImmersion(chart, fn, rng, rng, isothermal=False)


class ReparamImmersion(Immersion):
    """Affine reparametrization (u, v) -> (a u + du, a v + dv) of a base immersion."""

    def __init__(self, base: Immersion, a: float = 1.0, du: float = 0.0, dv: float = 0.0):
        super().__init__(base.chart)
        self.base = base
        self.a = float(a)
        self.du = float(du)
        self.dv = float(dv)
        (u0, u1), (v0, v1) = base.u_range, base.v_range
        self.u_range = ((u0 - du) / self.a, (u1 - du) / self.a)
        self.v_range = ((v0 - dv) / self.a, (v1 - dv) / self.a)
        self.is_isothermal_claimed = base.is_isothermal_claimed

    def chart_jets(self, u, v, order):
        inner = self.base.chart_jets(
            self.a * np.asarray(u, dtype=float) + self.du,
            self.a * np.asarray(v, dtype=float) + self.dv,
            order,
        )
        if self.a == 1.0:
            return inner
        out = []
        for j in inner:
            c = j.c.copy()
            for i, mono in enumerate(j.table.monos):
                c[i] *= self.a ** sum(mono)
            out.append(Jet(j.table, c))
        return out


_FAMILIES = {
    "plane-slice": plane_slice,
    "lagrangian-slice": lagrangian_slice,
    "vertical-sheet": vertical_sheet,
    "bumpy-sheet": bumpy_sheet,
}


def make_immersion(name: str, spec: SpaceFormSpec, params: dict = None) -> Immersion:
    params = dict(params or {})
    if name in _FAMILIES:
        return _FAMILIES[name](spec, **params)
    if name == "cylinder":
        from .curves import cylinder_immersion

        return cylinder_immersion(spec, **params)
    if name == "sphere":
        from .rotational import sphere_immersion

        return sphere_immersion(spec, **params)
    raise ConfigError(f"unknown surface family {name!r}")


def family_names():
    return sorted(_FAMILIES) + ["cylinder", "sphere"]
