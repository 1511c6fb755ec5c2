"""Quadratic forms on immersed surfaces and their dbar (holomorphicity)
residuals in isothermal coordinates.

The two forms evaluated on the complex tangent Z = (d_u - i d_v)/sqrt(2)
(complex-bilinear extension of all inner products):

    Q(X,Y)  = 8|H|^2 <sigma(X,Y), H> - rho |H|^2 eta(X) eta(Y)
              + 3 rho <phi X, H> <phi Y, H>
    Q'(X,Y) = 8 <sigma(X,Y), H> - rho eta(X) eta(Y)

The dbar operator is applied to the complex scalar field Q(Z,Z) by 4th-order
grid stencils, deliberately independent of the jet machinery it checks.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import GridError, NotIsothermalError
from .spaces import ProductChart, SpaceFormSpec
from .surface import ISOTHERMAL_RTOL, Immersion, SurfaceGrid, param_grid

SQRT2 = np.sqrt(2.0)


@dataclass
class IsothermalFrame:
    lambda2: float
    Z: np.ndarray      # complex tangent vector, shape (d,), dtype complex
    Zbar: np.ndarray


@dataclass
class QValue:
    q: complex
    qprime: complex
    at: tuple


@dataclass
class DbarResult:
    raw: float
    normalized: float
    scale: float
    argmax: tuple
    field: np.ndarray          # |dbar Q| with nan on excluded points
    q_field: np.ndarray        # complex Q(Z,Z) over the grid


def _require_isothermal(sg: SurfaceGrid):
    Ev, Fv, Gv = sg.E.value, sg.F.value, sg.G.value
    if np.any(np.abs(Ev - Gv) + np.abs(Fv) > ISOTHERMAL_RTOL * np.abs(Ev)):
        raise NotIsothermalError(
            "Q evaluation requires isothermal parameters; use a built-in "
            "isothermal family (vertical cylinder, rotational sphere, "
            "holomorphic slice)"
        )


def _grid_for(spec, imm, grid, order=2) -> SurfaceGrid:
    if isinstance(grid, SurfaceGrid):
        return grid
    if isinstance(grid, int) or (isinstance(grid, tuple) and all(isinstance(x, int) for x in grid)):
        u, v = param_grid(imm, grid)
    else:
        u, v = grid
    return SurfaceGrid(imm, u, v, order=order)


def isothermal_frame(spec, imm: Immersion, params) -> IsothermalFrame:
    sg = SurfaceGrid(imm, np.array([params[0]]), np.array([params[1]]), order=1, mesh=False)
    _require_isothermal(sg)
    fu = sg.vals(sg.fu)[:, 0]
    fv = sg.vals(sg.fv)[:, 0]
    Z = (fu - 1j * fv) / SQRT2
    return IsothermalFrame(lambda2=float(sg.E.value[0]), Z=Z, Zbar=np.conj(Z))


def q_fields(spec, sg: SurfaceGrid):
    """Q(Z,Z) and Q'(Z,Z) over the batch; also returns |H|^2 and lambda^2."""
    _require_isothermal(sg)
    rho = spec.rho if isinstance(spec, SpaceFormSpec) else spec.spec.rho
    chart = ProductChart(spec) if isinstance(spec, SpaceFormSpec) else spec
    g = sg.metric_vals()
    fu = sg.vals(sg.fu)
    fv = sg.vals(sg.fv)
    s_uu = sg.vals(sg.sigma_uu)
    s_uv = sg.vals(sg.sigma_uv)
    s_vv = sg.vals(sg.sigma_vv)
    H = sg.vals(sg.H)
    h2 = np.einsum("nij,in,jn->n", g, H, H)

    sigZZ = 0.5 * (s_uu - s_vv) - 1j * s_uv
    sig_h = np.einsum("nij,in,jn->n", g, sigZZ, H.astype(complex))
    etaZ = (fu[-1] - 1j * fv[-1]) / SQRT2
    J = chart.phi_matrix()
    phiH_u = np.einsum("nij,in,jn->n", g, np.einsum("ab,bn->an", J, fu), H)
    phiH_v = np.einsum("nij,in,jn->n", g, np.einsum("ab,bn->an", J, fv), H)
    phiZ_H = (phiH_u - 1j * phiH_v) / SQRT2

    q = 8.0 * h2 * sig_h - rho * h2 * etaZ**2 + 3.0 * rho * phiZ_H**2
    qp = 8.0 * sig_h - rho * etaZ**2
    return q, qp, h2, sg.E.value


def q_value(spec, imm: Immersion, params) -> QValue:
    sg = SurfaceGrid(imm, np.array([params[0]]), np.array([params[1]]), order=2, mesh=False)
    q, qp, _, _ = q_fields(spec, sg)
    return QValue(q=complex(q[0]), qprime=complex(qp[0]), at=tuple(params))


def dbar_field(field: np.ndarray, du: float, dv: float, periodic_v: bool = False) -> np.ndarray:
    """Zhat f = (d_u f + i d_v f)/sqrt(2) by 4th-order central stencils.

    Non-periodic margins come back as nan.
    """
    f = np.asarray(field)
    out_u = np.full_like(f, np.nan, dtype=complex)
    out_v = np.full_like(f, np.nan, dtype=complex)
    out_u[2:-2, :] = (-f[4:, :] + 8 * f[3:-1, :] - 8 * f[1:-3, :] + f[:-4, :]) / (12 * du)
    if periodic_v:
        fr = np.concatenate([f[:, -2:], f, f[:, :2]], axis=1)
        out_v[:, :] = (-fr[:, 4:] + 8 * fr[:, 3:-1] - 8 * fr[:, 1:-3] + fr[:, :-4]) / (12 * dv)
    else:
        out_v[:, 2:-2] = (-f[:, 4:] + 8 * f[:, 3:-1] - 8 * f[:, 1:-3] + f[:, :-4]) / (12 * dv)
    return (out_u + 1j * out_v) / SQRT2


def dbar_residual(
    spec,
    imm: Immersion,
    grid=48,
    which: str = "Q",
    periodic_v: bool = False,
    mask: Optional[np.ndarray] = None,
) -> DbarResult:
    """max |Zhat(Q(Z,Z))| over the interior grid, raw and normalized.

    `mask` (same shape as the grid) excludes points whose value should not be
    reported (pole collars, chart-graze bands); stencils touching excluded
    points are dropped as well.
    """
    sg = _grid_for(spec, imm, grid, order=2)
    nu, nv = sg.grid_shape
    if nu - 4 < 16 or (not periodic_v and nv - 4 < 16) or (periodic_v and nv < 8):
        raise GridError("grid too coarse for dbar stencils (< 16 interior points per axis)")
    q, qp, h2, _ = q_fields(spec, sg)
    fld = sg.reshape(q if which == "Q" else qp)
    du = float(sg.u[1] - sg.u[0])
    dv = float(sg.v[1] - sg.v[0])
    dbar = dbar_field(fld, du, dv, periodic_v=periodic_v)
    mag = np.abs(dbar)
    if mask is not None:
        # drop any stencil whose 2-cell neighborhood touches a masked point
        bad = ~np.asarray(mask, dtype=bool)
        grow = bad.copy()
        for shift in (1, 2):
            grow[shift:, :] |= bad[:-shift, :]
            grow[:-shift, :] |= bad[shift:, :]
            grow[:, shift:] |= bad[:, :-shift]
            grow[:, :-shift] |= bad[:, shift:]
        mag = np.where(grow, np.nan, mag)
    valid = np.isfinite(mag)
    if not np.any(valid):
        raise GridError("no interior points left after masking")
    flat = np.where(valid, mag, -np.inf).ravel()
    idx = int(np.argmax(flat))
    raw = float(flat[idx])
    qabs = np.abs(fld)
    if mask is not None:
        qabs = np.where(np.asarray(mask, bool), qabs, 0.0)
    scale = float(np.max(qabs) + np.max(np.where(np.isfinite(h2), h2, 0.0)) ** 2)
    iu, iv = np.unravel_index(idx, mag.shape)
    return DbarResult(
        raw=raw,
        normalized=raw / scale if scale > 0 else raw,
        scale=scale,
        argmax=(float(sg.u[iu]), float(sg.v[iv])),
        field=mag,
        q_field=fld,
    )


def dump_q_csv(path, spec, imm: Immersion, grid=48, periodic_v: bool = False):
    """Per-grid-point CSV: u, v, Re/Im of Q and Q', |dbar Q|, |dbar Q'|."""
    sg = _grid_for(spec, imm, grid, order=2)
    q, qp, _, _ = q_fields(spec, sg)
    qf = sg.reshape(q)
    qpf = sg.reshape(qp)
    du = float(sg.u[1] - sg.u[0])
    dv = float(sg.v[1] - sg.v[0])
    dq = np.abs(dbar_field(qf, du, dv, periodic_v))
    dqp = np.abs(dbar_field(qpf, du, dv, periodic_v))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["u", "v", "re_q", "im_q", "re_qprime", "im_qprime", "abs_dbar_q", "abs_dbar_qprime"])
        for i, uu in enumerate(sg.u):
            for j, vv in enumerate(sg.v):
                w.writerow(
                    [repr(float(x)) for x in (uu, vv, qf[i, j].real, qf[i, j].imag, qpf[i, j].real, qpf[i, j].imag)]
                    + [repr(float(dq[i, j])), repr(float(dqp[i, j]))]
                )
