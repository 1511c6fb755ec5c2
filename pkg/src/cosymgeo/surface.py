"""Immersion geometry: fundamental forms, mean curvature, shape operators,
normal connection and the residual functionals used by the verification
suites (parallel-mean-curvature, pseudo-umbilical, anti-invariance, angle
decomposition).

Everything is computed from exact parameter jets of the immersion composed
with the ambient chart's metric and Christoffel formulas; grids are batched
through array-valued jet coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .calculus import Jet
from .errors import DegenerateImmersionError, GridError, NotIsothermalError
from .spaces import ProductChart, ProductPoint, SpaceFormSpec, TangentVec

RANK_TOL = 1e-8
ISOTHERMAL_RTOL = 1e-7
XI_TANGENT_TOL = 1e-7
MIN_H_NORM = 1e-8


class Immersion:
    """Parametrized surface patch exposing exact jets in chart coordinates.

    Subclasses implement `chart_jets(u, v, order)` for batched parameter
    arrays, returning one jet per chart coordinate.
    """

    u_range = (0.0, 1.0)
    v_range = (0.0, 1.0)
    is_isothermal_claimed = False

    def __init__(self, chart):
        self.chart = chart

    def chart_jets(self, u, v, order: int):
        raise NotImplementedError

    def point(self, u: float, v: float) -> np.ndarray:
        jets = self.chart_jets(np.asarray([u], dtype=float), np.asarray([v], dtype=float), 1)
        return np.array([j.value[0] for j in jets])


class CallableImmersion(Immersion):
    """Immersion defined by a jet-generic callable (u_jet, v_jet) -> coords."""

    def __init__(self, chart, fn, u_range, v_range, isothermal=False):
        super().__init__(chart)
        self.fn = fn
        self.u_range = tuple(u_range)
        self.v_range = tuple(v_range)
        self.is_isothermal_claimed = bool(isothermal)

    def chart_jets(self, u, v, order):
        uj = Jet.variable(np.asarray(u, dtype=float), 0, 2, order)
        vj = Jet.variable(np.asarray(v, dtype=float), 1, 2, order)
        out = []
        for c in self.fn(uj, vj):
            out.append(c if isinstance(c, Jet) else Jet.constant(np.broadcast_to(np.asarray(c, float), np.shape(u)), 2, order))
        return out


def param_grid(imm: Immersion, n, interior_margin: float = 0.0):
    """Uniform parameter grid over the immersion's rectangle."""
    if isinstance(n, int):
        nu = nv = n
    else:
        nu, nv = n
    (u0, u1), (v0, v1) = imm.u_range, imm.v_range
    du = (u1 - u0) * interior_margin
    dv = (v1 - v0) * interior_margin
    return np.linspace(u0 + du, u1 - du, nu), np.linspace(v0 + dv, v1 - dv, nv)


def _dot(g, A, B):
    """g-inner product of jet vectors; g entries may be floats or jets."""
    total = None
    for a in range(len(A)):
        for b in range(len(B)):
            ge = g[a][b]
            if isinstance(ge, float):
                if ge == 0.0:
                    continue
                term = (A[a] * B[b]) * ge
            else:
                term = ge * (A[a] * B[b])
            total = term if total is None else total + term
    return total


def _gamma_bilinear(gamma, X, Y):
    """Vector jet Gamma(X, Y)^k = Gamma^k_ij X^i Y^j."""
    d = len(X)
    out = []
    for k in range(d):
        acc = None
        for i in range(d):
            for j in range(d):
                ge = gamma[k][i][j]
                if isinstance(ge, float) and ge == 0.0:
                    continue
                term = ge * (X[i] * Y[j])
                acc = term if acc is None else acc + term
        out.append(acc if acc is not None else 0.0 * X[0])
    return out


def _vec_comb(*pairs):
    """Linear combination sum(c * V) of jet vectors with scalar/jet weights."""
    d = len(pairs[0][1])
    out = []
    for k in range(d):
        acc = None
        for c, V in pairs:
            term = c * V[k] if isinstance(c, (float, int)) else c * V[k]
            acc = term if acc is None else acc + term
        out.append(acc)
    return out


def _values(V) -> np.ndarray:
    return np.stack([np.asarray(c.value if isinstance(c, Jet) else c, dtype=float) for c in V])


class SurfaceGrid:
    """Jet-level geometry of an immersion over a batched parameter set.

    Valid jet orders degrade along the pipeline: with immersion jets of
    order m, first-derivative objects are valid to m-1 and curvature-level
    objects (sigma, H) to m-2.  Order 3 gives the 1-jet of H needed for the
    normal-connection residual.
    """

    def __init__(self, imm: Immersion, u, v, order: int = 3, mesh: bool = True):
        self.imm = imm
        self.chart = imm.chart
        self.order = order
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if mesh:
            U, V = np.meshgrid(u, v, indexing="ij")
            self.grid_shape = U.shape
            self.u, self.v = u, v
            uu, vv = U.ravel(), V.ravel()
        else:
            self.grid_shape = u.shape
            self.u, self.v = u, v
            uu, vv = u.ravel(), v.ravel()
        self.uu, self.vv = uu, vv
        d = self.chart.dim

        f = imm.chart_jets(uu, vv, order)
        self.f = f
        self.fu = [c.partial(0) for c in f]
        self.fv = [c.partial(1) for c in f]
        self.g = self.chart.metric_components(f)
        self.gamma = self.chart.christoffel_components(f)

        self.E = _dot(self.g, self.fu, self.fu)
        self.F = _dot(self.g, self.fu, self.fv)
        self.G = _dot(self.g, self.fv, self.fv)

        Ev, Fv, Gv = self.E.value, self.F.value, self.G.value
        disc = 0.5 * (Ev + Gv - np.sqrt((Ev - Gv) ** 2 + 4 * Fv**2))
        if np.any(disc <= RANK_TOL):
            bad = int(np.argmin(disc))
            raise DegenerateImmersionError(
                f"immersion is degenerate near (u, v) = ({uu[bad]:.6g}, {vv[bad]:.6g}); "
                f"smallest first-fundamental-form eigenvalue {disc[bad]:.3e}"
            )

        # orthonormal tangent frame, e1 along f_u
        sqrtE = self.E.sqrt()
        self.e1 = [c / sqrtE for c in self.fu]
        FoverE = self.F / self.E
        w = [b - FoverE * a for a, b in zip(self.fu, self.fv)]
        self.w_norm2 = self.G - self.F * FoverE
        sqrtw = self.w_norm2.sqrt()
        self.e2 = [c / sqrtw for c in w]

        # second fundamental form in coordinate directions
        fuu = [c.partial(0).partial(0) for c in f]
        fuv = [c.partial(0).partial(1) for c in f]
        fvv = [c.partial(1).partial(1) for c in f]
        Duu = [a + b for a, b in zip(fuu, _gamma_bilinear(self.gamma, self.fu, self.fu))]
        Duv = [a + b for a, b in zip(fuv, _gamma_bilinear(self.gamma, self.fu, self.fv))]
        Dvv = [a + b for a, b in zip(fvv, _gamma_bilinear(self.gamma, self.fv, self.fv))]
        self.sigma_uu = self._normal_part(Duu)
        self.sigma_uv = self._normal_part(Duv)
        self.sigma_vv = self._normal_part(Dvv)

        # mean curvature: trace of sigma over the orthonormal frame
        invE = self.E.reciprocal()
        s11 = [c * invE for c in self.sigma_uu]
        inv_w2 = self.w_norm2.reciprocal()
        s22 = []
        for a, b, cc in zip(self.sigma_vv, self.sigma_uv, self.sigma_uu):
            s22.append((a - 2.0 * FoverE * b + FoverE * FoverE * cc) * inv_w2)
        self.sigma_11 = s11
        self.sigma_22 = s22
        self.sigma_12 = self._frame_sigma_12(invE, inv_w2, FoverE)
        self.H = [0.5 * (a + b) for a, b in zip(s11, s22)]

    def _normal_part(self, V):
        c1 = _dot(self.g, V, self.e1)
        c2 = _dot(self.g, V, self.e2)
        return [v - c1 * a - c2 * b for v, a, b in zip(V, self.e1, self.e2)]

    def _frame_sigma_12(self, invE, inv_w2, FoverE):
        # sigma(e1, e2) = (sigma_uv - (F/E) sigma_uu) / (sqrt(E) |w|)
        coef = (invE * inv_w2).sqrt()
        return [(suv - FoverE * suu) * coef for suv, suu in zip(self.sigma_uv, self.sigma_uu)]

    # -- value-level views ---------------------------------------------------

    def vals(self, V):
        return _values(V)

    def metric_vals(self) -> np.ndarray:
        d = self.chart.dim
        N = self.uu.size
        out = np.zeros((N, d, d))
        for a in range(d):
            for b in range(d):
                ge = self.g[a][b]
                out[:, a, b] = ge.value if isinstance(ge, Jet) else ge
        return out

    def inner_vals(self, A, B) -> np.ndarray:
        g = self.metric_vals()
        return np.einsum("nij,in,jn->n", g, A, B)

    def H_norm(self) -> np.ndarray:
        Hv = self.vals(self.H)
        return np.sqrt(np.maximum(self.inner_vals(Hv, Hv), 0.0))

    def nabla_normal_H(self):
        """Normal part of the ambient derivative of H along each coordinate axis."""
        d = self.chart.dim
        Hv = self.vals(self.H)
        e1v = self.vals(self.e1)
        e2v = self.vals(self.e2)
        fuv_ = self.vals(self.fu)
        fvv_ = self.vals(self.fv)
        g = self.metric_vals()
        cols = []
        for ax, df in ((0, fuv_), (1, fvv_)):
            mono = (1, 0) if ax == 0 else (0, 1)
            dH = np.stack([c.deriv(mono) for c in self.H])
            gam_corr = np.zeros_like(dH)
            for k in range(d):
                acc = np.zeros(dH.shape[1])
                for i in range(d):
                    for j in range(d):
                        ge = self.gamma[k][i][j]
                        if isinstance(ge, float) and ge == 0.0:
                            continue
                        gv = ge.value if isinstance(ge, Jet) else ge
                        acc += gv * df[i] * Hv[j]
                gam_corr[k] = acc
            col = dH + gam_corr
            c1 = np.einsum("nij,in,jn->n", g, col, e1v)
            c2 = np.einsum("nij,in,jn->n", g, col, e2v)
            cols.append(col - c1 * e1v - c2 * e2v)
        return cols

    def reshape(self, arr):
        return np.asarray(arr).reshape(self.grid_shape)


# -- public per-point records --------------------------------------------------


@dataclass
class SurfaceGeometry:
    E: float
    F: float
    G: float
    lambda2: float
    e1: TangentVec
    e2: TangentVec
    sigma: np.ndarray  # (2, 2, d), orthonormal-frame components
    H: TangentVec
    normal_basis: list


@dataclass
class AngleDecomposition:
    mu: float
    nu: float
    lambda1: float
    lambda2_eig: float
    mu_defined: bool = True


@dataclass
class GridResidual:
    value: float
    argmax: tuple
    field: Optional[np.ndarray] = None


def _single_grid(spec_or_chart, imm, params, order=3) -> SurfaceGrid:
    chart = spec_or_chart if not isinstance(spec_or_chart, SpaceFormSpec) else ProductChart(spec_or_chart)
    if imm.chart.dim != chart.dim:
        raise ValueError("immersion chart does not match the requested space")
    u, v = params
    return SurfaceGrid(imm, np.array([u], dtype=float), np.array([v], dtype=float), order=order, mesh=False)


def _normal_basis(chart, g, tangents, extra_candidates):
    """Deterministic Gram-Schmidt normal basis: candidates then chart axes."""
    d = chart.dim
    accepted = []
    basis = [np.asarray(t, dtype=float) for t in tangents]
    cands = [np.asarray(c, dtype=float) for c in extra_candidates]
    cands += [np.eye(d)[i] for i in range(d)]
    ip = lambda a, b: float(a @ g @ b)
    for c in cands:
        v = c.copy()
        for b in basis + accepted:
            v = v - ip(v, b) * b
        nrm = np.sqrt(max(ip(v, v), 0.0))
        if nrm > 1e-6:
            accepted.append(v / nrm)
        if len(accepted) == d - 2:
            break
    return accepted


def geometry_at(spec, imm: Immersion, params) -> SurfaceGeometry:
    """Per-point geometry package; spec may be a SpaceFormSpec or chart."""
    sg = _single_grid(spec, imm, params)
    base = ProductPoint.from_coords(_values(sg.f)[:, 0]) if isinstance(spec, SpaceFormSpec) else None
    g = sg.metric_vals()[0]
    e1 = _values(sg.e1)[:, 0]
    e2 = _values(sg.e2)[:, 0]
    s11 = _values(sg.sigma_11)[:, 0]
    s12 = _values(sg.sigma_12)[:, 0]
    s22 = _values(sg.sigma_22)[:, 0]
    H = _values(sg.H)[:, 0]
    sigma = np.array([[s11, s12], [s12, s22]])
    if isinstance(spec, SpaceFormSpec):
        chart = ProductChart(spec)
        J = chart.phi_matrix()
        nb = _normal_basis(chart, g, [e1, e2], [J @ e1, J @ e2, H])
        mk = lambda comp: TangentVec(base, tuple(comp))
        normal_basis = [mk(b) for b in nb]
        return SurfaceGeometry(
            E=float(sg.E.value[0]),
            F=float(sg.F.value[0]),
            G=float(sg.G.value[0]),
            lambda2=float(sg.E.value[0]),
            e1=mk(e1),
            e2=mk(e2),
            sigma=sigma,
            H=mk(H),
            normal_basis=normal_basis,
        )
    raise TypeError("geometry_at expects a SpaceFormSpec")


def shape_operator(spec, imm: Immersion, params, V) -> np.ndarray:
    """Matrix of A_V in the orthonormal tangent frame; V must be normal."""
    sg = _single_grid(spec, imm, params)
    g = sg.metric_vals()[0]
    Varr = np.asarray(V.components if isinstance(V, TangentVec) else V, dtype=float)
    e1 = _values(sg.e1)[:, 0]
    e2 = _values(sg.e2)[:, 0]
    tang = abs(Varr @ g @ e1) + abs(Varr @ g @ e2)
    scale = np.sqrt(max(Varr @ g @ Varr, 1e-30))
    if tang > 1e-6 * max(scale, 1.0):
        raise ValueError(f"V is not normal to the surface (tangential part {tang:.3e})")
    s11 = _values(sg.sigma_11)[:, 0]
    s12 = _values(sg.sigma_12)[:, 0]
    s22 = _values(sg.sigma_22)[:, 0]
    return np.array(
        [
            [s11 @ g @ Varr, s12 @ g @ Varr],
            [s12 @ g @ Varr, s22 @ g @ Varr],
        ]
    )


# -- grid residual functionals -------------------------------------------------


def _grid(spec, imm, grid, order=3) -> SurfaceGrid:
    if isinstance(grid, SurfaceGrid):
        return grid
    if isinstance(grid, int) or (isinstance(grid, tuple) and all(isinstance(x, int) for x in grid)):
        u, v = param_grid(imm, grid)
    else:
        u, v = grid
    return SurfaceGrid(imm, u, v, order=order)


def _argmax_params(sg: SurfaceGrid, flat_index: int):
    return (float(sg.uu[flat_index]), float(sg.vv[flat_index]))


def _masked_max(sg, field, mask=None):
    field = np.asarray(field, dtype=float)
    if mask is not None:
        field = np.where(mask.ravel(), field, -np.inf)
    idx = int(np.argmax(field))
    return GridResidual(value=float(field[idx]), argmax=_argmax_params(sg, idx), field=sg.reshape(np.where(np.isfinite(field), field, np.nan)))


def pmc_residual(spec, imm: Immersion, grid=32, mask=None) -> GridResidual:
    """max over grid and unit tangent directions of |normal part of D_X H|."""
    sg = _grid(spec, imm, grid)
    col_u, col_v = sg.nabla_normal_H()
    g = sg.metric_vals()
    Ev = sg.E.value
    Fv = sg.F.value
    w2 = sg.w_norm2.value
    # columns along the orthonormal frame directions
    a1 = col_u / np.sqrt(Ev)
    a2 = (col_v - (Fv / Ev) * col_u) / np.sqrt(w2)
    m11 = np.einsum("nij,in,jn->n", g, a1, a1)
    m12 = np.einsum("nij,in,jn->n", g, a1, a2)
    m22 = np.einsum("nij,in,jn->n", g, a2, a2)
    # largest singular value over unit tangent directions
    tr = m11 + m22
    det = m11 * m22 - m12**2
    lam = 0.5 * (tr + np.sqrt(np.maximum(tr**2 - 4 * det, 0.0)))
    return _masked_max(sg, np.sqrt(np.maximum(lam, 0.0)), mask)


def pseudo_umbilical_residual(spec, imm: Immersion, grid=32, mask=None) -> GridResidual:
    """max Frobenius norm of A_H - |H|^2 Id over the grid."""
    sg = _grid(spec, imm, grid, order=2)
    g = sg.metric_vals()
    Hv = sg.vals(sg.H)
    h2 = np.einsum("nij,in,jn->n", g, Hv, Hv)
    a11 = np.einsum("nij,in,jn->n", g, sg.vals(sg.sigma_11), Hv)
    a12 = np.einsum("nij,in,jn->n", g, sg.vals(sg.sigma_12), Hv)
    a22 = np.einsum("nij,in,jn->n", g, sg.vals(sg.sigma_22), Hv)
    frob = np.sqrt((a11 - h2) ** 2 + 2 * a12**2 + (a22 - h2) ** 2)
    return _masked_max(sg, frob, mask)


def anti_invariance_residual(spec, imm: Immersion, grid=32, mask=None) -> GridResidual:
    """max |<phi X, Y>| over orthonormal tangent pairs (reduces to |<phi e1, e2>|)."""
    sg = _grid(spec, imm, grid, order=1)
    chart = ProductChart(spec) if isinstance(spec, SpaceFormSpec) else spec
    J = chart.phi_matrix()
    g = sg.metric_vals()
    e1 = sg.vals(sg.e1)
    e2 = sg.vals(sg.e2)
    c = np.einsum("nij,in,jn->n", g, np.einsum("ab,bn->an", J, e1), e2)
    return _masked_max(sg, np.abs(c), mask)


def trace_shape_residual(spec, imm: Immersion, grid=32, mask=None) -> GridResidual:
    """max |trace A_H - 2|H|^2| (definition consistency of H)."""
    sg = _grid(spec, imm, grid, order=2)
    g = sg.metric_vals()
    Hv = sg.vals(sg.H)
    h2 = np.einsum("nij,in,jn->n", g, Hv, Hv)
    a11 = np.einsum("nij,in,jn->n", g, sg.vals(sg.sigma_11), Hv)
    a22 = np.einsum("nij,in,jn->n", g, sg.vals(sg.sigma_22), Hv)
    return _masked_max(sg, np.abs(a11 + a22 - 2 * h2), mask)


def angle_decomposition(spec, imm: Immersion, params) -> AngleDecomposition:
    """Angle data (mu, nu) and A_{H/|H|} eigenvalues in the xi-aligned frame.

    The frame is re-aligned so e2 points along the tangent part of xi; when
    that part is below tolerance mu is flagged undefined (nu still returned).
    Raises at (near-)minimal points where H/|H| is meaningless.
    """
    sg = _single_grid(spec, imm, params, order=2)
    chart = ProductChart(spec) if isinstance(spec, SpaceFormSpec) else spec
    g = sg.metric_vals()[0]
    e1 = _values(sg.e1)[:, 0]
    e2 = _values(sg.e2)[:, 0]
    H = _values(sg.H)[:, 0]
    hnorm = np.sqrt(max(H @ g @ H, 0.0))
    if hnorm < MIN_H_NORM:
        raise ValueError("angle decomposition undefined at a minimal point (|H| ~ 0)")
    nu = float(H[-1] / hnorm)
    xi = chart.xi_components()
    t1 = float(xi @ g @ e1)
    t2 = float(xi @ g @ e2)
    xtan = np.sqrt(t1 * t1 + t2 * t2)
    if xtan < XI_TANGENT_TOL:
        s11 = _values(sg.sigma_11)[:, 0]
        s22 = _values(sg.sigma_22)[:, 0]
        lam = np.linalg.eigvalsh(
            np.array(
                [
                    [s11 @ g @ H / hnorm, _values(sg.sigma_12)[:, 0] @ g @ H / hnorm],
                    [_values(sg.sigma_12)[:, 0] @ g @ H / hnorm, s22 @ g @ H / hnorm],
                ]
            )
        )
        return AngleDecomposition(mu=float("nan"), nu=nu, lambda1=float(lam[0]), lambda2_eig=float(lam[1]), mu_defined=False)
    # rotate the frame: new e2 along the tangent projection of xi
    c, s = t1 / xtan, t2 / xtan
    E2 = c * e1 + s * e2
    E1 = s * e1 - c * e2
    mu = float(xi @ g @ E2)
    s11 = _values(sg.sigma_11)[:, 0]
    s12 = _values(sg.sigma_12)[:, 0]
    s22 = _values(sg.sigma_22)[:, 0]

    def sig(a1, b1, a2, b2):
        # bilinear expansion of sigma on the rotated frame, coefficients in (e1, e2)
        return a1 * a2 * s11 + (a1 * b2 + b1 * a2) * s12 + b1 * b2 * s22

    A = np.empty((2, 2))
    pairs = [(s, -c), (c, s)]  # E1, E2 coefficients in the (e1, e2) basis
    for i, (ai, bi) in enumerate(pairs):
        for j, (aj, bj) in enumerate(pairs):
            A[i, j] = sig(ai, bi, aj, bj) @ g @ H / hnorm
    lam, vecs = np.linalg.eigh(A)
    # label eigenvalues by alignment: lambda1 for the eigenvector along E1
    if abs(vecs[0, 0]) >= abs(vecs[0, 1]):
        lam1, lam2 = float(lam[0]), float(lam[1])
    else:
        lam1, lam2 = float(lam[1]), float(lam[0])
    return AngleDecomposition(mu=mu, nu=nu, lambda1=lam1, lambda2_eig=lam2)


def gauss_curvature(spec, imm: Immersion, params) -> float:
    """Intrinsic curvature at an isothermal point: K = -(1/lambda^2) Lap(log lambda)."""
    sg = _single_grid(spec, imm, params, order=3)
    Ev, Fv, Gv = float(sg.E.value[0]), float(sg.F.value[0]), float(sg.G.value[0])
    if abs(Ev - Gv) + abs(Fv) > ISOTHERMAL_RTOL * abs(Ev):
        raise NotIsothermalError("Gauss curvature shortcut needs isothermal parameters")
    loglam = sg.E.log()  # log lambda^2, valid to order 2
    lap = loglam.deriv((2, 0)) + loglam.deriv((0, 2))
    return float(-0.5 * lap[0] / Ev)


def check_isothermal(sg: SurfaceGrid):
    Ev, Fv, Gv = sg.E.value, sg.F.value, sg.G.value
    worst = np.max(np.abs(Ev - Gv) + np.abs(Fv) - ISOTHERMAL_RTOL * np.abs(Ev))
    if worst > 0:
        raise NotIsothermalError(
            "parameters are not isothermal on this grid; use a built-in isothermal "
            "family (vertical cylinders, rotational spheres, holomorphic slices)"
        )
