"""Model spaces: products of a complex space form with a line.

Provides the three chart models (affine chart of CP^n, unit-ball chart of
CH^n, global chart of C^n), their product metric with the line factor, the
constant structure tensors (phi, xi, eta), Christoffel symbols and two
independent curvature routes: a numeric one assembled from metric jets and
the closed-form constant-phi-sectional-curvature model.

Coordinate ordering is (x1, y1, ..., xn, yn, t) with J(d/dx_k) = d/dy_k;
the metric is normalized so the holomorphic sectional curvature of the
complex factor is exactly rho.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .calculus import Jet
from .errors import DomainError

# Ball-chart bounds: the hard bound keeps the Bergman metric finite and
# well-conditioned; random test sampling stays within the tighter radius
# because finite-difference cross-checks degrade as the metric blows up.
BALL_HARD_RADIUS = 0.995
BALL_SAMPLING_RADIUS = 0.9
CP_SAMPLING_RADIUS = 2.0


@dataclass(frozen=True)
class SpaceFormSpec:
    """Ambient geometry selector: complex dimension and phi-sectional curvature."""

    n: int
    rho: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("complex dimension must be >= 1")

    @property
    def family(self) -> str:
        if self.rho > 0:
            return "CP"
        if self.rho < 0:
            return "CH"
        return "C"

    @property
    def chart(self) -> str:
        return {"CP": "cp-affine", "CH": "ch-ball", "C": "flat"}[self.family]

    @property
    def dim(self) -> int:
        return 2 * self.n + 1

    def chart_radius_sq(self, m) -> float:
        m = np.asarray(m, dtype=float)
        return float(np.sum(m * m))

    def contains(self, m) -> bool:
        if self.family != "CH":
            return True
        return self.chart_radius_sq(m) <= BALL_HARD_RADIUS**2

    def check_point(self, m):
        if not self.contains(m):
            raise DomainError(
                f"point with |z| = {np.sqrt(self.chart_radius_sq(m)):.4f} outside the "
                f"ball chart (|z| <= {BALL_HARD_RADIUS})"
            )

    def to_dict(self) -> dict:
        return {"family": self.family, "n": self.n, "rho": self.rho}

    @staticmethod
    def from_dict(d: dict) -> "SpaceFormSpec":
        spec = SpaceFormSpec(int(d["n"]), float(d["rho"]))
        fam = d.get("family")
        if fam is not None and fam != spec.family:
            raise ValueError(f"family {fam!r} inconsistent with rho={spec.rho}")
        return spec

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class ProductPoint:
    """Point of the product: chart coordinates of the complex factor plus height."""

    m: tuple
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "m", tuple(float(x) for x in self.m))

    @property
    def coords(self) -> np.ndarray:
        return np.array(self.m + (self.t,))

    @staticmethod
    def from_coords(c) -> "ProductPoint":
        c = np.asarray(c, dtype=float)
        return ProductPoint(tuple(c[:-1]), float(c[-1]))


@dataclass(frozen=True)
class TangentVec:
    """Tangent vector at a base point; last component is the xi-direction."""

    base: ProductPoint
    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(float(x) for x in self.components))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.components)

    def _check_base(self, other: "TangentVec"):
        if self.base != other.base:
            raise ValueError("tangent vectors live at different base points")

    def __add__(self, other: "TangentVec") -> "TangentVec":
        self._check_base(other)
        return TangentVec(self.base, tuple(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other: "TangentVec") -> "TangentVec":
        self._check_base(other)
        return TangentVec(self.base, tuple(a - b for a, b in zip(self.components, other.components)))

    def scale(self, a: float) -> "TangentVec":
        return TangentVec(self.base, tuple(a * c for c in self.components))


@dataclass(frozen=True)
class CosymplecticFrame:
    """Structure tensors at one point: metric, phi, xi and eta."""

    g: np.ndarray
    phi: np.ndarray
    xi: TangentVec
    eta: np.ndarray


# -- generic metric / Christoffel formulas ------------------------------------
#
# These evaluate on floats, numpy arrays or jets alike, so a single formula
# serves point evaluation, grid batches and along-surface jet composition.


def _split_coords(spec: SpaceFormSpec, coords: Sequence):
    n = spec.n
    xs = [coords[2 * j] for j in range(n)]
    ys = [coords[2 * j + 1] for j in range(n)]
    return xs, ys


def metric_components(spec: SpaceFormSpec, coords: Sequence):
    """Product metric as a (2n+1) x (2n+1) nested list over the coordinate type.

    Diagonal complex-block entries are arranged cancellation-free so the
    metric stays relatively accurate at large CP chart radii.
    """
    d = spec.dim
    n = spec.n
    G = [[0.0 for _ in range(d)] for _ in range(d)]
    if spec.rho == 0.0:
        for i in range(d):
            G[i][i] = 1.0
        return G
    eps = 1.0 if spec.rho > 0 else -1.0
    scale = 2.0 / abs(spec.rho)
    xs, ys = _split_coords(spec, coords)
    sq = [xs[j] * xs[j] + ys[j] * ys[j] for j in range(n)]
    S = sq[0]
    for j in range(1, n):
        S = S + sq[j]
    D = 1.0 + eps * S
    inv_d2 = (D * D).reciprocal() if isinstance(D, Jet) else 1.0 / (D * D)
    for j in range(n):
        others = 0.0
        for m in range(n):
            if m != j:
                others = others + sq[m]
        a = scale * (1.0 + eps * others) * inv_d2
        G[2 * j][2 * j] = 2.0 * a
        G[2 * j + 1][2 * j + 1] = 2.0 * a
        for k in range(j + 1, n):
            a = (-eps * scale) * (xs[j] * xs[k] + ys[j] * ys[k]) * inv_d2
            b = (-eps * scale) * (xs[j] * ys[k] - ys[j] * xs[k]) * inv_d2
            G[2 * j][2 * k] = 2.0 * a
            G[2 * k][2 * j] = 2.0 * a
            G[2 * j + 1][2 * k + 1] = 2.0 * a
            G[2 * k + 1][2 * j + 1] = 2.0 * a
            G[2 * j][2 * k + 1] = 2.0 * b
            G[2 * k + 1][2 * j] = 2.0 * b
            G[2 * k][2 * j + 1] = -2.0 * b
            G[2 * j + 1][2 * k] = -2.0 * b
    G[d - 1][d - 1] = 1.0
    return G


def christoffel_components(spec: SpaceFormSpec, coords: Sequence):
    """Closed-form Levi-Civita symbols Gamma[k][i][j] over the coordinate type.

    Derived from the Kaehler-chart symbols Gamma^lam_{mu nu} =
    -eps (zbar_mu delta_nu^lam + zbar_nu delta_mu^lam) / (1 + eps |z|^2);
    all entries touching the line factor vanish.  Cross-checked in the test
    suite against the jet route `christoffel_at`.
    """
    d = spec.dim
    n = spec.n
    Gam = [[[0.0 for _ in range(d)] for _ in range(d)] for _ in range(d)]
    if spec.rho == 0.0:
        return Gam
    eps = 1.0 if spec.rho > 0 else -1.0
    xs, ys = _split_coords(spec, coords)
    S = xs[0] * xs[0] + ys[0] * ys[0]
    for j in range(1, n):
        S = S + xs[j] * xs[j] + ys[j] * ys[j]
    D = 1.0 + eps * S
    invD = D.reciprocal() if isinstance(D, Jet) else 1.0 / D
    Rw = [(-eps) * xs[m] * invD for m in range(n)]
    Iw = [eps * ys[m] * invD for m in range(n)]

    def add(c, a, b, val):
        Gam[c][a][b] = Gam[c][a][b] + val

    for j in range(n):
        for k in range(n):
            for lam in range(n):
                re = 0.0
                im = 0.0
                if k == lam:
                    re = re + Rw[j]
                    im = im + Iw[j]
                if j == lam:
                    re = re + Rw[k]
                    im = im + Iw[k]
                if isinstance(re, float) and re == 0.0 and isinstance(im, float) and im == 0.0:
                    continue
                X, Y = 2 * lam, 2 * lam + 1
                xj, yj, xk, yk = 2 * j, 2 * j + 1, 2 * k, 2 * k + 1
                add(X, xj, xk, re)
                add(Y, xj, xk, im)
                add(X, xj, yk, -im)
                add(Y, xj, yk, re)
                add(X, yj, xk, -im)
                add(Y, yj, xk, re)
                add(X, yj, yk, -re)
                add(Y, yj, yk, -im)
    return Gam


def _components_to_array(entries, batch_shape):
    """Nested-list components with float/array entries -> ndarray, batch last."""

    def conv(e):
        if isinstance(e, list):
            return [conv(x) for x in e]
        if isinstance(e, (float, int)):
            return np.full(batch_shape, float(e)) if batch_shape else float(e)
        return np.asarray(e, dtype=float)

    return np.array(conv(entries))


def metric_values(spec: SpaceFormSpec, pts: np.ndarray) -> np.ndarray:
    """Metric at a batch of points, shape (N, d, d)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    N, d, n = pts.shape[0], spec.dim, spec.n
    out = np.zeros((N, d, d))
    out[:, d - 1, d - 1] = 1.0
    if spec.rho == 0.0:
        for i in range(d - 1):
            out[:, i, i] = 1.0
        return out
    eps = 1.0 if spec.rho > 0 else -1.0
    scale = 2.0 / abs(spec.rho)
    x, y = pts[:, 0 : 2 * n : 2], pts[:, 1 : 2 * n : 2]
    sq = x * x + y * y
    S = np.sum(sq, axis=1)
    inv_d2 = 1.0 / (1.0 + eps * S) ** 2
    for j in range(n):
        a = 2.0 * scale * (1.0 + eps * (S - sq[:, j])) * inv_d2
        out[:, 2 * j, 2 * j] = a
        out[:, 2 * j + 1, 2 * j + 1] = a
        for k in range(j + 1, n):
            a = -2.0 * eps * scale * (x[:, j] * x[:, k] + y[:, j] * y[:, k]) * inv_d2
            b = -2.0 * eps * scale * (x[:, j] * y[:, k] - y[:, j] * x[:, k]) * inv_d2
            out[:, 2 * j, 2 * k] = out[:, 2 * k, 2 * j] = a
            out[:, 2 * j + 1, 2 * k + 1] = out[:, 2 * k + 1, 2 * j + 1] = a
            out[:, 2 * j, 2 * k + 1] = out[:, 2 * k + 1, 2 * j] = b
            out[:, 2 * k, 2 * j + 1] = out[:, 2 * j + 1, 2 * k] = -b
    return out


def christoffel_values(spec: SpaceFormSpec, pts: np.ndarray) -> np.ndarray:
    """Closed-form Christoffel symbols at a batch of points, shape (N, d, d, d)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    N, d, n = pts.shape[0], spec.dim, spec.n
    out = np.zeros((N, d, d, d))
    if spec.rho == 0.0:
        return out
    eps = 1.0 if spec.rho > 0 else -1.0
    x, y = pts[:, 0 : 2 * n : 2], pts[:, 1 : 2 * n : 2]
    invD = 1.0 / (1.0 + eps * np.sum(x * x + y * y, axis=1))
    Rw = -eps * x * invD[:, None]
    Iw = eps * y * invD[:, None]

    def fill(lam, j, k, re, im):
        X, Y = 2 * lam, 2 * lam + 1
        xj, yj, xk, yk = 2 * j, 2 * j + 1, 2 * k, 2 * k + 1
        out[:, X, xj, xk] += re
        out[:, Y, xj, xk] += im
        out[:, X, xj, yk] += -im
        out[:, Y, xj, yk] += re
        out[:, X, yj, xk] += -im
        out[:, Y, yj, xk] += re
        out[:, X, yj, yk] += -re
        out[:, Y, yj, yk] += -im

    for j in range(n):
        for k in range(n):
            fill(k, j, k, Rw[:, j], Iw[:, j])
            fill(j, j, k, Rw[:, k], Iw[:, k])
    return out


def phi_matrix(spec: SpaceFormSpec) -> np.ndarray:
    """phi as a constant matrix in the chart: J on the complex block, 0 on xi."""
    d = spec.dim
    J = np.zeros((d, d))
    for k in range(spec.n):
        J[2 * k + 1, 2 * k] = 1.0
        J[2 * k, 2 * k + 1] = -1.0
    return J


def xi_components(spec: SpaceFormSpec) -> np.ndarray:
    e = np.zeros(spec.dim)
    e[-1] = 1.0
    return e


# -- jet-route Christoffels and curvature -------------------------------------


def christoffel_from_metric(metric_fn: Callable, dim: int, pts: np.ndarray, want_derivs: bool = False):
    """Levi-Civita symbols from exact first (and second) metric derivatives.

    `metric_fn` maps a list of coordinate values/jets to nested metric
    components.  Returns Gamma with shape (N, d, d, d) as [n, k, i, j], and
    optionally dGamma with shape (N, a, k, i, j).
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    N = pts.shape[0]
    order = 2 if want_derivs else 1
    coords = [Jet.variable(pts[:, i], i, dim, order) for i in range(dim)]
    gj = metric_fn(coords)

    g = np.zeros((N, dim, dim))
    dg = np.zeros((N, dim, dim, dim))
    d2g = np.zeros((N, dim, dim, dim, dim)) if want_derivs else None
    unit = np.eye(dim, dtype=int)
    for i in range(dim):
        for j in range(dim):
            e = gj[i][j]
            if isinstance(e, (float, int)):
                g[:, i, j] = e
                continue
            g[:, i, j] = e.value
            for a in range(dim):
                dg[:, a, i, j] = e.deriv(tuple(unit[a]))
            if want_derivs:
                for a in range(dim):
                    for b in range(a, dim):
                        v = e.deriv(tuple(unit[a] + unit[b]))
                        d2g[:, a, b, i, j] = v
                        d2g[:, b, a, i, j] = v

    # low[n, i, j, k] = (d_i g_jk + d_j g_ik - d_k g_ij)/2 with k the lowered slot
    low = 0.5 * (dg + dg.transpose(0, 2, 1, 3) - np.moveaxis(dg, 1, 3))
    ginv = np.linalg.inv(g)
    gamma = np.einsum("nlk,nijk->nlij", ginv, low)
    if not want_derivs:
        return gamma
    # dlow[n, a, i, j, k] = d_a low[i, j, k]
    dlow = 0.5 * (d2g + d2g.transpose(0, 1, 3, 2, 4) - np.moveaxis(d2g, 2, 4))
    dginv = -np.einsum("nlm,namp,npk->nalk", ginv, dg, ginv)
    dgamma = np.einsum("nalk,nijk->nalij", dginv, low) + np.einsum("nlk,naijk->nalij", ginv, dlow)
    return gamma, dgamma


def _typed_inputs(spec, p, *vs):
    spec.check_point(p.m)
    pt = p.coords
    arrs = [np.asarray(v.components if isinstance(v, TangentVec) else v, dtype=float) for v in vs]
    return pt, arrs


def metric_at(spec: SpaceFormSpec, p: ProductPoint) -> np.ndarray:
    spec.check_point(p.m)
    return metric_values(spec, p.coords[None, :])[0]


def christoffel_at(spec: SpaceFormSpec, p: ProductPoint) -> np.ndarray:
    """Gamma[k, i, j] at p, from exact metric jets (module calculus)."""
    spec.check_point(p.m)
    return christoffel_from_metric(lambda c: metric_components(spec, c), spec.dim, p.coords[None, :])[0]


def cosymplectic_frame_at(spec: SpaceFormSpec, p: ProductPoint) -> CosymplecticFrame:
    g = metric_at(spec, p)
    xi = TangentVec(p, tuple(xi_components(spec)))
    return CosymplecticFrame(g=g, phi=phi_matrix(spec), xi=xi, eta=xi_components(spec))


def curvature_numeric_batch(spec: SpaceFormSpec, pts, U, V, W) -> np.ndarray:
    """R(U,V)W from Gamma and its exact first derivatives, batched."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    gamma, dgamma = christoffel_from_metric(
        lambda c: metric_components(spec, c), spec.dim, pts, want_derivs=True
    )
    U, V, W = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (U, V, W))
    # R(d_i, d_j)d_k = (d_i G^l_jk - d_j G^l_ik + G^l_im G^m_jk - G^l_jm G^m_ik) d_l
    term = np.einsum("niljk,ni,nj,nk->nl", dgamma, U, V, W)
    term -= np.einsum("njlik,ni,nj,nk->nl", dgamma, U, V, W)
    term += np.einsum("nlim,nmjk,ni,nj,nk->nl", gamma, gamma, U, V, W)
    term -= np.einsum("nljm,nmik,ni,nj,nk->nl", gamma, gamma, U, V, W)
    return term


def curvature_numeric(spec, p: ProductPoint, U: TangentVec, V: TangentVec, W: TangentVec) -> TangentVec:
    pt, (u, v, w) = _typed_inputs(spec, p, U, V, W)
    out = curvature_numeric_batch(spec, pt[None, :], u[None, :], v[None, :], w[None, :])[0]
    return TangentVec(p, tuple(out))


def curvature_model_batch(spec: SpaceFormSpec, pts, U, V, W) -> np.ndarray:
    """Constant-phi-sectional-curvature curvature tensor, batched.

    R(U,V)W = rho/4 { <V,W>U - <U,W>V + <U,phiW>phiV - <V,phiW>phiU
                      + 2<U,phiV>phiW + eta(U)eta(W)V - eta(V)eta(W)U
                      + <U,W>eta(V)xi - <V,W>eta(U)xi }.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    U, V, W = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (U, V, W))
    g = metric_values(spec, pts)
    J = phi_matrix(spec)
    xi = xi_components(spec)
    ip = lambda a, b: np.einsum("nij,ni,nj->n", g, a, b)[:, None]
    ph = lambda a: a @ J.T
    eta = lambda a: a[:, -1:]
    rho4 = spec.rho / 4.0
    out = (
        ip(V, W) * U
        - ip(U, W) * V
        + ip(U, ph(W)) * ph(V)
        - ip(V, ph(W)) * ph(U)
        + 2.0 * ip(U, ph(V)) * ph(W)
        + eta(U) * eta(W) * V
        - eta(V) * eta(W) * U
        + ip(U, W) * eta(V) * xi[None, :]
        - ip(V, W) * eta(U) * xi[None, :]
    )
    return rho4 * out


def curvature_model(spec, p: ProductPoint, U: TangentVec, V: TangentVec, W: TangentVec) -> TangentVec:
    pt, (u, v, w) = _typed_inputs(spec, p, U, V, W)
    out = curvature_model_batch(spec, pt[None, :], u[None, :], v[None, :], w[None, :])[0]
    return TangentVec(p, tuple(out))


@dataclass
class ParallelismResiduals:
    nabla_phi: float
    nabla_xi: float
    argmax_index: int


def parallelism_residuals(spec: SpaceFormSpec, pts, metric_fn: Callable = None) -> ParallelismResiduals:
    """Max |nabla phi| and |nabla xi| over a batch of points.

    `metric_fn` may replace the model metric (negative-control fixtures).
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    fn = metric_fn or (lambda c: metric_components(spec, c))
    gam = christoffel_from_metric(fn, spec.dim, pts)  # [n, k, i, j]
    J = phi_matrix(spec)
    # (nabla_a phi)^b_c = Gamma^b_am phi^m_c - Gamma^m_ac phi^b_m
    nphi = np.einsum("nbam,mc->nabc", gam, J) - np.einsum("bm,nmac->nabc", J, gam)
    xi = xi_components(spec)
    nxi = np.einsum("nbam,m->nab", gam, xi)
    per_point_phi = np.max(np.abs(nphi).reshape(pts.shape[0], -1), axis=1)
    per_point_xi = np.max(np.abs(nxi).reshape(pts.shape[0], -1), axis=1)
    worst = np.maximum(per_point_phi, per_point_xi)
    return ParallelismResiduals(
        nabla_phi=float(np.max(per_point_phi)),
        nabla_xi=float(np.max(per_point_xi)),
        argmax_index=int(np.argmax(worst)),
    )


# -- random sampling for property sweeps --------------------------------------


def sample_points(spec: SpaceFormSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded chart points, confined to the per-family sampling regions."""
    dim2n = 2 * spec.n
    if spec.family == "CH":
        radius = BALL_SAMPLING_RADIUS * 0.95
    elif spec.family == "CP":
        radius = CP_SAMPLING_RADIUS
    else:
        radius = 2.0
    raw = rng.standard_normal((count, dim2n))
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    radii = radius * rng.uniform(0.05, 0.95, size=(count, 1)) ** (1.0 / dim2n)
    m = raw / norms * radii
    t = rng.uniform(-1.0, 1.0, size=(count, 1))
    return np.hstack([m, t])


def sample_vectors(spec: SpaceFormSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((count, spec.dim))


# -- chart backend used by the surface machinery ------------------------------


class ProductChart:
    """Chart interface consumed by the immersion-geometry pipeline."""

    def __init__(self, spec: SpaceFormSpec):
        self.spec = spec
        self.dim = spec.dim

    def metric_components(self, coords):
        return metric_components(self.spec, coords)

    def christoffel_components(self, coords):
        return christoffel_components(self.spec, coords)

    def metric_values(self, pts):
        return metric_values(self.spec, pts)

    def christoffel_values(self, pts):
        return christoffel_values(self.spec, pts)

    def phi_matrix(self):
        return phi_matrix(self.spec)

    def xi_components(self):
        return xi_components(self.spec)
