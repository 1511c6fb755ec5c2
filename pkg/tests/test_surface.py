import numpy as np
import pytest

from cosymgeo.errors import DegenerateImmersionError
from cosymgeo.families import ReparamImmersion, bumpy_sheet, lagrangian_slice, plane_slice, vertical_sheet
from cosymgeo.spaces import SpaceFormSpec, metric_values, phi_matrix
from cosymgeo.surface import (
    CallableImmersion,
    SurfaceGrid,
    angle_decomposition,
    anti_invariance_residual,
    gauss_curvature,
    geometry_at,
    param_grid,
    pmc_residual,
    pseudo_umbilical_residual,
    shape_operator,
    trace_shape_residual,
)
from cosymgeo.spaces import ProductChart
from cosymgeo.curves import sinusoidal_curvature


def _metric_at_params(spec, imm, params):
    return metric_values(spec, imm.point(*params)[None, :])[0]


def test_cylinder_first_fundamental_form(ch2, magic_cylinder):
    geo = geometry_at(ch2, magic_cylinder, (0.8, 0.2))
    assert geo.E == pytest.approx(1.0, abs=1e-10)
    assert geo.G == pytest.approx(1.0, abs=1e-12)
    assert geo.F == pytest.approx(0.0, abs=1e-12)


def test_cylinder_mean_curvature_half_kappa(ch2, magic_cylinder):
    geo = geometry_at(ch2, magic_cylinder, (0.8, 0.2))
    g = _metric_at_params(ch2, magic_cylinder, (0.8, 0.2))
    assert np.sqrt(geo.H.array @ g @ geo.H.array) == pytest.approx(0.5, abs=1e-8)


def test_totally_geodesic_slice_sigma_vanishes(ch2):
    imm = plane_slice(ch2, t0=0.3)
    geo = geometry_at(ch2, imm, (0.1, -0.15))
    assert np.max(np.abs(geo.sigma)) < 1e-9
    assert pmc_residual(ch2, imm, 8).value < 1e-9


def test_surface_geometry_invariants(ch2):
    imm = bumpy_sheet(ch2)
    geo = geometry_at(ch2, imm, (0.05, 0.12))
    g = _metric_at_params(ch2, imm, (0.05, 0.12))
    # H = (sigma(e1,e1) + sigma(e2,e2))/2 by construction
    assert np.allclose(0.5 * (geo.sigma[0, 0] + geo.sigma[1, 1]), geo.H.array, atol=1e-12)
    # sigma symmetric and normal
    assert np.allclose(geo.sigma[0, 1], geo.sigma[1, 0], atol=1e-9)
    for i in range(2):
        for j in range(2):
            assert abs(geo.sigma[i, j] @ g @ geo.e1.array) < 1e-9
            assert abs(geo.sigma[i, j] @ g @ geo.e2.array) < 1e-9
    # orthonormal frame
    assert geo.e1.array @ g @ geo.e1.array == pytest.approx(1.0, abs=1e-12)
    assert geo.e2.array @ g @ geo.e2.array == pytest.approx(1.0, abs=1e-12)
    assert geo.e1.array @ g @ geo.e2.array == pytest.approx(0.0, abs=1e-12)
    # normal basis completes the frame orthonormally
    assert len(geo.normal_basis) == 3
    for b in geo.normal_basis:
        assert b.array @ g @ b.array == pytest.approx(1.0, abs=1e-10)
        assert abs(b.array @ g @ geo.e1.array) < 1e-10


def test_shape_operator_cylinder_example(ch2, magic_cylinder):
    # xi-tangent cylinder: A_H = diag(2|H|^2, 0) = |H| diag(2|H|, 0)
    geo = geometry_at(ch2, magic_cylinder, (0.5, 0.4))
    A = shape_operator(ch2, magic_cylinder, (0.5, 0.4), geo.H)
    assert np.allclose(A, np.diag([0.5, 0.0]), atol=1e-8)  # 2|H|^2 = 0.5 at kappa=1
    # linearity in V
    A2 = shape_operator(ch2, magic_cylinder, (0.5, 0.4), geo.H.scale(2.5))
    assert np.allclose(A2, 2.5 * A, atol=1e-9)
    # trace A_H = 2|H|^2
    assert np.trace(A) == pytest.approx(0.5, abs=1e-8)


def test_shape_operator_rejects_tangent_vector(ch2, magic_cylinder):
    geo = geometry_at(ch2, magic_cylinder, (0.5, 0.4))
    with pytest.raises(ValueError):
        shape_operator(ch2, magic_cylinder, (0.5, 0.4), geo.e1)


def test_weingarten_duality(ch2, rng):
    imm = bumpy_sheet(ch2)
    for _ in range(4):
        params = (rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2))
        geo = geometry_at(ch2, imm, params)
        g = _metric_at_params(ch2, imm, params)
        for V in geo.normal_basis:
            A = shape_operator(ch2, imm, params, V)
            for i, X in enumerate((geo.e1, geo.e2)):
                for j, Y in enumerate((geo.e1, geo.e2)):
                    assert A[i, j] == pytest.approx(geo.sigma[i, j] @ g @ V.array, abs=1e-9)


def test_pmc_residual_examples(ch2, magic_cylinder, wavy_cylinder):
    assert pmc_residual(ch2, magic_cylinder, 16).value < 1e-6
    res = pmc_residual(ch2, wavy_cylinder, 24)
    # normal part of the frame equation picks up kappa'/2; max |kappa'| = 0.1
    assert res.value > 1e-2
    assert res.value > 0.1 / 3.0


def test_pseudo_umbilical_examples(ch2, magic_cylinder):
    imm = plane_slice(ch2, t0=0.0)
    assert pseudo_umbilical_residual(ch2, imm, 8).value < 1e-12
    # xi-tangent cylinder: ||diag(2|H|^2, 0) - |H|^2 Id|| = |H|^2 sqrt(2)
    res = pseudo_umbilical_residual(ch2, magic_cylinder, 8)
    assert res.value == pytest.approx(0.25 * np.sqrt(2.0), abs=1e-8)


def test_anti_invariance_examples(ch2):
    assert anti_invariance_residual(ch2, lagrangian_slice(ch2), 8).value < 1e-9
    assert anti_invariance_residual(ch2, vertical_sheet(ch2), 8).value < 1e-9
    # holomorphic plane is phi-invariant: maximal residual 1
    assert anti_invariance_residual(ch2, plane_slice(ch2), 8).value == pytest.approx(1.0, abs=1e-12)


def test_cylinder_is_anti_invariant(ch2, magic_cylinder):
    assert anti_invariance_residual(ch2, magic_cylinder, 12).value < 1e-9


def test_angle_decomposition_cylinder(ch2, magic_cylinder):
    dec = angle_decomposition(ch2, magic_cylinder, (0.5, 0.3))
    assert dec.mu_defined
    assert dec.mu == pytest.approx(1.0, abs=1e-8)
    assert dec.nu == pytest.approx(0.0, abs=1e-8)
    # A_{H/|H|} eigenvalues: diag(2|H|, 0) therefore lambda2 (xi direction) = 0
    assert dec.lambda1 == pytest.approx(1.0, abs=1e-7)  # 2|H| = 1 at kappa=1
    assert dec.lambda2_eig == pytest.approx(0.0, abs=1e-8)


def test_angle_decomposition_minimal_raises(ch2):
    with pytest.raises(ValueError):
        angle_decomposition(ch2, plane_slice(ch2), (0.1, 0.1))


def test_angle_decomposition_mu_flag(cp2):
    # holomorphic plane with a height tilt: make H nonzero but xi normal?
    # use a sphere point instead: covered in rotational tests; here check the
    # flag via a tilted graph with xi nearly normal
    chart = ProductChart(cp2)

    def fn(u, v):
        return [u, v, 0.2 * (u * u + v * v), 0.0 * u, 0.0 * u]

    imm = CallableImmersion(chart, fn, (-0.3, 0.3), (-0.3, 0.3))
    dec = angle_decomposition(cp2, imm, (0.05, 0.07))
    assert not dec.mu_defined
    assert np.isfinite(dec.nu)


def test_mu_nu_bound(ch2, sphere_ch, rng):
    for _ in range(5):
        u = rng.uniform(*sphere_ch.u_range)
        v = rng.uniform(0, 2 * np.pi)
        dec = angle_decomposition(ch2, sphere_ch, (u, v))
        assert dec.mu**2 + dec.nu**2 <= 1.0 + 1e-9


def test_gauss_curvature_flat_cylinder(ch2, magic_cylinder):
    assert abs(gauss_curvature(ch2, magic_cylinder, (0.7, 0.5))) < 1e-6


def test_gauss_curvature_holomorphic_slice(ch2):
    # a holomorphic plane in the complex factor is totally geodesic with
    # intrinsic curvature equal to the holomorphic sectional curvature
    assert gauss_curvature(ch2, plane_slice(ch2), (0.1, 0.05)) == pytest.approx(-4.0, abs=1e-9)


def test_pmc_reparametrization_invariance(ch2, magic_cylinder):
    shifted = ReparamImmersion(magic_cylinder, a=1.0, du=0.5, dv=0.25)
    u, v = param_grid(magic_cylinder, 12)
    r1 = pmc_residual(ch2, magic_cylinder, (u, v))
    r2 = pmc_residual(ch2, shifted, (u - 0.5, v - 0.25))
    assert r1.value == r2.value  # bit-equal on the shifted grid


def test_degenerate_immersion_rejected(ch2):
    chart = ProductChart(ch2)

    def fn(u, v):
        return [u, 0.0 * u, u * 1.0, 0.0 * u, 0.0 * v]  # rank 1

    imm = CallableImmersion(chart, fn, (-0.2, 0.2), (-0.2, 0.2))
    with pytest.raises(DegenerateImmersionError):
        geometry_at(ch2, imm, (0.1, 0.1))


def test_trace_shape_consistency_on_pmc_surfaces(ch2, magic_cylinder, sphere_ch):
    assert trace_shape_residual(ch2, magic_cylinder, 12).value < 1e-8
    w = np.linspace(*sphere_ch.u_range, 24)
    th = np.arange(8) * (2 * np.pi / 8)
    assert trace_shape_residual(ch2, sphere_ch, (w, th)).value < 1e-8
