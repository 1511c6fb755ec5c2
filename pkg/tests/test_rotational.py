import numpy as np
import pytest

from cosymgeo.calculus import Jet
from cosymgeo.errors import DomainError
from cosymgeo.spaces import ProductChart, SpaceFormSpec, curvature_numeric_batch, metric_values
from cosymgeo.surface import CallableImmersion, SurfaceGrid, anti_invariance_residual, pmc_residual, geometry_at
from cosymgeo.qforms import q_fields, dbar_residual
from cosymgeo.rotational import (
    SliceModel,
    _measured_profile_H,
    lemma_identity_suite,
    real_slice_embed,
    shoot_sphere,
    sphere_grid,
    sphere_immersion,
    sphere_mask,
)


def test_radial_map_against_closed_forms(cp2, ch2, flat2):
    # quadrature + Newton inversion vs tan / tanh / identity
    m = SliceModel(cp2)
    for r in (0.2, 0.8, 1.4):
        assert m.chart_radius(np.array([r]))[0] == pytest.approx(np.tan(r), abs=1e-11)
    assert m.r_sup == pytest.approx(np.pi / 2, abs=1e-10)
    m2 = SliceModel(ch2)
    for r in (0.4, 1.2, 2.5):
        assert m2.chart_radius(np.array([r]))[0] == pytest.approx(np.tanh(r), abs=1e-11)
    m0 = SliceModel(flat2)
    assert m0.chart_radius(np.array([1.7]))[0] == pytest.approx(1.7, abs=1e-12)


def test_warp_against_closed_forms(cp2, ch2):
    m = SliceModel(cp2)
    r = np.array([0.3, 0.9, 1.4])
    rows = m.sn2_taylor(r, 1)
    assert np.allclose(rows[0], np.sin(r) ** 2, atol=1e-12)
    assert np.allclose(rows[1], np.sin(2 * r), atol=1e-11)
    # reflected branch past the cut locus
    rr = np.array([np.pi / 2 + 0.25])
    rows = m.sn2_taylor(rr, 1)
    assert rows[0][0] == pytest.approx(np.sin(rr[0]) ** 2, abs=1e-11)
    assert rows[1][0] == pytest.approx(np.sin(2 * rr[0]), abs=1e-10)
    m2 = SliceModel(ch2)
    rows = m2.sn2_taylor(np.array([0.8]), 1)
    assert rows[0][0] == pytest.approx(np.sinh(0.8) ** 2, abs=1e-12)


def test_real_slice_embed_points(ch2):
    p = real_slice_embed(ch2, 0.0, 0.3, 0.5)
    assert p.m == (0.0, 0.0, 0.0, 0.0)
    assert p.t == 0.5
    p2 = real_slice_embed(ch2, 0.7, np.pi / 3, -0.2)
    R = np.tanh(0.7)
    assert p2.m[0] == pytest.approx(R * np.cos(np.pi / 3), abs=1e-10)
    assert p2.m[2] == pytest.approx(R * np.sin(np.pi / 3), abs=1e-10)
    assert p2.m[1] == 0.0 and p2.m[3] == 0.0


def test_slice_tube_is_anti_invariant(ch2):
    # image surface {theta, t} at fixed small r
    model = SliceModel(ch2)
    chart = ProductChart(ch2)

    def fn(th, t):
        r_jet = 0.0 * th + 0.25
        return model.embed_jets(r_jet, th, t, th.table.order)

    imm = CallableImmersion(chart, fn, (0.0, 2 * np.pi), (0.0, 1.0))
    assert anti_invariance_residual(ch2, imm, 8).value < 1e-9


def test_slice_sectional_curvature_quarter_rho(ch2, cp2, rng):
    # Chen-Ogiue: the totally geodesic real slice has constant curvature rho/4;
    # measured as the ambient sectional curvature of its tangent planes
    for spec in (ch2, cp2):
        model = SliceModel(spec)
        pts = []
        for _ in range(6):
            r, th = rng.uniform(0.1, 0.6), rng.uniform(0, 2 * np.pi)
            pts.append(model.embed_point(r, th, 0.0))
        pts = np.array(pts)
        g = metric_values(spec, pts)
        # tangent vectors of the slice: radial and angular chart directions
        U = np.zeros((6, 5))
        V = np.zeros((6, 5))
        U[:, 0] = pts[:, 2]
        U[:, 2] = -pts[:, 0]
        V[:, 0] = pts[:, 0]
        V[:, 2] = pts[:, 2]
        U /= np.sqrt(np.einsum("nij,ni,nj->n", g, U, U))[:, None]
        V -= np.einsum("nij,ni,nj->n", g, V, U)[:, None] * U
        V /= np.sqrt(np.einsum("nij,ni,nj->n", g, V, V))[:, None]
        R = curvature_numeric_batch(spec, pts, U, V, V)
        K = np.einsum("nij,ni,nj->n", g, R, U)
        assert np.max(np.abs(K - spec.rho / 4.0)) < 1e-5


def test_measured_profile_h_flat_sphere(flat2):
    model = SliceModel(flat2)
    R0, s = 2.0, 0.7
    r, alpha, ap = R0 * np.sin(s / R0), s / R0, 1.0 / R0
    rows = model.sn2_taylor(np.array([r]), 1)
    assert _measured_profile_H(float(rows[0][0]), float(rows[1][0]), alpha, ap) == pytest.approx(0.5, abs=1e-12)


def test_flat_shoot_recovers_round_sphere(flat2):
    res = shoot_sphere(flat2, 0.5)
    assert res.converged
    assert res.profile.r.max() == pytest.approx(2.0, abs=1e-5)
    assert res.profile.h[-1] == pytest.approx(4.0, abs=1e-6)
    assert res.profile.length == pytest.approx(2 * np.pi, abs=1e-3)


def test_shoot_results_and_first_integral(cp2, ch2, sphere_cp, sphere_ch):
    for spec, imm, c in ((cp2, sphere_cp, 1.0), (ch2, sphere_ch, -1.0)):
        shoot = imm.shoot
        assert shoot.converged
        assert shoot.closure_defect < 1e-6
        assert shoot.pole_smoothness_defect < 1e-4
        prof = shoot.profile
        # independent conserved-quantity oracle for the cmc profile flow
        H = shoot.H_target
        if c > 0:
            I = np.sin(prof.r) * np.sin(prof.alpha) + 2 * H * np.cos(prof.r)
            expect = 2 * H
        else:
            I = np.sinh(prof.r) * np.sin(prof.alpha) - 2 * H * np.cosh(prof.r)
            expect = -2 * H
        assert np.max(np.abs(I - expect)) < 1e-6


def test_profile_mirror_symmetry(sphere_ch, sphere_cp):
    assert sphere_ch.shoot.profile.mirror_defect() < 1e-6
    assert sphere_cp.shoot.profile.mirror_defect() < 1e-6


def test_hyperbolic_threshold(ch2):
    res = shoot_sphere(ch2, 0.4, ds=0.008)
    assert not res.converged
    assert "threshold" in res.verdict
    res2 = shoot_sphere(ch2, 0.6, ds=0.008)
    assert res2.converged


def test_shoot_invalid_h(ch2):
    with pytest.raises(ValueError):
        shoot_sphere(ch2, -0.5)


def test_sphere_isothermal_and_h_accuracy(ch2, sphere_ch):
    w, th = sphere_grid(sphere_ch, 40, 10)
    sg = SurfaceGrid(sphere_ch, w, th, order=2)
    Ev, Fv, Gv = sg.E.value, sg.F.value, sg.G.value
    assert np.max(np.abs(Ev - Gv) + np.abs(Fv)) < 1e-7 * np.min(Ev)
    assert np.max(np.abs(sg.H_norm() - 0.6)) < 1e-5


def test_sphere_anti_invariance_and_q(ch2, sphere_ch):
    w, th = sphere_grid(sphere_ch, 40, 10)
    assert anti_invariance_residual(ch2, sphere_ch, (w, th)).value < 1e-8
    sg = SurfaceGrid(sphere_ch, w, th, order=2)
    q, qp, h2, lam2 = q_fields(ch2, sg)
    scale = lam2**2 * 0.6**4
    assert np.max(np.abs(q) / scale) < 1e-5
    assert np.max(np.abs(qp) / scale) < 1e-5


def test_sphere_pmc_and_dbar(ch2, sphere_ch):
    w, th = sphere_grid(sphere_ch, 40, 12)
    assert pmc_residual(ch2, sphere_ch, (w, th)).value < 1e-5
    db = dbar_residual(ch2, sphere_ch, (w, th), "Q", periodic_v=True)
    assert db.normalized < 1e-5


def test_lemma_identity_suite_ch(ch2, sphere_ch):
    rep = lemma_identity_suite(ch2, sphere_ch, (64, 12))
    assert rep["e1_mu"].residual < 1e-5
    assert rep["e1_nu"].residual < 1e-5
    assert rep["e2_mu"].residual < 1e-4
    assert rep["e2_nu"].residual < 1e-4
    assert rep["ah_lambda1"].residual < 1e-4
    assert rep["ah_lambda2"].residual < 1e-4
    assert rep["d1"].residual < 1e-3
    assert rep["d2"].residual < 1e-3
    assert rep["mu2_nu2"].residual < 1e-6
    assert rep["a_phi"].residual < 1e-5
    assert rep["sigma_e1e1"].residual < 1e-4
    assert rep["sigma_e2e2"].residual < 1e-4


def test_lemma_identity_suite_cp_graze(cp2, sphere_cp):
    assert sphere_cp.shoot.grazes_chart
    rep = lemma_identity_suite(cp2, sphere_cp, (64, 12))
    assert rep["d1"].residual < 1e-3
    assert rep["d2"].residual < 1e-3
    assert rep["e2_mu"].residual < 1e-4
    assert rep["mu2_nu2"].residual < 1e-6


def test_3d_and_5d_mean_curvature_agree(ch2, sphere_ch):
    # the intrinsic slice-coordinate measurement that drives the shooting
    # matches the full ambient pipeline on the finished surface
    integ = sphere_ch.integ
    for w in (-0.8, 0.1, 1.1):
        st = sphere_ch._state_at_w(w)
        ap = integ.solve_alpha_rate(st[0], st[2])
        q, qp = integ.q_pair(st[0])
        h3 = _measured_profile_H(q, qp, st[2], ap)
        geo = geometry_at(ch2, sphere_ch, (w, 0.3))
        g = metric_values(ch2, sphere_ch.point(w, 0.3)[None, :])[0]
        h5 = np.sqrt(geo.H.array @ g @ geo.H.array)
        assert h5 == pytest.approx(abs(h3), abs=1e-8)


def test_profile_csv_export(tmp_path, sphere_ch):
    path = tmp_path / "profile.csv"
    sphere_ch.shoot.profile.export_csv(path)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "s,r,h,alpha,H_measured"
    assert len(rows) > 100


def test_embed_domain_guard(cp2):
    model = SliceModel(cp2)
    with pytest.raises(DomainError):
        real_slice_embed(cp2, 2 * model.r_sup + 0.5, 0.0, 0.0, model=model)
