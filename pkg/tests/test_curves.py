import numpy as np
import pytest

from cosymgeo.calculus import finite_difference_partial
from cosymgeo.errors import DomainError
from cosymgeo.spaces import ProductChart, SpaceFormSpec, christoffel_values, metric_values
from cosymgeo.surface import geometry_at, pmc_residual
from cosymgeo.qforms import q_value
from cosymgeo.curves import (
    CurvatureLaw,
    FrenetState,
    _j_matrix,
    build_cylinder,
    circle_initial_frame,
    classify_cylinder,
    cylinder_immersion,
    integrate_frenet,
    sinusoidal_curvature,
)


def _m_metric(spec, m):
    full = np.concatenate([np.atleast_2d(m), np.zeros((np.atleast_2d(m).shape[0], 1))], axis=1)
    return metric_values(spec, full)[:, : 2 * spec.n, : 2 * spec.n]


def test_circle_initial_frame_posts(ch2):
    g = _m_metric(ch2, np.zeros(4))[0]
    J = _j_matrix(2)
    for tau in (0.0, 0.5, 1.0, -1.0, -0.3):
        st = circle_initial_frame(ch2, np.zeros(4), 1.2, tau)
        E1, E2 = st.frame
        assert E1 @ g @ E1 == pytest.approx(1.0, abs=1e-12)
        assert E2 @ g @ E2 == pytest.approx(1.0, abs=1e-12)
        assert E1 @ g @ E2 == pytest.approx(0.0, abs=1e-12)
        assert E1 @ g @ (J @ E2) == pytest.approx(tau, abs=1e-12)
    # tau = 0: E2 orthogonal to both E1 and J E1
    st = circle_initial_frame(ch2, np.zeros(4), 1.0, 0.0)
    E1, E2 = st.frame
    assert abs(E2 @ g @ (J @ E1)) < 1e-12


def test_circle_initial_frame_domain_errors():
    spec1 = SpaceFormSpec(1, -4.0)
    with pytest.raises(DomainError):
        circle_initial_frame(spec1, np.zeros(2), 1.0, 0.5)
    spec2 = SpaceFormSpec(2, -4.0)
    with pytest.raises(DomainError):
        circle_initial_frame(spec2, np.zeros(4), 1.0, 1.5)
    with pytest.raises(ValueError):
        circle_initial_frame(spec2, np.zeros(4), -1.0, 0.0)


def test_flat_circle_closes(flat2):
    init = circle_initial_frame(flat2, np.zeros(4), 1.0, 0.0)
    curve = integrate_frenet(flat2, init, 2 * np.pi, 2000)
    p_end, _ = curve.state_at(2 * np.pi)
    assert np.linalg.norm(p_end - init.p) < 1e-6


def test_unit_speed_and_orthonormality_drift(ch2):
    init = circle_initial_frame(ch2, np.zeros(4), 1.0, 0.0)
    curve = integrate_frenet(ch2, init, 2.4, 4096)
    s = np.linspace(0, 2.4, 33)
    pts, frames = curve.states_at(s)
    g = _m_metric(ch2, pts)
    for i in range(2):
        for j in range(2):
            ip = np.einsum("nij,ni,nj->n", g, frames[:, i], frames[:, j])
            target = 1.0 if i == j else 0.0
            assert np.max(np.abs(ip - target)) < 1e-8


def test_torsion_constant_along_circles(ch2):
    # a circle is always a holomorphic circle: tau_12 drift stays tiny
    for tau in (0.0, 0.5, 1.0):
        imm = cylinder_immersion(ch2, 1.1, tau, length=2.0)
        tors = imm.curve.torsion_samples(48)
        assert np.max(np.abs(tors["tau_12"] - tau)) < 1e-6


def test_curvature_recovery_independent_oracle(ch2):
    # measure |nabla_{E1} E1| from finite differences of the evaluation map
    kappa = 1.3
    init = circle_initial_frame(ch2, np.zeros(4), kappa, 0.4)
    curve = integrate_frenet(ch2, init, 1.5, 2048)
    for s0 in (0.4, 0.9):
        pos = lambda p: curve.state_at(p[0])[0]
        d1 = finite_difference_partial(pos, (s0,), (1,))
        d2 = finite_difference_partial(pos, (s0,), (2,))
        p0, _ = curve.state_at(s0)
        gam = christoffel_values(ch2, np.concatenate([p0, [0.0]])[None, :])[0][:4, :4, :4]
        acc = d2 + np.einsum("kij,i,j->k", gam, d1, d1)
        g = _m_metric(ch2, p0)[0]
        measured = np.sqrt(acc @ g @ acc)
        assert measured == pytest.approx(kappa, abs=1e-6)


def test_oneill_lift_identity(ch2, rng):
    # product Christoffels: no mixing with the line factor, so the ambient
    # derivative of a lifted field equals the lift of the base derivative
    pts = np.zeros((5, 5))
    pts[:, :4] = rng.uniform(-0.3, 0.3, size=(5, 4))
    pts[:, 4] = rng.uniform(-1, 1, size=5)
    gam_full = christoffel_values(ch2, pts)
    base = pts.copy()
    base[:, 4] = 0.0
    gam_base = christoffel_values(ch2, base)
    assert np.max(np.abs(gam_full - gam_base)) == 0.0
    assert np.max(np.abs(gam_full[:, 4, :, :])) == 0.0
    assert np.max(np.abs(gam_full[:, :, 4, :])) == 0.0


def test_integration_guards(ch2):
    init = circle_initial_frame(ch2, np.zeros(4), 1.0, 0.0)
    with pytest.raises(ValueError):
        integrate_frenet(ch2, init, 2.0, 150)  # fewer than 100 steps/unit
    with pytest.warns(RuntimeWarning):
        curve = integrate_frenet(ch2, init, 6.0, 6000)
    assert curve.truncated_at is not None
    assert curve.length < 6.0


def test_build_cylinder_geometry(ch2):
    curve = integrate_frenet(ch2, circle_initial_frame(ch2, np.zeros(4), 1.4, 0.5), 2.0, 2048)
    imm = build_cylinder(ch2, curve, t_range=(0.0, 1.0))
    geo = geometry_at(ch2, imm, (0.7, 0.3))
    assert geo.E == pytest.approx(1.0, abs=1e-9)
    assert geo.G == pytest.approx(1.0, abs=1e-12)
    assert geo.F == pytest.approx(0.0, abs=1e-10)
    g = metric_values(ch2, imm.point(0.7, 0.3)[None, :])[0]
    hn = np.sqrt(geo.H.array @ g @ geo.H.array)
    assert hn == pytest.approx(0.7, abs=1e-8)  # |H| = kappa / 2
    # H is parallel to the lifted second frame vector
    _, frame = curve.state_at(0.7)
    E2_lift = np.concatenate([frame[1], [0.0]])
    cosang = (geo.H.array @ g @ E2_lift) / (hn * np.sqrt(E2_lift @ g @ E2_lift))
    assert cosang == pytest.approx(1.0, abs=1e-6)


def test_classify_cylinder_examples(ch2):
    # q vanishes at kappa = (1/2) sqrt(-rho (1 + 3 tau^2))
    cls = classify_cylinder(ch2, 1.0, 0.0)
    assert cls.pmc and cls.q_vanishes
    assert cls.predicted_kappa == pytest.approx(1.0)
    assert cls.h_norm == pytest.approx(0.5)
    cls2 = classify_cylinder(ch2, 2.0, 1.0)
    assert cls2.pmc and cls2.q_vanishes
    assert cls2.predicted_kappa == pytest.approx(2.0)
    cls3 = classify_cylinder(ch2, 1.0, 1.0)
    assert cls3.pmc and not cls3.q_vanishes
    # rho >= 0: no vanishing-Q pmc cylinder exists
    cp = SpaceFormSpec(2, 4.0)
    cls4 = classify_cylinder(cp, 0.8, 0.3, length=1.0)
    assert cls4.pmc and not cls4.vanishing_possible and cls4.predicted_kappa is None


def test_h_bounds_along_matched_family(ch2):
    # |H| = kappa(tau)/2 runs from sqrt(-rho)/4 to sqrt(-rho)/2 as tau sweeps [0, 1]
    lo, hi = 0.25 * np.sqrt(4.0), 0.5 * np.sqrt(4.0)
    for tau in np.linspace(0, 1, 5):
        kap = 0.5 * np.sqrt(-ch2.rho * (1 + 3 * tau**2))
        cls = classify_cylinder(ch2, kap, float(tau), length=0.5)
        assert cls.q_vanishes
        assert lo - 1e-8 <= cls.h_norm <= hi + 1e-8


def test_tau_sign_symmetry(ch2):
    # classification depends only on tau^2 (frame orientation freedom)
    a = classify_cylinder(ch2, 1.3, 0.45, length=0.5)
    b = classify_cylinder(ch2, 1.3, -0.45, length=0.5)
    assert a.q_abs == pytest.approx(b.q_abs, abs=1e-12)


def test_pmc_iff_constant_curvature(ch2, magic_cylinder, wavy_cylinder):
    assert pmc_residual(ch2, magic_cylinder, 16).value < 1e-6
    res = pmc_residual(ch2, wavy_cylinder, 24)
    assert res.value > 0.1 / 3.0  # above a third of max |kappa'|


def test_curve_csv_export(tmp_path, ch2, magic_cylinder):
    path = tmp_path / "curve.csv"
    magic_cylinder.curve.export_csv(path, count=32)
    rows = path.read_text().strip().splitlines()
    assert rows[0].startswith("s,")
    assert len(rows) == 33
