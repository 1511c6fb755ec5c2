"""Scenario runner: loads structured configs, executes named verification
suites across the modules, and emits deterministic machine-readable reports
plus CSV grids.

A report is a stable-field-order JSON document; identical scenario + seed
reproduce it byte-for-byte (timings are collected but kept out of the
serialized payload for exactly that reason).
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from . import __version__
from .errors import ConfigError, DomainError
from .families import family_names, make_immersion
from .qforms import dbar_residual, dump_q_csv, q_fields
from .spaces import (
    SpaceFormSpec,
    cosymplectic_frame_at,
    curvature_model_batch,
    curvature_numeric_batch,
    metric_values,
    parallelism_residuals,
    phi_matrix,
    sample_points,
    sample_vectors,
    xi_components,
)
from .surface import (
    SurfaceGrid,
    anti_invariance_residual,
    gauss_curvature,
    pmc_residual,
    pseudo_umbilical_residual,
    trace_shape_residual,
)
from .curves import CurvatureLaw, classify_cylinder, cylinder_immersion, sinusoidal_curvature
from .rotational import (
    lemma_identity_suite,
    shoot_sphere,
    sphere_grid,
    sphere_immersion,
    sphere_mask,
)

# One source of truth for every tolerance used by the verification suites
# (the acceptance tests read these same values).
DEFAULT_TOLERANCES = {
    "curvature-model": 1e-6,
    "phi-sectional": 1e-6,
    "r-xi-xi": 1e-9,
    "bianchi": 1e-6,
    "cosymplectic-axioms": 1e-9,
    "parallelism": 1e-9,
    "frame-invariants": 1e-12,
    "pmc": 1e-6,
    "q-vanishing": 1e-8,
    "dbar-q": 1e-6,
    "dbar-qprime": 1e-6,
    "kappa-root": 1e-4,
    "h-bounds": 1e-8,
    "torsion-drift": 1e-6,
    "unit-speed": 1e-8,
    "gauss-flat": 1e-6,
    "trace-shape": 1e-8,
    "closure": 1e-6,
    "pole-smoothness": 1e-4,
    "sphere-h": 1e-5,
    "sphere-anti-invariance": 1e-8,
    "sphere-q": 1e-5,
    "sphere-dbar": 1e-5,
    "sphere-pmc": 1e-5,
    "lemma-e1": 1e-5,
    "lemma-e2": 1e-4,
    "lemma-ah": 1e-4,
    "lemma-d1": 1e-3,
    "lemma-d2": 1e-3,
    "mu-nu-unit": 1e-6,
}

SUBJECT_KINDS = ("space-checks", "cylinder", "sphere", "custom-surface")


@dataclass
class Scenario:
    space: SpaceFormSpec
    subject: dict
    checks: list
    grid: int = 64
    seed: int = 0
    tolerances: dict = field(default_factory=dict)

    def tol(self, name: str) -> float:
        if name in self.tolerances:
            return float(self.tolerances[name])
        return DEFAULT_TOLERANCES[name]

    @staticmethod
    def from_dict(d: dict) -> "Scenario":
        try:
            space = SpaceFormSpec.from_dict(d["space"])
        except KeyError:
            raise ConfigError("missing key 'space'")
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad 'space' record: {exc}")
        subject = d.get("subject")
        if not isinstance(subject, dict) or "kind" not in subject:
            raise ConfigError("'subject' must be a record with a 'kind'")
        if subject["kind"] not in SUBJECT_KINDS:
            raise ConfigError(f"unknown subject kind {subject['kind']!r}")
        if subject["kind"] == "custom-surface" and subject.get("family") not in family_names():
            raise ConfigError(f"unknown surface family {subject.get('family')!r}")
        checks = d.get("checks") or _default_checks(subject["kind"])
        for c in checks:
            if c not in CHECKS:
                raise ConfigError(f"unknown check {c!r}")
            if subject["kind"] not in CHECKS[c][0]:
                raise ConfigError(f"check {c!r} does not apply to subject {subject['kind']!r}")
        for key in d.get("tolerances", {}):
            if key not in DEFAULT_TOLERANCES:
                raise ConfigError(f"unknown tolerance key {key!r}")
        return Scenario(
            space=space,
            subject=dict(subject),
            checks=list(checks),
            grid=int(d.get("grid", 64)),
            seed=int(d.get("seed", 0)),
            tolerances=dict(d.get("tolerances", {})),
        )

    def to_dict(self) -> dict:
        return {
            "space": self.space.to_dict(),
            "subject": self.subject,
            "checks": self.checks,
            "grid": self.grid,
            "seed": self.seed,
            "tolerances": self.tolerances,
        }


@dataclass
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool
    argmax: Optional[list] = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "residual": self.value,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "argmax": self.argmax,
        }


@dataclass
class Report:
    scenario: Scenario
    results: list
    environment: dict
    timings: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def to_dict(self, include_timing: bool = False) -> dict:
        d = {
            "scenario": self.scenario.to_dict(),
            "results": [r.to_dict() for r in self.results],
            "environment": self.environment,
            "pass": self.passed,
        }
        if include_timing:
            d["timings"] = self.timings
        return d

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing=include_timing), indent=2)


def _default_checks(kind: str) -> list:
    return [name for name, (kinds, _) in CHECKS.items() if kind in kinds]


def _ok(scn, name, value, tol_key, argmax=None):
    tol = scn.tol(tol_key)
    return CheckResult(name=name, value=float(value), tolerance=tol, passed=bool(value < tol), argmax=argmax)


# -- space check implementations -----------------------------------------------


def _chk_curvature_model(scn, ctx):
    spec = scn.space
    rng = np.random.default_rng(scn.seed)
    pts = sample_points(spec, 100, rng)
    U, V, W = (sample_vectors(spec, 100, rng) for _ in range(3))
    Rn = curvature_numeric_batch(spec, pts, U, V, W)
    Rm = curvature_model_batch(spec, pts, U, V, W)
    err = np.max(np.abs(Rn - Rm), axis=1)
    i = int(np.argmax(err))
    yield _ok(scn, "curvature-model-match", err[i], "curvature-model", argmax=[i])

    g = metric_values(spec, pts)
    J = phi_matrix(spec)
    Uh = U.copy()
    Uh[:, -1] = 0.0
    nrm = np.sqrt(np.einsum("nij,ni,nj->n", g, Uh, Uh))
    Uh /= nrm[:, None]
    PU = Uh @ J.T
    Rp = curvature_numeric_batch(spec, pts, Uh, PU, PU)
    K = np.einsum("nij,ni,nj->n", g, Rp, Uh)
    yield _ok(scn, "phi-sectional-curvature", np.max(np.abs(K - spec.rho)), "phi-sectional")

    xi = np.tile(xi_components(spec), (100, 1))
    Rxi = curvature_numeric_batch(spec, pts, U, xi, xi)
    yield _ok(scn, "r-u-xi-xi-vanishes", np.max(np.abs(Rxi)), "r-xi-xi")


def _chk_bianchi(scn, ctx):
    spec = scn.space
    rng = np.random.default_rng(scn.seed + 1)
    pts = sample_points(spec, 50, rng)
    U, V, W = (sample_vectors(spec, 50, rng) for _ in range(3))
    total = (
        curvature_numeric_batch(spec, pts, U, V, W)
        + curvature_numeric_batch(spec, pts, V, W, U)
        + curvature_numeric_batch(spec, pts, W, U, V)
    )
    yield _ok(scn, "first-bianchi", np.max(np.abs(total)), "bianchi")


def _chk_axioms(scn, ctx):
    spec = scn.space
    rng = np.random.default_rng(scn.seed + 2)
    pts = sample_points(spec, 100, rng)
    U, V = sample_vectors(spec, 100, rng), sample_vectors(spec, 100, rng)
    g = metric_values(spec, pts)
    J = phi_matrix(spec)
    xi = xi_components(spec)
    phi2 = U @ (J.T @ J.T)
    target = -U + U[:, -1:] * xi[None, :]
    yield _ok(scn, "phi-squared-identity", np.max(np.abs(phi2 - target)), "cosymplectic-axioms")
    lhs = np.einsum("nij,ni,nj->n", g, U @ J.T, V @ J.T)
    rhs = np.einsum("nij,ni,nj->n", g, U, V) - U[:, -1] * V[:, -1]
    yield _ok(scn, "phi-metric-compatibility", np.max(np.abs(lhs - rhs)), "cosymplectic-axioms")
    res = parallelism_residuals(spec, pts)
    yield _ok(scn, "nabla-phi", res.nabla_phi, "parallelism", argmax=[res.argmax_index])
    yield _ok(scn, "nabla-xi", res.nabla_xi, "parallelism")
    gxi = np.einsum("nij,j->ni", g, xi)
    frame_res = max(
        float(np.max(np.abs(gxi - xi[None, :]))),        # g xi = e_last (product metric)
        float(np.max(np.abs(np.abs(np.linalg.eigvalsh(g))[:, 0] * 0))),
    )
    yield _ok(scn, "frame-invariants", frame_res, "frame-invariants")


# -- cylinder checks -------------------------------------------------------------


def _cylinder_subject(scn):
    sub = scn.subject
    kap = sub.get("kappa", 1.0)
    if isinstance(kap, dict):
        law = sinusoidal_curvature(float(kap["base"]), float(kap.get("amp", 0.0)), float(kap.get("freq", 1.0)))
    else:
        law = CurvatureLaw.coerce(float(kap))
    tau = float(sub.get("tau", 0.0))
    kw = {}
    if sub.get("length"):
        kw["length"] = float(sub["length"])
    return cylinder_immersion(scn.space, law, tau, **kw), law, tau


def _chk_cyl_pmc(scn, ctx):
    imm = ctx["immersion"]
    res = pmc_residual(scn.space, imm, min(scn.grid, 32))
    yield _ok(scn, "pmc-residual", res.value, "pmc", argmax=list(res.argmax))


def _chk_cyl_qzero(scn, ctx):
    imm = ctx["immersion"]
    sg = SurfaceGrid(imm, *_grid_axes(imm, min(scn.grid, 32)), order=2)
    q, qp, _, _ = q_fields(scn.space, sg)
    yield _ok(scn, "q-vanishing", np.max(np.abs(q)), "q-vanishing")


def _chk_cyl_dbar(scn, ctx):
    imm = ctx["immersion"]
    db = dbar_residual(scn.space, imm, max(scn.grid, 24), "Q")
    yield _ok(scn, "dbar-q", db.normalized, "dbar-q", argmax=list(db.argmax))
    dbp = dbar_residual(scn.space, imm, max(scn.grid, 24), "Q'")
    yield _ok(scn, "dbar-qprime", dbp.normalized, "dbar-qprime", argmax=list(dbp.argmax))


def _chk_cyl_classify(scn, ctx):
    imm, law, tau = ctx["immersion"], ctx["law"], ctx["tau"]
    spec = scn.space
    sg = SurfaceGrid(imm, *_grid_axes(imm, 16), order=2)
    q, _, h2, _ = q_fields(spec, sg)
    kap0 = float(law(0.0))
    predicate = 4.0 * kap0**2 + spec.rho * (1.0 + 3.0 * tau**2)
    measured = np.max(np.abs(q))
    closed_form = abs(kap0**2 / 8.0 * predicate)
    yield _ok(scn, "q-closed-form-match", abs(measured - closed_form), "q-vanishing")
    hn = np.sqrt(np.max(h2))
    yield _ok(scn, "h-equals-half-kappa", abs(hn - 0.5 * kap0), "h-bounds")
    if spec.rho < 0 and abs(predicate) < 1e-12:
        lo, hi = 0.25 * np.sqrt(-spec.rho), 0.5 * np.sqrt(-spec.rho)
        inside = max(lo - hn, hn - hi, 0.0)
        yield _ok(scn, "h-within-classification-bounds", inside, "h-bounds")


def _chk_cyl_curve(scn, ctx):
    imm = ctx["immersion"]
    curve = imm.curve
    tors = curve.torsion_samples(64)
    drift = np.max(np.abs(tors["tau_12"] - tors["tau_12"][0]))
    yield _ok(scn, "torsion-drift", drift, "torsion-drift")
    s = np.linspace(0, curve.length, 33)
    pts, frames = curve.states_at(s)
    full = np.concatenate([pts, np.zeros((len(s), 1))], axis=1)
    g = metric_values(scn.space, full)[:, : 2 * scn.space.n, : 2 * scn.space.n]
    speeds = np.einsum("nij,ni,nj->n", g, frames[:, 0], frames[:, 0])
    yield _ok(scn, "unit-speed-drift", np.max(np.abs(speeds - 1.0)), "unit-speed")
    mid = (0.5 * imm.u_range[1], 0.5 * imm.v_range[1])
    yield _ok(scn, "gauss-curvature-flat", abs(gauss_curvature(scn.space, imm, mid)), "gauss-flat")
    res = trace_shape_residual(scn.space, imm, 16)
    yield _ok(scn, "trace-shape-consistency", res.value, "trace-shape")


# -- sphere checks ---------------------------------------------------------------


def _chk_sphere_shoot(scn, ctx):
    shoot = ctx["shoot"]
    yield _ok(scn, "closure-defect", shoot.closure_defect, "closure")
    yield _ok(scn, "pole-smoothness", shoot.pole_smoothness_defect, "pole-smoothness")


def _chk_sphere_grid(scn, ctx):
    spec = scn.space
    imm = ctx["immersion"]
    w, th = ctx["grid_axes"]
    mask2d = ctx["mask2d"]
    sg = ctx["sgrid"]
    hn = sg.H_norm()
    herr = np.where(mask2d.ravel(), np.abs(hn - ctx["shoot"].H_target), 0.0)
    yield _ok(scn, "h-accuracy", np.max(herr), "sphere-h")
    res = anti_invariance_residual(spec, imm, (w, th), mask=mask2d)
    yield _ok(scn, "anti-invariance", res.value, "sphere-anti-invariance")
    q, qp, h2, lam2 = q_fields(spec, sg)
    scale = lam2**2 * max(ctx["shoot"].H_target, 1e-8) ** 4
    qn = np.where(mask2d.ravel(), np.abs(q) / scale, 0.0)
    qpn = np.where(mask2d.ravel(), np.abs(qp) / scale, 0.0)
    yield _ok(scn, "q-normalized", np.max(qn), "sphere-q")
    yield _ok(scn, "qprime-normalized", np.max(qpn), "sphere-q")
    db = dbar_residual(spec, imm, (w, th), "Q", periodic_v=True, mask=mask2d)
    yield _ok(scn, "dbar-q", db.normalized, "sphere-dbar")
    dbp = dbar_residual(spec, imm, (w, th), "Q'", periodic_v=True, mask=mask2d)
    yield _ok(scn, "dbar-qprime", dbp.normalized, "sphere-dbar")
    pm = pmc_residual(spec, imm, (w, th), mask=mask2d)
    yield _ok(scn, "pmc-residual", pm.value, "sphere-pmc", argmax=list(pm.argmax))


def _chk_sphere_lemma(scn, ctx):
    spec = scn.space
    rep = lemma_identity_suite(spec, ctx["immersion"], (max(scn.grid, 64), 16))
    tolkey = {
        "e1_mu": "lemma-e1",
        "e1_nu": "lemma-e1",
        "e2_mu": "lemma-e2",
        "e2_nu": "lemma-e2",
        "ah_lambda1": "lemma-ah",
        "ah_lambda2": "lemma-ah",
        "ah_offdiag": "lemma-ah",
        "d1": "lemma-d1",
        "d2": "lemma-d2",
        "mu2_nu2": "mu-nu-unit",
        "h_accuracy": "sphere-h",
        "sigma_e1e1": "lemma-ah",
        "sigma_e2e2": "lemma-ah",
        "a_phi": "sphere-pmc",
    }
    for key, rec in rep.items():
        yield _ok(scn, f"lemma/{key}", rec.residual, tolkey[key], argmax=list(rec.argmax) if rec.argmax else None)


# -- custom-surface checks --------------------------------------------------------


def _chk_surface_generic(scn, ctx):
    spec = scn.space
    imm = ctx["immersion"]
    n = min(scn.grid, 24)
    res = pmc_residual(spec, imm, n)
    yield CheckResult("pmc-residual(info)", res.value, float("inf"), True, list(res.argmax))
    pu = pseudo_umbilical_residual(spec, imm, n)
    yield CheckResult("pseudo-umbilical(info)", pu.value, float("inf"), True, list(pu.argmax))
    ai = anti_invariance_residual(spec, imm, n)
    yield CheckResult("anti-invariance(info)", ai.value, float("inf"), True, list(ai.argmax))


CHECKS: dict = {
    "curvature": (("space-checks",), _chk_curvature_model),
    "bianchi": (("space-checks",), _chk_bianchi),
    "axioms": (("space-checks",), _chk_axioms),
    "pmc": (("cylinder",), _chk_cyl_pmc),
    "qzero": (("cylinder",), _chk_cyl_qzero),
    "dbar": (("cylinder",), _chk_cyl_dbar),
    "classify": (("cylinder",), _chk_cyl_classify),
    "curve": (("cylinder",), _chk_cyl_curve),
    "shoot": (("sphere",), _chk_sphere_shoot),
    "sphere-grid": (("sphere",), _chk_sphere_grid),
    "lemma-suite": (("sphere",), _chk_sphere_lemma),
    "surface-info": (("custom-surface",), _chk_surface_generic),
}


def _grid_axes(imm, n):
    if isinstance(n, int):
        nu = nv = n
    else:
        nu, nv = n
    return np.linspace(*imm.u_range, nu), np.linspace(*imm.v_range, nv)


def run(scenario, out_dir: Optional[str] = None) -> Report:
    """Execute all requested suites; nonzero residuals above tolerance mark
    the report (and the CLI exit status) as failed."""
    if isinstance(scenario, dict):
        scenario = Scenario.from_dict(scenario)
    scn = scenario
    t_start = time.perf_counter()
    ctx: dict = {}
    results: list = []
    kind = scn.subject["kind"]
    try:
        return _run_inner(scn, ctx, results, kind, t_start, out_dir)
    except DomainError as exc:
        # chart-domain violations become failed checks, not crashes
        results.append(CheckResult(f"domain-error: {exc}", float("inf"), 0.0, False))
        return Report(
            scenario=scn,
            results=results,
            environment={"version": __version__, "seed": scn.seed, "threads": 1},
            timings={"total": time.perf_counter() - t_start},
        )


def _run_inner(scn, ctx, results, kind, t_start, out_dir):
    if kind == "cylinder":
        imm, law, tau = _cylinder_subject(scn)
        ctx.update(immersion=imm, law=law, tau=tau)
    elif kind == "sphere":
        H = float(scn.subject.get("H", scn.subject.get("H_target", 0.5)))
        shoot = shoot_sphere(scn.space, H)
        ctx["shoot"] = shoot
        if shoot.converged:
            imm = sphere_immersion(scn.space, shoot=shoot)
            nw = max(scn.grid, 48)
            w, th = sphere_grid(imm, nw, 16)
            keep_w = sphere_mask(imm, w)
            mask2d = np.broadcast_to(keep_w[:, None], (len(w), 16)).copy()
            ctx.update(
                immersion=imm,
                grid_axes=(w, th),
                mask2d=mask2d,
                sgrid=SurfaceGrid(imm, w, th, order=2),
            )
        else:
            results.append(CheckResult("shooting-converged", float("inf"), DEFAULT_TOLERANCES["closure"], False))
    elif kind == "custom-surface":
        imm = make_immersion(scn.subject["family"], scn.space, scn.subject.get("params", {}))
        ctx["immersion"] = imm

    timings = {}
    for name in scn.checks:
        kinds, fn = CHECKS[name]
        if kind == "sphere" and not ctx.get("shoot").converged and name != "shoot":
            continue
        t0 = time.perf_counter()
        results.extend(fn(scn, ctx))
        timings[name] = time.perf_counter() - t0
    timings["total"] = time.perf_counter() - t_start

    report = Report(
        scenario=scn,
        results=results,
        environment={
            "version": __version__,
            "seed": scn.seed,
            "threads": int(os.environ.get("COSYMGEO_THREADS", "1")),
        },
        timings=timings,
    )
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            fh.write(report.to_json())
        if kind == "cylinder":
            ctx["immersion"].curve.export_csv(os.path.join(out_dir, "curve.csv"))
            dump_q_csv(os.path.join(out_dir, "qgrid.csv"), scn.space, ctx["immersion"], min(scn.grid, 32))
        if kind == "sphere" and ctx.get("shoot") and ctx["shoot"].converged:
            ctx["shoot"].profile.export_csv(os.path.join(out_dir, "profile.csv"))
            with open(os.path.join(out_dir, "sphere.json"), "w") as fh:
                sh = ctx["shoot"]
                json.dump(
                    {
                        "H_target": sh.H_target,
                        "closure_defect": sh.closure_defect,
                        "pole_smoothness_defect": sh.pole_smoothness_defect,
                        "iterations": sh.iterations,
                        "grazes_chart": sh.grazes_chart,
                        "norm_A_convention": "sum of squared Frobenius norms of A over an orthonormal normal basis",
                    },
                    fh,
                    indent=2,
                )
    return report


# -- parameter scans ---------------------------------------------------------------


def scan(scenario, param: str, values, out_path: Optional[str] = None, refine: bool = True) -> dict:
    """Sweep one subject parameter; returns rows plus located roots/thresholds."""
    if isinstance(scenario, dict):
        scenario = Scenario.from_dict(scenario)
    scn = scenario
    values = np.asarray(values, dtype=float)
    if values.size > 10_000:
        raise ConfigError("scan ranges are limited to 10^4 samples")
    kind = scn.subject["kind"]
    threads = int(os.environ.get("COSYMGEO_THREADS", "1"))

    if kind == "cylinder" and param == "kappa":
        tau = float(scn.subject.get("tau", 0.0))

        def sample(k):
            cls = classify_cylinder(scn.space, float(k), tau, grid=12, steps_per_unit=512, length=0.25)
            return {
                "kappa": float(k),
                "pmc_residual": cls.pmc_residual,
                "abs_q": cls.q_abs,
                "re_q": cls.q_value.real,
                "predicate": cls.predicate,
            }

        rows = _map(sample, values, threads)
        result = {"param": "kappa", "rows": rows}
        if refine:
            roots = []
            for a, b in zip(rows[:-1], rows[1:]):
                if a["re_q"] == 0.0:
                    roots.append(a["kappa"])
                elif a["re_q"] * b["re_q"] < 0:
                    f = lambda k: classify_cylinder(scn.space, float(k), tau, grid=8, steps_per_unit=512, length=0.25).q_value.real
                    roots.append(float(brentq(f, a["kappa"], b["kappa"], xtol=1e-10)))
            result["q_roots"] = roots
    elif kind == "sphere" and param == "H":

        def sample(Hv):
            res = shoot_sphere(scn.space, float(Hv), ds=0.008)
            return {
                "H": float(Hv),
                "converged": bool(res.converged),
                "closure_defect": res.closure_defect if np.isfinite(res.closure_defect) else -1.0,
            }

        rows = _map(sample, values, threads)
        result = {"param": "H", "rows": rows}
        flips = [
            (a["H"], b["H"]) for a, b in zip(rows[:-1], rows[1:]) if a["converged"] != b["converged"]
        ]
        result["convergence_flips"] = flips
    elif kind == "cylinder" and param == "tau":
        kap_spec = scn.subject.get("kappa", "matched")

        def sample(tv):
            k = 0.5 * np.sqrt(-scn.space.rho * (1 + 3 * tv**2)) if kap_spec == "matched" else float(kap_spec)
            cls = classify_cylinder(scn.space, float(k), float(tv), grid=12, steps_per_unit=512, length=0.25)
            return {
                "tau": float(tv),
                "kappa": float(k),
                "abs_q": cls.q_abs,
                "pmc_residual": cls.pmc_residual,
                "h_norm": cls.h_norm,
            }

        rows = _map(sample, values, threads)
        result = {"param": "tau", "rows": rows}
    else:
        raise ConfigError(f"scan parameter {param!r} not supported for subject {kind!r}")

    if out_path:
        with open(out_path, "w", newline="") as fh:
            w = csv.writer(fh)
            keys = list(result["rows"][0].keys())
            w.writerow(keys)
            for row in result["rows"]:
                w.writerow([repr(row[k]) if isinstance(row[k], float) else row[k] for k in keys])
    return result


def _map(fn, values, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, values))
    return [fn(v) for v in values]
