import json

import numpy as np
import pytest

from cosymgeo.cli import main, parse_space
from cosymgeo.errors import ConfigError
from cosymgeo.harness import DEFAULT_TOLERANCES, Scenario, run, scan


BASE_CYL = {
    "space": {"family": "CH", "n": 2, "rho": -4.0},
    "subject": {"kind": "cylinder", "kappa": 1.0, "tau": 0.0},
    "grid": 24,
    "seed": 3,
}


def test_scenario_validation_errors():
    with pytest.raises(ConfigError):
        Scenario.from_dict({"subject": {"kind": "cylinder"}})
    with pytest.raises(ConfigError):
        Scenario.from_dict({"space": {"n": 2, "rho": -4.0}, "subject": {"kind": "wrong"}})
    with pytest.raises(ConfigError):
        Scenario.from_dict(dict(BASE_CYL, checks=["no-such-check"]))
    with pytest.raises(ConfigError):
        Scenario.from_dict(dict(BASE_CYL, checks=["shoot"]))  # sphere-only check
    with pytest.raises(ConfigError):
        Scenario.from_dict(dict(BASE_CYL, tolerances={"bogus": 1.0}))
    with pytest.raises(ConfigError):
        Scenario.from_dict(
            {
                "space": BASE_CYL["space"],
                "subject": {"kind": "custom-surface", "family": "nope"},
            }
        )


def test_run_cylinder_scenario_passes():
    report = run(dict(BASE_CYL))
    assert report.passed
    names = [r.name for r in report.results]
    assert "pmc-residual" in names and "q-vanishing" in names


def test_exit_status_contract():
    # impossible tolerance forces a failure and a nonzero status
    bad = dict(BASE_CYL, subject={"kind": "cylinder", "kappa": 1.3, "tau": 0.0}, checks=["qzero"])
    report = run(bad)
    assert not report.passed  # Q != 0 for kappa off the vanishing locus
    ok = dict(BASE_CYL, checks=["qzero"])
    assert run(ok).passed


def test_report_determinism(tmp_path):
    r1 = run(dict(BASE_CYL), out_dir=str(tmp_path / "a"))
    r2 = run(dict(BASE_CYL), out_dir=str(tmp_path / "b"))
    assert r1.to_json() == r2.to_json()
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def test_report_fields_and_timing_excluded(tmp_path):
    report = run(dict(BASE_CYL), out_dir=str(tmp_path))
    payload = json.loads((tmp_path / "report.json").read_text())
    assert "timings" not in payload
    assert payload["environment"]["version"]
    assert payload["environment"]["seed"] == 3
    for rec in payload["results"]:
        assert set(rec) == {"name", "residual", "tolerance", "pass", "argmax"}
    assert report.timings["total"] > 0
    # CSV artifacts written for cylinders
    assert (tmp_path / "curve.csv").exists()
    assert (tmp_path / "qgrid.csv").exists()


def test_space_checks_scenario():
    rep = run({"space": {"family": "CP", "n": 2, "rho": 4.0}, "subject": {"kind": "space-checks"}, "seed": 11})
    assert rep.passed
    names = {r.name for r in rep.results}
    assert {"curvature-model-match", "phi-sectional-curvature", "first-bianchi", "nabla-phi"} <= names


def test_custom_surface_scenario():
    rep = run(
        {
            "space": {"family": "CH", "n": 2, "rho": -4.0},
            "subject": {"kind": "custom-surface", "family": "lagrangian-slice"},
            "grid": 8,
        }
    )
    assert rep.passed


def test_kappa_scan_locates_root(ch2):
    scenario = dict(BASE_CYL, checks=[])
    result = scan(scenario, "kappa", np.linspace(0.5, 1.5, 11))
    assert len(result["rows"]) == 11
    assert len(result["q_roots"]) == 1
    assert abs(result["q_roots"][0] - 1.0) < 1e-4


def test_scan_sample_cap():
    with pytest.raises(ConfigError):
        scan(dict(BASE_CYL, checks=[]), "kappa", np.linspace(0.5, 1.5, 10_001))


def test_scan_csv_output(tmp_path):
    out = tmp_path / "scan.csv"
    scan(dict(BASE_CYL, checks=[]), "kappa", np.linspace(0.8, 1.2, 5), out_path=str(out))
    rows = out.read_text().strip().splitlines()
    assert rows[0].split(",")[0] == "kappa"
    assert len(rows) == 6


def test_cli_parse_space_and_errors(capsys):
    assert parse_space("CP:3:2") == {"family": "CP", "n": 3, "rho": 2.0}
    with pytest.raises(ConfigError):
        parse_space("CP-3-2")
    rc = main(["cylinder", "--space", "bogus"])
    assert rc == 2


def test_cli_cylinder_roundtrip(tmp_path):
    rc = main(
        [
            "cylinder", "--space", "CH:2:-4", "--kappa", "1.0", "--tau", "0.0",
            "--grid", "24", "--out", str(tmp_path), "--checks", "pmc,qzero",
        ]
    )
    assert rc == 0
    payload = json.loads((tmp_path / "report.json").read_text())
    assert payload["pass"] is True


def test_cli_run_config(tmp_path):
    cfg = tmp_path / "scenario.json"
    cfg.write_text(json.dumps(dict(BASE_CYL, checks=["pmc", "qzero"])))
    assert main(["run", str(cfg)]) == 0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(dict(BASE_CYL, checks=["nope"])))
    assert main(["run", str(bad)]) == 2
