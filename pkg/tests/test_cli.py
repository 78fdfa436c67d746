"""End-to-end driver tests on a deliberately cheap domain (sigma_min=0.05,
ns=41, nz=266) so the full pipeline stays in CI territory."""

import dataclasses
import filecmp
import json
import subprocess
import sys

import numpy as np
import pytest

import helibend.geometry
from helibend import cli

CHEAP = {
    "scale": {"kind": "power", "c": 0.1, "p": 1.5,
              "sigma_min": 0.05, "sigma_max": 1.0},
    "solver": {"h_s": 0.0625, "h_z": float(np.pi / 12)},
    "fixpoint": {"tol": 1e-8, "max_steps": 50},
    "deterministic": True,
}


def write_cfg(path, extra=None):
    cfg = json.loads(json.dumps(CHEAP))
    for key, val in (extra or {}).items():
        if isinstance(val, dict):
            cfg.setdefault(key, {}).update(val)
        else:
            cfg[key] = val
    path.write_text(json.dumps(cfg))
    return str(path)


@pytest.fixture(scope="module")
def cfg_file(tmp_path_factory):
    return write_cfg(tmp_path_factory.mktemp("cli") / "cheap.json")


@pytest.fixture(scope="module")
def constructed(cfg_file, tmp_path_factory):
    out = tmp_path_factory.mktemp("con")
    rc = cli.main(["construct", "--config", cfg_file, "--out", str(out)])
    assert rc == 0
    return out


# --- config and argument validation ----------------------------------------


def test_missing_config_file(tmp_path):
    rc = cli.main(["verify-geometry", "--config", str(tmp_path / "no.json"),
                   "--out", str(tmp_path)])
    assert rc == 2


def test_unparsable_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{ not json")
    rc = cli.main(["verify-geometry", "--config", str(p),
                   "--out", str(tmp_path)])
    assert rc == 2


def test_unknown_top_level_key(tmp_path):
    p = write_cfg(tmp_path / "c.json", {"wheels": 4})
    assert cli.main(["verify-geometry", "--config", p,
                     "--out", str(tmp_path)]) == 2


def test_unknown_section_key(tmp_path):
    p = write_cfg(tmp_path / "c.json", {"scale": {"sparkle": True}})
    assert cli.main(["verify-geometry", "--config", p,
                     "--out", str(tmp_path)]) == 2


def test_tau_out_of_range(tmp_path):
    # 1 - 20 tau must stay positive
    p = write_cfg(tmp_path / "c.json", {"domain": {"tau": 0.06}})
    assert cli.main(["verify-geometry", "--config", p,
                     "--out", str(tmp_path)]) == 2


def test_deterministic_must_be_bool(tmp_path):
    p = write_cfg(tmp_path / "c.json", {"deterministic": "yes"})
    assert cli.main(["construct", "--config", p,
                     "--out", str(tmp_path)]) == 2


def test_nonpositive_grid_scale(cfg_file, tmp_path):
    rc = cli.main(["solve-linear", "--config", cfg_file,
                   "--out", str(tmp_path), "--grid-scale", "-1"])
    assert rc == 2


def test_unknown_rhs_spec(cfg_file, tmp_path):
    rc = cli.main(["solve-linear", "nonsense", "--config", cfg_file,
                   "--out", str(tmp_path)])
    assert rc == 2


def test_version_subprocess():
    out = subprocess.run([sys.executable, "-m", "helibend.cli", "--version"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert "helibend" in out.stdout


# --- verify-geometry --------------------------------------------------------


def test_verify_geometry_passes(cfg_file, tmp_path):
    rc = cli.main(["verify-geometry", "--config", cfg_file,
                   "--out", str(tmp_path)])
    assert rc == 0
    rep = json.loads((tmp_path / "verify_geometry.json").read_text())
    assert rep["passed"] is True
    assert rep["max_deviation"] <= 1e-6
    assert rep["htilde_at_zero_rel"] <= 1e-12
    assert set(rep["cases"]) == {"constant_half", "power_three_halves",
                                 "configured"}
    for errs in rep["cases"].values():
        assert all(v <= 1e-6 for v in errs.values())


def test_verify_geometry_catches_sign_mutant(cfg_file, tmp_path, monkeypatch):
    # signed comparison must reject a closed form with A_sz negated
    orig = helibend.geometry.closed_form_geometry

    def mutant(rep, s, z):
        geo = orig(rep, s, z)
        return dataclasses.replace(geo, A_sz=-geo.A_sz)

    monkeypatch.setattr(helibend.geometry, "closed_form_geometry", mutant)
    rc = cli.main(["verify-geometry", "--config", cfg_file,
                   "--out", str(tmp_path)])
    assert rc == 1
    rep = json.loads((tmp_path / "verify_geometry.json").read_text())
    assert rep["passed"] is False
    assert rep["cases"]["configured"]["A_sz"] > 1e-2


# --- solve-linear -----------------------------------------------------------


def test_solve_linear_manufactured(cfg_file, tmp_path):
    rc = cli.main(["solve-linear", "manufactured", "--config", cfg_file,
                   "--out", str(tmp_path)])
    assert rc == 0
    certs = json.loads((tmp_path / "certificates.json").read_text())
    assert certs["passed"] is True
    assert certs["zero_rhs_sup"] == 0.0
    assert certs["recovery_rel"] <= 1e-5
    tab = certs["order_table"]
    assert len(tab["errors"]) == 3
    assert all(1.8 <= o <= 2.2 for o in tab["orders"])
    assert (tmp_path / "solution.csv").exists()


def test_solve_linear_gaussian_bump(cfg_file, tmp_path):
    rc = cli.main(["solve-linear", "gaussian-bump", "--config", cfg_file,
                   "--out", str(tmp_path)])
    assert rc == 0
    certs = json.loads((tmp_path / "certificates.json").read_text())
    assert certs["passed"] is True
    assert certs["delta_bar"] < 1.0
    assert certs["decay_rate"] > 0.05
    sups = certs["band_sups"]
    # the far tail must sit well below the source band
    assert sups[-1] < 0.1 * max(sups)


def test_solve_linear_file_roundtrip(cfg_file, tmp_path):
    cfg = cli.load_config(cfg_file)
    sf, rep, ds, dec = cli.build_problem(cfg, 1.0)
    s, z = dec.s_full, dec.z
    prof = np.tanh(s) / np.cosh(s)
    prof[0] = 0.0
    E = np.outer(prof, np.exp(-((z - 0.5 * rep.z_max) / 3.0) ** 2))
    rows = np.column_stack([np.repeat(s, z.size),
                            np.tile(z, s.size),
                            E.ravel()])
    path = tmp_path / "rhs.csv"
    np.savetxt(path, rows, delimiter=",", header="s,z,E", comments="")
    rc = cli.main(["solve-linear", f"file:{path}", "--config", cfg_file,
                   "--out", str(tmp_path)])
    assert rc == 0
    certs = json.loads((tmp_path / "certificates.json").read_text())
    assert certs["passed"] is True
    assert certs["rhs"].startswith("file:")


def test_solve_linear_garbage_file(cfg_file, tmp_path):
    path = tmp_path / "junk.csv"
    path.write_text("this is not a field\n")
    rc = cli.main(["solve-linear", f"file:{path}", "--config", cfg_file,
                   "--out", str(tmp_path)])
    assert rc == 2


def test_solve_linear_delta_bar_cap(tmp_path):
    # an absurd contraction cap makes the numerical gate fail, not the config
    p = write_cfg(tmp_path / "c.json", {"solver": {"delta_bar": 1e-12}})
    rc = cli.main(["solve-linear", "gaussian-bump", "--config", p,
                   "--out", str(tmp_path)])
    assert rc == 1
    certs = json.loads((tmp_path / "certificates.json").read_text())
    assert certs["passed"] is False
    assert certs["delta_bar"] > certs["delta_bar_cap"]


# --- construct and blowup-report ---------------------------------------------


def test_construct_artifacts(constructed):
    for name in ("surface.obj", "blowup.csv", "report.json", "timings.json"):
        assert (constructed / name).exists(), name
    rep = json.loads((constructed / "report.json").read_text())
    assert rep["passed"] is True
    assert rep["converged"] is True
    assert rep["embedded"] is True
    assert rep["intersections"] == 0
    assert rep["xi_ok"] is True
    assert rep["seed"] is None
    assert rep["residuals"][-1] <= 1e-8 * rep["gamma0"]
    assert abs(rep["blowup"]["slope"] - rep["blowup"]["target_slope"]) \
        <= 0.05 * abs(rep["blowup"]["target_slope"])
    for row in rep["rescaling"]:
        assert not row["folded"]
        assert row["sup_offset"] <= 0.05
    # wall clock stays out of the reproducible report
    assert "construct_s" not in rep
    assert "construct_s" in json.loads((constructed / "timings.json").read_text())


def test_construct_deterministic(cfg_file, constructed, tmp_path):
    rc = cli.main(["construct", "--config", cfg_file, "--out", str(tmp_path)])
    assert rc == 0
    for name in ("report.json", "blowup.csv", "surface.obj"):
        assert filecmp.cmp(constructed / name, tmp_path / name,
                           shallow=False), name


def test_blowup_report_refit(cfg_file, constructed):
    rc = cli.main(["blowup-report", "--config", cfg_file,
                   "--out", str(constructed)])
    assert rc == 0
    rep = json.loads((constructed / "blowup_report.json").read_text())
    con = json.loads((constructed / "report.json").read_text())
    assert rep["passed"] is True
    assert rep["slope"] == pytest.approx(con["blowup"]["slope"], rel=1e-12)
    assert rep["target_slope"] == -3.0


def test_blowup_report_without_table(cfg_file, tmp_path):
    rc = cli.main(["blowup-report", "--config", cfg_file,
                   "--out", str(tmp_path)])
    assert rc == 2
