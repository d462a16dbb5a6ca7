"""Command-line surface: artifacts, envelopes, exit codes, determinism."""
import csv
import json
from pathlib import Path

import numpy as np
import pytest

from zpinchstab import __version__
from zpinchstab.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main

SMALL = """\
[discretization]
n_elements_plasma = 24
n_elements_vacuum = 8

[scan]
m_range = -1:1
k_range = -2:2
"""


@pytest.fixture(scope="module")
def small_cfg(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "small.cfg"
    path.write_text(SMALL)
    return str(path)


def read_rows(path):
    lines = Path(path).read_text().splitlines()
    assert lines[0].startswith("# config_sha256=")
    return list(csv.DictReader(lines[1:]))


def read_payload(path):
    doc = json.loads(Path(path).read_text())
    assert doc["artifact_version"] == __version__
    assert len(doc["config_sha256"]) == 64
    assert doc["timestamp"] is None
    assert set(doc["config"]) == {
        "profile", "geometry", "physics", "discretization", "solver", "scan", "seeds",
    }
    return doc["payload"]


def test_equilibrium_artifact(small_cfg, tmp_path):
    assert main(["equilibrium", "--config", small_cfg, "--output", str(tmp_path)]) == EXIT_OK
    rows = read_rows(tmp_path / "equilibrium.csv")
    assert len(rows) == 513 + 128
    inner, outer = rows[0], rows[-1]
    assert float(inner["r"]) == 0.0 and inner["Bhat_theta"] == ""
    assert float(outer["r"]) == 2.0 and outer["Btheta"] == ""
    mid = rows[256]  # r = 0.5 on the plasma grid
    assert float(mid["Btheta"]) == pytest.approx(0.5, rel=1e-12)
    assert float(mid["Jz"]) == pytest.approx(2.0, rel=1e-10)
    # r Bhat is constant in the vacuum, so the wall sees r0 Btheta(r0) / rw
    assert float(outer["Bhat_theta"]) == pytest.approx(0.5, rel=1e-10)


def test_growth_artifact_and_curve(small_cfg, tmp_path):
    curve = tmp_path / "curve.csv"
    code = main([
        "growth", "--config", small_cfg, "--output", str(tmp_path),
        "--m", "0", "--k", "1", "--curve-csv", str(curve),
    ])
    assert code == EXIT_OK
    payload = read_payload(tmp_path / "growth.json")
    assert payload["status"] == "unstable"
    assert payload["mu"] > 0.5 and payload["mu"] == payload["s_star"]
    assert payload["mu"] == pytest.approx(np.sqrt(-payload["lambda"]), rel=1e-6)
    assert payload["residuals"]["fixed_point"] <= 1e-8
    samples = read_rows(curve)
    svals = [float(r["s"]) for r in samples]
    assert svals == sorted(svals)
    assert len(samples) == len(payload["lambda_samples"])


def test_scan_artifacts_deterministic(small_cfg, tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        assert main(["scan", "--config", small_cfg, "--output", str(out)]) == EXIT_OK
    assert (out1 / "scan.csv").read_bytes() == (out2 / "scan.csv").read_bytes()
    assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()
    rows = read_rows(out1 / "scan.csv")
    assert len(rows) == 15
    assert (rows[0]["m"], rows[0]["k"]) == ("0", "0")
    payload = read_payload(out1 / "report.json")
    assert payload["Lambda"] > 0.8
    assert payload["argmax"] == {"m": 0, "k": -2}
    assert payload["n_modes"] == 15 and payload["unresolved"] == []
    # the argmax of this tight rectangle sits on its own boundary
    assert payload["rectangle_ok"] is False and payload["decay_check"] is False


def test_scan_range_override_and_sparse_fit(small_cfg, tmp_path):
    code = main([
        "scan", "--config", small_cfg, "--output", str(tmp_path),
        "--m-range", "0:0", "--k-range", "0:1",
    ])
    assert code == EXIT_OK
    payload = read_payload(tmp_path / "report.json")
    assert payload["n_modes"] == 2 and payload["fit"] is None


def test_evolve_trajectory(small_cfg, tmp_path):
    code = main([
        "evolve", "--config", small_cfg, "--output", str(tmp_path),
        "--m", "0", "--k", "1", "--t-final", "0.2", "--dt", "0.01",
    ])
    assert code == EXIT_OK
    rows = read_rows(tmp_path / "trajectory.csv")
    assert len(rows) == 21
    norms = [float(r["norm_M"]) for r in rows]
    assert norms == sorted(norms)  # eigenmode initial data grows monotonically
    assert norms[0] == pytest.approx(1.0, rel=1e-12)
    diss = [float(r["dissipated"]) for r in rows]
    assert diss[0] == 0.0 and diss[-1] > 0.0


def test_evolve_random_seed_override(small_cfg, tmp_path):
    a, b, c = (tmp_path / name for name in "abc")
    for out, init in ((a, "random:7"), (b, "random:7"), (c, "random:8")):
        code = main([
            "evolve", "--config", small_cfg, "--output", str(out),
            "--m", "1", "--k", "1", "--t-final", "0.05", "--dt", "0.01",
            "--init", init,
        ])
        assert code == EXIT_OK
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
    assert (a / "trajectory.csv").read_bytes() != (c / "trajectory.csv").read_bytes()


def test_verify_umbrella(small_cfg, tmp_path):
    assert main(["verify", "--config", small_cfg, "--output", str(tmp_path)]) == EXIT_OK
    payload = read_payload(tmp_path / "verify.json")
    assert payload["all_passed"] is True
    names = [c["name"] for c in payload["checks"]]
    assert len(names) == 8 and len(set(names)) == 8
    assert all(c["passed"] for c in payload["checks"])


def test_validation_exits(small_cfg, tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[physics]\ngamma = 0.9\n")
    assert main(["growth", "--config", str(bad), "--output", str(tmp_path),
                 "--m", "0", "--k", "1"]) == EXIT_VALIDATION
    missing = str(tmp_path / "absent.cfg")
    assert main(["equilibrium", "--config", missing,
                 "--output", str(tmp_path)]) == EXIT_VALIDATION
    assert main(["scan", "--config", small_cfg, "--output", str(tmp_path),
                 "--m-range", "3:1"]) == EXIT_VALIDATION


def test_usage_errors_exit_one(small_cfg):
    with pytest.raises(SystemExit) as err:
        main(["growth", "--config", small_cfg])  # missing --m/--k
    assert err.value.code == EXIT_VALIDATION
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == EXIT_VALIDATION


def test_numerical_exit_on_exhausted_bracket(small_cfg, tmp_path):
    cramped = tmp_path / "cramped.cfg"
    cramped.write_text(SMALL + "\n[solver]\ns_max = 0.01\n")
    code = main(["growth", "--config", str(cramped), "--output", str(tmp_path),
                 "--m", "0", "--k", "1"])
    assert code == EXIT_NUMERICAL


def test_numerical_exit_on_rejected_step(small_cfg, tmp_path):
    code = main(["evolve", "--config", small_cfg, "--output", str(tmp_path),
                 "--m", "0", "--k", "1", "--t-final", "1e4", "--dt", "1e3"])
    assert code == EXIT_NUMERICAL
