import csv
import hashlib
import json
from pathlib import Path

import pytest

from tempath.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

BASE = """
mass = 1.0
[packet]
sigma_t = 1.0
sigma_x = 1.0
[spectrum]
eigenvalues = [1.0, -1.0]
weights = [0.5, 0.5]
[field]
E0_bar = 0.1
E1_bar = 0.05
T_bar = 1.0
[times]
T0 = 0.0
T3 = 4.0
"""


def write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_run_writes_outputs(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", str(CONFIGS / "headline.toml"), "--out", str(out)]) == 0
    for name in ["distributions.csv", "summary.json", "manifest.json", "plots/path4d_v.svg", "plots/schrodinger_t.svg"]:
        assert (out / name).is_file()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["schema_version"] == "1.0"
    assert set(summary["formalisms"]) == {"path4d", "schrodinger"}
    assert summary["comparison"]["precession_agree"] is True
    with open(out / "distributions.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["formalism", "p", "axis", "coordinate", "probability_density"]
    assert {r[2] for r in rows[1:]} == {"t", "x", "v"}


def test_manifest_checksums(tmp_path):
    out = tmp_path / "out"
    main(["run", "--config", str(CONFIGS / "headline.toml"), "--out", str(out), "--formalism", "path4d"])
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["checksums"]
    for name, digest in manifest["checksums"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest


def test_rerun_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["run", "--config", str(CONFIGS / "headline.toml"), "--out", str(out), "--seed", "3"]) == 0
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    assert ma["checksums"] == mb["checksums"]
    assert ma["seed"] == 3


def test_oracle_check_file(tmp_path):
    out = tmp_path / "out"
    cfg = write(tmp_path, BASE + "[oracle]\nn_t = 1024\n")
    assert main(["run", "--config", cfg, "--out", str(out), "--formalism", "path4d", "--oracle-check"]) == 0
    with open(out / "oracle_errors.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["formalism", "p", "rel_l2"]
    assert all(float(r[2]) < 1e-4 for r in rows[1:])


def test_oracle_command(tmp_path):
    out = tmp_path / "out"
    cfg = write(tmp_path, BASE + "[oracle]\nn_t = 1024\nfree_slices = [32, 64]\ndipole_delta_T = [0.1, 0.05]\n")
    assert main(["oracle", "--config", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "oracle_summary.json").read_text())
    assert summary["free_monotone"] is True
    assert summary["dipole_order"] == pytest.approx(1.0, abs=0.05)
    with open(out / "oracle_convergence.csv") as fh:
        assert next(csv.reader(fh)) == ["case", "parameter", "value", "error"]


def test_bad_config_exit_2_writes_nothing(tmp_path):
    out = tmp_path / "out"
    cfg = write(tmp_path, BASE.replace("sigma_t = 1.0", "sigma_t = -1.0"))
    assert main(["run", "--config", cfg, "--out", str(out)]) == 2
    assert not out.exists()


def test_missing_config_exit_2(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.toml"), "--out", str(tmp_path / "o")]) == 2


def test_numeric_failure_exit_3(tmp_path):
    cfg = write(tmp_path, BASE + "[oracle]\nn_t = 256\nreg_eta = 5.0\nfree_slices = [4, 8]\n")
    assert main(["oracle", "--config", cfg, "--out", str(tmp_path / "o")]) == 3


def test_unwritable_output_exit_1(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", "--config", str(CONFIGS / "free.toml"), "--out", str(blocker / "sub")]) == 1


@pytest.mark.parametrize("name", ["headline.toml", "detectable.toml", "free.toml", "finite_pulse.toml"])
def test_shipped_configs_run(tmp_path, name):
    assert main(["run", "--config", str(CONFIGS / name), "--out", str(tmp_path / "o")]) == 0
