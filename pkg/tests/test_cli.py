import subprocess
import sys

import numpy as np
import pytest

from nskorteweg.cli import VERBS, build_parser, main
from nskorteweg.diagnostics import read_diagnostics_csv
from nskorteweg.ensemble import load_config
from nskorteweg.spectral import read_field_binary

CONFIG = """\
[params]
alpha = 1.0
beta = -1.0
galerkin_order = 8

[schedule]
t_end = 0.002
dt = 1e-4
record_every = 5

[run]
n_paths = 3
"""


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text(CONFIG)
    return path


def test_parser_has_every_verb():
    sub = next(a for a in build_parser()._actions if a.dest == "verb")
    assert set(sub.choices) == set(VERBS)


def test_simulate(cfg, tmp_path, capsys):
    out = tmp_path / "sim"
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--seed", "4"]) == 0
    recs = read_field_binary(out / "snapshots.bin")
    assert len(recs) == 2 * 5
    diag = read_diagnostics_csv(out / "diagnostics.csv")
    assert diag.shape == (5, 13)
    manifest = (out / "manifest.toml").read_text()
    assert "path_seed" in manifest and "master_seed = 4" in manifest
    assert "stopped=False" in capsys.readouterr().out


def test_ensemble_and_overrides(cfg, tmp_path):
    out = tmp_path / "ens"
    assert main(["ensemble", "--config", str(cfg), "--out", str(out), "--paths", "2", "--threads", "2"]) == 0
    assert sorted(p.name for p in (out / "paths").iterdir()) == ["path_0000.csv", "path_0001.csv"]
    echoed = load_config(out / "manifest.toml")
    assert echoed.run.n_paths == 2 and echoed.run.threads == 2


def test_atlas(tmp_path, capsys):
    assert main(["atlas", "--out", str(tmp_path), "--alpha", "0", "1", "--beta", "-2", "0", "--step", "1"]) == 0
    rows = (tmp_path / "atlas.csv").read_text().splitlines()
    assert len(rows) == 1 + 6
    assert "atlas 2x3" in capsys.readouterr().out


def test_check_inequality(tmp_path, capsys):
    assert main(["check-inequality", "--out", str(tmp_path), "--samples", "50"]) == 0
    ratios = np.loadtxt(tmp_path / "inequality.csv", delimiter=",", skiprows=1)[:, 1]
    assert ratios.shape == (50,) and np.all(ratios <= 9 / 16)
    assert "violations=0" in capsys.readouterr().out


def test_studies(cfg, tmp_path):
    assert main(["study-uniqueness", "--config", str(cfg), "--out", str(tmp_path / "u")]) == 0
    assert (tmp_path / "u" / "uniqueness.csv").exists()
    assert main(["study-galerkin", "--config", str(cfg), "--out", str(tmp_path / "g"), "--m-list", "8", "16"]) == 0
    assert len((tmp_path / "g" / "galerkin.csv").read_text().splitlines()) == 2
    assert main(["study-order", "--config", str(cfg), "--out", str(tmp_path / "o"), "--levels", "5", "6",
                 "--ref-factor", "2", "--paths", "2"]) == 0
    assert len((tmp_path / "o" / "order.csv").read_text().splitlines()) == 3


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text(CONFIG + "bogus = 1\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "run.bogus" in capsys.readouterr().err
    good = tmp_path / "c.toml"
    good.write_text(CONFIG)
    assert main(["ensemble", "--config", str(good), "--seed", "-1"]) == 2
    assert main(["ensemble", "--config", str(good), "--paths", "0"]) == 2


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "nskorteweg", "atlas", "--out", str(tmp_path), "--step", "0.5"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "atlas 7x15" in res.stdout
