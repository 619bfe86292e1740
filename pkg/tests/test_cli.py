import csv
import json
from pathlib import Path

import numpy as np
import pytest

from heatguide.cli import main
from heatguide.config import COMMANDS, ConfigError, load_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def _manybody_doc(**params):
    base = {"a": 0.05, "lam": 0.5, "source": {"center": [0.5, 0.5, 0.5], "radius": 0.3}}
    base.update(params)
    return {"version": 1, "command": "simulate-manybody", "seed": 11, "params": base}


def _columns(path, drop=("provenance",)):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    keep = [i for i, h in enumerate(rows[0]) if h not in drop]
    return [[r[i] for i in keep] for r in rows]


def test_zero_impedance_field_equals_free_field(tmp_path):
    cfg = _write(tmp_path, "h0.json", _manybody_doc(impedance=0.0))
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["simulate-manybody", "--config", str(cfg), "--out", str(out)]) == 0
        outs.append(out)
    assert _columns(outs[0] / "field.csv") == _columns(outs[0] / "free_field.csv")
    for name in ("field.csv", "free_field.csv", "cloud.json", "manifest.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_manifest_lists_every_file(tmp_path):
    out = tmp_path / "out"
    assert main(["simulate-manybody", "--config", str(CONFIGS / "simulate_manybody.json"), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    emitted = {p.name for p in out.iterdir()} - {"manifest.json"}
    assert set(manifest["files"]) == emitted
    assert manifest["seed"] == 7
    header = (out / "field.csv").read_text().splitlines()[0]
    assert header == "x1,x2,x3,re_U,im_U,lambda,provenance"


def test_seed_override_changes_output(tmp_path):
    cfg = str(CONFIGS / "simulate_manybody.json")
    assert main(["simulate-manybody", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "1"]) == 0
    assert main(["simulate-manybody", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "2"]) == 0
    assert (tmp_path / "a" / "cloud.json").read_bytes() != (tmp_path / "b" / "cloud.json").read_bytes()


def test_baseline_design_gives_zero_potential(tmp_path):
    out = tmp_path / "out"
    assert main(["design-potential", "--config", str(CONFIGS / "design_baseline.json"), "--out", str(out)]) == 0
    data = np.loadtxt(out / "potential.csv", delimiter=",", skiprows=1)
    assert np.max(np.abs(data[:, 1])) < 1e-10


def test_bad_kappa_exit_code_and_no_output(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["simulate-manybody", "--config", str(CONFIGS / "bad_kappa.json"), "--out", str(out)])
    assert code == 2
    assert "kappa" in capsys.readouterr().err
    assert not (out / "manifest.json").exists()


def test_missing_seed_rejected(tmp_path, capsys):
    doc = _manybody_doc()
    del doc["seed"]
    code = main(["simulate-manybody", "--config", str(_write(tmp_path, "c.json", doc)), "--out", str(tmp_path / "o")])
    assert code == 2 and "seed" in capsys.readouterr().err


def test_numerical_failure_leaves_no_manifest(tmp_path, capsys):
    # a is so large that the particles cannot be packed
    cfg = _write(tmp_path, "c.json", _manybody_doc(a=0.4, density=50.0))
    out = tmp_path / "out"
    assert main(["simulate-manybody", "--config", str(cfg), "--out", str(out)]) == 3
    assert "infeasible" in capsys.readouterr().err
    assert list(out.iterdir()) == []


def test_unknown_parameter_named(tmp_path):
    doc = {"version": 1, "params": {"grdi": 12}}
    with pytest.raises(ConfigError, match="grdi"):
        load_config("homogenize", _write(tmp_path, "c.json", doc))


@pytest.mark.parametrize("command", COMMANDS)
def test_every_shipped_config_validates(command):
    name = command.replace("-", "_") + ".json"
    cfg = load_config(command, CONFIGS / name)
    assert cfg.command == command


def test_homogenize_outputs(tmp_path):
    out = tmp_path / "out"
    assert main(["homogenize", "--config", str(CONFIGS / "homogenize.json"), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["average_check"]["sup_difference"] < 1e-2
    assert summary["stationary"]["min"] > 0
    assert (out / "stationary.csv").read_text().splitlines()[0] == "x1,x2,x3,value"


def test_tauberian_and_eigencheck_outputs(tmp_path):
    assert main(["tauberian", "--config", str(CONFIGS / "tauberian.json"), "--out", str(tmp_path / "t")]) == 0
    tau = json.loads((tmp_path / "t" / "summary.json").read_text())
    assert all(v["limit_error"] < 1e-6 for v in tau.values())
    assert main(["eigencheck", "--config", str(CONFIGS / "eigencheck.json"), "--out", str(tmp_path / "e")]) == 0
    eig = json.loads((tmp_path / "e" / "summary.json").read_text())
    assert eig["within_tolerance"] and eig["radial_max_difference"] <= 1e-10


def test_waveguide_demo_outputs(tmp_path):
    out = tmp_path / "w"
    assert main(["waveguide-demo", "--config", str(CONFIGS / "waveguide_demo.json"), "--out", str(out)]) == 0
    spec = json.loads((out / "spectrum.json").read_text())
    assert spec["map"][0] == [1, 1]
    assert (out / "trace.csv").read_text().splitlines()[0] == "t,s,rho,value"
