import csv
import hashlib
import io
import json
from pathlib import Path

import numpy as np
import pytest

from memdyn.cli import main, run, validate
from memdyn.models import amplitude_damping, noncommuting_semimarkov, telegraph
from memdyn.serialize import classical_to_json, gksl_to_json, semimarkov_to_json

CONFIGS = sorted((Path(__file__).parent.parent / "configs").glob("*.json"))


def write(path, cfg):
    path.write_text(json.dumps(cfg))
    return path


def read_csv(path):
    rows = list(csv.reader(io.StringIO(path.read_text())))
    return rows[0], np.array(rows[1:], dtype=float)


def semigroup_cfg(**extra):
    return {"kind": "semigroup", "model": gksl_to_json(amplitude_damping(1.0)),
            "grid": {"t_max": 5, "n_steps": 50}, **extra}


def test_semigroup_excited_population(tmp_path):
    cfg = write(tmp_path / "ad.json", semigroup_cfg())
    assert run(cfg, tmp_path / "out") == 0
    header, data = read_csv(tmp_path / "out" / "series.csv")
    t, p = data[:, 0], data[:, header.index("p_excited")]
    assert np.abs(p - np.exp(-t)).max() < 1e-8
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["invariants"]["passed"]
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["config_sha256"] == hashlib.sha256(cfg.read_bytes()).hexdigest()


def test_measure_on_semigroup_is_zero(tmp_path):
    cfg = write(tmp_path / "m.json", {"kind": "measure", "model": {"gksl": gksl_to_json(amplitude_damping(0.7, 1.0))},
                                      "grid": {"t_max": 3, "n_steps": 30}, "solver": {"n_random": 4}})
    assert run(cfg, tmp_path / "out") == 0
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["blp"]["value"] < 1e-9 and summary["helstrom"]["value"] < 1e-9


def mc_cfg():
    return {"kind": "semimarkov", "model": {"quantum": semimarkov_to_json(noncommuting_semimarkov())},
            "grid": {"t_max": 3, "n_steps": 12}, "solver": {"method": "mc", "n_traj": 10000}, "seed": 5}


def test_rerun_byte_identical(tmp_path, monkeypatch):
    cfg = write(tmp_path / "mc.json", mc_cfg())
    assert run(cfg, tmp_path / "a") == 0
    assert run(cfg, tmp_path / "b", threads=4) == 0
    monkeypatch.setenv("MEMDYN_THREADS", "3")
    assert main(["run", str(cfg), "--out", str(tmp_path / "c")]) == 0
    for name in ("series.csv", "summary.json", "manifest.json"):
        a = (tmp_path / "a" / name).read_bytes()
        assert a == (tmp_path / "b" / name).read_bytes() == (tmp_path / "c" / name).read_bytes()
    assert main(["run", str(cfg), "--out", str(tmp_path / "d"), "--seed", "6"]) == 0
    assert (tmp_path / "d" / "series.csv").read_bytes() != (tmp_path / "a" / "series.csv").read_bytes()


def test_bad_thread_env(tmp_path, monkeypatch):
    cfg = write(tmp_path / "mc.json", mc_cfg())
    monkeypatch.setenv("MEMDYN_THREADS", "many")
    assert run(cfg, tmp_path / "a", stream=io.StringIO()) == 2
    assert run(cfg, tmp_path / "b", threads=2, stream=io.StringIO()) == 0


def test_validate_reports_everything(tmp_path):
    assert validate(write(tmp_path / "ok.json", semigroup_cfg())) == []
    bad = semigroup_cfg()
    bad["model"]["channels"][0]["gamma"] = -1.0
    assert any("channel 0: negative rate" in d for d in validate(write(tmp_path / "neg.json", bad)))
    cl = classical_to_json(telegraph())
    cl["pi"] = [[0.0, 0.8], [1.0, 0.0]]
    diags = validate(write(tmp_path / "pi.json", {"kind": "semimarkov", "model": {"classical": cl},
                                                  "grid": {"t_max": 1, "n_steps": 4}}))
    assert any("column 1" in d and "0.8" in d for d in diags)
    two = semigroup_cfg(bogus=1)
    two["grid"]["n_steps"] = 0
    diags = validate(write(tmp_path / "two.json", two))
    assert len(diags) >= 2 and any("bogus" in d for d in diags) and any("/grid/n_steps" in d for d in diags)


def test_exit_codes(tmp_path):
    out = io.StringIO()
    bad = tmp_path / "broken.json"
    bad.write_text('{"kind": "semigroup",\n "grid": }')
    assert run(bad, stream=out) == 2
    assert "line 2" in out.getvalue()
    assert main(["validate", str(write(tmp_path / "x.json", semigroup_cfg(bogus=1)))]) == 2
    cfg = {"kind": "semimarkov", "model": {"quantum": semimarkov_to_json(noncommuting_semimarkov(omega=5.0))},
           "grid": {"t_max": 20, "n_steps": 4}, "solver": {"method": "laplace"}}
    out = io.StringIO()
    assert run(write(tmp_path / "pole.json", cfg), tmp_path / "o", stream=out) == 3
    assert "ContourError" in out.getvalue()
    strict = {**mc_cfg(), "solver": {"method": "laplace"}, "tolerances": {"trace": 1e-300}}
    out = io.StringIO()
    assert run(write(tmp_path / "strict.json", strict), tmp_path / "s", stream=out) == 4
    assert "invariant violation" in out.getvalue()


def test_validate_only(tmp_path):
    cfg = write(tmp_path / "ad.json", semigroup_cfg())
    assert run(cfg, tmp_path / "out", validate_only=True, stream=io.StringIO()) == 0
    assert not (tmp_path / "out").exists()


@pytest.mark.parametrize("path", CONFIGS, ids=[p.stem for p in CONFIGS])
def test_sample_configs_run(path, tmp_path):
    assert run(path, tmp_path / "out", stream=io.StringIO()) == 0
