import json
from pathlib import Path

import numpy as np
import pytest

from vdsqed.cli import main, render_csv, to_jsonable
from vdsqed.runner import ConfigError, load_config, override, parse_config, run_scenario, run_sweep, sweep_points

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=2))
    return path


def test_shipped_configs_validate(capsys):
    for path in sorted(CONFIGS.glob("*.json")):
        assert main(["validate", str(path)]) == 0
    assert "ok: scenario" in capsys.readouterr().out


def test_dimer_run(tmp_path, capsys):
    path = write(tmp_path, {"schema_version": 1, "scenario": "dimer", "atoms": [{"g": 1.0}]})
    out = tmp_path / "out"
    assert main(["run", str(path), "--out", str(out)]) == 0
    res = json.loads((out / "results.json").read_text())
    assert res["status"] == "ok"
    assert res["summary"]["theta"] == pytest.approx(np.arctan(1.0), abs=1e-14)
    assert "theta" in (out / "summary.txt").read_text()
    assert "wall" not in (out / "results.json").read_text()
    capsys.readouterr()


@pytest.mark.parametrize("axis,needle", [
    ({"parameter": "model.delta", "start": 0.1}, "sweep.axes[0].stop"),
    ({"parameter": "model.nonsense", "values": [1]}, "not a model parameter"),
    ({"parameter": "delta", "values": [1]}, "must start with"),
    ({"parameter": "model.delta", "start": 0, "stop": 1, "steps": 0}, "steps"),
])
def test_malformed_axis(tmp_path, capsys, axis, needle):
    doc = {"schema_version": 1, "scenario": "ssh-vds", "sweep": {"axes": [axis]}}
    out = tmp_path / "out"
    assert main(["sweep", str(write(tmp_path, doc)), "--out", str(out)]) == 1
    assert needle in capsys.readouterr().err
    assert not out.exists()


def test_invalid_json_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "schema_version": 1,\n  "scenario": "dimer",,\n}\n')
    assert main(["validate", str(path)]) == 1
    assert "line 3" in capsys.readouterr().err


@pytest.mark.parametrize("doc,needle", [
    ({"schema_version": 2, "scenario": "dimer"}, "schema_version"),
    ({"schema_version": 1, "scenario": "nope"}, "scenario"),
    ({"schema_version": 1, "scenario": "dimer", "atoms": [{"g": -1}]}, "atoms[0].g"),
    ({"schema_version": 1, "scenario": "ssh-vds", "model": {"delta": 2.0}}, "model"),
    ({"schema_version": 1, "scenario": "ssh-vds", "options": {"bogus": 1}}, "options.bogus"),
    ({"schema_version": 1, "scenario": "dimer", "extra": 1}, "extra"),
])
def test_field_precise_errors(doc, needle):
    with pytest.raises(ConfigError, match=needle.replace("[", r"\[").replace("]", r"\]")):
        parse_config(doc)


def test_sweep_cap():
    doc = {"schema_version": 1, "scenario": "dimer",
           "sweep": {"cap": 5, "axes": [{"parameter": "atoms.0.g", "start": 0.1, "stop": 1, "steps": 6}]}}
    with pytest.raises(ConfigError, match="cap"):
        parse_config(doc)


def test_sweep_grid_order_and_override():
    doc = {"schema_version": 1, "scenario": "ssh-vds",
           "sweep": {"axes": [{"parameter": "model.delta", "values": [0.3, 0.5]},
                              {"parameter": "atoms.0.g", "values": [0.01, 0.02, 0.03]}]}}
    pts = sweep_points(parse_config(doc))
    assert [tuple(v.values()) for v, _ in pts][:4] == [(0.3, 0.01), (0.3, 0.02), (0.3, 0.03), (0.5, 0.01)]
    assert override({"scenario": "x", "atoms": [{}]}, "atoms.0.g", 2.0)["atoms"][0]["g"] == 2.0


def test_sweep_records_point_failures(tmp_path, capsys):
    doc = {"schema_version": 1, "scenario": "ssh-vds", "model": {"N": 16},
           "atoms": [{"site": {"cell": [8], "sub": "a"}}],
           "sweep": {"axes": [{"parameter": "model.delta", "values": [0.5, 1.5, -0.5]}]}}
    out = tmp_path / "out"
    assert main(["sweep", str(write(tmp_path, doc)), "--out", str(out)]) == 3
    res = json.loads((out / "results.json").read_text())
    assert [p["status"] for p in res["points"]] == ["ok", "error", "ok"]
    assert res["status"] == "partial"
    rows = (out / "sweep.csv").read_text().splitlines()
    assert len(rows) == 4
    capsys.readouterr()


def test_one_point_sweep_equals_run(tmp_path, capsys):
    base = {"schema_version": 1, "scenario": "creutz-vds", "model": {"N": 12}}
    run_out, sweep_out = tmp_path / "run", tmp_path / "sweep"
    assert main(["run", str(write(tmp_path, base)), "--out", str(run_out)]) == 0
    doc = dict(base, sweep={"axes": [{"parameter": "model.m", "values": [0.5]}]})
    assert main(["sweep", str(write(tmp_path, doc, "s.json")), "--out", str(sweep_out)]) == 0
    r = json.loads((run_out / "results.json").read_text())
    s = json.loads((sweep_out / "results.json").read_text())
    assert s["points"][0]["payload"] == r["payload"]
    capsys.readouterr()


def test_run_is_byte_deterministic(tmp_path, capsys):
    path = write(tmp_path, {"schema_version": 1, "scenario": "heff"})
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["run", str(path), "--out", str(out)]) == 0
    for f in sorted(p.name for p in outs[0].iterdir()):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes(), f
    capsys.readouterr()


def test_worker_count_independent_sweep():
    cfg = load_config(CONFIGS / "dimer.json")
    one = run_sweep(cfg, 1)
    two = run_sweep(cfg, 2)
    assert [r["result"].payload for r in one] == [r["result"].payload for r in two]


def test_haldane_edge_count(tmp_path, capsys):
    doc = {"schema_version": 1, "scenario": "haldane-vds", "model": {"Nx": 6, "Ny": 6},
           "options": {"contrast": None}}
    cfg = parse_config(doc)
    res = run_scenario(cfg)
    header, rows = res.tables["currents_nn"]
    # 3 nearest-neighbour bonds per cell, minus the 3 that touch the vacancy
    assert len(rows) == 3 * 36 - 3
    assert any(abs(r[-1]) > 0 for r in rows)
    capsys.readouterr()


def test_serialization_helpers():
    doc = to_jsonable({"x": np.float64(1 / 3), "z": 1 + 2j, "n": float("nan"), "a": np.arange(2)})
    assert doc == {"x": 0.333333333333333, "z": {"re": 1.0, "im": 2.0}, "n": None, "a": [0, 1]}
    assert render_csv(["a", "b"], [[1, 0.1234567891234]]) == b"a,b\n1,0.12345679\n"
