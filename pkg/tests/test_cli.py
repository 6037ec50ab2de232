from __future__ import annotations

import json
import re

import numpy as np
import pytest

from otslab import io, presets
from otslab import reference as ref
from otslab.analysis import execute
from otslab.cli import main
from otslab.words import random_word

LINE_EDGES = [
    {"from": 1, "to": 2, "label": "a", "weight": 0.5},
    {"from": 2, "to": 1, "label": "b", "weight": 0.5},
    {"from": 3, "to": 2, "label": "c", "weight": 0.5},
    {"from": 2, "to": 3, "label": "d", "weight": 0.5},
]


def write_cfg(tmp_path, name="run.json", **overrides):
    cfg = {
        "graph": {"agents": 3, "edges": LINE_EDGES},
        "initial": [0.0, 0.5, 1.0],
        "scheduler": {"type": "periodic", "word": list("abcd")},
        "steps": 4,
    }
    cfg.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_simulate_worked_run_csv(tmp_path, capsys):
    out = tmp_path / "t.csv"
    code, stdout, _ = run(capsys, "simulate", "-c", write_cfg(tmp_path), "-o", str(out))
    assert code == 0
    table = io.read_trace_csv(out)
    assert table.actions == ["a", "b", "c", "d"]
    assert table.states.tolist() == [
        [0.0, 0.5, 1.0], [0.0, 0.25, 1.0], [0.125, 0.25, 1.0], [0.125, 0.625, 1.0], [0.125, 0.625, 0.8125],
    ]
    assert json.loads(stdout)["steps"] == 4


def test_csv_round_trip_is_bit_exact(tmp_path):
    g = ref.fig1a(weight=0.37)
    tr = execute(g, (0.013, 0.4999, 0.987654321), None, random_word(g, seed=9), 3000)
    path = tmp_path / "r.csv"
    io.write_trace_csv(tr, path)
    table = io.read_trace_csv(path)
    assert np.array_equal(table.states, tr.states)
    assert table.actions == tr.labels


def test_svg_output(tmp_path, capsys):
    svg = tmp_path / "p.svg"
    code, _, _ = run(capsys, "simulate", "-c", write_cfg(tmp_path, steps=200), "--svg", str(svg))
    assert code == 0
    text = svg.read_text()
    assert text.count("<polyline") == 3
    assert "href" not in text and "<script" not in text


def test_fairness_from_trace(tmp_path, capsys):
    out = tmp_path / "t.csv"
    assert run(capsys, "simulate", "-c", write_cfg(tmp_path, steps=400), "-o", str(out))[0] == 0
    code, stdout, _ = run(capsys, "fairness", "--trace", str(out), "-m", "2", "-k", "4", "-G", "12")
    data = json.loads(stdout)
    assert code == 0
    assert data["minimal_uniform_k"] == 4 and data["density_ok"] is True


def test_fairness_reports_missing_edge(tmp_path, capsys):
    cfg = write_cfg(tmp_path, steps=50, scheduler={"type": "periodic", "word": ["a", "b", "d"]})
    out = tmp_path / "t.csv"
    run(capsys, "simulate", "-c", cfg, "-o", str(out))
    code, stdout, _ = run(capsys, "fairness", "--trace", str(out), "--alphabet", "a,b,c,d")
    data = json.loads(stdout)
    assert code == 0 and data["absent_edges"] == ["c"] and data["minimal_uniform_k"] is None


def test_fairness_cons23_horizon(tmp_path, capsys):
    cfg = presets.preset("fig4b")
    path = tmp_path / "c.json"
    path.write_text(cfg.model_dump_json(by_alias=True))
    code, stdout, _ = run(capsys, "fairness", "-c", str(path), "--horizon", "3000", "-m", "1", "-k", "6", "--positions")
    data = json.loads(stdout)
    assert code == 0
    assert data["analytic_tag"]["kind"] == "mk_fair"
    assert 0 in data["multiwindow_positions"]


def test_fairness_needs_one_source(tmp_path, capsys):
    assert run(capsys, "fairness", "-m", "1")[0] == 1


def test_verify_exit_codes(tmp_path, capsys):
    cfg = write_cfg(tmp_path, steps=2000)
    code, stdout, err = run(capsys, "verify", "-c", cfg)
    assert code == 0 and json.loads(stdout)["audit"]["ok"] is True
    assert "step_range" in err
    code, stdout, _ = run(capsys, "verify", "-c", write_cfg(tmp_path, initial=[0.2, 0.5, 0.8], steps=200), "--fault-injection")
    assert code == 3 and json.loads(stdout)["audit"]["ok"] is False


def test_verify_bounded_dynamic(tmp_path, capsys):
    cfg = write_cfg(tmp_path, steps=3000, influence={"mode": "confirmation_bias", "scaled": {"IL": 0.1, "IU": 0.9}})
    code, stdout, _ = run(capsys, "verify", "-c", cfg)
    data = json.loads(stdout)
    assert code == 0 and data["convergence"]["consensus"] is True


def test_verify_cons12_reports_blocks(tmp_path, capsys):
    cfg = write_cfg(tmp_path, steps=5000, scheduler={"type": "cons12", "L": 0.25, "U": 0.75})
    code, stdout, _ = run(capsys, "verify", "-c", cfg)
    data = json.loads(stdout)
    assert code == 0
    assert data["c_blocks"]["count"] > 10 and data["c_blocks"]["no_growth_within_10"] == []


@pytest.mark.parametrize("fid", sorted(presets.PRESETS))
def test_reproduce_every_preset(fid, tmp_path, capsys):
    code, stdout, _ = run(capsys, "reproduce", fid, "-o", str(tmp_path))
    assert code == 0
    for ext in ("csv", "svg", "json"):
        assert (tmp_path / f"{fid}.{ext}").exists()
    assert json.loads(stdout)["figure"] == fid


def test_reproduce_unknown_id(tmp_path, capsys):
    code, _, err = run(capsys, "reproduce", "fig9z", "-o", str(tmp_path))
    assert code == 1 and "fig1b" in err


def test_input_errors_exit_1(tmp_path, capsys):
    assert run(capsys, "simulate", "-c", str(tmp_path / "missing.json"))[0] == 1
    assert run(capsys, "simulate", "-c", write_cfg(tmp_path, bogus=1))[0] == 1
    assert run(capsys, "simulate", "-c", write_cfg(tmp_path, initial=[0.0, 2.0, 1.0]))[0] == 1
    assert run(capsys, "simulate", "-c", write_cfg(tmp_path, scheduler={"type": "periodic", "word": ["z"]}))[0] == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "simulate", "-c", str(bad))[0] == 1
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 1


def test_guard_exhaustion_exit_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, steps=50, scheduler={"type": "cons12", "L": 0.25, "U": 0.75, "guard": 1})
    code, _, err = run(capsys, "simulate", "-c", cfg)
    assert code == 2 and "guard" in err


def test_seed_environment_override(tmp_path, capsys, monkeypatch):
    cfg = write_cfg(tmp_path, steps=300, scheduler={"type": "random", "seed": 1})
    outs = []
    for env in ("5", "5", None):
        if env is None:
            monkeypatch.delenv("OTSLAB_SEED", raising=False)
        else:
            monkeypatch.setenv("OTSLAB_SEED", env)
        path = tmp_path / f"s{len(outs)}.csv"
        run(capsys, "simulate", "-c", cfg, "-o", str(path))
        outs.append(io.read_trace_csv(path).actions)
    assert outs[0] == outs[1] != outs[2]
    g = ref.fig1a()
    assert outs[0] == random_word(g, seed=5).take(300)


def test_batch_seeds(tmp_path, capsys):
    cfg = write_cfg(tmp_path, steps=500, scheduler={"type": "random", "seed": 0})
    out = tmp_path / "b.csv"
    code, stdout, _ = run(capsys, "simulate", "-c", cfg, "-o", str(out), "--seeds", "3..5", "--workers", "2")
    data = json.loads(stdout)
    assert code == 0 and [r["seed"] for r in data["runs"]] == [3, 4, 5]
    files = sorted(p.name for p in tmp_path.glob("b_seed*.csv"))
    assert files == ["b_seed3.csv", "b_seed4.csv", "b_seed5.csv"]
    assert io.read_trace_csv(tmp_path / "b_seed4.csv").actions == random_word(ref.fig1a(), seed=4).take(500)
    assert run(capsys, "simulate", "-c", cfg, "--seeds", "9..2")[0] == 1
    assert re.match(r"\d+", str(data["consensus_count"]))
