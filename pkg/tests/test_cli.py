import json
import subprocess
import sys

import numpy as np
import pytest

from otflat.cli import run
from otflat.measures import DiscreteMeasure, load_measure, save_measure


@pytest.fixture
def graph_csv(tmp_path):
    path = str(tmp_path / "g.csv")
    assert run(["gen", "graph", "--n", "1", "--d", "2", "--lip", "0.3", "--res", "256",
                "-o", path]) == 0
    return path


def test_gen_graph_example(graph_csv):
    lines = open(graph_csv).read().splitlines()
    assert lines[0] == "x0,x1,w"
    assert len(lines) == 257
    mu = load_measure(graph_csv)
    assert np.abs(np.diff(mu.points[:, 1]) / np.diff(mu.points[:, 0])).max() <= 0.3 + 1e-12


def test_transport_mass_mismatch_exit_2(tmp_path, capsys):
    a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    save_measure(DiscreteMeasure([[0.0, 0.0]], [1.0]), a)
    save_measure(DiscreteMeasure([[1.0, 0.0]], [2.0]), b)
    assert run(["transport", "--p", "2", a, b]) == 2
    assert "MassMismatch" in capsys.readouterr().err


def test_transport_report(tmp_path):
    a, b, out = (str(tmp_path / n) for n in ("a.csv", "b.csv", "r.json"))
    save_measure(DiscreteMeasure([[0.0, 0.0], [1.0, 0.0]], [0.5, 0.5]), a)
    save_measure(DiscreteMeasure([[0.0, 1.0], [1.0, 1.0]], [0.5, 0.5]), b)
    assert run(["transport", "--p", "2", a, b, "-o", out]) == 0
    rep = json.load(open(out))
    assert rep["result"]["cost"] == pytest.approx(1.0, rel=1e-12)
    assert rep["config"]["command"] == "transport"
    assert rep["config"]["inputs"] == [a, b]


def test_scan_example(graph_csv, tmp_path):
    out = str(tmp_path / "report.jsonl")
    assert run(["scan", "--p", "2", "--depth", "2:5", "--spacing", "50", graph_csv,
                "-o", out]) == 0
    lines = open(out).read().splitlines()
    # independent count of cubes with at least three atoms at generations 2..5
    P = load_measure(graph_csv).points
    expect = 0
    for j in range(2, 6):
        _, counts = np.unique(np.floor(P * 2 ** j).astype(int), axis=0, return_counts=True)
        expect += int(np.sum(counts >= 3))
    assert len(lines) == expect + 1
    assert all(set(json.loads(t)) == {"id", "alpha2", "beta2", "mass"} for t in lines[:-1])
    summary = json.loads(lines[-1])
    assert summary["config"]["options"]["depth"] == [2, 5]
    assert summary["summary"]["evaluated"] == expect


def test_scan_deterministic_across_jobs(tmp_path):
    src = str(tmp_path / "c.csv")
    assert run(["gen", "cantor", "--generation", "3", "-o", src]) == 0
    out = str(tmp_path / "s.jsonl")
    outs = []
    for jobs in ("1", "2", "1"):
        assert run(["scan", "--depth", "0:2", "--spacing", "40", "--jobs", jobs, src,
                    "-o", out]) == 0
        outs.append(open(out).read())
    assert outs[0] == outs[2]
    # only the recorded --jobs value differs
    assert outs[0].splitlines()[:-1] == outs[1].splitlines()[:-1]
    assert outs[1].replace('"jobs": 2', '"jobs": 1') == outs[0]


def test_coeff_report_embeds_config(graph_csv, tmp_path):
    out = str(tmp_path / "c.json")
    assert run(["coeff", "--kind", "beta", "--center", "0.5,0.0", "--radius", "0.1",
                graph_csv, "-o", out]) == 0
    rep = json.load(open(out))
    assert rep["config"]["options"]["center"] == [0.5, 0.0]
    assert rep["result"]["kind"] == "beta_p"
    assert rep["result"]["value"] >= 0


def test_localize_requires_seed(capsys):
    assert run(["localize", "--trials", "3"]) == 1
    assert "--seed" in capsys.readouterr().err


def test_localize_trials_deterministic(tmp_path):
    path = str(tmp_path / "l.json")
    texts = []
    for _ in range(2):
        assert run(["localize", "--trials", "4", "--seed", "9", "--res", "6", "-o", path]) == 0
        texts.append(open(path).read())
    assert texts[0] == texts[1]
    res = json.loads(texts[0])["result"]["results"]["2"]
    assert res["finite"] and res["trials"] == 4


def test_gen_density_deterministic_and_needs_seed(tmp_path):
    assert run(["gen", "density", "--res", "4"]) == 1
    path = str(tmp_path / "a.csv")
    blobs = []
    for _ in range(2):
        assert run(["gen", "density", "--res", "4", "--seed", "3", "-o", path]) == 0
        blobs.append(open(path, "rb").read())
    assert blobs[0] == blobs[1]


def test_knothe_command(tmp_path):
    sig, hf, out = (str(tmp_path / n) for n in ("s.csv", "h.csv", "k.json"))
    x = (np.arange(4) + 0.5) / 4
    save_measure(DiscreteMeasure(x[:, None], np.full(4, 0.25), 1), sig)
    with open(hf, "w") as fh:
        fh.write("h\n0.1\n0.1\n-0.1\n-0.1\n")
    assert run(["knothe", "--corner", "0", "--side", "1", "--h", hf, sig, "-o", out]) == 0
    res = json.load(open(out))["result"]
    assert res["marginal_error"] <= 1e-12
    assert res["h_sup"] == pytest.approx(0.1)


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["scan", "--depth", "5:2", "missing.csv"],
    ["coeff", "--center", "0,0", "--radius", "-1", "missing.csv"],
    ["transport", "--p", "0.5", "a", "b"],
])
def test_usage_errors_exit_1(argv, capsys):
    assert run(argv) == 1
    assert capsys.readouterr().err


def test_module_entry_point(tmp_path):
    out = str(tmp_path / "f.json")
    proc = subprocess.run([sys.executable, "-m", "otflat", "gen", "flat", "--res", "16",
                           "-o", out], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert len(load_measure(out)) == 16
