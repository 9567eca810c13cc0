import csv
import json

import numpy as np
import pytest
from click.testing import CliRunner

from csma_backoff import load_graph, save_graph
from csma_backoff.cli import cli, compute_rates, resolve_targets
from csma_backoff.graphs import ConflictGraph


@pytest.fixture
def runner():
    return CliRunner()


def _invoke(runner, *args):
    return runner.invoke(cli, [str(a) for a in args])


def test_generate_writes_graph(tmp_path, runner):
    out = tmp_path / "g.json"
    result = _invoke(runner, "generate", "-n", 20, "-r", 0.4, "-s", 5, "-o", out)
    assert result.exit_code == 0, result.output
    assert "edges=" in result.output and "max_clique=" in result.output
    G = load_graph(out)
    assert G.n == 20 and G.positions is not None


def test_generate_single_node(tmp_path, runner):
    out = tmp_path / "one.json"
    result = _invoke(runner, "generate", "-n", 1, "-r", 0.4, "-s", 5, "-o", out)
    assert result.exit_code == 0
    assert load_graph(out).edges == ()


def test_generate_deterministic_bytes(tmp_path, runner):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert _invoke(runner, "generate", "-n", 15, "-r", 0.3, "-s", 2, "-o", a).exit_code == 0
    assert _invoke(runner, "generate", "-n", 15, "-r", 0.3, "-s", 2, "-o", b).exit_code == 0
    assert a.read_bytes() == b.read_bytes()


def test_rates_chordal_exact_path(tmp_path, runner):
    gpath = tmp_path / "path.json"
    save_graph(ConflictGraph(3, [(0, 1), (1, 2)]), gpath)
    targets = tmp_path / "phi.json"
    targets.write_text(json.dumps([0.2, 0.3, 0.2]))
    out = tmp_path / "rates"
    result = _invoke(
        runner, "rates", gpath, "--targets", f"file:{targets}",
        "--method", "chordal-exact", "-o", out,
    )
    assert result.exit_code == 0, result.output
    with open(f"{out}.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [row["method"] for row in rows] == ["chordal-exact"] * 3
    nu = [float(row["nu"]) for row in rows]
    np.testing.assert_allclose(nu, [0.4, 0.84, 0.4], rtol=1e-12)
    payload = json.loads((tmp_path / "rates.json").read_text())
    assert payload["feasibility_warning"] is False
    timing = json.loads((tmp_path / "rates.timing.json").read_text())
    assert timing["total_seconds"] > 0


def test_rates_methods_tagged(tmp_path, runner):
    gpath = tmp_path / "k3.json"
    save_graph(ConflictGraph(3, [(0, 1), (0, 2), (1, 2)]), gpath)
    for method, expected_nu in (("kmax:3", 0.5), ("kmax:2", 0.2 * 0.8 / 0.36)):
        out = tmp_path / method.replace(":", "_")
        result = _invoke(
            runner, "rates", gpath, "--targets", "uniform:0.6", "--method", method, "-o", out,
        )
        assert result.exit_code == 0, result.output
        with open(f"{out}.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert all(row["method"] == "kmax" for row in rows)
        np.testing.assert_allclose([float(r["nu"]) for r in rows], expected_nu, rtol=1e-12)


def test_rates_infeasible_exits_2(tmp_path, runner):
    gpath = tmp_path / "k3.json"
    save_graph(ConflictGraph(3, [(0, 1), (0, 2), (1, 2)]), gpath)
    result = _invoke(
        runner, "rates", gpath, "--targets", "uniform:1.2", "--method", "kmax:n",
        "-o", tmp_path / "bad",
    )
    assert result.exit_code == 2
    assert "sum" in result.output


def test_rates_non_chordal_exits_1(tmp_path, runner):
    gpath = tmp_path / "c4.json"
    save_graph(ConflictGraph(4, [(0, 1), (1, 2), (2, 3), (0, 3)]), gpath)
    result = _invoke(
        runner, "rates", gpath, "--targets", "uniform:0.5", "--method", "chordal-exact",
        "-o", tmp_path / "x",
    )
    assert result.exit_code == 1


def test_simulate_smoke(tmp_path, runner):
    gpath = tmp_path / "path.json"
    save_graph(ConflictGraph(3, [(0, 1), (1, 2)]), gpath)
    out = tmp_path / "sim"
    result = _invoke(
        runner, "simulate", gpath, "--targets", "uniform:0.6", "--method", "chordal-exact",
        "--horizon", 20000, "--seed", 4, "-o", out,
    )
    assert result.exit_code == 0, result.output
    summary = json.loads((tmp_path / "sim.json").read_text())
    assert summary["violations"] == 0
    assert summary["mean_relative_error"] < 0.1
    with open(f"{out}.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3


def test_oracle_command(tmp_path, runner):
    gpath = tmp_path / "path.json"
    save_graph(ConflictGraph(3, [(0, 1), (1, 2)]), gpath)
    out = tmp_path / "oracle.json"
    result = _invoke(runner, "oracle", gpath, "--targets", "uniform:0.6", "-o", out)
    assert result.exit_code == 0, result.output
    assert "feasibility: feasible" in result.output
    assert json.loads(out.read_text())["Z"] > 1.0


def test_oracle_infeasible_exits_2(tmp_path, runner):
    gpath = tmp_path / "k3.json"
    save_graph(ConflictGraph(3, [(0, 1), (0, 2), (1, 2)]), gpath)
    result = _invoke(runner, "oracle", gpath, "--targets", "uniform:1.2")
    assert result.exit_code == 2


def test_evaluate_exact_forward(tmp_path, runner):
    spec = {
        "graphs": {"count": 3, "n": 10, "radius": 0.35, "seed": 40},
        "targets": {"mode": "degree-scaled", "c": 0.7},
        "methods": ["bethe", "kmax:n"],
        "evaluation": {"mode": "exact-forward"},
        "output_dir": str(tmp_path / "results"),
    }
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec))
    result = _invoke(runner, "evaluate", spec_path)
    assert result.exit_code == 0, result.output
    with open(tmp_path / "results" / "results.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6
    with open(tmp_path / "results" / "aggregate.csv") as fh:
        agg = {row["method"]: row for row in csv.DictReader(fh)}
    assert set(agg) == {"bethe", "kmax:n"}
    manifest = json.loads((tmp_path / "results" / "manifest.json").read_text())
    assert manifest["spec"]["graphs"]["count"] == 3
    assert len(manifest["items"]) == 6
    timings = (tmp_path / "results" / "timings.csv").read_text()
    assert "rate_seconds" in timings


def test_evaluate_exact_forward_chordal_mre_tiny(tmp_path, runner):
    from csma_backoff import random_chordal_graph

    files = []
    for seed in range(2):
        G = random_chordal_graph(9, seed)
        path = tmp_path / f"chordal{seed}.json"
        save_graph(G, path)
        files.append(str(path))
    spec = {
        "graphs": {"files": files},
        "targets": {"mode": "degree-scaled", "c": 0.6},
        "methods": ["chordal-exact", "kmax:n"],
        "evaluation": {"mode": "exact-forward"},
        "output_dir": str(tmp_path / "out"),
    }
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec))
    result = _invoke(runner, "evaluate", spec_path)
    assert result.exit_code == 0, result.output
    with open(tmp_path / "out" / "results.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert all(float(row["mre"]) <= 1e-9 for row in rows)


def test_evaluate_jobs_match_serial(tmp_path, runner):
    spec = {
        "graphs": {"count": 2, "n": 8, "radius": 0.3, "seed": 9},
        "targets": {"mode": "uniform-maxclique", "phi": 0.6},
        "methods": ["bethe"],
        "evaluation": {"mode": "exact-forward"},
    }
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec))
    r1 = _invoke(runner, "evaluate", spec_path, "--output-dir", tmp_path / "serial")
    r2 = _invoke(runner, "evaluate", spec_path, "--output-dir", tmp_path / "parallel", "--jobs", 4)
    assert r1.exit_code == 0 and r2.exit_code == 0
    assert (tmp_path / "serial" / "results.csv").read_bytes() == (
        tmp_path / "parallel" / "results.csv"
    ).read_bytes()


def test_resolve_targets_modes(tmp_path):
    G = ConflictGraph(3, [(0, 1), (0, 2), (1, 2)])
    np.testing.assert_allclose(resolve_targets(G, "uniform:0.6"), 0.2)
    np.testing.assert_allclose(resolve_targets(G, "degree:0.9"), 0.3)
    path = tmp_path / "t.json"
    path.write_text("[0.1, 0.2, 0.3]")
    np.testing.assert_allclose(resolve_targets(G, f"file:{path}"), [0.1, 0.2, 0.3])
    with pytest.raises((ValueError, OSError)):
        resolve_targets(G, "no-such-mode")


def test_compute_rates_unknown_method(k3):
    with pytest.raises(ValueError):
        compute_rates(k3, np.full(3, 0.2), "magic")
