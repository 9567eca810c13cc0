"""Command-line front end and experiment harness.

Subcommands: generate, rates, simulate, evaluate, oracle. Exit codes: 0 on
success, 2 when the requested targets are infeasible (or the inverse solve
will not converge), 1 on other errors. Data files are written atomically and
deterministically; wall-clock timings go to separate sidecar files so the
data outputs stay byte-reproducible.
"""

from __future__ import annotations

import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import click
import numpy as np

from . import __version__
from .exceptions import (
    ConvergenceError,
    InfeasibleTargetError,
    NotChordalError,
    StateSpaceCapError,
)
from .chordal import exact_rates_chordal
from .free_energy import bethe_rates, kmax_rates_recursive, triangle_rates
from .graphs import load_graph, maximal_cliques, random_geometric_graph, save_graph
from .oracle import feasibility_check, forward_throughputs, inverse_rates_bruteforce
from .simulator import SimConfig, mean_relative_error, simulate


class InfeasibleInput(click.ClickException):
    exit_code = 2


class AppError(click.ClickException):
    exit_code = 1


def _run(fn, *args, **kwargs):
    """Map domain errors onto the documented exit codes."""
    try:
        return fn(*args, **kwargs)
    except (InfeasibleTargetError, ConvergenceError) as exc:
        raise InfeasibleInput(str(exc)) from exc
    except (NotChordalError, StateSpaceCapError, ValueError, OSError) as exc:
        raise AppError(str(exc)) from exc


def _write_atomic(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_json(path, data):
    _write_atomic(path, json.dumps(data, indent=2) + "\n")


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _manifest(command, **extra):
    data = {
        "tool": "csma-backoff",
        "version": __version__,
        "numpy": np.__version__,
        "python": sys.version.split()[0],
        "command": command,
    }
    data.update(extra)
    return data


def resolve_targets(G, spec):
    """Target throughputs from a spec string.

    ``uniform:PHI`` spreads PHI over the largest clique (phi_i = PHI / max
    clique size), ``degree:C`` scales by connectivity (phi_i = C / (1+d_i)),
    and ``file:PATH`` (or a bare path) reads a JSON list.
    """
    if spec.startswith("uniform:"):
        phi = float(spec.split(":", 1)[1])
        omega = max(len(K) for K in maximal_cliques(G))
        return np.full(G.n, phi / omega)
    if spec.startswith("degree:"):
        c = float(spec.split(":", 1)[1])
        return c / (1.0 + np.asarray(G.degrees, dtype=np.float64))
    path = spec.split(":", 1)[1] if spec.startswith("file:") else spec
    with open(path) as fh:
        values = json.load(fh)
    targets = np.asarray(values, dtype=np.float64)
    if targets.shape != (G.n,):
        raise ValueError(f"target file holds {targets.size} values for {G.n} links")
    return targets


def compute_rates(G, targets, method, oracle_tol=1e-10, oracle_max_iter=100_000):
    """Dispatch on a method string: bethe | triangle | kmax[:K|:n] |
    chordal-exact | oracle."""
    if method == "bethe":
        return bethe_rates(G, targets)
    if method == "triangle":
        return triangle_rates(G, targets)
    if method == "chordal-exact":
        return exact_rates_chordal(G, targets).rates
    if method == "oracle":
        return inverse_rates_bruteforce(G, targets, tol=oracle_tol, max_iter=oracle_max_iter)
    if method == "kmax" or method.startswith("kmax:"):
        spec = method.split(":", 1)[1] if ":" in method else "n"
        k = G.n if spec == "n" else int(spec)
        return kmax_rates_recursive(G, targets, k)
    raise ValueError(f"unknown method {method!r}")


@click.group()
@click.version_option(__version__)
def cli():
    """Back-off rates for ideal CSMA networks, plus the tooling to check them."""


@cli.command()
@click.option("-n", "--nodes", type=int, required=True, help="Number of links.")
@click.option("-r", "--radius", type=float, required=True, help="Connection radius.")
@click.option("-s", "--seed", type=int, default=0, show_default=True)
@click.option("-o", "--out", type=click.Path(), required=True, help="Graph JSON path.")
def generate(nodes, radius, seed, out):
    """Generate a random geometric conflict graph and write it as JSON."""

    def body():
        G = random_geometric_graph(nodes, radius, seed)
        save_graph(G, out)
        omega = max(len(K) for K in maximal_cliques(G))
        click.echo(f"wrote {out}: n={G.n} edges={len(G.edges)} max_clique={omega}")

    _run(body)


@cli.command()
@click.argument("graph", type=click.Path(exists=True))
@click.option("--targets", required=True, help="uniform:PHI | degree:C | file:PATH")
@click.option("--method", required=True, help="bethe | triangle | kmax[:K|:n] | chordal-exact | oracle")
@click.option("-o", "--out", type=click.Path(), required=True, help="Output prefix (.csv/.json).")
def rates(graph, targets, method, out):
    """Compute back-off rates for a graph and target vector."""

    def body():
        G = load_graph(graph)
        phi = resolve_targets(G, targets)
        start = time.perf_counter()
        result = compute_rates(G, phi, method)
        elapsed = time.perf_counter() - start
        rows = [
            (i, repr(float(phi[i])), repr(float(result.nu[i])), result.method,
             "" if result.k_max is None else result.k_max)
            for i in range(G.n)
        ]
        _write_atomic(f"{out}.csv", _csv_text(("node_id", "phi", "nu", "method", "k_max"), rows))
        _write_json(
            f"{out}.json",
            {
                "manifest": _manifest("rates", graph=graph, targets=targets, method=method),
                "method": result.method,
                "k_max": result.k_max,
                "feasibility_warning": result.feasibility_warning,
                "phi": [float(v) for v in phi],
                "nu": [float(v) for v in result.nu],
            },
        )
        _write_json(
            f"{out}.timing.json",
            {"total_seconds": elapsed, "per_node_seconds": elapsed / G.n},
        )
        click.echo(
            f"{result.method}: {G.n} rates in {elapsed:.4f}s "
            f"({elapsed / G.n * 1e3:.4f} ms/node) -> {out}.csv"
        )
        if result.feasibility_warning:
            click.echo(
                "note: targets pass all region sums but were not certified achievable",
                err=True,
            )

    _run(body)


@cli.command(name="simulate")
@click.argument("graph", type=click.Path(exists=True))
@click.option("--rates-file", type=click.Path(exists=True), help="JSON rates produced by `rates`.")
@click.option("--targets", help="Compute rates on the fly for these targets.")
@click.option("--method", help="Rate method when --targets is used.")
@click.option("--horizon", type=float, default=1e6, show_default=True)
@click.option("--warmup-fraction", type=float, default=0.1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--replications", type=int, default=1, show_default=True)
@click.option("--backend", type=click.Choice(["auto", "compiled", "python"]), default="auto")
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("-o", "--out", type=click.Path(), required=True, help="Output prefix.")
def simulate_cmd(graph, rates_file, targets, method, horizon, warmup_fraction, seed,
                 replications, backend, workers, out):
    """Simulate the CSMA dynamics under given back-off rates."""

    def body():
        G = load_graph(graph)
        target_vec = None
        if rates_file:
            with open(rates_file) as fh:
                data = json.load(fh)
            nu = np.asarray(data["nu"], dtype=np.float64)
            if "phi" in data:
                target_vec = np.asarray(data["phi"], dtype=np.float64)
        elif targets and method:
            target_vec = resolve_targets(G, targets)
            nu = compute_rates(G, target_vec, method).nu
        else:
            raise ValueError("provide --rates-file, or --targets with --method")
        cfg = SimConfig(horizon=horizon, warmup_fraction=warmup_fraction,
                        seed=seed, replications=replications)
        result = simulate(G, nu, cfg, target=target_vec, backend=backend, workers=workers)
        rows = [
            (rep, node, repr(float(result.per_replication[rep, node])))
            for rep in range(replications)
            for node in range(G.n)
        ]
        _write_atomic(f"{out}.csv", _csv_text(("replication", "node", "achieved"), rows))
        summary = {
            "manifest": _manifest(
                "simulate", graph=graph, horizon=horizon,
                warmup_fraction=warmup_fraction, seed=seed, replications=replications,
            ),
            "achieved_mean": [float(v) for v in result.achieved],
            "stderr": None if result.stderr is None else [float(v) for v in result.stderr],
            "mean_relative_error": result.mean_relative_error,
            "events": result.events,
            "violations": result.violations,
            "backend": result.backend,
        }
        _write_json(f"{out}.json", summary)
        _write_json(f"{out}.timing.json", {"wall_clock_seconds": result.wall_clock})
        mre = "" if result.mean_relative_error is None else f" mre={result.mean_relative_error:.5f}"
        click.echo(
            f"simulated horizon={horizon:g} x{replications} on {result.backend} "
            f"({result.events} events){mre} -> {out}.json"
        )

    _run(body)


@cli.command()
@click.argument("graph", type=click.Path(exists=True))
@click.option("--targets", required=True, help="uniform:PHI | degree:C | file:PATH")
@click.option("--tol", type=float, default=1e-10, show_default=True)
@click.option("--max-iter", type=int, default=100_000, show_default=True)
@click.option("-o", "--out", type=click.Path(), help="Optional JSON output path.")
def oracle(graph, targets, tol, max_iter, out):
    """Brute-force inverse rates and feasibility verdict (small graphs)."""

    def body():
        G = load_graph(graph)
        phi = resolve_targets(G, targets)
        verdict = feasibility_check(G, phi, tol=tol, max_iter=max_iter)
        click.echo(f"feasibility: {verdict.verdict} (max clique sum {verdict.max_clique_sum:.6f})")
        if verdict.verdict == "infeasible":
            raise InfeasibleTargetError(
                f"targets infeasible; worst clique {verdict.offending_clique} "
                f"sums to {verdict.max_clique_sum:.6f}",
                region=verdict.offending_clique,
                total=verdict.max_clique_sum,
            )
        result = inverse_rates_bruteforce(G, phi, tol=tol, max_iter=max_iter)
        achieved, Z = forward_throughputs(G, result.nu)
        click.echo(f"rates found; forward error {float(np.abs(achieved - phi).max()):.3e}, Z={Z:.6g}")
        if out:
            _write_json(
                out,
                {
                    "manifest": _manifest("oracle", graph=graph, targets=targets, tol=tol),
                    "nu": [float(v) for v in result.nu],
                    "phi": [float(v) for v in phi],
                    "Z": Z,
                },
            )

    _run(body)


# --- experiment harness ------------------------------------------------------


def _experiment_items(spec):
    graphs = spec["graphs"]
    if "files" in graphs:
        return [("file", path, None) for path in graphs["files"]]
    base_seed = int(graphs.get("seed", 0))
    return [
        ("generate", {"n": graphs["n"], "radius": graphs["radius"], "seed": base_seed + i},
         base_seed + i)
        for i in range(int(graphs["count"]))
    ]


def _load_item_graph(item):
    kind, payload, _ = item
    if kind == "file":
        return load_graph(payload)
    return random_geometric_graph(payload["n"], payload["radius"], payload["seed"])


def _evaluate_item(item, method, spec, item_index):
    G = _load_item_graph(item)
    target_spec = spec["targets"]
    mode = target_spec["mode"]
    if mode == "uniform-maxclique":
        omega = max(len(K) for K in maximal_cliques(G))
        targets = np.full(G.n, float(target_spec["phi"]) / omega)
    elif mode == "degree-scaled":
        targets = float(target_spec["c"]) / (1.0 + np.asarray(G.degrees, dtype=np.float64))
    elif mode == "explicit":
        targets = np.asarray(target_spec["values"], dtype=np.float64)
    else:
        raise ValueError(f"unknown target mode {mode!r}")

    t0 = time.perf_counter()
    rates = compute_rates(G, targets, method)
    rate_seconds = time.perf_counter() - t0

    evaluation = spec["evaluation"]
    if evaluation["mode"] == "simulate":
        cfg = SimConfig(
            horizon=float(evaluation["horizon"]),
            warmup_fraction=float(evaluation.get("warmup_fraction", 0.1)),
            seed=int(evaluation.get("seed", 0)) + item_index,
            replications=int(evaluation.get("replications", 1)),
        )
        outcome = simulate(G, rates.nu, cfg, target=targets)
        mre = outcome.mean_relative_error
        eval_seconds = outcome.wall_clock
        eval_seed = cfg.seed
    elif evaluation["mode"] == "exact-forward":
        t0 = time.perf_counter()
        achieved, _ = forward_throughputs(G, rates.nu, cap=int(evaluation.get("cap", 24)))
        eval_seconds = time.perf_counter() - t0
        mre = mean_relative_error(targets, achieved)
        eval_seed = None
    else:
        raise ValueError(f"unknown evaluation mode {evaluation['mode']!r}")

    graph_id = item[1] if item[0] == "file" else f"rgg-{item[1]['n']}-{item[1]['radius']}-{item[1]['seed']}"
    return {
        "graph": graph_id,
        "graph_seed": item[2],
        "method": method,
        "mre": mre,
        "rate_seconds": rate_seconds,
        "eval_seconds": eval_seconds,
        "eval_seed": eval_seed,
    }


@cli.command()
@click.argument("specfile", type=click.Path(exists=True))
@click.option("--output-dir", type=click.Path(), help="Overrides the spec's output_dir.")
@click.option("--jobs", type=int, default=1, show_default=True, help="Concurrent items.")
def evaluate(specfile, output_dir, jobs):
    """Run a batch experiment described by a JSON spec file.

    The spec names the graphs (generator parameters or files), the target
    mode, the methods, and the evaluation mode (simulate or exact-forward).
    Emits per-item and aggregate mean-relative-error tables plus a manifest.
    """

    def body():
        with open(specfile) as fh:
            spec = json.load(fh)
        if not spec.get("methods"):
            raise ValueError("spec lists no methods")
        outdir = output_dir or spec.get("output_dir") or "results"
        os.makedirs(outdir, exist_ok=True)
        items = _experiment_items(spec)
        tasks = [
            (item, method, index)
            for index, item in enumerate(items)
            for method in spec["methods"]
        ]
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                rows = list(
                    pool.map(lambda t: _evaluate_item(t[0], t[1], spec, t[2]), tasks)
                )
        else:
            rows = [_evaluate_item(item, method, spec, index) for item, method, index in tasks]

        result_rows = [
            (r["graph"], r["graph_seed"], r["method"], repr(r["mre"]), r["eval_seed"])
            for r in rows
        ]
        _write_atomic(
            os.path.join(outdir, "results.csv"),
            _csv_text(("graph", "graph_seed", "method", "mre", "eval_seed"), result_rows),
        )
        timing_rows = [
            (r["graph"], r["method"], f"{r['rate_seconds']:.6f}", f"{r['eval_seconds']:.6f}")
            for r in rows
        ]
        _write_atomic(
            os.path.join(outdir, "timings.csv"),
            _csv_text(("graph", "method", "rate_seconds", "eval_seconds"), timing_rows),
        )
        aggregates = []
        for method in spec["methods"]:
            values = [r["mre"] for r in rows if r["method"] == method]
            aggregates.append(
                (method, repr(min(values)), repr(float(np.mean(values))), repr(max(values)))
            )
        _write_atomic(
            os.path.join(outdir, "aggregate.csv"),
            _csv_text(("method", "min_mre", "mean_mre", "max_mre"), aggregates),
        )
        _write_json(
            os.path.join(outdir, "manifest.json"),
            _manifest(
                "evaluate",
                spec=spec,
                items=[
                    {"graph": r["graph"], "graph_seed": r["graph_seed"], "eval_seed": r["eval_seed"]}
                    for r in rows
                ],
            ),
        )
        for method, lo, mean, hi in aggregates:
            click.echo(f"{method}: mre min={float(lo):.5f} mean={float(mean):.5f} max={float(hi):.5f}")
        click.echo(f"results in {outdir}/")

    _run(body)


def main(argv=None):
    return cli(args=argv, standalone_mode=True)


if __name__ == "__main__":
    main()
