"""Command-line interface: `kcond <command> ...`."""
import json
import math
import os
import sys

import click
import numpy as np

from . import __version__, cluster, core as core_mod, fixpoint, graphs, gw, io, selftest as st, wp
from .rng import default_seed

EXIT_REFUSED = 3


class Ctx:
    def __init__(self, seed, threads, fmt, out):
        self.seed = seed
        self.threads = threads
        self.fmt = fmt
        self.out = out


def _stamp(ctx, command, config):
    return {"version": __version__, "command": command, "config": config, "seed": ctx.seed}


def _write(ctx, text):
    if ctx.out:
        with open(ctx.out, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=not text.endswith("\n"))


def emit(ctx, command, config, result):
    """Single result: JSON by default, key/value CSV on request."""
    if ctx.fmt == "csv":
        meta = _stamp(ctx, command, config)
        rows = [(k, v) for k, v in sorted(result.items()) if not isinstance(v, (list, dict, np.ndarray))]
        _write(ctx, io.dumps_csv(["key", "value"], rows, [json.dumps(meta, sort_keys=True)]))
    else:
        _write(ctx, io.dumps_json({"meta": _stamp(ctx, command, config), "result": result}))


def emit_table(ctx, command, config, header, rows):
    """Curves: CSV by default, JSON list of records on request."""
    if ctx.fmt == "json":
        emit(ctx, command, config, {"rows": [dict(zip(header, r)) for r in rows]})
    else:
        meta = json.dumps(_stamp(ctx, command, config), sort_keys=True)
        _write(ctx, io.dumps_csv(header, rows, [meta]))


def fail(err, code=EXIT_REFUSED):
    click.echo(json.dumps({"error": type(err).__name__, "message": str(err)}), err=True)
    sys.exit(code)


def _load(graph, coloring):
    G, k = io.read_graph(graph)
    sigma = io.read_coloring(coloring, k)
    if len(sigma.colors) != G.n:
        raise click.UsageError(f"coloring has {len(sigma.colors)} entries, graph has {G.n} vertices")
    return G, sigma, k


@click.group()
@click.option("--seed", type=int, default=None, help="Master seed (default: $KCOND_SEED or built-in).")
@click.option("--threads", type=click.IntRange(min=1), default=None, help="Worker processes (default: all cores).")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write output here instead of stdout.")
@click.version_option(__version__)
@click.pass_context
def cli(click_ctx, seed, threads, fmt, out):
    """Numerics for the condensation threshold of random graph coloring."""
    click_ctx.obj = Ctx(default_seed() if seed is None else seed, threads or os.cpu_count() or 1, fmt, out)


# ---------------------------------------------------------------- gen

@cli.group()
def gen():
    """Generate random graphs."""


@gen.command("planted")
@click.option("--n", type=click.IntRange(min=1), required=True)
@click.option("--k", type=click.IntRange(min=2), required=True)
@click.option("--d", type=click.FloatRange(min=0), default=None, help="Average degree (binomial edges).")
@click.option("--m", type=click.IntRange(min=0), default=None, help="Exact edge count with a uniform sigma.")
@click.option("--graph-out", type=click.Path(dir_okay=False), required=True)
@click.option("--coloring-out", type=click.Path(dir_okay=False), required=True)
@click.pass_obj
def gen_planted(ctx, n, k, d, m, graph_out, coloring_out):
    """Planted model: a coloring first, then bichromatic edges only."""
    if (d is None) == (m is None):
        raise click.UsageError("give exactly one of --d and --m")
    try:
        if d is not None:
            sigma, G = graphs.gen_planted_p(n, k, d, ctx.seed)
        else:
            sigma = graphs.Coloring(graphs.as_generator(ctx.seed, "planted-sigma").integers(0, k, n), k)
            G = graphs.gen_planted_m(n, m, sigma, ctx.seed, k)
    except ValueError as err:
        fail(err)
    io.write_graph(graph_out, G, k)
    io.write_coloring(coloring_out, sigma)
    emit(ctx, "gen planted", {"n": n, "k": k, "d": d, "m": m},
         {"n": G.n, "m": G.m, "k": k, "class_sizes": graphs.class_sizes(sigma, k),
          "graph": graph_out, "coloring": coloring_out})


@gen.command("gnm")
@click.option("--n", type=click.IntRange(min=1), required=True)
@click.option("--m", type=click.IntRange(min=0), required=True)
@click.option("--k", type=click.IntRange(min=2), default=3, help="Written into the header.")
@click.option("--graph-out", type=click.Path(dir_okay=False), required=True)
@click.pass_obj
def gen_gnm(ctx, n, m, k, graph_out):
    """Uniform graph with exactly m edges."""
    try:
        G = graphs.gen_gnm(n, m, ctx.seed)
    except ValueError as err:
        fail(err)
    io.write_graph(graph_out, G, k)
    emit(ctx, "gen gnm", {"n": n, "m": m, "k": k}, {"n": G.n, "m": G.m, "graph": graph_out})


# ---------------------------------------------------------------- core / wp

@cli.command("core")
@click.option("--graph", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--coloring", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--threshold", type=click.IntRange(min=1), default=core_mod.DEFAULT_THRESHOLD)
@click.pass_obj
def core_cmd(ctx, graph, coloring, threshold):
    """The sigma-core by peeling."""
    G, sigma, k = _load(graph, coloring)
    try:
        res = core_mod.core(G, sigma, threshold, k)
    except ValueError as err:
        fail(err)
    emit(ctx, "core", {"graph": graph, "coloring": coloring, "threshold": threshold},
         {"size": res.size, "members": np.flatnonzero(res.members)})


@cli.group("wp")
def wp_group():
    """Warning Propagation."""


@wp_group.command("run")
@click.option("--graph", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--coloring", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--variant", type=click.Choice(["planted", "core"]), default="planted")
@click.option("--threshold", type=click.IntRange(min=1), default=core_mod.DEFAULT_THRESHOLD)
@click.option("--emit", "what", type=click.Choice(["lists", "reduced", "logz"]), default="lists")
@click.option("--cap", type=click.IntRange(min=1), default=wp.NONTREE_CAP,
              help="Largest cyclic component counted exactly.")
@click.pass_obj
def wp_run_cmd(ctx, graph, coloring, variant, threshold, what, cap):
    """Run WP to its first repeated state."""
    G, sigma, k = _load(graph, coloring)
    config = {"graph": graph, "coloring": coloring, "variant": variant, "threshold": threshold,
              "emit": what, "cap": cap}
    try:
        res = wp.wp_run(G, sigma, k, variant, threshold)
        out = {"rounds": res.rounds, "cycle": res.cycle}
        lists = [[int(c) for c in wp.dtree.mask_colors(x)] for x in res.lists]
        if what == "lists":
            out["lists"] = lists
        else:
            R = wp.reduced_graph(G, sigma, res, k, "limit")
            if what == "reduced":
                out.update(lists=lists, edges=R.graph.edges, components=R.ncomp)
            else:
                out["log_z"] = wp.log_legal_colorings_reduced(R, cap)
    except ValueError as err:
        fail(err)
    emit(ctx, "wp run", config, out)


# ---------------------------------------------------------------- gw

@cli.group("gw")
def gw_group():
    """The multi-type Galton-Watson process."""


@gw_group.command("sample")
@click.option("--k", type=click.IntRange(min=3), required=True)
@click.option("--d", type=click.FloatRange(min=0, min_open=True), required=True)
@click.option("--n", type=click.IntRange(min=1), required=True, help="Number of trees.")
@click.option("--ell-cap", type=click.IntRange(min=1), default=None)
@click.option("--emit", "what", type=click.Choice(["stats", "trees"]), default="stats")
@click.pass_obj
def gw_sample(ctx, k, d, n, ell_cap, what):
    """Sample trees; report free-entropy statistics or the trees themselves."""
    config = {"k": k, "d": d, "n": n, "ell_cap": ell_cap, "emit": what}
    try:
        params = gw.gw_params(d, k, ell_cap)
        if what == "trees":
            trees = [io.format_tree(gw.sample_tree(params, ctx.seed, i)) for i in range(n)]
            return emit(ctx, "gw sample", config, {"trees": trees})
        vals = gw.free_entropy_samples(params, n, ctx.seed, workers=ctx.threads)
    except (fixpoint.NoFixedPoint, gw.Supercritical, gw.TreeTooLarge) as err:
        fail(err)
    se = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    emit(ctx, "gw sample", config, {"q_star": params.q_star, "mean_free_entropy": float(vals.mean()),
                                    "stderr": se, "tail_mass": params.tail_mass,
                                    "mean_tree_size": gw.mean_tree_size(params)})


@gw_group.command("subcrit")
@click.option("--k", type=click.IntRange(min=3), required=True)
@click.option("--d", type=click.FloatRange(min=0, min_open=True), required=True)
@click.option("--ell-cap", type=click.IntRange(min=2), default=None)
@click.pass_obj
def gw_subcrit(ctx, k, d, ell_cap):
    """Spectral radius of the lumped mean offspring matrix."""
    try:
        params = gw.gw_params(d, k, ell_cap)
    except fixpoint.NoFixedPoint as err:
        fail(err)
    M, rho = gw.mean_matrix(params)
    emit(ctx, "gw subcrit", {"k": k, "d": d, "ell_cap": ell_cap},
         {"spectral_radius": rho, "subcritical": rho < 1, "matrix": M, "q_star": params.q_star})


# ---------------------------------------------------------------- fixed points

@cli.group("fixpoint")
def fixpoint_group():
    """Fixed points of the scalar map."""


@fixpoint_group.command("scalar")
@click.option("--k", type=click.IntRange(min=3), required=True)
@click.option("--d", type=click.FloatRange(min=0, min_open=True), required=True)
@click.pass_obj
def fixpoint_scalar(ctx, k, d):
    """q* = (1 - exp(-d q*/(k-1)))^(k-1) by iteration from 1."""
    try:
        q = fixpoint.scalar_fixed_point(d, k)
    except fixpoint.NoFixedPoint as err:
        fail(err)
    emit(ctx, "fixpoint scalar", {"k": k, "d": d},
         {"q_star": q, "residual": abs(fixpoint.scalar_map(q, d, k) - q)})


@cli.group("sigma")
def sigma_group():
    """The functional Sigma_k(d)."""


@sigma_group.command("curve")
@click.option("--k", type=click.IntRange(min=3), required=True)
@click.option("--dmin", type=float, required=True)
@click.option("--dmax", type=float, required=True)
@click.option("--steps", type=click.IntRange(min=1), default=21)
@click.option("--samples", type=click.IntRange(min=2), default=100000)
@click.pass_obj
def sigma_curve(ctx, k, dmin, dmax, steps, samples):
    """Sigma_k on an even grid under common random numbers."""
    if dmax < dmin:
        raise click.UsageError("--dmax must be at least --dmin")
    try:
        rows = fixpoint.sigma_curve(k, dmin, dmax, steps, samples, ctx.seed, ctx.threads)
    except (fixpoint.NoFixedPoint, gw.Supercritical, gw.TreeTooLarge) as err:
        fail(err)
    emit_table(ctx, "sigma curve", {"k": k, "dmin": dmin, "dmax": dmax, "steps": steps, "samples": samples},
               ["d", "sigma", "stderr", "n_samples"], rows)


@cli.command("dcond")
@click.option("--k", type=click.IntRange(min=3), required=True)
@click.option("--samples", type=click.IntRange(min=2), default=200000)
@click.option("--tol", type=click.FloatRange(min=0, min_open=True), default=0.01)
@click.pass_obj
def dcond(ctx, k, samples, tol):
    """Locate the zero of Sigma_k by bisection on the candidate window."""
    try:
        res = fixpoint.find_dcond(k, samples, tol, ctx.seed, workers=ctx.threads)
    except fixpoint.SignConditionFailed as err:
        click.echo(io.dumps_json({"error": "SignConditionFailed", "message": str(err),
                                  "evaluations": err.values}), err=True)
        sys.exit(EXIT_REFUSED)
    except (fixpoint.NoFixedPoint, gw.Supercritical, gw.TreeTooLarge) as err:
        fail(err)
    emit(ctx, "dcond", {"k": k, "samples": samples, "tol": tol}, res)


# ---------------------------------------------------------------- cluster / stats

@cli.group("cluster")
def cluster_group():
    """Brute-force clusters."""


@cluster_group.command("brute")
@click.option("--graph", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--coloring", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--cap", type=click.IntRange(min=1), default=cluster.ENUM_CAP)
@click.pass_obj
def cluster_brute(ctx, graph, coloring, cap):
    """Enumerate the cluster C(G, sigma) and the predicates on it."""
    G, sigma, k = _load(graph, coloring)
    try:
        res = cluster.cluster_brute(G, sigma, k, cap)
        pred = cluster.predicates(G, sigma, k, cap=cap)
    except ValueError as err:
        fail(err)
    lists = [wp.dtree.mask_colors(x) for x in res.lists]
    emit(ctx, "cluster brute", {"graph": graph, "coloring": coloring, "cap": cap},
         {"size": res.size, "log_size": math.log(res.size) if res.size else -math.inf,
          "members_sample": res.members_sample, "lists": lists, "predicates": pred})


@cli.group("stats")
def stats_group():
    """Planted-graph statistics against the branching process."""


@stats_group.command("trees")
@click.option("--n", type=click.IntRange(min=1), required=True)
@click.option("--k", type=click.IntRange(min=3), required=True)
@click.option("--d", type=click.FloatRange(min=0, min_open=True), required=True)
@click.option("--classes", type=click.Path(exists=True, dir_okay=False), default=None,
              help="File with one class code per line (default: three smallest).")
@click.option("--mode", type=click.Choice(["round", "limit"]), default="round")
@click.option("--min-expected", type=float, default=100.0)
@click.pass_obj
def stats_trees(ctx, n, k, d, classes, mode, min_expected):
    """Frozen fractions and decorated-tree class frequencies."""
    codes = io.read_classes(classes) if classes else None
    try:
        rep = cluster.compare_tree_stats(n, k, d, codes, ctx.seed, mode, min_expected=min_expected)
    except (ValueError, fixpoint.NoFixedPoint, gw.Supercritical) as err:
        fail(err)
    emit(ctx, "stats trees", {"n": n, "k": k, "d": d, "classes": classes, "mode": mode,
                              "min_expected": min_expected}, rep)


@cli.command("selftest")
@click.option("--expected", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Alternative file of stored reference values.")
@click.pass_obj
def selftest_cmd(ctx, expected):
    """Fast reduced-scale acceptance checks; nonzero exit on failure."""
    report = st.run(ctx.seed, expected)
    emit(ctx, "selftest", {"expected": expected}, {"checks": report,
                                                   "all_pass": all(r["pass"] for r in report)})
    failed = [r["criterion"] for r in report if not r["pass"]]
    if failed:
        click.echo("FAILED: " + ", ".join(failed), err=True)
        sys.exit(1)


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="kcond", standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(1)
    except click.ClickException as err:
        err.show()
        click.echo(json.dumps({"error": type(err).__name__, "message": err.format_message()}), err=True)
        sys.exit(err.exit_code)
    except (ValueError, RuntimeError, OSError) as err:
        fail(err, 1)


if __name__ == "__main__":
    main()
