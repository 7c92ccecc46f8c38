"""Command-line front end.

Subcommands: synth, publish, reconstruct, query, bench, table. Exit status
is 0 on success, 2 for usage or input errors and 3 when an internal
invariant check fails.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench, datasets
from ._meta import __version__, run_metadata
from .error_model import REPEATING, EQUALLY_SPACED, DatasetFamily, ErrorTable, build_error_table, choose_group_size, default_table
from .estimators import density_from_values, diffuse_for_viz, median_from_release, range_count
from .hilbert import HilbertConfig, Rect
from .isotonic import reconstruct
from .mechanism import AUTO, Release, publish, publish_values, publish_with_private_size

log = logging.getLogger("dploc")

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT = 0, 2, 3


class InvariantError(RuntimeError):
    """An output failed a self-check; the run must not be trusted."""


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0 or v != v or v == float("inf"):
        raise argparse.ArgumentTypeError(f"must be positive and finite, got {text}")
    return v


def _group_size(text):
    if text.lower() == AUTO:
        return AUTO
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"group size must be an integer or 'auto', got {text!r}") from None
    if k < 1:
        raise argparse.ArgumentTypeError("group size must be at least 1")
    return k


def _rect(text):
    try:
        return Rect.from_list(text.split(","))
    except (ValueError, TypeError) as exc:
        raise argparse.ArgumentTypeError(f"expected xmin,ymin,xmax,ymax: {exc}") from None


def _on_off(text):
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def _int_list(text):
    return [int(float(t)) for t in text.split(",") if t]


def _float_list(text):
    return [float(t) for t in text.split(",") if t]


def _load_table(path):
    return ErrorTable.load(path) if path else default_table()


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args):
    rng = np.random.default_rng(args.seed)
    meta = run_metadata({"cmd": "synth", "family": args.family, "n": args.n, "ls": args.ls}, args.seed)
    if args.family == "equally-spaced":
        datasets.write_values(args.out, datasets.equally_spaced(args.n), meta)
    elif args.family == "repeating":
        datasets.write_values(args.out, datasets.repeating_single_value(args.n), meta)
    elif args.family == "median":
        datasets.write_values(args.out, datasets.median_dataset(args.ls, rng), meta)
    elif args.family == "clustered":
        datasets.write_points(args.out, datasets.clustered_2d(args.n, rng), meta)
    elif args.family == "uniform":
        datasets.write_points(args.out, datasets.uniform_2d(args.n, rng), meta)
    print(f"wrote {args.family} dataset to {args.out}")


def cmd_publish(args):
    data = datasets.read_dataset(args.input)
    table = _load_table(args.table) if args.k == AUTO else None
    noise = args.noise
    if data.values is not None:
        if args.private_size:
            raise ValueError("--private-size needs a point dataset")
        release = publish_values(data.values, args.epsilon, args.k, args.seed, noise=noise, table=table)
    else:
        cfg = data.default_config(args.order)
        if args.domain is not None:
            cfg = HilbertConfig(args.order, args.domain)
        if args.private_size:
            _, release = publish_with_private_size(
                data.points, args.epsilon, args.size_split, args.k, cfg, args.seed, noise=noise, table=table
            )
        else:
            release = publish(data.points, args.epsilon, args.k, cfg, args.seed, noise=noise, table=table)
    if release.n < 1 or release.m != -(-release.n // release.group_size):
        raise InvariantError("release block layout is inconsistent")
    release.save(args.out)
    print(f"n={release.n} k={release.group_size} epsilon={release.epsilon:g} blocks={release.m} -> {args.out}")


def cmd_reconstruct(args):
    release = Release.load(args.release)
    rec = reconstruct(release, clamp=not args.no_clamp)
    if rec.values.size != release.n or np.any(np.diff(rec.values) < 0):
        raise InvariantError("reconstruction is not a nondecreasing sequence of n values")
    meta = dict(release.meta)
    meta["cmd"] = "reconstruct"
    if args.values_out:
        datasets.write_values(args.values_out, rec.values, meta)
    if rec.points is None:
        datasets.write_values(args.out, rec.values, meta)
        print(f"wrote {release.n} values to {args.out}")
        return
    points = rec.points
    if args.diffuse:
        cfg = release.hilbert
        cell = max(cfg.domain.width, cfg.domain.height) / cfg.side
        points = diffuse_for_viz(points, np.random.default_rng(args.seed), cell)
        meta["diffuse_seed"] = args.seed
    datasets.write_points(args.out, points, meta)
    if args.plot:
        from .plotting import plot_points

        plot_points(points, args.plot)
    print(f"wrote {release.n} points to {args.out}")


def _read_queries(path):
    import csv

    with open(path, newline="") as fh:
        rows = [r for r in csv.DictReader(line for line in fh if not line.startswith("#"))]
    try:
        return [Rect(float(r["xmin"]), float(r["ymin"]), float(r["xmax"]), float(r["ymax"])) for r in rows]
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: query rows need xmin,ymin,xmax,ymax ({exc})") from None


def cmd_query(args):
    release = Release.load(args.release)
    meta = dict(release.meta)
    meta["cmd"] = "query"
    if args.median:
        value, point = median_from_release(release)
        rows = [{"median_value": value}]
        if point is not None:
            rows[0].update({"x": float(point[0]), "y": float(point[1])})
        _emit(rows, args.out, meta)
        return
    if release.hilbert is None:
        raise ValueError("range queries need a release of 2D points")
    cfg = release.hilbert
    rec = reconstruct(release)
    density = density_from_values(rec.values)
    if args.queries:
        queries = _read_queries(args.queries)
    elif args.random_squares:
        rng = np.random.default_rng(args.seed)
        queries = [q for _, q in bench.random_squares(args.random_squares, args.count, rng, cfg.domain)]
        meta["query_seed"] = args.seed
    else:
        queries = [cfg.domain]
    rows = []
    for q in queries:
        c = range_count(rec.values, q, cfg, release.n, density=density)
        rows.append({"xmin": q.xmin, "ymin": q.ymin, "xmax": q.xmax, "ymax": q.ymax, "count": c})
    if args.density_out:
        dens_rows = [
            {"breakpoint_lo": float(lo), "breakpoint_hi": float(hi), "density": float(d)}
            for lo, hi, d in zip(density.breakpoints[:-1], density.breakpoints[1:], density.densities)
        ]
        bench.write_rows(dens_rows, args.density_out, meta)
    _emit(rows, args.out, meta)


def _emit(rows, out, meta):
    text = bench.write_rows(rows, out, meta)
    if out is None:
        sys.stdout.write(text)


def cmd_bench(args):
    seed, trials = args.seed, args.trials
    config = {k: v for k, v in vars(args).items() if k not in ("func", "out", "plot")}
    meta = run_metadata(config, seed)
    plot = None
    if args.plot:
        from . import plotting as plot
    exp = args.experiment

    if exp == "err-vs-n":
        ns = args.n or [100, 200, 500, 1000, 2000, 5000, 10000]
        rows = bench.err_vs_n([REPEATING, EQUALLY_SPACED], ns, args.epsilon or 1.0, trials, seed)
        plot and plot.plot_err_vs_n(rows, args.plot)
    elif exp == "eps-ratio":
        rows = bench.eps_ratio(args.n or [10000], args.eps or [0.5, 1.0, 2.0, 3.0], trials, seed)
        plot and plot.plot_eps_ratio(rows, args.plot)
    elif exp == "gen-error":
        n = (args.n or [10000])[0]
        rng = np.random.default_rng(seed)
        data = {
            "equally-spaced": datasets.equally_spaced(n),
            "uniform": rng.random(n),
            "exponential": np.minimum(rng.exponential(0.2, n), 1.0),
        }
        rows = bench.gen_error_curve(data, args.k or [1, 2, 5, 10, 20, 50, 100, 200, 500])
        plot and plot.plot_gen_error(rows, args.plot)
    elif exp == "group-size":
        n = (args.n or [10000])[0]
        seq = _clustered_values(n, seed)
        rows = bench.group_size_curve(seq, args.epsilon or 1.0, args.k or [1, 5, 10, 20, 50, 100, 200, 300, 500],
                                      trials, seed, _load_table(args.table))
        plot and plot.plot_group_size(rows, args.plot)
    elif exp == "bias":
        ranks = (100, 900)
        disp = bench.bias_experiment((args.n or [1000])[0], args.epsilon or 1.0, trials, seed, ranks)
        rows = [{"rank": r, "mean": float(disp[:, i].mean()), "variance": float(disp[:, i].var(ddof=1))}
                for i, r in enumerate(ranks)]
        plot and plot.plot_bias(disp, ranks, args.plot)
    elif exp == "range":
        n = (args.n or [50000])[0]
        pts = datasets.clustered_2d(n, np.random.default_rng(seed))
        rows, _ = bench.range_query_experiment(pts, args.epsilon or 1.0, count=args.count, seed=seed)
        plot and plot.plot_range(rows, args.plot)
    elif exp == "median-ls":
        rows = bench.median_vs_ls(args.ls or [0.05, 0.1, 0.2, 0.3, 0.4, 0.5], args.epsilon or 1.0, trials, seed,
                                  table=_load_table(args.table))
        plot and plot.plot_median(rows, "local_sensitivity", args.plot)
    elif exp == "median-eps":
        rows = bench.median_vs_eps(args.eps or [0.25, 0.5, 1.0, 2.0, 3.0], 0.3, trials, seed,
                                   table=_load_table(args.table))
        plot and plot.plot_median(rows, "epsilon", args.plot)
    elif exp == "density":
        n = (args.n or [50000])[0]
        pts = datasets.clustered_2d(n, np.random.default_rng(seed))
        rows, grids = bench.density_comparison(pts, args.epsilon or 3.0, seed=seed)
        plot and plot.plot_densities(grids, args.plot)
    elif exp == "group-sizes":
        rows = bench.group_size_agreement(_load_table(args.table))
    else:  # argparse restricts choices
        raise ValueError(f"unknown experiment {exp}")
    _emit(rows, args.out, meta)


def _clustered_values(n, seed):
    from .hilbert import map_dataset

    pts = datasets.clustered_2d(n, np.random.default_rng(seed))
    return np.sort(map_dataset(pts, HilbertConfig()))


def cmd_table(args):
    if args.action == "build":
        families = []
        for name in args.family:
            if name == "repeating":
                families.append(REPEATING)
            elif name == "equally-spaced":
                families.append(EQUALLY_SPACED)
            else:
                families.append(DatasetFamily.from_file(name))
        n_grid = args.n_grid or sorted(set(np.round(np.geomspace(2, 200000, 48)).astype(int).tolist()))
        tables = build_error_table(families, n_grid, args.eps_grid or [1.0], args.trials, args.seed)
        out = Path(args.out)
        for name, table in tables.items():
            path = out if len(tables) == 1 else out.with_name(f"{out.stem}_{name}{out.suffix}")
            table.save(path)
            print(f"wrote {name} table to {path}")
        return
    table = _load_table(args.table)
    if args.action == "choose":
        print(choose_group_size(args.n_points, args.epsilon, table))
        return
    rows = [{"n": int(n), **{f"eps={e:g}": float(v) for e, v in zip(table.eps_grid, table.values[:, i])}}
            for i, n in enumerate(table.n_grid)]
    _emit(rows, args.out, table.meta)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dploc", description="Differentially private publishing of 2D pointsets.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic dataset")
    s.add_argument("--family", required=True, choices=["equally-spaced", "repeating", "clustered", "uniform", "median"])
    s.add_argument("--n", type=int, default=10000)
    s.add_argument("--ls", type=float, default=0.3, help="median family: local sensitivity")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("publish", help="publish a dataset under epsilon-DP")
    s.add_argument("input")
    s.add_argument("--epsilon", type=_positive_float, required=True)
    s.add_argument("--k", type=_group_size, default=AUTO)
    s.add_argument("--order", type=int, default=10)
    s.add_argument("--domain", type=_rect, default=None, help="xmin,ymin,xmax,ymax")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise", type=_on_off, default=True, help="'off' publishes exact sums (testing only)")
    s.add_argument("--private-size", action="store_true", help="also hide n, spending part of the budget")
    s.add_argument("--size-split", type=float, default=0.1)
    s.add_argument("--table", default=None, help="error table for --k auto")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_publish)

    s = sub.add_parser("reconstruct", help="rebuild a pointset from a release")
    s.add_argument("release")
    s.add_argument("--out", required=True)
    s.add_argument("--values-out", default=None)
    s.add_argument("--diffuse", action="store_true", help="spread repeated points for plotting")
    s.add_argument("--no-clamp", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--plot", default=None, help="also render the points to this image")
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("query", help="answer range or median queries from a release")
    s.add_argument("release")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--queries", default=None, help="CSV of xmin,ymin,xmax,ymax")
    g.add_argument("--median", action="store_true")
    g.add_argument("--random-squares", type=_float_list, default=None, help="comma-separated widths")
    s.add_argument("--count", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--density-out", default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_query)

    s = sub.add_parser("bench", help="run an experiment sweep")
    s.add_argument("experiment", choices=bench.EXPERIMENTS)
    s.add_argument("--epsilon", type=_positive_float, default=None)
    s.add_argument("--eps", type=_float_list, default=None)
    s.add_argument("--n", type=_int_list, default=None)
    s.add_argument("--k", type=_int_list, default=None)
    s.add_argument("--ls", type=_float_list, default=None)
    s.add_argument("--trials", type=int, default=500)
    s.add_argument("--count", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--table", default=None)
    s.add_argument("--out", default=None)
    s.add_argument("--plot", default=None, help="render the sweep to this image file")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("table", help="build, print or query the group-size error table")
    s.add_argument("action", choices=["build", "show", "choose"])
    s.add_argument("--family", nargs="+", default=["repeating"])
    s.add_argument("--n-grid", type=_int_list, default=None)
    s.add_argument("--eps-grid", type=_float_list, default=None)
    s.add_argument("--trials", type=int, default=500)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--table", default=None)
    s.add_argument("--n-points", type=int, default=10000)
    s.add_argument("--epsilon", type=_positive_float, default=1.0)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_table)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "trials", 1) is not None and getattr(args, "trials", 1) < 1:
        parser.error("--trials must be at least 1")
    if args.command == "table" and args.action == "build" and not args.out:
        parser.error("table build needs --out")
    try:
        args.func(args)
    except (InvariantError, AssertionError) as exc:
        print(f"dploc: invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ValueError, OSError) as exc:
        print(f"dploc: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
