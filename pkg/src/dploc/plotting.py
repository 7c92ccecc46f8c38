"""Figure rendering for bench output. Every function writes one image file."""

from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.5, 3.8),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
}

MARKERS = ("o", "s", "^", "D", "v", "x")


def _new():
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
    return fig, ax


def _save(fig, path):
    with plt.rc_context(STYLE):
        fig.tight_layout()
        fig.savefig(path)
    plt.close(fig)


def _series(rows, key, x, y):
    out = defaultdict(lambda: ([], []))
    for r in rows:
        xs, ys = out[r[key]]
        xs.append(float(r[x]))
        ys.append(float(r[y]))
    return out


def plot_err_vs_n(rows, path):
    fig, ax = _new()
    for i, (fam, (xs, ys)) in enumerate(_series(rows, "family", "n", "err1").items()):
        ax.loglog(xs, ys, marker=MARKERS[i % len(MARKERS)], label=fam)
    ax.set_xlabel("dataset size n")
    ax.set_ylabel("expected normalized error, k = 1")
    ax.legend()
    _save(fig, path)


def plot_eps_ratio(rows, path):
    fig, ax = _new()
    for i, (n, (xs, ys)) in enumerate(_series(rows, "n", "epsilon", "ratio").items()):
        ax.plot(xs, ys, marker=MARKERS[i % len(MARKERS)], label=f"n = {int(n)}")
    eps = np.linspace(min(float(r["epsilon"]) for r in rows), max(float(r["epsilon"]) for r in rows), 100)
    ax.plot(eps, 1.0 / eps, "k--", lw=1, label="1 / epsilon")
    ax.set_xlabel("epsilon")
    ax.set_ylabel("error ratio to epsilon = 1")
    ax.legend()
    _save(fig, path)


def plot_gen_error(rows, path):
    fig, ax = _new()
    for i, (name, (xs, ys)) in enumerate(_series(rows, "dataset", "k", "gen").items()):
        ax.plot(xs, ys, marker=MARKERS[i % len(MARKERS)], ms=3, label=name)
    ks = sorted({float(r["k"]) for r in rows})
    n = float(rows[0]["n"])
    ax.plot(ks, [k / (4 * n) for k in ks], "k--", lw=1, label="k / 4n")
    ax.plot(ks, [k / (2 * n) for k in ks], "k:", lw=1, label="k / 2n")
    ax.set_xlabel("group size k")
    ax.set_ylabel("normalized generalization error")
    ax.legend()
    _save(fig, path)


def plot_group_size(rows, path):
    fig, ax = _new()
    ks = [float(r["k"]) for r in rows]
    for key, style in (("gen", ":"), ("err1_down", "-."), ("bound", "-"), ("measured", "--"), ("predicted", "-")):
        if key in rows[0]:
            ax.plot(ks, [float(r[key]) for r in rows], style, marker=".", label=key)
    ax.set_xscale("log")
    ax.set_xlabel("group size k")
    ax.set_ylabel("expected normalized error")
    ax.legend()
    _save(fig, path)


def plot_bias(displacements, ranks, path):
    fig, ax = _new()
    for i, r in enumerate(ranks):
        ax.hist(displacements[:, i], bins=80, histtype="step", density=True, label=f"rank {r}")
    ax.axvline(0.0, color="k", lw=0.8)
    ax.set_xlabel("displacement")
    ax.set_ylabel("density")
    ax.legend()
    _save(fig, path)


def plot_range(rows, path):
    fig, ax = _new()
    for i, (mech, (xs, ys)) in enumerate(_series(rows, "mechanism", "width", "mean_abs_error").items()):
        ax.loglog(xs, ys, marker=MARKERS[i % len(MARKERS)], label=mech)
    ax.set_xlabel("query width (fraction of domain side)")
    ax.set_ylabel("mean absolute error")
    ax.legend()
    _save(fig, path)


def plot_median(rows, xkey, path):
    fig, ax = _new()
    xs = [float(r[xkey]) for r in rows]
    ax.plot(xs, [float(r["ours"]) for r in rows], "o-", label="grouped release")
    ax.plot(xs, [float(r["smooth_sensitivity"]) for r in rows], "s--", mfc="none", label="smooth sensitivity")
    ax.set_xlabel(xkey.replace("_", " "))
    ax.set_ylabel("mean absolute median error")
    ax.legend()
    _save(fig, path)


def plot_densities(grids: dict, path):
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(grids), figsize=(3.2 * len(grids), 3.2))
    vmax = max(float(np.percentile(g, 99.5)) for g in grids.values())
    for ax, (name, grid) in zip(np.atleast_1d(axes), grids.items()):
        ax.imshow(grid, origin="lower", cmap="Greys", vmin=0, vmax=vmax, extent=(0, 1, 0, 1))
        ax.set_title(name)
        ax.set_xticks([])
        ax.set_yticks([])
    _save(fig, path)


def plot_points(points, path, *, sample: float = 1.0, rng=None):
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if sample < 1.0:
        rng = rng or np.random.default_rng(0)
        pts = pts[rng.random(len(pts)) < sample]
    fig, ax = _new()
    ax.scatter(pts[:, 0], pts[:, 1], s=1, c="k", alpha=0.5, linewidths=0)
    ax.set_aspect("equal")
    _save(fig, path)
