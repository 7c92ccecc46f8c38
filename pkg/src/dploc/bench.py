"""Experiment sweeps. Each returns a list of flat dict rows ready for CSV."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .baselines import (
    equiwidth_publish,
    equiwidth_range_count,
    histogram_counts,
    smooth_sensitivity_median,
    wavelet_publish,
    wavelet_range_count,
)
from .datasets import clustered_2d, median_dataset
from .error_model import (
    EQUALLY_SPACED,
    REPEATING,
    DatasetFamily,
    ErrorTable,
    choose_group_size,
    default_table,
    downsample,
    estimate_err1,
    gen_error,
    predict_err,
    release_error,
)
from .estimators import density_from_values, density_grid, median_from_release, range_count
from .hilbert import UNIT_SQUARE, HilbertConfig, Rect, map_dataset
from .isotonic import reconstruct
from .mechanism import publish, publish_values, sort_sequence

__all__ = [
    "REFERENCE_GROUP_SIZES",
    "EXPERIMENTS",
    "err_vs_n",
    "eps_ratio",
    "gen_error_curve",
    "group_size_curve",
    "bias_experiment",
    "range_query_experiment",
    "median_vs_ls",
    "median_vs_eps",
    "density_comparison",
    "group_size_agreement",
    "random_squares",
    "write_rows",
]

# published best group sizes for (n, epsilon), used as a reference
REFERENCE_GROUP_SIZES = {
    (2000, 0.5): 44, (2000, 1.0): 29, (2000, 2.0): 20, (2000, 3.0): 12,
    (5000, 0.5): 59, (5000, 1.0): 37, (5000, 2.0): 27, (5000, 3.0): 18,
    (10000, 0.5): 79, (10000, 1.0): 51, (10000, 2.0): 36, (10000, 3.0): 27,
    (20000, 0.5): 121, (20000, 1.0): 83, (20000, 2.0): 61, (20000, 3.0): 41,
    (100000, 0.5): 234, (100000, 1.0): 150, (100000, 2.0): 98, (100000, 3.0): 73,
}


def _rng(seed, *salt):
    return np.random.default_rng(np.random.SeedSequence([int(seed), *[int(s) for s in salt]]))


def write_rows(rows: Sequence[dict], path=None, meta: Optional[dict] = None) -> str:
    """Render rows as CSV (with an optional ``#`` provenance line); write it if ``path`` is given."""
    buf = io.StringIO()
    if meta:
        buf.write("# " + " ".join(f"{k}={meta[k]}" for k in sorted(meta)) + "\n")
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


# ---------------------------------------------------------------------------
# error model sweeps


def err_vs_n(families: Iterable[DatasetFamily], ns: Sequence[int], epsilon=1.0, trials=500, seed=0):
    rows = []
    for fi, fam in enumerate(families):
        for ni, n in enumerate(ns):
            err = estimate_err1(fam, n, epsilon, trials, _rng(seed, fi, ni))
            rows.append({"family": fam.name, "n": int(n), "epsilon": float(epsilon), "err1": err})
    return rows


def eps_ratio(ns: Sequence[int], eps_values: Sequence[float], trials=500, seed=0, family: DatasetFamily = REPEATING):
    """Ungrouped error at several epsilons and its ratio to the epsilon = 1 error."""
    rows = []
    for ni, n in enumerate(ns):
        base = estimate_err1(family, n, 1.0, trials, _rng(seed, ni, 0))
        for ei, eps in enumerate(eps_values):
            err = base if eps == 1.0 else estimate_err1(family, n, eps, trials, _rng(seed, ni, ei + 1))
            rows.append({
                "family": family.name, "n": int(n), "epsilon": float(eps),
                "err1": err, "ratio": err / base, "inverse_eps": 1.0 / eps,
            })
    return rows


def gen_error_curve(datasets: dict, ks: Sequence[int]):
    """Generalization error against the k/(4n) estimate and the k/(2n) bound."""
    rows = []
    for name, seq in datasets.items():
        seq = sort_sequence(seq)
        n = seq.size
        for k in ks:
            g = gen_error(seq, k)
            rows.append({
                "dataset": name, "n": n, "k": int(k), "gen": g,
                "approx": k / (4.0 * n), "bound": k / (2.0 * n), "ratio": g / (k / (4.0 * n)),
            })
    return rows


def group_size_curve(seq, epsilon: float, ks: Sequence[int], trials=200, seed=0, table: Optional[ErrorTable] = None):
    """Measured grouped error next to its generalization-plus-Laplace bound.

    For each k the same noise draws feed both the grouped release of the
    dataset and the ungrouped release (at ``k * epsilon``) of its
    downsampled copy, so the pointwise inequality carries over to the means.
    """
    table = table if table is not None else default_table()
    seq = sort_sequence(seq)
    n = seq.size
    rows = []
    for ki, k in enumerate(ks):
        k = int(k)
        down = downsample(seq, k)
        gen = gen_error(seq, k)
        measured, err1 = [], []
        for t in range(trials):
            state = _rng(seed, ki, t)
            measured.append(release_error(seq, k, epsilon, state))
            # same stream, so the Laplace draws coincide after rescaling
            err1.append(_ungrouped_error_of_downsample(down, k, n, epsilon, _rng(seed, ki, t)))
        measured = np.asarray(measured)
        err1 = np.asarray(err1)
        rows.append({
            "k": k, "gen": gen, "err1_down": float(err1.mean()), "bound": gen + float(err1.mean()),
            "measured": float(measured.mean()), "measured_se": float(measured.std(ddof=1) / math.sqrt(trials)),
            "predicted": float(predict_err(n, epsilon, k, table)),
        })
    return rows


def _ungrouped_error_of_downsample(down, k, n, epsilon, rng):
    """Normalized EMD of an ungrouped release of the block means at noise ``1/(size*epsilon)``.

    Block sizes follow the grouped release (a short tail gets the noise its
    size implies) and the fit is weighted the same way, so this is exactly
    the second term of the triangle inequality, not an approximation.
    """
    from .isotonic import isotonic_l2
    from .mechanism import GroupPartition, laplace_noise

    part = GroupPartition.equal_depth(n, k)
    sizes = part.sizes
    noise = laplace_noise(1.0 / epsilon, part.m, rng) / sizes
    fit = isotonic_l2(down + noise, weights=sizes).values
    return float(np.sum(sizes * np.abs(down - fit)) / n)


def bias_experiment(n=1000, epsilon=1.0, trials=20000, seed=0, ranks=(100, 900), k=1):
    """Displacement of chosen (1-based) ranks of an equally-spaced dataset after reconstruction.

    The fit is left unclamped, as in the analytical mechanism.
    """
    seq = EQUALLY_SPACED.generate(n)
    idx = [r - 1 for r in ranks]
    gen = _rng(seed)
    disp = np.empty((trials, len(idx)))
    for t in range(trials):
        _, rebuilt = release_error(seq, k, epsilon, gen, return_fit=True)
        disp[t] = rebuilt[idx] - seq[idx]
    return disp


# ---------------------------------------------------------------------------
# comparisons with the baselines


def random_squares(widths: Sequence[float], count: int, rng, domain: Rect = UNIT_SQUARE):
    """``count`` squares per width (in units of the domain side), placed uniformly inside the domain."""
    out = []
    for w in widths:
        for _ in range(count):
            x0 = rng.random() * (1.0 - w)
            y0 = rng.random() * (1.0 - w)
            out.append((w, Rect(
                domain.xmin + x0 * domain.width, domain.ymin + y0 * domain.height,
                domain.xmin + (x0 + w) * domain.width, domain.ymin + (y0 + w) * domain.height,
            )))
    return out


def _true_count(points, q: Rect) -> int:
    return int(np.count_nonzero(q.contains(points[:, 0], points[:, 1])))


def range_query_experiment(
    points,
    epsilon: float = 1.0,
    widths: Sequence[float] = (1 / 128, 1 / 64, 1 / 32, 1 / 16, 1 / 8, 1 / 4, 1 / 2),
    count: int = 1000,
    seed: int = 0,
    *,
    k="auto",
    order: int = 10,
    wavelet_q: int = 9,
    hist_bins: int = 41,
    noise: bool = True,
    domain: Rect = UNIT_SQUARE,
):
    """Absolute range-count error of the three mechanisms on shared random squares.

    Returns ``(rows, detail)`` where rows hold the mean error per mechanism
    and width and ``detail`` holds the per-query errors.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    cfg = HilbertConfig(order, domain)
    release = publish(pts, epsilon, k, cfg, _rng(seed, 1), noise=noise)
    values = reconstruct(release).values
    density = density_from_values(values)
    hist = equiwidth_publish(pts, hist_bins, epsilon, _rng(seed, 2), domain=domain, noise=noise)
    wav = wavelet_publish(pts, wavelet_q, epsilon, _rng(seed, 3), domain=domain, noise=noise)
    queries = random_squares(widths, count, _rng(seed, 4), domain)

    detail = {"ours": [], "wavelet": [], "equiwidth": [], "width": []}
    for w, q in queries:
        truth = _true_count(pts, q)
        detail["width"].append(w)
        detail["ours"].append(abs(range_count(values, q, cfg, n, density=density) - truth))
        detail["wavelet"].append(abs(wavelet_range_count(wav, q) - truth))
        detail["equiwidth"].append(abs(equiwidth_range_count(hist, q) - truth))
    detail = {key: np.asarray(v) for key, v in detail.items()}
    rows = []
    for mech in ("ours", "wavelet", "equiwidth"):
        for w in widths:
            sel = detail["width"] == w
            rows.append({"mechanism": mech, "width": float(w), "mean_abs_error": float(detail[mech][sel].mean()),
                         "group_size": release.group_size})
    return rows, detail


def _median_errors(values, epsilon, trials, gen, table):
    x = np.sort(values)
    true_med = float(x[(x.size + 1) // 2 - 1])
    k = choose_group_size(x.size, epsilon, table)
    ours, ss = [], []
    for _ in range(trials):
        rel = publish_values(x, epsilon, k, gen, presorted=True)
        ours.append(abs(median_from_release(rel)[0] - true_med))
        ss.append(abs(smooth_sensitivity_median(x, epsilon, gen).noisy_median - true_med))
    return float(np.mean(ours)), float(np.mean(ss)), k


def median_vs_ls(ls_values: Sequence[float], epsilon=1.0, trials=500, seed=0, datasets_per_ls=5, table=None):
    """Median error of both mechanisms on constructed datasets of given local sensitivity."""
    table = table if table is not None else default_table()
    rows = []
    for li, ls in enumerate(ls_values):
        ours, ss = [], []
        for d in range(datasets_per_ls):
            gen = _rng(seed, li, d)
            x = median_dataset(ls, gen)
            o, s, k = _median_errors(x, epsilon, trials, gen, table)
            ours.append(o)
            ss.append(s)
        rows.append({"local_sensitivity": float(ls), "epsilon": float(epsilon), "group_size": k,
                     "ours": float(np.mean(ours)), "smooth_sensitivity": float(np.mean(ss))})
    return rows


def median_vs_eps(eps_values: Sequence[float], local_sensitivity=0.3, trials=500, seed=0, datasets=5, table=None):
    table = table if table is not None else default_table()
    rows = []
    for ei, eps in enumerate(eps_values):
        ours, ss = [], []
        for d in range(datasets):
            gen = _rng(seed, ei, d)
            x = median_dataset(local_sensitivity, gen)
            o, s, k = _median_errors(x, eps, trials, gen, table)
            ours.append(o)
            ss.append(s)
        rows.append({"epsilon": float(eps), "local_sensitivity": float(local_sensitivity), "group_size": k,
                     "ours": float(np.mean(ours)), "smooth_sensitivity": float(np.mean(ss))})
    return rows


def density_comparison(points, epsilon=3.0, order=10, hist_bins=41, seed=0, *, domain: Rect = UNIT_SQUARE):
    """L1 and L2 distances from the original density, on the ``2**order`` grid.

    Both the original and the reconstructed densities are Voronoi estimates
    over curve values; the histogram density is spread uniformly within
    each bin. Returns the rows and the three density grids.
    """
    pts = np.asarray(points, dtype=float)
    cfg = HilbertConfig(order, domain)
    side = cfg.side
    truth = density_grid(density_from_values(map_dataset(pts, cfg)), order)
    release = publish(pts, epsilon, "auto", cfg, _rng(seed, 1))
    ours = density_grid(density_from_values(reconstruct(release).values), order)
    hist = equiwidth_publish(pts, hist_bins, epsilon, _rng(seed, 2), domain=domain)
    counts = np.clip(hist.counts, 0.0, None)
    hist_density = counts / counts.sum() * hist_bins * hist_bins
    # spread each bin over the fine grid cells whose centers fall in it
    centers = (np.arange(side) + 0.5) / side
    bin_of = np.minimum((centers * hist_bins).astype(int), hist_bins - 1)
    equiwidth = hist_density[np.ix_(bin_of, bin_of)]
    rows = []
    cell = 1.0 / (side * side)
    for name, grid in (("equiwidth", equiwidth), ("ours", ours)):
        diff = grid - truth
        rows.append({"mechanism": name, "l1": float(np.abs(diff).sum() * cell),
                     "l2": float(math.sqrt((diff ** 2).sum() * cell)), "group_size": release.group_size})
    return rows, {"original": truth, "ours": ours, "equiwidth": equiwidth}


def group_size_agreement(table: Optional[ErrorTable] = None, tolerance=0.4):
    table = table if table is not None else default_table()
    rows = []
    for (n, eps), k_reference in REFERENCE_GROUP_SIZES.items():
        k = choose_group_size(n, eps, table)
        rows.append({"n": n, "epsilon": eps, "k_reference": k_reference, "k_chosen": k,
                     "within_tolerance": abs(k - k_reference) <= tolerance * k_reference})
    return rows


EXPERIMENTS = (
    "err-vs-n", "eps-ratio", "gen-error", "group-size", "bias",
    "range", "median-ls", "median-eps", "density", "group-sizes",
)
