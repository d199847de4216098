"""Figures written next to the CSV/text reports."""
from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}

HIGHLIGHT = "#c0392b"
MUTED = "#7f8c8d"
BASE = "#2c3e50"


def _save(fig, path):
    # PNG without the version stamp, so reruns give identical files
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)


def pairwise_figure(report, stats, path):
    """Row means with normal-approximation 95% intervals, and the adjusted p-value matrix."""
    with plt.rc_context(STYLE):
        rows = list(stats.rows.values())
        ids = [r.row_id for r in rows]
        means = np.array([r.mean for r in rows])
        half = np.array([1.96 * math.sqrt(r.mean * (1 - r.mean) / r.n) for r in rows])
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4), gridspec_kw={"width_ratios": [3, 2]})
        colors = [HIGHLIGHT if i == report.best else (BASE if i == report.runner_up else MUTED)
                  for i in ids]
        x = np.arange(len(ids))
        step = max(1, math.ceil(len(ids) / 30))  # keep tick labels legible on big plans
        ticks = x[::step]
        labels = [str(ids[j]) for j in ticks]
        if len(ids) <= 40:
            ax1.bar(x, means, color=colors, yerr=half, capsize=2, error_kw={"lw": 0.8})
            ax1.set_xticks(ticks, labels)
            ax1.set_xlabel("plan row")
            ax1.set_title("sample means (best in red, runner-up dark)")
        else:
            # too many bars to read: sorted means with a 95% band, leaders marked
            order = np.lexsort((ids, -means))
            ax1.fill_between(x, np.clip(means[order] - half[order], 0, 1),
                             np.clip(means[order] + half[order], 0, 1), color=MUTED, alpha=0.4, lw=0)
            ax1.plot(x, means[order], color=BASE, lw=1)
            for rid, color in ((report.best, HIGHLIGHT), (report.runner_up, BASE)):
                k = int(np.flatnonzero(np.array(ids)[order] == rid)[0])
                ax1.plot(k, means[order][k], "o", color=color, ms=5)
            ax1.text(0.98, 0.95, f"best row {report.best}, runner-up row {report.runner_up}",
                     transform=ax1.transAxes, ha="right", va="top", fontsize=8)
            ax1.set_xlabel("rank by mean score")
            ax1.set_title("sorted sample means (best in red, runner-up dark)")
        ax1.set_ylabel("mean score")
        ax1.set_ylim(0, 1.05)

        pos = {rid: j for j, rid in enumerate(ids)}
        mat = np.ones((len(ids), len(ids)))
        for t in report.pairs:
            a, b = pos[t.row_i], pos[t.row_j]
            mat[a, b] = mat[b, a] = t.p_adjusted
        im = ax2.imshow(mat, vmin=0, vmax=1, cmap="viridis")
        ax2.set_xticks(ticks, labels, fontsize=6, rotation=90)
        ax2.set_yticks(ticks, labels, fontsize=6)
        ax2.set_title(f"adjusted p-values (alpha = {report.alpha:g})")
        fig.colorbar(im, ax=ax2, fraction=0.046, pad=0.04)
        _save(fig, path)


def coefficient_figure(rows, path):
    """Forest plot: each coefficient with its 95% interval, intercept excluded."""
    rows = [r for r in rows if r.name != "Intercept"]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(7, 0.28 * len(rows) + 1.2))
        y = np.arange(len(rows))[::-1]
        coef = np.array([r.coef for r in rows])
        lo = coef - np.array([r.ci_low for r in rows])
        hi = np.array([r.ci_high for r in rows]) - coef
        colors = [HIGHLIGHT if r.p_value < 0.05 else MUTED for r in rows]
        ax.errorbar(coef, y, xerr=[lo, hi], fmt="none", ecolor=colors, elinewidth=1)
        ax.scatter(coef, y, c=colors, s=14, zorder=3)
        ax.axvline(0, color=BASE, lw=0.8, ls="--")
        ax.set_yticks(y, [r.name for r in rows])
        ax.set_xlabel("log-odds coefficient (95% CI); red: p < 0.05")
        _save(fig, path)


def wald_figure(rows, path, alpha=0.05):
    rows = [r for r in rows if r.name != "Intercept"]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(7, 0.28 * len(rows) + 1.2))
        y = np.arange(len(rows))[::-1]
        score = [-math.log10(max(r.p_value, 1e-300)) for r in rows]
        ax.barh(y, score, color=[HIGHLIGHT if r.p_value < alpha else MUTED for r in rows])
        ax.axvline(-math.log10(alpha), color=BASE, lw=0.8, ls="--")
        ax.set_yticks(y, [r.name for r in rows])
        ax.set_xlabel("-log10 Wald p-value (dashed: alpha)")
        _save(fig, path)


def simulation_figure(sim, stats, path):
    """Empirical row means against the latent theta used to generate them."""
    with plt.rc_context(STYLE):
        ids = list(stats.rows)
        theta = np.array([sim.theta[i] for i in ids])
        mean = np.array([stats[i].mean for i in ids])
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
        ax1.scatter(theta, mean, s=8, color=BASE, alpha=0.7)
        ax1.plot([0, 1], [0, 1], color=HIGHLIGHT, lw=0.8)
        ax1.set_xlabel("latent theta")
        ax1.set_ylabel("empirical mean")
        ax2.hist(theta, bins=20, range=(0, 1), color=MUTED)
        ax2.axvline(theta.mean(), color=HIGHLIGHT, lw=1)
        ax2.set_xlabel("latent theta")
        ax2.set_ylabel("plan rows")
        _save(fig, path)
