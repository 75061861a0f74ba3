"""Figure rendering for the CLI report paths.

Every figure lands next to its delimited output.  PNG metadata is stripped
so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import datetime as dt
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.dates as mdates
import matplotlib.pyplot as plt
import numpy as np

from .filter import FilterSnapshot
from .simulate import RatioRow, SimDataset

_SAVEFIG = dict(dpi=120, metadata={"Software": None})


def _band_plot(ax, xs, mean, lo, hi, label):
    ax.fill_between(xs, lo, hi, alpha=0.25, linewidth=0, label="5%-95% band")
    ax.plot(xs, mean, lw=1.2, label=label)


def save_fit_figures(stem: Path, dates: list[dt.date],
                     snapshots: list[FilterSnapshot],
                     true_sigma=None) -> list[Path]:
    """Volatility path figure plus a 2x2 panel of the structural parameters."""
    xs = dates
    out = []

    fig, ax = plt.subplots(figsize=(9, 4.5))
    _band_plot(ax, xs, [s.sigma_mean for s in snapshots],
               [s.sigma_q05 for s in snapshots], [s.sigma_q95 for s in snapshots],
               "filtered mean")
    if true_sigma is not None:
        ax.plot(xs, true_sigma, lw=0.9, ls="--", color="k", label="truth")
    ax.set_ylabel("volatility per period")
    ax.legend(loc="upper right", frameon=False)
    ax.xaxis.set_major_locator(mdates.AutoDateLocator())
    fig.autofmt_xdate()
    path = stem.with_name(stem.name + "_sigma.png")
    fig.savefig(path, **_SAVEFIG)
    plt.close(fig)
    out.append(path)

    fig, axes = plt.subplots(2, 2, figsize=(10, 6), sharex=True)
    panels = [("mu", "drift"), ("alpha", "long-run log-vol"),
              ("phi", "AR coefficient"), ("tau2", "log-vol innovation var")]
    for ax, (name, title) in zip(axes.ravel(), panels):
        _band_plot(ax, xs, [getattr(s, f"{name}_mean") for s in snapshots],
                   [getattr(s, f"{name}_q05") for s in snapshots],
                   [getattr(s, f"{name}_q95") for s in snapshots], "filtered mean")
        ax.set_title(title, fontsize=10)
    fig.autofmt_xdate()
    path = stem.with_name(stem.name + "_params.png")
    fig.savefig(path, **_SAVEFIG)
    plt.close(fig)
    out.append(path)
    return out


def save_simulation_figure(stem: Path, dates: list[dt.date],
                           dataset: SimDataset) -> list[Path]:
    """Log-price path (close) and the latent volatility that generated it."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
    ax1.plot(dates, [b.close for b in dataset.bars], lw=1.0)
    ax1.set_ylabel("log price (close)")
    ax2.plot(dates, dataset.true_sigma, lw=1.0, color="tab:red")
    ax2.set_ylabel("true volatility")
    fig.autofmt_xdate()
    path = stem.with_name(stem.name + "_path.png")
    fig.savefig(path, **_SAVEFIG)
    plt.close(fig)
    return [path]


def save_study_figure(stem: Path, rows: list[RatioRow]) -> list[Path]:
    """Median ratios with 5%-95% whiskers for both deviation measures."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    xs = np.arange(len(rows))
    for off, (metric, color) in enumerate([("rmsd", "tab:blue"), ("mad", "tab:orange")]):
        med = [getattr(r, f"{metric}_median") for r in rows]
        lo = [getattr(r, f"{metric}_q05") for r in rows]
        hi = [getattr(r, f"{metric}_q95") for r in rows]
        pos = xs + (off - 0.5) * 0.25
        ax.errorbar(pos, med,
                    yerr=[np.subtract(med, lo), np.subtract(hi, med)],
                    fmt="o", capsize=4, color=color, label=metric.upper())
    ax.axhline(1.0, color="gray", lw=0.8, ls=":")
    ax.set_xticks(xs, [r.pair for r in rows])
    ax.set_ylabel("ratio of deviation measures")
    ax.legend(frameon=False)
    path = stem.with_name(stem.name + "_ratios.png")
    fig.savefig(path, **_SAVEFIG)
    plt.close(fig)
    return [path]
