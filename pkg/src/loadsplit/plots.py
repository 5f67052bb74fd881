"""SVG figures: scree, sources, loss scatter and a weekly disaggregation."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no date stamp so files are byte-reproducible
_RC = {"svg.hashsalt": "loadsplit", "svg.fonttype": "none"}
_META = {"Date": None, "Creator": None}


def _save(fig, path) -> None:
    with matplotlib.rc_context(_RC):
        fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def scree_plot(result, path) -> None:
    ratio = np.asarray(result.explained_variance_ratio)
    k = np.arange(1, len(ratio) + 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(k, ratio, color="0.7", label="component")
    ax.plot(k, result.cumulative, "o-", color="C0", label="cumulative")
    ax.axvline(result.suggested_d, color="C3", ls="--", lw=1, label=f"d = {result.suggested_d}")
    ax.set_xlabel("principal component")
    ax.set_ylabel("explained variance ratio")
    ax.set_ylim(0, 1.02)
    ax.legend(loc="center right")
    _save(fig, path)


def sources_plot(S_list, medoid: int, path, names=None) -> None:
    """Every solution's sources as thin lines, the medoid's in bold."""
    S_list = [np.asarray(S) for S in S_list]
    K, p = S_list[0].shape
    names = names or [f"source {k}" for k in range(K)]
    h = np.arange(p)
    fig, axes = plt.subplots(1, K, figsize=(3 * K, 3), sharey=True, squeeze=False)
    for k, ax in enumerate(axes[0]):
        for S in S_list:
            ax.plot(h, S[k], color="0.75", lw=0.5)
        ax.plot(h, S_list[medoid][k], color=f"C{k}", lw=2)
        ax.set_title(names[k])
        ax.set_xlabel("hour")
    axes[0, 0].set_ylabel("share of daily energy")
    fig.tight_layout()
    _save(fig, path)


def loss_scatter(losses, retained, path) -> None:
    losses = np.asarray(losses, dtype=np.float64)
    keep = np.zeros(len(losses), dtype=bool)
    keep[np.asarray(retained, dtype=int)] = True
    idx = np.arange(len(losses))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.scatter(idx[~keep], losses[~keep], s=8, color="0.6", label="discarded")
    ax.scatter(idx[keep], losses[keep], s=8, color="C0", label="retained")
    if np.all(losses[np.isfinite(losses)] > 0):
        ax.set_yscale("log")
    ax.set_xlabel("run")
    ax.set_ylabel("loss at convergence")
    ax.legend()
    _save(fig, path)


def weekly_plot(series, path, start: int = 0, hours: int = 168) -> None:
    """Stacked sector loads with quantile bands over one week."""
    fig, ax = plt.subplots(figsize=(10, 4))
    sl = slice(start, start + hours)
    t = np.arange(len(series[0].hourly_mean[sl]))
    base = np.zeros(len(t))
    for j, s in enumerate(series):
        mean = s.hourly_mean[sl]
        ax.fill_between(t, base, base + mean, color=f"C{j}", alpha=0.35, lw=0, label=s.sector)
        ax.fill_between(t, base + s.q025[sl], base + s.q975[sl], color=f"C{j}", alpha=0.6, lw=0)
        base = base + mean
    ax.plot(t, base, color="k", lw=0.8, label="model total")
    ax.set_xlabel(f"hour from {series[0].timestamps[start].isoformat(timespec='hours')}")
    ax.set_ylabel("MW")
    ax.legend(loc="upper right", fontsize="small")
    _save(fig, path)
