"""Figure rendering for the report path (optional, next to the CSVs)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, out_dir: Path, name: str, manifest=None) -> Path:
    path = Path(out_dir) / name
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    if manifest is not None:
        manifest.record_artifact(path)
    return path


def plot_automaton_states(rows: Sequence[dict], out_dir, manifest=None) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ids = [r["state"] for r in rows]
    cards = [r["cardinality"] for r in rows]
    ax.bar(ids, cards, color="#356fa8")
    if rows and rows[0].get("nprime") not in ("", None):
        ax.plot(ids, [r["nprime"] for r in rows], "o", color="#c44e52",
                label="interior variant", markersize=4)
        ax.legend(frameon=False)
    ax.set_xlabel("state")
    ax.set_ylabel("#maps")
    ax.set_title("neighbourhood-system automaton")
    return _save(fig, out_dir, "wsc_states.png", manifest)


def plot_convergence(rows: Sequence[dict], out_dir, manifest=None) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.6))
    for kind, color in (("pairwise", "#356fa8"), ("self", "#c44e52")):
        pts = [(r["T"], r["distance"]) for r in rows if r["kind"] == kind]
        if not pts:
            continue
        ts, ds = zip(*pts)
        ax.plot(ts, ds, ".", alpha=0.45, color=color)
        uniq = sorted(set(ts))
        med = [np.median([d for t, d in pts if t == u]) for u in uniq]
        ax.plot(uniq, med, "-o", color=color, label=f"{kind} (median)")
    ax.set_yscale("log")
    ax.set_xlabel("horizon T")
    ax.set_ylabel("distribution distance")
    ax.set_title("tangent-distribution convergence")
    ax.legend(frameon=False)
    return _save(fig, out_dir, "convergence.png", manifest)


def plot_trend(rows: Sequence[dict], out_dir, name: str = "trend.png",
               manifest=None) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.4))
    ts = [r["t"] for r in rows]
    ax.plot(ts, [r["median_tv"] for r in rows], "-o", color="#356fa8",
            label="median")
    if "q25" in rows[0]:
        ax.fill_between(ts, [r["q25"] for r in rows], [r["q75"] for r in rows],
                        alpha=0.25, color="#356fa8", label="quartiles")
    ax.set_xlabel("zoom depth t")
    ax.set_ylabel("grid total-variation")
    ax.set_title("zoomed density agreement")
    ax.legend(frameon=False)
    return _save(fig, out_dir, name, manifest)


def plot_normality(weyl_rows: Sequence[dict], out_dir, manifest=None) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.6))
    freqs = sorted({r["m"] for r in weyl_rows})
    for m in freqs:
        pts = sorted((r["K"], r["mean_abs_weyl"]) for r in weyl_rows if r["m"] == m)
        ks, ws = zip(*pts)
        ax.loglog(ks, ws, "-o", label=f"m={m}")
    ks = sorted({r["K"] for r in weyl_rows})
    ax.loglog(ks, [k ** -0.5 for k in ks], "--", color="gray", label=r"$K^{-1/2}$")
    ax.set_xlabel("horizon K")
    ax.set_ylabel("mean |Weyl sum|")
    ax.set_title("exponential-sum decay")
    ax.legend(frameon=False, ncol=2)
    return _save(fig, out_dir, "normality.png", manifest)


def plot_return_times(rows: Sequence[dict], out_dir, manifest=None) -> Path:
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.2))
    taus = [r["tau"] for r in rows if r["tau"] != ""]
    axes[0].hist(taus, bins=30, color="#356fa8")
    axes[0].set_xlabel("gap between visits")
    axes[0].set_ylabel("count")
    ns = [r["n"] for r in rows]
    ratios = [r["r_n"] / max(r["n"], 1) for r in rows if r["n"] > 0]
    axes[1].plot(ns[1:len(ratios) + 1], ratios, color="#c44e52")
    axes[1].set_xlabel("visit index n")
    axes[1].set_ylabel("r_n / n")
    fig.suptitle("window return statistics")
    return _save(fig, out_dir, "return_times.png", manifest)


def plot_measure(points: np.ndarray, weights: np.ndarray, out_dir,
                 name: str = "measure.png", title: str = "measure",
                 manifest=None) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.0))
    ax.hist(points[:, 0], bins=256, weights=weights, color="#356fa8")
    ax.set_xlabel("x")
    ax.set_ylabel("mass")
    ax.set_title(title)
    return _save(fig, out_dir, name, manifest)
