"""Figures for experiment reports, rendered off-screen to PNG files."""

from __future__ import annotations

import os
from typing import List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .sims import ExperimentReport  # noqa: E402

# fixed metadata keeps PNG bytes stable across runs
_PNG_META = {"Software": None}


def _save(fig, path: str) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)
    return path


def _concentration(rep: ExperimentReport, stem: str) -> List[str]:
    sups = [r["sup"] for r in rep.replicates]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.hist(sups, bins=20, color="0.6", edgecolor="k")
    ax.axvline(rep.aggregate["nonadaptive_bound"], color="C0", ls="--", label="non-adaptive bound")
    if rep.aggregate["adaptive_bound_full"] <= 3 * max(sups, default=1.0):
        ax.axvline(rep.aggregate["adaptive_bound_full"], color="C3", label="adaptive bound")
    else:
        ax.set_title(f"adaptive bound {rep.aggregate['adaptive_bound_full']:.3g} (off scale)", fontsize=9)
    ax.set_xlabel("sup |T - T*| per replicate")
    ax.set_ylabel("replicates")
    ax.legend(fontsize=8)
    return [_save(fig, stem + "_sup.png")]


def _lowerbound(rep: ExperimentReport, stem: str) -> List[str]:
    rows = rep.replicates
    idx = [r["replicate"] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(idx, [r["max_T"] for r in rows], "o", label="max T")
    ax.plot(idx, [r["max_Ttilde"] for r in rows], "s", label="max T~")
    ax.plot(idx, [r["max_gap"] for r in rows], "^", label="max |T~ - T|")
    ax.axhline(rows[0]["gaussian_comparator"], color="C1", ls="--", lw=1)
    ax.axhline(rows[0]["coupling_comparator"], color="C2", ls=":", lw=1)
    ax.set_xlabel("replicate")
    ax.set_ylabel("statistic")
    ax.legend(fontsize=8)
    return [_save(fig, stem + "_max.png")]


def _mgf(rep: ExperimentReport, stem: str) -> List[str]:
    rows = rep.replicates
    t = [r["t"] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(t, [r["estimate"] for r in rows], yerr=[3 * r["stderr"] for r in rows],
                fmt="o", capsize=3, label="Monte Carlo")
    ax.plot(t, [r["bound"] for r in rows], "-", label="bound")
    ax.plot(t, [r["closed_form"] for r in rows], "x", label="exact")
    ax.set_xlabel("t")
    ax.set_ylabel("E exp(t(Y - Y|Z|))")
    ax.legend(fontsize=8)
    return [_save(fig, stem + "_mgf.png")]


def _audit(rep: ExperimentReport, stem: str) -> List[str]:
    rows = rep.replicates
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar([r["replicate"] for r in rows], [r["bad_trees"] / r["trees"] for r in rows], color="0.6")
    ax.set_xlabel("replicate")
    ax.set_ylabel("fraction of trees splitting on noise")
    ax.set_ylim(0, 1)
    return [_save(fig, stem + "_noise.png")]


def _consistency(rep: ExperimentReport, stem: str) -> List[str]:
    grid = rep.spec["n_grid"]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for r in rep.replicates:
        ax.plot(grid, r["errors"], color="0.7", lw=0.8)
    ax.plot(grid, rep.aggregate["mean_error"], "o-", color="k", label="mean")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("sup error" if rep.spec["kind"] == "uniform" else "mean squared error")
    ax.legend(fontsize=8)
    return [_save(fig, stem + "_error.png")]


_DRAW = {"concentration": _concentration, "lowerbound": _lowerbound, "mgf": _mgf,
         "audit": _audit, "consistency": _consistency}


def plot_report(rep: ExperimentReport, out_path: str) -> List[str]:
    """Draw the figures for ``rep`` next to ``out_path``; returns the written paths."""
    if not rep.replicates or rep.name not in _DRAW:
        return []
    stem = os.path.splitext(out_path)[0]
    return _DRAW[rep.name](rep, stem)
