"""Figure rendering for study results.

Each study writes one or two PNG figures next to its delimited output, built
from the same records/sweep rows, so the figures never show anything the CSVs
do not contain.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

PROCEDURE_ORDER = ("lopo", "pooled_kfold", "train_first", "train_last", "no_rollout")
PROCEDURE_LABELS = {
    "lopo": "Leave-one-period-out",
    "pooled_kfold": "Pooled K-fold",
    "train_first": "Train first",
    "train_last": "Train last",
    "no_rollout": "No roll-out",
}


def render_study(result, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    kind = result.summary["study"]
    renderers = {
        "selection": _render_selection,
        "identification": _render_identification,
        "variance": _render_variance,
        "sparsity": _render_sparsity,
    }
    return renderers[kind](result, out)


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _render_selection(result, out: Path) -> list[Path]:
    procs = [p for p in PROCEDURE_ORDER if p in result.summary["procedures"]]
    stats = result.summary["procedures"]

    fig, ax = plt.subplots(figsize=(7, 4))
    xs = np.arange(len(procs))
    vals = [stats[p]["incorrect_pct"] for p in procs]
    los = [stats[p]["incorrect_pct"] - stats[p]["incorrect_ci"][0] for p in procs]
    his = [stats[p]["incorrect_ci"][1] - stats[p]["incorrect_pct"] for p in procs]
    ax.bar(xs, vals, yerr=[los, his], capsize=4, color="steelblue")
    ax.set_xticks(xs)
    ax.set_xticklabels([PROCEDURE_LABELS[p] for p in procs], rotation=20, ha="right")
    ax.set_ylabel("Incorrectly selected (%)")
    ax.set_title("Model selection error by procedure")
    p1 = _save(fig, out / "selection_incorrect_pct.png")

    fig, ax = plt.subplots(figsize=(7, 4))
    data = [[r["rel_err_pct"] for r in result.records if r["procedure"] == p]
            for p in procs]
    ax.boxplot(data, tick_labels=[PROCEDURE_LABELS[p] for p in procs],
               showfliers=False)
    ax.set_ylabel("Relative estimation error (%)")
    ax.set_title("Estimation error of the selected model")
    ax.tick_params(axis="x", rotation=20)
    p2 = _save(fig, out / "selection_relative_error.png")
    return [p1, p2]


def _render_identification(result, out: Path) -> list[Path]:
    rows = result.sweep_rows
    fig, ax = plt.subplots(figsize=(6.5, 4))
    for graph_p in sorted({r["graph_p"] for r in rows}):
        sub = [r for r in rows if r["graph_p"] == graph_p]
        ts = [r["T"] for r in sub]
        probs = [r["prob_identified"] for r in sub]
        ax.plot(ts, probs, marker="o", label=f"edge prob {graph_p}")
        ax.fill_between(ts, [r["ci_low"] for r in sub], [r["ci_high"] for r in sub],
                        alpha=0.2)
    ax.set_xlabel("Roll-out periods")
    ax.set_ylabel("P(effect identified)")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    ax.set_title("Identification probability along the roll-out")
    return [_save(fig, out / "identification_probability.png")]


def _render_variance(result, out: Path) -> list[Path]:
    cells = result.summary["cells"]
    labels = [f"{c['design']}\nT={c['T']}" for c in cells if c["regime"] == "time_invariant"]
    fig, axes = plt.subplots(1, 2, figsize=(9, 4), sharey=False)
    for ax, regime in zip(axes, ("time_invariant", "time_varying")):
        sub = [c for c in cells if c["regime"] == regime]
        xs = np.arange(len(sub))
        vals = [c["variance"] for c in sub]
        los = [c["variance"] - c["var_ci_low"] for c in sub]
        his = [c["var_ci_high"] - c["variance"] for c in sub]
        ax.bar(xs, vals, yerr=[los, his], capsize=4, color="indianred")
        ax.set_xticks(xs)
        ax.set_xticklabels(labels)
        ax.set_title(regime.replace("_", " "))
        ax.set_ylabel("Var(estimate)")
    fig.suptitle("Estimator variance by design and noise regime")
    return [_save(fig, out / "variance_by_design.png")]


def _render_sparsity(result, out: Path) -> list[Path]:
    rows = result.sweep_rows
    fig, ax = plt.subplots(figsize=(6.5, 4))
    for proc in PROCEDURE_ORDER:
        sub = [r for r in rows if r["procedure"] == proc]
        if not sub:
            continue
        ps = [r["edge_probability"] for r in sub]
        ax.plot(ps, [r["incorrect_pct"] for r in sub], marker="o",
                label=PROCEDURE_LABELS[proc])
        ax.fill_between(ps, [r["ci_low"] for r in sub], [r["ci_high"] for r in sub],
                        alpha=0.15)
    ax.set_xlabel("Edge probability")
    ax.set_ylabel("Incorrectly selected (%)")
    ax.legend(fontsize=8)
    ax.set_title("Selection error across network densities")
    return [_save(fig, out / "sparsity_selection_error.png")]
