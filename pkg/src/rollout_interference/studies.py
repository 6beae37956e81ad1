"""Simulation studies: replicated experiments, aggregation, and file outputs.

Four study kinds share one harness:

* ``selection``: how often each model-selection procedure picks the true
  interference model, plus the relative error of the resulting estimates.
* ``identification``: probability that the effect contrast is identified, as
  a function of roll-out length and graph density.
* ``variance``: Monte Carlo variance of the estimator across noise regimes
  and designs, with the matching spectral bounds.
* ``sparsity``: the selection study repeated over a grid of graph densities.

Replications are independent given derived seeds, so results are identical
whether run serially or with a process pool.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np
from scipy import stats as scipy_stats

from .config import ExperimentConfig, config_from_dict
from .estimate import build_design, contrast_vector, fit_tte
from .graphs import (InterferenceGraph, generate_complete, generate_edge_subgraph,
                     generate_erdos_renyi, read_edge_list)
from .identify import identification_records, neighbor_sum_spec
from .outcomes import (ExposureMap, ExposureTerm, ModelSpec, NoiseSpec, TrueParams,
                       simulate_panel, true_tte)
from .rollout import (RolloutSchedule, sample_constant_fraction, sample_crd)
from .selection import (CandidateSet, lopo, no_rollout, pooled_kfold,
                        relative_error_pct, train_first, train_last)

PROCEDURES = ("lopo", "pooled_kfold", "train_first", "train_last", "no_rollout")

SELECTION_FIELDS = ["rep", "procedure", "chosen", "correct", "tte_hat", "rel_err_pct"]
IDENTIFICATION_FIELDS = ["rep", "graph_p", "T", "identified"]
VARIANCE_FIELDS = ["rep", "regime", "design", "T", "tte_hat", "identified", "lam_min"]
SPARSITY_FIELDS = ["edge_probability"] + SELECTION_FIELDS


@dataclass
class StudyResult:
    config: dict
    config_hash: str
    base_seed: int
    records: list[dict]
    record_fields: list[str]
    summary: dict
    sweep_rows: list[dict] = field(default_factory=list)
    sweep_fields: list[str] = field(default_factory=list)


def run_study(cfg: ExperimentConfig) -> StudyResult:
    cfg.validate()
    runners = {
        "selection": run_selection_study,
        "identification": run_identification_sweep,
        "variance": run_variance_study,
        "sparsity": run_sparsity_sweep,
    }
    return runners[cfg.study](cfg)


# ---------------------------------------------------------------------------
# model construction


def _schedule(cfg: ExperimentConfig) -> RolloutSchedule:
    if cfg.schedule.kind == "even":
        return RolloutSchedule.even(cfg.periods, cfg.schedule.total)
    return RolloutSchedule(increments=tuple(cfg.schedule.increments))


def _rep_seeds(base_seed: int, rep: int, count: int) -> list[int]:
    """Derived 64-bit seeds for one replication, from base_seed + rep."""
    ss = np.random.SeedSequence(base_seed + rep)
    return [int(s) for s in ss.generate_state(count, dtype=np.uint64)]


def _sample_true_graph(cfg: ExperimentConfig, seed: int) -> InterferenceGraph:
    g = cfg.graph
    if g.kind == "complete":
        return generate_complete(cfg.n)
    if g.kind == "edge_list":
        return read_edge_list(g.edge_list_path)
    return generate_erdos_renyi(cfg.n, g.edge_probability, seed=seed)


def _sample_wrong_graph(cfg: ExperimentConfig, g1: InterferenceGraph,
                        seed: int) -> InterferenceGraph:
    wg = cfg.wrong_graph
    if wg.mode == "subgraph":
        return generate_edge_subgraph(g1, wg.keep_fraction, seed=seed)
    density = (2.0 * g1.n_edges) / (g1.n * (g1.n - 1)) if g1.n > 1 else 0.0
    return generate_erdos_renyi(g1.n, density, seed=seed)


def _first_order_terms(exposure: str, graph: InterferenceGraph) -> tuple[ExposureTerm, ...]:
    return (ExposureTerm(exposure, graph),)


def _second_order_terms(exposure: str, graph: InterferenceGraph) -> tuple[ExposureTerm, ...]:
    suffix = "mean" if exposure.endswith("mean") else "sum"
    return (ExposureTerm(exposure, graph), ExposureTerm(f"khop2_{suffix}", graph))


def make_model_spec(kind: str, exposure: str, graph: InterferenceGraph | None,
                    n: int, label: str) -> ModelSpec:
    """Build a candidate spec of the given structural kind on ``graph``.

    ``graph=None`` yields the matching no-interference spec.
    """
    if graph is None:
        terms: tuple[ExposureTerm, ...] = ()
    elif kind == "second_order":
        terms = _second_order_terms(exposure, graph)
    else:
        terms = _first_order_terms(exposure, graph)
    fe = kind == "unit_time"
    return ModelSpec(label=label, n_units=n, exposure=ExposureMap(terms=terms),
                     unit_effects=fe, time_effects=fe)


def make_true_params(cfg: ExperimentConfig, spec: ModelSpec, n_periods: int,
                     seed: int) -> TrueParams:
    """Generating parameters for the configured true model.

    Unit and period effects, when present, are standard normal draws from the
    replication's own stream; the headline effects come from the config.
    """
    tm = cfg.true_model
    noise = NoiseSpec(regime="none", sigma=0.0) if tm.noise == "none" else \
        NoiseSpec(regime=tm.noise, sigma=tm.sigma)
    eta = {"first_order": (tm.eta1,), "second_order": (tm.eta1, tm.eta2),
           "unit_time": (tm.eta1,)}[tm.kind]
    if tm.kind == "unit_time":
        rng = np.random.default_rng(seed)
        return TrueParams(tau=tm.tau, eta=eta, alpha=rng.normal(size=spec.n_units),
                          gamma=rng.normal(size=n_periods), noise=noise)
    return TrueParams(tau=tm.tau, eta=eta, alpha=1.0, noise=noise)


def make_candidates(cfg: ExperimentConfig, g1: InterferenceGraph,
                    g2: InterferenceGraph) -> CandidateSet:
    """True-graph, wrong-graph, and no-interference candidates.

    All three mirror the true model's structural extras (second-order term or
    unit/time effects) so the comparison isolates the interference network.
    """
    kind, exposure = cfg.true_model.kind, cfg.true_model.exposure
    return CandidateSet(specs=(
        make_model_spec(kind, exposure, g1, cfg.n, "true-graph"),
        make_model_spec(kind, exposure, g2, cfg.n, "wrong-graph"),
        make_model_spec(kind, exposure, None, cfg.n, "no-interference"),
    ))


# ---------------------------------------------------------------------------
# selection study


def _selection_rep(cfg_dict: dict, rep: int) -> list[dict]:
    cfg = config_from_dict(cfg_dict)
    seeds = _rep_seeds(cfg.base_seed, rep, 7)
    schedule = _schedule(cfg)
    g1 = _sample_true_graph(cfg, seeds[0])
    g2 = _sample_wrong_graph(cfg, g1, seeds[1])
    panel = sample_crd(cfg.n, schedule, seed=seeds[2])
    candidates = make_candidates(cfg, g1, g2)
    true_spec = candidates.specs[0]
    params = make_true_params(cfg, true_spec, cfg.periods, seeds[3])
    outcomes = simulate_panel(true_spec, params, panel, seed=seeds[4])
    tte = true_tte(true_spec, params)

    reports = {
        "lopo": lopo(candidates, panel, outcomes),
        "pooled_kfold": pooled_kfold(candidates, panel, outcomes,
                                     k=cfg.kfold_k, seed=seeds[5]),
        "train_first": train_first(candidates, panel, outcomes),
        "train_last": train_last(candidates, panel, outcomes),
        "no_rollout": no_rollout(candidates, true_spec, params, cfg.periods,
                                 seed=seeds[6], observed_panel=panel,
                                 observed_outcomes=outcomes),
    }
    rows = []
    for name in PROCEDURES:
        report = reports[name]
        chosen_score = report.score(report.chosen)
        rows.append({
            "rep": rep,
            "procedure": name,
            "chosen": report.chosen,
            "correct": int(report.chosen == "true-graph"),
            "tte_hat": float(chosen_score.tte_hat),
            "rel_err_pct": relative_error_pct(chosen_score.tte_hat, tte),
        })
    return rows


def _map_reps(worker, n_reps: int, jobs: int) -> list[list[dict]]:
    # pool.map preserves submission order, so merged records are
    # order-deterministic regardless of scheduling.
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(worker, range(n_reps), chunksize=8))
    return [worker(rep) for rep in range(n_reps)]


def _bootstrap_ci(values: np.ndarray, resamples: int,
                  rng: np.random.Generator) -> tuple[float, float]:
    """Percentile bootstrap 95% interval for the mean of ``values``."""
    n = len(values)
    idx = rng.integers(0, n, size=(resamples, n))
    means = values[idx].mean(axis=1)
    lo, hi = np.percentile(means, [2.5, 97.5])
    return float(lo), float(hi)


def _selection_summary(cfg: ExperimentConfig, records: list[dict]) -> dict:
    rng = np.random.default_rng([cfg.base_seed, 48879])
    out: dict = {
        # random graphs are redrawn in every replication; fixed graph kinds
        # (complete, edge_list) are not
        "graphs_resampled_per_replication": cfg.graph.kind == "erdos_renyi",
        "procedures": {},
    }
    for name in PROCEDURES:
        rows = [r for r in records if r["procedure"] == name]
        incorrect = np.array([100.0 * (1 - r["correct"]) for r in rows])
        rel = np.array([r["rel_err_pct"] for r in rows])
        lo, hi = _bootstrap_ci(incorrect, cfg.bootstrap_resamples, rng)
        qs = np.percentile(rel, [2.5, 25, 50, 75, 97.5])
        out["procedures"][name] = {
            "incorrect_pct": float(incorrect.mean()),
            "incorrect_ci": [lo, hi],
            "rel_err_pct": {
                "mean": float(rel.mean()),
                "q2.5": float(qs[0]), "q25": float(qs[1]), "median": float(qs[2]),
                "q75": float(qs[3]), "q97.5": float(qs[4]),
            },
        }
    return out


def run_selection_study(cfg: ExperimentConfig) -> StudyResult:
    """Replicate the roll-out experiment and score all selection procedures."""
    worker = partial(_selection_rep, cfg.to_dict())
    records = [row for rows in _map_reps(worker, cfg.replications, cfg.jobs)
               for row in rows]
    summary = _selection_summary(cfg, records)
    return _result(cfg, records, SELECTION_FIELDS, summary)


# ---------------------------------------------------------------------------
# identification sweep


def run_identification_sweep(cfg: ExperimentConfig) -> StudyResult:
    """Probability of an identified contrast per (graph density, prefix length)."""
    schedule = _schedule(cfg)
    records: list[dict] = []
    sweep_rows: list[dict] = []
    for k, graph_p in enumerate(cfg.identification_edge_probabilities):
        recs = identification_records(
            schedule, cfg.identification_n, graph_p, cfg.identification_reps,
            seed=cfg.base_seed + 1_000_000 * k, make_spec=neighbor_sum_spec)
        for t_len, rep, member in recs:
            records.append({"rep": rep, "graph_p": graph_p, "T": t_len,
                            "identified": int(member)})
        for t_len in range(1, schedule.n_periods + 1):
            hits = [m for tl, _, m in recs if tl == t_len]
            prob = float(np.mean(hits))
            half = 1.96 * np.sqrt(prob * (1.0 - prob) / len(hits))
            sweep_rows.append({
                "graph_p": graph_p, "T": t_len, "prob_identified": prob,
                "ci_low": max(0.0, prob - half), "ci_high": min(1.0, prob + half),
            })
    summary = {"cells": sweep_rows}
    fields = ["graph_p", "T", "prob_identified", "ci_low", "ci_high"]
    return _result(cfg, records, IDENTIFICATION_FIELDS, summary,
                   sweep_rows=sweep_rows, sweep_fields=fields)


# ---------------------------------------------------------------------------
# variance study

VARIANCE_REGIMES = ("time_invariant", "time_varying")


def _variance_cells(cfg: ExperimentConfig) -> list[dict]:
    # Designs: the configured roll-out, the constant-50% benchmark held fixed
    # across the same number of periods, and its single-period version.
    return [
        {"design": "rollout", "T": cfg.periods},
        {"design": "constant_half", "T": cfg.periods},
        {"design": "constant_half", "T": 1},
    ]


def _variance_rep(cfg_dict: dict, rep: int) -> list[dict]:
    cfg = config_from_dict(cfg_dict)
    n = cfg.variance_n
    graph = generate_complete(n)
    spec = ModelSpec(label="linear-in-means", n_units=n,
                     exposure=ExposureMap(terms=(ExposureTerm("neighbor_mean", graph),)))
    tm = cfg.true_model
    rows = []
    seeds = _rep_seeds(cfg.base_seed, rep, 2 * len(VARIANCE_REGIMES) * 3)
    s = 0
    for regime in VARIANCE_REGIMES:
        sigma = tm.sigma if tm.noise != "none" else 0.0
        noise = NoiseSpec(regime=regime, sigma=sigma)
        params = TrueParams(tau=tm.tau, eta=(tm.eta1,), alpha=1.0, noise=noise)
        for cell in _variance_cells(cfg):
            t_len = cell["T"]
            if cell["design"] == "rollout":
                schedule = RolloutSchedule.even(t_len, cfg.schedule.total) \
                    if cfg.schedule.kind == "even" else _schedule(cfg)
                panel = sample_crd(n, schedule, seed=seeds[s])
            else:
                panel = sample_constant_fraction(n, 0.5, t_len, seed=seeds[s],
                                                 redraw_each_period=False)
            outcomes = simulate_panel(spec, params, panel, seed=seeds[s + 1])
            s += 2
            design = build_design(spec, panel)
            contrast = contrast_vector(spec, t_len)
            result = fit_tte(design, outcomes.stacked(), contrast)
            rows.append({
                "rep": rep, "regime": regime, "design": cell["design"], "T": t_len,
                "tte_hat": float(result.tte_hat),
                "identified": int(bool(result.identified)),
                "lam_min": result.gram_min_eigenvalue,
            })
    return rows


def _chi2_var_ci(sample_var: float, r: int) -> tuple[float, float]:
    lo = (r - 1) * sample_var / scipy_stats.chi2.ppf(0.975, r - 1)
    hi = (r - 1) * sample_var / scipy_stats.chi2.ppf(0.025, r - 1)
    return float(lo), float(hi)


def _variance_summary(cfg: ExperimentConfig, records: list[dict]) -> dict:
    n = cfg.variance_n
    graph = generate_complete(n)
    spec = ModelSpec(label="linear-in-means", n_units=n,
                     exposure=ExposureMap(terms=(ExposureTerm("neighbor_mean", graph),)))
    sigma = cfg.true_model.sigma if cfg.true_model.noise != "none" else 0.0
    cells = []
    for regime in VARIANCE_REGIMES:
        for cell in _variance_cells(cfg):
            rows = [r for r in records
                    if r["regime"] == regime and r["design"] == cell["design"]
                    and r["T"] == cell["T"]]
            vals = np.array([r["tte_hat"] for r in rows])
            lam_min = np.array([r["lam_min"] for r in rows])
            var = float(np.var(vals, ddof=1)) if len(vals) > 1 else 0.0
            lo, hi = _chi2_var_ci(var, len(vals)) if len(vals) > 1 else (0.0, 0.0)
            contrast = contrast_vector(spec, cell["T"])
            nonsingular = lam_min > 1e-10 * 1.0
            if nonsingular.all() and sigma >= 0:
                k = spec.n_params(cell["T"])
                t_factor = cell["T"] if regime == "time_invariant" else 1
                bound = float(4.0 * k * t_factor * contrast.norm_sq * sigma ** 2
                              * np.mean(1.0 / lam_min))
            else:
                bound = None
            cells.append({
                "regime": regime, "design": cell["design"], "T": cell["T"],
                "variance": var, "var_ci_low": lo, "var_ci_high": hi,
                "mean": float(vals.mean()),
                "mse_vs_mean": float(np.mean((vals - vals.mean()) ** 2)),
                "identified_rate": float(np.mean([r["identified"] for r in rows])),
                "spectral_bound": bound,
            })
    return {"cells": cells}


def run_variance_study(cfg: ExperimentConfig) -> StudyResult:
    """Monte Carlo variance per noise regime and design on the complete graph."""
    worker = partial(_variance_rep, cfg.to_dict())
    records = [row for rows in _map_reps(worker, cfg.variance_replications, cfg.jobs)
               for row in rows]
    summary = _variance_summary(cfg, records)
    fields = ["regime", "design", "T", "variance", "var_ci_low", "var_ci_high",
              "mean", "mse_vs_mean", "identified_rate", "spectral_bound"]
    return _result(cfg, records, VARIANCE_FIELDS, summary,
                   sweep_rows=summary["cells"], sweep_fields=fields)


# ---------------------------------------------------------------------------
# sparsity sweep


def run_sparsity_sweep(cfg: ExperimentConfig) -> StudyResult:
    """Selection study repeated over a grid of random-graph densities.

    Density zero and one are excluded by construction of the default grid:
    both collapse the exposure columns into the intercept/treatment span.
    """
    records: list[dict] = []
    sweep_rows: list[dict] = []
    for graph_p in cfg.sparsity_edge_probabilities:
        sub_dict = cfg.to_dict()
        sub_dict["study"] = "selection"
        sub_dict["graph"] = {"kind": "erdos_renyi", "edge_probability": graph_p,
                             "edge_list_path": None}
        sub = config_from_dict(sub_dict)
        result = run_selection_study(sub)
        for row in result.records:
            records.append({"edge_probability": graph_p, **row})
        for name in PROCEDURES:
            agg = result.summary["procedures"][name]
            sweep_rows.append({
                "edge_probability": graph_p, "procedure": name,
                "incorrect_pct": agg["incorrect_pct"],
                "ci_low": agg["incorrect_ci"][0], "ci_high": agg["incorrect_ci"][1],
            })
    summary = {"grid": sweep_rows}
    fields = ["edge_probability", "procedure", "incorrect_pct", "ci_low", "ci_high"]
    return _result(cfg, records, SPARSITY_FIELDS, summary,
                   sweep_rows=sweep_rows, sweep_fields=fields)


# ---------------------------------------------------------------------------
# output files


def _result(cfg: ExperimentConfig, records: list[dict], record_fields: list[str],
            summary: dict, sweep_rows: list[dict] | None = None,
            sweep_fields: list[str] | None = None) -> StudyResult:
    summary_full = {
        "study": cfg.study,
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "base_seed": cfg.base_seed,
        "n_records": len(records),
        **summary,
    }
    return StudyResult(config=cfg.to_dict(), config_hash=cfg.config_hash(),
                       base_seed=cfg.base_seed, records=records,
                       record_fields=record_fields, summary=summary_full,
                       sweep_rows=sweep_rows or [], sweep_fields=sweep_fields or [])


def write_outputs(result: StudyResult, out_dir: str | Path,
                  render_figures: bool = True) -> list[Path]:
    """Write records.csv, summary.json, sweep.csv (grid studies), and figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    records_path = out / "records.csv"
    with open(records_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=result.record_fields)
        writer.writeheader()
        writer.writerows(result.records)
    written.append(records_path)

    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(result.summary, indent=2) + "\n")
    written.append(summary_path)

    if result.sweep_rows:
        sweep_path = out / "sweep.csv"
        with open(sweep_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=result.sweep_fields)
            writer.writeheader()
            writer.writerows(result.sweep_rows)
        written.append(sweep_path)

    if render_figures:
        from . import plots
        written.extend(plots.render_study(result, out))
    return written
