"""Model selection over candidate interference specifications.

Every procedure scores each candidate by mean squared prediction error on
held-out data and returns the candidate minimizing the average, with ties
broken by candidate order.  The procedures differ in how folds are formed:

* ``lopo``: leave one period out, average over all periods.
* ``train_first`` / ``train_last``: single fold holding out the last / first
  period.
* ``pooled_kfold``: classical cross-validation over units with all periods
  pooled.
* ``no_rollout``: regenerates data under the true model with a constant 50%
  treated share re-randomized each period, then applies the leave-one-period-
  out loop to that data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .estimate import DesignMatrix, build_design, contrast_vector, fit, fit_tte
from .outcomes import ModelSpec, OutcomePanel, TrueParams, simulate_panel
from .rollout import TreatmentPanel, sample_constant_fraction


@dataclass(frozen=True)
class CandidateSet:
    """Ordered candidate models with unique labels."""

    specs: tuple[ModelSpec, ...]

    def __post_init__(self) -> None:
        if not self.specs:
            raise ValueError("candidate set must be non-empty")
        labels = [spec.label for spec in self.specs]
        if len(set(labels)) != len(labels):
            raise ValueError(f"candidate labels must be unique, got {labels}")

    @property
    def labels(self) -> list[str]:
        return [spec.label for spec in self.specs]


@dataclass
class CandidateScore:
    label: str
    mean_mspe: float
    fold_mspes: list[float]
    tte_hat: float
    identified: bool
    any_singular_fold: bool


@dataclass
class SelectionReport:
    procedure: str
    chosen: str
    candidates: list[CandidateScore] = field(default_factory=list)

    def score(self, label: str) -> CandidateScore:
        for cand in self.candidates:
            if cand.label == label:
                return cand
        raise KeyError(label)

    def to_dict(self) -> dict:
        return {
            "procedure": self.procedure,
            "chosen": self.chosen,
            "candidates": [
                {"label": c.label, "mean_mspe": c.mean_mspe,
                 "fold_mspes": c.fold_mspes, "tte_hat": c.tte_hat,
                 "identified": c.identified}
                for c in self.candidates
            ],
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def _full_data_tte(design: DesignMatrix, spec: ModelSpec,
                   y_stacked: np.ndarray) -> tuple[float, bool]:
    contrast = contrast_vector(spec, design.n_periods)
    result = fit_tte(design, y_stacked, contrast)
    return float(result.tte_hat), bool(result.identified)


def _prediction(design: DesignMatrix, spec: ModelSpec, theta: np.ndarray,
                eval_rows: np.ndarray, train_units: np.ndarray | None) -> np.ndarray:
    """Predict held-out rows; for unit-effect specs with held-out units, the
    unobservable unit effect is replaced by the mean of the trained ones."""
    if train_units is None or not spec.unit_effects:
        return design.x[eval_rows] @ theta
    alpha = design.slices["alpha"]
    theta_adj = theta.copy()
    mean_alpha = float(np.mean(theta[alpha][train_units]))
    held_out = np.setdiff1d(np.arange(spec.n_units), train_units)
    theta_adj[np.arange(alpha.start, alpha.stop)[held_out]] = mean_alpha
    return design.x[eval_rows] @ theta_adj


def _score_candidates(candidates: CandidateSet, panel: TreatmentPanel,
                      y_stacked: np.ndarray, folds: list[tuple[np.ndarray, np.ndarray]],
                      procedure: str,
                      train_units_per_fold: list[np.ndarray] | None = None,
                      refit_panel: TreatmentPanel | None = None,
                      refit_y: np.ndarray | None = None) -> SelectionReport:
    """Shared fold loop.  ``folds`` holds (train_rows, eval_rows) index arrays.

    The per-candidate total-effect estimate comes from a full refit on
    ``refit_panel``/``refit_y`` (defaults to the scored data).
    """
    refit_panel = panel if refit_panel is None else refit_panel
    refit_y = y_stacked if refit_y is None else refit_y
    scores: list[CandidateScore] = []
    for spec in candidates.specs:
        design = build_design(spec, panel)
        fold_mspes: list[float] = []
        any_singular = False
        for k, (train_rows, eval_rows) in enumerate(folds):
            result = fit(design, y_stacked, rows=train_rows)
            any_singular |= result.singular
            train_units = None if train_units_per_fold is None else train_units_per_fold[k]
            pred = _prediction(design, spec, result.theta, eval_rows, train_units)
            fold_mspes.append(float(np.mean((pred - y_stacked[eval_rows]) ** 2)))
        refit_design = design if refit_panel is panel else build_design(spec, refit_panel)
        tte_hat, identified = _full_data_tte(refit_design, spec, refit_y)
        scores.append(CandidateScore(
            label=spec.label, mean_mspe=float(np.mean(fold_mspes)),
            fold_mspes=fold_mspes, tte_hat=tte_hat, identified=identified,
            any_singular_fold=any_singular))
    chosen = scores[int(np.argmin([s.mean_mspe for s in scores]))].label
    return SelectionReport(procedure=procedure, chosen=chosen, candidates=scores)


def _period_folds(n: int, n_periods: int,
                  held_out: list[int]) -> list[tuple[np.ndarray, np.ndarray]]:
    all_rows = np.arange(n * n_periods)
    folds = []
    for t in held_out:
        eval_rows = np.arange((t - 1) * n, t * n)
        folds.append((np.setdiff1d(all_rows, eval_rows), eval_rows))
    return folds


def lopo(candidates: CandidateSet, panel: TreatmentPanel,
         outcomes: OutcomePanel) -> SelectionReport:
    """Leave-one-period-out: every period serves once as the held-out fold."""
    if panel.n_periods < 2:
        raise ValueError("leave-one-period-out needs at least two periods")
    folds = _period_folds(panel.n_units, panel.n_periods,
                          list(range(1, panel.n_periods + 1)))
    return _score_candidates(candidates, panel, outcomes.stacked(), folds, "lopo")


def train_first(candidates: CandidateSet, panel: TreatmentPanel,
                outcomes: OutcomePanel) -> SelectionReport:
    """Fit on the first T-1 periods, score on the last."""
    if panel.n_periods < 2:
        raise ValueError("train_first needs at least two periods")
    folds = _period_folds(panel.n_units, panel.n_periods, [panel.n_periods])
    return _score_candidates(candidates, panel, outcomes.stacked(), folds, "train_first")


def train_last(candidates: CandidateSet, panel: TreatmentPanel,
               outcomes: OutcomePanel) -> SelectionReport:
    """Fit on the last T-1 periods, score on the first."""
    if panel.n_periods < 2:
        raise ValueError("train_last needs at least two periods")
    folds = _period_folds(panel.n_units, panel.n_periods, [1])
    return _score_candidates(candidates, panel, outcomes.stacked(), folds, "train_last")


def pooled_kfold(candidates: CandidateSet, panel: TreatmentPanel,
                 outcomes: OutcomePanel, k: int = 10,
                 seed: int = 0) -> SelectionReport:
    """K-fold cross-validation over units, all periods pooled per unit."""
    n, n_periods = panel.n_units, panel.n_periods
    if not 2 <= k <= n:
        raise ValueError(f"fold count must be in [2, {n}], got {k}")
    rng = np.random.default_rng(seed)
    unit_fold = rng.permutation(np.arange(n) % k)
    folds = []
    train_units_per_fold = []
    period_offsets = np.arange(n_periods) * n
    for j in range(k):
        held_units = np.flatnonzero(unit_fold == j)
        train_units = np.flatnonzero(unit_fold != j)
        eval_rows = (held_units[:, None] + period_offsets[None, :]).ravel()
        train_rows = (train_units[:, None] + period_offsets[None, :]).ravel()
        folds.append((np.sort(train_rows), np.sort(eval_rows)))
        train_units_per_fold.append(train_units)
    return _score_candidates(candidates, panel, outcomes.stacked(), folds,
                             "pooled_kfold", train_units_per_fold=train_units_per_fold)


def no_rollout(candidates: CandidateSet, true_spec: ModelSpec,
               true_params: TrueParams, n_periods: int, seed: int,
               observed_panel: TreatmentPanel | None = None,
               observed_outcomes: OutcomePanel | None = None) -> SelectionReport:
    """Benchmark without temporal variation in the treated share.

    Simulates ``n_periods`` of data under the true model with exactly half the
    units treated in every period (re-randomized per period, non-monotone) and
    applies the leave-one-period-out loop to the candidates on that data.
    When the observed roll-out data is supplied, per-candidate total-effect
    estimates are refit on it; otherwise they come from the simulated data.
    """
    if n_periods < 2:
        raise ValueError("no_rollout needs at least two periods")
    synth_panel = sample_constant_fraction(true_spec.n_units, 0.5, n_periods,
                                           seed=seed, redraw_each_period=True)
    synth = simulate_panel(true_spec, true_params, synth_panel, seed=seed + 1)
    folds = _period_folds(synth_panel.n_units, n_periods,
                          list(range(1, n_periods + 1)))
    refit_panel = observed_panel
    refit_y = observed_outcomes.stacked() if observed_outcomes is not None else None
    report = _score_candidates(candidates, synth_panel, synth.stacked(), folds,
                               "no_rollout", refit_panel=refit_panel, refit_y=refit_y)
    return report


def relative_error_pct(tte_hat: float, tte_true: float) -> float:
    """|estimate - truth| / |truth| in percent."""
    if tte_true == 0.0:
        raise ValueError("relative error undefined for a zero true effect")
    return float(abs(tte_hat - tte_true) / abs(tte_true) * 100.0)
