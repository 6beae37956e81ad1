"""Identification checks for the total effect under a given design.

Three levels of certificate, from cheap structural conditions to the exact
numerical test:

* an untreated-unit spillover condition that guarantees a nonsingular Gram
  for shared-intercept models with a single exposure feature,
* its graph version: some treated unit has an untreated neighbor after the
  first period,
* row-space membership of the effect contrast, which is necessary and
  sufficient for the estimate to be invariant across all least-squares
  solutions.

The module also estimates, by simulation, how quickly roll-outs make the
membership condition hold as periods accumulate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .estimate import (build_design, contrast_vector, span_membership,
                       RANK_RTOL)
from .graphs import InterferenceGraph, generate_erdos_renyi
from .outcomes import ExposureMap, ExposureTerm, ModelSpec, exposure_features
from .rollout import RolloutSchedule, TreatmentPanel, sample_crd

Witness = tuple[tuple[int, int], tuple[int, int]]


@dataclass(frozen=True)
class IdentificationReport:
    """Summary of the checks for one spec/panel pair.

    ``spillover_witness`` holds ((i, t), (j, t')) unit-period pairs when the
    spillover condition applies and a witness exists; periods are 1-based.
    """

    gram_nonsingular: bool
    span_member: bool
    min_eig: float
    spillover_witness: Witness | None = None


def check_spillover_condition(spec: ModelSpec,
                              panel: TreatmentPanel) -> Witness | None:
    """Find two untreated unit-periods whose exposures differ, the first nonzero.

    Applies to shared-intercept specs with exactly one exposure feature.  The
    search is lexicographic in (period, unit) for both members of the pair,
    so the returned witness is deterministic.  Returns None when no witness
    exists.
    """
    if spec.exposure_dim != 1:
        raise ValueError("spillover condition applies to one exposure feature")
    if spec.unit_effects or spec.time_effects or spec.n_groups:
        raise ValueError("spillover condition applies to shared-intercept specs")
    z = panel.z.astype(np.float64)
    n, n_periods = panel.n_units, panel.n_periods
    f = np.column_stack([exposure_features(spec, z[:, t]).ravel()
                         for t in range(n_periods)])
    untreated = panel.z == 0
    for t in range(n_periods):
        for i in range(n):
            if not untreated[i, t] or f[i, t] == 0.0:
                continue
            for t2 in range(n_periods):
                for j in range(n):
                    if (j, t2) == (i, t) or not untreated[j, t2]:
                        continue
                    if f[j, t2] != f[i, t]:
                        return ((i, t + 1), (j, t2 + 1))
            return None  # all untreated exposures equal; no second member exists
    return None


def check_mixed_edge_condition(graph: InterferenceGraph,
                               panel: TreatmentPanel) -> bool:
    """True when some edge is mixed (treated next to untreated) after period one."""
    if panel.n_units != graph.n:
        raise ValueError("panel and graph disagree on the number of units")
    if graph.n_edges == 0 or panel.n_periods < 2:
        return False
    zi = panel.z[graph.edge_array[:, 0], 1:]
    zj = panel.z[graph.edge_array[:, 1], 1:]
    return bool(np.any(zi != zj))


def identification_report(spec: ModelSpec, panel: TreatmentPanel) -> IdentificationReport:
    """Run the applicable checks for ``spec`` on ``panel``."""
    design = build_design(spec, panel)
    contrast = contrast_vector(spec, panel.n_periods)
    evals = np.linalg.eigvalsh(design.gram)
    nonsingular = evals[0] > RANK_RTOL * max(1.0, evals[-1])
    if nonsingular:
        member = True
    else:
        member, _, _ = span_membership(design, contrast)
    witness = None
    if (spec.exposure_dim == 1 and not spec.unit_effects
            and not spec.time_effects and not spec.n_groups):
        witness = check_spillover_condition(spec, panel)
    return IdentificationReport(gram_nonsingular=bool(nonsingular),
                                span_member=bool(member),
                                min_eig=float(evals[0]),
                                spillover_witness=witness)


def neighbor_sum_spec(graph: InterferenceGraph, label: str = "neighbor-sum") -> ModelSpec:
    """Shared-intercept model with one direct-neighbor exposure feature."""
    return ModelSpec(label=label, n_units=graph.n,
                     exposure=ExposureMap(terms=(ExposureTerm("neighbor_sum", graph),)))


@dataclass(frozen=True)
class IdentificationCell:
    """One point of the identification-probability sweep."""

    graph_p: float
    n_periods: int
    prob_identified: float
    ci_low: float
    ci_high: float
    successes: int
    reps: int


def identification_records(
    schedule: RolloutSchedule,
    n: int,
    graph_p: float,
    reps: int,
    seed: int,
    make_spec: Callable[[InterferenceGraph], ModelSpec] = neighbor_sum_spec,
) -> list[tuple[int, int, bool]]:
    """Per-replication membership outcomes as ``(prefix_length, rep, member)``.

    For prefix length T' = 1..T, each replication draws a fresh random graph
    and a fresh completely randomized panel over the first T' increments,
    then tests row-space membership of the effect contrast.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    out = []
    for t_len in range(1, schedule.n_periods + 1):
        prefix = RolloutSchedule(increments=schedule.increments[:t_len])
        for rep in range(reps):
            cell_seed = seed + (t_len - 1) * reps + rep
            graph = generate_erdos_renyi(n, graph_p, seed=cell_seed)
            panel = sample_crd(n, prefix, seed=cell_seed + 1_000_003)
            report = identification_report(make_spec(graph), panel)
            out.append((t_len, rep, bool(report.span_member)))
    return out


def identification_probability(
    schedule: RolloutSchedule,
    n: int,
    graph_p: float,
    reps: int,
    seed: int,
    make_spec: Callable[[InterferenceGraph], ModelSpec] = neighbor_sum_spec,
) -> list[IdentificationCell]:
    """Estimate P[contrast in row space] for each roll-out prefix length.

    Proportions come with normal-approximation 95% intervals clipped to
    [0, 1]; at an empirical proportion of exactly one the interval collapses
    to a point.
    """
    records = identification_records(schedule, n, graph_p, reps, seed, make_spec)
    cells = []
    for t_len in range(1, schedule.n_periods + 1):
        successes = sum(m for tl, _, m in records if tl == t_len)
        prob = successes / reps
        half = 1.96 * np.sqrt(prob * (1.0 - prob) / reps)
        cells.append(IdentificationCell(
            graph_p=graph_p, n_periods=t_len, prob_identified=prob,
            ci_low=max(0.0, prob - half), ci_high=min(1.0, prob + half),
            successes=successes, reps=reps))
    return cells


def write_identification_csv(cells: list[IdentificationCell], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["graph_p", "T", "prob_identified", "ci_low", "ci_high"])
        for cell in cells:
            writer.writerow([cell.graph_p, cell.n_periods, cell.prob_identified,
                             cell.ci_low, cell.ci_high])
