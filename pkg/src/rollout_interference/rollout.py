"""Staggered roll-out designs: monotone treatment panels plus their exact marginals.

A roll-out over T periods is described by per-period treatment increments
``p_1..p_T``; once a unit is treated it stays treated.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Guard against float cumsum landing epsilon below an exact count boundary
# (e.g. 0.01 + 0.09 < 0.1 in binary).
_FLOOR_EPS = 1e-9


@dataclass(frozen=True)
class RolloutSchedule:
    """Per-period treatment increments with total at most one."""

    increments: tuple[float, ...]

    def __post_init__(self) -> None:
        inc = tuple(float(p) for p in self.increments)
        if len(inc) < 1:
            raise ValueError("schedule needs at least one period")
        if any(p < 0.0 for p in inc):
            raise ValueError(f"increments must be non-negative, got {inc}")
        if sum(inc) > 1.0 + _FLOOR_EPS:
            raise ValueError(f"increments must sum to at most 1, got {sum(inc)}")
        object.__setattr__(self, "increments", inc)

    @classmethod
    def even(cls, n_periods: int, total: float) -> "RolloutSchedule":
        """Equal increments reaching ``total`` treated fraction after the last period."""
        if n_periods < 1:
            raise ValueError("n_periods must be >= 1")
        return cls(increments=tuple(total / n_periods for _ in range(n_periods)))

    @property
    def n_periods(self) -> int:
        return len(self.increments)

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.increments)

    def treated_counts(self, n: int) -> np.ndarray:
        """Exact treated count per period for a completely randomized roll-out."""
        return np.floor(n * self.cumulative() + _FLOOR_EPS).astype(np.int64)


@dataclass(frozen=True)
class TreatmentPanel:
    """Binary N x T assignment matrix, monotone within each unit's row."""

    z: np.ndarray = field(repr=False)
    kind: str = "custom"

    def __post_init__(self) -> None:
        z = np.asarray(self.z)
        if z.ndim != 2:
            raise ValueError("z must be an N x T matrix")
        if not np.isin(z, (0, 1)).all():
            raise ValueError("z entries must be 0 or 1")
        object.__setattr__(self, "z", z.astype(np.int8))

    @property
    def n_units(self) -> int:
        return self.z.shape[0]

    @property
    def n_periods(self) -> int:
        return self.z.shape[1]

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.z.astype(np.int16), axis=1) >= 0))

    def treated_counts(self) -> np.ndarray:
        return self.z.sum(axis=0).astype(np.int64)

    def write_csv(self, path: str | Path) -> None:
        """Columns: unit (0-based), period (1-based), z."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["unit", "period", "z"])
            for t in range(self.n_periods):
                for i in range(self.n_units):
                    writer.writerow([i, t + 1, int(self.z[i, t])])


def sample_crd(n: int, schedule: RolloutSchedule, seed: int) -> TreatmentPanel:
    """Completely randomized roll-out.

    At period t exactly ``floor(n * sum(p_1..p_t))`` units are treated; the
    newly treated are drawn uniformly without replacement from the currently
    untreated.  Implemented by drawing one uniform permutation and treating
    its prefixes, which realizes exactly that sequential distribution.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    counts = schedule.treated_counts(n)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    z = np.zeros((n, schedule.n_periods), dtype=np.int8)
    for t, m in enumerate(counts):
        z[order[:m], t] = 1
    return TreatmentPanel(z=z, kind="completely-randomized")


def sample_bernoulli(n: int, schedule: RolloutSchedule, seed: int) -> TreatmentPanel:
    """Bernoulli roll-out: each still-untreated unit flips on at period t with
    probability ``p_t``, independently across units."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    z = np.zeros((n, schedule.n_periods), dtype=np.int8)
    treated = np.zeros(n, dtype=bool)
    for t, p_t in enumerate(schedule.increments):
        newly = (~treated) & (rng.random(n) < p_t)
        treated |= newly
        z[treated, t] = 1
    return TreatmentPanel(z=z, kind="bernoulli")


def sample_constant_fraction(n: int, fraction: float, n_periods: int, seed: int,
                             redraw_each_period: bool = True) -> TreatmentPanel:
    """Non-rollout benchmark panel: ``floor(n * fraction)`` treated every period.

    With ``redraw_each_period`` the treated set is re-randomized per period
    (non-monotone); otherwise one draw is held fixed for all periods.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must be in [0, 1]")
    m = int(np.floor(n * fraction + _FLOOR_EPS))
    rng = np.random.default_rng(seed)
    z = np.zeros((n, n_periods), dtype=np.int8)
    if redraw_each_period:
        for t in range(n_periods):
            z[rng.choice(n, size=m, replace=False), t] = 1
    else:
        chosen = rng.choice(n, size=m, replace=False)
        z[chosen, :] = 1
    return TreatmentPanel(z=z, kind="constant-fraction")


def _check_period(schedule: RolloutSchedule, t: int) -> None:
    if not 1 <= t <= schedule.n_periods:
        raise ValueError(f"period {t} out of range 1..{schedule.n_periods}")


def marginal_prob_crd(schedule: RolloutSchedule, t: int) -> float:
    """P[unit treated at period t] under the completely randomized roll-out:
    the cumulative increment sum."""
    _check_period(schedule, t)
    return float(np.sum(schedule.increments[:t]))


def marginal_prob_bernoulli(schedule: RolloutSchedule, t: int) -> float:
    """P[unit treated at period t] under the Bernoulli roll-out:
    ``1 - prod_{j<=t}(1 - p_j)``."""
    _check_period(schedule, t)
    return float(1.0 - np.prod([1.0 - p for p in schedule.increments[:t]]))
