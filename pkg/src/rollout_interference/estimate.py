"""Design-matrix construction, least-squares fitting, and effect estimation.

The stacked design has one row per unit-period, ordered period-major, with
column blocks ``[unit effects | period dummies | group dummies | treatment |
exposure features]``.  The total-effect estimate is a fixed linear functional
of the coefficient vector; when the Gram matrix is singular the minimum-norm
solution is used and the functional's identifiability is certified by a
row-space membership test.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.linalg

from .outcomes import ModelSpec, exposure_features
from .rollout import TreatmentPanel

# Gram matrix treated as singular when its smallest eigenvalue falls below
# this fraction of max(1, largest eigenvalue).
RANK_RTOL = 1e-10
SPAN_RTOL = 1e-8


@dataclass(frozen=True)
class DesignMatrix:
    """Stacked covariates for a spec/panel pair with the column-block layout."""

    x: np.ndarray = field(repr=False)
    n_units: int
    n_periods: int
    slices: dict[str, slice] = field(repr=False)

    @property
    def n_params(self) -> int:
        return self.x.shape[1]

    @cached_property
    def gram(self) -> np.ndarray:
        return self.x.T @ self.x

    def period_rows(self, t: int) -> slice:
        """Row slice for 1-based period ``t``."""
        if not 1 <= t <= self.n_periods:
            raise ValueError(f"period {t} out of range 1..{self.n_periods}")
        return slice((t - 1) * self.n_units, t * self.n_units)

    def row_index(self, i: int, t: int) -> int:
        """Row of unit ``i`` (0-based) at period ``t`` (1-based)."""
        if not 0 <= i < self.n_units:
            raise ValueError(f"unit {i} out of range")
        return (t - 1) * self.n_units + i


@dataclass(frozen=True)
class ContrastVector:
    """Coefficient weights mapping the parameter vector to the total effect:
    zeros on all fixed-effect blocks, one on the treatment slot, and the
    all-treated mean exposure on the feature block."""

    c: np.ndarray = field(repr=False)

    @property
    def norm_sq(self) -> float:
        return float(self.c @ self.c)


@dataclass
class FitResult:
    """Least-squares fit, its Gram spectrum, and (once estimated) the total effect."""

    theta: np.ndarray
    gram_min_eigenvalue: float
    gram_max_eigenvalue: float
    singular: bool
    tte_hat: float | None = None
    identified: bool | None = None
    identified_via_span: bool | None = None

    def to_dict(self) -> dict:
        return {
            "theta": [float(v) for v in self.theta],
            "tte_hat": self.tte_hat,
            "min_eig": self.gram_min_eigenvalue,
            "singular": self.singular,
            "identified": self.identified,
            "identified_via_span": self.identified_via_span,
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class TteEstimate:
    value: float
    identified: bool
    via_span: bool


def build_design(spec: ModelSpec, panel: TreatmentPanel) -> DesignMatrix:
    """Assemble the period-major stacked design for ``spec`` on ``panel``.

    With shared intercept the unit block collapses to a single ones column;
    period and group dummies keep every category.
    """
    if panel.n_units != spec.n_units:
        raise ValueError("panel and spec disagree on the number of units")
    n, n_periods = panel.n_units, panel.n_periods
    n_alpha = n if spec.unit_effects else 1
    n_gamma = n_periods if spec.time_effects else 0
    k = n_alpha + n_gamma + spec.n_groups + 1 + spec.exposure_dim
    x = np.zeros((n * n_periods, k))

    col = 0
    sl_alpha = slice(col, col + n_alpha)
    col += n_alpha
    sl_gamma = slice(col, col + n_gamma)
    col += n_gamma
    sl_group = slice(col, col + spec.n_groups)
    col += spec.n_groups
    sl_z = slice(col, col + 1)
    col += 1
    sl_expo = slice(col, col + spec.exposure_dim)

    rows_of_unit = np.arange(n)
    z = panel.z.astype(np.float64)
    for t in range(n_periods):
        rows = slice(t * n, (t + 1) * n)
        if spec.unit_effects:
            x[rows, sl_alpha][rows_of_unit, rows_of_unit] = 1.0
        else:
            x[rows, sl_alpha] = 1.0
        if spec.time_effects:
            x[rows, sl_gamma.start + t] = 1.0
        if spec.n_groups:
            x[np.arange(t * n, (t + 1) * n), sl_group.start + spec.group_map[:, t]] = 1.0
        x[rows, sl_z] = z[:, t][:, None]
        if spec.exposure_dim:
            x[rows, sl_expo] = exposure_features(spec, z[:, t])

    slices = {"alpha": sl_alpha, "gamma": sl_gamma, "group": sl_group,
              "z": sl_z, "exposure": sl_expo}
    return DesignMatrix(x=x, n_units=n, n_periods=n_periods, slices=slices)


def contrast_vector(spec: ModelSpec, n_periods: int) -> ContrastVector:
    """Total-effect weights for ``spec``'s parameter layout over ``n_periods``."""
    k = spec.n_params(n_periods)
    c = np.zeros(k)
    z_pos = k - 1 - spec.exposure_dim
    c[z_pos] = 1.0
    if spec.exposure_dim:
        f_all = exposure_features(spec, np.ones(spec.n_units))
        c[z_pos + 1:] = f_all.mean(axis=0)
    return ContrastVector(c=c)


def fit(design: DesignMatrix, y: np.ndarray,
        rows: np.ndarray | slice | None = None) -> FitResult:
    """Least-squares fit of the stacked model, optionally on a row subset.

    Solves the normal equations by symmetric factorization when the Gram
    matrix is numerically nonsingular, otherwise returns the minimum-norm
    solution.  The Gram spectrum is always reported.
    """
    x = design.x if rows is None else design.x[rows]
    yv = np.asarray(y, dtype=np.float64)
    yv = yv if rows is None else yv[rows]
    if x.shape[0] != yv.shape[0]:
        raise ValueError("design rows and outcome length differ")
    if not (np.isfinite(x).all() and np.isfinite(yv).all()):
        raise ValueError("non-finite values in design or outcomes")

    gram = design.gram if rows is None else x.T @ x
    evals = np.linalg.eigvalsh(gram)
    lam_min, lam_max = float(evals[0]), float(evals[-1])
    singular = lam_min <= RANK_RTOL * max(1.0, lam_max)
    if singular:
        theta = np.linalg.lstsq(x, yv, rcond=None)[0]
    else:
        try:
            theta = scipy.linalg.solve(gram, x.T @ yv, assume_a="pos")
        except scipy.linalg.LinAlgError:
            theta = np.linalg.lstsq(x, yv, rcond=None)[0]
            singular = True
    return FitResult(theta=theta, gram_min_eigenvalue=lam_min,
                     gram_max_eigenvalue=lam_max, singular=singular)


def estimate_tte(fit_result: FitResult, contrast: ContrastVector,
                 design: DesignMatrix) -> TteEstimate:
    """Contrast the fitted coefficients into a total-effect estimate.

    Nonsingular fits are identified outright.  For singular fits the value is
    solution-invariant (hence identified) exactly when the contrast lies in
    the design's row space, which is certified numerically.
    """
    if contrast.c.shape != (design.n_params,):
        raise ValueError("contrast length does not match design columns")
    value = float(contrast.c @ fit_result.theta)
    if not fit_result.singular:
        fit_result.tte_hat = value
        fit_result.identified = True
        fit_result.identified_via_span = False
        return TteEstimate(value=value, identified=True, via_span=False)
    member, _, _ = span_membership(design, contrast)
    fit_result.tte_hat = value
    fit_result.identified = member
    fit_result.identified_via_span = member
    return TteEstimate(value=value, identified=member, via_span=member)


def fit_tte(design: DesignMatrix, y: np.ndarray,
            contrast: ContrastVector) -> FitResult:
    """Convenience: fit on all rows and fill in the total-effect fields."""
    result = fit(design, y)
    estimate_tte(result, contrast, design)
    return result


def span_membership(design: DesignMatrix, contrast: ContrastVector,
                    rtol: float = SPAN_RTOL) -> tuple[bool, np.ndarray | None, float]:
    """Test whether the contrast lies in the design's row space.

    The row space equals the column space of the Gram matrix, so membership
    reduces to the least-squares residual of ``gram @ w = c``; when it is a
    member, ``x @ w`` is returned as a certificate vector ``v`` with
    ``x.T @ v = c``.  Returns ``(member, certificate, residual_norm)``.
    """
    c = contrast.c
    gram = design.gram
    w = np.linalg.lstsq(gram, c, rcond=None)[0]
    residual = float(np.linalg.norm(gram @ w - c))
    member = residual <= rtol * max(1.0, float(np.linalg.norm(c)))
    certificate = design.x @ w if member else None
    return member, certificate, residual


def mspe(theta: np.ndarray, design: DesignMatrix, y: np.ndarray, t: int) -> float:
    """Mean squared prediction error over the rows of 1-based period ``t``."""
    rows = design.period_rows(t)
    pred = design.x[rows] @ np.asarray(theta, dtype=np.float64)
    resid = pred - np.asarray(y, dtype=np.float64)[rows]
    return float(np.mean(resid ** 2))


def tte_error_bound(contrast: ContrastVector, x_period: np.ndarray,
                    mspe_value: float, noise_mean_square: float) -> float:
    """Deterministic bound on the squared total-effect error from one period.

    ``(2 * ||c||^2 / lambda_min(Sigma)) * (mspe + mean eps^2)`` where Sigma is
    the period's sample covariance ``(1/N) sum_i x_i x_i^T``; requires Sigma
    to be positive definite.
    """
    x_period = np.asarray(x_period, dtype=np.float64)
    sigma = x_period.T @ x_period / x_period.shape[0]
    lam_min = float(np.linalg.eigvalsh(sigma)[0])
    if lam_min <= 0.0:
        raise ValueError("period covariance is singular; bound undefined")
    return float(2.0 * contrast.norm_sq / lam_min * (mspe_value + noise_mean_square))
