"""Interference model specifications and the outcome simulator.

A model couples an exposure map (how neighbors' treatments enter a unit's
outcome) with a fixed-effect structure.  The same specification object drives
both data generation and estimation, so a candidate model can be simulated
under "true" parameters or fitted to observed outcomes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graphs import InterferenceGraph
from .rollout import TreatmentPanel

EXPOSURE_KINDS = ("neighbor_sum", "neighbor_mean", "khop2_sum", "khop2_mean")
NOISE_REGIMES = ("time_invariant", "time_varying", "none")


@dataclass(frozen=True)
class ExposureTerm:
    """One exposure feature: an aggregate of neighbor treatments on a graph.

    Kinds:
        neighbor_sum:  sum of treated direct neighbors.
        neighbor_mean: treated fraction of direct neighbors (0 for isolated units,
                       keeping the all-control normalization at zero).
        khop2_sum / khop2_mean: same aggregates over units at distance exactly two.
    """

    kind: str
    graph: InterferenceGraph

    def __post_init__(self) -> None:
        if self.kind not in EXPOSURE_KINDS:
            raise ValueError(f"unknown exposure kind {self.kind!r}")

    def values(self, z: np.ndarray) -> np.ndarray:
        if self.kind.startswith("khop2"):
            adj = self.graph.two_hop_adjacency
        else:
            adj = self.graph.adjacency
        sums = adj @ z
        if self.kind.endswith("_sum"):
            return sums
        counts = np.asarray(adj.sum(axis=1)).ravel()
        out = np.zeros_like(sums, dtype=np.float64)
        nz = counts > 0
        out[nz] = sums[nz] / counts[nz]
        return out


@dataclass(frozen=True)
class ExposureMap:
    """Ordered collection of exposure terms; output dimension is ``len(terms)``."""

    terms: tuple[ExposureTerm, ...] = ()

    @property
    def dim(self) -> int:
        return len(self.terms)

    def features(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if not self.terms:
            return np.empty((z.shape[0], 0))
        return np.column_stack([term.values(z) for term in self.terms])


@dataclass(frozen=True)
class ModelSpec:
    """A candidate interference model: exposure map plus fixed-effect structure.

    ``unit_effects`` switches between one shared intercept and a full per-unit
    block; ``time_effects`` adds one dummy per period (no reference category is
    dropped; rank handling is left to the estimator).  ``group_map`` is an
    optional N x T integer table into ``n_groups`` extra effect cells.
    """

    label: str
    n_units: int
    exposure: ExposureMap = ExposureMap()
    unit_effects: bool = False
    time_effects: bool = False
    group_map: np.ndarray | None = field(default=None, repr=False)
    n_groups: int = 0

    def __post_init__(self) -> None:
        if self.n_units < 1:
            raise ValueError("n_units must be >= 1")
        for term in self.exposure.terms:
            if term.graph.n != self.n_units:
                raise ValueError("exposure graph size does not match n_units")
        if self.group_map is not None:
            gm = np.asarray(self.group_map, dtype=np.int64)
            if gm.ndim != 2 or gm.shape[0] != self.n_units:
                raise ValueError("group_map must be an N x T table")
            if self.n_groups < 1 or gm.min() < 0 or gm.max() >= self.n_groups:
                raise ValueError("group_map values must lie in [0, n_groups)")
            object.__setattr__(self, "group_map", gm)
        elif self.n_groups:
            raise ValueError("n_groups set without a group_map")

    @property
    def exposure_dim(self) -> int:
        return self.exposure.dim

    def n_params(self, n_periods: int) -> int:
        n_alpha = self.n_units if self.unit_effects else 1
        n_gamma = n_periods if self.time_effects else 0
        return n_alpha + n_gamma + self.n_groups + 1 + self.exposure_dim


@dataclass(frozen=True)
class NoiseSpec:
    """Noise regime and scale.

    ``time_invariant`` draws one normal disturbance per unit reused in every
    period; ``time_varying`` draws independently per unit-period; ``none``
    disables noise (sigma ignored).
    """

    regime: str = "time_varying"
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if self.regime not in NOISE_REGIMES:
            raise ValueError(f"unknown noise regime {self.regime!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


@dataclass(frozen=True)
class TrueParams:
    """Generating parameters for a ModelSpec.

    ``alpha`` is a scalar for shared-intercept specs or a length-N vector for
    per-unit effects; ``gamma``/``psi`` must be present exactly when the spec
    enables the corresponding block; ``eta`` matches the exposure dimension.
    """

    tau: float
    eta: tuple[float, ...] = ()
    alpha: float | np.ndarray = 0.0
    gamma: np.ndarray | None = None
    psi: np.ndarray | None = None
    noise: NoiseSpec = NoiseSpec(regime="none", sigma=0.0)

    def validate(self, spec: ModelSpec, n_periods: int) -> None:
        alpha = np.asarray(self.alpha, dtype=np.float64)
        if spec.unit_effects:
            if alpha.shape != (spec.n_units,):
                raise ValueError("per-unit spec needs alpha of length n_units")
        elif alpha.shape not in ((), (1,)):
            raise ValueError("shared-intercept spec needs scalar alpha")
        if spec.time_effects:
            if self.gamma is None or len(np.atleast_1d(self.gamma)) != n_periods:
                raise ValueError("time-effects spec needs gamma of length n_periods")
        elif self.gamma is not None:
            raise ValueError("gamma given but spec has no time effects")
        if spec.n_groups:
            if self.psi is None or len(np.atleast_1d(self.psi)) != spec.n_groups:
                raise ValueError("group spec needs psi of length n_groups")
        elif self.psi is not None:
            raise ValueError("psi given but spec has no group effects")
        if len(self.eta) != spec.exposure_dim:
            raise ValueError(
                f"eta has {len(self.eta)} entries, exposure dimension is {spec.exposure_dim}")

    def stacked(self, spec: ModelSpec, n_periods: int) -> np.ndarray:
        """Parameter vector in design-matrix column order."""
        self.validate(spec, n_periods)
        parts = [np.atleast_1d(np.asarray(self.alpha, dtype=np.float64))]
        if spec.unit_effects and parts[0].shape != (spec.n_units,):
            parts[0] = np.full(spec.n_units, float(np.asarray(self.alpha)))
        if spec.time_effects:
            parts.append(np.asarray(self.gamma, dtype=np.float64))
        if spec.n_groups:
            parts.append(np.asarray(self.psi, dtype=np.float64))
        parts.append(np.array([self.tau]))
        parts.append(np.asarray(self.eta, dtype=np.float64))
        return np.concatenate(parts)


@dataclass(frozen=True)
class OutcomePanel:
    """Simulated outcomes plus the panel and realized noise that produced them."""

    y: np.ndarray = field(repr=False)
    panel: TreatmentPanel = field(repr=False)
    noise: np.ndarray = field(repr=False)

    @property
    def n_units(self) -> int:
        return self.y.shape[0]

    @property
    def n_periods(self) -> int:
        return self.y.shape[1]

    def stacked(self) -> np.ndarray:
        """Outcomes flattened period-major, matching design-matrix row order."""
        return self.y.T.reshape(-1)

    def write_csv(self, path: str | Path) -> None:
        """Columns: unit (0-based), period (1-based), z, y."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["unit", "period", "z", "y"])
            for t in range(self.n_periods):
                for i in range(self.n_units):
                    writer.writerow([i, t + 1, int(self.panel.z[i, t]),
                                     float(self.y[i, t])])


def exposure_features(spec: ModelSpec, z: np.ndarray) -> np.ndarray:
    """Feature matrix with row i holding the exposures of unit i under ``z``.

    All kinds are linear in ``z`` with zero at the all-control assignment.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (spec.n_units,):
        raise ValueError(f"z must have length {spec.n_units}, got shape {z.shape}")
    if not np.isin(z, (0.0, 1.0)).all():
        raise ValueError("z entries must be 0 or 1")
    return spec.exposure.features(z)


def _draw_noise(noise: NoiseSpec, n: int, n_periods: int, seed: int) -> np.ndarray:
    # Drawn before and independently of the panel so the same seed yields the
    # same disturbances under any treatment assignment.
    rng = np.random.default_rng(seed)
    if noise.regime == "none" or noise.sigma == 0.0:
        return np.zeros((n, n_periods))
    if noise.regime == "time_invariant":
        eps = rng.normal(0.0, noise.sigma, size=n)
        return np.repeat(eps[:, None], n_periods, axis=1)
    return rng.normal(0.0, noise.sigma, size=(n, n_periods))


def simulate_panel(spec: ModelSpec, params: TrueParams, panel: TreatmentPanel,
                   seed: int) -> OutcomePanel:
    """Generate outcomes for every unit-period of ``panel`` under ``spec``.

    ``y[i, t] = alpha_i + gamma_t + psi_g(i,t) + tau * z[i, t]
    + eta . f_i(z^t) + eps[i, t]`` with Gaussian disturbances per the noise
    regime; deterministic given ``seed``.
    """
    if panel.n_units != spec.n_units:
        raise ValueError("panel and spec disagree on the number of units")
    n, n_periods = panel.n_units, panel.n_periods
    params.validate(spec, n_periods)
    eps = _draw_noise(params.noise, n, n_periods, seed)

    alpha = np.asarray(params.alpha, dtype=np.float64)
    y = np.zeros((n, n_periods))
    y += alpha[:, None] if alpha.ndim == 1 else float(alpha)
    if spec.time_effects:
        y += np.asarray(params.gamma, dtype=np.float64)[None, :]
    if spec.n_groups:
        y += np.asarray(params.psi, dtype=np.float64)[spec.group_map]
    z = panel.z.astype(np.float64)
    y += params.tau * z
    if spec.exposure_dim:
        eta = np.asarray(params.eta, dtype=np.float64)
        for t in range(n_periods):
            y[:, t] += exposure_features(spec, z[:, t]) @ eta
    y += eps
    return OutcomePanel(y=y, panel=panel, noise=eps)


def true_tte(spec: ModelSpec, params: TrueParams) -> float:
    """Population average of all-treated minus all-control potential outcomes.

    Fixed effects cancel in the difference, leaving
    ``tau + eta . mean_i f_i(all-ones)``.
    """
    if len(params.eta) != spec.exposure_dim:
        raise ValueError("eta dimension does not match the exposure map")
    if not spec.exposure_dim:
        return float(params.tau)
    f_all = exposure_features(spec, np.ones(spec.n_units))
    return float(params.tau + f_all.mean(axis=0) @ np.asarray(params.eta))
