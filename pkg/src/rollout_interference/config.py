"""Experiment configuration: JSON schema, defaults, and validation.

A config fully determines a study; together with the base seed it pins the
output byte-for-byte.  Desk-scale defaults keep runs in the minutes range;
``paper_scale=True`` switches the selection-type studies to the full
population and replication counts.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

STUDY_KINDS = ("selection", "identification", "variance", "sparsity")
MODEL_KINDS = ("first_order", "second_order", "unit_time")
GRAPH_KINDS = ("erdos_renyi", "complete", "edge_list")
WRONG_GRAPH_MODES = ("subgraph", "independent")

DESK_N = 200
DESK_REPLICATIONS = 200
PAPER_N = 1000
PAPER_REPLICATIONS = 500


class ConfigError(ValueError):
    """Raised for unresolvable or inconsistent experiment configs."""


@dataclass
class ScheduleConfig:
    kind: str = "even"                 # "even" | "explicit"
    total: float = 0.5                 # cumulative treated share for "even"
    increments: list[float] = field(default_factory=list)  # for "explicit"

    def validate(self, n_periods: int) -> None:
        if self.kind not in ("even", "explicit"):
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "even":
            if not 0.0 <= self.total <= 1.0:
                raise ConfigError("schedule total must be in [0, 1]")
        else:
            if len(self.increments) != n_periods:
                raise ConfigError("explicit schedule length must equal periods")
            if any(p < 0 for p in self.increments) or sum(self.increments) > 1 + 1e-9:
                raise ConfigError("invalid explicit schedule increments")


@dataclass
class GraphConfig:
    kind: str = "erdos_renyi"
    edge_probability: float = 0.9
    edge_list_path: str | None = None

    def validate(self) -> None:
        if self.kind not in GRAPH_KINDS:
            raise ConfigError(f"unknown graph kind {self.kind!r}")
        if self.kind == "erdos_renyi" and not 0.0 <= self.edge_probability <= 1.0:
            raise ConfigError("edge_probability must be in [0, 1]")
        if self.kind == "edge_list" and not self.edge_list_path:
            raise ConfigError("edge_list graph needs edge_list_path")


@dataclass
class WrongGraphConfig:
    """How the competing ("wrong") interference network relates to the true one.

    ``subgraph`` keeps each true edge with ``keep_fraction`` (an alternative
    folding that drops part of the structure); ``independent`` draws a fresh
    random graph of the same density.
    """

    mode: str = "subgraph"
    keep_fraction: float = 0.4

    def validate(self) -> None:
        if self.mode not in WRONG_GRAPH_MODES:
            raise ConfigError(f"unknown wrong_graph mode {self.mode!r}")
        if self.mode == "subgraph" and not 0.0 <= self.keep_fraction <= 1.0:
            raise ConfigError("keep_fraction must be in [0, 1]")


@dataclass
class TrueModelConfig:
    kind: str = "first_order"          # which generating model structure
    exposure: str = "neighbor_mean"    # neighbor_mean | neighbor_sum
    tau: float = 5.0
    eta1: float = 2.0
    eta2: float = 2.0
    sigma: float = 1.0
    noise: str = "time_varying"        # time_varying | time_invariant | none

    def validate(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}")
        if self.exposure not in ("neighbor_mean", "neighbor_sum"):
            raise ConfigError(f"unknown exposure {self.exposure!r}")
        if self.noise not in ("time_varying", "time_invariant", "none"):
            raise ConfigError(f"unknown noise regime {self.noise!r}")
        if self.sigma < 0:
            raise ConfigError("sigma must be >= 0")


@dataclass
class ExperimentConfig:
    study: str = "selection"
    n: int = DESK_N
    periods: int = 5
    replications: int = DESK_REPLICATIONS
    base_seed: int = 20240
    jobs: int = 1
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    wrong_graph: WrongGraphConfig = field(default_factory=WrongGraphConfig)
    true_model: TrueModelConfig = field(default_factory=TrueModelConfig)
    kfold_k: int = 10
    bootstrap_resamples: int = 1000
    # identification sweep
    identification_n: int = 500
    identification_reps: int = 100
    identification_edge_probabilities: list[float] = field(
        default_factory=lambda: [0.001, 0.01, 0.05])
    # sparsity sweep
    sparsity_edge_probabilities: list[float] = field(
        default_factory=lambda: [0.05, 0.25, 0.5, 0.75, 0.95])
    # variance study
    variance_n: int = 100
    variance_replications: int = 2000
    render_figures: bool = True

    def validate(self) -> None:
        if self.study not in STUDY_KINDS:
            raise ConfigError(f"unknown study kind {self.study!r}")
        if self.n < 2:
            raise ConfigError("n must be >= 2")
        if self.periods < 1:
            raise ConfigError("periods must be >= 1")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if not 2 <= self.kfold_k <= self.n:
            raise ConfigError("kfold_k must be in [2, n]")
        self.schedule.validate(self.periods)
        self.graph.validate()
        self.wrong_graph.validate()
        self.true_model.validate()
        for p in self.identification_edge_probabilities + self.sparsity_edge_probabilities:
            if not 0.0 <= p <= 1.0:
                raise ConfigError("edge probabilities must be in [0, 1]")

    def apply_paper_scale(self) -> None:
        self.n = PAPER_N
        self.replications = PAPER_REPLICATIONS

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _build_section(cls, data: dict, name: str):
    known = {f for f in cls.__dataclass_fields__}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown keys in {name!r} section: {sorted(extra)}")
    return cls(**data)


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    sections = {
        "schedule": ScheduleConfig,
        "graph": GraphConfig,
        "wrong_graph": WrongGraphConfig,
        "true_model": TrueModelConfig,
    }
    kwargs: dict = {}
    for key, cls in sections.items():
        if key in data:
            raw = data.pop(key)
            if not isinstance(raw, dict):
                raise ConfigError(f"{key!r} section must be an object")
            kwargs[key] = _build_section(cls, raw, key)
    known = set(ExperimentConfig.__dataclass_fields__)
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    kwargs.update(data)
    try:
        cfg = ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return config_from_dict(data)


def default_config(study: str) -> ExperimentConfig:
    cfg = ExperimentConfig(study=study)
    cfg.validate()
    return cfg
