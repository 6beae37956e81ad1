import numpy as np
import pytest

from rollout_interference import (ExposureMap, ExposureTerm, InterferenceGraph,
                                  ModelSpec, TreatmentPanel)


@pytest.fixture
def pair_plus_isolate() -> InterferenceGraph:
    """Three units: an edge between 0 and 1, unit 2 isolated."""
    return InterferenceGraph(n=3, edge_array=np.array([[0, 1]]))


@pytest.fixture
def pair_plus_isolate_panel() -> TreatmentPanel:
    """Two periods: nobody treated, then units 0 and 1 treated."""
    return TreatmentPanel(z=np.array([[0, 1], [0, 1], [0, 0]], dtype=np.int8))


def neighbor_sum_model(graph: InterferenceGraph, label: str = "neighbor-sum") -> ModelSpec:
    return ModelSpec(label=label, n_units=graph.n,
                     exposure=ExposureMap(terms=(ExposureTerm("neighbor_sum", graph),)))


def neighbor_mean_model(graph: InterferenceGraph, label: str = "neighbor-mean") -> ModelSpec:
    return ModelSpec(label=label, n_units=graph.n,
                     exposure=ExposureMap(terms=(ExposureTerm("neighbor_mean", graph),)))


def no_interference_model(n: int, label: str = "no-interference") -> ModelSpec:
    return ModelSpec(label=label, n_units=n)
