import numpy as np
import pytest

from rollout_interference import (ContrastVector, DesignMatrix, InterferenceGraph,
                                  RolloutSchedule, TreatmentPanel, build_design,
                                  check_mixed_edge_condition,
                                  check_spillover_condition, contrast_vector,
                                  generate_complete, generate_erdos_renyi,
                                  identification_probability,
                                  identification_report, neighbor_sum_spec,
                                  sample_crd, span_membership,
                                  write_identification_csv)
from rollout_interference.estimate import RANK_RTOL
from conftest import neighbor_sum_model


def random_instance(seed: int, zero_start: bool = False):
    """Random graph plus completely randomized roll-out panel."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 14))
    n_periods = int(rng.integers(2, 5))
    g = generate_erdos_renyi(n, float(rng.uniform(0.15, 0.85)), seed=seed)
    raw = rng.uniform(0.05, 0.3, size=n_periods)
    if zero_start:
        raw[0] = 0.0
    raw = raw / max(1.0, raw.sum() + 1e-9)
    panel = sample_crd(n, RolloutSchedule(increments=tuple(raw)), seed=seed + 1)
    return g, panel


class TestSpilloverCondition:
    def test_pair_plus_isolate_has_no_witness(self, pair_plus_isolate,
                                              pair_plus_isolate_panel):
        model = neighbor_sum_model(pair_plus_isolate)
        assert check_spillover_condition(model, pair_plus_isolate_panel) is None

    def test_single_edge_has_witness(self):
        g = InterferenceGraph(n=2, edge_array=np.array([[0, 1]]))
        model = neighbor_sum_model(g)
        panel = TreatmentPanel(z=np.array([[0, 1], [0, 0]], dtype=np.int8))
        witness = check_spillover_condition(model, panel)
        assert witness is not None
        (i, t), (j, t2) = witness
        from rollout_interference import exposure_features
        f_first = exposure_features(model, panel.z[:, t - 1].astype(float))[i, 0]
        f_second = exposure_features(model, panel.z[:, t2 - 1].astype(float))[j, 0]
        assert panel.z[i, t - 1] == 0 and panel.z[j, t2 - 1] == 0
        assert f_first != 0.0 and f_first != f_second
        report = identification_report(model, panel)
        assert report.gram_nonsingular

    def test_all_zero_panel_has_no_witness(self):
        g = generate_complete(4)
        model = neighbor_sum_model(g)
        panel = TreatmentPanel(z=np.zeros((4, 3), dtype=np.int8))
        assert check_spillover_condition(model, panel) is None

    def test_rejects_multi_feature_spec(self, pair_plus_isolate,
                                        pair_plus_isolate_panel):
        from rollout_interference import ExposureMap, ExposureTerm, ModelSpec
        model = ModelSpec(label="two", n_units=3, exposure=ExposureMap(terms=(
            ExposureTerm("neighbor_sum", pair_plus_isolate),
            ExposureTerm("khop2_sum", pair_plus_isolate))))
        with pytest.raises(ValueError):
            check_spillover_condition(model, pair_plus_isolate_panel)

    def test_witness_implies_nonsingular_gram(self):
        # sufficiency of the spillover condition on seeded random instances
        hits = 0
        for seed in range(500):
            g, panel = random_instance(seed)
            model = neighbor_sum_model(g)
            witness = check_spillover_condition(model, panel)
            if witness is None:
                continue
            hits += 1
            design = build_design(model, panel)
            evals = np.linalg.eigvalsh(design.gram)
            assert evals[0] > RANK_RTOL * max(1.0, evals[-1])
        assert hits > 100  # the instance distribution must actually exercise it


class TestMixedEdgeCondition:
    def test_complete_graph_mixed_treatment(self):
        g = generate_complete(10)
        panel = sample_crd(10, RolloutSchedule.even(3, 0.6), seed=1)
        assert check_mixed_edge_condition(g, panel)

    def test_empty_graph_never(self):
        g = InterferenceGraph(n=5, edge_array=np.empty((0, 2), dtype=np.int64))
        panel = sample_crd(5, RolloutSchedule.even(3, 0.6), seed=2)
        assert not check_mixed_edge_condition(g, panel)

    def test_pair_plus_isolate_panel_false(self, pair_plus_isolate,
                                           pair_plus_isolate_panel):
        # both endpoints of the only edge are treated; the untreated unit is isolated
        assert not check_mixed_edge_condition(pair_plus_isolate, pair_plus_isolate_panel)

    def test_implies_spillover_witness_from_untreated_start(self):
        # with an all-control first period, a mixed edge later always yields a witness
        hits = 0
        for seed in range(500):
            g, panel = random_instance(seed, zero_start=True)
            if not check_mixed_edge_condition(g, panel):
                continue
            hits += 1
            model = neighbor_sum_model(g)
            assert check_spillover_condition(model, panel) is not None
        assert hits > 100


class TestSpanMembership:
    def test_identified_contrast(self, pair_plus_isolate, pair_plus_isolate_panel):
        design = build_design(neighbor_sum_model(pair_plus_isolate),
                              pair_plus_isolate_panel)
        member, cert, _ = span_membership(design, ContrastVector(c=np.array([0., 1., 1.])))
        assert member
        assert np.allclose(design.x.T @ cert, [0.0, 1.0, 1.0], atol=1e-10)

    def test_mean_exposure_contrast_not_member(self, pair_plus_isolate,
                                               pair_plus_isolate_panel):
        model = neighbor_sum_model(pair_plus_isolate)
        design = build_design(model, pair_plus_isolate_panel)
        member, cert, _ = span_membership(design, contrast_vector(model, 2))
        assert not member
        assert cert is None

    def test_nonsingular_design_spans_everything(self):
        g = generate_erdos_renyi(12, 0.5, seed=3)
        model = neighbor_sum_model(g)
        panel = sample_crd(12, RolloutSchedule.even(3, 0.6), seed=4)
        design = build_design(model, panel)
        assert identification_report(model, panel).gram_nonsingular
        rng = np.random.default_rng(5)
        for _ in range(5):
            c = ContrastVector(c=rng.normal(size=3))
            member, cert, _ = span_membership(design, c)
            assert member
            assert np.allclose(design.x.T @ cert, c.c, atol=1e-8)

    def test_invariant_to_row_permutation_and_duplication(self, pair_plus_isolate,
                                                          pair_plus_isolate_panel):
        model = neighbor_sum_model(pair_plus_isolate)
        design = build_design(model, pair_plus_isolate_panel)
        c_in = ContrastVector(c=np.array([0.0, 1.0, 1.0]))
        c_out = contrast_vector(model, 2)
        rng = np.random.default_rng(6)
        for variant in (design.x[rng.permutation(6)],
                        np.vstack([design.x, design.x[:3]])):
            alt = DesignMatrix(x=variant, n_units=design.n_units,
                               n_periods=design.n_periods, slices=design.slices)
            assert span_membership(alt, c_in)[0]
            assert not span_membership(alt, c_out)[0]

    def test_report_nonsingular_implies_member(self):
        for seed in range(50):
            g, panel = random_instance(seed)
            report = identification_report(neighbor_sum_model(g), panel)
            if report.gram_nonsingular:
                assert report.span_member


class TestIdentificationProbability:
    def test_complete_graph_certain(self):
        cells = identification_probability(RolloutSchedule.even(3, 0.6),
                                           n=20, graph_p=1.0, reps=10, seed=1)
        by_t = {c.n_periods: c.prob_identified for c in cells}
        assert by_t[2] == 1.0 and by_t[3] == 1.0

    def test_nothing_treated_never_identified(self):
        cells = identification_probability(RolloutSchedule(increments=(0.0, 0.0)),
                                           n=15, graph_p=0.5, reps=10, seed=2)
        assert all(c.prob_identified == 0.0 for c in cells)

    def test_nothing_treated_no_interference_spec(self):
        from rollout_interference import ModelSpec
        cells = identification_probability(
            RolloutSchedule(increments=(0.0,)), n=15, graph_p=0.5, reps=10, seed=2,
            make_spec=lambda g: ModelSpec(label="no-interference", n_units=g.n))
        assert all(c.prob_identified == 0.0 for c in cells)

    def test_sparse_curve_monotone_trend(self):
        cells = identification_probability(RolloutSchedule.even(5, 0.5),
                                           n=50, graph_p=0.01, reps=100, seed=3)
        by_t = {c.n_periods: c.prob_identified for c in cells}
        assert by_t[5] >= by_t[1]

    def test_ci_contains_point_and_clips(self):
        cells = identification_probability(RolloutSchedule.even(2, 0.4),
                                           n=30, graph_p=0.3, reps=25, seed=4)
        for cell in cells:
            assert 0.0 <= cell.ci_low <= cell.prob_identified <= cell.ci_high <= 1.0

    def test_csv_output(self, tmp_path):
        cells = identification_probability(RolloutSchedule.even(2, 0.4),
                                           n=10, graph_p=0.5, reps=5, seed=5)
        path = tmp_path / "sweep.csv"
        write_identification_csv(cells, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "graph_p,T,prob_identified,ci_low,ci_high"
        assert len(lines) == 3
