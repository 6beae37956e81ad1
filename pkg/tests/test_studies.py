import json

import numpy as np
import pytest

from rollout_interference import (ConfigError, config_from_dict, default_config,
                                  load_config, run_identification_sweep,
                                  run_selection_study, run_sparsity_sweep,
                                  run_study, run_variance_study, write_outputs)
from rollout_interference.cli import main as cli_main
from rollout_interference.studies import PROCEDURES


def tiny_selection_config(**overrides):
    cfg = default_config("selection")
    cfg.n = 40
    cfg.replications = 6
    cfg.bootstrap_resamples = 200
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg


class TestConfig:
    def test_defaults_validate(self):
        for study in ("selection", "identification", "variance", "sparsity"):
            default_config(study).validate()

    def test_unknown_study(self):
        with pytest.raises(ConfigError):
            config_from_dict({"study": "nope"})

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            config_from_dict({"study": "selection", "bogus": 1})

    def test_unknown_section_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown keys"):
            config_from_dict({"study": "selection", "graph": {"zed": 3}})

    def test_explicit_schedule_length_checked(self):
        with pytest.raises(ConfigError):
            config_from_dict({"study": "selection", "periods": 5,
                              "schedule": {"kind": "explicit", "increments": [0.5]}})

    def test_edge_list_needs_path(self):
        with pytest.raises(ConfigError):
            config_from_dict({"study": "selection", "graph": {"kind": "edge_list"}})

    def test_paper_scale_flips_population(self):
        cfg = default_config("selection")
        cfg.apply_paper_scale()
        assert cfg.n == 1000 and cfg.replications == 500

    def test_hash_stable_and_sensitive(self):
        a, b = default_config("selection"), default_config("selection")
        assert a.config_hash() == b.config_hash()
        b.n = 99
        assert a.config_hash() != b.config_hash()

    def test_load_config_errors(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError, match="JSON"):
            load_config(bad)

    def test_load_roundtrip(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"study": "selection", "n": 50,
                                    "true_model": {"sigma": 0.5}}))
        cfg = load_config(path)
        assert cfg.n == 50
        assert cfg.true_model.sigma == 0.5


class TestSelectionStudy:
    def test_records_schema_and_aggregates(self):
        cfg = tiny_selection_config()
        result = run_selection_study(cfg)
        assert len(result.records) == cfg.replications * len(PROCEDURES)
        for row in result.records:
            assert set(row) == {"rep", "procedure", "chosen", "correct",
                                "tte_hat", "rel_err_pct"}
            assert row["correct"] in (0, 1)
        # aggregates recomputable from the records
        for name in PROCEDURES:
            rows = [r for r in result.records if r["procedure"] == name]
            expected = 100.0 * (1 - np.mean([r["correct"] for r in rows]))
            agg = result.summary["procedures"][name]
            assert agg["incorrect_pct"] == pytest.approx(expected)
            lo, hi = agg["incorrect_ci"]
            assert lo <= agg["incorrect_pct"] <= hi

    def test_noise_free_all_procedures_correct(self):
        cfg = tiny_selection_config()
        cfg.true_model.noise = "none"
        result = run_selection_study(cfg)
        assert all(r["correct"] == 1 for r in result.records)
        assert all(r["rel_err_pct"] <= 1e-6 for r in result.records)

    def test_parallel_matches_serial(self):
        serial = run_selection_study(tiny_selection_config(jobs=1))
        parallel = run_selection_study(tiny_selection_config(jobs=2))
        assert serial.records == parallel.records

    def test_second_order_and_unit_time_kinds_run(self):
        for kind in ("second_order", "unit_time"):
            cfg = tiny_selection_config(replications=3)
            cfg.graph.edge_probability = 0.3
            cfg.true_model.kind = kind
            result = run_selection_study(cfg)
            assert len(result.records) == 3 * len(PROCEDURES)

    def test_summary_embeds_config(self):
        cfg = tiny_selection_config()
        result = run_selection_study(cfg)
        assert result.summary["config"]["n"] == cfg.n
        assert result.summary["config_hash"] == cfg.config_hash()
        assert result.summary["graphs_resampled_per_replication"] is True

    def test_uneven_explicit_schedule(self):
        cfg = tiny_selection_config(replications=4)
        cfg.schedule.kind = "explicit"
        cfg.schedule.increments = [0.01, 0.09, 0.10, 0.15, 0.15]
        result = run_selection_study(cfg)
        assert len(result.records) == 4 * len(PROCEDURES)

    def test_complete_graph_kind(self):
        cfg = tiny_selection_config(replications=3)
        cfg.graph.kind = "complete"
        result = run_selection_study(cfg)
        assert result.summary["graphs_resampled_per_replication"] is False


class TestIdentificationStudy:
    def test_sweep_structure(self):
        cfg = default_config("identification")
        cfg.identification_n = 40
        cfg.identification_reps = 10
        cfg.identification_edge_probabilities = [0.1, 0.4]
        result = run_identification_sweep(cfg)
        assert len(result.records) == 2 * 10 * cfg.periods
        assert len(result.sweep_rows) == 2 * cfg.periods
        for row in result.sweep_rows:
            assert 0.0 <= row["ci_low"] <= row["prob_identified"] <= row["ci_high"] <= 1.0
        # aggregates recomputable from records
        for row in result.sweep_rows:
            recs = [r["identified"] for r in result.records
                    if r["graph_p"] == row["graph_p"] and r["T"] == row["T"]]
            assert row["prob_identified"] == pytest.approx(np.mean(recs))


class TestVarianceStudy:
    def test_zero_noise_zero_variance(self):
        cfg = default_config("variance")
        cfg.variance_n = 30
        cfg.variance_replications = 8
        cfg.true_model.sigma = 0.0
        result = run_variance_study(cfg)
        for cell in result.summary["cells"]:
            assert cell["variance"] == pytest.approx(0.0, abs=1e-16)

    def test_cells_cover_regimes_and_designs(self):
        cfg = default_config("variance")
        cfg.variance_n = 30
        cfg.variance_replications = 10
        result = run_variance_study(cfg)
        keys = {(c["regime"], c["design"], c["T"]) for c in result.summary["cells"]}
        assert ("time_varying", "rollout", cfg.periods) in keys
        assert ("time_invariant", "constant_half", 1) in keys
        rollout_cells = [c for c in result.summary["cells"] if c["design"] == "rollout"]
        assert all(c["spectral_bound"] is not None for c in rollout_cells)


class TestSparsityStudy:
    def test_grid_and_dominance_at_desk_scale(self):
        cfg = default_config("sparsity")
        cfg.replications = 100
        cfg.jobs = 2
        result = run_sparsity_sweep(cfg)
        by_point = {}
        for row in result.sweep_rows:
            by_point.setdefault(row["edge_probability"], {})[row["procedure"]] = \
                row["incorrect_pct"]
        lopo_rates = []
        for p, rates in by_point.items():
            lopo_rates.append(rates["lopo"])
            for other in ("train_first", "train_last", "no_rollout"):
                assert rates["lopo"] <= rates[other] + 1e-9, (p, rates)
        assert max(lopo_rates) - min(lopo_rates) < 20.0

    def test_zero_noise_flat_zero(self):
        cfg = default_config("sparsity")
        cfg.n = 40
        cfg.replications = 4
        cfg.sparsity_edge_probabilities = [0.2, 0.6]
        cfg.true_model.noise = "none"
        result = run_sparsity_sweep(cfg)
        assert all(row["incorrect_pct"] == 0.0 for row in result.sweep_rows)


class TestOutputsAndCli:
    def test_write_outputs_files(self, tmp_path):
        cfg = tiny_selection_config()
        result = run_selection_study(cfg)
        written = write_outputs(result, tmp_path / "out")
        names = {p.name for p in written}
        assert {"records.csv", "summary.json"} <= names
        assert "selection_incorrect_pct.png" in names
        header = (tmp_path / "out" / "records.csv").read_text().splitlines()[0]
        assert header == "rep,procedure,chosen,correct,tte_hat,rel_err_pct"

    def test_byte_identical_reruns(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({
            "study": "selection", "n": 40, "replications": 5,
            "bootstrap_resamples": 100, "base_seed": 77}))
        outs = []
        for run in ("a", "b"):
            code = cli_main(["select", "--config", str(cfg_path),
                             "--out", str(tmp_path / run), "--no-figures"])
            assert code == 0
            outs.append(tmp_path / run)
        for name in ("records.csv", "summary.json"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    def test_seed_override_changes_output(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"study": "selection", "n": 40,
                                        "replications": 4}))
        cli_main(["select", "--config", str(cfg_path), "--seed", "1",
                  "--out", str(tmp_path / "s1"), "--no-figures"])
        cli_main(["select", "--config", str(cfg_path), "--seed", "2",
                  "--out", str(tmp_path / "s2"), "--no-figures"])
        assert (tmp_path / "s1" / "records.csv").read_bytes() != \
            (tmp_path / "s2" / "records.csv").read_bytes()

    def test_cli_sweep_and_figures(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({
            "study": "identification", "identification_n": 30,
            "identification_reps": 5,
            "identification_edge_probabilities": [0.2]}))
        code = cli_main(["identify", "--config", str(cfg_path),
                         "--out", str(tmp_path / "id")])
        assert code == 0
        assert (tmp_path / "id" / "sweep.csv").exists()
        assert (tmp_path / "id" / "identification_probability.png").exists()

    def test_cli_variance_subcommand(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"study": "variance", "variance_n": 20,
                                        "variance_replications": 6}))
        code = cli_main(["variance", "--config", str(cfg_path),
                         "--out", str(tmp_path / "var")])
        assert code == 0
        assert (tmp_path / "var" / "sweep.csv").exists()
        assert (tmp_path / "var" / "variance_by_design.png").exists()

    def test_cli_sparsity_subcommand(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({
            "study": "sparsity", "n": 30, "replications": 3,
            "bootstrap_resamples": 50,
            "sparsity_edge_probabilities": [0.3, 0.7]}))
        code = cli_main(["sparsity", "--config", str(cfg_path),
                         "--out", str(tmp_path / "sp")])
        assert code == 0
        header = (tmp_path / "sp" / "records.csv").read_text().splitlines()[0]
        assert header.startswith("edge_probability,rep,procedure")
        assert (tmp_path / "sp" / "sparsity_selection_error.png").exists()

    def test_cli_rejects_bad_config(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"study": "selection", "bogus": True}))
        code = cli_main(["select", "--config", str(bad), "--out", str(tmp_path / "x")])
        assert code == 2
        assert "config error" in capsys.readouterr().err

    def test_cli_rejects_study_mismatch(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"study": "variance"}))
        code = cli_main(["select", "--config", str(cfg_path),
                         "--out", str(tmp_path / "x")])
        assert code == 2

    def test_run_study_dispatch(self):
        cfg = tiny_selection_config(replications=2)
        result = run_study(cfg)
        assert result.summary["study"] == "selection"
