"""Estimation, identification checking, and model selection for causal
experiments under network interference with staggered roll-out designs."""

from .graphs import (InterferenceGraph, generate_complete, generate_edge_subgraph,
                     generate_erdos_renyi, khop_neighbors, read_edge_list)
from .rollout import (RolloutSchedule, TreatmentPanel, marginal_prob_bernoulli,
                      marginal_prob_crd, sample_bernoulli, sample_constant_fraction,
                      sample_crd)
from .outcomes import (ExposureMap, ExposureTerm, ModelSpec, NoiseSpec,
                       OutcomePanel, TrueParams, exposure_features,
                       simulate_panel, true_tte)
from .estimate import (ContrastVector, DesignMatrix, FitResult, TteEstimate,
                       build_design, contrast_vector, estimate_tte, fit, fit_tte,
                       mspe, span_membership, tte_error_bound)
from .identify import (IdentificationCell, IdentificationReport,
                       check_mixed_edge_condition, check_spillover_condition,
                       identification_probability, identification_records,
                       identification_report, neighbor_sum_spec,
                       write_identification_csv)
from .selection import (CandidateSet, SelectionReport, lopo, no_rollout,
                        pooled_kfold, relative_error_pct, train_first, train_last)
from .config import (ConfigError, ExperimentConfig, config_from_dict,
                     default_config, load_config)
from .studies import (StudyResult, run_identification_sweep, run_selection_study,
                      run_sparsity_sweep, run_study, run_variance_study,
                      write_outputs)

__version__ = "0.1.0"
