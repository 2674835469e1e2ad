"""Fairness-aware seed allocation for information spread on community networks."""

from .model import (CommunityLabels, DCSBMParams, Network, generate_network,
                    labels_from_sizes, normalize_theta, sample_labels,
                    sbm_weight_matrix, validate)
from .objective import (ObjectiveConfig, ObjectiveValue, entropy, gini,
                        normalize_coverage, objective_gradient,
                        objective_value, reduce_objective)
from .optimizer import (SeedAllocation, SolverOptions, UniqueClasses,
                        baseline_allocation, collapse_classes, expand_seeds,
                        project_box_budget, round_allocation, solve_relaxed)
from .spread import (ActivationTrace, CoverageSummary, SpreadOperator,
                     TransmissionSpec, approx_by_community, approx_total,
                     build_psi, coverage, exact_activation_probs,
                     mc_activation_probs, simulate_ic)
from .estimate import (EstimatedParams, SpectralEmbedding, cluster,
                       estimate_labels, estimate_params, label_agreement,
                       refine_labels, score_embed)
from .netio import extract_lcc, read_edge_list
from .experiment import (ExperimentConfig, ModelSpec, NetworkSource,
                         load_config, run_experiment, seed_budget,
                         write_results)

__version__ = "0.1.0"
