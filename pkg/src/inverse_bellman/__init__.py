"""Recover deterministic environment dynamics from trained value functions."""
from .continuous import (ContinuousTrialReport, PiecewiseLinearValue, build_monotone_value,
                         invert_value, invert_values, lemma1_constant,
                         reverse_lipschitz_constant, run_continuous_trial, theorem1_bound)
from .estimator import InverseBellmanDynamics
from .exceptions import (CorruptionError, DimensionError, FormatError, NonConvergenceError,
                         SearchFailureError, ValidationError)
from .experiments import (ContinuousConfig, CurvePoint, Fig1Config, emit_csv, run_fig1,
                          run_theorem1_sweep)
from .gridworld import (GridSpec, RewardSearchResult, find_reward_with_gap, install_reward,
                        make_empty_grid, sample_reward)
from .inference import (InferenceResult, InferredModel, LevelSet, infer_model,
                        infer_next_state, intersect_level_sets, level_set, model_accuracy,
                        prune_by_locality, scanned_value)
from .mdp import (Policy, SolveReport, TabularMDP, ValueTable, bellman_optimality_backup,
                  bellman_policy_backup, perturb_values, state_values, value_iteration)
from .persistence import load_value_table, save_value_table
from .separability import (SeparabilityReport, identifiability_threshold, is_identifiable,
                           perturbed_gap_lower_bound, value_gap)

__version__ = "0.1.0"
