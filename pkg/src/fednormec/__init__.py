"""Fed-alpha-NormEC: differentially private federated learning with smoothed
normalization, error feedback, local updates and partial participation."""

from .baselines import FedAvgConfig, dp_fedavg_round, run_fedavg
from .core import (ClientState, ConfigError, RoundRecord, RunConfig, ServerState, Trajectory,
                   TrainingDiverged, client_round, init_memories, run_training, sample_participation,
                   server_aggregate, server_step, transmit)
from .local_ops import LocalOpConfig, apply_local, local_gd, local_ig, residual_to_update
from .privacy import (PrivacyBudget, Schedule, ScheduleInfeasibleError, calibrate_sigma,
                      experiment_sigma, schedule_from_corollary)
from .problems import FederationProblem, SuiteSpec, make_suite, problem_from_pairs
from .theory import (BoundReport, ProblemConstants, TheoryParams, compute_R, eta_max, noise_bound,
                     theorem1_bound, theoremIG_bound, utility_bound)
from .vecmath import RngStream, gaussian_vector, norm, smoothed_normalize

__version__ = "0.1.0"
