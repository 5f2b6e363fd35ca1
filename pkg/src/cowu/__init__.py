"""Query-timing analysis of content-based wake-up (CoWu) data collection."""
from .accuracy import (
    AccuracyResult,
    ConfigError,
    ScenarioConfig,
    gamma_cowu,
    gamma_cowu_curve,
    gamma_cowu_upper_bound,
    gamma_round_robin,
    mismatch_curve,
    optimize_zeta,
    wake_count_distribution,
)
from .csma import CsmaParams, build_transition_matrix, success_distribution
from .energy import EnergyModel, calibrate_p, expected_cowu_energy
from .process import (
    RangeQuery,
    TransitionMatrix,
    build_birth_death,
    matrix_power,
    range_survival_probs,
    stationary,
    wake_probability,
)
from .simulator import run_campaign, run_cowu_sweep, simulate_cowu_round, simulate_round_robin_round
