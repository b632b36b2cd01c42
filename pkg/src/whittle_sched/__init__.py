"""Energy-aware regular packet delivery scheduling.

Closed-form restless-bandit indices, a Lagrangian-relaxation lower bound,
exact DP cross-checks on small instances, and a Monte Carlo simulator.
"""

from .core import (
    ClientClass,
    ClientState,
    Scenario,
    ScenarioError,
    client_layout,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
    spawn_rng,
    validate_scenario,
)
from .bandit import (
    SubsidySolution,
    ThresholdPolicy,
    WhittleTable,
    avg_reward_always_passive,
    avg_reward_threshold,
    indexability_report,
    subsidy_solve,
    whittle_index,
    whittle_table,
)
from .relaxation import DualSolution, dual_value, relaxed_bound
from .exactdp import (
    DPResult,
    JointAction,
    average_cost_optimal,
    chain_reward_oracle,
    finite_horizon_dp,
    kernel_step,
    per_slot_cost,
    truncation_equivalence_check,
)
from .sim import (
    Policy,
    SimReport,
    baseline_policies,
    replicate,
    simulate,
    whittle_policy,
    whittle_policy_for,
)

__version__ = "0.1.0"
