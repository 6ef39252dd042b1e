"""mutagame: deterministic repeated mining-game simulation and analysis.

A seedable Monte Carlo engine for a repeated miner game whose payoff tables
are indexed by a protocol state evolving under a Markov transition kernel,
plus the analytic toolkit around it: pure Nash enumeration, grim-trigger
thresholds, mutation-adjusted cooperation conditions, risk-adjusted and
endogenous discounting, and NPV/breakeven valuation.
"""

from .discounting import (
    InvestmentPlan,
    NoisePath,
    PayoffVariance,
    ZERO_NOISE,
    breakeven_horizon,
    discounted_utility,
    endogenous_discount_path,
    npv,
    payoff_variance,
    risk_adjusted_utility,
    truncation_horizon,
)
from .equilibrium import (
    CooperationCondition,
    GrimThreshold,
    NormalFormGame,
    cooperation_condition,
    effective_coop_value,
    grim_cooperation_verdict,
    grim_trigger_threshold,
    mixed_nash_2x2,
    pure_nash,
)
from .errors import (
    CapacityError,
    ConfigurationError,
    MutagameError,
    ScenarioValidationError,
)
from .game import (
    Action,
    PlayHistory,
    StageGameSpec,
    StrategyKind,
    StrategyTag,
    block_lottery,
    resolve_actions,
    stage_payoffs,
    validate_shares,
)
from .protocol import (
    KernelEntropy,
    MutationRate,
    ThetaProcess,
    TransitionKernel,
    integrity,
    kernel_entropy,
    mutation_rate,
    sample_theta,
    stationary_distribution,
    step_protocol,
)
from .scenario import apply_overrides, load_scenario, parse_document
from .simulate import (
    BatchSummary,
    MetaModelConfig,
    Miner,
    ReplicaTrace,
    Scenario,
    SpiralReport,
    apply_meta_influence,
    cooperation_duration,
    detect_spiral,
    replica_rng,
    run_batch,
    run_replica,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "BatchSummary",
    "CapacityError",
    "ConfigurationError",
    "CooperationCondition",
    "GrimThreshold",
    "InvestmentPlan",
    "KernelEntropy",
    "MetaModelConfig",
    "Miner",
    "MutagameError",
    "MutationRate",
    "NoisePath",
    "NormalFormGame",
    "PayoffVariance",
    "PlayHistory",
    "ReplicaTrace",
    "Scenario",
    "ScenarioValidationError",
    "SpiralReport",
    "StageGameSpec",
    "StrategyKind",
    "StrategyTag",
    "ThetaProcess",
    "TransitionKernel",
    "ZERO_NOISE",
    "apply_meta_influence",
    "apply_overrides",
    "block_lottery",
    "breakeven_horizon",
    "cooperation_condition",
    "cooperation_duration",
    "detect_spiral",
    "discounted_utility",
    "effective_coop_value",
    "endogenous_discount_path",
    "grim_cooperation_verdict",
    "grim_trigger_threshold",
    "integrity",
    "kernel_entropy",
    "load_scenario",
    "mixed_nash_2x2",
    "mutation_rate",
    "npv",
    "parse_document",
    "payoff_variance",
    "pure_nash",
    "replica_rng",
    "resolve_actions",
    "risk_adjusted_utility",
    "run_batch",
    "run_replica",
    "sample_theta",
    "stage_payoffs",
    "stationary_distribution",
    "step_protocol",
    "truncation_horizon",
    "validate_shares",
]
