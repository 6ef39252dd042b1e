"""Monte Carlo engine for the repeated mining game under protocol dynamics.

Each replica owns an independent random stream derived from
``SeedSequence([master_seed, replica_index])``, so batches are bit-identical
regardless of thread count. Per-round draw order is fixed: action resolution
(no draws), meta influence on the kernel row (no draws), protocol step (one
draw), payoff-scale perturbation (one draw, when enabled), block lottery
(one draw, when enabled).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .discounting import (
    NoisePath,
    InvestmentPlan,
    discounted_utility,
    endogenous_discount_path,
    risk_adjusted_utility,
    validate_discount,
)
from .errors import ConfigurationError, MutagameError, ScenarioValidationError
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
    ThetaProcess,
    TransitionKernel,
    sample_from_cumulative,
    sample_theta,
    step_protocol,
)

THREADS_ENV_VAR = "MUTAGAME_THREADS"


@dataclass(frozen=True)
class MetaModelConfig:
    """Second-tier contest over the kernel row.

    ``influence_strength`` (beta) bounds the per-round shift of the kernel
    row; it must stay within [0, 1] so blended rows remain stochastic.
    ``contest_exponent`` is the Tullock exponent applied to hash-weighted
    budgets.
    """

    enabled: bool = False
    influence_strength: float = 0.0
    contest_exponent: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.influence_strength <= 1.0:
            raise ConfigurationError(
                f"influence_strength must lie in [0, 1], got {self.influence_strength}"
            )
        if self.contest_exponent <= 0.0:
            raise ConfigurationError(
                f"contest_exponent must be positive, got {self.contest_exponent}"
            )


@dataclass(frozen=True)
class Miner:
    share: float
    strategy: StrategyKind


@dataclass(frozen=True)
class Scenario:
    """Complete experiment description; immutable and validated on construction."""

    miners: tuple[Miner, ...]
    game: StageGameSpec
    kernel: TransitionKernel
    initial_state: int
    horizon: int
    delta: float
    risk_aversion: float = 0.0
    meta: MetaModelConfig = MetaModelConfig()
    replica_count: int = 1
    master_seed: int = 0
    trigger_on_mutation: bool = False
    noise: NoisePath | None = None
    theta: ThetaProcess | None = None
    spiral_threshold: float = 0.5
    post_mutation_value: float = 0.0
    investment: InvestmentPlan | None = None
    name: str = "scenario"

    def __post_init__(self) -> None:
        errors = self.validate()
        if errors:
            raise ScenarioValidationError(errors)

    def validate(self) -> list[str]:
        errors: list[str] = []
        n = len(self.miners)
        if n < 1:
            errors.append("miners: at least one miner required")
            return errors
        try:
            validate_shares([m.share for m in self.miners])
        except ConfigurationError as exc:
            errors.append(f"miners: {exc}")
        if self.game.n != n:
            errors.append(
                f"game: payoff tables cover {self.game.n} miners but scenario has {n}"
            )
        if self.kernel.size != self.game.num_states:
            errors.append(
                f"kernel: {self.kernel.size} states but game defines "
                f"{self.game.num_states}"
            )
        if not 0 <= self.initial_state < self.kernel.size:
            errors.append(
                f"initial_state: {self.initial_state} out of range "
                f"[0, {self.kernel.size})"
            )
        if self.horizon < 1:
            errors.append(f"horizon: must be >= 1, got {self.horizon}")
        if self.replica_count < 1:
            errors.append(f"replica_count: must be >= 1, got {self.replica_count}")
        if self.master_seed < 0:
            errors.append(f"master_seed: must be >= 0, got {self.master_seed}")
        try:
            validate_discount(self.delta)
        except ConfigurationError as exc:
            errors.append(f"discount.delta: {exc}")
        if self.risk_aversion < 0.0:
            errors.append(
                f"risk_aversion.eta: must be >= 0, got {self.risk_aversion}"
            )
        if not 0.0 < self.spiral_threshold < 1.0:
            errors.append(
                f"spiral_threshold: must lie in (0, 1), got {self.spiral_threshold}"
            )
        for i, miner in enumerate(self.miners):
            preferred = miner.strategy.preferred_state
            if preferred is not None and preferred >= self.kernel.size:
                errors.append(
                    f"miners[{i}]: preferred_state {preferred} out of range "
                    f"[0, {self.kernel.size})"
                )
        return errors

    @property
    def n(self) -> int:
        return len(self.miners)

    def meta_investors(self) -> list[tuple[float, int, float]]:
        """(meta_budget, preferred_state, hash share) of every MetaInvestor."""
        return [
            (m.strategy.meta_budget, m.strategy.preferred_state, m.share)
            for m in self.miners
            if m.strategy.tag is StrategyTag.META_INVESTOR
        ]


@dataclass(frozen=True)
class RoundRecord:
    """One simulated round: state in force, actions, realized payoffs."""

    t: int
    state: int
    theta: float | None
    profile: tuple[Action, ...]
    payoffs: tuple[float, ...]
    kernel_row: tuple[float, ...]
    mutated: bool
    lottery_winner: int | None = None


@dataclass
class ReplicaTrace:
    replica_index: int
    records: list[RoundRecord]
    discounted_utility: tuple[float, ...] = ()
    risk_adjusted_utility: tuple[float, ...] = ()
    endogenous_utility: tuple[float, ...] | None = None
    mutation_count: int = 0

    def cooperation_fractions(self) -> list[float]:
        n = len(self.records[0].profile)
        return [
            sum(1 for a in record.profile if a is Action.COOPERATE) / n
            for record in self.records
        ]

    @property
    def final_cooperation_fraction(self) -> float:
        return self.cooperation_fractions()[-1]


@dataclass(frozen=True)
class SpiralReport:
    """Permanent-collapse onset: the first round from which the cooperating
    fraction stays below the threshold for every remaining round."""

    onset_round: int | None
    final_cooperation_fraction: float


@dataclass(frozen=True)
class BatchSummary:
    replica_count: int
    mean_utility: tuple[float, ...]
    std_utility: tuple[float, ...]
    risk_adjusted_utility: tuple[float, ...]
    mean_cooperation_duration: float
    spiral_frequency: float
    mean_final_cooperation_fraction: float
    mutation_count_mean: float
    mutation_count_std: float
    mutation_count_min: int
    mutation_count_max: int
    mean_endogenous_utility: tuple[float, ...] | None = None

    def to_dict(self) -> dict:
        out = {
            "replica_count": self.replica_count,
            "mean_utility": list(self.mean_utility),
            "std_utility": list(self.std_utility),
            "risk_adjusted_utility": list(self.risk_adjusted_utility),
            "mean_cooperation_duration": self.mean_cooperation_duration,
            "spiral_frequency": self.spiral_frequency,
            "mean_final_cooperation_fraction": self.mean_final_cooperation_fraction,
            "mutation_count_mean": self.mutation_count_mean,
            "mutation_count_std": self.mutation_count_std,
            "mutation_count_min": self.mutation_count_min,
            "mutation_count_max": self.mutation_count_max,
        }
        if self.mean_endogenous_utility is not None:
            out["mean_endogenous_utility"] = list(self.mean_endogenous_utility)
        return out


def replica_rng(master_seed: int, replica_index: int) -> np.random.Generator:
    """Stream splitting rule: PCG64 seeded by SeedSequence([master_seed, index])."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([master_seed, replica_index]))
    )


def apply_meta_influence(
    kernel_row,
    investors: list[tuple[float, int, float]],
    config: MetaModelConfig,
) -> np.ndarray:
    """Blend the kernel row toward the contest outcome of meta investors.

    Contest weights are hash-weighted budgets raised to the contest exponent
    and normalized over states actually receiving effort. The blend
    coefficient is beta times total invested effort (capped at 1), so the
    adjusted row stays a convex combination of two distributions.
    """
    row = np.array(kernel_row, dtype=float)
    if not config.enabled or not investors or config.influence_strength == 0.0:
        return row
    efforts = np.zeros(len(row))
    total = 0.0
    for budget, preferred, share in investors:
        if not 0.0 <= budget <= 1.0:
            raise ConfigurationError(f"meta budget must lie in [0, 1], got {budget}")
        if not 0 <= preferred < len(row):
            raise ConfigurationError(
                f"preferred state {preferred} out of range [0, {len(row)})"
            )
        effort = share * budget
        efforts[preferred] += effort
        total += effort
    if total <= 0.0:
        return row
    weights = efforts ** config.contest_exponent
    weight_sum = weights.sum()
    if weight_sum <= 0.0:  # exponent underflowed every effort
        return row
    weights /= weight_sum
    lam = min(config.influence_strength * min(total, 1.0), 1.0)
    return (1.0 - lam) * row + lam * weights


def run_replica(scenario: Scenario, replica_index: int) -> ReplicaTrace:
    """Run one replica; identical (scenario, replica_index) gives an identical trace.

    Per round t the state in force is P_t; the protocol step taken during
    round t yields P_{t+1}, whose change is observable to strategies from
    round t+2 on (mutation flags describe completed rounds). Payoffs are the
    table row at (P_t, profile), scaled by the clamped theta draw when a
    perturbation process is attached, reduced by each MetaInvestor's budget
    fraction while the meta game is enabled, and zeroed for lottery losers
    in lottery mode.
    """
    rng = replica_rng(scenario.master_seed, replica_index)
    game = scenario.game
    n = scenario.n
    strategies = [m.strategy for m in scenario.miners]
    shares = [m.share for m in scenario.miners]
    investors = scenario.meta_investors()
    meta_enabled = scenario.meta.enabled and bool(investors)
    budget_keep = np.ones(n)
    if meta_enabled:
        for i, miner in enumerate(scenario.miners):
            if miner.strategy.tag is StrategyTag.META_INVESTOR:
                budget_keep[i] = 1.0 - miner.strategy.meta_budget

    history = PlayHistory(n)
    records: list[RoundRecord] = []
    payoff_matrix = np.empty((scenario.horizon, n))
    state = scenario.initial_state
    previous_state: int | None = None

    for t in range(scenario.horizon):
        mutated = previous_state is not None and state != previous_state
        profile = resolve_actions(
            strategies,
            history,
            t,
            game=game,
            state=state,
            trigger_on_mutation=scenario.trigger_on_mutation,
            discount=scenario.delta,
        )
        if meta_enabled:
            effective_row = apply_meta_influence(
                scenario.kernel.row(state), investors, scenario.meta
            )
            next_state = sample_from_cumulative(np.cumsum(effective_row), rng)
        else:
            effective_row = scenario.kernel.row(state)
            next_state = step_protocol(scenario.kernel, state, rng)
        theta = sample_theta(scenario.theta, rng) if scenario.theta is not None else None

        payoffs = stage_payoffs(game, state, profile)
        if theta is not None:
            scale = max(0.0, theta) if scenario.theta.clamp else theta
            payoffs = payoffs * scale
        if meta_enabled:
            payoffs = payoffs * budget_keep
        winner: int | None = None
        if game.lottery_mode:
            winner = block_lottery(shares, rng)
            mask = np.zeros(n)
            mask[winner] = 1.0
            payoffs = payoffs * mask

        records.append(
            RoundRecord(
                t=t,
                state=state,
                theta=theta,
                profile=tuple(profile),
                payoffs=tuple(float(p) for p in payoffs),
                kernel_row=tuple(float(p) for p in effective_row),
                mutated=mutated,
                lottery_winner=winner,
            )
        )
        payoff_matrix[t] = payoffs
        history.append(profile, mutated)
        previous_state = state
        state = next_state

    discounted = tuple(
        discounted_utility(payoff_matrix[:, i], scenario.delta) for i in range(n)
    )
    endogenous: tuple[float, ...] | None = None
    if scenario.noise is not None:
        path = endogenous_discount_path(scenario.noise, scenario.horizon - 1)
        endogenous = tuple(float(v) for v in path @ payoff_matrix)
    return ReplicaTrace(
        replica_index=replica_index,
        records=records,
        discounted_utility=discounted,
        # One sample per round makes the volatility penalty vanish, so the
        # within-replica risk-adjusted utility coincides with the plain one.
        risk_adjusted_utility=discounted,
        endogenous_utility=endogenous,
        mutation_count=sum(1 for r in records if r.mutated),
    )


def detect_spiral(trace: ReplicaTrace, threshold: float = 0.5) -> SpiralReport:
    """Find the permanent-collapse onset, ignoring transient dips.

    The onset is the first round t such that the cooperating fraction is
    below the threshold at every round >= t; None when the trace ends in a
    round at or above the threshold.
    """
    fractions = trace.cooperation_fractions()
    last_good = -1
    for t in range(len(fractions) - 1, -1, -1):
        if fractions[t] >= threshold:
            last_good = t
            break
    onset = None if last_good == len(fractions) - 1 else last_good + 1
    return SpiralReport(onset_round=onset, final_cooperation_fraction=fractions[-1])


def cooperation_duration(trace: ReplicaTrace, threshold: float = 0.5) -> int:
    """Rounds before the spiral onset; the full horizon when no spiral occurs."""
    report = detect_spiral(trace, threshold)
    return report.onset_round if report.onset_round is not None else len(trace.records)


def _thread_count() -> int:
    raw = os.environ.get(THREADS_ENV_VAR, "") or "1"
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigurationError(
            f"{THREADS_ENV_VAR} must be an integer, got {raw!r}"
        ) from None


def run_batch(
    scenario: Scenario, max_workers: int | None = None
) -> tuple[BatchSummary, list[ReplicaTrace]]:
    """Run every replica and aggregate; output is independent of scheduling.

    ``max_workers`` defaults to the MUTAGAME_THREADS environment variable
    (1 when unset). Replicas are seeded independently, so any worker count
    produces the same traces, ordered by replica index.
    """
    workers = max_workers if max_workers is not None else _thread_count()
    indices = range(scenario.replica_count)

    def indexed(replica_index: int) -> ReplicaTrace:
        try:
            return run_replica(scenario, replica_index)
        except ConfigurationError as exc:
            raise ConfigurationError(f"replica {replica_index}: {exc}") from exc
        except Exception as exc:
            raise MutagameError(f"replica {replica_index} failed: {exc!r}") from exc

    if workers <= 1:
        traces = [indexed(i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(indexed, indices))
    return summarize_batch(scenario, traces), traces


def summarize_batch(scenario: Scenario, traces: list[ReplicaTrace]) -> BatchSummary:
    """Aggregate statistics over replica traces (all recomputable from them)."""
    if not traces:
        raise ConfigurationError("cannot summarize an empty batch")
    n = scenario.n
    utility = np.array([t.discounted_utility for t in traces])
    mean_utility = utility.mean(axis=0)
    if len(traces) > 1:
        std_utility = utility.std(axis=0, ddof=1)
    else:
        std_utility = np.zeros(n)

    # Cross-replica per-round samples give the volatility penalty its
    # Monte Carlo meaning; within one replica it is degenerate.
    cube = np.array([[r.payoffs for r in trace.records] for trace in traces])
    risk_adjusted = tuple(
        risk_adjusted_utility(cube[:, :, i].T, scenario.delta, scenario.risk_aversion)
        for i in range(n)
    )

    durations = []
    spirals = 0
    finals = []
    for trace in traces:
        report = detect_spiral(trace, scenario.spiral_threshold)
        if report.onset_round is not None:
            spirals += 1
        durations.append(
            report.onset_round if report.onset_round is not None else scenario.horizon
        )
        finals.append(report.final_cooperation_fraction)
    mutations = np.array([t.mutation_count for t in traces])

    endogenous_mean: tuple[float, ...] | None = None
    if scenario.noise is not None:
        endo = np.array([t.endogenous_utility for t in traces])
        endogenous_mean = tuple(float(v) for v in endo.mean(axis=0))

    return BatchSummary(
        replica_count=len(traces),
        mean_utility=tuple(float(v) for v in mean_utility),
        std_utility=tuple(float(v) for v in std_utility),
        risk_adjusted_utility=risk_adjusted,
        mean_cooperation_duration=float(np.mean(durations)),
        spiral_frequency=float(spirals / len(traces)),
        mean_final_cooperation_fraction=float(np.mean(finals)),
        mutation_count_mean=float(mutations.mean()),
        mutation_count_std=float(mutations.std(ddof=1)) if len(traces) > 1 else 0.0,
        mutation_count_min=int(mutations.min()),
        mutation_count_max=int(mutations.max()),
        mean_endogenous_utility=endogenous_mean,
    )
