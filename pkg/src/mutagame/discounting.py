"""Intertemporal valuation: discounted and risk-adjusted utility, endogenous
discount paths, payoff variance, NPV and breakeven horizons.

Two discount conventions coexist on purpose and are never unified:
game utilities use multiplicative factors (delta ** t, or the exponential
path exp(-integral of rho + eta)), while investment NPV uses the compound
per-period rate (1 + rho + eta(t)) ** -t.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError


def validate_discount(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise ConfigurationError(
            f"discount factor must lie strictly inside (0, 1), got {delta}"
        )


@dataclass(frozen=True)
class NoisePath:
    """Baseline discount rate plus a piecewise-constant institutional noise path.

    ``segments`` is a tuple of (start_round, value) pairs with strictly
    increasing starts beginning at 0; each value is the nonnegative noise
    rate eta(t) in force from its start until the next segment begins.
    """

    baseline_rate: float
    segments: tuple[tuple[int, float], ...] = ((0, 0.0),)

    def __post_init__(self) -> None:
        if self.baseline_rate < 0.0:
            raise ConfigurationError(
                f"baseline rate must be >= 0, got {self.baseline_rate}"
            )
        if not self.segments:
            raise ConfigurationError("noise path needs at least one segment")
        if self.segments[0][0] != 0:
            raise ConfigurationError("first noise segment must start at round 0")
        previous = -1
        for start, value in self.segments:
            if start <= previous:
                raise ConfigurationError(
                    "noise segment starts must be strictly increasing"
                )
            if value < 0.0:
                raise ConfigurationError(f"noise value must be >= 0, got {value}")
            previous = start
        object.__setattr__(self, "segments", tuple((int(s), float(v)) for s, v in self.segments))

    @classmethod
    def constant(cls, baseline_rate: float, eta: float = 0.0) -> "NoisePath":
        return cls(baseline_rate=baseline_rate, segments=((0, eta),))

    def eta_at(self, t: float) -> float:
        """Noise rate in force at time t."""
        starts = [s for s, _ in self.segments]
        idx = bisect_right(starts, t) - 1
        return self.segments[max(idx, 0)][1]

    def rate_at(self, t: float) -> float:
        return self.baseline_rate + self.eta_at(t)

    def cumulative_rate(self, t: float) -> float:
        """Exact integral of (baseline + eta(s)) over [0, t)."""
        if t <= 0:
            return 0.0
        total = 0.0
        for i, (start, value) in enumerate(self.segments):
            if start >= t:
                break
            end = self.segments[i + 1][0] if i + 1 < len(self.segments) else t
            length = min(end, t) - start
            if length > 0:
                total += (self.baseline_rate + value) * length
        return total


ZERO_NOISE = NoisePath(0.0)


@dataclass(frozen=True)
class InvestmentPlan:
    """Upfront outlay followed by expected per-period returns for t = 1..T."""

    upfront_cost: float
    expected_returns: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.upfront_cost < 0.0:
            raise ConfigurationError(
                f"upfront cost must be >= 0, got {self.upfront_cost}"
            )
        if len(self.expected_returns) < 1:
            raise ConfigurationError("investment plan needs at least one period")
        if not all(math.isfinite(r) for r in self.expected_returns):
            raise ConfigurationError("expected returns must be finite")
        object.__setattr__(
            self, "expected_returns", tuple(float(r) for r in self.expected_returns)
        )

    @property
    def horizon(self) -> int:
        return len(self.expected_returns)


@dataclass(frozen=True)
class PayoffVariance:
    """Unbiased sample variance; degenerate marks single-sample inputs."""

    sigma2: float
    sigma: float
    degenerate: bool = False


def discounted_utility(payoffs: Sequence[float], delta: float) -> float:
    """Sum of delta**t * payoff[t] over the truncated horizon, t from 0.

    Accumulates iteratively with the same scheme as risk_adjusted_utility so
    the two agree exactly when the volatility penalty vanishes.
    """
    validate_discount(delta)
    total = 0.0
    factor = 1.0
    for value in payoffs:
        total += factor * float(value)
        factor *= delta
    return total


def truncation_horizon(delta: float, payoff_scale: float, tol: float = 1e-9) -> int:
    """Horizon T such that the tail beyond T of a constant stream of magnitude
    ``payoff_scale`` contributes less than ``tol`` to the discounted sum."""
    validate_discount(delta)
    if payoff_scale <= 0.0 or tol <= 0.0:
        raise ConfigurationError("payoff_scale and tol must be positive")
    return max(1, math.ceil(math.log(tol * (1.0 - delta) / payoff_scale) / math.log(delta)))


def payoff_variance(samples: Sequence[float]) -> PayoffVariance:
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise ConfigurationError("variance of an empty sample set is undefined")
    if arr.size == 1:
        return PayoffVariance(sigma2=0.0, sigma=0.0, degenerate=True)
    sigma2 = float(np.var(arr, ddof=1))
    return PayoffVariance(sigma2=sigma2, sigma=math.sqrt(sigma2))


def risk_adjusted_utility(
    samples_by_round: Sequence[Sequence[float]],
    delta: float,
    eta_risk: float,
) -> float:
    """Discounted sum of per-round (mean - eta_risk * sample std) penalties.

    The volatility penalty sits inside the per-round sum so the quantity
    stays well defined at any horizon; with eta_risk = 0 or zero variance it
    reduces to the discounted utility of the round means.
    """
    validate_discount(delta)
    if eta_risk < 0.0:
        raise ConfigurationError(f"risk aversion must be >= 0, got {eta_risk}")
    total = 0.0
    factor = 1.0
    for t, samples in enumerate(samples_by_round):
        arr = np.asarray(samples, dtype=float)
        if arr.size == 0:
            raise ConfigurationError(f"round {t} has an empty payoff sample set")
        penalty = eta_risk * payoff_variance(arr).sigma
        total += factor * (float(arr.mean()) - penalty)
        factor *= delta
    return total


def endogenous_discount_path(noise: NoisePath, horizon: int) -> np.ndarray:
    """Discount weights exp(-integral_0^t of (rho + eta(s)) ds) for t = 0..horizon.

    Exact for piecewise-constant noise; the path starts at 1 and never
    increases.
    """
    if horizon < 0:
        raise ConfigurationError(f"horizon must be >= 0, got {horizon}")
    return np.array(
        [math.exp(-noise.cumulative_rate(t)) for t in range(horizon + 1)], dtype=float
    )


def npv(plan: InvestmentPlan, noise: NoisePath = ZERO_NOISE) -> float:
    """Compound-rate net present value:
    sum over t = 1..T of E[R_t] / (1 + rho + eta(t))**t, minus the upfront cost.
    """
    total = -plan.upfront_cost
    for t, expected_return in enumerate(plan.expected_returns, start=1):
        total += expected_return / (1.0 + noise.rate_at(t)) ** t
    return float(total)


def breakeven_horizon(
    per_period_return: float,
    upfront_cost: float,
    noise: NoisePath = ZERO_NOISE,
    max_horizon: int = 1000,
) -> int | None:
    """Smallest horizon T <= max_horizon with nonnegative NPV, or None."""
    if per_period_return <= 0.0:
        raise ConfigurationError(
            f"per-period return must be positive, got {per_period_return}"
        )
    if upfront_cost < 0.0:
        raise ConfigurationError(f"upfront cost must be >= 0, got {upfront_cost}")
    running = -float(upfront_cost)
    for t in range(1, max_horizon + 1):
        running += per_period_return / (1.0 + noise.rate_at(t)) ** t
        if running >= 0.0:
            return t
    return None
