"""Intertemporal valuation: utilities, discount paths, variance, NPV."""

import math

import numpy as np
import pytest

from mutagame import (
    ConfigurationError,
    InvestmentPlan,
    NoisePath,
    ZERO_NOISE,
    breakeven_horizon,
    discounted_utility,
    endogenous_discount_path,
    npv,
    payoff_variance,
    risk_adjusted_utility,
    truncation_horizon,
)


def test_geometric_series_value():
    assert discounted_utility([1.0] * 501, 0.9) == pytest.approx(10.0, abs=1e-9)


def test_single_payoff_undiscounted():
    assert discounted_utility([5.0], 0.5) == 5.0


def test_hand_evaluated_sum():
    # 1 + 0.5*2 + 0.25*3
    assert discounted_utility([1.0, 2.0, 3.0], 0.5) == pytest.approx(2.75)


def test_empty_payoffs():
    assert discounted_utility([], 0.9) == 0.0


def test_discount_bounds_rejected():
    for bad in (0.0, 1.0, -0.1, 1.1):
        with pytest.raises(ConfigurationError):
            discounted_utility([1.0], bad)


@pytest.mark.parametrize("delta", [0.5, 0.9, 0.99])
@pytest.mark.parametrize("payoff", [1.0, 7.0])
@pytest.mark.parametrize("horizon", [5, 20, 60])
def test_truncation_bound(delta, payoff, horizon):
    total = discounted_utility([payoff] * (horizon + 1), delta)
    closed = payoff / (1.0 - delta)
    bound = delta ** (horizon + 1) * abs(payoff) / (1.0 - delta)
    # small absolute slack for accumulated rounding when the bound is tiny
    assert abs(total - closed) <= bound + 64 * np.finfo(float).eps * abs(closed)


def test_truncation_horizon_hits_target_tolerance():
    for delta in (0.5, 0.9, 0.99):
        for payoff in (1.0, 7.0):
            horizon = truncation_horizon(delta, payoff, tol=1e-9)
            total = discounted_utility([payoff] * (horizon + 1), delta)
            assert abs(total - payoff / (1.0 - delta)) <= 1e-9


def test_risk_adjustment_zero_variance_reduces_to_plain():
    samples = [[2.0, 2.0, 2.0], [1.0, 1.0], [5.0]]
    adjusted = risk_adjusted_utility(samples, 0.9, eta_risk=3.0)
    plain = discounted_utility([2.0, 1.0, 5.0], 0.9)
    assert adjusted == plain


def test_risk_adjustment_single_round_hand_value():
    # mean 1, unbiased sample std sqrt(2), undiscounted at t=0
    value = risk_adjusted_utility([[0.0, 2.0]], 0.5, eta_risk=1.0)
    assert value == pytest.approx(1.0 - math.sqrt(2.0), rel=1e-12)


def test_risk_adjustment_eta_zero_is_exactly_plain():
    rng = np.random.default_rng(13)
    for _ in range(100):
        rounds = int(rng.integers(1, 8))
        samples = [list(rng.normal(size=rng.integers(1, 6))) for _ in range(rounds)]
        means = [float(np.asarray(s, dtype=float).mean()) for s in samples]
        delta = float(rng.uniform(0.1, 0.99))
        assert risk_adjusted_utility(samples, delta, 0.0) == discounted_utility(means, delta)


def test_risk_adjustment_penalty_is_nonpositive():
    rng = np.random.default_rng(29)
    for _ in range(50):
        samples = [list(rng.normal(size=5)) for _ in range(4)]
        means = [float(np.mean(s)) for s in samples]
        delta = float(rng.uniform(0.2, 0.95))
        eta = float(rng.uniform(0.0, 3.0))
        assert risk_adjusted_utility(samples, delta, eta) <= discounted_utility(means, delta) + 1e-12


def test_risk_adjustment_rejects_empty_round():
    with pytest.raises(ConfigurationError):
        risk_adjusted_utility([[1.0], []], 0.9, 1.0)


def test_endogenous_path_constant_rate():
    path = endogenous_discount_path(NoisePath.constant(0.05), 10)
    assert path[0] == 1.0
    assert path[10] == pytest.approx(0.606531, abs=1e-6)
    assert np.allclose(path, np.exp(-0.05 * np.arange(11)))


def test_endogenous_path_no_discounting():
    path = endogenous_discount_path(NoisePath.constant(0.0), 7)
    assert np.array_equal(path, np.ones(8))


def test_endogenous_path_piecewise_integral():
    noise = NoisePath(baseline_rate=0.05, segments=((0, 0.0), (5, 0.10)))
    path = endogenous_discount_path(noise, 10)
    assert abs(path[10] - math.exp(-1.0)) <= 1e-12


def test_endogenous_path_monotonicity():
    rng = np.random.default_rng(3)
    for _ in range(25):
        starts = np.unique(rng.integers(1, 30, size=3))
        segments = ((0, float(rng.uniform(0, 0.2))),) + tuple(
            (int(s), float(rng.uniform(0, 0.2))) for s in starts
        )
        noise = NoisePath(baseline_rate=float(rng.uniform(0, 0.1)), segments=segments)
        path = endogenous_discount_path(noise, 40)
        assert np.all(np.diff(path) <= 1e-15)
        assert np.all(path > 0.0)


def test_endogenous_path_pointwise_monotone_in_noise():
    base = NoisePath(baseline_rate=0.02, segments=((0, 0.0), (4, 0.05)))
    raised = NoisePath(baseline_rate=0.02, segments=((0, 0.0), (4, 0.15)))
    low = endogenous_discount_path(base, 20)
    high = endogenous_discount_path(raised, 20)
    assert np.all(high <= low + 1e-15)


def test_noise_path_validation():
    with pytest.raises(ConfigurationError):
        NoisePath(baseline_rate=-0.1)
    with pytest.raises(ConfigurationError):
        NoisePath(baseline_rate=0.1, segments=((1, 0.0),))
    with pytest.raises(ConfigurationError):
        NoisePath(baseline_rate=0.1, segments=((0, 0.0), (0, 0.1)))
    with pytest.raises(ConfigurationError):
        NoisePath(baseline_rate=0.1, segments=((0, -0.5),))


def test_payoff_variance():
    assert payoff_variance([4.0, 4.0, 4.0]).sigma2 == 0.0
    two_point = payoff_variance([0.0, 2.0])
    assert two_point.sigma2 == pytest.approx(2.0)
    assert two_point.sigma == pytest.approx(math.sqrt(2.0))
    single = payoff_variance([3.0])
    assert single.sigma2 == 0.0 and single.degenerate
    with pytest.raises(ConfigurationError):
        payoff_variance([])


def test_payoff_variance_sampling_bound():
    rng = np.random.default_rng(8)
    samples = rng.normal(0.0, 2.0, size=100_000)
    assert payoff_variance(samples).sigma2 == pytest.approx(4.0, rel=0.05)


def test_npv_spreadsheet_oracle():
    plan = InvestmentPlan(250.0, (100.0, 100.0, 100.0))
    assert npv(plan, NoisePath.constant(0.05)) == pytest.approx(22.3248, abs=1e-4)


def test_npv_zero_plan():
    assert npv(InvestmentPlan(0.0, (0.0,)), ZERO_NOISE) == 0.0


def test_npv_decreases_with_noise():
    plan = InvestmentPlan(250.0, (100.0, 100.0, 100.0))
    base = npv(plan, NoisePath.constant(0.05))
    noisy = npv(plan, NoisePath.constant(0.05, eta=0.05))
    assert noisy < base


def test_npv_strictly_decreasing_in_cost():
    plan_a = InvestmentPlan(250.0, (100.0, 100.0))
    plan_b = InvestmentPlan(251.0, (100.0, 100.0))
    assert npv(plan_b, ZERO_NOISE) < npv(plan_a, ZERO_NOISE)


def test_breakeven_oracle():
    noise = NoisePath.constant(0.05)
    # NPV at T=2 is -64.06, at T=3 is +22.32
    assert npv(InvestmentPlan(250.0, (100.0, 100.0)), noise) < 0
    assert breakeven_horizon(100.0, 250.0, noise, 100) == 3


def test_breakeven_trivial_cases():
    assert breakeven_horizon(100.0, 0.0, ZERO_NOISE, 10) == 1
    assert breakeven_horizon(1.0, 1e6, ZERO_NOISE, 100) is None
    with pytest.raises(ConfigurationError):
        breakeven_horizon(0.0, 10.0, ZERO_NOISE, 10)


def test_breakeven_nondecreasing_in_noise():
    # None means the plan never breaks even, i.e. an infinite horizon.
    previous = 0.0
    for eta in (0.0, 0.05, 0.1, 0.2, 0.4):
        horizon = breakeven_horizon(100.0, 250.0, NoisePath.constant(0.05, eta=eta), 1000)
        value = math.inf if horizon is None else horizon
        assert value >= previous
        previous = value


def test_discount_conventions_agree_to_first_order():
    for rate in (0.01, 0.02, 0.05, 0.08, 0.1):
        for t in range(1, 31):
            exponential = math.exp(-rate * t)
            compound = (1.0 + rate) ** -t
            assert abs(exponential - compound) <= rate ** 2 * t * compound
