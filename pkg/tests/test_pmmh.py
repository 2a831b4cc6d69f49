import sys
import os
import pytest
import numpy as np

parent_dir = os.path.dirname(os.path.dirname(os.path.realpath(__file__)))
sys.path.append(parent_dir)
from src.commons.utils import rng_stream
from src.hawkes.model import CountData, HawkesParams, KernelFamily, from_transformed, to_transformed
from src.hawkes.pmmh import (
    ChainOutput,
    ChainState,
    PmmhConfig,
    accept_proposal,
    acceptance_ratio,
    pmmh_run,
    pmmh_step,
    poisson_count_loglik_fn,
    summarize_chain,
)
from src.hawkes.smc import SmcConfig


@pytest.fixture
def small_data():
    return CountData(times=[0.0, 1.0, 2.0], counts=[1, 2])


@pytest.fixture
def small_config():
    return PmmhConfig(iterations=1000, burn_in=100, step_sigma=0.3,
                      smc=SmcConfig(particles=8, seed=3), seed=3)


@pytest.mark.parametrize(
    "proposed, cached, expected",
    [
        (-1.0, -3.0, 2.0),
        (-3.0, -1.0, -2.0),
        (-np.inf, -3.0, -np.inf),
        (np.nan, -3.0, -np.inf),
        (-2.0, -np.inf, np.inf),
    ],
)
def test_acceptance_ratio(proposed, cached, expected):
    assert acceptance_ratio(proposed, cached) == expected


@pytest.mark.parametrize(
    "log_ratio, u, expected",
    [
        (0.0, 1.0, True),
        (np.log(0.5), 0.6, False),
        (np.log(0.5), 0.4, True),
        (np.inf, 0.99, True),
        (-np.inf, 0.0, False),
        (-50.0, 0.0, True),
    ],
)
def test_accept_proposal(log_ratio, u, expected):
    assert accept_proposal(log_ratio, u) is expected


@pytest.mark.parametrize(
    "kwargs",
    [
        {"iterations": 10, "burn_in": 10},
        {"iterations": 10, "burn_in": -1},
        {"step_sigma": 0.0},
        {"seed": -1},
        {"init": (0.0, 0.0)},
        {"init": (0.0, np.nan, 0.0)},
        {"step_sigmas": (0.1, 0.1)},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        PmmhConfig(**kwargs)


def test_step_rejects_zero_likelihood():
    config = PmmhConfig(iterations=2, burn_in=0)
    state = ChainState(theta=np.zeros(3), cached_loglik=-4.0)
    new_state, record = pmmh_step(state, config, lambda params, rng: -np.inf, rng_stream(0, 0, 0), iteration=1)
    assert new_state is state
    assert record["accepted"] is False
    assert record["loglik"] == -4.0
    assert record["log_ratio"] == -np.inf


def test_cached_estimate_kept_on_rejection(small_data, small_config):
    """the stored log-likelihood changes only on acceptance"""
    output = pmmh_run(small_config, small_data)
    previous_loglik = np.concatenate([[output.init_loglik], output.loglik[:-1]])
    previous_theta = np.vstack([output.init_transformed, output.transformed[:-1]])
    rejected = ~output.accepted
    assert rejected.any() and output.accepted.any()
    np.testing.assert_array_equal(output.loglik[rejected], previous_loglik[rejected])
    np.testing.assert_array_equal(output.transformed[rejected], previous_theta[rejected])
    assert np.all(np.any(output.transformed[output.accepted] != previous_theta[output.accepted], axis=1))


def test_run_is_deterministic(small_data, small_config):
    config = PmmhConfig(iterations=200, burn_in=0, step_sigma=0.3, smc=small_config.smc, seed=3)
    first = pmmh_run(config, small_data)
    second = pmmh_run(config, small_data)
    np.testing.assert_array_equal(first.transformed, second.transformed)
    np.testing.assert_array_equal(first.loglik, second.loglik)
    other = pmmh_run(PmmhConfig(iterations=200, burn_in=0, step_sigma=0.3, smc=small_config.smc, seed=4),
                     small_data)
    assert not np.array_equal(first.transformed, other.transformed)


def test_random_init_uses_init_stream(small_data):
    config = PmmhConfig(iterations=1, burn_in=0, smc=SmcConfig(particles=4, seed=8), seed=8)
    output = pmmh_run(config, small_data)
    np.testing.assert_array_equal(output.init_transformed, rng_stream(8, 5, 0).standard_normal(3))


def test_single_iteration_chain(small_data):
    config = PmmhConfig(iterations=1, burn_in=0, smc=SmcConfig(particles=4, seed=1), seed=1)
    output = pmmh_run(config, small_data)
    assert len(output) == 1
    summary = summarize_chain(output, burn_in=0)
    assert summary.n_draws == 1
    assert summary.rows["nu"].lower == summary.rows["nu"].upper


def test_natural_matches_transformed(small_data):
    config = PmmhConfig(iterations=50, burn_in=0, step_sigma=0.3, smc=SmcConfig(particles=8, seed=2),
                        seed=2, family=KernelFamily.GAMMA)
    output = pmmh_run(config, small_data)
    assert output.natural.shape == (50, 4)
    for theta, natural in zip(output.transformed, output.natural):
        params = from_transformed(theta, KernelFamily.GAMMA)
        np.testing.assert_array_equal(natural, list(params.as_dict().values()))


def test_run_needs_data():
    with pytest.raises(ValueError, match="at least one interval"):
        pmmh_run(PmmhConfig(iterations=2, burn_in=0), None)


def test_to_frame_columns(small_data):
    config = PmmhConfig(iterations=5, burn_in=0, smc=SmcConfig(particles=4, seed=1), seed=1)
    frame = pmmh_run(config, small_data).to_frame()
    assert list(frame.columns) == ["iter", "nu", "eta", "beta", "loglik", "accepted"]
    assert frame["iter"].tolist() == [1, 2, 3, 4, 5]


def test_constant_chain_summary():
    n = 50
    output = ChainOutput.from_natural(
        KernelFamily.EXPONENTIAL, np.arange(1, n + 1), np.tile([2.0, 0.6, 0.3], (n, 1)),
        np.full(n, -10.0), np.zeros(n),
    )
    summary = summarize_chain(output, burn_in=10)
    assert summary.n_draws == 40
    assert summary.burn_in == 10
    assert summary.acceptance_rate == 0.0
    assert summary.params == ("nu", "eta", "beta")
    nu = summary.rows["nu"]
    assert nu.est == nu.lower == nu.upper == 2.0
    assert nu.se == 0.0
    assert summary.rows["mean_rate"].est == pytest.approx(5.0)


def test_quantile_se_of_normal_draws():
    n = 20000
    loglik = rng_stream(12, 0, 0).standard_normal(n)
    output = ChainOutput.from_natural(
        KernelFamily.EXPONENTIAL, np.arange(1, n + 1), np.tile([1.0, 0.5, 1.0], (n, 1)),
        loglik, np.ones(n),
    )
    row = summarize_chain(output, burn_in=0).rows["loglik"]
    assert row.se == pytest.approx(1.0, abs=0.05)
    assert row.est == pytest.approx(0.0, abs=0.05)


def test_summary_rejects_long_burn_in():
    output = ChainOutput.from_natural(KernelFamily.EXPONENTIAL, [1, 2], np.ones((2, 3)) * 0.5, [0.0, 0.0], [0, 0])
    with pytest.raises(ValueError, match="Burn-in"):
        summarize_chain(output, burn_in=2)


def test_summary_to_frame():
    n = 20
    output = ChainOutput.from_natural(
        KernelFamily.WEIBULL, np.arange(1, n + 1), np.tile([1.0, 0.5, 0.8, 1.0], (n, 1)),
        np.zeros(n), np.ones(n),
    )
    frame = summarize_chain(output, burn_in=0).to_frame()
    assert frame["name"].tolist() == ["nu", "eta", "alpha", "beta", "mean_rate", "loglik"]
    assert list(frame.columns) == ["name", "est", "lower", "upper", "se"]


def test_sampler_on_exact_poisson_target():
    """with an exact likelihood the chain is plain Metropolis-Hastings"""
    data = CountData(times=np.arange(0.0, 101.0), counts=[2] * 100)
    truth = HawkesParams.exponential(nu=2.0, eta=0.5, beta=1.0)
    config = PmmhConfig(iterations=5000, burn_in=500, step_sigma=0.05,
                        init=tuple(to_transformed(truth)), seed=6)
    output = pmmh_run(config, data, loglik_fn=poisson_count_loglik_fn(data))
    summary = summarize_chain(output, burn_in=500)
    assert abs(summary.rows["nu"].est - 2.0) <= 0.1
    assert 0.2 <= summary.acceptance_rate <= 1.0
