import sys
import os
import mock
import pytest
import numpy as np
import pandas as pd

parent_dir = os.path.dirname(os.path.dirname(os.path.realpath(__file__)))
sys.path.append(parent_dir)
from src.hawkes.mle import MleResult
from src.hawkes.model import CountData, HawkesParams, KernelFamily, to_transformed
from src.hawkes.pmmh import ParamSummary, PmmhConfig, Summary
from src.hawkes.simulator import OracleEstimate, PredictiveBands
from src.hawkes.smc import SmcConfig, smc_loglik
from workflow.fit_counts import fit_counts_md, output_names
from workflow.simulation_study import (
    COVERAGE_SHARE,
    REFERENCE_SE,
    continuous_replicate,
    continuous_row,
    coverage_within_tolerance,
    fit_replicate,
    mean_within_tolerance,
    simulation_md,
    study_pmmh_config,
    study_table,
)
from workflow.unbiasedness_study import agreement_table, smc_replicates, unbiasedness_md, variance_ratio


def _summary(values: dict, acceptance_rate: float = 0.3) -> Summary:
    rows = {name: ParamSummary(est=est, lower=lower, upper=upper, se=se)
            for name, (est, lower, upper, se) in values.items()}
    return Summary(rows=rows, acceptance_rate=acceptance_rate, n_draws=100, burn_in=10)


def test_agreement_table():
    oracle = OracleEstimate(probability=0.034, standard_error=0.0002, n_sims=1000000)
    estimates = {64: np.array([0.030, 0.036, 0.038, 0.032]), 256: np.array([0.033, 0.035, 0.034, 0.034])}
    table = agreement_table(oracle, estimates)
    assert table.columns.tolist() == ["J", "reps", "mean", "se", "variance", "z", "agree"]
    assert table["J"].tolist() == [64, 256]
    assert table["mean"].tolist() == pytest.approx([0.034, 0.034])
    assert table["agree"].all()
    assert variance_ratio(table) == pytest.approx(np.var([0.030, 0.036, 0.038, 0.032]) / np.var([0.033, 0.035, 0.034, 0.034]))


def test_agreement_table_flags_bias():
    oracle = OracleEstimate(probability=0.5, standard_error=0.001, n_sims=100000)
    table = agreement_table(oracle, {32: np.array([0.30, 0.31, 0.29, 0.30])})
    assert not table["agree"].iloc[0]


def test_smc_replicates_use_consecutive_streams():
    params = HawkesParams.exponential(nu=1.0, eta=0.5, beta=0.5)
    data = CountData(times=[0.0, 1.0, 2.0], counts=[1, 2])
    values = smc_replicates.fn(params=params, data=data, particles=8, reps=3, seed=2, first_stream=5)
    expected = [np.exp(smc_loglik(params, data, SmcConfig(particles=8, seed=2, stream=5 + r))) for r in range(3)]
    np.testing.assert_array_equal(values, expected)


@mock.patch("workflow.unbiasedness_study.create_markdown_artifact", autospec=True)
def test_unbiasedness_md(mock_artifact):
    params = HawkesParams.gamma(nu=1.0, eta=0.6, alpha=2.0, beta=0.1)
    data = CountData(times=[0.0, 1.0, 2.0], counts=[1, 2])
    oracle = OracleEstimate(probability=0.0338, standard_error=0.0002, n_sims=1000000)
    table = agreement_table(oracle, {64: np.array([0.03, 0.04]), 256: np.array([0.033, 0.035])})
    unbiasedness_md.fn(params=params, data=data, oracle=oracle, table=table)
    mock_artifact.assert_called_once()
    markdown = mock_artifact.call_args.kwargs["markdown"]
    assert "0.0338" in markdown
    assert "variance" in markdown


def test_study_table_and_tolerance():
    truth = {"nu": 2.0, "eta": 0.6, "beta": 0.25}
    summaries = [
        _summary({"nu": (2.1, 1.6, 2.6, 0.3), "eta": (0.58, 0.45, 0.7, 0.06), "beta": (0.26, 0.15, 0.35, 0.05)}),
        _summary({"nu": (1.9, 1.5, 2.4, 0.3), "eta": (0.62, 0.5, 0.75, 0.06), "beta": (0.24, 0.1, 0.3, 0.05)}),
        _summary({"nu": (3.5, 3.3, 3.7, 0.1), "eta": (0.61, 0.5, 0.72, 0.06), "beta": (0.25, 0.2, 0.3, 0.03)}),
    ]
    table = study_table(summaries, truth)
    assert table["parameter"].tolist() == ["nu", "eta", "beta"]
    nu = table.set_index("parameter").loc["nu"]
    assert nu["est"] == pytest.approx(2.5)
    assert nu["covered"] == 2
    assert nu["coverage"] == pytest.approx(2 / 3)
    assert nu["emp_se"] == pytest.approx(np.std([2.1, 1.9, 3.5], ddof=1))
    assert nu["mean_se_hat"] == pytest.approx(0.7 / 3)
    checks = mean_within_tolerance(table, REFERENCE_SE, n_datasets=3)
    assert checks == {"nu": False, "eta": True, "beta": True}


def test_mean_within_tolerance_skips_unreferenced():
    table = pd.DataFrame([["alpha", 2.0, 2.5]], columns=["parameter", "truth", "est"])
    assert mean_within_tolerance(table, REFERENCE_SE, n_datasets=10) == {}


@pytest.mark.parametrize("covered, expected", [(20, True), (15, True), (14, False), (0, False)])
def test_coverage_within_tolerance(covered, expected):
    table = pd.DataFrame([["nu", covered], ["eta", 20]], columns=["parameter", "covered"])
    assert COVERAGE_SHARE == 0.75
    assert coverage_within_tolerance(table, n_datasets=20) == {"nu": expected, "eta": True}


def test_coverage_rounds_needed_count_up():
    table = pd.DataFrame([["beta", 2]], columns=["parameter", "covered"])
    assert coverage_within_tolerance(table, n_datasets=3) == {"beta": False}
    table = pd.DataFrame([["beta", 7]], columns=["parameter", "covered"])
    assert coverage_within_tolerance(table, n_datasets=10) == {"beta": False}


def test_coverage_from_study_table():
    truth = {"nu": 2.0}
    summaries = [_summary({"nu": (2.0, 1.5, 2.5, 0.25)})] * 3 + [_summary({"nu": (3.0, 2.6, 3.4, 0.2)})]
    table = study_table(summaries, truth)
    assert coverage_within_tolerance(table, n_datasets=4) == {"nu": True}
    assert coverage_within_tolerance(table, n_datasets=4, share=0.9) == {"nu": False}


def test_study_chains_start_from_a_draw_by_default():
    params = HawkesParams.exponential(nu=2.0, eta=0.6, beta=0.25)
    config = study_pmmh_config(params, particles=16, iterations=20, burn_in=5, step_sigma=0.05, seed=4)
    assert config.init is None
    assert config.smc.particles == 16
    assert config.family is KernelFamily.EXPONENTIAL
    at_truth = study_pmmh_config(params, particles=16, iterations=20, burn_in=5, step_sigma=0.05, seed=4,
                                 start_at_truth=True)
    np.testing.assert_allclose(at_truth.init, to_transformed(params))


@mock.patch("workflow.simulation_study.create_markdown_artifact", autospec=True)
def test_simulation_md_lists_every_check(mock_artifact):
    table = pd.DataFrame([["nu", 2.0, 2.1]], columns=["parameter", "truth", "est"])
    checks = {"Mean estimate within tolerance of truth": {"nu": True},
              "At least 75% of intervals cover the truth": {"nu": False}}
    simulation_md.fn(truth={"nu": 2.0}, table=table, checks=checks, settings={"replicates": 20})
    markdown = mock_artifact.call_args.kwargs["markdown"]
    assert "- **Mean estimate within tolerance of truth**\n    - nu: PASS" in markdown
    assert "- **At least 75% of intervals cover the truth**\n    - nu: FAIL" in markdown


def test_continuous_row():
    params = HawkesParams.exponential(nu=2.0, eta=0.6, beta=0.25)
    mle = MleResult(params=params, loglik=-10.0, se={"nu": 0.3, "eta": 0.06, "beta": 0.05}, converged=True)
    summary = _summary({"nu": (2.2, 1.8, 2.6, 0.2), "eta": (0.8, 0.75, 0.85, 0.05), "beta": (0.25, 0.2, 0.3, 0.03)})
    row = continuous_row(summary, mle)
    assert row["nu_median"] == 2.2
    assert row["nu_mle"] == 2.0
    assert row["nu_within_2se"] is True
    assert row["eta_within_2se"] is False


@pytest.fixture
def small_pmmh():
    params = HawkesParams.exponential(nu=1.0, eta=0.4, beta=0.5)
    config = PmmhConfig(iterations=20, burn_in=5, step_sigma=0.1, smc=SmcConfig(particles=8, seed=3),
                        init=tuple(to_transformed(params).tolist()), seed=3)
    return params, config


def test_fit_replicate(small_pmmh):
    params, config = small_pmmh
    summary = fit_replicate.fn(replicate=1, params=params, horizon=10.0, delta=1.0, pmmh_config=config)
    assert summary.n_draws == 15
    assert summary.params == ("nu", "eta", "beta")


def test_fit_replicate_from_drawn_start():
    params = HawkesParams.exponential(nu=1.0, eta=0.4, beta=0.5)
    config = study_pmmh_config(params, particles=8, iterations=20, burn_in=5, step_sigma=0.1, seed=3)
    first = fit_replicate.fn(replicate=2, params=params, horizon=10.0, delta=1.0, pmmh_config=config)
    second = fit_replicate.fn(replicate=2, params=params, horizon=10.0, delta=1.0, pmmh_config=config)
    assert first.n_draws == 15
    assert first.rows["nu"].est == second.rows["nu"].est


def test_continuous_replicate(small_pmmh):
    params, config = small_pmmh
    row = continuous_replicate.fn(replicate=0, params=params, horizon=30.0, pmmh_config=config)
    assert row["replicate"] == 0
    assert row["events"] >= 0
    assert {"nu_median", "nu_mle", "eta_within_2se", "beta_within_2se"} <= set(row)


@mock.patch("workflow.fit_counts.get_date", autospec=True)
def test_output_names(mock_get_date, tmp_path):
    mock_get_date.return_value = "2024-01-31"
    names = output_names("/data/weekly.csv", str(tmp_path))
    assert names["chain"] == os.path.join(str(tmp_path), "weekly_2024-01-31_chain.csv")
    assert names["summary"].endswith("weekly_2024-01-31_summary.txt")
    assert set(names) == {"chain", "summary", "bands", "paths"}


@mock.patch("workflow.fit_counts.create_markdown_artifact", autospec=True)
def test_fit_counts_md(mock_artifact):
    data = CountData(times=[0.0, 1.0, 2.0], counts=[1, 2])
    summary = _summary({"nu": (1.0, 0.5, 1.5, 0.25), "eta": (0.4, 0.2, 0.6, 0.1), "beta": (0.5, 0.2, 0.9, 0.18)})
    bands = PredictiveBands(times=np.array([1.0, 2.0]), observed=np.array([1, 3]), paths=np.ones((2, 2)),
                            lower=np.zeros(2), median=np.ones(2), upper=np.full(2, 4.0), coverage=1.0)
    fit_counts_md.fn(counts_file="counts.csv", data=data, summary=summary, bands=bands, files={"chain": "c.csv"})
    markdown = mock_artifact.call_args.kwargs["markdown"]
    assert "counts.csv" in markdown
    assert "100.0%" in markdown
    assert "- chain: c.csv" in markdown
