import sys
import os
import pytest
import numpy as np
import pandas as pd

parent_dir = os.path.dirname(os.path.dirname(os.path.realpath(__file__)))
sys.path.append(parent_dir)
from src.commons.hawkes_files import (
    HawkesFiles,
    MalformedRowError,
    NegativeCountError,
    NonIncreasingTimesError,
)
from src.hawkes.model import CountData, EventHistory, KernelFamily
from src.hawkes.pmmh import ChainOutput, summarize_chain
from src.hawkes.simulator import predictive_paths


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


@pytest.fixture
def chain_output():
    rng = np.random.default_rng(3)
    n = 30
    natural = np.column_stack([rng.uniform(0.5, 2.0, n), rng.uniform(0.1, 0.9, n), rng.uniform(0.1, 1.0, n)])
    return ChainOutput.from_natural(
        KernelFamily.EXPONENTIAL, np.arange(1, n + 1), natural, rng.normal(-20.0, 1.0, n), rng.integers(0, 2, n),
    )


def test_load_counts(tmp_path):
    path = _write(tmp_path, "counts.csv", "t,count\n1,3\n2.5,0\n4,7\n")
    data = HawkesFiles.load_counts(path)
    np.testing.assert_array_equal(data.times, [0.0, 1.0, 2.5, 4.0])
    np.testing.assert_array_equal(data.counts, [3, 0, 7])


def test_load_counts_with_origin_row(tmp_path):
    path = _write(tmp_path, "counts.csv", "t,count\n10,\n11,2\n13,1\n")
    data = HawkesFiles.load_counts(path)
    np.testing.assert_array_equal(data.times, [0.0, 1.0, 3.0])
    np.testing.assert_array_equal(data.counts, [2, 1])


def test_load_weekly_counts(tmp_path):
    lines = ["t,count"] + [f"{7 * (i + 1)},{i % 4}" for i in range(393)]
    data = HawkesFiles.load_counts(_write(tmp_path, "weekly.csv", "\n".join(lines) + "\n"))
    assert data.m == 393
    assert data.horizon == 7.0 * 393
    assert data.total == sum(i % 4 for i in range(393))


@pytest.mark.parametrize(
    "text, error, row",
    [
        ("t,count\n1,2\n1,3\n", NonIncreasingTimesError, "row 2"),
        ("t,count\n1,2\n2,-1\n", NegativeCountError, "row 2"),
        ("t,count\n1,2\n2,x\n3,1\n", MalformedRowError, "row 2"),
        ("t,count\n1,2\nabc,1\n", MalformedRowError, "row 2"),
        ("t,count\n1,2\n2,1.5\n", MalformedRowError, "row 2"),
        ("t,count\n1,2\n2,\n", MalformedRowError, "row 2"),
        ("t,count\n5,\n4,1\n", NonIncreasingTimesError, "row 2"),
    ],
)
def test_load_counts_errors_name_the_row(tmp_path, text, error, row):
    path = _write(tmp_path, "bad.csv", text)
    with pytest.raises(error, match=row):
        HawkesFiles.load_counts(path)


@pytest.mark.parametrize("text", ["time,n\n1,2\n", "t,count\n", "", "t,count\n5,\n"])
def test_load_counts_rejects_empty_or_wrong_header(tmp_path, text):
    with pytest.raises(MalformedRowError):
        HawkesFiles.load_counts(_write(tmp_path, "bad.csv", text))


def test_load_counts_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        HawkesFiles.load_counts(str(tmp_path / "nope.csv"))


def test_counts_errors_are_value_errors(tmp_path):
    with pytest.raises(ValueError):
        HawkesFiles.load_counts(_write(tmp_path, "bad.csv", "t,count\n1,-2\n"))


def test_counts_round_trip(tmp_path):
    data = CountData(times=[0.0, 0.1, 0.30000000000000004, 1.7], counts=[0, 4, 1])
    path = str(tmp_path / "counts.csv")
    HawkesFiles.save_counts(data, path)
    again = HawkesFiles.load_counts(path)
    np.testing.assert_array_equal(again.times, data.times)
    np.testing.assert_array_equal(again.counts, data.counts)


def test_events_round_trip(tmp_path):
    history = EventHistory(tau=np.cumsum(np.random.default_rng(1).exponential(0.37, 50)), horizon=60.0)
    path = str(tmp_path / "events.csv")
    HawkesFiles.save_events(history, path)
    assert HawkesFiles.load_events(path, horizon=60.0).tau.tolist() == history.tau.tolist()
    assert HawkesFiles.load_events(path).horizon == history.tau[-1]


def test_load_events_wrong_column(tmp_path):
    with pytest.raises(MalformedRowError, match="tau"):
        HawkesFiles.load_events(_write(tmp_path, "events.csv", "time\n0.5\n"))


def test_chain_round_trip(tmp_path, chain_output):
    path = str(tmp_path / "chain.csv")
    HawkesFiles.save_chain(chain_output, path)
    assert pd.read_csv(path).columns.tolist() == ["iter", "nu", "eta", "beta", "loglik", "accepted"]
    again = HawkesFiles.load_chain(path)
    assert again.family == KernelFamily.EXPONENTIAL
    np.testing.assert_array_equal(again.natural, chain_output.natural)
    np.testing.assert_array_equal(again.loglik, chain_output.loglik)
    np.testing.assert_array_equal(again.accepted, chain_output.accepted)
    np.testing.assert_array_equal(again.iteration, chain_output.iteration)


def test_load_chain_family_checks(tmp_path, chain_output):
    path = str(tmp_path / "chain.csv")
    HawkesFiles.save_chain(chain_output, path)
    with pytest.raises(MalformedRowError, match="weibull"):
        HawkesFiles.load_chain(path, family=KernelFamily.WEIBULL)
    shaped = _write(tmp_path, "shaped.csv", "iter,nu,eta,alpha,beta,loglik,accepted\n1,1,0.5,2,0.1,-3,1\n")
    assert HawkesFiles.load_chain(shaped).family == KernelFamily.GAMMA
    assert HawkesFiles.load_chain(shaped, family=KernelFamily.WEIBULL).family == KernelFamily.WEIBULL
    with pytest.raises(MalformedRowError, match="expected columns"):
        HawkesFiles.load_chain(_write(tmp_path, "odd.csv", "iter,nu,eta,beta,loglik\n1,1,0.5,0.1,-3\n"))


def test_summary_round_trip(tmp_path, chain_output):
    summary = summarize_chain(chain_output, burn_in=5)
    path = str(tmp_path / "summary.txt")
    HawkesFiles.save_summary(summary, path)
    lines = open(path).read().splitlines()
    assert lines[:3] == ["n_draws=25", "burn_in=5", "acceptance_rate=" + "%.17g" % summary.acceptance_rate]
    assert "mean_rate.est=" + "%.17g" % summary.rows["mean_rate"].est in lines
    assert HawkesFiles.load_summary(path) == summary


def test_write_to_missing_folder(tmp_path, chain_output):
    with pytest.raises(OSError, match="Could not write"):
        HawkesFiles.save_chain(chain_output, str(tmp_path / "no" / "such" / "chain.csv"))
    with pytest.raises(OSError, match="Could not write"):
        HawkesFiles.save_summary(summarize_chain(chain_output, 0), str(tmp_path / "no" / "summary.txt"))


def test_bands_and_paths_files(tmp_path):
    data = CountData(times=np.arange(0.0, 6.0), counts=[1, 0, 2, 1, 3])
    draws = np.array([[1.0, 0.3, 0.5]])
    bands = predictive_paths(draws, KernelFamily.EXPONENTIAL, data, n_paths=7, seed=2)
    bands_path, paths_path = str(tmp_path / "bands.csv"), str(tmp_path / "paths.csv")
    HawkesFiles.save_bands(bands, bands_path)
    HawkesFiles.save_paths(bands, paths_path)
    frame = pd.read_csv(bands_path)
    assert frame.columns.tolist() == ["t", "observed", "lower", "median", "upper"]
    assert frame["observed"].tolist() == [1, 1, 3, 4, 7]
    paths = pd.read_csv(paths_path)
    assert paths.columns.tolist() == ["path", "t", "cumulative"]
    assert paths.shape == (35, 3)
