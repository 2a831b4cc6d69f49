import sys
import os
import logging
import mock
import pytest
import numpy as np

parent_dir = os.path.dirname(os.path.dirname(os.path.realpath(__file__)))
sys.path.append(parent_dir)
from src.commons.utils import get_date, get_logger, get_time, log_mean_exp, parallel_map, rng_stream


def test_get_time_format():
    stamp = get_time()
    assert len(stamp) == 16
    assert stamp[8:10] == "_T"


@pytest.mark.parametrize("level, expected", [("debug", logging.DEBUG), ("warning", logging.WARNING)])
def test_get_logger_levels(level, expected):
    logger = get_logger("hawkes_test", level)
    assert logger.level == expected
    logger = get_logger("hawkes_test", level)
    assert len(logger.handlers) == 1


def test_get_logger_unknown_level():
    with pytest.raises(ValueError, match="Unknown log level"):
        get_logger("hawkes_test", "loud")


@mock.patch("src.commons.utils.get_date", autospec=True)
def test_get_logger_file(mock_get_date, tmp_path, monkeypatch):
    mock_get_date.return_value = "2024-01-31"
    monkeypatch.chdir(tmp_path)
    logger = get_logger("hawkes_file_test", "info", log_file=True)
    logger.info("chain started")
    for handler in logger.handlers:
        handler.flush()
    assert "chain started" in (tmp_path / "hawkes_file_test_2024-01-31.log").read_text()
    get_logger("hawkes_file_test", "info")


def test_rng_streams_are_keyed():
    first = rng_stream(7, 1, 3).standard_normal(5)
    np.testing.assert_array_equal(first, rng_stream(7, 1, 3).standard_normal(5))
    assert not np.array_equal(first, rng_stream(7, 1, 4).standard_normal(5))
    assert not np.array_equal(first, rng_stream(7, 2, 3).standard_normal(5))
    assert not np.array_equal(first, rng_stream(8, 1, 3).standard_normal(5))


def test_rng_stream_rejects_negative():
    with pytest.raises(ValueError, match="non-negative"):
        rng_stream(-1, 0, 0)
    with pytest.raises(ValueError, match="non-negative"):
        rng_stream(1, 0, -2)


def test_log_mean_exp():
    values = np.log([1.0, 2.0, 3.0])
    assert log_mean_exp(values) == pytest.approx(np.log(2.0))
    weights = np.log([1.0, 1.0, 2.0])
    assert log_mean_exp(values, log_weights=weights) == pytest.approx(np.log(9.0 / 4.0))
    assert log_mean_exp(np.array([-1000.0, -1000.0])) == pytest.approx(-1000.0)
    assert log_mean_exp(np.full(3, -np.inf)) == -np.inf
    assert log_mean_exp(values, log_weights=np.full(3, -np.inf)) == -np.inf


def test_parallel_map_keeps_order():
    items = list(range(20))
    assert parallel_map(lambda x: x * x, items, threads=4) == [x * x for x in items]
    assert parallel_map(lambda x: x + 1, items) == [x + 1 for x in items]
    with pytest.raises(ValueError):
        parallel_map(abs, items, threads=0)


def test_parallel_map_ignores_worker_count():
    def draw(index):
        return float(rng_stream(3, 2, index).standard_normal())

    inline = parallel_map(draw, range(6))
    assert parallel_map(draw, range(6), threads=2) == inline
    assert parallel_map(draw, range(6), threads=8) == inline


@mock.patch("src.commons.utils.Parallel", autospec=True)
def test_parallel_map_uses_joblib_workers(mock_parallel):
    mock_parallel.return_value.return_value = [1, 4]
    assert parallel_map(abs, [-1, -2], threads=5) == [1, 4]
    mock_parallel.assert_called_once_with(n_jobs=2)
    mock_parallel.reset_mock()
    parallel_map(abs, [-3], threads=5)
    mock_parallel.assert_not_called()


def test_get_date_is_iso():
    assert len(get_date().split("-")) == 3
