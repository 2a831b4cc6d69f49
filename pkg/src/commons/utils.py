from datetime import datetime, date
from joblib import Parallel, delayed
from pytz import timezone
from typing import Callable, Iterable, Optional, TypeVar
from scipy.special import logsumexp
import numpy as np
import logging
import sys


T = TypeVar("T")
R = TypeVar("R")


def get_time() -> str:
    """Returns a str of time in the format of {YYYYMMDD}_T{HHMMSS}

    Returns:
        str: A string of time
    """
    tz = timezone("EST")
    now = datetime.now(tz)
    dt_string = now.strftime("%Y%m%d_T%H%M%S")
    return dt_string


def get_date() -> str:
    """Returns a str of date in the format YYYY-MM-DD

    Returns:
        str: A string of date
    """
    date_obj = date.today()
    return date_obj.isoformat()


def get_logger(loggername: str, log_level: str, log_file: bool = False) -> logging.Logger:
    """Returns a basic logger with a logger name using a std format

    log level can be set using one of the values in log_levels. Records go
    to stderr, and also to a dated file {loggername}_{YYYY-MM-DD}.log when
    log_file is True.
    """
    log_levels = {  # sorted level
        "notset": logging.NOTSET,  # 00
        "debug": logging.DEBUG,  # 10
        "info": logging.INFO,  # 20
        "warning": logging.WARNING,  # 30
        "error": logging.ERROR,  # 40
    }
    if log_level not in log_levels.keys():
        raise ValueError(
            f"Unknown log level {log_level}, expected one of {*log_levels.keys(),}"
        )

    logger = logging.getLogger(loggername)
    logger.setLevel(log_levels[log_level])
    # repeated CLI invocations in one process must not stack handlers
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    file_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"

    # set the stream handler
    stream_handler = logging.StreamHandler(sys.stderr)
    stream_handler.setFormatter(logging.Formatter(file_FORMAT, "%H:%M:%S"))
    stream_handler.setLevel(log_levels[log_level])
    logger.addHandler(stream_handler)

    # set the file handler
    if log_file:
        logger_filename = loggername + "_" + get_date() + ".log"
        file_handler = logging.FileHandler(logger_filename, mode="w")
        file_handler.setFormatter(logging.Formatter(file_FORMAT, "%H:%M:%S"))
        file_handler.setLevel(log_levels["info"])
        logger.addHandler(file_handler)
    else:
        pass

    return logger


def rng_stream(seed: int, tag: int, index: int = 0) -> np.random.Generator:
    """Returns an independent counter-based generator keyed by (seed, tag, index)

    Args:
        seed (int): Non-negative run seed, up to 64 bits
        tag (int): Stream tag, one of the StreamKeys values
        index (int, optional): Replicate / iteration / chunk index. Defaults to 0.

    Raises:
        ValueError: Raised if seed or index is negative

    Returns:
        np.random.Generator: A Philox-backed generator
    """
    if seed < 0 or index < 0:
        raise ValueError(f"Seed and stream index must be non-negative, got seed={seed}, index={index}")
    else:
        pass
    seed_seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(tag), int(index)))
    return np.random.Generator(np.random.Philox(seed_seq))


def log_mean_exp(log_values: np.ndarray, log_weights: Optional[np.ndarray] = None) -> float:
    """Returns log of the (weighted) mean of exp(log_values), shifted by the max

    With log_weights given, the mean is sum(exp(w + v)) / sum(exp(w)).
    Returns -inf when every term is zero; never NaN.
    """
    log_values = np.asarray(log_values, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        if log_weights is None:
            if np.all(np.isneginf(log_values)):
                return -np.inf
            return float(logsumexp(log_values) - np.log(log_values.size))
        log_weights = np.asarray(log_weights, dtype=float)
        if np.all(np.isneginf(log_weights)):
            return -np.inf
        joint = log_weights + log_values
        if np.all(np.isneginf(joint)):
            return -np.inf
        return float(logsumexp(joint) - logsumexp(log_weights))


def parallel_map(func: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """Applies func to every item on joblib worker processes, keeping input order

    Args:
        func (Callable): Function of one argument. Closures are fine, joblib
            ships them to the workers with cloudpickle
        items (Iterable): Work items
        threads (int, optional): Worker count; 1 runs inline. Defaults to 1.

    Returns:
        list: Results in the order of items
    """
    items = list(items)
    if threads < 1:
        raise ValueError(f"Worker count must be at least 1, got {threads}")
    elif threads == 1 or len(items) <= 1:
        return [func(i) for i in items]
    else:
        return Parallel(n_jobs=min(threads, len(items)))(delayed(func)(i) for i in items)
