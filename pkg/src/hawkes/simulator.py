"""Hawkes sample paths by Ogata thinning, count discretisation, and a
brute-force Monte Carlo oracle for interval-count probabilities.
"""
from dataclasses import dataclass, field
from typing import Iterator, Optional
from scipy.optimize import brentq
from src.commons.literals import SimDefaults, StreamKeys, PmmhDefaults
from src.commons.utils import rng_stream, parallel_map
from src.hawkes.model import (
    CountData,
    EventHistory,
    HawkesParams,
    KernelFamily,
    compensator_segment,
    from_natural,
    kernel_density,
    param_names,
)
import numpy as np
import logging


logger = logging.getLogger(__name__)

_TINY_LAG = float(np.finfo(float).tiny)


class RunawayPathError(RuntimeError):
    """Raised when a simulated path exceeds the configured event cap"""


@dataclass(frozen=True)
class SimConfig:
    """Parameters, horizon and seed of one simulated path

    Args:
        params (HawkesParams): Model parameters
        horizon (float): Censoring time T; T = 0 yields an empty path
        seed (int): Run seed
        replicate (int, optional): Replicate index selecting the stream. Defaults to 0.
        max_events (int, optional): Event cap. Defaults to 10**7.
    """

    params: HawkesParams
    horizon: float
    seed: int
    replicate: int = 0
    max_events: int = SimDefaults.max_events

    def __post_init__(self):
        if not np.isfinite(self.horizon) or self.horizon < 0.0:
            raise ValueError(f"Horizon must be finite and non-negative, got {self.horizon}")
        if self.seed < 0 or self.replicate < 0:
            raise ValueError(f"Seed and replicate must be non-negative, got {self.seed}, {self.replicate}")
        if self.max_events < 1:
            raise ValueError(f"Event cap must be at least 1, got {self.max_events}")


@dataclass(frozen=True)
class OracleEstimate:
    """Brute-force probability estimate with its binomial standard error"""

    probability: float
    standard_error: float
    n_sims: int


@dataclass(frozen=True)
class PredictiveBands:
    """Simulated cumulative count paths on the data grid with pointwise bands"""

    times: np.ndarray
    observed: np.ndarray
    paths: np.ndarray
    lower: np.ndarray
    median: np.ndarray
    upper: np.ndarray
    coverage: float = field(default=np.nan)


def _thinning_events(params: HawkesParams, horizon: float, rng: np.random.Generator) -> Iterator[float]:
    """Yields event times on (0, horizon] one at a time

    The dominating rate is recomputed after every candidate from the
    kernel terms evaluated at max(lag, mode), which bounds every term on
    the remaining future because the kernels decay past their mode.
    """
    kernel = params.kernel
    nu = params.nu
    t = 0.0
    if kernel.family is KernelFamily.EXPONENTIAL or kernel.eta == 0.0:
        beta = kernel.beta
        jump = kernel.eta / beta
        excitation = 0.0
        while True:
            bound = nu + excitation
            t_next = t + rng.exponential(1.0 / bound)
            if t_next > horizon:
                return
            excitation *= np.exp(-(t_next - t) / beta)
            t = t_next
            if rng.uniform() * bound <= nu + excitation:
                excitation += jump
                yield t
    else:
        floor = max(kernel.mode, _TINY_LAG)
        events = []
        while True:
            tau = np.asarray(events)
            bound = nu + float(np.sum(kernel_density(kernel, np.maximum(t - tau, floor))))
            t_next = t + rng.exponential(1.0 / bound)
            if t_next > horizon:
                return
            t = t_next
            lam = nu + float(np.sum(kernel_density(kernel, t - tau)))
            if rng.uniform() * bound <= lam:
                events.append(t)
                yield t


def _inversion_events(params: HawkesParams, horizon: float, rng: np.random.Generator) -> Iterator[float]:
    """Yields event times by inverting the compensator between events

    Used for shape parameters below 1, where the kernel is unbounded at 0
    and no thinning bound exists.
    """
    events = []
    t = 0.0
    while True:
        target = rng.exponential(1.0)
        tau = np.asarray(events)
        at_horizon = compensator_segment(params, tau, t, horizon)
        if at_horizon < target:
            return
        t_far = min(t + target / params.nu, horizon)
        t = brentq(
            lambda s: compensator_segment(params, tau, t, s) - target,
            t,
            t_far,
            xtol=1e-14,
            rtol=4 * np.finfo(float).eps,
        )
        events.append(t)
        yield t


def _event_stream(params: HawkesParams, horizon: float, rng: np.random.Generator) -> Iterator[float]:
    kernel = params.kernel
    if kernel.family.has_shape and kernel.alpha < 1.0 and kernel.eta > 0.0:
        return _inversion_events(params, horizon, rng)
    return _thinning_events(params, horizon, rng)


def simulate_path(params: HawkesParams, horizon: float, rng: np.random.Generator,
                  max_events: int = SimDefaults.max_events) -> EventHistory:
    """Returns one simulated path on (0, horizon] drawn with the given generator

    Raises:
        RunawayPathError: Raised if more than max_events events are generated
    """
    events = []
    for tau in _event_stream(params, horizon, rng):
        events.append(tau)
        if len(events) > max_events:
            logger.warning(f"Simulated path exceeded {max_events} events before t={tau:.6g}")
            raise RunawayPathError(
                f"Simulated path exceeded the event cap of {max_events} at t={tau:.6g} "
                f"(eta={params.kernel.eta:.6g}); the parameters are too close to criticality"
            )
    return EventHistory(tau=np.asarray(events, dtype=float), horizon=horizon)


def simulate_hawkes(config: SimConfig) -> EventHistory:
    """Returns a Hawkes path reproducible from (seed, replicate)

    Args:
        config (SimConfig): Simulation settings

    Returns:
        EventHistory: Event times on (0, horizon]
    """
    rng = rng_stream(config.seed, StreamKeys.simulate, config.replicate)
    history = simulate_path(config.params, config.horizon, rng, max_events=config.max_events)
    logger.debug(f"Simulated {len(history)} events on (0, {config.horizon}] (replicate {config.replicate})")
    return history


def _check_grid(times) -> np.ndarray:
    grid = np.asarray(times, dtype=float).reshape(-1)
    if grid.size < 1 or grid[0] != 0.0:
        raise ValueError("Observation grid must start at t_0 = 0")
    if np.any(np.diff(grid) <= 0.0):
        bad = int(np.argmax(np.diff(grid) <= 0.0)) + 1
        raise ValueError(f"Observation grid must be strictly increasing; violated at t_{bad}={grid[bad]}")
    return grid


def regular_grid(horizon: float, delta: float) -> np.ndarray:
    """Returns the grid 0, delta, 2 delta, ..., horizon (last step may be shorter)"""
    if not (delta > 0.0 and horizon > 0.0):
        raise ValueError(f"Grid needs positive horizon and step, got horizon={horizon}, delta={delta}")
    n_steps = int(np.ceil(horizon / delta - 1e-9))
    grid = np.minimum(np.arange(n_steps + 1) * delta, horizon)
    grid[-1] = horizon
    return grid


def discretize_counts(history: EventHistory, times) -> CountData:
    """Returns counts n_i of events in (t_{i-1}, t_i]

    Raises:
        ValueError: Raised if the grid is not strictly increasing from 0, or
            ends after the path horizon
    """
    grid = _check_grid(times)
    if isinstance(history, EventHistory):
        if grid[-1] > history.horizon:
            raise ValueError(f"Grid end {grid[-1]} exceeds the path horizon {history.horizon}")
        tau = history.tau
    else:
        tau = np.asarray(history, dtype=float)
    cumulative = np.searchsorted(tau, grid, side="right")
    return CountData(times=grid, counts=np.diff(cumulative))


def _path_matches(params: HawkesParams, grid: np.ndarray, target: np.ndarray,
                  rng: np.random.Generator) -> bool:
    # abandons the path as soon as an interval count can no longer match
    interval = 0
    count = 0
    for tau in _event_stream(params, grid[-1], rng):
        while tau > grid[interval + 1]:
            if count != target[interval]:
                return False
            interval += 1
            count = 0
        count += 1
        if count > target[interval]:
            return False
    if count != target[interval]:
        return False
    return not np.any(target[interval + 1:] != 0)


def brute_force_prob(params: HawkesParams, grid, target_counts, n_sims: int, seed: int,
                     threads: int = 1, chunk: int = SimDefaults.oracle_chunk) -> OracleEstimate:
    """Returns the fraction of simulated paths whose counts equal target_counts

    Work is split into fixed chunks with their own streams, so the result
    does not depend on the worker count.

    Args:
        params (HawkesParams): Model parameters
        grid (array): Observation times t_0 = 0 < ... < t_m
        target_counts (array): Counts n_1..n_m to match exactly
        n_sims (int): Number of simulated paths
        seed (int): Run seed
        threads (int, optional): Worker processes. Defaults to 1.

    Returns:
        OracleEstimate: Probability, binomial standard error, n_sims
    """
    if n_sims < 1:
        raise ValueError(f"n_sims must be at least 1, got {n_sims}")
    grid = _check_grid(grid)
    target = np.asarray(target_counts).reshape(-1)
    if target.size != grid.size - 1:
        raise ValueError(f"Expected {grid.size - 1} target counts, got {target.size}")
    if np.any(target < 0):
        return OracleEstimate(probability=0.0, standard_error=0.0, n_sims=n_sims)

    starts = list(range(0, n_sims, chunk))

    def run_chunk(index: int) -> int:
        rng = rng_stream(seed, StreamKeys.oracle, index)
        size = min(chunk, n_sims - starts[index])
        return sum(_path_matches(params, grid, target, rng) for _ in range(size))

    hits = sum(parallel_map(run_chunk, range(len(starts)), threads=threads))
    p_hat = hits / n_sims
    se = float(np.sqrt(p_hat * (1.0 - p_hat) / n_sims))
    logger.info(f"Oracle: {hits} of {n_sims} paths matched the target counts (p={p_hat:.6g}, se={se:.3g})")
    return OracleEstimate(probability=p_hat, standard_error=se, n_sims=n_sims)


def predictive_paths(draws: np.ndarray, family: KernelFamily, data: CountData, n_paths: int,
                     seed: int, ci_level: float = PmmhDefaults.ci_level,
                     threads: int = 1) -> PredictiveBands:
    """Simulates cumulative count paths of parameter draws on the data grid

    Args:
        draws (np.ndarray): Natural-scale parameter rows, e.g. post-burn-in chain draws
        family (KernelFamily): Kernel family of the rows
        data (CountData): Observed data supplying the grid and the observed path
        n_paths (int): Number of simulated paths
        seed (int): Run seed

    Returns:
        PredictiveBands: Paths, pointwise bands and the observed-path coverage
    """
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    names = param_names(family)
    if draws.shape[1] != len(names):
        raise ValueError(f"Expected {len(names)} columns {names}, got {draws.shape[1]}")
    if n_paths < 1 or draws.shape[0] < 1:
        raise ValueError("Need at least one draw and one path")
    picker = rng_stream(seed, StreamKeys.predictive, 0)
    rows = picker.integers(0, draws.shape[0], size=n_paths)

    def run_path(k: int) -> np.ndarray:
        params = from_natural(draws[rows[k]], family)
        rng = rng_stream(seed, StreamKeys.predictive, k + 1)
        path = simulate_path(params, data.horizon, rng)
        return np.searchsorted(path.tau, data.times[1:], side="right")

    paths = np.vstack(parallel_map(run_path, range(n_paths), threads=threads))
    tail = (1.0 - ci_level) / 2.0
    lower, median, upper = np.quantile(paths, [tail, 0.5, 1.0 - tail], axis=0)
    observed = np.asarray(data.cumulative)
    coverage = float(np.mean((observed >= lower) & (observed <= upper))) if data.m else np.nan
    logger.info(f"Observed path inside the pointwise band at {coverage:.1%} of grid points")
    return PredictiveBands(
        times=data.times[1:], observed=observed, paths=paths,
        lower=lower, median=median, upper=upper, coverage=coverage,
    )
