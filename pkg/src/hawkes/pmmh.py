"""Pseudo-marginal Metropolis-Hastings over transformed Hawkes parameters.

The particle estimate of the likelihood replaces the exact one; the
estimate attached to the current state is cached and only replaced when a
proposal is accepted.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional
from scipy.stats import norm, poisson
from tqdm import tqdm
from src.commons.literals import PmmhDefaults, StreamKeys
from src.commons.utils import rng_stream
from src.hawkes.model import (
    CountData,
    EventHistory,
    HawkesParams,
    KernelFamily,
    from_transformed,
    full_loglik,
    param_names,
    to_transformed,
)
from src.hawkes.smc import SmcConfig, smc_loglik
import numpy as np
import pandas as pd
import logging


logger = logging.getLogger(__name__)

LoglikFn = Callable[[HawkesParams, np.random.Generator], float]


@dataclass(frozen=True)
class PmmhConfig:
    """Sampler settings

    Args:
        iterations (int): Post-initialisation iterations. Defaults to 50000.
        burn_in (int): Records discarded by summaries. Defaults to 1000.
        step_sigma (float): Random-walk standard deviation on every transformed coordinate. Defaults to 0.05.
        smc (SmcConfig): Particle filter settings
        init (Optional[tuple]): Transformed starting vector; drawn from N(0, I) when None
        seed (int): Run seed. Defaults to 0.
        family (KernelFamily): Kernel family being fitted. Defaults to exponential.
        step_sigmas (Optional[tuple]): Per-coordinate standard deviations overriding step_sigma
    """

    iterations: int = PmmhDefaults.iterations
    burn_in: int = PmmhDefaults.burn_in
    step_sigma: float = PmmhDefaults.step_sigma
    smc: SmcConfig = field(default_factory=SmcConfig)
    init: Optional[tuple] = None
    seed: int = 0
    family: KernelFamily = KernelFamily.EXPONENTIAL
    step_sigmas: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        if not (self.iterations > self.burn_in >= 0):
            raise ValueError(
                f"Need iterations > burn_in >= 0, got iterations={self.iterations}, burn_in={self.burn_in}"
            )
        if not self.step_sigma > 0.0:
            raise ValueError(f"Step sigma must be positive, got {self.step_sigma}")
        if self.seed < 0:
            raise ValueError(f"Seed must be non-negative, got {self.seed}")
        dim = len(param_names(self.family))
        if self.init is not None:
            init = tuple(float(x) for x in self.init)
            if len(init) != dim or not np.all(np.isfinite(init)):
                raise ValueError(f"Initial vector needs {dim} finite coordinates, got {self.init}")
            object.__setattr__(self, "init", init)
        if self.step_sigmas is not None:
            sigmas = tuple(float(x) for x in self.step_sigmas)
            if len(sigmas) != dim or min(sigmas) <= 0.0:
                raise ValueError(f"Per-coordinate step sigmas need {dim} positive values, got {self.step_sigmas}")
            object.__setattr__(self, "step_sigmas", sigmas)

    @property
    def sigmas(self) -> np.ndarray:
        if self.step_sigmas is not None:
            return np.asarray(self.step_sigmas)
        return np.full(len(param_names(self.family)), self.step_sigma)


@dataclass(frozen=True)
class ChainState:
    """Current transformed draw and the log-likelihood estimate it was accepted with"""

    theta: np.ndarray
    cached_loglik: float


@dataclass(frozen=True)
class ChainOutput:
    """Per-iteration records of a chain, initial state excluded"""

    family: KernelFamily
    iteration: np.ndarray
    transformed: np.ndarray
    natural: np.ndarray
    loglik: np.ndarray
    accepted: np.ndarray
    log_ratio: np.ndarray
    init_transformed: Optional[np.ndarray] = None
    init_loglik: float = np.nan

    def __len__(self) -> int:
        return self.iteration.size

    @property
    def names(self) -> tuple:
        return param_names(self.family)

    def to_frame(self) -> pd.DataFrame:
        """Returns the chain as iter, natural-scale parameters, loglik, accepted"""
        frame = pd.DataFrame(self.natural, columns=list(self.names))
        frame.insert(0, "iter", self.iteration)
        frame["loglik"] = self.loglik
        frame["accepted"] = self.accepted.astype(int)
        return frame

    @classmethod
    def from_natural(cls, family: KernelFamily, iteration, natural, loglik, accepted) -> "ChainOutput":
        """Rebuilds a chain from stored natural-scale draws"""
        family = KernelFamily(family)
        natural = np.atleast_2d(np.asarray(natural, dtype=float))
        with np.errstate(divide="ignore"):
            transformed = np.log(natural)
            transformed[:, 1] = np.log(natural[:, 1]) - np.log1p(-natural[:, 1])
        return cls(
            family=family,
            iteration=np.asarray(iteration, dtype=np.int64),
            transformed=transformed,
            natural=natural,
            loglik=np.asarray(loglik, dtype=float),
            accepted=np.asarray(accepted).astype(bool),
            log_ratio=np.full(natural.shape[0], np.nan),
        )


@dataclass(frozen=True)
class ParamSummary:
    est: float
    lower: float
    upper: float
    se: float


@dataclass(frozen=True)
class Summary:
    """Quantile summaries of the post-burn-in chain

    rows holds one ParamSummary per natural-scale parameter, then the
    derived stationary rate ("mean_rate") and the cached log-likelihood
    ("loglik").
    """

    rows: dict
    acceptance_rate: float
    n_draws: int
    burn_in: int

    @property
    def params(self) -> tuple:
        return tuple(k for k in self.rows.keys() if k not in ("mean_rate", "loglik"))

    def to_frame(self) -> pd.DataFrame:
        """Returns one row per summarised quantity: name, est, lower, upper, se"""
        return pd.DataFrame(
            [[name, row.est, row.lower, row.upper, row.se] for name, row in self.rows.items()],
            columns=["name", "est", "lower", "upper", "se"],
        )


def acceptance_ratio(proposed_loglik: float, cached_loglik: float) -> float:
    """Returns log A = proposed - cached for a symmetric proposal

    -inf when the proposal has zero estimated likelihood; +inf when only the
    current state does.
    """
    if np.isneginf(proposed_loglik) or np.isnan(proposed_loglik):
        return -np.inf
    if np.isneginf(cached_loglik):
        return np.inf
    return float(proposed_loglik - cached_loglik)


def accept_proposal(log_ratio: float, u: float) -> bool:
    """Accepts iff log u <= log A, never for log A = -inf"""
    if np.isneginf(log_ratio):
        return False
    with np.errstate(divide="ignore"):
        return bool(np.log(u) <= log_ratio)


def smc_loglik_fn(data: CountData, smc: SmcConfig) -> LoglikFn:
    """Returns the particle-filter log-likelihood of data as a sampler target"""

    def loglik(params: HawkesParams, rng: np.random.Generator) -> float:
        return smc_loglik(params, data, smc, rng=rng)

    return loglik


def poisson_count_loglik_fn(data: CountData) -> LoglikFn:
    """Returns the exact count log-likelihood of a homogeneous Poisson process

    Only nu enters; this is the eta = 0 model, used to check the sampler as
    ordinary Metropolis-Hastings.
    """
    widths = np.diff(data.times)

    def loglik(params: HawkesParams, rng: np.random.Generator) -> float:
        return float(np.sum(poisson.logpmf(data.counts, params.nu * widths)))

    return loglik


def full_loglik_fn(history: EventHistory) -> LoglikFn:
    """Returns the continuous-observation log-likelihood of a path as a sampler target"""

    def loglik(params: HawkesParams, rng: np.random.Generator) -> float:
        return full_loglik(params, history)

    return loglik


def pmmh_step(state: ChainState, config: PmmhConfig, loglik_fn: LoglikFn,
              rng: np.random.Generator, iteration: int) -> tuple:
    """Runs one random-walk proposal with a fresh likelihood estimate

    Args:
        state (ChainState): Current state
        config (PmmhConfig): Sampler settings
        loglik_fn (LoglikFn): Log-likelihood estimator
        rng (np.random.Generator): Chain stream for the step and the uniform
        iteration (int): Iteration index keying the estimator's stream

    Returns:
        tuple: (next ChainState, record dict)
    """
    theta_star = state.theta + config.sigmas * rng.standard_normal(state.theta.size)
    params_star = from_transformed(theta_star, config.family)
    estimate_rng = rng_stream(config.seed, StreamKeys.smc, iteration)
    proposed = float(loglik_fn(params_star, estimate_rng))
    log_ratio = acceptance_ratio(proposed, state.cached_loglik)
    u = rng.uniform()
    accepted = accept_proposal(log_ratio, u)
    if accepted:
        state = ChainState(theta=theta_star, cached_loglik=proposed)
    record = {
        "iteration": iteration,
        "theta": state.theta,
        "loglik": state.cached_loglik,
        "accepted": accepted,
        "log_ratio": log_ratio,
    }
    return state, record


def pmmh_run(config: PmmhConfig, data: Optional[CountData], loglik_fn: Optional[LoglikFn] = None,
             progress: bool = False) -> ChainOutput:
    """Runs the chain from its initial state for config.iterations steps

    Args:
        config (PmmhConfig): Sampler settings
        data (Optional[CountData]): Observed counts; may be None when loglik_fn is given
        loglik_fn (Optional[LoglikFn]): Target log-likelihood; defaults to the particle filter on data
        progress (bool, optional): Show a progress bar. Defaults to False.

    Returns:
        ChainOutput: One record per iteration
    """
    if loglik_fn is None:
        if data is None or data.m < 1:
            raise ValueError("Count data must contain at least one interval")
        loglik_fn = smc_loglik_fn(data, config.smc)
    family = config.family
    dim = len(param_names(family))
    if config.init is not None:
        theta0 = np.asarray(config.init, dtype=float)
    else:
        theta0 = rng_stream(config.seed, StreamKeys.init, 0).standard_normal(dim)
    init_loglik = float(loglik_fn(from_transformed(theta0, family), rng_stream(config.seed, StreamKeys.smc, 0)))
    logger.info(
        f"Starting chain: {config.iterations} iterations, family={family.value}, "
        f"init={np.round(theta0, 4).tolist()}, init loglik={init_loglik:.6g}"
    )
    state = ChainState(theta=theta0, cached_loglik=init_loglik)
    chain_rng = rng_stream(config.seed, StreamKeys.chain, 0)

    n = config.iterations
    transformed = np.empty((n, dim))
    loglik = np.empty(n)
    accepted = np.zeros(n, dtype=bool)
    log_ratio = np.empty(n)
    for k in tqdm(range(n), disable=not progress, desc="pmmh"):
        state, record = pmmh_step(state, config, loglik_fn, chain_rng, iteration=k + 1)
        transformed[k] = record["theta"]
        loglik[k] = record["loglik"]
        accepted[k] = record["accepted"]
        log_ratio[k] = record["log_ratio"]
        if (k + 1) % max(n // 10, 1) == 0:
            logger.debug(f"Iteration {k + 1}: loglik={state.cached_loglik:.6g}, accepted so far={accepted[:k + 1].mean():.3f}")
    natural = np.vstack([list(from_transformed(row, family).as_dict().values()) for row in transformed])
    logger.info(f"Chain finished, acceptance rate {accepted.mean():.3f}")
    return ChainOutput(
        family=family,
        iteration=np.arange(1, n + 1),
        transformed=transformed,
        natural=natural,
        loglik=loglik,
        accepted=accepted,
        log_ratio=log_ratio,
        init_transformed=theta0,
        init_loglik=init_loglik,
    )


def _quantile_row(values: np.ndarray, ci_level: float) -> ParamSummary:
    tail = (1.0 - ci_level) / 2.0
    lower, est, upper = np.quantile(values, [tail, 0.5, 1.0 - tail])
    se = (upper - lower) / (2.0 * norm.ppf(1.0 - tail))
    return ParamSummary(est=float(est), lower=float(lower), upper=float(upper), se=float(se))


def summarize_chain(output: ChainOutput, burn_in: int, ci_level: float = PmmhDefaults.ci_level) -> Summary:
    """Returns medians, percentile limits and quantile-based SEs after burn-in

    SE is the width of the central interval divided by 2 * Phi^{-1}(0.975).

    Raises:
        ValueError: Raised if burn_in is negative or not shorter than the chain
    """
    if not (0 <= burn_in < len(output)):
        raise ValueError(f"Burn-in {burn_in} must be non-negative and shorter than the chain ({len(output)} records)")
    natural = output.natural[burn_in:]
    rows = {name: _quantile_row(natural[:, j], ci_level) for j, name in enumerate(output.names)}
    eta = natural[:, output.names.index("eta")]
    rows["mean_rate"] = _quantile_row(natural[:, 0] / (1.0 - eta), ci_level)
    rows["loglik"] = _quantile_row(output.loglik[burn_in:], ci_level)
    acceptance_rate = float(np.mean(output.accepted[burn_in:]))
    return Summary(rows=rows, acceptance_rate=acceptance_rate, n_draws=natural.shape[0], burn_in=burn_in)
