"""Bootstrap particle filter estimate of the likelihood of interval counts.

Particles are hidden event-time histories. Every particle carries exactly
N_i events after interval i, so the generic state is a (J, N_i) matrix;
with an exponential kernel the state collapses to one excitation scalar
per particle. New events in an interval with n_i >= 1 come from a Poisson
proposal whose n_i-th event precedes t_i with probability 0.95.
"""
from dataclasses import dataclass
from typing import Optional, Union
from scipy.special import gammaincinv
from src.commons.literals import SmcDefaults, StreamKeys
from src.commons.utils import log_mean_exp, rng_stream
from src.hawkes.model import (
    CountData,
    HawkesParams,
    KernelFamily,
    compensator_segment,
    kernel_density,
)
import numpy as np
import logging


logger = logging.getLogger(__name__)


class FilterDegeneracyError(ArithmeticError):
    """Raised when every particle has zero fitness"""


@dataclass(frozen=True)
class SmcConfig:
    """Particle filter settings

    Args:
        particles (int): Particle count J. Defaults to 256.
        seed (int): Run seed. Defaults to 0.
        fast_path (bool): Use the excitation-state recursion for exponential kernels. Defaults to True.
        stream (int): Stream index, e.g. replicate number. Defaults to 0.
    """

    particles: int = SmcDefaults.particles
    seed: int = 0
    fast_path: bool = True
    stream: int = 0

    def __post_init__(self):
        if self.particles < 1:
            raise ValueError(f"Particle count must be at least 1, got {self.particles}")
        if self.seed < 0 or self.stream < 0:
            raise ValueError(f"Seed and stream must be non-negative, got {self.seed}, {self.stream}")


@dataclass(frozen=True)
class ProposalSpec:
    """Poisson proposal of the n events of interval (t_prev, t_cur]"""

    rho: float
    n: int
    t_prev: float
    t_cur: float


@dataclass(frozen=True)
class ParticleSystem:
    """J particles with their running log-fitness

    state is a (J, N) matrix of event histories on the generic path, or a
    (J,) vector of excitation values at the current boundary on the
    exponential fast path.
    """

    state: np.ndarray
    log_fitness: np.ndarray

    @property
    def size(self) -> int:
        return self.log_fitness.size

    @property
    def weights(self) -> np.ndarray:
        """Fitness normalised to sum to 1"""
        lf = self.log_fitness
        if np.all(np.isneginf(lf)):
            return np.zeros_like(lf)
        w = np.exp(lf - lf.max())
        return w / w.sum()


def collapse_zero_runs(data: CountData) -> CountData:
    """Merges every run of consecutive zero-count intervals into one interval

    Args:
        data (CountData): Observed counts

    Returns:
        CountData: Data with no two adjacent zero counts; total and t_m unchanged
    """
    times_out = [float(data.times[0])]
    counts_out = []
    for n, t in zip(data.counts.tolist(), data.times[1:].tolist()):
        if n == 0 and counts_out and counts_out[-1] == 0:
            times_out[-1] = t
        else:
            counts_out.append(n)
            times_out.append(t)
    return CountData(times=np.asarray(times_out), counts=np.asarray(counts_out, dtype=np.int64))


def poisson_rate(n_i: int, t_prev: float, t_cur: float,
                 quantile: float = SmcDefaults.proposal_quantile) -> ProposalSpec:
    """Returns the proposal whose n_i-th event lands by t_cur with probability quantile

    rho is the quantile of Gamma(n_i, 1) divided by the interval length.

    Raises:
        ValueError: Raised for n_i < 1 (zero-count intervals need no proposal)
            or an empty interval
    """
    if n_i < 1:
        raise ValueError(f"Zero-count intervals need no proposal, got n_i={n_i}")
    if not t_cur > t_prev:
        raise ValueError(f"Interval must have positive length, got ({t_prev}, {t_cur}]")
    rho = float(gammaincinv(n_i, quantile)) / (t_cur - t_prev)
    return ProposalSpec(rho=rho, n=int(n_i), t_prev=float(t_prev), t_cur=float(t_cur))


def propose_interval_events(spec: ProposalSpec, rng: np.random.Generator,
                            size: Optional[int] = None) -> np.ndarray:
    """Returns the first n event times after t_prev of a rate-rho Poisson process

    The times may exceed t_cur. With size given, returns a (size, n) matrix,
    one proposal per row.
    """
    shape = (spec.n,) if size is None else (size, spec.n)
    gaps = rng.exponential(1.0 / spec.rho, size=shape)
    return spec.t_prev + np.cumsum(gaps, axis=-1)


def interval_log_prob(params: HawkesParams, history: np.ndarray, t_prev: float, t_cur: float) -> np.ndarray:
    """Returns log P(no further events in the interval | history)

    -inf where the last event is after t_cur, otherwise minus the compensator
    from max(t_prev, last event) to t_cur. history is 1-D or (J, N).
    """
    history = np.asarray(history, dtype=float)
    if history.shape[-1] == 0:
        start = np.full(history.shape[:-1], float(t_prev))
    else:
        start = np.maximum(history[..., -1], t_prev)
    alive = start <= t_cur
    segment = compensator_segment(params, history, np.minimum(start, t_cur), t_cur)
    out = np.where(alive, -np.asarray(segment), -np.inf)
    return out if out.ndim else float(out)


def interval_prob(params: HawkesParams, history: np.ndarray, t_prev: float, t_cur: float):
    """Returns P(no further events in (t_prev, t_cur] | history), in [0, 1]"""
    return np.exp(interval_log_prob(params, history, t_prev, t_cur))


def particle_log_weight(params: HawkesParams, history: np.ndarray, new_times: np.ndarray,
                        spec: ProposalSpec) -> np.ndarray:
    """Returns the log Radon-Nikodym weight of proposed events against the Hawkes law

    sum log lambda(tau_k) - integral of lambda from t_prev to the last new
    event, minus the Poisson proposal log density n log rho - rho * span.
    history is (N,) or (J, N); new_times is (n,) or (J, n). The excitation
    is summed one new event at a time, so memory stays O(J * (N + n)).
    """
    history = np.asarray(history, dtype=float)
    new_times = np.asarray(new_times, dtype=float)
    if new_times.shape[-1] == 0:
        out = np.zeros(new_times.shape[:-1])
        return out if out.ndim else 0.0
    full = np.concatenate([history, new_times], axis=-1)
    n_hist = history.shape[-1]
    excitation = np.zeros(new_times.shape)
    for k in range(new_times.shape[-1]):
        # only events before the k-th new one excite it
        lags = new_times[..., k:k + 1] - full[..., :n_hist + k]
        excitation[..., k] = kernel_density(params.kernel, lags).sum(axis=-1)
    lam = params.nu + excitation
    last = new_times[..., -1]
    end = np.maximum(last, spec.t_prev)
    hawkes_log = np.log(lam).sum(axis=-1) - compensator_segment(params, full, spec.t_prev, end)
    proposal_log = spec.n * np.log(spec.rho) - spec.rho * (end - spec.t_prev)
    out = hawkes_log - proposal_log
    return out if np.ndim(out) else float(out)


def particle_weight(params: HawkesParams, history: np.ndarray, new_times: np.ndarray,
                    spec: ProposalSpec):
    """Returns the importance weight of proposed events; 1 when none are proposed"""
    return np.exp(particle_log_weight(params, history, new_times, spec))


def interval_log_terms(params: HawkesParams, history: np.ndarray, new_times: Optional[np.ndarray],
                       t_prev: float, t_cur: float, rho: Optional[float] = None) -> tuple:
    """Returns (log weight, log interval probability, extended history) per particle

    Generic-path computation for one interval; new_times is None or has zero
    columns for zero-count intervals.
    """
    history = np.asarray(history, dtype=float)
    if new_times is None or np.asarray(new_times).shape[-1] == 0:
        log_p = interval_log_prob(params, history, t_prev, t_cur)
        return np.zeros(np.shape(log_p)), log_p, history
    new_times = np.asarray(new_times, dtype=float)
    spec = ProposalSpec(rho=float(rho), n=new_times.shape[-1], t_prev=float(t_prev), t_cur=float(t_cur))
    log_w = particle_log_weight(params, history, new_times, spec)
    full = np.concatenate([history, new_times], axis=-1)
    log_p = interval_log_prob(params, full, t_prev, t_cur)
    return log_w, log_p, full


def exp_state_step(eps_in: np.ndarray, params: HawkesParams, new_times: Optional[np.ndarray],
                   t_prev: float, t_cur: float, rho: Optional[float] = None) -> tuple:
    """Advances the exponential-kernel excitation state across one interval

    Between events the excitation decays as exp(-dt / beta); each event
    adds eta / beta. Integrals of the intensity are closed-form in the
    excitation at the left end of each gap.

    Args:
        eps_in (np.ndarray): Excitation at t_prev, one value per particle
        params (HawkesParams): Parameters with an exponential kernel
        new_times (Optional[np.ndarray]): (J, n) proposed times, None for zero-count intervals
        t_prev (float): Interval start
        t_cur (float): Interval end
        rho (Optional[float]): Proposal rate, required when n >= 1

    Returns:
        tuple: (excitation at t_cur, log weight, log interval probability)
    """
    kernel = params.kernel
    if kernel.family is not KernelFamily.EXPONENTIAL:
        raise ValueError(f"Excitation-state recursion needs an exponential kernel, got {kernel.family.value}")
    nu, beta = params.nu, kernel.beta
    jump = kernel.eta / beta
    eps = np.asarray(eps_in, dtype=float)
    s = np.full(eps.shape, float(t_prev))
    log_w = np.zeros(eps.shape)
    if new_times is not None and np.asarray(new_times).shape[-1] > 0:
        new_times = np.asarray(new_times, dtype=float)
        n = new_times.shape[-1]
        log_lam = np.zeros(eps.shape)
        integral = np.zeros(eps.shape)
        for k in range(n):
            gap = new_times[..., k] - s
            at_event = eps * np.exp(-gap / beta)
            log_lam += np.log(nu + at_event)
            integral += nu * gap - eps * beta * np.expm1(-gap / beta)
            eps = at_event + jump
            s = new_times[..., k]
        log_w = log_lam - integral - (n * np.log(rho) - rho * (s - t_prev))
    tail = t_cur - s
    alive = tail >= 0.0
    tail = np.maximum(tail, 0.0)
    decay = np.exp(-tail / beta)
    log_p = np.where(alive, -(nu * tail - eps * beta * np.expm1(-tail / beta)), -np.inf)
    return eps * decay, log_w, log_p


def resample_multinomial(system: ParticleSystem, rng: np.random.Generator) -> ParticleSystem:
    """Draws J particles with probabilities proportional to their fitness

    Equal fitness everywhere passes the system through unchanged without
    drawing; the returned system has uniform (zero) log-fitness.

    Raises:
        FilterDegeneracyError: Raised if every fitness value is zero
    """
    lf = system.log_fitness
    if np.all(np.isneginf(lf)):
        raise FilterDegeneracyError("All particles have zero fitness")
    reset = np.zeros_like(lf)
    if np.all(lf == lf[0]):
        return ParticleSystem(state=system.state, log_fitness=reset)
    idx = rng.choice(system.size, size=system.size, replace=True, p=system.weights)
    return ParticleSystem(state=system.state[idx], log_fitness=reset)


def smc_loglik(params: HawkesParams, data: CountData, config: SmcConfig,
               rng: Optional[np.random.Generator] = None,
               return_terms: bool = False) -> Union[float, tuple]:
    """Returns the log of the unbiased particle estimate of P(counts | params)

    Each interval with n_i >= 1 resamples by accumulated fitness, proposes,
    weights and scores the particles. Zero-count intervals draw nothing and
    defer resampling, folding their probabilities into the fitness; the
    product of their factors equals the estimate on collapsed data.

    Args:
        params (HawkesParams): Model parameters
        data (CountData): Observed counts, ideally collapsed
        config (SmcConfig): Filter settings
        rng (Optional[np.random.Generator]): Generator to use instead of the config stream
        return_terms (bool, optional): Also return per-interval log contributions. Defaults to False.

    Returns:
        float | tuple: Log-likelihood estimate (-inf when degenerate), and the terms array
    """
    if rng is None:
        rng = rng_stream(config.seed, StreamKeys.smc, config.stream)
    J = config.particles
    fast = config.fast_path and params.family is KernelFamily.EXPONENTIAL
    state = np.zeros(J) if fast else np.zeros((J, 0))
    system = ParticleSystem(state=state, log_fitness=np.zeros(J))
    terms = np.full(data.m, np.nan)
    total = 0.0
    times = data.times
    for i, n in enumerate(data.counts.tolist()):
        t_prev, t_cur = float(times[i]), float(times[i + 1])
        if n > 0:
            try:
                system = resample_multinomial(system, rng)
            except FilterDegeneracyError:
                logger.warning(f"Filter degenerated before interval {i + 1}; log-likelihood is -inf")
                total = -np.inf
                break
            spec = poisson_rate(n, t_prev, t_cur)
            new_times = propose_interval_events(spec, rng, size=J)
            rho = spec.rho
        else:
            new_times, rho = None, None
        if fast:
            state, log_w, log_p = exp_state_step(system.state, params, new_times, t_prev, t_cur, rho)
        else:
            log_w, log_p, state = interval_log_terms(params, system.state, new_times, t_prev, t_cur, rho)
        increment = log_w + log_p
        term = log_mean_exp(increment, log_weights=system.log_fitness)
        terms[i] = term
        if not np.isfinite(term):
            logger.debug(f"Interval {i + 1} estimate is zero for params {params.as_dict()}")
            total = -np.inf
            break
        total += term
        log_fitness = system.log_fitness + increment
        top = log_fitness.max()
        if np.isfinite(top):
            log_fitness = log_fitness - top
        system = ParticleSystem(state=state, log_fitness=log_fitness)
    if return_terms:
        return total, terms
    return total
