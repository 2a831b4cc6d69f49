"""Parametric Hawkes model with a constant background rate.

Kernels are parametrised so that their total mass is the branching ratio
eta. All likelihood arithmetic stays in log space.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union
from scipy.special import expit, gammainc, gammaln, logit
import numpy as np
import logging


logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# exp() arguments are clipped here so transformed draws never overflow
_LOG_CLIP = 700.0
_ETA_MAX = float(np.nextafter(1.0, 0.0))
_ETA_MIN = float(np.nextafter(0.0, 1.0))
# rows of the pairwise event-difference matrix evaluated at once
_ROW_CHUNK = 512


class KernelFamily(str, Enum):
    EXPONENTIAL = "exponential"
    GAMMA = "gamma"
    WEIBULL = "weibull"

    @property
    def has_shape(self) -> bool:
        return self is not KernelFamily.EXPONENTIAL


@dataclass(frozen=True)
class ExcitationKernel:
    """Excitation kernel g with integral eta over (0, inf)

    Args:
        family (KernelFamily): Kernel family
        eta (float): Branching ratio, 0 <= eta < 1
        beta (float): Scale, in time units
        alpha (Optional[float]): Shape, only for gamma and weibull kernels
    """

    family: KernelFamily
    eta: float
    beta: float
    alpha: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        if not (0.0 <= self.eta < 1.0):
            raise ValueError(f"Branching ratio eta must satisfy 0 <= eta < 1, got {self.eta}")
        if not (np.isfinite(self.beta) and self.beta > 0.0):
            raise ValueError(f"Kernel scale beta must be positive and finite, got {self.beta}")
        if self.family.has_shape:
            if self.alpha is None or not (np.isfinite(self.alpha) and self.alpha > 0.0):
                raise ValueError(
                    f"{self.family.value} kernel needs a positive shape alpha, got {self.alpha}"
                )
        elif self.alpha is not None:
            raise ValueError(f"Exponential kernel takes no shape parameter, got alpha={self.alpha}")

    @property
    def mode(self) -> float:
        """Location of the kernel maximum; 0 for non-increasing kernels"""
        if not self.family.has_shape or self.alpha <= 1.0:
            return 0.0
        elif self.family is KernelFamily.GAMMA:
            return (self.alpha - 1.0) * self.beta
        else:
            return self.beta * ((self.alpha - 1.0) / self.alpha) ** (1.0 / self.alpha)


@dataclass(frozen=True)
class HawkesParams:
    """Background rate nu plus an excitation kernel; the estimand theta"""

    nu: float
    kernel: ExcitationKernel

    def __post_init__(self):
        if not (np.isfinite(self.nu) and self.nu > 0.0):
            raise ValueError(f"Background rate nu must be positive and finite, got {self.nu}")

    @classmethod
    def exponential(cls, nu: float, eta: float, beta: float) -> "HawkesParams":
        return cls(nu=nu, kernel=ExcitationKernel(KernelFamily.EXPONENTIAL, eta=eta, beta=beta))

    @classmethod
    def gamma(cls, nu: float, eta: float, alpha: float, beta: float) -> "HawkesParams":
        return cls(nu=nu, kernel=ExcitationKernel(KernelFamily.GAMMA, eta=eta, beta=beta, alpha=alpha))

    @classmethod
    def weibull(cls, nu: float, eta: float, alpha: float, beta: float) -> "HawkesParams":
        return cls(nu=nu, kernel=ExcitationKernel(KernelFamily.WEIBULL, eta=eta, beta=beta, alpha=alpha))

    @property
    def family(self) -> KernelFamily:
        return self.kernel.family

    def as_dict(self) -> dict:
        """Returns natural-scale values keyed by parameter name, in vector order"""
        values = {"nu": self.nu, "eta": self.kernel.eta}
        if self.family.has_shape:
            values["alpha"] = self.kernel.alpha
        values["beta"] = self.kernel.beta
        return values

    @property
    def stationary_rate(self) -> float:
        """Long-run mean event rate nu / (1 - eta)"""
        return self.nu / (1.0 - self.kernel.eta)


def param_names(family: KernelFamily) -> tuple:
    """Returns parameter names of a family in transformed-vector order"""
    if KernelFamily(family).has_shape:
        return ("nu", "eta", "alpha", "beta")
    else:
        return ("nu", "eta", "beta")


@dataclass(frozen=True)
class EventHistory:
    """Strictly increasing event times in (0, horizon]"""

    tau: np.ndarray
    horizon: float

    def __post_init__(self):
        tau = np.array(self.tau, dtype=float).reshape(-1)
        if not np.isfinite(self.horizon) or self.horizon < 0.0:
            raise ValueError(f"Horizon must be finite and non-negative, got {self.horizon}")
        if tau.size > 0:
            if tau[0] <= 0.0 or tau[-1] > self.horizon:
                raise ValueError(
                    f"Event times must lie in (0, {self.horizon}], got range [{tau[0]}, {tau[-1]}]"
                )
            if np.any(np.diff(tau) <= 0.0):
                bad = int(np.argmax(np.diff(tau) <= 0.0)) + 1
                raise ValueError(f"Event times must be strictly increasing; violated at index {bad}")
        tau.setflags(write=False)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "horizon", float(self.horizon))

    def __len__(self) -> int:
        return self.tau.size


@dataclass(frozen=True)
class CountData:
    """Observation times t_0 = 0 < t_1 < ... < t_m and counts n_1..n_m"""

    times: np.ndarray
    counts: np.ndarray
    cumulative: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        times = np.array(self.times, dtype=float).reshape(-1)
        counts = np.array(self.counts).reshape(-1)
        if times.size < 1 or times[0] != 0.0:
            raise ValueError("Observation times must start at t_0 = 0")
        if counts.size != times.size - 1:
            raise ValueError(
                f"Expected {times.size - 1} counts for {times.size} observation times, got {counts.size}"
            )
        if not np.all(np.isfinite(times)) or np.any(np.diff(times) <= 0.0):
            raise ValueError("Observation times must be finite and strictly increasing")
        if counts.size > 0 and not np.all(counts == np.round(counts)):
            raise ValueError("Counts must be integers")
        counts = counts.astype(np.int64)
        if np.any(counts < 0):
            raise ValueError(f"Counts must be non-negative, got {counts.min()}")
        cumulative = np.cumsum(counts)
        for arr in (times, counts, cumulative):
            arr.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "cumulative", cumulative)

    @property
    def m(self) -> int:
        return self.counts.size

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def total(self) -> int:
        return int(self.cumulative[-1]) if self.m > 0 else 0


def kernel_density(kernel: ExcitationKernel, t: ArrayLike) -> ArrayLike:
    """Returns g(t), zero for t <= 0

    Args:
        kernel (ExcitationKernel): Excitation kernel
        t (ArrayLike): Time lag(s)

    Returns:
        ArrayLike: Kernel value(s), same shape as t
    """
    t_arr = np.asarray(t, dtype=float)
    out = np.zeros_like(t_arr)
    positive = t_arr > 0.0
    if kernel.eta == 0.0 or not np.any(positive):
        return out if out.ndim else float(out)
    x = t_arr[positive]
    beta, eta = kernel.beta, kernel.eta
    if kernel.family is KernelFamily.EXPONENTIAL:
        out[positive] = (eta / beta) * np.exp(-x / beta)
    elif kernel.family is KernelFamily.GAMMA:
        alpha = kernel.alpha
        log_g = np.log(eta) - gammaln(alpha) - alpha * np.log(beta) + (alpha - 1.0) * np.log(x) - x / beta
        out[positive] = np.exp(log_g)
    else:
        alpha = kernel.alpha
        z = x / beta
        log_g = np.log(eta) + np.log(alpha / beta) + (alpha - 1.0) * np.log(z) - z ** alpha
        out[positive] = np.exp(log_g)
    return out if out.ndim else float(out)


def kernel_cdf(kernel: ExcitationKernel, t: ArrayLike) -> ArrayLike:
    """Returns G(t), the kernel mass on (0, max(t, 0)]; G(inf) = eta

    The gamma family uses the regularized lower incomplete gamma function.
    """
    t_arr = np.maximum(np.asarray(t, dtype=float), 0.0)
    beta, eta = kernel.beta, kernel.eta
    if kernel.family is KernelFamily.EXPONENTIAL:
        out = -eta * np.expm1(-t_arr / beta)
    elif kernel.family is KernelFamily.GAMMA:
        out = eta * gammainc(kernel.alpha, t_arr / beta)
    else:
        out = -eta * np.expm1(-((t_arr / beta) ** kernel.alpha))
    return out if np.ndim(out) else float(out)


def _as_times(history) -> np.ndarray:
    if isinstance(history, EventHistory):
        return history.tau
    return np.asarray(history, dtype=float)


def intensity(params: HawkesParams, history, t: float) -> float:
    """Returns lambda(t) = nu + sum over events strictly before t of g(t - tau_k)

    Args:
        params (HawkesParams): Model parameters
        history (EventHistory | array): Event times
        t (float): Evaluation time

    Returns:
        float: Conditional intensity at t
    """
    tau = _as_times(history)
    return float(params.nu + np.sum(kernel_density(params.kernel, t - tau[tau < t])))


def compensator_segment(params: HawkesParams, tau, a: ArrayLike, b: ArrayLike) -> ArrayLike:
    """Returns the integrated intensity over [a, b] given event times tau

    nu * (b - a) + sum_k G(b - tau_k) - G(a - tau_k). tau may be a 1-D
    history or a (J, N) matrix of particle histories; a and b broadcast
    against the leading particle axis.
    """
    tau = _as_times(tau)
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    background = params.nu * (b_arr - a_arr)
    if tau.shape[-1] == 0 or params.kernel.eta == 0.0:
        return background if np.ndim(background) else float(background)
    a_col = a_arr[..., None] if a_arr.ndim else a_arr
    b_col = b_arr[..., None] if b_arr.ndim else b_arr
    excited = np.sum(
        kernel_cdf(params.kernel, b_col - tau) - kernel_cdf(params.kernel, a_col - tau), axis=-1
    )
    total = background + excited
    return total if np.ndim(total) else float(total)


def intensity_at_events(params: HawkesParams, tau: np.ndarray) -> np.ndarray:
    """Returns lambda(tau_i) for each event, using only events strictly before it"""
    tau = _as_times(tau)
    n = tau.size
    if n == 0 or params.kernel.eta == 0.0:
        return np.full(n, params.nu)
    kernel = params.kernel
    if kernel.family is KernelFamily.EXPONENTIAL:
        excitation = np.zeros(n)
        decay = np.exp(-np.diff(tau) / kernel.beta)
        jump = kernel.eta / kernel.beta
        for i in range(1, n):
            excitation[i] = decay[i - 1] * (excitation[i - 1] + jump)
        return params.nu + excitation
    lam = np.empty(n)
    for start in range(0, n, _ROW_CHUNK):
        rows = tau[start:start + _ROW_CHUNK]
        lags = rows[:, None] - tau[None, :]
        lam[start:start + rows.size] = params.nu + kernel_density(kernel, lags).sum(axis=1)
    return lam


def full_loglik(params: HawkesParams, history: EventHistory) -> float:
    """Returns the log-likelihood of a continuously observed path on [0, T]

    sum_i log lambda(tau_i) - integral_0^T lambda; -inf when some
    lambda(tau_i) is zero.
    """
    lam = intensity_at_events(params, history.tau)
    if np.any(lam <= 0.0):
        logger.warning("Zero intensity at an observed event; log-likelihood is -inf")
        return -np.inf
    compensator = compensator_segment(params, history.tau, 0.0, history.horizon)
    return float(np.sum(np.log(lam)) - compensator)


def from_natural(values, family: KernelFamily = KernelFamily.EXPONENTIAL) -> HawkesParams:
    """Returns HawkesParams from natural-scale values ordered as param_names(family)"""
    family = KernelFamily(family)
    names = param_names(family)
    vec = np.asarray(values, dtype=float).reshape(-1)
    if vec.size != len(names):
        raise ValueError(f"{family.value} kernel needs values for {names}, got {vec.size}")
    row = dict(zip(names, vec.tolist()))
    kernel = ExcitationKernel(family, eta=row["eta"], beta=row["beta"], alpha=row.get("alpha"))
    return HawkesParams(nu=row["nu"], kernel=kernel)


def to_transformed(params: HawkesParams) -> np.ndarray:
    """Returns (log nu, logit eta, [log alpha], log beta)"""
    kernel = params.kernel
    with np.errstate(divide="ignore"):
        values = [np.log(params.nu), logit(kernel.eta)]
    if params.family.has_shape:
        values.append(np.log(kernel.alpha))
    values.append(np.log(kernel.beta))
    return np.array(values, dtype=float)


def from_transformed(vector, family: KernelFamily = KernelFamily.EXPONENTIAL) -> HawkesParams:
    """Returns HawkesParams from a transformed vector; always valid

    Coordinates are clipped so that exp() stays finite and positive and
    eta stays strictly inside (0, 1).
    """
    family = KernelFamily(family)
    vec = np.asarray(vector, dtype=float).reshape(-1)
    expected = len(param_names(family))
    if vec.size != expected:
        raise ValueError(f"{family.value} kernel needs {expected} transformed coordinates, got {vec.size}")
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"Transformed coordinates must be finite, got {vec}")
    clipped = np.clip(vec, -_LOG_CLIP, _LOG_CLIP)
    nu = float(np.exp(clipped[0]))
    eta = min(max(float(expit(vec[1])), _ETA_MIN), _ETA_MAX)
    beta = float(np.exp(clipped[-1]))
    if family.has_shape:
        alpha = float(np.exp(clipped[2]))
        kernel = ExcitationKernel(family, eta=eta, beta=beta, alpha=alpha)
    else:
        kernel = ExcitationKernel(family, eta=eta, beta=beta)
    return HawkesParams(nu=nu, kernel=kernel)
