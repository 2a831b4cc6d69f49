from dataclasses import dataclass, field


@dataclass(frozen=True)
class SmcDefaults:
    """A class stores default settings of the particle filter
    """
    particles: int = 256
    # the n_i-th proposed event lands before t_i with this probability
    proposal_quantile: float = 0.95


@dataclass(frozen=True)
class PmmhDefaults:
    """A class stores default settings of the pseudo-marginal sampler
    """
    iterations: int = 50000
    burn_in: int = 1000
    step_sigma: float = 0.05
    ci_level: float = 0.95


@dataclass(frozen=True)
class SimDefaults:
    max_events: int = 10_000_000
    oracle_chunk: int = 10_000


@dataclass(frozen=True)
class StreamKeys:
    """Tags of the independent random streams derived from one seed.

    A stream is keyed by (seed, tag, index), so the chain, every filter
    call, every simulated replicate and every oracle chunk draw from
    non-overlapping counter-based sequences.
    """
    chain: int = 0
    smc: int = 1
    simulate: int = 2
    oracle: int = 3
    predictive: int = 4
    init: int = 5


@dataclass(frozen=True)
class CsvColumns:
    counts: tuple = ("t", "count")
    events: tuple = ("tau",)
    chain_head: tuple = ("iter",)
    chain_tail: tuple = ("loglik", "accepted")
    bands: tuple = ("t", "observed", "lower", "median", "upper")
    paths: tuple = ("path", "t", "cumulative")


@dataclass
class KernelFamilies:
    """Kernel families accepted on the command line, keyed by flag value,
    with the shape parameter requirement of each family
    """
    exp: dict = field(default_factory=lambda: {"family": "exponential", "shape": False})
    gamma: dict = field(default_factory=lambda: {"family": "gamma", "shape": True})
    weibull: dict = field(default_factory=lambda: {"family": "weibull", "shape": True})


THREADS_ENV = "HAWKES_THREADS"
