from prefect import flow, task, get_run_logger
from prefect.artifacts import create_markdown_artifact
from src.commons.run_config import RunConfig
from src.commons.utils import get_time, parallel_map
from src.hawkes.model import CountData, HawkesParams
from src.hawkes.simulator import OracleEstimate, brute_force_prob
from src.hawkes.smc import SmcConfig, smc_loglik
from typing import Literal, Optional, TypeVar
import numpy as np
import pandas as pd


DataFrame = TypeVar("DataFrame")

KernelChoices = Literal["exp", "gamma", "weibull"]


def agreement_table(oracle: OracleEstimate, estimates: dict) -> DataFrame:
    """Returns one row per particle count comparing the SMC mean with the oracle

    Args:
        oracle (OracleEstimate): Brute-force probability and its SE
        estimates (dict): Particle count -> array of likelihood estimates (probability scale)

    Returns:
        DataFrame: J, reps, mean, se, variance, z and agree (|z| <= 3)
    """
    rows = []
    for particles, values in estimates.items():
        values = np.asarray(values, dtype=float)
        mean = float(values.mean())
        variance = float(values.var(ddof=1)) if values.size > 1 else np.nan
        se = float(np.sqrt(variance / values.size)) if values.size > 1 else np.nan
        combined = np.sqrt(se**2 + oracle.standard_error**2)
        z = (mean - oracle.probability) / combined if combined > 0 else np.nan
        rows.append([particles, values.size, mean, se, variance, z, bool(abs(z) <= 3.0)])
    return pd.DataFrame(rows, columns=["J", "reps", "mean", "se", "variance", "z", "agree"])


def variance_ratio(table: DataFrame) -> float:
    """Returns the variance at the smallest particle count over that at the largest"""
    ordered = table.sort_values("J")
    return float(ordered["variance"].iloc[0] / ordered["variance"].iloc[-1])


@task(name="SMC Replicates", log_prints=True)
def smc_replicates(params: HawkesParams, data: CountData, particles: int, reps: int,
                   seed: int, first_stream: int = 0, threads: int = 1) -> np.ndarray:
    """Returns reps independent likelihood estimates on the probability scale"""

    def estimate(replicate: int) -> float:
        config = SmcConfig(particles=particles, seed=seed, stream=first_stream + replicate)
        return float(np.exp(smc_loglik(params, data, config)))

    return np.asarray(parallel_map(estimate, range(reps), threads=threads))


@task(name="Brute Force Oracle", log_prints=True)
def oracle_task(params: HawkesParams, data: CountData, n_sims: int, seed: int, threads: int = 1) -> OracleEstimate:
    return brute_force_prob(params, data.times, data.counts, n_sims=n_sims, seed=seed, threads=threads)


@task
def unbiasedness_md(params: HawkesParams, data: CountData, oracle: OracleEstimate, table: DataFrame) -> None:
    """Creates an artifact of the unbiasedness study"""
    ratio = variance_ratio(table) if table.shape[0] > 1 else np.nan
    markdown_report = f"""# Particle Likelihood Unbiasedness Study - {get_time()}
## Configuration

- **Parameters**
    - {params.as_dict()} ({params.family.value} kernel)

- **Observation times**
    - {data.times.tolist()}

- **Target counts**
    - {data.counts.tolist()}

## Brute-force oracle

- **Probability**: {oracle.probability:.6g} (SE {oracle.standard_error:.3g}, {oracle.n_sims} paths)

## Particle estimates

{table.to_markdown(tablefmt="pipe", index=False)}

- **Variance ratio (smallest J / largest J)**: {ratio:.3g}

"""
    create_markdown_artifact(
        key="hawkes-unbiasedness-study",
        markdown=markdown_report,
        description="Particle likelihood estimates against the brute-force oracle",
    )


@flow(
    name="Hawkes particle likelihood unbiasedness",
    log_prints=True,
    flow_run_name=f"hawkes-unbiasedness-{get_time()}",
)
def unbiasedness_study(
    nu: float = 1.0,
    eta: float = 0.6,
    beta: float = 0.1,
    alpha: Optional[float] = 2.0,
    kernel: KernelChoices = "gamma",
    times: list[float] = [0.0, 1.0, 2.0],
    counts: list[int] = [1, 2],
    particle_counts: list[int] = [64, 256],
    reps: int = 1000,
    n_sims: int = 1000000,
    seed: int = 1,
    threads: int = 1,
) -> DataFrame:
    """Prefect flow comparing mean particle estimates with a brute-force oracle

    Args:
        nu (float, optional): Background rate. Defaults to 1.0.
        eta (float, optional): Branching ratio. Defaults to 0.6.
        beta (float, optional): Kernel scale. Defaults to 0.1.
        alpha (Optional[float], optional): Kernel shape. Defaults to 2.0.
        kernel (KernelChoices, optional): Kernel family. Defaults to "gamma".
        times (list[float], optional): Observation times starting at 0. Defaults to [0, 1, 2].
        counts (list[int], optional): Target interval counts. Defaults to [1, 2].
        particle_counts (list[int], optional): Particle counts to study. Defaults to [64, 256].
        reps (int, optional): Estimates per particle count. Defaults to 1000.
        n_sims (int, optional): Oracle paths. Defaults to 1000000.
        seed (int, optional): Run seed. Defaults to 1.
        threads (int, optional): Worker processes. Defaults to 1.
    """
    logger = get_run_logger()
    run = RunConfig(kernel=kernel, nu=nu, eta=eta, alpha=alpha if kernel != "exp" else None,
                    beta=beta, seed=seed, threads=threads)
    params = run.to_params()
    data = CountData(times=times, counts=counts)

    oracle = oracle_task(params=params, data=data, n_sims=n_sims, seed=seed, threads=threads)
    logger.info(f"Oracle probability {oracle.probability:.6g} (SE {oracle.standard_error:.3g})")

    estimates = {}
    for k, particles in enumerate(particle_counts):
        estimates[particles] = smc_replicates(
            params=params, data=data, particles=particles, reps=reps,
            seed=seed, first_stream=k * reps, threads=threads,
        )
        logger.info(f"J={particles}: mean estimate {estimates[particles].mean():.6g} over {reps} replicates")

    table = agreement_table(oracle, estimates)
    unbiasedness_md(params=params, data=data, oracle=oracle, table=table)
    return table
