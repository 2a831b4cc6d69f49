from prefect import flow, task, get_run_logger
from prefect.artifacts import create_markdown_artifact
from src.commons.hawkes_files import HawkesFiles
from src.commons.run_config import RunConfig
from src.commons.utils import get_date, get_time
from src.hawkes.model import CountData
from src.hawkes.pmmh import ChainOutput, Summary, pmmh_run, summarize_chain
from src.hawkes.simulator import PredictiveBands, predictive_paths
from src.hawkes.smc import collapse_zero_runs
from typing import Literal
import os


KernelChoices = Literal["exp", "gamma", "weibull"]


def output_names(counts_file: str, output_dir: str) -> dict:
    """Returns chain, summary, bands and paths file names derived from the counts file"""
    stem = os.path.splitext(os.path.basename(counts_file))[0] + "_" + get_date()
    return {
        key: os.path.join(output_dir, f"{stem}_{key}{ext}")
        for key, ext in [("chain", ".csv"), ("summary", ".txt"), ("bands", ".csv"), ("paths", ".csv")]
    }


@task(name="Run Sampler", log_prints=True)
def run_sampler(data: CountData, run: RunConfig) -> ChainOutput:
    return pmmh_run(run.to_pmmh_config(), data)


@task(name="Posterior Predictive Paths", log_prints=True)
def predictive_task(output: ChainOutput, data: CountData, run: RunConfig, n_paths: int) -> PredictiveBands:
    return predictive_paths(
        output.natural[run.burn_in:], output.family, data, n_paths=n_paths,
        seed=run.seed, ci_level=run.ci_level, threads=run.threads,
    )


@task
def fit_counts_md(counts_file: str, data: CountData, summary: Summary, bands: PredictiveBands, files: dict) -> None:
    """Creates an artifact of a counts fit"""
    markdown_report = f"""# Hawkes Fit of Interval Counts - {get_time()}
## Data

- **Counts file**
    - {counts_file}

- **Intervals / events / t_m**
    - {data.m} / {data.total} / {data.horizon:.6g}

## Chain summary

- **Acceptance rate**: {summary.acceptance_rate:.3f} over {summary.n_draws} post-burn-in draws

{summary.to_frame().to_markdown(tablefmt="pipe", index=False)}

## Posterior predictive check

- **Observed cumulative counts inside the pointwise band**: {bands.coverage:.1%}

## Outputs

{chr(10).join(f"- {k}: {v}" for k, v in files.items())}

"""
    create_markdown_artifact(
        key="hawkes-fit-counts",
        markdown=markdown_report,
        description="Pseudo-marginal fit of interval counts",
    )


@flow(
    name="Hawkes fit of interval counts",
    log_prints=True,
    flow_run_name=f"hawkes-fit-counts-{get_time()}",
)
def fit_counts(
    counts_file: str,
    kernel: KernelChoices = "exp",
    iterations: int = 50000,
    burn_in: int = 1000,
    step_sigma: float = 0.05,
    particles: int = 256,
    n_paths: int = 1000,
    seed: int = 1,
    threads: int = 1,
    output_dir: str = ".",
) -> Summary:
    """Prefect flow fitting a counts CSV and checking the fit by simulation

    Args:
        counts_file (str): Counts CSV with header t,count
        kernel (KernelChoices, optional): Kernel family. Defaults to "exp".
        iterations (int, optional): Chain length. Defaults to 50000.
        burn_in (int, optional): Burn-in. Defaults to 1000.
        step_sigma (float, optional): Random-walk sd. Defaults to 0.05.
        particles (int, optional): Particle count J. Defaults to 256.
        n_paths (int, optional): Posterior predictive paths. Defaults to 1000.
        seed (int, optional): Run seed. Defaults to 1.
        threads (int, optional): Worker processes. Defaults to 1.
        output_dir (str, optional): Folder of the outputs. Defaults to ".".
    """
    logger = get_run_logger()
    run = RunConfig(kernel=kernel, iterations=iterations, burn_in=burn_in, step_sigma=step_sigma,
                    particles=particles, seed=seed, threads=threads)
    raw = HawkesFiles.load_counts(counts_file)
    data = collapse_zero_runs(raw)
    logger.info(f"Read {raw.m} intervals ({data.m} after merging zero runs), {raw.total} events")

    output = run_sampler(data=data, run=run)
    summary = summarize_chain(output, run.burn_in, ci_level=run.ci_level)
    logger.info(f"Acceptance rate {summary.acceptance_rate:.3f}")

    bands = predictive_task(output=output, data=raw, run=run, n_paths=n_paths)

    os.makedirs(output_dir, exist_ok=True)
    files = output_names(counts_file, output_dir)
    HawkesFiles.save_chain(output, files["chain"])
    HawkesFiles.save_summary(summary, files["summary"])
    HawkesFiles.save_bands(bands, files["bands"])
    HawkesFiles.save_paths(bands, files["paths"])
    logger.info(f"Outputs written to {output_dir}")

    fit_counts_md(counts_file=counts_file, data=raw, summary=summary, bands=bands, files=files)
    return summary
