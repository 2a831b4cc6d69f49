"""Command-line surface: simulate, discretize, loglik, oracle, fit,
summarize and predict.

Run from the repository root as ``python -m src.hawkes.cli <command>``.
A flat key=value file given with --config supplies option defaults for the
invoked command; flags on the command line win.
"""
from enum import Enum
from pathlib import Path
from typing import Annotated, Optional, Sequence
from pydantic import ValidationError
from src.commons.hawkes_files import HawkesFiles, FLOAT_FORMAT
from src.commons.literals import SimDefaults, THREADS_ENV
from src.commons.run_config import RunConfig, read_config_file
from src.commons.utils import get_logger, parallel_map
from src.hawkes.pmmh import pmmh_run, summarize_chain
from src.hawkes.simulator import (
    SimConfig,
    brute_force_prob,
    discretize_counts,
    predictive_paths,
    regular_grid,
    simulate_hawkes,
)
from src.hawkes.smc import collapse_zero_runs, smc_loglik
import click
import typer
import sys


class KernelName(str, Enum):
    exp = "exp"
    gamma = "gamma"
    weibull = "weibull"


app = typer.Typer(
    name="hawkes",
    help="Hawkes process simulation and inference from interval counts",
    add_completion=False,
    no_args_is_help=True,
    pretty_exceptions_enable=False,
)

Kernel = Annotated[KernelName, typer.Option("--kernel", help="Excitation kernel family")]
Nu = Annotated[Optional[float], typer.Option("--nu", help="Background rate")]
Eta = Annotated[Optional[float], typer.Option("--eta", help="Branching ratio, 0 <= eta < 1")]
Alpha = Annotated[Optional[float], typer.Option("--alpha", help="Kernel shape (gamma and weibull only)")]
Beta = Annotated[Optional[float], typer.Option("--beta", help="Kernel scale")]
Seed = Annotated[int, typer.Option("--seed", help="Seed of every random stream")]
Threads = Annotated[int, typer.Option("--threads", envvar=THREADS_ENV, help="Worker processes")]
Particles = Annotated[int, typer.Option("--J", "--particles", help="Particle count")]
Counts = Annotated[Path, typer.Option("--counts", help="Counts CSV with header t,count")]
Chain = Annotated[Path, typer.Option("--chain", help="Chain CSV written by fit")]
BurnIn = Annotated[int, typer.Option("--burn-in", help="Leading chain records to discard")]
CiLevel = Annotated[float, typer.Option("--ci-level", help="Central interval probability")]
Collapse = Annotated[bool, typer.Option("--collapse/--no-collapse", help="Merge runs of zero counts")]
FastPath = Annotated[bool, typer.Option("--fast-path/--no-fast-path", help="Excitation-state filter for exp kernels")]


def _run_config(**values) -> RunConfig:
    """Returns a validated RunConfig, reporting violations as usage errors"""
    try:
        return RunConfig(**values)
    except ValidationError as err:
        problems = "; ".join(
            f"{'.'.join(str(i) for i in e['loc']) or 'config'}: {e['msg']}" for e in err.errors()
        )
        raise click.UsageError(f"Invalid configuration: {problems}")


def _param_aliases(command: click.Command) -> dict:
    """Maps every spelling of a command's options (without dashes) to its parameter name"""
    aliases = {}
    for param in command.params:
        aliases[param.name] = param.name
        for opt in param.opts:
            aliases[opt.lstrip("-").replace("-", "_")] = param.name
    return aliases


def _echo_lines(lines: Sequence[str], out: Optional[Path]) -> None:
    if out is None:
        for line in lines:
            typer.echo(line)
    else:
        try:
            out.write_text("\n".join(lines) + "\n")
        except OSError as err:
            raise OSError(f"Could not write {out}: {err}") from err
    return None


@app.callback()
def main(
    ctx: typer.Context,
    config: Annotated[Optional[Path], typer.Option("--config", help="key=value file of option defaults")] = None,
    log_level: Annotated[str, typer.Option("--log-level", help="notset, debug, info, warning or error")] = "warning",
    log_file: Annotated[bool, typer.Option("--log-file", help="Also log to a dated file")] = False,
) -> None:
    get_logger("src", log_level, log_file)
    if config is not None and ctx.invoked_subcommand is not None:
        command = ctx.command.get_command(ctx, ctx.invoked_subcommand)
        try:
            values = read_config_file(str(config), allowed=_param_aliases(command))
        except ValueError as err:
            raise click.BadParameter(str(err), param_hint="--config")
        ctx.default_map = {ctx.invoked_subcommand: values}
    else:
        pass


@app.command()
def simulate(
    out: Annotated[Path, typer.Option("--out", help="Events CSV to write")],
    horizon: Annotated[float, typer.Option("--horizon", "--T", help="Censoring time T")],
    nu: Nu = None,
    eta: Eta = None,
    alpha: Alpha = None,
    beta: Beta = None,
    kernel: Kernel = KernelName.exp,
    seed: Seed = 0,
    replicate: Annotated[int, typer.Option("--replicate", help="Replicate index")] = 0,
    max_events: Annotated[int, typer.Option("--max-events", help="Event cap")] = SimDefaults.max_events,
) -> None:
    """Simulates one path on (0, T] and writes its event times"""
    run = _run_config(kernel=kernel.value, nu=nu, eta=eta, alpha=alpha, beta=beta, seed=seed)
    config = SimConfig(
        params=run.to_params(), horizon=horizon, seed=seed, replicate=replicate, max_events=max_events
    )
    history = simulate_hawkes(config)
    HawkesFiles.save_events(history, str(out))
    typer.echo(f"{len(history)} events written to {out}", err=True)


@app.command()
def discretize(
    events: Annotated[Path, typer.Option("--events", help="Events CSV")],
    out: Annotated[Path, typer.Option("--out", help="Counts CSV to write")],
    horizon: Annotated[float, typer.Option("--horizon", "--T", help="Observation end t_m")],
    delta: Annotated[float, typer.Option("--delta", help="Observation spacing")],
) -> None:
    """Counts events on the grid 0, delta, 2 delta, ..., T"""
    history = HawkesFiles.load_events(str(events), horizon=horizon)
    data = discretize_counts(history, regular_grid(horizon, delta))
    HawkesFiles.save_counts(data, str(out))
    typer.echo(f"{data.m} intervals, {data.total} events written to {out}", err=True)


@app.command()
def loglik(
    counts: Counts,
    nu: Nu = None,
    eta: Eta = None,
    alpha: Alpha = None,
    beta: Beta = None,
    kernel: Kernel = KernelName.exp,
    particles: Particles = 256,
    seed: Seed = 0,
    reps: Annotated[int, typer.Option("--reps", help="Independent estimates to print")] = 1,
    collapse: Collapse = True,
    fast_path: FastPath = True,
    threads: Threads = 1,
) -> None:
    """Prints particle estimates of the count log-likelihood, one per line"""
    run = _run_config(
        kernel=kernel.value, nu=nu, eta=eta, alpha=alpha, beta=beta, particles=particles,
        seed=seed, reps=reps, collapse=collapse, fast_path=fast_path, threads=threads,
    )
    params = run.to_params()
    data = HawkesFiles.load_counts(str(counts))
    if run.collapse:
        data = collapse_zero_runs(data)

    def estimate(replicate: int) -> float:
        return smc_loglik(params, data, run.to_smc_config(stream=replicate))

    values = parallel_map(estimate, range(run.reps), threads=run.threads)
    _echo_lines([FLOAT_FORMAT % v for v in values], None)


@app.command()
def oracle(
    counts: Counts,
    nu: Nu = None,
    eta: Eta = None,
    alpha: Alpha = None,
    beta: Beta = None,
    kernel: Kernel = KernelName.exp,
    sims: Annotated[int, typer.Option("--sims", help="Simulated paths")] = 100000,
    seed: Seed = 0,
    threads: Threads = 1,
) -> None:
    """Prints the brute-force probability of the exact counts and its SE"""
    run = _run_config(kernel=kernel.value, nu=nu, eta=eta, alpha=alpha, beta=beta, seed=seed, threads=threads)
    if sims < 1:
        raise click.BadParameter(f"must be at least 1, got {sims}", param_hint="--sims")
    data = HawkesFiles.load_counts(str(counts))
    result = brute_force_prob(run.to_params(), data.times, data.counts, n_sims=sims, seed=seed, threads=run.threads)
    _echo_lines([
        f"probability={FLOAT_FORMAT % result.probability}",
        f"standard_error={FLOAT_FORMAT % result.standard_error}",
        f"n_sims={result.n_sims}",
    ], None)


@app.command()
def fit(
    counts: Counts,
    chain_out: Annotated[Path, typer.Option("--chain-out", help="Chain CSV to write")],
    summary_out: Annotated[Optional[Path], typer.Option("--summary-out", help="Summary file; stdout when absent")] = None,
    kernel: Kernel = KernelName.exp,
    nu: Nu = None,
    eta: Eta = None,
    alpha: Alpha = None,
    beta: Beta = None,
    iterations: Annotated[int, typer.Option("--iterations", help="Chain length after the initial state")] = 50000,
    burn_in: BurnIn = 1000,
    step_sigma: Annotated[float, typer.Option("--step-sigma", help="Random-walk sd on the transformed scale")] = 0.05,
    particles: Particles = 256,
    seed: Seed = 0,
    collapse: Collapse = True,
    fast_path: FastPath = True,
    ci_level: CiLevel = 0.95,
    progress: Annotated[bool, typer.Option("--progress", help="Show a progress bar")] = False,
) -> None:
    """Runs the pseudo-marginal sampler on a counts CSV

    Model values, when all are given, are the starting point of the chain.
    """
    run = _run_config(
        kernel=kernel.value, nu=nu, eta=eta, alpha=alpha, beta=beta, iterations=iterations,
        burn_in=burn_in, step_sigma=step_sigma, particles=particles, seed=seed,
        collapse=collapse, fast_path=fast_path, ci_level=ci_level,
    )
    data = HawkesFiles.load_counts(str(counts))
    if run.collapse:
        data = collapse_zero_runs(data)
    output = pmmh_run(run.to_pmmh_config(), data, progress=progress)
    HawkesFiles.save_chain(output, str(chain_out))
    summary = summarize_chain(output, run.burn_in, ci_level=run.ci_level)
    _echo_lines(HawkesFiles.summary_lines(summary), summary_out)


@app.command()
def summarize(
    chain: Chain,
    burn_in: BurnIn = 1000,
    kernel: Annotated[Optional[KernelName], typer.Option("--kernel", help="Kernel family of the chain")] = None,
    ci_level: CiLevel = 0.95,
    out: Annotated[Optional[Path], typer.Option("--out", help="Summary file; stdout when absent")] = None,
) -> None:
    """Summarises an existing chain CSV"""
    if not 0.0 < ci_level < 1.0:
        raise click.BadParameter(f"must lie in (0, 1), got {ci_level}", param_hint="--ci-level")
    family = None if kernel is None else _run_config(kernel=kernel.value).family
    output = HawkesFiles.load_chain(str(chain), family=family)
    summary = summarize_chain(output, burn_in, ci_level=ci_level)
    _echo_lines(HawkesFiles.summary_lines(summary), out)


@app.command()
def predict(
    chain: Chain,
    counts: Counts,
    out: Annotated[Path, typer.Option("--out", help="Bands CSV to write")],
    paths_out: Annotated[Optional[Path], typer.Option("--paths-out", help="Path matrix CSV")] = None,
    kernel: Annotated[Optional[KernelName], typer.Option("--kernel", help="Kernel family of the chain")] = None,
    burn_in: BurnIn = 1000,
    paths: Annotated[int, typer.Option("--paths", help="Simulated paths")] = 1000,
    ci_level: CiLevel = 0.95,
    seed: Seed = 0,
    threads: Threads = 1,
) -> None:
    """Simulates posterior-predictive cumulative counts on the data grid"""
    if not 0.0 < ci_level < 1.0:
        raise click.BadParameter(f"must lie in (0, 1), got {ci_level}", param_hint="--ci-level")
    family = None if kernel is None else _run_config(kernel=kernel.value).family
    output = HawkesFiles.load_chain(str(chain), family=family)
    if not 0 <= burn_in < len(output):
        raise click.BadParameter(f"must be below the chain length {len(output)}", param_hint="--burn-in")
    data = HawkesFiles.load_counts(str(counts))
    bands = predictive_paths(
        output.natural[burn_in:], output.family, data, n_paths=paths, seed=seed,
        ci_level=ci_level, threads=threads,
    )
    HawkesFiles.save_bands(bands, str(out))
    if paths_out is not None:
        HawkesFiles.save_paths(bands, str(paths_out))
    typer.echo(f"coverage={FLOAT_FORMAT % bands.coverage}")


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    """Runs one command and returns its exit status

    0 on success, 2 for usage and configuration errors, 1 for data, IO and
    numerical errors. Diagnostics go to stderr.
    """
    command = typer.main.get_command(app)
    args = list(sys.argv[1:] if argv is None else argv)
    try:
        result = command.main(args=args, prog_name="hawkes", standalone_mode=False)
    except click.exceptions.Exit as err:
        return err.exit_code
    except click.ClickException as err:
        err.show()
        return err.exit_code
    except click.exceptions.Abort:
        typer.echo("Aborted", err=True)
        return 1
    except (ValueError, OSError, RuntimeError, ArithmeticError) as err:
        typer.echo(f"Error: {err}", err=True)
        return 1
    return result if isinstance(result, int) else 0


if __name__ == "__main__":
    sys.exit(run_cli())
