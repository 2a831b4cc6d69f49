from src.commons.literals import CsvColumns
from src.hawkes.model import CountData, EventHistory, KernelFamily
from src.hawkes.pmmh import ChainOutput, ParamSummary, Summary
from src.hawkes.simulator import PredictiveBands
from typing import Optional, TypeVar
import numpy as np
import pandas as pd
import os

DataFrame = TypeVar("DataFrame")

FLOAT_FORMAT = "%.17g"


class CountsFileError(ValueError):
    """Base class of errors in a counts CSV"""


class MalformedRowError(CountsFileError):
    pass


class NonIncreasingTimesError(CountsFileError):
    pass


class NegativeCountError(CountsFileError):
    pass


def _fmt(value: float) -> str:
    return FLOAT_FORMAT % value


class HawkesFiles:
    """A class reads and writes counts, events, chains and summaries"""

    def __init__(self):
        return None

    @staticmethod
    def _read_csv(file_path: str, **kwargs) -> DataFrame:
        """Returns a pandas Dataframe from a csv file

        Raises:
            FileNotFoundError: Raised if the file does not exist
            MalformedRowError: Raised if pandas can't tokenize the file
        """
        if not os.path.isfile(file_path):
            raise FileNotFoundError(f"File not found: {file_path}")
        try:
            return pd.read_csv(file_path, float_precision="round_trip", **kwargs)
        except pd.errors.EmptyDataError:
            raise MalformedRowError(f"{file_path} is empty")
        except pd.errors.ParserError as err:
            raise MalformedRowError(f"{file_path} could not be parsed: {err}")

    @staticmethod
    def _write_frame(frame: DataFrame, file_path: str) -> None:
        try:
            frame.to_csv(file_path, index=False, float_format=FLOAT_FORMAT)
        except OSError as err:
            raise OSError(f"Could not write {file_path}: {err}") from err
        return None

    @classmethod
    def load_counts(cls, file_path: str) -> CountData:
        """Returns CountData from a csv with header t,count

        Each row gives an interval right end t_i and its count n_i; t_0 = 0 is
        implicit. A first row with a blank count declares a nonzero origin,
        and all times are shifted so that the origin becomes 0.

        Args:
            file_path (str): Path of the counts csv

        Raises:
            FileNotFoundError: Raised if the file does not exist
            MalformedRowError: Raised for a wrong header or an unparsable row
            NonIncreasingTimesError: Raised if times do not strictly increase
            NegativeCountError: Raised for a negative count

        Returns:
            CountData: Observation times and counts
        """
        frame = cls._read_csv(file_path, dtype=str, keep_default_na=False)
        header = [str(i).strip() for i in frame.columns]
        if header != list(CsvColumns.counts):
            raise MalformedRowError(
                f"{file_path}: expected header {','.join(CsvColumns.counts)}, found {','.join(header)}"
            )
        if frame.shape[0] == 0:
            raise MalformedRowError(f"{file_path}: no data rows")
        times = []
        counts = []
        origin = 0.0
        for index, (t_str, n_str) in enumerate(frame.itertuples(index=False, name=None)):
            row = index + 1
            t_str, n_str = str(t_str).strip(), str(n_str).strip()
            try:
                t_value = float(t_str)
            except ValueError:
                raise MalformedRowError(f"{file_path}: row {row} has an unparsable time {t_str!r}")
            if not np.isfinite(t_value):
                raise MalformedRowError(f"{file_path}: row {row} has a non-finite time {t_str!r}")
            if n_str == "":
                if row == 1:
                    origin = t_value
                    continue
                raise MalformedRowError(f"{file_path}: row {row} has no count")
            try:
                n_float = float(n_str)
            except ValueError:
                raise MalformedRowError(f"{file_path}: row {row} has an unparsable count {n_str!r}")
            if not np.isfinite(n_float) or n_float != round(n_float):
                raise MalformedRowError(f"{file_path}: row {row} has a non-integer count {n_str!r}")
            if n_float < 0:
                raise NegativeCountError(f"{file_path}: row {row} has a negative count {n_str}")
            previous = times[-1] if times else origin
            if t_value <= previous:
                raise NonIncreasingTimesError(
                    f"{file_path}: row {row} time {t_str} does not exceed the previous time {previous!r}"
                )
            times.append(t_value)
            counts.append(int(n_float))
        if not counts:
            raise MalformedRowError(f"{file_path}: no rows with counts")
        grid = np.asarray([origin] + times) - origin
        return CountData(times=grid, counts=np.asarray(counts, dtype=np.int64))

    @classmethod
    def save_counts(cls, data: CountData, file_path: str) -> None:
        frame = pd.DataFrame({"t": data.times[1:], "count": data.counts})
        cls._write_frame(frame, file_path)
        return None

    @classmethod
    def load_events(cls, file_path: str, horizon: Optional[float] = None) -> EventHistory:
        """Returns an EventHistory from a single-column tau csv

        The horizon defaults to the last event time.
        """
        frame = cls._read_csv(file_path)
        if list(frame.columns) != list(CsvColumns.events):
            raise MalformedRowError(f"{file_path}: expected a single column tau, found {list(frame.columns)}")
        tau = frame["tau"].to_numpy(dtype=float)
        if horizon is None:
            horizon = float(tau[-1]) if tau.size else 0.0
        return EventHistory(tau=tau, horizon=horizon)

    @classmethod
    def save_events(cls, history: EventHistory, file_path: str) -> None:
        cls._write_frame(pd.DataFrame({"tau": history.tau}), file_path)
        return None

    @classmethod
    def save_chain(cls, output: ChainOutput, file_path: str) -> None:
        """Writes iter, parameters, loglik and 0/1 accepted flag per iteration"""
        cls._write_frame(output.to_frame(), file_path)
        return None

    @classmethod
    def load_chain(cls, file_path: str, family: Optional[KernelFamily] = None) -> ChainOutput:
        """Returns a ChainOutput from a chain csv

        Without a family, a chain with an alpha column is read as gamma.
        """
        frame = cls._read_csv(file_path)
        columns = list(frame.columns)
        has_shape = "alpha" in columns
        if family is None:
            family = KernelFamily.GAMMA if has_shape else KernelFamily.EXPONENTIAL
        family = KernelFamily(family)
        if family.has_shape != has_shape:
            raise MalformedRowError(f"{file_path}: columns {columns} do not match a {family.value} kernel")
        names = ["nu", "eta", "alpha", "beta"] if has_shape else ["nu", "eta", "beta"]
        expected = list(CsvColumns.chain_head) + names + list(CsvColumns.chain_tail)
        if columns != expected:
            raise MalformedRowError(f"{file_path}: expected columns {expected}, found {columns}")
        return ChainOutput.from_natural(
            family=family,
            iteration=frame["iter"].to_numpy(),
            natural=frame[names].to_numpy(dtype=float),
            loglik=frame["loglik"].to_numpy(dtype=float),
            accepted=frame["accepted"].to_numpy(),
        )

    @staticmethod
    def summary_lines(summary: Summary) -> list[str]:
        """Returns the flat key=value lines of a summary"""
        lines = [
            f"n_draws={summary.n_draws}",
            f"burn_in={summary.burn_in}",
            f"acceptance_rate={_fmt(summary.acceptance_rate)}",
        ]
        for name, row in summary.rows.items():
            for key in ("est", "lower", "upper", "se"):
                lines.append(f"{name}.{key}={_fmt(getattr(row, key))}")
        return lines

    @classmethod
    def save_summary(cls, summary: Summary, file_path: str) -> None:
        try:
            with open(file_path, "w") as outf:
                outf.write("\n".join(cls.summary_lines(summary)) + "\n")
        except OSError as err:
            raise OSError(f"Could not write {file_path}: {err}") from err
        return None

    @staticmethod
    def load_summary(file_path: str) -> Summary:
        """Returns a Summary from its key=value text record"""
        if not os.path.isfile(file_path):
            raise FileNotFoundError(f"File not found: {file_path}")
        values = {}
        with open(file_path, "r") as inf:
            for line in inf:
                line = line.strip()
                if line == "":
                    continue
                key, _, value = line.partition("=")
                values[key.strip()] = value.strip()
        rows = {}
        for key in values.keys():
            if key.endswith(".est"):
                name = key[: -len(".est")]
                rows[name] = ParamSummary(
                    est=float(values[f"{name}.est"]),
                    lower=float(values[f"{name}.lower"]),
                    upper=float(values[f"{name}.upper"]),
                    se=float(values[f"{name}.se"]),
                )
        return Summary(
            rows=rows,
            acceptance_rate=float(values["acceptance_rate"]),
            n_draws=int(values["n_draws"]),
            burn_in=int(values["burn_in"]),
        )

    @classmethod
    def save_bands(cls, bands: PredictiveBands, file_path: str) -> None:
        columns = [bands.times, bands.observed, bands.lower, bands.median, bands.upper]
        frame = pd.DataFrame(dict(zip(CsvColumns.bands, columns)))
        cls._write_frame(frame, file_path)
        return None

    @classmethod
    def save_paths(cls, bands: PredictiveBands, file_path: str) -> None:
        """Writes simulated cumulative paths in long format path,t,cumulative"""
        n_paths, m = bands.paths.shape
        columns = [np.repeat(np.arange(n_paths), m), np.tile(bands.times, n_paths), bands.paths.reshape(-1)]
        frame = pd.DataFrame(dict(zip(CsvColumns.paths, columns)))
        cls._write_frame(frame, file_path)
        return None
