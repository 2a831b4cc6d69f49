from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import Literal, Optional
from src.commons.literals import KernelFamilies, PmmhDefaults, SmcDefaults
from src.hawkes.model import HawkesParams, KernelFamily, from_natural, param_names, to_transformed
from src.hawkes.pmmh import PmmhConfig
from src.hawkes.smc import SmcConfig
import numpy as np
import os


KernelChoice = Literal["exp", "gamma", "weibull"]


def kernel_family(kernel: str) -> KernelFamily:
    """Returns the KernelFamily of a command-line kernel name"""
    families = KernelFamilies()
    if not hasattr(families, kernel):
        raise ValueError(f"Unknown kernel {kernel!r}, expected one of exp, gamma, weibull")
    return KernelFamily(getattr(families, kernel)["family"])


def read_config_file(file_path: str, allowed: Optional[dict] = None) -> dict:
    """Reads a flat key=value config file

    Blank lines and lines starting with # are skipped, and '-' in keys
    reads as '_'. With allowed given (a mapping of accepted keys to
    parameter names), keys are renamed through it and unknown keys are
    rejected.

    Args:
        file_path (str): Path of the config file
        allowed (Optional[dict]): Accepted key aliases

    Raises:
        FileNotFoundError: Raised if the file does not exist
        ValueError: Raised for a line without '=' or an unknown key

    Returns:
        dict: Values as strings, keyed by parameter name
    """
    if not os.path.isfile(file_path):
        raise FileNotFoundError(f"Config file not found: {file_path}")
    values = {}
    with open(file_path, "r") as inf:
        for line_no, line in enumerate(inf, start=1):
            line = line.strip()
            if line == "" or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{file_path}: line {line_no} is not a key=value pair: {line!r}")
            key, _, value = line.partition("=")
            key = key.strip().lstrip("-").replace("-", "_")
            if allowed is not None:
                if key not in allowed:
                    raise ValueError(f"{file_path}: line {line_no} has an unknown key {key!r}")
                key = allowed[key]
            values[key] = value.strip()
    return values


class RunConfig(BaseModel):
    """Validated settings of one command-line run

    Model values are optional so that commands which only read a chain or
    a counts file can share the class; to_params() insists on them.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kernel: KernelChoice = "exp"
    nu: Optional[float] = Field(default=None, gt=0.0, allow_inf_nan=False)
    eta: Optional[float] = Field(default=None, ge=0.0, lt=1.0)
    alpha: Optional[float] = Field(default=None, gt=0.0, allow_inf_nan=False)
    beta: Optional[float] = Field(default=None, gt=0.0, allow_inf_nan=False)
    seed: int = Field(default=0, ge=0)
    threads: int = Field(default=1, ge=1)
    particles: int = Field(default=SmcDefaults.particles, ge=1)
    fast_path: bool = True
    collapse: bool = True
    reps: int = Field(default=1, ge=1)
    iterations: int = Field(default=PmmhDefaults.iterations, ge=1)
    burn_in: int = Field(default=PmmhDefaults.burn_in, ge=0)
    step_sigma: float = Field(default=PmmhDefaults.step_sigma, gt=0.0, allow_inf_nan=False)
    ci_level: float = Field(default=PmmhDefaults.ci_level, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def check_kernel_params(self) -> "RunConfig":
        has_shape = kernel_family(self.kernel).has_shape
        if has_shape and self.alpha is None and self.nu is not None:
            raise ValueError(f"kernel {self.kernel} needs a shape parameter alpha")
        if not has_shape and self.alpha is not None:
            raise ValueError("kernel exp takes no shape parameter alpha")
        if self.burn_in >= self.iterations:
            raise ValueError(
                f"burn_in ({self.burn_in}) must be smaller than iterations ({self.iterations})"
            )
        return self

    @property
    def family(self) -> KernelFamily:
        return kernel_family(self.kernel)

    def has_params(self) -> bool:
        return all(getattr(self, name) is not None for name in param_names(self.family))

    def to_params(self) -> HawkesParams:
        """Returns HawkesParams from the model values

        Raises:
            ValueError: Raised if a parameter of the kernel family is missing
        """
        names = param_names(self.family)
        missing = [name for name in names if getattr(self, name) is None]
        if missing:
            raise ValueError(f"Missing model parameters for kernel {self.kernel}: {', '.join(missing)}")
        return from_natural([getattr(self, name) for name in names], self.family)

    def to_smc_config(self, stream: int = 0) -> SmcConfig:
        return SmcConfig(particles=self.particles, seed=self.seed, fast_path=self.fast_path, stream=stream)

    def to_pmmh_config(self) -> PmmhConfig:
        """Returns sampler settings; given model values become the starting point"""
        init = None
        if self.has_params():
            theta = to_transformed(self.to_params())
            # eta = 0 has no finite logit; the chain then starts from a drawn point
            if np.all(np.isfinite(theta)):
                init = tuple(theta.tolist())
        return PmmhConfig(
            iterations=self.iterations,
            burn_in=self.burn_in,
            step_sigma=self.step_sigma,
            smc=self.to_smc_config(),
            init=init,
            seed=self.seed,
            family=self.family,
        )
