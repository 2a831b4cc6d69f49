"""Direct maximum likelihood for continuously observed paths."""
from dataclasses import dataclass
from typing import Optional
from scipy.optimize import approx_fprime, minimize
from src.hawkes.model import (
    EventHistory,
    HawkesParams,
    KernelFamily,
    from_transformed,
    full_loglik,
    param_names,
)
import numpy as np
import logging


logger = logging.getLogger(__name__)

# finite-difference steps on the transformed scale
_GRAD_STEP = 1e-6
_HESS_STEP = 1e-4


@dataclass(frozen=True)
class MleResult:
    params: HawkesParams
    loglik: float
    se: dict
    converged: bool


def _default_start(history: EventHistory, family: KernelFamily) -> np.ndarray:
    n = max(len(history), 1)
    horizon = max(history.horizon, np.finfo(float).eps)
    start = [np.log(0.5 * n / horizon), 0.0]
    if family.has_shape:
        start.append(0.0)
    start.append(np.log(horizon / n))
    return np.asarray(start)


def _natural_jacobian(params: HawkesParams) -> np.ndarray:
    # d(natural)/d(transformed) is diagonal: exp for logs, eta(1-eta) for the logit
    values = params.as_dict()
    diag = [values["nu"], values["eta"] * (1.0 - values["eta"])]
    if "alpha" in values:
        diag.append(values["alpha"])
    diag.append(values["beta"])
    return np.diag(diag)


def fit_full_mle(history: EventHistory, family: KernelFamily = KernelFamily.EXPONENTIAL,
                 init: Optional[np.ndarray] = None) -> MleResult:
    """Maximises full_loglik over the transformed parameters

    Standard errors come from the inverse finite-difference Hessian of the
    negative log-likelihood, mapped to the natural scale by the delta method.

    Args:
        history (EventHistory): Observed event times on (0, T]
        family (KernelFamily, optional): Kernel family. Defaults to exponential.
        init (Optional[np.ndarray]): Transformed starting point

    Returns:
        MleResult: Estimate, maximised log-likelihood, natural-scale SEs, convergence flag
    """
    family = KernelFamily(family)
    x0 = _default_start(history, family) if init is None else np.asarray(init, dtype=float)

    def objective(x: np.ndarray) -> float:
        value = full_loglik(from_transformed(x, family), history)
        return -value if np.isfinite(value) else 1e300

    result = minimize(objective, x0, method="L-BFGS-B")
    if not result.success:
        logger.info(f"L-BFGS-B stopped ({result.message}); refining with Nelder-Mead")
        result = minimize(objective, result.x, method="Nelder-Mead",
                          options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 20000})
    x_hat = result.x
    params = from_transformed(x_hat, family)

    def gradient(x: np.ndarray) -> np.ndarray:
        return approx_fprime(x, objective, _GRAD_STEP)

    hessian = approx_fprime(x_hat, gradient, _HESS_STEP)
    hessian = 0.5 * (hessian + hessian.T)
    names = param_names(family)
    try:
        cov_transformed = np.linalg.inv(hessian)
        jac = _natural_jacobian(params)
        cov = jac @ cov_transformed @ jac.T
        variances = np.diag(cov)
        if np.any(variances <= 0.0):
            raise np.linalg.LinAlgError("Hessian is not positive definite")
        se = dict(zip(names, np.sqrt(variances).tolist()))
    except np.linalg.LinAlgError as err:
        logger.warning(f"Could not invert the Hessian at the MLE: {err}")
        se = {name: np.nan for name in names}
    return MleResult(params=params, loglik=-float(result.fun), se=se, converged=bool(result.success))
