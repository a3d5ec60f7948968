"""
Tobit regression model, left-censored at zero.

Exact log-likelihood, analytic gradient and maximum likelihood fitting. The
optimizer works in Olsen's parameterization (delta, rho) = (beta/sigma, 1/sigma),
where the log-likelihood is globally concave, and maps the result back.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import special

from config import get_config
from errors import ContractViolation, DomainError, NonIdentifiable, RankDeficient


logger = logging.getLogger(__name__)

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

# Floor for a materialized probability before it is logged.
PROBABILITY_FLOOR = 1e-300

# Relative rounding error allowed for a summed log-likelihood.
LOGLIK_ROUNDOFF = 1e3 * np.finfo(float).eps


def _read_only(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class CensoredDataset:
    """Responses (zeros are censored) and the matching design matrix.

    The design holds every regression column explicitly; when an intercept is
    present its position is recorded in ``intercept_column``.
    """
    responses: np.ndarray
    design: np.ndarray
    column_names: Tuple[str, ...] = ()
    intercept_column: Optional[int] = None
    censor_threshold: float = 0.0

    def __post_init__(self):
        y = np.array(self.responses, dtype=float, copy=True)
        if y.ndim != 1:
            raise ContractViolation(f"responses must be one-dimensional, got shape {y.shape}")
        n = y.size
        if n < 1:
            raise ContractViolation("a dataset needs at least one observation")
        X = np.array(self.design, dtype=float, copy=True)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(n, 0)
        if X.ndim != 2 or X.shape[0] != n:
            raise ContractViolation(f"design must be {n} x q, got shape {X.shape}")
        if not np.all(np.isfinite(y)) or not np.all(np.isfinite(X)):
            raise ContractViolation("responses and design must be finite")
        if np.any(y < 0):
            row = int(np.flatnonzero(y < 0)[0])
            raise ContractViolation(f"response {y[row]!r} at row {row} is negative")
        if self.censor_threshold != 0.0:
            raise ContractViolation("only censoring at zero is supported")

        names = tuple(self.column_names) or tuple(f"x{j}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise ContractViolation(f"{len(names)} column names for {X.shape[1]} design columns")
        if self.intercept_column is not None and not 0 <= self.intercept_column < X.shape[1]:
            raise ContractViolation(f"intercept column {self.intercept_column} out of range")

        object.__setattr__(self, "responses", _read_only(y))
        object.__setattr__(self, "design", _read_only(X))
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "positive", _read_only(y > 0))

    @property
    def n(self) -> int:
        return self.responses.size

    @property
    def q(self) -> int:
        return self.design.shape[1]

    @property
    def u(self) -> int:
        """Number of uncensored (positive) responses."""
        return int(np.count_nonzero(self.positive))

    @property
    def censoring_rate(self) -> float:
        return 1.0 - self.u / self.n

    @property
    def explanatory_columns(self) -> Tuple[int, ...]:
        """Design columns other than the intercept, in design order."""
        return tuple(j for j in range(self.q) if j != self.intercept_column)

    def select_columns(self, columns: Sequence[int]) -> "CensoredDataset":
        """Sub-dataset with the given design columns, in the given order."""
        columns = [int(j) for j in columns]
        for j in columns:
            if not 0 <= j < self.q:
                raise ContractViolation(f"column {j} out of range for q={self.q}")
        intercept = None
        if self.intercept_column is not None and self.intercept_column in columns:
            intercept = columns.index(self.intercept_column)
        return CensoredDataset(
            responses=self.responses,
            design=self.design[:, columns],
            column_names=tuple(self.column_names[j] for j in columns),
            intercept_column=intercept,
        )

    def take(self, rows: Sequence[int]) -> "CensoredDataset":
        """Sub-dataset (or resample, when rows repeat) of the given rows."""
        rows = np.asarray(rows, dtype=np.intp)
        return CensoredDataset(
            responses=self.responses[rows],
            design=self.design[rows],
            column_names=self.column_names,
            intercept_column=self.intercept_column,
        )

    def with_responses(self, responses: np.ndarray) -> "CensoredDataset":
        return CensoredDataset(
            responses=responses,
            design=self.design,
            column_names=self.column_names,
            intercept_column=self.intercept_column,
        )


@dataclass(frozen=True, eq=False)
class TobitParams:
    """Regression coefficients and disturbance standard deviation."""
    beta: np.ndarray
    sigma: float

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float, copy=True).reshape(-1)
        if not np.all(np.isfinite(beta)):
            raise ContractViolation("beta must be finite")
        sigma = float(self.sigma)
        if not (sigma > 0.0 and math.isfinite(sigma)):
            raise DomainError(f"sigma must be positive and finite, got {sigma!r}")
        object.__setattr__(self, "beta", _read_only(beta))
        object.__setattr__(self, "sigma", sigma)

    @property
    def q(self) -> int:
        return self.beta.size


@dataclass(frozen=True)
class TobitFit:
    """Maximum likelihood fit and optimizer diagnostics."""
    params: TobitParams
    loglik: float
    k: int
    converged: bool
    iterations: int
    gradient_norm: float

    @property
    def beta(self) -> np.ndarray:
        return self.params.beta

    @property
    def sigma(self) -> float:
        return self.params.sigma

    @property
    def deviance(self) -> float:
        return -2.0 * self.loglik


def _index(data: CensoredDataset, params: TobitParams) -> np.ndarray:
    if params.q != data.q:
        raise ContractViolation(f"beta has {params.q} entries but the design has {data.q} columns")
    return data.design @ params.beta


def inverse_mills(z: np.ndarray) -> np.ndarray:
    """phi(z) / (1 - Phi(z)), evaluated in log space."""
    z = np.asarray(z, dtype=float)
    return np.exp(-0.5 * z * z - LOG_SQRT_2PI - special.log_ndtr(-z))


def log_likelihood(data: CensoredDataset, params: TobitParams) -> float:
    """Exact Tobit log-likelihood; ``-inf`` when it is not representable."""
    xb = _index(data, params)
    sigma = params.sigma
    pos = data.positive

    resid = data.responses[pos] - xb[pos]
    u = resid.size
    total = -u * (LOG_SQRT_2PI + math.log(sigma)) - 0.5 * float(resid @ resid) / (sigma * sigma)
    total += float(np.sum(special.log_ndtr(-xb[~pos] / sigma)))
    return total if math.isfinite(total) else -math.inf


def log_likelihood_gradient(data: CensoredDataset, params: TobitParams) -> np.ndarray:
    """Gradient with respect to (beta, sigma): q + 1 entries, sigma last."""
    xb = _index(data, params)
    sigma = params.sigma
    pos = data.positive
    X = data.design

    resid = data.responses[pos] - xb[pos]
    grad_beta = X[pos].T @ resid / sigma ** 2
    grad_sigma = -resid.size / sigma + float(resid @ resid) / sigma ** 3

    z = xb[~pos] / sigma
    lam = inverse_mills(z)
    grad_beta = grad_beta - X[~pos].T @ lam / sigma
    grad_sigma += float(lam @ z) / sigma
    return np.append(grad_beta, grad_sigma)


def censoring_probability(x: np.ndarray, params: TobitParams) -> float:
    """P(y = 0 | x) = 1 - Phi(x'beta / sigma)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != params.q:
        raise ContractViolation(f"x has {x.size} entries but beta has {params.q}")
    return float(special.ndtr(-float(x @ params.beta) / params.sigma))


class _OlsenObjective:
    """Log-likelihood, gradient and Hessian in theta = (beta/sigma, 1/sigma)."""

    def __init__(self, data: CensoredDataset):
        pos = data.positive
        self.Xp = data.design[pos]
        self.yp = data.responses[pos]
        self.Xc = data.design[~pos]
        self.u = self.yp.size
        self.yy = float(self.yp @ self.yp)
        self.Xp_y = self.Xp.T @ self.yp
        self.XpXp = self.Xp.T @ self.Xp

    def loglik(self, theta: np.ndarray) -> float:
        delta, rho = theta[:-1], theta[-1]
        e = rho * self.yp - self.Xp @ delta
        value = (self.u * (math.log(rho) - LOG_SQRT_2PI) - 0.5 * float(e @ e)
                 + float(np.sum(special.log_ndtr(-(self.Xc @ delta)))))
        return value if math.isfinite(value) else -math.inf

    def newton_terms(self, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        delta, rho = theta[:-1], theta[-1]
        e = rho * self.yp - self.Xp @ delta
        a = self.Xc @ delta
        lam = inverse_mills(a)

        grad = np.append(self.Xp.T @ e - self.Xc.T @ lam, self.u / rho - float(e @ self.yp))

        w = lam * (lam - a)
        q = delta.size
        hess = np.empty((q + 1, q + 1))
        hess[:q, :q] = -self.XpXp - (self.Xc.T * w) @ self.Xc
        hess[:q, q] = self.Xp_y
        hess[q, :q] = self.Xp_y
        hess[q, q] = -self.u / rho ** 2 - self.yy
        return grad, hess


def _to_olsen(params: TobitParams) -> np.ndarray:
    return np.append(params.beta / params.sigma, 1.0 / params.sigma)


def _from_olsen(theta: np.ndarray) -> TobitParams:
    rho = theta[-1]
    return TobitParams(beta=theta[:-1] / rho, sigma=1.0 / rho)


def _least_squares_start(data: CensoredDataset, sigma_floor: float) -> TobitParams:
    """OLS on the positive observations, sigma from their residual RMS."""
    pos = data.positive
    yp = data.responses[pos]
    if data.q > 0:
        beta = np.linalg.lstsq(data.design[pos], yp, rcond=None)[0]
        resid = yp - data.design[pos] @ beta
    else:
        beta = np.empty(0)
        resid = yp
    sigma = max(math.sqrt(float(resid @ resid) / resid.size), sigma_floor)
    return TobitParams(beta=beta, sigma=sigma)


def _roundoff(loglik: float, n: int) -> float:
    """Gain below which a log-likelihood sum over n rows cannot resolve a step."""
    return LOGLIK_ROUNDOFF * (abs(loglik) + n)


def fit_mle(
    data: CensoredDataset,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    start: Optional[TobitParams] = None,
) -> TobitFit:
    """Maximize the Tobit log-likelihood by damped Newton iterations.

    Args:
        data: dataset to fit; every design column is estimated.
        tol: convergence threshold on the sup-norm of the (beta, sigma) gradient.
            The fit also counts as converged once the Newton decrement drops
            below the rounding error of the log-likelihood; one last plain
            Newton step is then taken and the loop stops.
        max_iter: Newton iteration cap; reaching it returns the best iterate
            with ``converged=False``.
        start: warm start. When it is already stationary it is returned as is.

    Raises:
        NonIdentifiable: every response is censored.
        RankDeficient: the design does not have full column rank.
    """
    settings = get_config().optimizer
    tol = settings.tol if tol is None else tol
    max_iter = settings.max_iter if max_iter is None else max_iter

    if data.u == 0:
        raise NonIdentifiable(f"all {data.n} responses are censored")
    if data.q > 0 and (data.n < data.q or np.linalg.matrix_rank(data.design) < data.q):
        raise RankDeficient(f"design with {data.q} columns is rank deficient (n={data.n})")

    if start is None or start.q != data.q:
        params = _least_squares_start(data, settings.sigma_floor)
    else:
        params = start

    objective = _OlsenObjective(data)
    theta = _to_olsen(params)
    current = objective.loglik(theta)
    gradient_norm = float(np.max(np.abs(log_likelihood_gradient(data, params))))
    iterations = 0
    flat = False

    while gradient_norm > tol and iterations < max_iter:
        grad, hess = objective.newton_terms(theta)
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, -grad, rcond=None)[0]

        # Newton decrement: the gain a full step promises.
        decrement = 0.5 * float(grad @ step)
        if abs(decrement) <= _roundoff(current, data.n):
            # Below the resolution of the log-likelihood: take the plain step and stop.
            flat = True
            candidate = theta + step
            if candidate[-1] > 0.0 and math.isfinite(objective.loglik(candidate)):
                theta = candidate
                params = _from_olsen(theta)
                gradient_norm = float(np.max(np.abs(log_likelihood_gradient(data, params))))
                iterations += 1
            break

        scale = 1.0
        accepted = False
        for _ in range(settings.max_step_halvings):
            candidate = theta + scale * step
            if candidate[-1] > 0.0:
                value = objective.loglik(candidate)
                if value > current:
                    accepted = True
                    break
            scale *= 0.5
        if not accepted:
            logger.debug(f"Line search stalled at iteration {iterations}, decrement {decrement:.3e}")
            break

        theta, current = candidate, value
        params = _from_olsen(theta)
        gradient_norm = float(np.max(np.abs(log_likelihood_gradient(data, params))))
        iterations += 1

    converged = gradient_norm <= tol or flat
    if not converged:
        logger.debug(f"Tobit MLE stopped after {iterations} iterations with gradient norm {gradient_norm:.3e}")

    return TobitFit(
        params=params,
        loglik=log_likelihood(data, params),
        k=data.q + 1,
        converged=converged,
        iterations=iterations,
        gradient_norm=gradient_norm,
    )
