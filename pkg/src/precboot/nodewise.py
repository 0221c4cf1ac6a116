"""Node-wise Lasso regressions.

Each variable is regressed on all the others with an L1 penalty; the fitted
coefficient vector for node j is constrained to have -1 in position j, so the
residual for node j at time t is -<alpha_j, y_t>.

The solver is cyclic coordinate descent on the Gram matrix (covariance
updates), compiled with numba when available.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Dataset
from .errors import ConvergenceWarning, DegenerateColumn, InsufficientData, InvalidInput

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


@dataclass
class LassoConfig:
    lambda_scale: float = 0.5
    max_iter: int = 10000
    tol: float = 1e-7
    lambda_override: Optional[Sequence[float]] = None

    def __post_init__(self):
        if self.tol <= 0:
            raise InvalidInput("tol must be positive")
        if self.max_iter < 1:
            raise InvalidInput("max_iter must be >= 1")


@dataclass
class NodewiseFit:
    """Fitted coefficients, penalties and residuals for all p nodes.

    alpha[j, k] is the coefficient of variable k+1 in the regression of node
    j+1, with alpha[j, j] = -1. residuals[t, j] = -<alpha_j, y_t>.
    """

    alpha: np.ndarray
    lambdas: np.ndarray
    residuals: np.ndarray
    iterations: np.ndarray


def default_lambdas(data: Dataset, cfg: LassoConfig) -> np.ndarray:
    """lambda_j = lambda_scale * sd(y_j) * sqrt(2 log p / n)."""
    if cfg.lambda_override is not None:
        lam = np.asarray(cfg.lambda_override, dtype=np.float64)
        if lam.shape != (data.p,):
            raise InvalidInput("lambda_override must have length p")
        return lam
    sd = data.values.std(axis=0, ddof=1)
    if np.any(sd <= 0.0):
        bad = int(np.nonzero(sd <= 0.0)[0][0]) + 1
        raise DegenerateColumn(f"column {bad} has zero variance")
    return cfg.lambda_scale * sd * np.sqrt(2.0 * np.log(data.p) / data.n)


@njit(cache=True)
def _cd_solve(gram, j, lam, tol, max_iter):  # pragma: no cover - compiled
    """Cyclic coordinate descent for one node on the Gram matrix gram = Y'Y/n.

    Minimizes gamma' C gamma + 2*lam*sum_{k != j} |gamma_k| over gamma_j = -1.
    Returns (gamma, sweeps, converged).
    """
    p = gram.shape[0]
    gamma = np.zeros(p)
    gamma[j] = -1.0
    # q = C @ gamma, maintained incrementally
    q = -gram[:, j].copy()
    sweeps = 0
    converged = False
    while sweeps < max_iter:
        sweeps += 1
        max_delta = 0.0
        for k in range(p):
            if k == j:
                continue
            ckk = gram[k, k]
            if ckk <= 0.0:
                continue
            old = gamma[k]
            partial = q[k] - ckk * old
            if partial > lam:
                new = -(partial - lam) / ckk
            elif partial < -lam:
                new = -(partial + lam) / ckk
            else:
                new = 0.0
            if new != old:
                diff = new - old
                for m in range(p):
                    q[m] += gram[m, k] * diff
                gamma[k] = new
                ad = abs(diff)
                if ad > max_delta:
                    max_delta = ad
        if max_delta < tol:
            converged = True
            break
    return gamma, sweeps, converged


def _check_finite(values: np.ndarray):
    if not np.all(np.isfinite(values)):
        raise InvalidInput("data contains NaN or infinite values")


def fit_node(data: Dataset, j: int, lambda_j: float, cfg: LassoConfig):
    """Fit the Lasso regression for node j (1-based).

    Returns (gamma, iterations) where gamma has gamma[j-1] = -1.
    """
    if not data.centered:
        raise InsufficientData("fit_node requires centered data")
    if not 1 <= j <= data.p:
        raise InvalidInput(f"node index {j} out of range 1..{data.p}")
    _check_finite(data.values)
    gram = data.values.T @ data.values / data.n
    return _fit_node_gram(gram, j - 1, float(lambda_j), cfg)


def _fit_node_gram(gram: np.ndarray, j0: int, lambda_j: float, cfg: LassoConfig):
    gamma, sweeps, converged = _cd_solve(
        gram, j0, lambda_j, cfg.tol, cfg.max_iter
    )
    if not converged:
        warnings.warn(
            f"node {j0 + 1}: coordinate descent not converged after "
            f"{cfg.max_iter} sweeps",
            ConvergenceWarning,
        )
    return gamma, int(sweeps)


def fit_all(data: Dataset, cfg: LassoConfig) -> NodewiseFit:
    """Fit all p node-wise regressions and compute residuals."""
    if not data.centered:
        raise InsufficientData("fit_all requires centered data")
    _check_finite(data.values)
    lambdas = default_lambdas(data, cfg)
    p = data.p
    gram = data.values.T @ data.values / data.n
    alpha = np.empty((p, p))
    iterations = np.empty(p, dtype=np.int64)
    for j0 in range(p):
        try:
            gamma, sweeps = _fit_node_gram(gram, j0, float(lambdas[j0]), cfg)
        except Exception as exc:
            raise type(exc)(f"node {j0 + 1}: {exc}") from exc
        alpha[j0] = gamma
        iterations[j0] = sweeps
    residuals = -(data.values @ alpha.T)
    return NodewiseFit(alpha=alpha, lambdas=lambdas, residuals=residuals,
                       iterations=iterations)


def kkt_violation(data: Dataset, j: int, lambda_j: float, gamma: np.ndarray) -> float:
    """Largest violation of the stationarity conditions for node j.

    For r_t = -gamma' y_t the optimum satisfies, for every k != j,
    |mean(r * y_k)| <= lambda when gamma_k = 0 and mean(r * y_k) =
    lambda * sign(gamma_k) otherwise.
    """
    j0 = j - 1
    resid = -(data.values @ gamma)
    corr = data.values.T @ resid / data.n
    viol = 0.0
    for k in range(data.p):
        if k == j0:
            continue
        if gamma[k] == 0.0:
            viol = max(viol, abs(corr[k]) - lambda_j)
        else:
            viol = max(viol, abs(corr[k] - lambda_j * np.sign(gamma[k])))
    return viol
