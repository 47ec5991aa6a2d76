"""Local linear and logistic models.

Every fit centers the covariates and recovers the intercept afterwards, so
that the intercept is never penalized.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any

import torch
from scipy import stats

from ..data import DTYPE, TaskKind
from ..errors import (
    DimensionMismatch,
    NoStderr,
    NotConverged,
    SeparableDegenerate,
    TooFewPoints,
)

logger = logging.getLogger(__name__)

RIDGE_SCALE = 1e-8
PROBABILITY_CLIP = 1e-6


@dataclass(frozen=True)
class LinearModel:
    """`intercept + x^T coefficients`, passed through a sigmoid for classification.

    ---
    Parameters:
        intercept: The intercept.
        coefficients: The slopes.
            Shape of [p,].
        task: The task kind.
        lasso_alpha: The L1 penalty weight used during the fit.
        stderr: Standard errors of the slopes, for unpenalized fits.
            Shape of [p,].
        df: Residual degrees of freedom of the t-quantiles. `None` means
            normal quantiles (Wald intervals of logistic fits).
        flags: Non-fatal conditions met during the fit.
    """

    intercept: float
    coefficients: torch.Tensor
    task: TaskKind
    lasso_alpha: float = 0.0
    stderr: torch.Tensor | None = None
    df: int | None = None
    flags: list[str] = field(default_factory=list)

    @property
    def p(self) -> int:
        return self.coefficients.shape[0]

    def linear_predictor(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.p:
            raise DimensionMismatch(self.p, x.shape[-1])
        return self.intercept + x @ self.coefficients

    def predict(self, x: torch.Tensor) -> torch.Tensor:
        """Regression value, or `P(Y=1 | x)` for classification.

        ---
        Args:
            x: The inputs.
                Shape of [batch_size, p] or [p,].

        ---
        Returns:
            The predictions.
                Shape of [batch_size,] or [].
        """
        eta = self.linear_predictor(x)
        if self.task == TaskKind.CLASSIFICATION:
            return torch.sigmoid(eta)
        return eta

    def to_dict(self) -> dict[str, Any]:
        return {
            "intercept": self.intercept,
            "coefficients": self.coefficients.tolist(),
            "task": self.task.value,
            "lasso_alpha": self.lasso_alpha,
            "stderr": None if self.stderr is None else self.stderr.tolist(),
            "df": self.df,
            "flags": self.flags,
        }

    @classmethod
    def from_dict(cls, state: dict[str, Any]) -> "LinearModel":
        stderr = state["stderr"]
        return cls(
            intercept=state["intercept"],
            coefficients=torch.tensor(state["coefficients"], dtype=DTYPE),
            task=TaskKind(state["task"]),
            lasso_alpha=state["lasso_alpha"],
            stderr=None if stderr is None else torch.tensor(stderr, dtype=DTYPE),
            df=state["df"],
            flags=list(state["flags"]),
        )


def lm_predict(model: LinearModel, x: torch.Tensor) -> torch.Tensor:
    return model.predict(x)


def _center(xs: torch.Tensor, ys: torch.Tensor) -> tuple[torch.Tensor, ...]:
    x_mean = xs.mean(dim=0)
    y_mean = ys.mean()
    return xs - x_mean, ys - y_mean, x_mean, y_mean


def fit_ols(xs: torch.Tensor, ys: torch.Tensor) -> LinearModel:
    """Least squares with intercept.

    Rank-deficient designs are solved with a tiny ridge added to the normal
    equations, and flagged.

    ---
    Args:
        xs: The covariates.
            Shape of [n, p].
        ys: The targets.
            Shape of [n,].

    ---
    Returns:
        The fitted model, with standard errors when the design has full rank
        and some residual degrees of freedom remain.
    """
    n, p = xs.shape
    if n < 2:
        raise TooFewPoints(f"Least squares needs at least two rows, got {n}.")
    xc, yc, x_mean, y_mean = _center(xs.to(DTYPE), ys.to(DTYPE))
    gram = xc.T @ xc
    flags = []

    full_rank = p == 0 or int(torch.linalg.matrix_rank(xc)) == p
    if p == 0:
        coefficients = torch.zeros(0, dtype=DTYPE)
    elif full_rank:
        coefficients = torch.linalg.lstsq(xc, yc.unsqueeze(1)).solution.squeeze(1)
    else:
        trace = torch.trace(gram).item()
        ridge = RIDGE_SCALE * trace / p if trace > 0 else RIDGE_SCALE
        coefficients = torch.linalg.solve(
            gram + ridge * torch.eye(p, dtype=DTYPE), xc.T @ yc
        )
        flags.append("ridge")
        logger.warning("Rank-deficient design (%d rows, %d columns), ridge fallback.", n, p)

    intercept = (y_mean - x_mean @ coefficients).item()

    stderr, df = None, n - p - 1
    if full_rank and df > 0:
        residuals = yc - xc @ coefficients
        variance = (residuals**2).sum() / df
        covariance = variance * torch.linalg.inv(gram) if p > 0 else gram
        stderr = torch.diagonal(covariance).clamp(min=0).sqrt()

    return LinearModel(
        intercept=intercept,
        coefficients=coefficients,
        task=TaskKind.REGRESSION,
        stderr=stderr,
        df=df if stderr is not None else None,
        flags=flags,
    )


def lasso_objective(
    xc: torch.Tensor, yc: torch.Tensor, coefficients: torch.Tensor, alpha: float
) -> float:
    n = xc.shape[0]
    residuals = yc - xc @ coefficients
    return ((residuals**2).sum() / (2 * n) + alpha * coefficients.abs().sum()).item()


def coordinate_descent(
    xc: torch.Tensor,
    yc: torch.Tensor,
    alpha: float,
    max_iter: int = 10_000,
    tol: float = 1e-8,
) -> tuple[torch.Tensor, bool, list[float]]:
    """Cyclic coordinate descent on `(1/2n) |y - X b|^2 + alpha |b|_1`.

    ---
    Args:
        xc: Centered covariates.
            Shape of [n, p].
        yc: Centered targets.
            Shape of [n,].
        alpha: The penalty weight.
        max_iter: Maximum number of full cycles.
        tol: Stops once no coefficient moves by more than this in a cycle.

    ---
    Returns:
        coefficients: The last iterate.
            Shape of [p,].
        converged: Whether the tolerance was met.
        objectives: The objective after each cycle.
    """
    n, p = xc.shape
    norms = (xc**2).sum(dim=0) / n
    coefficients = torch.zeros(p, dtype=DTYPE)
    residuals = yc.clone()
    objectives = []

    for _ in range(max_iter):
        max_change = 0.0
        for j in range(p):
            if norms[j] == 0:
                continue
            rho = (xc[:, j] @ residuals / n + norms[j] * coefficients[j]).item()
            updated = math.copysign(max(abs(rho) - alpha, 0.0), rho) / norms[j].item()
            change = updated - coefficients[j].item()
            if change != 0:
                residuals -= change * xc[:, j]
                coefficients[j] = updated
                max_change = max(max_change, abs(change))

        objectives.append(lasso_objective(xc, yc, coefficients, alpha))
        if max_change < tol:
            return coefficients, True, objectives

    return coefficients, False, objectives


def fit_lasso(
    xs: torch.Tensor,
    ys: torch.Tensor,
    alpha: float,
    max_iter: int = 10_000,
    tol: float = 1e-8,
    strict: bool = False,
) -> LinearModel:
    """LASSO regression with an unpenalized intercept.

    A run that does not converge returns its last iterate, flagged, or raises
    `NotConverged` when `strict` is set.
    """
    n, _ = xs.shape
    if n < 2:
        raise TooFewPoints(f"LASSO needs at least two rows, got {n}.")
    assert alpha >= 0, "The penalty weight must be non-negative."
    xc, yc, x_mean, y_mean = _center(xs.to(DTYPE), ys.to(DTYPE))

    coefficients, converged, _ = coordinate_descent(xc, yc, alpha, max_iter, tol)
    flags = []
    if not converged:
        if strict:
            raise NotConverged(f"LASSO did not converge in {max_iter} cycles.")
        flags.append("not_converged")
        logger.warning("LASSO did not converge in %d cycles.", max_iter)

    return LinearModel(
        intercept=(y_mean - x_mean @ coefficients).item(),
        coefficients=coefficients,
        task=TaskKind.REGRESSION,
        lasso_alpha=alpha,
        flags=flags,
    )


def _logit(rate: float) -> float:
    rate = min(max(rate, PROBABILITY_CLIP), 1 - PROBABILITY_CLIP)
    return math.log(rate / (1 - rate))


def _newton_logistic(
    design: torch.Tensor, ys: torch.Tensor, max_iter: int, tol: float
) -> tuple[torch.Tensor, torch.Tensor, bool]:
    """Unpenalized maximum likelihood by Newton steps.

    ---
    Returns:
        theta: Intercept followed by slopes.
        hessian: The observed information at `theta`.
        converged: Whether the tolerance was met.
    """
    theta = torch.zeros(design.shape[1], dtype=DTYPE)
    for _ in range(max_iter):
        eta = design @ theta
        probabilities = torch.sigmoid(eta)
        log_loss = torch.nn.functional.binary_cross_entropy_with_logits(eta, ys)
        if log_loss < 1e-6 or theta.abs().max() > 1e4:
            raise SeparableDegenerate(
                "The classes are separated, an L1 penalty (alpha > 0) is required."
            )

        weights = probabilities * (1 - probabilities)
        hessian = design.T @ (weights.unsqueeze(1) * design)
        gradient = design.T @ (ys - probabilities)
        try:
            step = torch.linalg.solve(hessian, gradient)
        except torch.linalg.LinAlgError:
            raise SeparableDegenerate("Singular information matrix.")

        theta = theta + step
        if step.abs().max() < tol:
            probabilities = torch.sigmoid(design @ theta)
            weights = probabilities * (1 - probabilities)
            hessian = design.T @ (weights.unsqueeze(1) * design)
            return theta, hessian, True

    return theta, hessian, False


def _proximal_logistic(
    design: torch.Tensor, ys: torch.Tensor, alpha: float, max_iter: int, tol: float
) -> tuple[torch.Tensor, bool]:
    """ISTA on the mean negative log-likelihood plus `alpha |slopes|_1`."""
    n = design.shape[0]
    lipschitz = torch.linalg.matrix_norm(design, ord=2).item() ** 2 / (4 * n)
    step = 1 / lipschitz

    theta = torch.zeros(design.shape[1], dtype=DTYPE)
    for _ in range(max_iter):
        gradient = design.T @ (torch.sigmoid(design @ theta) - ys) / n
        updated = theta - step * gradient
        slopes = updated[1:]
        updated[1:] = torch.sign(slopes) * (slopes.abs() - step * alpha).clamp(min=0)

        change = (updated - theta).abs().max()
        theta = updated
        if change < tol:
            return theta, True

    return theta, False


def fit_logistic(
    xs: torch.Tensor,
    ys: torch.Tensor,
    alpha: float,
    max_iter: int = 10_000,
    tol: float = 1e-8,
) -> LinearModel:
    """Logistic regression, L1-penalized when `alpha > 0`.

    Unpenalized fits use Newton steps and carry Wald standard errors.
    Penalized fits use proximal gradient steps.

    ---
    Args:
        xs: The covariates.
            Shape of [n, p].
        ys: The binary labels.
            Shape of [n,].
        alpha: The L1 penalty weight on the mean negative log-likelihood.
        max_iter: Maximum number of iterations.
        tol: Stops once no parameter moves by more than this.

    ---
    Returns:
        The fitted model predicting `P(Y=1 | x)`.
    """
    n, p = xs.shape
    ys = ys.to(DTYPE)
    assert torch.all((ys == 0) | (ys == 1)), "Labels must be in {0, 1}."
    assert alpha >= 0, "The penalty weight must be non-negative."

    rate = ys.mean().item()
    if rate in (0.0, 1.0):
        if alpha == 0:
            raise SeparableDegenerate("A single class is present, alpha > 0 is required.")
        logger.warning("A single class is present, fitting the null model.")
        return LinearModel(
            intercept=_logit(rate),
            coefficients=torch.zeros(p, dtype=DTYPE),
            task=TaskKind.CLASSIFICATION,
            lasso_alpha=alpha,
            flags=["single_class"],
        )

    x_mean = xs.mean(dim=0)
    design = torch.cat([torch.ones((n, 1), dtype=DTYPE), xs.to(DTYPE) - x_mean], dim=1)
    flags, stderr = [], None

    if alpha == 0:
        theta, hessian, converged = _newton_logistic(design, ys, min(max_iter, 100), tol)
        if converged:
            covariance = torch.linalg.inv(hessian)
            stderr = torch.diagonal(covariance)[1:].clamp(min=0).sqrt()
    else:
        theta, converged = _proximal_logistic(design, ys, alpha, max_iter, tol)

    if not converged:
        flags.append("not_converged")
        logger.warning("Logistic regression did not converge.")

    coefficients = theta[1:]
    return LinearModel(
        intercept=(theta[0] - x_mean @ coefficients).item(),
        coefficients=coefficients,
        task=TaskKind.CLASSIFICATION,
        lasso_alpha=alpha,
        stderr=stderr,
        flags=flags,
    )


def fit_local(xs: torch.Tensor, ys: torch.Tensor, task: TaskKind, alpha: float) -> LinearModel:
    """OLS, LASSO or logistic regression depending on the task and the penalty."""
    if task == TaskKind.CLASSIFICATION:
        return fit_logistic(xs, ys, alpha)
    if alpha == 0:
        return fit_ols(xs, ys)
    return fit_lasso(xs, ys, alpha)


@dataclass(frozen=True)
class Intervals:
    """Per-coefficient confidence intervals.

    Coefficients set to zero by the L1 penalty get the interval [0, 0] and
    are marked as shrunk.
    """

    estimates: torch.Tensor
    stderr: torch.Tensor
    low: torch.Tensor
    high: torch.Tensor
    shrunk: torch.Tensor
    level: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "estimates": self.estimates.tolist(),
            "stderr": self.stderr.tolist(),
            "low": self.low.tolist(),
            "high": self.high.tolist(),
            "shrunk": self.shrunk.tolist(),
            "level": self.level,
        }

    @classmethod
    def from_dict(cls, state: dict[str, Any]) -> "Intervals":
        return cls(
            estimates=torch.tensor(state["estimates"], dtype=DTYPE),
            stderr=torch.tensor(state["stderr"], dtype=DTYPE),
            low=torch.tensor(state["low"], dtype=DTYPE),
            high=torch.tensor(state["high"], dtype=DTYPE),
            shrunk=torch.tensor(state["shrunk"], dtype=torch.bool),
            level=state["level"],
        )


def _support_stderr(
    model: LinearModel, xs: torch.Tensor, ys: torch.Tensor
) -> tuple[torch.Tensor, int | None]:
    """Standard errors of an unpenalized refit on the nonzero coefficients."""
    support = model.coefficients != 0
    stderr = torch.zeros(model.p, dtype=DTYPE)
    if not support.any():
        return stderr, max(xs.shape[0] - 1, 1)

    try:
        if model.task == TaskKind.CLASSIFICATION:
            refit = fit_logistic(xs[:, support], ys, 0.0)
        else:
            refit = fit_ols(xs[:, support], ys)
    except SeparableDegenerate:
        raise NoStderr("The refit on the LASSO support is separable.")

    if refit.stderr is None:
        raise NoStderr("The refit on the LASSO support has no standard errors.")
    stderr[support] = refit.stderr
    return stderr, refit.df


def confidence_intervals(
    model: LinearModel,
    level: float,
    xs: torch.Tensor | None = None,
    ys: torch.Tensor | None = None,
) -> Intervals:
    """Intervals `coefficient +- quantile * stderr`.

    Penalized models have no standard errors of their own: the training data
    must then be given, to refit the unpenalized model on their support.

    ---
    Args:
        model: The fitted model.
        level: The confidence level, in (0, 1).
        xs: The training covariates, for penalized models.
            Shape of [n, p].
        ys: The training targets, for penalized models.
            Shape of [n,].

    ---
    Returns:
        The intervals. t-quantiles are used when the model has residual
        degrees of freedom, normal quantiles otherwise.
    """
    assert 0 < level < 1, "The level must be in (0, 1)."

    if model.stderr is not None:
        stderr, df = model.stderr, model.df
    elif model.lasso_alpha > 0 and xs is not None and ys is not None:
        stderr, df = _support_stderr(model, xs.to(DTYPE), ys.to(DTYPE))
    else:
        raise NoStderr("The model carries no standard errors.")

    if model.task == TaskKind.CLASSIFICATION:
        df = None

    probability = (1 + level) / 2
    quantile = stats.norm.ppf(probability) if df is None else stats.t.ppf(probability, df)

    shrunk = (model.coefficients == 0) & (model.lasso_alpha > 0)
    low = torch.where(shrunk, 0.0, model.coefficients - quantile * stderr)
    high = torch.where(shrunk, 0.0, model.coefficients + quantile * stderr)

    return Intervals(model.coefficients, stderr, low, high, shrunk, level)
