import pytest
import torch

from ..data import DTYPE, TaskKind
from ..errors import (
    DimensionMismatch,
    NoStderr,
    NotConverged,
    SeparableDegenerate,
    TooFewPoints,
)
from .linear import (
    LinearModel,
    confidence_intervals,
    coordinate_descent,
    fit_lasso,
    fit_logistic,
    fit_local,
    fit_ols,
    lm_predict,
)


def random_system(n: int, p: int, seed: int, noise: float = 0.5) -> tuple[torch.Tensor, torch.Tensor]:
    rng = torch.Generator().manual_seed(seed)
    xs = torch.randn((n, p), generator=rng, dtype=DTYPE)
    beta = torch.randn(p, generator=rng, dtype=DTYPE)
    ys = 1.5 + xs @ beta + noise * torch.randn(n, generator=rng, dtype=DTYPE)
    return xs, ys


def test_ols_exact_line():
    model = fit_ols(torch.tensor([[0.0], [1.0]], dtype=DTYPE), torch.tensor([1.0, 3.0], dtype=DTYPE))
    assert abs(model.intercept - 1) < 1e-12
    assert torch.allclose(model.coefficients, torch.tensor([2.0], dtype=DTYPE), atol=1e-12)


def test_ols_constant_target():
    xs, _ = random_system(20, 3, seed=0)
    model = fit_ols(xs, torch.full((20,), 4.0, dtype=DTYPE))
    assert abs(model.intercept - 4) < 1e-12
    assert torch.allclose(model.coefficients, torch.zeros(3, dtype=DTYPE), atol=1e-12)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_ols_normal_equations(seed: int):
    xs, ys = random_system(50, 3, seed)
    model = fit_ols(xs, ys)

    design = torch.cat([torch.ones((50, 1), dtype=DTYPE), xs], dim=1)
    oracle = torch.linalg.solve(design.T @ design, design.T @ ys)
    assert abs(model.intercept - oracle[0].item()) < 1e-8
    assert torch.allclose(model.coefficients, oracle[1:], atol=1e-8)

    residuals = ys - lm_predict(model, xs)
    assert torch.all((design.T @ residuals).abs() < 1e-8)

    # Standard errors from the full design.
    variance = (residuals**2).sum() / (50 - 4)
    oracle_stderr = (variance * torch.linalg.inv(design.T @ design)).diagonal()[1:].sqrt()
    assert torch.allclose(model.stderr, oracle_stderr, atol=1e-10)
    assert model.df == 46


def test_ols_rank_deficient():
    xs, ys = random_system(10, 2, seed=3)
    xs = torch.cat([xs, xs[:, :1]], dim=1)
    model = fit_ols(xs, ys)
    assert "ridge" in model.flags
    assert model.stderr is None
    assert torch.all(torch.isfinite(model.coefficients))


@pytest.mark.parametrize("alpha", [0.0, 0.1])
def test_single_row(alpha: float):
    xs = torch.tensor([[0.5, -1.0]], dtype=DTYPE)
    with pytest.raises(TooFewPoints) as error:
        fit_local(xs, torch.tensor([2.0], dtype=DTYPE), TaskKind.REGRESSION, alpha)
    assert error.value.exit_code == 4


def test_lasso_without_penalty():
    xs, ys = random_system(100, 4, seed=4)
    ols = fit_ols(xs, ys)
    lasso = fit_lasso(xs, ys, 0.0)
    assert torch.allclose(lasso.coefficients, ols.coefficients, atol=1e-6)
    assert abs(lasso.intercept - ols.intercept) < 1e-6


def test_lasso_null_penalty():
    xs, ys = random_system(60, 5, seed=5)
    xc, yc = xs - xs.mean(dim=0), ys - ys.mean()
    alpha_max = (xc.T @ yc / 60).abs().max().item()

    model = fit_lasso(xs, ys, alpha_max * (1 + 1e-9))
    assert torch.all(model.coefficients == 0)
    assert abs(model.intercept - ys.mean().item()) < 1e-12


@pytest.mark.parametrize("alpha", [0.01, 0.1, 0.3])
def test_lasso_kkt(alpha: float):
    xs, ys = random_system(80, 6, seed=6)
    model = fit_lasso(xs, ys, alpha)
    xc, yc = xs - xs.mean(dim=0), ys - ys.mean()

    correlations = xc.T @ (yc - xc @ model.coefficients) / 80
    active = model.coefficients != 0
    assert torch.all((correlations[active].abs() - alpha).abs() < 1e-6)
    assert torch.all(correlations[~active].abs() <= alpha + 1e-6)


def test_lasso_objective_decreases():
    xs, ys = random_system(40, 8, seed=7)
    xc, yc = xs - xs.mean(dim=0), ys - ys.mean()
    _, converged, objectives = coordinate_descent(xc, yc, 0.05)
    assert converged
    assert all(b <= a + 1e-12 for a, b in zip(objectives, objectives[1:]))


def test_lasso_not_converged():
    xs, ys = random_system(40, 8, seed=7)
    model = fit_lasso(xs, ys, 0.01, max_iter=1)
    assert "not_converged" in model.flags
    with pytest.raises(NotConverged):
        fit_lasso(xs, ys, 0.01, max_iter=1, strict=True)


def test_logistic_symmetry():
    xs = torch.tensor([[-2.0], [-1.0], [1.0], [2.0], [-2.0], [-1.0], [1.0], [2.0]], dtype=DTYPE)
    ys = torch.tensor([0, 0, 1, 1, 0, 1, 0, 1], dtype=DTYPE)
    model = fit_logistic(xs, ys, 0.0)

    assert abs(model.intercept) < 1e-3
    assert model.coefficients[0] > 0
    assert model.stderr is not None and torch.all(model.stderr > 0)


def test_logistic_null_model():
    rng = torch.Generator().manual_seed(8)
    xs = torch.randn((100, 2), generator=rng, dtype=DTYPE)
    ys = (torch.arange(100) < 30).to(DTYPE)
    model = fit_logistic(xs, ys, 10.0)

    assert torch.all(model.coefficients == 0)
    assert abs(model.intercept - torch.logit(torch.tensor(0.3)).item()) < 1e-5


def test_logistic_penalized_matches_gradient_condition():
    rng = torch.Generator().manual_seed(9)
    xs = torch.randn((200, 3), generator=rng, dtype=DTYPE)
    ys = (torch.rand(200, generator=rng, dtype=DTYPE) < torch.sigmoid(2 * xs[:, 0])).to(DTYPE)
    model = fit_logistic(xs, ys, 0.02)

    assert model.coefficients[0] > 0.5
    residuals = torch.sigmoid(model.intercept + xs @ model.coefficients) - ys
    assert abs(residuals.mean().item()) < 1e-6


def test_logistic_separable():
    xs = torch.tensor([[-2.0], [-1.0], [1.0], [2.0]], dtype=DTYPE)
    ys = torch.tensor([0, 0, 1, 1], dtype=DTYPE)
    with pytest.raises(SeparableDegenerate):
        fit_logistic(xs, ys, 0.0)

    with pytest.raises(SeparableDegenerate):
        fit_logistic(xs, torch.ones(4, dtype=DTYPE), 0.0)

    # A penalty makes the fit well defined.
    model = fit_logistic(xs, ys, 0.1)
    assert model.coefficients[0] > 0


def test_logistic_single_class_penalized():
    xs = torch.tensor([[-2.0], [-1.0], [1.0]], dtype=DTYPE)
    model = fit_logistic(xs, torch.ones(3, dtype=DTYPE), 0.1)
    assert "single_class" in model.flags
    assert model.predict(xs).min() > 0.99


@pytest.mark.parametrize(
    "intercept, coefficients, x, task, expected",
    [
        (1.0, [2.0], [3.0], TaskKind.REGRESSION, 7.0),
        (-0.5, [0.0, 0.0], [9.0, -3.0], TaskKind.REGRESSION, -0.5),
        (0.0, [0.0], [42.0], TaskKind.CLASSIFICATION, 0.5),
    ],
)
def test_predict(intercept: float, coefficients: list, x: list, task: TaskKind, expected: float):
    model = LinearModel(intercept, torch.tensor(coefficients, dtype=DTYPE), task)
    assert lm_predict(model, torch.tensor(x, dtype=DTYPE)).item() == expected


def test_predict_affine():
    model = LinearModel(0.3, torch.tensor([1.0, -2.0, 0.5], dtype=DTYPE), TaskKind.REGRESSION)
    x = torch.randn(3, dtype=DTYPE)
    delta = torch.randn(3, dtype=DTYPE)
    gap = model.predict(x + delta) - model.predict(x)
    assert abs((gap - delta @ model.coefficients).item()) < 1e-12

    with pytest.raises(DimensionMismatch):
        model.predict(torch.zeros(2, dtype=DTYPE))


def test_intervals_exact_fit():
    xs = torch.tensor([[0.0], [1.0], [2.0], [5.0]], dtype=DTYPE)
    model = fit_ols(xs, 1 + 2 * xs[:, 0])
    intervals = confidence_intervals(model, 0.95)
    assert torch.all((intervals.high - intervals.low).abs() < 1e-10)


def test_intervals_coverage():
    rng = torch.Generator().manual_seed(10)
    covered = 0
    for _ in range(400):
        xs = torch.randn((100, 1), generator=rng, dtype=DTYPE)
        ys = 2 * xs[:, 0] + torch.randn(100, generator=rng, dtype=DTYPE)
        intervals = confidence_intervals(fit_ols(xs, ys), 0.95)
        covered += int(intervals.low[0] <= 2 <= intervals.high[0])
    assert covered / 400 >= 0.92


def test_intervals_lasso():
    xs, ys = random_system(100, 5, seed=11)
    xs[:, 4] = 0.01 * xs[:, 4]
    model = fit_lasso(xs, ys, 0.2)
    assert (model.coefficients == 0).any() and (model.coefficients != 0).any()

    with pytest.raises(NoStderr):
        confidence_intervals(model, 0.95)

    intervals = confidence_intervals(model, 0.95, xs, ys)
    shrunk = model.coefficients == 0
    assert torch.equal(intervals.shrunk, shrunk)
    assert torch.all(intervals.low[shrunk] == 0) and torch.all(intervals.high[shrunk] == 0)
    assert torch.all(intervals.low[~shrunk] < intervals.high[~shrunk])


def test_serialization():
    xs, ys = random_system(30, 2, seed=12)
    model = fit_ols(xs, ys)
    loaded = LinearModel.from_dict(model.to_dict())
    assert torch.equal(model.predict(xs), loaded.predict(xs))
    assert torch.equal(model.stderr, loaded.stderr)
