"""Validation of the composed Hydra configuration.

Hydra already rejects unknown keys (the configuration is in struct mode), this
module checks the values before any command runs.
"""
import math

from omegaconf import DictConfig

from ..data import TaskKind
from ..errors import BadJ, ConfigError, FoldTooSmall, FractionOutOfRange
from ..gmm import CovKind
from ..mlp import Activation
from .constants import Command, Method, PredictMode


def check_choice(name: str, value, choices: type) -> None:
    allowed = [choice.value for choice in choices]
    if value not in allowed:
        raise ConfigError(f"{name} must be one of {allowed}, got {value!r}.")


def check_range(
    name: str,
    value,
    low: float = -math.inf,
    high: float = math.inf,
    low_open: bool = False,
    high_open: bool = False,
    integer: bool = False,
) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}.")
    if integer and not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer, got {value!r}.")
    if not math.isfinite(value):
        raise ConfigError(f"{name} must be finite, got {value}.")

    too_low = value <= low if low_open else value < low
    too_high = value >= high if high_open else value > high
    if too_low or too_high:
        left = "(" if low_open else "["
        right = ")" if high_open else "]"
        raise ConfigError(f"{name} must be in {left}{low}, {high}{right}, got {value}.")


def check_grid(name: str, grid) -> None:
    if grid is None or len(grid) == 0:
        raise ConfigError(f"{name} must be a non-empty list.")
    for value in grid:
        check_range(name, value, low=1, integer=True)


def validate_config(config: DictConfig) -> None:
    """Check every value of the configuration.

    ---
    Raises:
        ConfigError: A value is out of range.
    """
    check_choice("command", config.command, Command)
    check_range("seed", config.seed, low=0, integer=True)

    data = config.exp.data
    check_choice("exp.data.task", data.task, TaskKind)
    if data.test_path is None:
        if not 0 < data.test_fraction < 1:
            raise FractionOutOfRange(
                f"exp.data.test_fraction must be in (0, 1), got {data.test_fraction}."
            )

    trainer = config.exp.trainer
    check_range("exp.trainer.epochs", trainer.epochs, low=1, integer=True)
    check_range("exp.trainer.batch_size", trainer.batch_size, low=1, integer=True)
    check_range("exp.trainer.learning_rate", trainer.learning_rate, low=0, low_open=True)

    if len(config.model.widths) == 0:
        raise ConfigError("model.widths needs at least one hidden layer.")
    for width in config.model.widths:
        check_range("model.widths", width, low=1, integer=True)
    check_choice("model.activation", config.model.activation, Activation)

    mlm = config.exp.mlm
    check_range("exp.mlm.k_per_layer", mlm.k_per_layer, low=1, integer=True)
    if isinstance(mlm.n_epics, bool) or not isinstance(mlm.n_epics, int) or mlm.n_epics < 1:
        raise BadJ(f"exp.mlm.n_epics must be a positive integer, got {mlm.n_epics!r}.")
    check_range("exp.mlm.m", mlm.m, low=0, integer=True)
    check_range("exp.mlm.epsilon", mlm.epsilon, low=0)
    check_range("exp.mlm.lasso_alpha", mlm.lasso_alpha, low=0)
    if data.task == TaskKind.CLASSIFICATION.value and mlm.lasso_alpha <= 0:
        # Pure or separated cells have no maximum likelihood estimate.
        raise ConfigError("exp.mlm.lasso_alpha must be > 0 for classification.")
    check_choice("exp.mlm.cov_kind", mlm.cov_kind, CovKind)
    check_choice("exp.mlm.layer_cov_kind", mlm.layer_cov_kind, CovKind)
    check_range("exp.mlm.gmm_max_iter", mlm.gmm_max_iter, low=1, integer=True)
    check_range("exp.mlm.gmm_tol", mlm.gmm_tol, low=0, low_open=True)

    interpret = config.exp.interpret
    check_choice("exp.interpret.method", interpret.method, Method)
    if interpret.epic != "all":
        check_range("exp.interpret.epic", interpret.epic, low=0, integer=True)
    check_range("exp.interpret.xi", interpret.xi, low=0, high=1, low_open=True, high_open=True)
    check_range("exp.interpret.psi", interpret.psi, low=0, high=1, low_open=True)
    check_range("exp.interpret.eta", interpret.eta, low=0, integer=True)
    check_range("exp.interpret.level", interpret.level, low=0, high=1, low_open=True, high_open=True)

    check_grid("exp.cv.grid", config.exp.cv.grid)
    if config.exp.cv.folds < 2:
        raise FoldTooSmall(f"Cross-validation needs at least 2 folds, got {config.exp.cv.folds}.")

    check_grid("exp.tradeoff.k_grid", config.exp.tradeoff.k_grid)
    check_grid("exp.tradeoff.j_grid", config.exp.tradeoff.j_grid)

    check_choice("exp.predict.mode", config.exp.predict.mode, PredictMode)

    generate = config.exp.generate
    check_range("exp.generate.n", generate.n, low=2, integer=True)
    check_range("exp.generate.p", generate.p, low=1, integer=True)
    check_range("exp.generate.n_regions", generate.n_regions, low=1, integer=True)
    check_range("exp.generate.noise", generate.noise, low=0)
    if generate.warp != 0 and generate.p < 2:
        raise ConfigError("exp.generate.warp acts on x2 and needs p >= 2.")
