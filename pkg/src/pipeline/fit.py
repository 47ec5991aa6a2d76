"""The training pipeline, from the raw table to the mixtures of linear models.

Each step runs inside a `stage` so that a failure reports where it happened.
"""
import logging
from dataclasses import dataclass

import torch
from omegaconf import DictConfig, OmegaConf
from wandb.sdk.wandb_run import Run

from ..data import DTYPE, Dataset, Scaler, TaskKind, dummy_encode, load_csv, read_frame, split, standardize
from ..errors import CorruptDocument
from ..linmod import LinearModel, fit_local
from ..metrics import accuracy, agreement, auc, f1_score, rmse
from ..mixture import MlmModel, build_mlm, cell_models, distance_matrix, merge_cells, singleton_membership
from ..mlp import MLP, mlp_predict, train_mlp
from ..partition import (
    CellPartition,
    CoSupervisedSet,
    LayerClusterings,
    assign_cells,
    cosupervise_cells,
    layer_cells,
)
from .document import ModelDocument, Schema
from .stage import stage

logger = logging.getLogger(__name__)

MLM_PREDICTORS = ["mlm-epic", "mlm-epic-hard", "mlm-cell"]


@dataclass
class CellStage:
    """Everything up to the local models of the cells.

    ---
    Parameters:
        train: The standardized training set.
        scaler: The scaler of the training set.
        mlp: The co-supervising network.
        layers: The mixtures of the hidden layers.
        partition: The cells of the training samples.
        cosets: The co-supervised set of each cell.
        models: The local model of each cell.
    """

    train: Dataset
    scaler: Scaler
    mlp: MLP
    layers: LayerClusterings
    partition: CellPartition
    cosets: list[CoSupervisedSet]
    models: list[LinearModel]


@dataclass
class FittedPipeline:
    cells: CellStage
    mlm: MlmModel
    mlm_cell: MlmModel
    baseline: LinearModel


def load_data(config: DictConfig) -> tuple[Dataset, Dataset]:
    """Read, encode and split the dataset of the experiment.

    ---
    Returns:
        train: The encoded training set, in raw units.
        test: The encoded test set, in raw units.
    """
    data = config.exp.data
    with stage("data"):
        nominal = list(data.nominal or [])
        dataset = dummy_encode(load_csv(data.path, data.target, data.task, nominal))
        if data.test_path is None:
            train, test = split(dataset, data.test_fraction, config.seed)
        else:
            schema = Schema.from_dataset(dataset, data.target)
            train, test = dataset, schema.encode(read_frame(data.test_path))

    logger.info("%d training and %d test rows, %d covariates.", train.n, test.n, train.p)
    return train, test


def train_network(config: DictConfig, train: Dataset, run: Run | None = None) -> MLP:
    """Train the co-supervising network on the standardized training set."""
    with stage("mlp"):
        return train_mlp(
            train,
            list(config.model.widths),
            config.exp.trainer.epochs,
            config.exp.trainer.batch_size,
            config.exp.trainer.learning_rate,
            config.seed,
            config.model.activation,
            run,
            config.disable_logs,
        )


def fit_cells(
    config: DictConfig,
    train: Dataset,
    k_per_layer: int | None = None,
    mlp: MLP | None = None,
    run: Run | None = None,
) -> CellStage:
    """Build the cells and their local models.

    ---
    Args:
        config: The configuration.
        train: The encoded training set, in raw units.
        k_per_layer: Number of layer cells of every layer. Defaults to the
            configured value.
        mlp: An already trained network, trained when not given.
        run: W&B run receiving the training curve of the network.

    ---
    Returns:
        The cells and their local models.
    """
    mlm = config.exp.mlm
    k_per_layer = mlm.k_per_layer if k_per_layer is None else k_per_layer

    with stage("standardize"):
        standardized, scaler = standardize(train, config.exp.data.standardize)

    if mlp is None:
        mlp = train_network(config, standardized, run)

    with stage("layer_cells"):
        layers = layer_cells(
            mlp,
            standardized.x,
            k_per_layer,
            config.seed,
            mlm.layer_cov_kind,
            mlm.gmm_max_iter,
            mlm.gmm_tol,
            config.disable_logs,
        )

    with stage("assign_cells"):
        partition = assign_cells(layers, mlp, standardized.x)

    with stage("cosupervise"):
        cosets = cosupervise_cells(
            partition,
            standardized.x,
            standardized.y,
            mlp,
            mlm.m,
            mlm.epsilon,
            config.seed,
            standardized.dummy_mask,
            mlm.perturb_dummies,
            config.disable_logs,
        )

    with stage("cell_models"):
        models = cell_models(cosets, standardized.task, mlm.lasso_alpha, config.disable_logs)

    return CellStage(standardized, scaler, mlp, layers, partition, cosets, models)


def fit_epics(config: DictConfig, cells: CellStage, n_epics: int | None = None) -> MlmModel:
    """Merge the cells into EPICs and build the mixture of linear models.

    More EPICs than occupied cells are clamped to the number of cells.
    """
    mlm = config.exp.mlm
    n_epics = mlm.n_epics if n_epics is None else n_epics
    n_cells = cells.partition.n_cells
    if n_epics > n_cells:
        logger.warning(
            "%d EPICs requested but only %d cells are occupied, using %d EPICs.",
            n_epics,
            n_cells,
            n_cells,
        )
        n_epics = n_cells

    with stage("merge_cells"):
        distances = distance_matrix(cells.models, cells.cosets, cells.train.task)
        membership = merge_cells(distances, n_epics)

    with stage("build_mlm"):
        return build_mlm(
            cells.train,
            cells.scaler,
            cells.partition,
            cells.cosets,
            membership,
            mlm.lasso_alpha,
            mlm.cov_kind,
            config.exp.interpret.level,
        )


def fit_cell_mlm(config: DictConfig, cells: CellStage) -> MlmModel:
    """The mixture of linear models without merging, one EPIC per cell."""
    with stage("build_mlm"):
        return build_mlm(
            cells.train,
            cells.scaler,
            cells.partition,
            cells.cosets,
            singleton_membership(cells.partition.n_cells),
            config.exp.mlm.lasso_alpha,
            config.exp.mlm.cov_kind,
            config.exp.interpret.level,
        )


def fit_pipeline(config: DictConfig, train: Dataset, run: Run | None = None) -> FittedPipeline:
    """Run every step of the training pipeline."""
    cells = fit_cells(config, train, run=run)
    mlm = fit_epics(config, cells)
    mlm_cell = fit_cell_mlm(config, cells)

    with stage("baseline"):
        baseline = fit_local(
            cells.train.x, cells.train.y, cells.train.task, config.exp.mlm.lasso_alpha
        )

    logger.info(
        "%d cells merged into %d EPICs of sizes %s.",
        cells.partition.n_cells,
        mlm.n_epics,
        [epic.size for epic in mlm.epics],
    )
    return FittedPipeline(cells, mlm, mlm_cell, baseline)


def make_document(
    config: DictConfig, train: Dataset, fitted: FittedPipeline
) -> ModelDocument:
    return ModelDocument(
        schema=Schema.from_dataset(train, config.exp.data.target),
        mlp=fitted.cells.mlp,
        layers=fitted.cells.layers,
        partition=fitted.cells.partition,
        mlm=fitted.mlm,
        mlm_cell=fitted.mlm_cell,
        baseline=fitted.baseline,
        config=OmegaConf.to_container(config, resolve=True),
    )


def training_set(document: ModelDocument) -> Dataset:
    """Reload the training set of a document from its configuration snapshot."""
    train, _ = load_data(OmegaConf.create(document.config))
    if train.n != len(document.mlm.train_epic_labels) or train.feature_names != document.schema.feature_names:
        raise CorruptDocument("The training data changed since the model was trained.")
    return train


def mlp_predictions(mlp: MLP, scaler: Scaler, x_raw: torch.Tensor) -> torch.Tensor:
    return mlp_predict(mlp, scaler.transform(x_raw.to(DTYPE)))


def predict_all(document: ModelDocument, x_raw: torch.Tensor) -> dict[str, torch.Tensor]:
    """Predictions of every predictor of the document, on raw inputs."""
    x = document.scaler.transform(x_raw.to(DTYPE))
    return {
        "mlm-epic": document.mlm.predict_soft(x_raw),
        "mlm-epic-hard": document.mlm.predict_hard(x_raw),
        "mlm-cell": document.mlm_cell.predict_soft(x_raw),
        "lr": document.baseline.predict(x),
        "mlp": mlp_predict(document.mlp, x),
    }


def score(task: TaskKind, predictions: torch.Tensor, targets: torch.Tensor) -> dict[str, float]:
    """RMSE for regression. AUC, F1 and accuracy at 0.5 for classification."""
    if task == TaskKind.REGRESSION:
        return {"rmse": rmse(predictions, targets)}

    labels = (predictions >= 0.5).to(DTYPE)
    return {
        "auc": auc(predictions, targets),
        "f1": f1_score(labels, targets),
        "accuracy": accuracy(labels, targets),
    }


def evaluate_predictors(document: ModelDocument, dataset: Dataset) -> dict[str, dict[str, float]]:
    """Scores of every predictor, and agreement of the mixtures with the network."""
    predictions = predict_all(document, dataset.x)
    scores = {
        name: score(dataset.task, values, dataset.y) for name, values in predictions.items()
    }
    for name in MLM_PREDICTORS:
        scores[name]["agreement"] = agreement(predictions[name], predictions["mlp"])
    return scores
