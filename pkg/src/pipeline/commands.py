"""The commands of `main.py`.

Every command reads the composed configuration and writes its products in
`config.out`. Input paths are expected to be absolute.
"""
import logging
import math
from pathlib import Path
from typing import Any, Callable

import pandas as pd
import torch
import wandb
from omegaconf import DictConfig, OmegaConf

from ..data import DTYPE, TaskKind, kfold, planted_regions, read_frame, region_boundaries
from ..interpret import (
    draw_coefficient_intervals,
    draw_joint_density,
    draw_marginal_densities,
    explain_epic_pr,
    explainable_dimensions,
    marginal_density_frame,
)
from ..interpret.lds import check_epic
from ..metrics import agreement
from .constants import Command, Method, PredictMode
from .document import ModelDocument, load_model, save_model
from .fit import (
    evaluate_predictors,
    fit_cell_mlm,
    fit_cells,
    fit_epics,
    fit_pipeline,
    load_data,
    make_document,
    mlp_predictions,
    score,
    training_set,
)
from .reports import (
    coefficients_frame,
    conditions_table,
    epics_frame,
    flatten,
    write_csv,
    write_json,
)
from .stage import stage

logger = logging.getLogger(__name__)

PROJECT = "mlm-cosupervision"


def output_dir(config: DictConfig) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def init_run(config: DictConfig):
    """W&B run of the command, disabled unless `mode` says otherwise."""
    return wandb.init(
        project=PROJECT,
        group=config.exp.group,
        job_type=config.command,
        config=OmegaConf.to_container(config, resolve=True),
        mode=config.mode,
    )


def collect_flags(document: ModelDocument) -> dict[str, list[str]]:
    """Non-fatal conditions met by the fits, by origin."""
    flags = {}
    for layer, gmm in enumerate(document.layers.per_layer):
        if gmm.flags:
            flags[f"layer_{layer}"] = gmm.flags
    for j, epic in enumerate(document.mlm.epics):
        epic_flags = epic.local_model.flags + epic.density.flags
        if epic_flags:
            flags[f"epic_{j}"] = sorted(set(epic_flags))
    if document.baseline.flags:
        flags["baseline"] = document.baseline.flags
    return flags


def cmd_train(config: DictConfig) -> ModelDocument:
    """Train the whole pipeline, save the model and its report."""
    out = output_dir(config)
    train, test = load_data(config)

    with init_run(config) as run:
        fitted = fit_pipeline(config, train, run)
        document = make_document(config, train, fitted)
        with stage("evaluate"):
            document.metrics = {
                "train": evaluate_predictors(document, train),
                "test": evaluate_predictors(document, test),
            }
        run.log(flatten(document.metrics))

    with stage("save"):
        save_model(document, out / "model.json")
        report = {
            "n_train": train.n,
            "n_test": test.n,
            "k_per_layer": document.partition.k_per_layer,
            "n_possible_cells": document.partition.n_possible,
            "n_cells": document.partition.n_cells,
            "cell_sizes": document.partition.sizes.tolist(),
            "n_epics_requested": config.exp.mlm.n_epics,
            "n_epics": document.mlm.n_epics,
            "epic_sizes": [epic.size for epic in document.mlm.epics],
            "flags": collect_flags(document),
            "metrics": document.metrics,
        }
        write_json(report, out / "train_report.json")
        write_csv(epics_frame(document.mlm), out / "epics.csv")
        write_csv(
            coefficients_frame(document.mlm, document.schema.feature_names),
            out / "coefficients.csv",
        )

    logger.info("Test scores of the EPIC mixture: %s.", document.metrics["test"]["mlm-epic"])
    return document


def choose_k(table: pd.DataFrame, task: TaskKind) -> int:
    """Best mean validation score, ties going to the smaller K.

    Undefined AUCs rank last.
    """
    best = None
    for k, mean in zip(table["k"], table["mean"]):
        loss = mean if task == TaskKind.REGRESSION else -mean
        loss = math.inf if pd.isna(loss) else loss
        if best is None or (loss, k) < best[0]:
            best = ((loss, k), k)
    return int(best[1])


def cmd_cv_k(config: DictConfig) -> dict[str, Any]:
    """Choose the number of layer cells by cross-validation of the cell mixture.

    ---
    Returns:
        The chosen K and the table of validation scores, one row per K.
    """
    out = output_dir(config)
    train, _ = load_data(config)
    grid = list(config.exp.cv.grid)
    metric = "rmse" if train.task == TaskKind.REGRESSION else "auc"

    with stage("cv"):
        folds = kfold(train, config.exp.cv.folds, config.seed)

    scores = {k: [] for k in range(len(grid))}
    with init_run(config) as run:
        for fold, (train_ids, valid_ids) in enumerate(folds):
            fold_train, fold_valid = train.subset(train_ids), train.subset(valid_ids)
            mlp = None
            for row, k in enumerate(grid):
                cells = fit_cells(config, fold_train, k, mlp)
                mlp = cells.mlp
                mlm_cell = fit_cell_mlm(config, cells)
                predictions = mlm_cell.predict_soft(fold_valid.x)
                value = score(train.task, predictions, fold_valid.y)[metric]
                scores[row].append(value)
                run.log({f"cv/{metric}": value, "cv/k": k, "cv/fold": fold})
                logger.info("Fold %d, K=%d: validation %s %.6g.", fold, k, metric, value)

    table = pd.DataFrame({"k": grid, "metric": metric})
    values = torch.tensor([scores[row] for row in range(len(grid))], dtype=DTYPE)
    table["mean"] = values.mean(dim=1).tolist()
    for fold in range(len(folds)):
        table[f"fold_{fold}"] = values[:, fold].tolist()

    chosen = choose_k(table, train.task)
    write_csv(table, out / "cv.csv")
    result = {"k": chosen, "metric": metric, "table": table.to_dict(orient="records")}
    write_json(result, out / "cv.json")
    logger.info("Cross-validation chose K=%d.", chosen)
    return result


def cmd_predict(config: DictConfig) -> pd.DataFrame:
    """Predict the rows of a CSV file with the EPIC mixture."""
    settings = config.exp.predict
    with stage("load"):
        document = load_model(settings.model_path)
    with stage("data"):
        dataset = document.schema.encode(read_frame(settings.input_path), labeled=False)

    with stage("predict"):
        mlm = document.mlm
        hard = PredictMode(settings.mode) == PredictMode.HARD
        predictions = mlm.predict(dataset.x, hard=hard)

        columns = {}
        if mlm.task == TaskKind.REGRESSION:
            columns["prediction"] = predictions.tolist()
        else:
            columns["probability"] = predictions.tolist()
            columns["label"] = (predictions >= 0.5).long().tolist()
        if settings.gammas:
            posteriors = mlm.posteriors(dataset.x)
            for j in range(mlm.n_epics):
                columns[f"gamma_{j}"] = posteriors[:, j].tolist()
        frame = pd.DataFrame(columns)

    output = settings.output
    if output != "-":
        output = output_dir(config) / output
    write_csv(frame, output)
    return frame


def cmd_evaluate(config: DictConfig) -> dict[str, Any]:
    """Score every predictor of a saved model on a labeled CSV file."""
    settings = config.exp.evaluate
    with stage("load"):
        document = load_model(settings.model_path)
    with stage("data"):
        test = document.schema.encode(read_frame(settings.input_path), labeled=True)
    with stage("evaluate"):
        report = {
            "train": document.metrics.get("train"),
            "test": evaluate_predictors(document, test),
        }

    write_json(report, output_dir(config) / "evaluate.json")
    return report


def grid_bounds(x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Range of each column, widened by 10% on both sides."""
    low, high = x.min(dim=0).values, x.max(dim=0).values
    margin = 0.1 * (high - low)
    return low - margin, high + margin


def explain_lds(
    config: DictConfig, document: ModelDocument, train, epics: list[int], out: Path
) -> dict[str, Any]:
    mlm, names = document.mlm, document.schema.feature_names
    if mlm.n_epics == 1:
        logger.info("A single EPIC, there is nothing to separate it from.")
        return {"method": Method.LDS.value, "trivial": True, "epics": []}

    low, high = grid_bounds(train.x)
    results = []
    for j in epics:
        dims = explainable_dimensions(mlm, train, j, config.exp.interpret.xi, config.disable_logs)
        results.append(dims.to_dict(names))
        if not dims.found:
            continue

        frame = marginal_density_frame(mlm, dims.dims, names, low, high)
        write_csv(frame, out / f"lds_epic_{j}.csv")
        draw_marginal_densities(frame, j, out / f"lds_epic_{j}.svg")
        if len(dims.dims) >= 2:
            pair = (dims.dims[0], dims.dims[1])
            draw_joint_density(mlm, j, pair, names, low, high, out / f"lds_epic_{j}_joint.svg")

    return {"method": Method.LDS.value, "trivial": False, "epics": results}


def explain_pr(
    config: DictConfig, document: ModelDocument, train, epics: list[int], out: Path
) -> dict[str, Any]:
    mlm, schema = document.mlm, document.schema
    settings = config.exp.interpret
    conditions = {
        j: explain_epic_pr(mlm, train, j, settings.psi, settings.eta) for j in epics
    }

    (out / "pr.txt").write_text(
        conditions_table(mlm, conditions, schema.feature_names, schema.levels)
    )
    return {
        "method": Method.PR.value,
        "psi": settings.psi,
        "eta": settings.eta,
        "epics": [
            {
                "epic": j,
                "size": mlm.epics[j].size,
                "conditions": [
                    {
                        **condition.to_dict(schema.feature_names),
                        "rule": condition.render(schema.feature_names, schema.levels),
                    }
                    for condition in epic_conditions
                ],
            }
            for j, epic_conditions in conditions.items()
        ],
    }


def cmd_explain(config: DictConfig) -> dict[str, Any]:
    """Interpret the EPICs of a saved model, with LDS or PR."""
    out = output_dir(config)
    settings = config.exp.interpret
    with stage("load"):
        document = load_model(settings.model_path)
        train = training_set(document)

    with stage("explain"):
        mlm = document.mlm
        if settings.epic == "all":
            epics = list(range(mlm.n_epics))
        else:
            check_epic(mlm, settings.epic)
            epics = [settings.epic]

        names = document.schema.feature_names
        write_csv(epics_frame(mlm), out / "epics.csv")
        write_csv(coefficients_frame(mlm, names), out / "coefficients.csv")
        draw_coefficient_intervals(mlm, names, out / "coefficients.svg")

        method = Method(settings.method)
        if method == Method.LDS:
            report = explain_lds(config, document, train, epics, out)
        else:
            report = explain_pr(config, document, train, epics, out)

    write_json(report, out / f"{method.value}.json")
    return report


def cmd_tradeoff(config: DictConfig) -> pd.DataFrame:
    """Train and test errors of the cell mixture over a K grid, and of the
    EPIC mixture over a J grid."""
    out = output_dir(config)
    train, test = load_data(config)
    metric = "rmse" if train.task == TaskKind.REGRESSION else "auc"

    def row(predictor: str, cells, mlm) -> dict[str, Any]:
        entry = {
            "predictor": predictor,
            "k_per_layer": cells.partition.k_per_layer[0],
            "n_cells": cells.partition.n_cells,
            "n_epics": mlm.n_epics,
        }
        for name, dataset in [("train", train), ("test", test)]:
            predictions = mlm.predict_soft(dataset.x)
            reference = mlp_predictions(cells.mlp, cells.scaler, dataset.x)
            entry[f"{name}_{metric}"] = score(dataset.task, predictions, dataset.y)[metric]
            entry[f"{name}_agreement"] = agreement(predictions, reference)
        return entry

    rows, sizes = [], {}
    with init_run(config) as run:
        base = fit_cells(config, train, run=run)
        for k in config.exp.tradeoff.k_grid:
            cells = base if k == config.exp.mlm.k_per_layer else fit_cells(config, train, k, base.mlp)
            rows.append(row("mlm-cell", cells, fit_cell_mlm(config, cells)))
            run.log(flatten(rows[-1], "tradeoff"))

        for n_epics in config.exp.tradeoff.j_grid:
            mlm = fit_epics(config, base, n_epics)
            rows.append(row("mlm-epic", base, mlm))
            sizes[str(n_epics)] = [epic.size for epic in mlm.epics]
            run.log(flatten(rows[-1], "tradeoff"))

    frame = pd.DataFrame(rows)
    write_csv(frame, out / "tradeoff.csv")
    write_json(sizes, out / "epic_sizes.json")
    return frame


def cmd_generate(config: DictConfig) -> pd.DataFrame:
    """Write a table with planted piecewise-linear regions."""
    settings = config.exp.generate
    with stage("generate"):
        generator = torch.Generator().manual_seed(config.seed)
        frame, regions, coefficients = planted_regions(
            settings.n,
            settings.p,
            settings.n_regions,
            settings.noise,
            generator,
            settings.warp,
            settings.coefficient_range,
            settings.nominal_levels,
        )

    output = Path(settings.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    write_csv(frame, output)
    write_json(
        {
            "boundaries": region_boundaries(settings.n_regions, -2.0, 2.0).tolist(),
            "coefficients": coefficients.tolist(),
            "regions": regions.tolist(),
        },
        output.with_suffix(".json"),
    )
    logger.info("%d rows with %d planted regions written to %s.", len(frame), settings.n_regions, output)
    return frame


COMMANDS: dict[Command, Callable[[DictConfig], Any]] = {
    Command.TRAIN: cmd_train,
    Command.CV_K: cmd_cv_k,
    Command.PREDICT: cmd_predict,
    Command.EVALUATE: cmd_evaluate,
    Command.EXPLAIN: cmd_explain,
    Command.TRADEOFF: cmd_tradeoff,
    Command.GENERATE: cmd_generate,
}


def run_command(config: DictConfig) -> Any:
    return COMMANDS[Command(config.command)](config)
