"""The persisted model document.

A document is a JSON file holding everything needed to predict and to
interpret: the input schema, the network, the layer clusterings, the cells
and both mixtures of linear models. Keys are sorted and floats are written
with their shortest round-trip representation, so that loading gives
bit-identical predictions and reruns give byte-identical files.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import pandas as pd

from ..data import ColumnKind, Dataset, TaskKind, dummy_encode, from_frame
from ..errors import CorruptDocument, SchemaMismatch, VersionMismatch
from ..linmod import LinearModel
from ..mixture import MlmModel
from ..mlp import MLP
from ..partition import CellPartition, LayerClusterings
from .constants import FORMAT_VERSION, UNLABELED

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Schema:
    """Columns of the training table, before and after encoding."""

    raw_columns: list[str]
    feature_names: list[str]
    column_kinds: list[ColumnKind]
    levels: dict[str, list[str]]
    target: str
    task: TaskKind

    @classmethod
    def from_dataset(cls, dataset: Dataset, target: str) -> "Schema":
        return cls(
            raw_columns=list(dataset.raw_columns),
            feature_names=list(dataset.feature_names),
            column_kinds=list(dataset.column_kinds),
            levels=dict(dataset.levels),
            target=target,
            task=dataset.task,
        )

    def encode(self, frame: pd.DataFrame, labeled: bool = True) -> Dataset:
        """Encode a raw table the way the training table was encoded.

        Columns are matched by name, their order does not matter.

        ---
        Args:
            frame: The raw table, as strings.
            labeled: Whether the target column is required.

        ---
        Returns:
            The encoded dataset. Unlabeled tables get a zero target.
        """
        columns = list(frame.columns)
        missing = [name for name in self.raw_columns if name not in columns]
        if labeled and self.target not in columns:
            missing.append(self.target)
        extra = [
            name for name in columns if name not in self.raw_columns and name != self.target
        ]
        if missing or extra:
            raise SchemaMismatch(missing, extra)

        if self.target not in columns:
            frame = frame.assign(**{self.target: UNLABELED})
        frame = frame[self.raw_columns + [self.target]]

        dataset = from_frame(frame, self.target, self.task, nominal=list(self.levels))
        dataset = dummy_encode(dataset, levels=self.levels)
        if dataset.feature_names != self.feature_names:
            raise SchemaMismatch(
                [], [], f"encoded columns {dataset.feature_names} != {self.feature_names}"
            )
        return dataset

    def to_dict(self) -> dict[str, Any]:
        return {
            "raw_columns": self.raw_columns,
            "feature_names": self.feature_names,
            "column_kinds": [kind.value for kind in self.column_kinds],
            "levels": self.levels,
            "target": self.target,
            "task": self.task.value,
        }

    @classmethod
    def from_dict(cls, state: dict[str, Any]) -> "Schema":
        return cls(
            raw_columns=list(state["raw_columns"]),
            feature_names=list(state["feature_names"]),
            column_kinds=[ColumnKind(kind) for kind in state["column_kinds"]],
            levels={name: list(levels) for name, levels in state["levels"].items()},
            target=state["target"],
            task=TaskKind(state["task"]),
        )


@dataclass
class ModelDocument:
    """Everything a trained pipeline produces.

    ---
    Parameters:
        schema: The input schema.
        mlp: The co-supervising network, on standardized inputs.
        layers: The mixtures of the hidden layers.
        partition: The cells of the training samples.
        mlm: The mixture of linear models over the EPICs.
        mlm_cell: The mixture of linear models over the cells.
        baseline: A single linear model fitted on the whole training set.
        config: Snapshot of the configuration used for training.
        metrics: Training and test scores of every predictor.
    """

    schema: Schema
    mlp: MLP
    layers: LayerClusterings
    partition: CellPartition
    mlm: MlmModel
    mlm_cell: MlmModel
    baseline: LinearModel
    config: dict[str, Any] = field(default_factory=dict)
    metrics: dict[str, Any] = field(default_factory=dict)

    @property
    def scaler(self):
        return self.mlm.scaler

    def to_dict(self) -> dict[str, Any]:
        return {
            "format_version": FORMAT_VERSION,
            "schema": self.schema.to_dict(),
            "scaler": self.scaler.to_dict(),
            "mlp": self.mlp.to_dict(),
            "layers": self.layers.to_dict(),
            "partition": self.partition.to_dict(),
            "mlm": self.mlm.to_dict(),
            "mlm_cell": self.mlm_cell.to_dict(),
            "baseline": self.baseline.to_dict(),
            "config": self.config,
            "metrics": self.metrics,
        }

    @classmethod
    def from_dict(cls, state: dict[str, Any]) -> "ModelDocument":
        return cls(
            schema=Schema.from_dict(state["schema"]),
            mlp=MLP.from_dict(state["mlp"]),
            layers=LayerClusterings.from_dict(state["layers"]),
            partition=CellPartition.from_dict(state["partition"]),
            mlm=MlmModel.from_dict(state["mlm"]),
            mlm_cell=MlmModel.from_dict(state["mlm_cell"]),
            baseline=LinearModel.from_dict(state["baseline"]),
            config=state["config"],
            metrics=state["metrics"],
        )


def dumps(state: Any) -> str:
    return json.dumps(state, sort_keys=True, indent=1)


def save_model(document: ModelDocument, path: Path | str):
    Path(path).write_text(dumps(document.to_dict()))
    logger.info("Model saved to %s.", path)


def load_model(path: Path | str) -> ModelDocument:
    """Read a model document.

    ---
    Raises:
        VersionMismatch: The document was written by another format version.
        CorruptDocument: The file is not a valid document.
    """
    try:
        state = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise CorruptDocument(f"No model document at {path}.")
    except (json.JSONDecodeError, UnicodeDecodeError) as error:
        raise CorruptDocument(f"{path} is not valid JSON: {error}")

    if not isinstance(state, dict) or "format_version" not in state:
        raise CorruptDocument(f"{path} has no format version.")
    if state["format_version"] != FORMAT_VERSION:
        raise VersionMismatch(
            f"{path} has format version {state['format_version']!r}, "
            f"expected {FORMAT_VERSION}."
        )

    try:
        document = ModelDocument.from_dict(state)
    except (KeyError, TypeError, ValueError, IndexError) as error:
        raise CorruptDocument(f"{path} is incomplete: {error!r}")

    logger.info("Model loaded from %s.", path)
    return document
