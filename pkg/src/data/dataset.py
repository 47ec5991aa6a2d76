"""Tabular ingestion, encoding, standardization and splitting.

Everything upstream of modeling lives here. All functions return new objects
and never modify their inputs.
"""
import csv
import logging
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import pandas as pd
import torch

from ..errors import (
    DataError,
    EmptyFile,
    FoldTooSmall,
    FractionOutOfRange,
    MissingTarget,
    RaggedRows,
    SchemaMismatch,
    SingleLevelColumn,
    UnparseableCell,
)
from .constants import DTYPE, LEVEL_SEPARATOR, ColumnKind, TaskKind

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    """A standardized-or-not tabular matrix with its target.

    ---
    Parameters:
        feature_names: Names of the numeric columns of `x`.
        x: The covariates.
            Shape of [n, p].
        y: The target. Values are in {0, 1} for classification.
            Shape of [n,].
        task: The task kind.
        column_kinds: Kind of each column of `x`.
        raw_columns: Original covariate columns, in file order.
        nominal: Raw string values of nominal columns not yet dummy-encoded.
        levels: Sorted levels of every nominal column encoded so far.
    """

    feature_names: list[str]
    x: torch.Tensor
    y: torch.Tensor
    task: TaskKind
    column_kinds: list[ColumnKind]
    raw_columns: list[str] = field(default_factory=list)
    nominal: dict[str, list[str]] = field(default_factory=dict)
    levels: dict[str, list[str]] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def dummy_mask(self) -> torch.Tensor:
        return torch.tensor(
            [kind == ColumnKind.DUMMY for kind in self.column_kinds], dtype=torch.bool
        )

    def subset(self, indices: torch.Tensor) -> "Dataset":
        """Select some rows of the dataset."""
        indices = indices.long()
        nominal = {
            name: [values[i] for i in indices.tolist()]
            for name, values in self.nominal.items()
        }
        return replace(self, x=self.x[indices], y=self.y[indices], nominal=nominal)

    def with_x(self, x: torch.Tensor) -> "Dataset":
        assert x.shape == self.x.shape, "Covariates shape must not change."
        return replace(self, x=x)


@dataclass(frozen=True)
class Scaler:
    """Per-column affine map `(x - means) / stds`.

    Dummy columns and disabled standardization keep mean 0 and std 1.
    """

    means: torch.Tensor
    stds: torch.Tensor
    scaled: torch.Tensor
    zero_variance: torch.Tensor

    def transform(self, x: torch.Tensor) -> torch.Tensor:
        return (x - self.means) / self.stds

    def inverse_transform(self, x: torch.Tensor) -> torch.Tensor:
        return x * self.stds + self.means

    def apply(self, dataset: Dataset) -> Dataset:
        return dataset.with_x(self.transform(dataset.x))

    def to_dict(self) -> dict[str, Any]:
        return {
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "scaled": self.scaled.tolist(),
            "zero_variance": self.zero_variance.tolist(),
        }

    @classmethod
    def from_dict(cls, state: dict[str, Any]) -> "Scaler":
        return cls(
            means=torch.tensor(state["means"], dtype=DTYPE),
            stds=torch.tensor(state["stds"], dtype=DTYPE),
            scaled=torch.tensor(state["scaled"], dtype=torch.bool),
            zero_variance=torch.tensor(state["zero_variance"], dtype=torch.bool),
        )


def read_frame(path: Path | str) -> pd.DataFrame:
    """Read a CSV file as strings, rejecting ragged rows and empty files."""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise EmptyFile(f"{path} is empty.")
    except pd.errors.ParserError as error:
        # The parser reports 1-based file lines, the header being line 1.
        match = re.search(r"Expected (\d+) fields in line (\d+), saw (\d+)", str(error))
        if match is None:
            raise DataError(f"Cannot parse {path}: {error}")
        expected, line, found = (int(g) for g in match.groups())
        raise RaggedRows(line - 1, expected, found)

    # Short rows are silently padded by the parser.
    with open(path, newline="") as file:
        rows = (row for row in csv.reader(file) if row)
        header = next(rows)
        for row, fields in enumerate(rows, start=1):
            if len(fields) != len(header):
                raise RaggedRows(row, len(header), len(fields))

    if len(frame) == 0:
        raise EmptyFile(f"{path} has a header but no rows.")

    return frame


def _parse_numeric(values: pd.Series) -> pd.Series:
    if pd.api.types.is_numeric_dtype(values):
        return values.astype(float)
    return pd.to_numeric(values.str.strip(), errors="coerce")


def from_frame(
    frame: pd.DataFrame,
    target: str,
    task: TaskKind | str,
    nominal: list[str] | tuple[str, ...] = (),
) -> Dataset:
    """Build a dataset from a raw table.

    A column is nominal iff one of its cells does not parse as a number or it
    is listed in `nominal`. Nominal columns are kept raw for `dummy_encode`.
    """
    task = TaskKind(task)
    if target not in frame.columns:
        raise MissingTarget(f"Target column {target!r} not found in {list(frame.columns)}.")
    if len(frame) == 0:
        raise EmptyFile("The table has no rows.")

    numeric_names, numeric_columns, nominal_values = [], [], dict()
    raw_columns = [name for name in frame.columns if name != target]

    for name in raw_columns:
        raw = frame[name]
        parsed = _parse_numeric(raw)
        as_text = raw.astype(str).str.strip()

        for row, (value, text) in enumerate(zip(parsed, as_text)):
            if text == "":
                raise UnparseableCell(row + 1, name, text)
            if pd.notna(value) and not math.isfinite(value):
                raise UnparseableCell(row + 1, name, text)

        if name in nominal or parsed.isna().any():
            nominal_values[name] = as_text.tolist()
        else:
            numeric_names.append(name)
            numeric_columns.append(torch.tensor(parsed.to_numpy(), dtype=DTYPE))

    targets = _parse_numeric(frame[target])
    for row, value in enumerate(targets):
        if pd.isna(value) or not math.isfinite(value):
            raise UnparseableCell(row + 1, target, str(frame[target].iloc[row]))
        if task == TaskKind.CLASSIFICATION and value not in (0.0, 1.0):
            raise UnparseableCell(row + 1, target, str(frame[target].iloc[row]))

    n = len(frame)
    x = (
        torch.stack(numeric_columns, dim=1)
        if numeric_columns
        else torch.zeros((n, 0), dtype=DTYPE)
    )
    return Dataset(
        feature_names=numeric_names,
        x=x,
        y=torch.tensor(targets.to_numpy(), dtype=DTYPE),
        task=task,
        column_kinds=[ColumnKind.CONTINUOUS] * len(numeric_names),
        raw_columns=raw_columns,
        nominal=nominal_values,
    )


def load_csv(
    path: Path | str,
    target: str,
    task: TaskKind | str,
    nominal: list[str] | tuple[str, ...] = (),
) -> Dataset:
    """Read a CSV file with a mandatory header row."""
    dataset = from_frame(read_frame(path), target, task, nominal)
    logger.info(
        "Loaded %d rows from %s: %d numeric and %d nominal columns.",
        dataset.n,
        path,
        dataset.p,
        len(dataset.nominal),
    )
    return dataset


def dummy_encode(
    dataset: Dataset, levels: dict[str, list[str]] | None = None
) -> Dataset:
    """Replace each c-level nominal column by c-1 binary columns.

    The reference level is the first level in sorted order. Columns keep
    the original file order, dummies taking the place of their origin.

    ---
    Args:
        dataset: The dataset with raw nominal columns.
        levels: Known levels per nominal column. When given (prediction
            time), values outside those levels are rejected.

    ---
    Returns:
        The encoded dataset, with no remaining raw nominal column.
    """
    if not dataset.nominal:
        return dataset

    numeric = dict(zip(dataset.feature_names, dataset.x.T))
    names, columns, kinds = [], [], []
    encoded_levels = dict(dataset.levels)

    for name in dataset.raw_columns:
        if name in numeric:
            names.append(name)
            columns.append(numeric[name])
            kinds.append(dataset.column_kinds[dataset.feature_names.index(name)])
            continue

        values = dataset.nominal[name]
        if levels is None:
            column_levels = sorted(set(values))
            if len(column_levels) < 2:
                raise SingleLevelColumn(name)
        else:
            if name not in levels:
                raise SchemaMismatch([], [name], f"column {name!r} was not nominal")
            column_levels = levels[name]
            unknown = sorted(set(values) - set(column_levels))
            if unknown:
                raise SchemaMismatch([], [], f"unknown levels {unknown} in {name!r}")

        encoded_levels[name] = column_levels
        for level in column_levels[1:]:
            names.append(f"{name}{LEVEL_SEPARATOR}{level}")
            columns.append(torch.tensor([v == level for v in values], dtype=DTYPE))
            kinds.append(ColumnKind.DUMMY)

    if not columns:
        raise DataError("No covariate column left after encoding.")

    return Dataset(
        feature_names=names,
        x=torch.stack(columns, dim=1),
        y=dataset.y,
        task=dataset.task,
        column_kinds=kinds,
        raw_columns=dataset.raw_columns,
        nominal=dict(),
        levels=encoded_levels,
    )


def fit_scaler(dataset: Dataset, enabled: bool = True) -> Scaler:
    """Estimate the scaler of the continuous columns.

    Uses the population convention: `std = sqrt(mean((x - mean)^2))`.
    Zero-variance columns get std 1 and are flagged.
    """
    p = dataset.p
    scaled = ~dataset.dummy_mask if enabled else torch.zeros(p, dtype=torch.bool)

    means = dataset.x.mean(dim=0)
    stds = dataset.x.std(dim=0, unbiased=False)
    zero_variance = scaled & (stds == 0)

    means = torch.where(scaled, means, torch.zeros_like(means))
    stds = torch.where(scaled & ~zero_variance, stds, torch.ones_like(stds))

    for j in zero_variance.nonzero().flatten().tolist():
        logger.warning("Column %r has zero variance.", dataset.feature_names[j])

    return Scaler(means, stds, scaled, zero_variance)


def standardize(dataset: Dataset, enabled: bool = True) -> tuple[Dataset, Scaler]:
    """Center and scale the continuous columns, leaving dummies untouched."""
    scaler = fit_scaler(dataset, enabled)
    return scaler.apply(dataset), scaler


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def split(
    dataset: Dataset, test_fraction: float, seed: int
) -> tuple[Dataset, Dataset]:
    """Split the rows into a train and a test set.

    Classification splits are stratified by class. Rows keep their original
    order inside each side.
    """
    if not 0 < test_fraction < 1:
        raise FractionOutOfRange(f"Test fraction must be in (0, 1), got {test_fraction}.")
    assert dataset.n >= 2, "Need at least two rows to split."

    rng = torch.Generator().manual_seed(seed)

    if dataset.task == TaskKind.CLASSIFICATION:
        strata = [(dataset.y == label).nonzero().flatten() for label in (0.0, 1.0)]
    else:
        strata = [torch.arange(dataset.n)]

    test_ids = []
    for stratum in strata:
        size = len(stratum)
        if size == 0:
            continue
        # Both sides get a row of each stratum, a singleton stays in train.
        n_test = min(max(_round_half_up(size * test_fraction), 1), size - 1)
        permutation = stratum[torch.randperm(size, generator=rng)]
        test_ids.append(permutation[:n_test])

    test_ids = torch.cat(test_ids).sort().values
    is_test = torch.zeros(dataset.n, dtype=torch.bool)
    is_test[test_ids] = True
    train_ids = (~is_test).nonzero().flatten()

    return dataset.subset(train_ids), dataset.subset(test_ids)


def kfold(dataset: Dataset, n_folds: int, seed: int) -> list[tuple[torch.Tensor, torch.Tensor]]:
    """Partition the rows into `n_folds` validation folds.

    ---
    Returns:
        For each fold, the sorted train and validation row indices.
    """
    if n_folds < 2 or dataset.n < 2 * n_folds:
        raise FoldTooSmall(
            f"Cannot make {n_folds} folds with at least 2 rows each out of {dataset.n} rows."
        )

    rng = torch.Generator().manual_seed(seed)
    permutation = torch.randperm(dataset.n, generator=rng)
    fold_of_row = torch.empty(dataset.n, dtype=torch.long)
    fold_of_row[permutation] = torch.arange(dataset.n) % n_folds

    splits = []
    for fold in range(n_folds):
        validation = (fold_of_row == fold).nonzero().flatten()
        train = (fold_of_row != fold).nonzero().flatten()
        splits.append((train, validation))
    return splits
