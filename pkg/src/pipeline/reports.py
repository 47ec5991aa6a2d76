"""Tables and JSON reports written by the commands."""
import math
import sys
from pathlib import Path
from typing import Any

import pandas as pd

from ..interpret import ExplainableCondition
from ..mixture import MlmModel
from .document import dumps

FLOAT_FORMAT = "%.17g"


def write_json(state: Any, path: Path | str):
    Path(path).write_text(dumps(state))


def write_csv(frame: pd.DataFrame, path: Path | str):
    """Write a table, to the standard output when `path` is `-`."""
    if str(path) == "-":
        frame.to_csv(sys.stdout, index=False, float_format=FLOAT_FORMAT)
    else:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)


def flatten(metrics: dict[str, Any], prefix: str = "") -> dict[str, float]:
    """`{"train": {"mlp": {"rmse": 1}}}` to `{"train/mlp/rmse": 1}`."""
    flat = {}
    for key, value in metrics.items():
        name = f"{prefix}/{key}" if prefix else key
        if isinstance(value, dict):
            flat |= flatten(value, name)
        else:
            flat[name] = value
    return flat


def epics_frame(model: MlmModel) -> pd.DataFrame:
    """One row per EPIC: size, prior and member cells."""
    return pd.DataFrame(
        {
            "epic": list(range(model.n_epics)),
            "size": [epic.size for epic in model.epics],
            "prior": [epic.prior for epic in model.epics],
            "cells": [" ".join(str(cell) for cell in epic.member_cells) for epic in model.epics],
        }
    )


def coefficients_frame(model: MlmModel, feature_names: list[str]) -> pd.DataFrame:
    """Local coefficients of every EPIC with their confidence intervals.

    Coefficients are in standardized units. EPICs without intervals have
    empty interval columns.
    """
    rows = []
    for j, epic in enumerate(model.epics):
        rows.append(
            {
                "epic": j,
                "feature": "(intercept)",
                "estimate": epic.local_model.intercept,
                "stderr": math.nan,
                "low": math.nan,
                "high": math.nan,
                "shrunk": False,
            }
        )
        intervals = epic.intervals
        for i, name in enumerate(feature_names):
            rows.append(
                {
                    "epic": j,
                    "feature": name,
                    "estimate": epic.local_model.coefficients[i].item(),
                    "stderr": math.nan if intervals is None else intervals.stderr[i].item(),
                    "low": math.nan if intervals is None else intervals.low[i].item(),
                    "high": math.nan if intervals is None else intervals.high[i].item(),
                    "shrunk": False if intervals is None else bool(intervals.shrunk[i]),
                }
            )
    return pd.DataFrame(rows)


def conditions_table(
    model: MlmModel,
    conditions: dict[int, list[ExplainableCondition]],
    feature_names: list[str],
    levels: dict[str, list[str]],
) -> str:
    """Plain-text table of the explainable conditions of each EPIC."""
    lines = []
    for j, epic_conditions in conditions.items():
        lines.append(f"EPIC {j} ({model.epics[j].size})")
        if not epic_conditions:
            lines.append("  no explainable condition")
        else:
            lines.append(f"  {'size':>6}  {'purity':>6}  condition")
        for condition in epic_conditions:
            rule = condition.render(feature_names, levels)
            lines.append(f"  {condition.covered:>6}  {condition.purity:>6.3f}  {rule}")
        lines.append("")
    return "\n".join(lines)
