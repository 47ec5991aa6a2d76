"""Some constant variables to use across the program."""
from enum import Enum

import torch

DTYPE = torch.float64

# Separator between a nominal column and its level in dummy column names.
LEVEL_SEPARATOR = ":"


class TaskKind(str, Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


class ColumnKind(str, Enum):
    CONTINUOUS = "continuous"
    DUMMY = "dummy"
