"""Some constant variables to use across the pipeline."""
from enum import Enum

FORMAT_VERSION = 1

# Placeholder target of unlabeled rows given to `predict`.
UNLABELED = "0"


class Command(str, Enum):
    TRAIN = "train"
    CV_K = "cv-k"
    PREDICT = "predict"
    EVALUATE = "evaluate"
    EXPLAIN = "explain"
    TRADEOFF = "tradeoff"
    GENERATE = "generate"


class PredictMode(str, Enum):
    SOFT = "soft"
    HARD = "hard"


class Method(str, Enum):
    LDS = "lds"
    PR = "pr"
