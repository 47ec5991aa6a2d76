from .constants import DTYPE, LEVEL_SEPARATOR, ColumnKind, TaskKind
from .dataset import (
    Dataset,
    Scaler,
    dummy_encode,
    fit_scaler,
    from_frame,
    kfold,
    load_csv,
    read_frame,
    split,
    standardize,
)
from .generate import planted_regions, region_boundaries
