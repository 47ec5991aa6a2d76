from .commands import COMMANDS, run_command
from .config import validate_config
from .constants import FORMAT_VERSION, Command, Method, PredictMode
from .document import ModelDocument, Schema, load_model, save_model
from .fit import (
    CellStage,
    FittedPipeline,
    evaluate_predictors,
    fit_cell_mlm,
    fit_cells,
    fit_epics,
    fit_pipeline,
    load_data,
    make_document,
    predict_all,
    training_set,
)
from .stage import stage
