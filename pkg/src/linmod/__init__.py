from .linear import (
    Intervals,
    LinearModel,
    confidence_intervals,
    coordinate_descent,
    fit_lasso,
    fit_local,
    fit_logistic,
    fit_ols,
    lm_predict,
)
