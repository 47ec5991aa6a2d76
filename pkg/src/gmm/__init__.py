from .constants import CovKind
from .em import covariance_floor, fit_gmm, gmm_from_labels
from .gmm import Gmm, log_gaussian
