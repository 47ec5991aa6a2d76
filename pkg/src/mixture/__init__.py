from .distances import (
    cell_distance_classification,
    cell_distance_regression,
    cell_models,
    distance_matrix,
)
from .mlm import Epic, MlmModel, build_mlm, order_epics, singleton_membership
from .ward import Merge, cut, merge_cells, ward_linkage
