from .cells import (
    CellPartition,
    LayerClusterings,
    assign_cells,
    layer_cells,
    layer_labels,
    lexicographic_ranks,
)
from .cosupervision import CoSupervisedSet, cell_generator, cosupervise, cosupervise_cells
