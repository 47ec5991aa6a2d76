from .conditions import ExplainableCondition, Interval, explain_epic_pr, path_to_condition
from .draw import (
    draw_coefficient_intervals,
    draw_joint_density,
    draw_marginal_densities,
    marginal_density_frame,
)
from .lds import (
    ExplainableDims,
    epic_indicator,
    explainable_dimensions,
    marginal_map_classify,
)
from .tree import DecisionTree, TreeNode, grow_tree, prune_explainable
