from enum import Enum


class CovKind(str, Enum):
    FULL = "full"
    DIAGONAL = "diagonal"
    SPHERICAL = "spherical"
    POOLED = "pooled"


# Fraction of the mean data variance used as covariance floor.
REG_SCALE = 1e-6

# Components whose soft count falls below this value are considered empty.
EMPTY_COUNT = 1e-10
