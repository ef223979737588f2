"""Quantized estimators of Fréchet means and Fréchet regression functions."""

from .errors import FrechetError
from .mean import (
    MeanEstimate,
    PrototypeSet,
    brute_force_frechet_mean,
    empirical_risk,
    quantized_frechet_mean,
    restricted_frechet_mean,
    split_sample,
)
from .metric import (
    ConditionReport,
    LossSpec,
    Point,
    SpaceDescriptor,
    distance,
    frobenius,
    l1_density,
    loss,
    norm,
    squared_norm,
    total_variation,
    truncated,
    verify_loss_conditions,
)
from .regression import (
    PiecewiseEstimator,
    VoronoiPartition,
    default_k_schedule,
    fit,
    predict,
    voronoi_assign,
)

__version__ = "0.1.0"
