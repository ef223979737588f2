"""Voronoi-partitioned quantized Fréchet regression.

The predictor space is cut into the Voronoi cells of ``k`` nuclei; inside
each cell the prediction is the prototype minimising the summed loss of the
responses that fall there. Ties, both between equidistant nuclei and between
equally good prototypes, go to the smaller index.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyInputError, InvalidParameterError, SpaceMismatchError
from .mean import PrototypeSet, _as_prototypes, quantized_frechet_mean
from .metric import (
    _BLOCK_ELEMENTS,
    LossSpec,
    Point,
    SpaceDescriptor,
    pairwise_distance,
    paired_loss,
    pairwise_loss,
    row_sums,
    stack,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class VoronoiPartition:
    nuclei: PrototypeSet
    space: SpaceDescriptor

    def __post_init__(self):
        for i, p in enumerate(self.nuclei):
            self.space.check(p, index=i)

    @classmethod
    def from_nuclei(cls, nuclei, space: SpaceDescriptor | None = None) -> VoronoiPartition:
        nuclei = _as_prototypes(nuclei)
        return cls(nuclei, space or SpaceDescriptor.for_point(nuclei.template))

    @property
    def k(self) -> int:
        return len(self.nuclei)

    def assign_array(self, X: np.ndarray) -> np.ndarray:
        """Cell index of every row of ``X`` (vectorised :func:`voronoi_assign`)."""
        X = np.asarray(X, dtype=np.float64)
        self.space.check_array(X)
        out = np.empty(X.shape[0], dtype=np.int64)
        rows = max(1, _BLOCK_ELEMENTS // max(1, self.k * X.shape[1]))
        for s in range(0, X.shape[0], rows):
            D = pairwise_distance(self.space, X[s : s + rows], self.nuclei.array)
            out[s : s + rows] = np.argmin(D, axis=1)
        return out


def voronoi_assign(partition: VoronoiPartition, x: Point) -> int:
    partition.space.check(x)
    return int(partition.assign_array(x.data[None, :])[0])


def default_k_schedule(n: int) -> int:
    """``floor(sqrt(n))``: grows without bound while ``k log n / n -> 0``."""
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    return max(1, math.isqrt(n))


@dataclass(frozen=True)
class PiecewiseEstimator:
    """A Voronoi partition with one response value per cell."""

    partition: VoronoiPartition
    values: tuple
    fallback_cells: tuple = ()
    value_indices: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "fallback_cells", tuple(int(c) for c in self.fallback_cells))
        if len(self.values) != self.partition.k:
            raise InvalidParameterError(
                f"estimator has {len(self.values)} values for {self.partition.k} cells"
            )
        stack(self.values, "cell values")

    @property
    def values_array(self) -> np.ndarray:
        return np.stack([v.data for v in self.values])

    def predict_array(self, X: np.ndarray) -> np.ndarray:
        return self.values_array[self.partition.assign_array(X)]

    def to_json(self) -> dict:
        return {
            "nuclei": [p.to_json() for p in self.partition.nuclei],
            "values": [v.to_json() for v in self.values],
            "fallback_cells": list(self.fallback_cells),
            "x_space": self.partition.space.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> PiecewiseEstimator:
        nuclei = PrototypeSet(tuple(Point.from_json(p) for p in obj["nuclei"]))
        space = SpaceDescriptor.from_json(obj["x_space"]) if "x_space" in obj else None
        return cls(
            VoronoiPartition.from_nuclei(nuclei, space),
            tuple(Point.from_json(v) for v in obj["values"]),
            tuple(obj.get("fallback_cells", ())),
        )


def _split_pairs(data) -> tuple[list[Point], list[Point]]:
    if len(data) == 0:
        raise EmptyInputError("labelled data is empty")
    xs = [x for x, _ in data]
    ys = [y for _, y in data]
    return xs, ys


def fit_arrays(
    spec: LossSpec,
    X: np.ndarray,
    Y: np.ndarray,
    partition: VoronoiPartition,
    prototypes: PrototypeSet,
) -> PiecewiseEstimator:
    """:func:`fit` on pre-stacked predictor and response arrays."""
    if X.shape[0] == 0 or X.shape[0] != Y.shape[0]:
        raise EmptyInputError("predictor and response arrays must be non-empty and aligned")
    template = prototypes.template
    if Y.shape[1] != template.size:
        raise SpaceMismatchError(template.describe(), f"responses of size {Y.shape[1]}")
    if template.kind == "histogram":
        log.info("response space is not linear; consistency is only guaranteed on Banach spaces")

    cells = partition.assign_array(X)
    M = pairwise_loss(spec, template, prototypes.array, Y)
    k = partition.k
    chosen = np.empty(k, dtype=np.int64)
    fallback = []
    pooled = None
    for j in range(k):
        members = np.flatnonzero(cells == j)
        if members.size == 0:
            if pooled is None:
                pooled = int(np.argmin(row_sums(M) / Y.shape[0]))
            chosen[j] = pooled
            fallback.append(j)
            continue
        chosen[j] = int(np.argmin(row_sums(M[:, members])))
    return PiecewiseEstimator(
        partition,
        tuple(prototypes[i] for i in chosen),
        tuple(fallback),
        tuple(int(i) for i in chosen),
    )


def fit(
    spec: LossSpec,
    data: Sequence[tuple[Point, Point]],
    nuclei,
    prototypes,
    x_space: SpaceDescriptor | None = None,
) -> PiecewiseEstimator:
    """Fit the cell-wise quantized Fréchet regression estimate.

    Cells that receive no data get the unconditional quantized mean of all
    responses and are listed in ``fallback_cells``.
    """
    xs, ys = _split_pairs(data)
    partition = VoronoiPartition.from_nuclei(nuclei, x_space)
    protos = _as_prototypes(prototypes)
    for i, x in enumerate(xs):
        partition.space.check(x, index=i)
    X = np.stack([x.data for x in xs])
    Y = stack(ys + [protos.template], "responses")[:-1]
    return fit_arrays(spec, X, Y, partition, protos)


def predict(estimator: PiecewiseEstimator, x: Point) -> Point:
    return estimator.values[voronoi_assign(estimator.partition, x)]


def fitted_empirical_risk(spec: LossSpec, estimator: PiecewiseEstimator, data) -> float:
    """Mean loss of the fitted estimator on ``data``."""
    xs, ys = _split_pairs(data)
    X = np.stack([x.data for x in xs])
    Y = stack(ys, "responses")
    losses = paired_loss(spec, estimator.values[0], Y, estimator.predict_array(X))
    return float(row_sums(losses[None, :])[0] / len(ys))


def unconditional_mean(spec: LossSpec, data, prototypes):
    """The fallback value: quantized Fréchet mean of all responses."""
    _, ys = _split_pairs(data)
    return quantized_frechet_mean(spec, ys, prototypes)
