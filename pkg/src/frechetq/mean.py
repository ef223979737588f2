"""Quantized and restricted Fréchet mean estimators plus an exact oracle.

All argmin reductions scan candidates in index order with a strict ``<``,
so the smallest index attaining the minimum wins without any epsilon.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyInputError, InvalidParameterError
from .metric import LossSpec, Point, pairwise_loss, row_sums, stack

WEIGHT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PrototypeSet:
    """An ordered, non-empty list of candidate points.

    Index order is the tie-breaking order for every argmin over the set.
    """

    points: tuple
    array: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = tuple(self.points)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "array", stack(pts, "prototype set"))

    def __len__(self):
        return len(self.points)

    def __getitem__(self, i):
        return self.points[i]

    def __iter__(self):
        return iter(self.points)

    def __eq__(self, other):
        if not isinstance(other, PrototypeSet):
            return NotImplemented
        return self.points == other.points

    @property
    def template(self) -> Point:
        return self.points[0]

    def appended(self, p: Point) -> PrototypeSet:
        return PrototypeSet(self.points + (p,))


@dataclass(frozen=True)
class MeanEstimate:
    index: int
    value: Point
    empirical_risk: float

    def to_json(self) -> dict:
        return {"index": self.index, "value": self.value.to_json(), "empirical_risk": self.empirical_risk}

    @classmethod
    def from_json(cls, obj: dict) -> MeanEstimate:
        return cls(int(obj["index"]), Point.from_json(obj["value"]), float(obj["empirical_risk"]))


def _as_prototypes(prototypes) -> PrototypeSet:
    if isinstance(prototypes, PrototypeSet):
        return prototypes
    if len(prototypes) == 0:
        raise EmptyInputError("prototype set is empty")
    return PrototypeSet(tuple(prototypes))


def candidate_risks(spec: LossSpec, candidates: np.ndarray, template: Point, Y: np.ndarray) -> np.ndarray:
    """Empirical risk of every row of ``candidates`` against the sample ``Y``.

    Each risk is a left-to-right sum over the sample divided by its size.
    """
    if Y.shape[0] == 0:
        raise EmptyInputError("sample is empty")
    return row_sums(pairwise_loss(spec, template, candidates, Y)) / Y.shape[0]


def empirical_risk(spec: LossSpec, y: Point, sample: Sequence[Point]) -> float:
    if len(sample) == 0:
        raise EmptyInputError("sample is empty")
    Y = stack(list(sample) + [y], "sample")[:-1]
    return float(candidate_risks(spec, y.data[None, :], y, Y)[0])


def _argmin_estimate(spec, protos: PrototypeSet, Y: np.ndarray) -> MeanEstimate:
    risks = candidate_risks(spec, protos.array, protos.template, Y)
    # np.argmin returns the first occurrence of the minimum
    i = int(np.argmin(risks))
    return MeanEstimate(i, protos[i], float(risks[i]))


def quantized_frechet_mean(spec: LossSpec, learn: Sequence[Point], prototypes) -> MeanEstimate:
    """Prototype with the smallest empirical risk on ``learn``.

    ``prototypes`` should be independent of ``learn``; see :func:`split_sample`.
    """
    if len(learn) == 0:
        raise EmptyInputError("learning sample is empty")
    protos = _as_prototypes(prototypes)
    Y = stack(list(learn) + [protos.template], "learning sample")[:-1]
    return _argmin_estimate(spec, protos, Y)


def restricted_frechet_mean(spec: LossSpec, sample: Sequence[Point]) -> MeanEstimate:
    """Sample point with the smallest empirical risk on the sample itself."""
    if len(sample) == 0:
        raise EmptyInputError("sample is empty")
    protos = PrototypeSet(tuple(sample))
    return _argmin_estimate(spec, protos, protos.array)


def brute_force_frechet_mean(spec: LossSpec, candidates, support) -> MeanEstimate:
    """Exact minimiser of ``sum_j w_j l(Y_j, y)`` over ``candidates``.

    ``support`` is a list of ``(point, weight)`` pairs describing a finitely
    supported distribution. The reported risk is the exact risk, not an
    empirical one.
    """
    protos = _as_prototypes(candidates)
    if len(support) == 0:
        raise EmptyInputError("support is empty")
    atoms = [p for p, _ in support]
    w = np.array([float(wt) for _, wt in support])
    if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_TOL:
        raise InvalidParameterError(f"support weights must be non-negative and sum to 1, got sum {w.sum()!r}")
    Y = stack(atoms + [protos.template], "support")[:-1]
    M = pairwise_loss(spec, protos.template, protos.array, Y)
    risks = row_sums(M * w[None, :])
    i = int(np.argmin(risks))
    return MeanEstimate(i, protos[i], float(risks[i]))


def split_sample(data: Sequence[Point], seed: int) -> tuple[list[Point], PrototypeSet]:
    """Shuffle ``data`` with ``seed``; first half learns, second half are prototypes."""
    n2 = len(data)
    if n2 < 2 or n2 % 2:
        raise InvalidParameterError(f"split_sample needs an even number >= 2 of points, got {n2}")
    perm = np.random.default_rng(seed).permutation(n2)
    half = n2 // 2
    learn = [data[i] for i in perm[:half]]
    protos = PrototypeSet(tuple(data[i] for i in perm[half:]))
    return learn, protos
