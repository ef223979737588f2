"""Points, metric spaces and loss functions.

Three kinds of points are supported:

``vector``
    a finite real vector, metric ``euclidean-norm``;
``histogram``
    a probability density sampled on a regular grid of ``bins`` cells of
    width ``width``, metrics ``l1`` or ``total-variation``;
``spd``
    a symmetric positive semi-definite matrix (e.g. a graph Laplacian),
    metric ``frobenius``.

Every loss and distance has a batched form operating on stacked
``(n, size)`` arrays; the scalar functions go through the same code path so
batched and one-at-a-time evaluations agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyInputError,
    InvalidParameterError,
    InvalidPointError,
    LossKindError,
    SpaceMismatchError,
)

POINT_KINDS = ("vector", "histogram", "spd")
SPACE_KINDS = {"euclidean": "vector", "density-grid": "histogram", "spd-matrix": "spd"}
METRICS = {
    "euclidean": ("euclidean-norm",),
    "density-grid": ("l1", "total-variation"),
    "spd-matrix": ("frobenius",),
}
LOSS_KINDS = ("squared-norm", "norm", "l1-density", "total-variation", "frobenius", "truncated")
_LOSS_POINT_KINDS = {
    "squared-norm": ("vector", "spd"),
    "norm": ("vector", "spd"),
    "l1-density": ("histogram",),
    "total-variation": ("histogram",),
    "frobenius": ("spd",),
}

INVARIANT_TOL = 1e-9
IDENTITY_TOL = 1e-12

# Upper bound on the number of float64 temporaries per batched block.
_BLOCK_ELEMENTS = 1 << 22


@dataclass(frozen=True, eq=False)
class Point:
    """An immutable element of one of the supported spaces.

    ``data`` is stored flat (row-major for ``spd``) and read-only.
    """

    kind: str
    data: np.ndarray
    width: float | None = None

    def __post_init__(self):
        if self.kind not in POINT_KINDS:
            raise InvalidPointError(f"unknown point kind {self.kind!r}")
        arr = np.array(self.data, dtype=np.float64)
        if self.kind == "spd":
            if arr.ndim == 1:
                d = math.isqrt(arr.size)
                if d * d != arr.size:
                    raise InvalidPointError(f"spd data of length {arr.size} is not a square")
                arr = arr.reshape(d, d)
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                raise InvalidPointError(f"spd data must be square, got shape {arr.shape}")
        elif arr.ndim != 1:
            raise InvalidPointError(f"{self.kind} data must be one-dimensional")
        if arr.size == 0:
            raise InvalidPointError("point data is empty")
        if not np.all(np.isfinite(arr)):
            raise InvalidPointError("point data contains NaN or Inf")

        width = self.width
        if self.kind == "histogram":
            if width is None or not width > 0 or not math.isfinite(width):
                raise InvalidPointError("histogram width must be a positive finite number")
            width = float(width)
            if np.any(arr < 0):
                raise InvalidPointError("histogram entries must be non-negative")
            mass = float(np.sum(arr)) * width
            if abs(mass - 1.0) > INVARIANT_TOL:
                raise InvalidPointError(f"histogram integrates to {mass!r}, expected 1")
        elif width is not None:
            raise InvalidPointError(f"width is only meaningful for histograms, not {self.kind}")
        if self.kind == "spd":
            if np.max(np.abs(arr - arr.T)) > INVARIANT_TOL:
                raise InvalidPointError("spd matrix is not symmetric")
            if np.linalg.eigvalsh(arr)[0] < -INVARIANT_TOL:
                raise InvalidPointError("spd matrix has a negative eigenvalue")
            arr = arr.reshape(-1)

        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "width", width)

    @classmethod
    def vector(cls, values) -> Point:
        return cls("vector", np.atleast_1d(np.asarray(values, dtype=np.float64)))

    @classmethod
    def histogram(cls, values, width: float) -> Point:
        return cls("histogram", values, width)

    @classmethod
    def spd(cls, matrix) -> Point:
        return cls("spd", matrix)

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dim(self) -> int:
        """Dimension d for vectors and matrices, bin count for histograms."""
        if self.kind == "spd":
            return math.isqrt(self.data.size)
        return self.data.size

    @property
    def matrix(self) -> np.ndarray:
        if self.kind != "spd":
            raise AttributeError("only spd points have a matrix form")
        return self.data.reshape(self.dim, self.dim)

    def layout(self) -> tuple:
        return (self.kind, self.data.size, self.width)

    def describe(self) -> str:
        if self.kind == "histogram":
            return f"histogram(bins={self.size}, width={self.width!r})"
        return f"{self.kind}(dim={self.dim})"

    def __eq__(self, other):
        if not isinstance(other, Point):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.width == other.width
            and np.array_equal(self.data, other.data)
        )

    def __hash__(self):
        return hash((self.kind, self.width, self.data.tobytes()))

    def __repr__(self):
        vals = np.array2string(self.data, precision=6, threshold=8)
        if self.kind == "histogram":
            return f"Point(histogram, {vals}, width={self.width!r})"
        return f"Point({self.kind}, {vals})"

    def to_json(self) -> dict:
        out = {"kind": self.kind, "data": [float(v) for v in self.data]}
        if self.kind == "histogram":
            out["bins"] = self.size
            out["width"] = self.width
        return out

    @classmethod
    def from_json(cls, obj) -> Point:
        if not isinstance(obj, dict):
            raise InvalidPointError(f"a point must be a JSON object, got {type(obj).__name__}")
        kind = obj.get("kind")
        if "data" not in obj:
            raise InvalidPointError("point object has no 'data' field")
        data = obj["data"]
        if kind == "histogram":
            pt = cls(kind, data, obj.get("width"))
            if "bins" in obj and obj["bins"] != pt.size:
                raise InvalidPointError(f"histogram declares {obj['bins']} bins but has {pt.size}")
            return pt
        return cls(kind, data)


def stack(points: Sequence[Point], what: str = "points") -> np.ndarray:
    """Stack same-layout points into an ``(n, size)`` array."""
    if len(points) == 0:
        raise EmptyInputError(f"{what} is empty")
    first = points[0]
    layout = first.layout()
    for i, p in enumerate(points):
        if p.layout() != layout:
            raise SpaceMismatchError(first.describe(), p.describe(), index=i)
    return np.stack([p.data for p in points])


def unstack(template: Point, arr: np.ndarray) -> list[Point]:
    """Inverse of :func:`stack` given one point with the target layout."""
    return [Point(template.kind, row, template.width) for row in np.asarray(arr)]


def check_same_layout(a: Point, b: Point):
    if a.layout() != b.layout():
        raise SpaceMismatchError(a.describe(), b.describe())


# ---------------------------------------------------------------- spaces


@dataclass(frozen=True)
class SpaceDescriptor:
    """A metric space: point kind, size and metric identifier."""

    kind: str
    dim: int
    metric: str | None = None
    width: float | None = None

    def __post_init__(self):
        if self.kind not in SPACE_KINDS:
            raise InvalidParameterError(f"unknown space kind {self.kind!r}")
        metric = self.metric or METRICS[self.kind][0]
        if metric not in METRICS[self.kind]:
            raise InvalidParameterError(f"metric {metric!r} is not available on {self.kind}")
        object.__setattr__(self, "metric", metric)
        if int(self.dim) < 1:
            raise InvalidParameterError("space dimension must be >= 1")
        object.__setattr__(self, "dim", int(self.dim))
        if self.kind == "density-grid":
            if self.width is None:
                object.__setattr__(self, "width", 1.0 / self.dim)
            object.__setattr__(self, "width", float(self.width))
        elif self.width is not None:
            raise InvalidParameterError("width is only meaningful for density-grid spaces")

    @property
    def point_kind(self) -> str:
        return SPACE_KINDS[self.kind]

    @property
    def size(self) -> int:
        return self.dim * self.dim if self.kind == "spd-matrix" else self.dim

    @property
    def is_linear(self) -> bool:
        # densities are a convex subset, not a vector space
        return self.kind != "density-grid"

    @classmethod
    def for_point(cls, p: Point, metric: str | None = None) -> SpaceDescriptor:
        kind = {v: k for k, v in SPACE_KINDS.items()}[p.kind]
        return cls(kind, p.dim, metric, p.width)

    def describe(self) -> str:
        if self.kind == "density-grid":
            return f"{self.kind}(bins={self.dim}, width={self.width!r})"
        return f"{self.kind}(dim={self.dim})"

    def check(self, p: Point, index: int | None = None):
        if (
            p.kind != self.point_kind
            or p.dim != self.dim
            or (self.kind == "density-grid" and p.width != self.width)
        ):
            raise SpaceMismatchError(self.describe(), p.describe(), index=index)

    def check_array(self, arr: np.ndarray):
        if arr.ndim != 2 or arr.shape[1] != self.size:
            raise SpaceMismatchError(self.describe(), f"array of shape {arr.shape}")

    def to_json(self) -> dict:
        out = {"kind": self.kind, "dim": self.dim, "metric": self.metric}
        if self.width is not None:
            out["width"] = self.width
        return out

    @classmethod
    def from_json(cls, obj: dict) -> SpaceDescriptor:
        return cls(obj["kind"], obj["dim"], obj.get("metric"), obj.get("width"))


def _metric_values(metric: str, a: np.ndarray, b: np.ndarray, width: float | None):
    diff = a - b
    if metric in ("euclidean-norm", "frobenius"):
        return np.sqrt(np.sum(diff * diff, axis=-1))
    if metric == "l1":
        return np.sum(np.abs(diff), axis=-1) * width
    if metric == "total-variation":
        return 0.5 * (np.sum(np.abs(diff), axis=-1) * width)
    raise InvalidParameterError(f"unknown metric {metric!r}")


def _blocked_pairwise(fn, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    out = np.empty((A.shape[0], B.shape[0]))
    rows = max(1, _BLOCK_ELEMENTS // max(1, B.shape[0] * B.shape[1]))
    for s in range(0, A.shape[0], rows):
        out[s : s + rows] = fn(A[s : s + rows, None, :], B[None, :, :])
    return out


def distance(space: SpaceDescriptor, a: Point, b: Point) -> float:
    space.check(a)
    space.check(b)
    return float(pairwise_distance(space, a.data[None, :], b.data[None, :])[0, 0])


def pairwise_distance(space: SpaceDescriptor, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Distance matrix between the rows of ``A`` and the rows of ``B``."""
    space.check_array(A)
    space.check_array(B)
    return _blocked_pairwise(lambda a, b: _metric_values(space.metric, a, b, space.width), A, B)


# ---------------------------------------------------------------- losses


@dataclass(frozen=True)
class LossSpec:
    """A loss function together with the constants it is claimed to satisfy.

    ``bound_L`` bounds the loss from above, ``tr_constant_c`` is the
    constant in ``|l(y,y') - l(y,y'')| <= c l(y',y'')`` and ``holder_alpha``
    the exponent in ``l(y,y') <= rho(y,y')**alpha``. The ``satisfies_*``
    flags say which of these claims are made; only claimed conditions are
    enforced by :func:`verify_loss_conditions`.
    """

    kind: str
    bound_L: float | None = None
    holder_alpha: float = 1.0
    tr_constant_c: float | None = None
    satisfies_tr: bool = False
    satisfies_lr: bool = False
    inner: LossSpec | None = None

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise InvalidParameterError(f"unknown loss kind {self.kind!r}")
        if self.kind == "truncated":
            if self.inner is None or self.bound_L is None:
                raise InvalidParameterError("a truncated loss needs an inner loss and a bound L")
        elif self.inner is not None:
            raise InvalidParameterError("only truncated losses have an inner loss")
        if self.bound_L is not None and not self.bound_L > 0:
            raise InvalidParameterError("bound_L must be positive")
        if self.satisfies_tr and self.tr_constant_c is None:
            raise InvalidParameterError("satisfies_tr requires tr_constant_c")
        if self.tr_constant_c is not None and not self.tr_constant_c > 0:
            raise InvalidParameterError("tr_constant_c must be positive")
        if not self.holder_alpha > 0:
            raise InvalidParameterError("holder_alpha must be positive")

    @property
    def base_kind(self) -> str:
        return self.inner.base_kind if self.kind == "truncated" else self.kind

    @property
    def name(self) -> str:
        if self.kind == "truncated":
            return f"truncated({self.inner.name}, L={self.bound_L!r})"
        return self.kind

    def accepts(self, point_kind: str) -> bool:
        return point_kind in _LOSS_POINT_KINDS[self.base_kind]

    def to_json(self) -> dict:
        out = {
            "kind": self.kind,
            "bound_L": self.bound_L,
            "holder_alpha": self.holder_alpha,
            "tr_constant_c": self.tr_constant_c,
            "satisfies_tr": self.satisfies_tr,
            "satisfies_lr": self.satisfies_lr,
        }
        if self.inner is not None:
            out["inner"] = self.inner.to_json()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> LossSpec:
        """Build from either a full metadata dict or a short ``{"kind": ...}`` form.

        Short forms go through the factory functions below; any metadata key
        present in ``obj`` overrides the factory default.
        """
        obj = dict(obj)
        kind = obj.get("kind")
        if kind == "truncated":
            L = obj.get("bound_L", obj.get("L"))
            if L is None or "inner" not in obj:
                raise InvalidParameterError("truncated loss needs 'inner' and 'L'")
            base = truncated(cls.from_json(obj["inner"]), L)
        elif kind == "squared-norm":
            base = squared_norm(bounded=bool(obj.get("bounded", False)))
        elif kind in _FACTORIES:
            base = _FACTORIES[kind]()
        else:
            raise InvalidParameterError(f"unknown loss kind {kind!r}")
        overrides = {
            k: obj[k]
            for k in ("bound_L", "holder_alpha", "tr_constant_c", "satisfies_tr", "satisfies_lr")
            if k in obj
        }
        if not overrides:
            return base
        fields = base.to_json()
        fields.update(overrides)
        return cls(
            kind=base.kind,
            bound_L=fields["bound_L"],
            holder_alpha=fields["holder_alpha"],
            tr_constant_c=fields["tr_constant_c"],
            satisfies_tr=fields["satisfies_tr"],
            satisfies_lr=fields["satisfies_lr"],
            inner=base.inner,
        )


def squared_norm(bounded: bool = False) -> LossSpec:
    """``||y - y'||^2``. Condition (lr) with alpha=2 is only claimed on bounded spaces."""
    return LossSpec("squared-norm", holder_alpha=2.0, satisfies_lr=bounded)


def norm() -> LossSpec:
    return LossSpec("norm", tr_constant_c=1.0, satisfies_tr=True, satisfies_lr=True)


def l1_density() -> LossSpec:
    return LossSpec(
        "l1-density", bound_L=2.0, tr_constant_c=1.0, satisfies_tr=True, satisfies_lr=True
    )


def total_variation() -> LossSpec:
    return LossSpec(
        "total-variation", bound_L=1.0, tr_constant_c=1.0, satisfies_tr=True, satisfies_lr=True
    )


def frobenius() -> LossSpec:
    return LossSpec("frobenius", tr_constant_c=1.0, satisfies_tr=True, satisfies_lr=True)


def truncated(inner: LossSpec, L: float) -> LossSpec:
    """``min(inner, L)``.

    Truncation keeps (lr) since it only lowers the loss, and keeps (tr)
    with constant ``max(c, 1)``.
    """
    L = float(L)
    c = max(inner.tr_constant_c, 1.0) if inner.satisfies_tr else None
    return LossSpec(
        "truncated",
        bound_L=L,
        holder_alpha=inner.holder_alpha,
        tr_constant_c=c,
        satisfies_tr=inner.satisfies_tr,
        satisfies_lr=inner.satisfies_lr,
        inner=inner,
    )


_FACTORIES = {
    "norm": norm,
    "l1-density": l1_density,
    "total-variation": total_variation,
    "frobenius": frobenius,
}


def _loss_values(spec: LossSpec, a: np.ndarray, b: np.ndarray, width: float | None):
    kind = spec.kind
    if kind == "truncated":
        return np.minimum(_loss_values(spec.inner, a, b, width), spec.bound_L)
    diff = a - b
    if kind == "squared-norm":
        return np.sum(diff * diff, axis=-1)
    if kind in ("norm", "frobenius"):
        return np.sqrt(np.sum(diff * diff, axis=-1))
    if kind == "l1-density":
        return np.sum(np.abs(diff), axis=-1) * width
    if kind == "total-variation":
        return 0.5 * (np.sum(np.abs(diff), axis=-1) * width)
    raise InvalidParameterError(f"unknown loss kind {kind!r}")


def _check_loss_point(spec: LossSpec, p: Point):
    if not spec.accepts(p.kind):
        raise LossKindError(spec.name, p.kind)


def loss(spec: LossSpec, y: Point, y2: Point) -> float:
    _check_loss_point(spec, y)
    check_same_layout(y, y2)
    return float(_loss_values(spec, y.data[None, None, :], y2.data[None, None, :], y.width)[0, 0])


def pairwise_loss(spec: LossSpec, template: Point, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Loss matrix ``M[i, j] = l(A[i], B[j])`` for arrays laid out like ``template``."""
    _check_loss_point(spec, template)
    for arr in (A, B):
        if arr.ndim != 2 or arr.shape[1] != template.size:
            raise SpaceMismatchError(template.describe(), f"array of shape {arr.shape}")
    return _blocked_pairwise(lambda a, b: _loss_values(spec, a, b, template.width), A, B)


def paired_loss(spec: LossSpec, template: Point, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Row-wise losses ``l(A[i], B[i])``."""
    _check_loss_point(spec, template)
    return _loss_values(spec, np.asarray(A)[:, None, :], np.asarray(B)[:, None, :], template.width)[
        :, 0
    ]


def row_sums(M: np.ndarray) -> np.ndarray:
    """Left-to-right sums of each row; deterministic regardless of BLAS or SIMD width."""
    if M.shape[1] == 0:
        return np.zeros(M.shape[0])
    return np.cumsum(M, axis=1)[:, -1]


def reference_distance_values(spec: LossSpec, template: Point, a: np.ndarray, b: np.ndarray):
    """The metric rho against which condition (lr) is stated for ``spec``."""
    base = spec.base_kind
    if base in ("squared-norm", "norm", "frobenius"):
        metric = "euclidean-norm"
    elif base == "l1-density":
        metric = "l1"
    else:
        metric = "total-variation"
    return _metric_values(metric, a, b, template.width)


# ---------------------------------------------------------------- conditions


@dataclass
class ConditionReport:
    """Outcome of checking a loss against its claimed conditions on a sample.

    Each status is one of ``"pass"``, ``"fail"`` or ``"not-claimed"``.
    """

    loss: str
    sample_size: int
    max_loss: float
    max_tr_ratio: float
    max_lr_ratio: float
    bounded: str
    tr: str
    lr: str
    tolerance: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return "fail" not in (self.bounded, self.tr, self.lr)

    def to_json(self) -> dict:
        return {
            "loss": self.loss,
            "sample_size": self.sample_size,
            "max_loss": self.max_loss,
            "max_tr_ratio": self.max_tr_ratio,
            "max_lr_ratio": self.max_lr_ratio,
            "bounded": self.bounded,
            "tr": self.tr,
            "lr": self.lr,
            "tolerance": self.tolerance,
            "passed": self.passed,
            **self.details,
        }


def _status(claimed: bool, ok: bool) -> str:
    if not claimed:
        return "not-claimed"
    return "pass" if ok else "fail"


def verify_loss_conditions(
    spec: LossSpec, sample: Sequence[Point], tolerance: float = INVARIANT_TOL
) -> ConditionReport:
    """Check boundedness, (tr) and (lr) over every ordered triple / pair of ``sample``.

    Ratios with a zero denominator are reported as 0 when the numerator is
    also zero and as ``inf`` otherwise. Pass/fail uses the additive form
    ``lhs <= rhs + tolerance`` so that near-degenerate triples do not
    produce spurious failures through the ratio.
    """
    if len(sample) < 3:
        raise InvalidParameterError(f"need at least 3 sample points, got {len(sample)}")
    Y = stack(sample, "sample")
    template = sample[0]
    _check_loss_point(spec, template)
    M = pairwise_loss(spec, template, Y, Y)
    s = len(sample)

    max_loss = float(M.max())
    bounded_ok = spec.bound_L is None or max_loss <= spec.bound_L + tolerance

    c = spec.tr_constant_c
    max_tr = 0.0
    tr_ok = True
    worst_triple = None
    for a in range(s):
        num = np.abs(M[a][:, None] - M[a][None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(M > 0, num / M, np.where(num > 0, np.inf, 0.0))
        j = int(np.argmax(ratio))
        if ratio.flat[j] > max_tr:
            max_tr = float(ratio.flat[j])
            worst_triple = (a, *divmod(j, s))
        if c is not None and np.any(num > c * M + tolerance):
            tr_ok = False

    D = _blocked_pairwise(
        lambda a, b: reference_distance_values(spec, template, a, b), Y, Y
    )
    alpha = spec.holder_alpha
    distinct = D > 0
    max_lr = 0.0
    lr_ok = True
    if np.any(distinct):
        Da = D[distinct] ** alpha
        max_lr = float(np.max(M[distinct] / Da))
        lr_ok = bool(np.all(M[distinct] <= Da + tolerance))
    # identical points must have zero loss
    if np.any(M[~distinct] > tolerance):
        lr_ok = False

    details = {}
    if worst_triple is not None:
        details["worst_tr_triple"] = list(worst_triple)
    return ConditionReport(
        loss=spec.name,
        sample_size=s,
        max_loss=max_loss,
        max_tr_ratio=max_tr,
        max_lr_ratio=max_lr,
        bounded=_status(spec.bound_L is not None, bounded_ok),
        tr=_status(spec.satisfies_tr, tr_ok),
        lr=_status(spec.satisfies_lr, lr_ok),
        tolerance=tolerance,
        details=details,
    )


def points_from_lists(rows: Iterable, kind: str = "vector", width: float | None = None):
    """Convenience: build points from nested lists."""
    return [Point(kind, r, width) for r in rows]
