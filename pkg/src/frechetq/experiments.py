"""Synthetic samplers, Monte Carlo risk evaluation and convergence runs.

Seeding: a master seed fans out to per-(n, seed, role) generators through
:class:`numpy.random.SeedSequence` spawn keys, so adding a grid point or a
seed never changes existing rows. Monte Carlo risk draws are keyed on the
master seed alone: every row of a run is scored on the same evaluation
sample, which makes differences between rows free of Monte Carlo noise.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidParameterError
from .mean import (
    brute_force_frechet_mean,
    candidate_risks,
    quantized_frechet_mean,
    restricted_frechet_mean,
    split_sample,
)
from .metric import LossSpec, Point, paired_loss, pairwise_loss, row_sums, stack, unstack
from .regression import (
    PiecewiseEstimator,
    PrototypeSet,
    VoronoiPartition,
    default_k_schedule,
    fit_arrays,
)

SAMPLER_KINDS = (
    "uniform-scalar",
    "gaussian-vector",
    "histogram-mixture",
    "er-graph-laplacian",
    "finite-support",
    "point-mass",
    "regression-pair",
)
LINKS: dict[str, Callable] = {
    "identity": lambda x, p: x,
    "zero": lambda x, p: np.zeros_like(x),
    "square": lambda x, p: x * x,
    "sine": lambda x, p: np.sin(2 * np.pi * x),
    "affine": lambda x, p: p.get("link_scale", 1.0) * x + p.get("link_shift", 0.0),
}
ROLES = {"data": 0, "prototypes": 1, "nuclei": 2, "split": 3, "mc": 4, "pool": 5, "trial": 6}
WEIGHT_TOL = 1e-9
Z95 = 1.96


def derive_seed(master: int, *keys: int) -> int:
    """Counter-based child seed of ``master`` for the integer path ``keys``."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])


def gaussian_bump_histogram(bins: int, center: float, scale: float) -> np.ndarray:
    """A normal bump discretised on ``bins`` cells of [0, 1], normalised to a density."""
    mids = (np.arange(bins) + 0.5) / bins
    h = np.exp(-0.5 * ((mids - center) / scale) ** 2)
    return h / (h.sum() / bins)


def default_histogram_components(bins: int) -> list[list[float]]:
    return [gaussian_bump_histogram(bins, c, 0.1).tolist() for c in (0.2, 0.5, 0.8)]


def _as_point(obj) -> Point:
    if isinstance(obj, Point):
        return obj
    if isinstance(obj, dict):
        return Point.from_json(obj)
    return Point.vector(obj)


def _weights(w, count: int) -> np.ndarray:
    if w is None:
        return np.full(count, 1.0 / count)
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (count,) or np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_TOL:
        raise InvalidParameterError(
            f"weights must be {count} non-negative numbers summing to 1, got {w.tolist()}"
        )
    return w


@dataclass(eq=False)
class Sampler:
    """A seeded i.i.d. source of points (or of ``(x, y)`` pairs).

    Parameters live in ``params`` as plain JSON values. Successive draws
    continue one stream; :meth:`with_seed` starts a fresh one.
    """

    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SAMPLER_KINDS:
            raise InvalidParameterError(f"unknown sampler kind {self.kind!r}")
        self.params = dict(self.params)
        self.seed = int(self.seed)
        self._rng = None
        getattr(self, "_init_" + self.kind.replace("-", "_"))(self.params)

    # -- per-kind setup: validate params, precompute, fix the output template

    def _init_uniform_scalar(self, p):
        self._low = float(p.get("low", 0.0))
        self._high = float(p.get("high", 1.0))
        if not self._low < self._high:
            raise InvalidParameterError("uniform-scalar needs low < high")
        self.template = Point.vector([0.0])

    def _init_gaussian_vector(self, p):
        d = int(p.get("d", 1))
        if d < 1:
            raise InvalidParameterError("gaussian-vector needs d >= 1")
        self._mean = np.broadcast_to(np.asarray(p.get("mean", 0.0), dtype=float), (d,)).copy()
        self._sigma = np.broadcast_to(np.asarray(p.get("sigma", 1.0), dtype=float), (d,)).copy()
        if np.any(self._sigma < 0):
            raise InvalidParameterError("gaussian-vector sigma must be non-negative")
        self.template = Point.vector(np.zeros(d))

    def _init_histogram_mixture(self, p):
        comps = p.get("components")
        if comps is None:
            bins = int(p.get("bins", 16))
            comps = default_histogram_components(bins)
        C = np.asarray(comps, dtype=np.float64)
        if C.ndim != 2 or C.shape[0] < 1 or np.any(C < 0):
            raise InvalidParameterError("histogram-mixture components must be non-negative histograms")
        bins = C.shape[1]
        width = float(p.get("width", 1.0 / bins))
        if not width > 0:
            raise InvalidParameterError("histogram width must be positive")
        C = C / (C.sum(axis=1, keepdims=True) * width)
        self._components = C
        self._width = width
        self._mix = _weights(p.get("weights"), C.shape[0])
        self._concentration = float(p.get("concentration", 1.0))
        if not self._concentration > 0:
            raise InvalidParameterError("concentration must be positive")
        self.template = Point.histogram(C[0], width)

    def _init_er_graph_laplacian(self, p):
        nodes = int(p.get("nodes", 5))
        prob = float(p.get("edge_prob", 0.5))
        if nodes < 2 or not 0.0 <= prob <= 1.0:
            raise InvalidParameterError("er-graph-laplacian needs nodes >= 2 and 0 <= edge_prob <= 1")
        self._nodes, self._prob = nodes, prob
        self.template = Point.spd(np.zeros((nodes, nodes)))

    def _init_finite_support(self, p):
        atoms = [_as_point(a) for a in p.get("atoms", ())]
        if not atoms:
            raise InvalidParameterError("finite-support needs at least one atom")
        self.params["atoms"] = [a.to_json() for a in atoms]
        self._atoms = stack(atoms, "atoms")
        self._atom_points = atoms
        self._atom_w = _weights(p.get("weights"), len(atoms))
        self.template = atoms[0]

    def _init_point_mass(self, p):
        if "value" not in p:
            raise InvalidParameterError("point-mass needs a value")
        v = _as_point(p["value"])
        self.params["value"] = v.to_json()
        self._atoms = v.data[None, :]
        self._atom_points = [v]
        self._atom_w = np.ones(1)
        self.template = v

    def _init_regression_pair(self, p):
        if "x" not in p:
            raise InvalidParameterError("regression-pair needs an x sampler")
        xs = p["x"] if isinstance(p["x"], Sampler) else Sampler.from_json(p["x"])
        if xs.is_pair or xs.template.kind != "vector":
            raise InvalidParameterError("regression-pair predictors must be vectors")
        self.params["x"] = xs.to_json()
        self._x = xs
        link = p.get("link", "identity")
        if link not in LINKS:
            raise InvalidParameterError(f"unknown link {link!r}; choose from {sorted(LINKS)}")
        self._link = link
        noise = dict(p.get("noise") or {"kind": "none"})
        nk = noise.get("kind", "none")
        scale = float(noise.get("scale", 0.0))
        if nk not in ("none", "uniform", "gaussian") or scale < 0:
            raise InvalidParameterError(f"invalid noise specification {noise}")
        self._noise_kind, self._noise_scale = nk, scale
        self.template = xs.template
        self.x_template = xs.template

    # -- drawing

    @property
    def is_pair(self) -> bool:
        return self.kind == "regression-pair"

    @property
    def rng(self) -> np.random.Generator:
        if self._rng is None:
            self._rng = np.random.default_rng(self.seed)
        return self._rng

    def with_seed(self, seed: int) -> Sampler:
        return Sampler(self.kind, self.params, seed)

    def draw(self, count: int):
        """``(count, size)`` array, or an ``(X, Y)`` pair of arrays for regression pairs."""
        if count < 0:
            raise InvalidParameterError("count must be >= 0")
        return self._draw(self.rng, count)

    def _draw(self, rng, count):
        k = self.kind
        if k == "uniform-scalar":
            return rng.uniform(self._low, self._high, size=(count, 1))
        if k == "gaussian-vector":
            return self._mean + self._sigma * rng.standard_normal((count, self._mean.size))
        if k == "histogram-mixture":
            alpha = self._concentration * self._mix.size * self._mix
            pi = rng.dirichlet(alpha, size=count)
            H = pi @ self._components
            return H / (H.sum(axis=1, keepdims=True) * self._width)
        if k == "er-graph-laplacian":
            n = self._nodes
            iu = np.triu_indices(n, 1)
            out = np.zeros((count, n, n))
            edges = rng.random((count, iu[0].size)) < self._prob
            out[:, iu[0], iu[1]] = -edges.astype(np.float64)
            out = out + out.transpose(0, 2, 1)
            out[:, np.arange(n), np.arange(n)] = -out.sum(axis=2)
            return out.reshape(count, n * n)
        if k in ("finite-support", "point-mass"):
            idx = rng.choice(self._atom_w.size, size=count, p=self._atom_w)
            return self._atoms[idx]
        # regression-pair
        X = self._x._draw(rng, count)
        Y = LINKS[self._link](X, self.params)
        if self._noise_kind == "uniform":
            Y = Y + rng.uniform(-self._noise_scale, self._noise_scale, size=Y.shape)
        elif self._noise_kind == "gaussian":
            Y = Y + self._noise_scale * rng.standard_normal(Y.shape)
        return X, Y

    def to_points(self, arr):
        if self.is_pair:
            X, Y = arr
            return list(zip(unstack(self.x_template, X), unstack(self.template, Y)))
        return unstack(self.template, arr)

    def responses(self, count: int) -> np.ndarray:
        """Draw ``count`` responses (the y marginal for pair samplers)."""
        out = self.draw(count)
        return out[1] if self.is_pair else out

    # -- serialisation

    def to_json(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, **self.params}

    @classmethod
    def from_json(cls, obj: dict) -> Sampler:
        obj = dict(obj)
        kind = obj.pop("kind", None)
        seed = obj.pop("seed", 0)
        return cls(kind, obj, seed)

    def __eq__(self, other):
        if not isinstance(other, Sampler):
            return NotImplemented
        return self.to_json() == other.to_json()

    def __repr__(self):
        return f"Sampler({self.kind!r}, seed={self.seed})"


def sample(sampler: Sampler, count: int) -> list:
    """``count`` fresh points (or ``(x, y)`` pairs) continuing the sampler's stream."""
    return sampler.to_points(sampler.draw(count))


# ---------------------------------------------------------------- risks


def _mc_summary(losses: np.ndarray) -> tuple[float, float]:
    m = losses.size
    est = float(np.mean(losses))
    sd = float(np.std(losses, ddof=1)) if m > 1 else 0.0
    return est, Z95 * sd / math.sqrt(m)


def _losses_on_draws(spec: LossSpec, predictor, sampler: Sampler, draws) -> np.ndarray:
    if isinstance(predictor, PiecewiseEstimator):
        if not sampler.is_pair:
            raise InvalidParameterError("a regression estimator needs a regression-pair sampler")
        X, Y = draws
        return paired_loss(spec, sampler.template, Y, predictor.predict_array(X))
    Y = draws[1] if sampler.is_pair else draws
    return pairwise_loss(spec, sampler.template, predictor.data[None, :], Y)[0]


def true_risk_mc(spec: LossSpec, predictor, sampler: Sampler, m: int, seed: int) -> tuple[float, float]:
    """Monte Carlo risk on ``m`` fresh draws, with a 95% normal half-width."""
    if m < 100:
        raise InvalidParameterError(f"Monte Carlo sample must have m >= 100, got {m}")
    draws = sampler.with_seed(seed).draw(m)
    return _mc_summary(_losses_on_draws(spec, predictor, sampler, draws))


def mc_risks(spec: LossSpec, candidates: np.ndarray, sampler: Sampler, m: int, seed: int):
    """Monte Carlo risks of several constant predictors on one shared sample."""
    if m < 100:
        raise InvalidParameterError(f"Monte Carlo sample must have m >= 100, got {m}")
    Y = sampler.with_seed(seed).responses(m)
    L = pairwise_loss(spec, sampler.template, candidates, Y)
    est = L.mean(axis=1)
    hw = Z95 * L.std(axis=1, ddof=1) / math.sqrt(m)
    return est, hw


def _noise_moments(sampler: Sampler):
    """(variance, mean absolute value) of one noise coordinate."""
    a = sampler._noise_scale
    if sampler._noise_kind == "none":
        return 0.0, 0.0
    if sampler._noise_kind == "uniform":
        return a * a / 3.0, a / 2.0
    return a * a, a * math.sqrt(2.0 / math.pi)


def oracle_risk(spec: LossSpec, sampler: Sampler) -> float | None:
    """Closed-form optimal risk where one is known, else ``None``.

    For finitely supported samplers this is the best risk over the atoms,
    i.e. the optimum under the assumption that the Fréchet mean is an atom.
    """
    kind = sampler.kind
    if kind in ("point-mass", "finite-support"):
        if not spec.accepts(sampler.template.kind):
            return None
        support = list(zip(sampler._atom_points, sampler._atom_w))
        return brute_force_frechet_mean(spec, sampler._atom_points, support).empirical_risk
    if kind == "uniform-scalar":
        span = sampler._high - sampler._low
        if spec.kind == "squared-norm":
            return span * span / 12.0
        if spec.kind == "norm":
            return span / 4.0
        return None
    if kind == "gaussian-vector":
        if spec.kind == "squared-norm":
            return float(np.sum(sampler._sigma**2))
        return None
    if kind == "regression-pair":
        var, mad = _noise_moments(sampler)
        d = sampler.template.size
        if sampler._noise_kind == "none":
            return 0.0
        if spec.kind == "squared-norm":
            return d * var
        if spec.kind == "norm" and d == 1:
            return mad
        return None
    return None


def exact_risk(spec: LossSpec, candidates: np.ndarray, sampler: Sampler) -> np.ndarray | None:
    """Exact risk of each candidate row where a closed form exists, else ``None``."""
    kind = sampler.kind
    if kind in ("point-mass", "finite-support"):
        M = pairwise_loss(spec, sampler.template, candidates, sampler._atoms)
        return row_sums(M * sampler._atom_w[None, :])
    if kind != "uniform-scalar":
        return None
    a, b = sampler._low, sampler._high
    y = np.asarray(candidates, dtype=float)[:, 0]
    base = spec.inner if spec.kind == "truncated" else spec
    if spec.kind == "truncated":
        worst = np.maximum(np.abs(y - a), np.abs(y - b))
        worst = worst * worst if base.kind == "squared-norm" else worst
        if np.any(worst > spec.bound_L):
            return None
    if base.kind == "squared-norm":
        return (y - 0.5 * (a + b)) ** 2 + (b - a) ** 2 / 12.0
    if base.kind == "norm":
        inside = ((y - a) ** 2 + (b - y) ** 2) / (2.0 * (b - a))
        return np.where((y >= a) & (y <= b), inside, np.abs(y - 0.5 * (a + b)))
    return None


# ---------------------------------------------------------------- reports

CSV_COLUMNS = (
    "n",
    "k",
    "seed",
    "estimator",
    "empirical_risk",
    "true_risk_mc",
    "mc_half_width",
    "oracle_risk",
    "excess_risk",
    "wall_time_ms",
)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


@dataclass(frozen=True)
class RiskRow:
    n: int
    k: int | None
    seed: int
    estimator: str
    empirical_risk: float
    true_risk_mc: float
    mc_half_width: float
    oracle_risk: float | None
    excess_risk: float | None
    wall_time_ms: int | None = None

    @property
    def sort_key(self):
        return (self.n, self.seed, self.estimator)


@dataclass
class RiskReport:
    rows: list = field(default_factory=list)

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: r.sort_key)

    def __len__(self):
        return len(self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> RiskReport:
        rows = []
        for rec in csv.DictReader(io.StringIO(text)):
            opt_f = lambda s: float(s) if s != "" else None  # noqa: E731
            opt_i = lambda s: int(s) if s != "" else None  # noqa: E731
            rows.append(
                RiskRow(
                    n=int(rec["n"]),
                    k=opt_i(rec["k"]),
                    seed=int(rec["seed"]),
                    estimator=rec["estimator"],
                    empirical_risk=float(rec["empirical_risk"]),
                    true_risk_mc=float(rec["true_risk_mc"]),
                    mc_half_width=float(rec["mc_half_width"]),
                    oracle_risk=opt_f(rec["oracle_risk"]),
                    excess_risk=opt_f(rec["excess_risk"]),
                    wall_time_ms=opt_i(rec["wall_time_ms"]),
                )
            )
        return cls(rows)

    @property
    def estimators(self) -> list[str]:
        return sorted({r.estimator for r in self.rows})

    @property
    def n_values(self) -> list[int]:
        return sorted({r.n for r in self.rows})

    def median_excess(self) -> dict[str, dict[int, float]]:
        """Median excess risk per estimator and sample size (rows without an oracle skipped)."""
        out: dict[str, dict[int, float]] = {}
        for est in self.estimators:
            per_n = {}
            for n in self.n_values:
                vals = [r.excess_risk for r in self.rows if r.estimator == est and r.n == n and r.excess_risk is not None]
                if vals:
                    per_n[n] = float(np.median(vals))
            out[est] = per_n
        return out


# ---------------------------------------------------------------- runs


def _check_grid(n_grid: Sequence[int]):
    if not n_grid or any(int(n) < 1 for n in n_grid):
        raise InvalidParameterError("n_grid must be a non-empty list of positive integers")
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise InvalidParameterError(f"n_grid must be strictly ascending, got {list(n_grid)}")


def _run_jobs(fn, jobs_args, jobs: int):
    if jobs <= 1:
        return [fn(*a) for a in jobs_args]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda a: fn(*a), jobs_args))


def _excess(true_risk: float, oracle: float | None) -> float | None:
    return None if oracle is None else true_risk - oracle


def _resolve_oracle(spec, sampler, oracle, mc_draws_seed, mc_m, master, pool_size):
    if oracle is None or oracle == "analytic":
        return oracle_risk(spec, sampler)
    if oracle == "pool":
        return pool_oracle_risk(spec, sampler, pool_size, mc_m, mc_draws_seed, derive_seed(master, ROLES["pool"]))
    if isinstance(oracle, (int, float)):
        return float(oracle)
    raise InvalidParameterError(f"unknown oracle {oracle!r}")


def pool_oracle_risk(spec: LossSpec, sampler: Sampler, pool_size: int, m: int, mc_seed: int, pool_seed: int) -> float:
    """Best Monte Carlo risk over ``pool_size`` independent candidates.

    Uses the same evaluation sample as the run it is compared with.
    """
    pool = sampler.with_seed(pool_seed).responses(pool_size)
    est, _ = mc_risks(spec, pool, sampler, m, mc_seed)
    return float(est.min())


def run_mean_convergence(
    spec: LossSpec,
    sampler: Sampler,
    n_grid: Sequence[int],
    seeds: Sequence[int],
    mc_m: int = 100_000,
    *,
    master_seed: int | None = None,
    oracle="analytic",
    pool_size: int = 64,
    estimators: Sequence[str] = ("quantized", "restricted"),
    jobs: int = 1,
    timing: bool = False,
) -> RiskReport:
    """Excess risk of the quantized and restricted means across sample sizes.

    For each ``(n, seed)`` draws ``2n`` points, splits them in half, fits on
    the learning half and scores every estimate on one shared Monte Carlo
    sample of size ``mc_m``.
    """
    _check_grid(n_grid)
    for e in estimators:
        if e not in ("quantized", "restricted"):
            raise InvalidParameterError(f"unknown mean estimator {e!r}")
    master = sampler.seed if master_seed is None else int(master_seed)
    mc_seed = derive_seed(master, ROLES["mc"])
    if mc_m < 100:
        raise InvalidParameterError(f"Monte Carlo sample must have m >= 100, got {mc_m}")
    mc_draws = sampler.with_seed(mc_seed).draw(mc_m)
    orc = _resolve_oracle(spec, sampler, oracle, mc_seed, mc_m, master, pool_size)

    def job(n, seed):
        src = sampler.with_seed(derive_seed(master, n, seed, ROLES["data"]))
        data = unstack(src.template, src.responses(2 * n))
        learn, protos = split_sample(data, derive_seed(master, n, seed, ROLES["split"]))
        rows = []
        for name in estimators:
            t0 = time.perf_counter()
            if name == "quantized":
                est = quantized_frechet_mean(spec, learn, protos)
            else:
                est = restricted_frechet_mean(spec, learn)
            ms = int(round((time.perf_counter() - t0) * 1000)) if timing else None
            risk, hw = _mc_summary(_losses_on_draws(spec, est.value, sampler, mc_draws))
            rows.append(RiskRow(n, None, int(seed), name, est.empirical_risk, risk, hw, orc, _excess(risk, orc), ms))
        return rows

    results = _run_jobs(job, [(int(n), s) for n in n_grid for s in seeds], jobs)
    return RiskReport([r for rows in results for r in rows])


def _k_for(k_rule, n: int) -> int:
    if k_rule is None or k_rule == "sqrt":
        return default_k_schedule(n)
    if callable(k_rule):
        return int(k_rule(n))
    k = int(k_rule)
    if k < 1:
        raise InvalidParameterError("fixed k must be >= 1")
    return k


def run_regression_convergence(
    spec: LossSpec,
    pair_sampler: Sampler,
    n_grid: Sequence[int],
    seeds: Sequence[int],
    k_rule="sqrt",
    mc_m: int = 100_000,
    *,
    master_seed: int | None = None,
    oracle="analytic",
    n_prototypes: int | None = None,
    jobs: int = 1,
    timing: bool = False,
) -> RiskReport:
    """Excess risk of the Voronoi regression estimate across sample sizes.

    Nuclei are ``k_rule(n)`` independent predictor draws and prototypes
    ``n`` (or ``n_prototypes``) independent response draws.
    """
    if not pair_sampler.is_pair:
        raise InvalidParameterError("run_regression_convergence needs a regression-pair sampler")
    _check_grid(n_grid)
    master = pair_sampler.seed if master_seed is None else int(master_seed)
    mc_seed = derive_seed(master, ROLES["mc"])
    if mc_m < 100:
        raise InvalidParameterError(f"Monte Carlo sample must have m >= 100, got {mc_m}")
    mc_draws = pair_sampler.with_seed(mc_seed).draw(mc_m)
    orc = _resolve_oracle(spec, pair_sampler, oracle, mc_seed, mc_m, master, 64)

    def job(n, seed):
        k = _k_for(k_rule, n)
        X, Y = pair_sampler.with_seed(derive_seed(master, n, seed, ROLES["data"])).draw(n)
        Xn, _ = pair_sampler.with_seed(derive_seed(master, n, seed, ROLES["nuclei"])).draw(k)
        _, Yp = pair_sampler.with_seed(derive_seed(master, n, seed, ROLES["prototypes"])).draw(n_prototypes or n)
        t0 = time.perf_counter()
        partition = VoronoiPartition.from_nuclei(unstack(pair_sampler.x_template, Xn))
        protos = PrototypeSet(tuple(unstack(pair_sampler.template, Yp)))
        est = fit_arrays(spec, X, Y, partition, protos)
        ms = int(round((time.perf_counter() - t0) * 1000)) if timing else None
        fitted = paired_loss(spec, pair_sampler.template, Y, est.predict_array(X))
        emp = float(row_sums(fitted[None, :])[0] / n)
        risk, hw = _mc_summary(_losses_on_draws(spec, est, pair_sampler, mc_draws))
        return [RiskRow(n, k, int(seed), "voronoi", emp, risk, hw, orc, _excess(risk, orc), ms)]

    results = _run_jobs(job, [(int(n), s) for n in n_grid for s in seeds], jobs)
    return RiskReport([r for rows in results for r in rows])


# ---------------------------------------------------------------- Hoeffding


@dataclass(frozen=True)
class HoeffdingResult:
    observed_freq: float
    bound: float
    half_width: float
    trials: int
    n: int
    epsilon: float
    max_deviation: float
    exact_reference: bool

    @property
    def passed(self) -> bool:
        return self.observed_freq <= self.bound + 3.0 * self.half_width

    def to_json(self) -> dict:
        return {
            "observed_freq": self.observed_freq,
            "bound": self.bound,
            "binomial_half_width": self.half_width,
            "trials": self.trials,
            "n": self.n,
            "epsilon": self.epsilon,
            "max_deviation": self.max_deviation,
            "exact_reference": self.exact_reference,
            "passed": self.passed,
        }


def hoeffding_bound(n: int, epsilon: float, L: float) -> float:
    """Union-bound Hoeffding tail ``min(1, 2 exp(-2 n eps^2 / L^2 + ln n))``."""
    return min(1.0, 2.0 * math.exp(-2.0 * n * epsilon * epsilon / (L * L) + math.log(n)))


def hoeffding_deviation_check(
    spec: LossSpec,
    sampler: Sampler,
    n: int,
    epsilon: float,
    trials: int,
    *,
    seed: int | None = None,
    reference_m: int = 200_000,
) -> HoeffdingResult:
    """Frequency with which ``max_y |R_n(y) - R(y)| > epsilon`` over ``n`` prototypes.

    Each trial draws a fresh learning sample and ``n`` fresh prototypes. The
    true risk ``R`` is exact when :func:`exact_risk` knows a closed form and
    otherwise a Monte Carlo estimate on ``reference_m`` shared draws.
    """
    if spec.bound_L is None:
        raise InvalidParameterError("the Hoeffding check needs a bounded loss (bound_L)")
    if trials < 100:
        raise InvalidParameterError(f"need at least 100 trials, got {trials}")
    if n < 1 or not epsilon > 0:
        raise InvalidParameterError("need n >= 1 and epsilon > 0")
    master = sampler.seed if seed is None else int(seed)
    reference = None
    hits = 0
    worst = 0.0
    exact_ref = True
    for t in range(trials):
        src = sampler.with_seed(derive_seed(master, t, ROLES["trial"]))
        learn = src.responses(n)
        protos = src.responses(n)
        emp = candidate_risks(spec, protos, sampler.template, learn)
        true = exact_risk(spec, protos, sampler)
        if true is None:
            exact_ref = False
            if reference is None:
                reference = sampler.with_seed(derive_seed(master, ROLES["mc"])).responses(reference_m)
            true = candidate_risks(spec, protos, sampler.template, reference)
        dev = float(np.max(np.abs(emp - true)))
        worst = max(worst, dev)
        hits += dev > epsilon
    p = hoeffding_bound(n, epsilon, spec.bound_L)
    return HoeffdingResult(
        observed_freq=hits / trials,
        bound=p,
        half_width=math.sqrt(p * (1.0 - p) / trials),
        trials=trials,
        n=n,
        epsilon=float(epsilon),
        max_deviation=worst,
        exact_reference=exact_ref,
    )
