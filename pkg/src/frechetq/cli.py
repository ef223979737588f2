"""Command-line front end.

Every command reads a single JSON configuration document; flags override
the matching config keys::

    frechetq mean --config cfg.json
    frechetq mean-converge --config cfg.json --out report.csv --svg curve.svg

All input files are parsed before any computation starts, and every output
is written to a temporary file and renamed into place.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigError, FrechetError, ParseError, SpaceMismatchError
from .experiments import (
    Sampler,
    hoeffding_deviation_check,
    run_mean_convergence,
    run_regression_convergence,
)
from .mean import (
    PrototypeSet,
    quantized_frechet_mean,
    restricted_frechet_mean,
    split_sample,
)
from .metric import LossSpec, Point, SpaceDescriptor, verify_loss_conditions
from .plot import convergence_svg
from .regression import PiecewiseEstimator, default_k_schedule, fit

log = logging.getLogger("frechetq")

COMMANDS = ("mean", "regress", "predict", "mean-converge", "regress-converge", "verify-loss", "hoeffding")
ROLES = ("data", "prototypes", "nuclei", "query")


@dataclass
class DataSource:
    """Where one data role comes from: a JSON-lines file, a sampler, or the labelled data."""

    file: str | None = None
    sampler: Sampler | None = None
    count: int | None = None
    subsample: bool = False

    def __post_init__(self):
        if sum([self.file is not None, self.sampler is not None, bool(self.subsample)]) != 1:
            raise ConfigError("each data role needs exactly one of 'file', 'sampler' or 'subsample'")

    def to_json(self) -> dict:
        if self.file is not None:
            return {"file": self.file}
        if self.subsample:
            return {"subsample": True}
        out = {"sampler": self.sampler.to_json()}
        if self.count is not None:
            out["count"] = self.count
        return out

    @classmethod
    def from_json(cls, obj) -> DataSource:
        if not isinstance(obj, dict):
            raise ConfigError(f"a data role must be an object, got {obj!r}")
        unknown = set(obj) - {"file", "sampler", "count", "subsample"}
        if unknown:
            raise ConfigError(f"unknown data-role keys {sorted(unknown)}")
        sampler = Sampler.from_json(obj["sampler"]) if "sampler" in obj else None
        count = int(obj["count"]) if "count" in obj else None
        return cls(obj.get("file"), sampler, count, bool(obj.get("subsample", False)))


@dataclass
class ExperimentConfig:
    command: str
    loss: LossSpec
    space: SpaceDescriptor | None = None
    data: DataSource | None = None
    prototypes: DataSource | None = None
    nuclei: DataSource | None = None
    query: DataSource | None = None
    estimator_file: str | None = None
    estimator: str = "quantized"
    n_grid: list = field(default_factory=list)
    seeds: list = field(default_factory=lambda: [0])
    k_rule: object = "sqrt"
    mc_m: int = 100_000
    seed: int = 0
    jobs: int = 1
    n: int | None = None
    epsilon: float | None = None
    trials: int = 200
    tolerance: float = 1e-9
    oracle: object = "analytic"
    pool_size: int = 64
    n_prototypes: int | None = None
    timing: bool = False
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
        if self.estimator not in ("quantized", "restricted"):
            raise ConfigError(f"estimator must be 'quantized' or 'restricted', got {self.estimator!r}")
        if not (self.k_rule == "sqrt" or (isinstance(self.k_rule, int) and self.k_rule >= 1)):
            raise ConfigError(f"k_rule must be 'sqrt' or a positive integer, got {self.k_rule!r}")
        unknown = set(self.outputs) - {"report", "svg"}
        if unknown:
            raise ConfigError(f"unknown output keys {sorted(unknown)}")

    def to_json(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if hasattr(v, "to_json"):
                v = v.to_json()
            elif isinstance(v, (list, dict)):
                v = json.loads(json.dumps(v))
            out[f.name] = v
        return out

    @classmethod
    def from_json(cls, obj: dict) -> ExperimentConfig:
        if not isinstance(obj, dict):
            raise ConfigError("configuration must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys {sorted(unknown)}")
        if "command" not in obj or "loss" not in obj:
            raise ConfigError("configuration needs 'command' and 'loss'")
        kw = dict(obj)
        kw["loss"] = LossSpec.from_json(obj["loss"])
        if "space" in obj:
            kw["space"] = SpaceDescriptor.from_json(obj["space"])
        for role in ROLES:
            if role in obj:
                kw[role] = DataSource.from_json(obj[role])
        for key in ("n_grid", "seeds"):
            if key in obj:
                kw[key] = [int(v) for v in obj[key]]
        return cls(**kw)


# ---------------------------------------------------------------- I/O


def load_config(path: str, command: str | None = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, exc.colno, exc.msg) from exc
    if command is not None and isinstance(obj, dict):
        obj.setdefault("command", command)
    return ExperimentConfig.from_json(obj)


def read_jsonl(path: str) -> list:
    """Parse a JSON-lines file; blank lines are skipped."""
    out = []
    try:
        fh = open(path)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append((lineno, json.loads(line)))
            except json.JSONDecodeError as exc:
                raise ParseError(path, lineno, exc.colno, exc.msg) from exc
    return out


def _parse_point(path, lineno, obj) -> Point:
    try:
        return Point.from_json(obj)
    except FrechetError as exc:
        raise ParseError(path, lineno, 1, str(exc)) from exc


def read_points(path: str) -> list[Point]:
    """Points from a JSON-lines file; ``{"x": ...}`` records contribute their ``x``."""
    pts = []
    for lineno, obj in read_jsonl(path):
        if isinstance(obj, dict) and "x" in obj and "kind" not in obj:
            obj = obj["x"]
        pts.append(_parse_point(path, lineno, obj))
    _check_uniform(pts)
    return pts


def read_pairs(path: str) -> list[tuple[Point, Point]]:
    pairs = []
    for lineno, obj in read_jsonl(path):
        if not isinstance(obj, dict) or "x" not in obj or "y" not in obj:
            raise ParseError(path, lineno, 1, "labelled records need 'x' and 'y' fields")
        pairs.append((_parse_point(path, lineno, obj["x"]), _parse_point(path, lineno, obj["y"])))
    _check_uniform([x for x, _ in pairs])
    _check_uniform([y for _, y in pairs])
    return pairs


def _check_uniform(points):
    if not points:
        return
    layout = points[0].layout()
    for i, p in enumerate(points):
        if p.layout() != layout:
            raise SpaceMismatchError(points[0].describe(), p.describe(), index=i)


def atomic_write(path: str, text: str):
    """Write ``text`` to ``path`` via a temporary file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_convergence_svg(report, path: str):
    atomic_write(path, convergence_svg(report))


# ---------------------------------------------------------------- commands


def _resolve_points(src: DataSource | None, role: str, pairs: bool = False):
    if src is None:
        return None
    if src.file is not None:
        return read_pairs(src.file) if pairs else read_points(src.file)
    if src.sampler is not None:
        if src.count is None:
            raise ConfigError(f"sampler for role {role!r} needs a 'count'")
        out = src.sampler.to_points(src.sampler.draw(src.count))
        if src.sampler.is_pair and not pairs:
            # unlabelled roles take predictors for nuclei/query, responses otherwise
            out = [x for x, _ in out] if role in ("nuclei", "query") else [y for _, y in out]
        return out
    return "subsample"


def _need(value, what):
    if value is None:
        raise ConfigError(f"this command needs {what}")
    return value


def _prepare(cfg: ExperimentConfig) -> dict:
    """Load every input file up front so a bad input aborts before any work."""
    c = cfg.command
    inputs = {}
    if c in ("mean", "verify-loss"):
        inputs["data"] = _need(_resolve_points(cfg.data, "data"), "a 'data' role")
        inputs["prototypes"] = _resolve_points(cfg.prototypes, "prototypes")
    elif c == "regress":
        inputs["data"] = _need(_resolve_points(cfg.data, "data", pairs=True), "a 'data' role")
        inputs["nuclei"] = _need(_resolve_points(cfg.nuclei, "nuclei"), "a 'nuclei' role")
        inputs["prototypes"] = _need(_resolve_points(cfg.prototypes, "prototypes"), "a 'prototypes' role")
    elif c == "predict":
        path = _need(cfg.estimator_file, "'estimator_file'")
        try:
            with open(path) as fh:
                inputs["estimator"] = PiecewiseEstimator.from_json(json.load(fh))
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ParseError(path, exc.lineno, exc.colno, exc.msg) from exc
        inputs["query"] = _need(_resolve_points(cfg.query, "query"), "a 'query' role")
    else:
        if cfg.data is None or cfg.data.sampler is None:
            raise ConfigError(f"{c} needs a 'data' role with a sampler")
        if c in ("mean-converge", "regress-converge") and not cfg.n_grid:
            raise ConfigError(f"{c} needs a non-empty 'n_grid'")
        if c == "hoeffding":
            _need(cfg.n, "'n'")
            _need(cfg.epsilon, "'epsilon'")
    if cfg.space is not None:
        key = "nuclei" if c == "regress" else "data"
        pts = inputs.get(key)
        if isinstance(pts, list):
            for i, p in enumerate(pts):
                cfg.space.check(p, index=i)
    return inputs


def _cmd_mean(cfg, inputs):
    data = inputs["data"]
    protos = inputs["prototypes"]
    if cfg.estimator == "restricted":
        est = restricted_frechet_mean(cfg.loss, data)
    elif isinstance(protos, list):
        est = quantized_frechet_mean(cfg.loss, data, PrototypeSet(tuple(protos)))
    else:
        learn, pset = split_sample(data, cfg.seed)
        est = quantized_frechet_mean(cfg.loss, learn, pset)
    return json.dumps(est.to_json()) + "\n", None


def _cmd_regress(cfg, inputs):
    data = inputs["data"]
    n = len(data)
    k = default_k_schedule(n) if cfg.k_rule == "sqrt" else int(cfg.k_rule)
    nuclei = inputs["nuclei"]
    if nuclei == "subsample":
        log.warning("nuclei subsampled from the labelled predictors; they are not independent of the data")
        idx = np.sort(np.random.default_rng(cfg.seed).choice(n, size=min(k, n), replace=False))
        nuclei = [data[i][0] for i in idx]
    elif len(nuclei) < k:
        raise ConfigError(f"need {k} nuclei but the nuclei source provides {len(nuclei)}")
    else:
        nuclei = nuclei[:k]
    protos = inputs["prototypes"]
    if protos == "subsample":
        log.warning("prototypes taken from the labelled responses; they are not independent of the data")
        protos = [y for _, y in data]
    if cfg.n_prototypes is not None:
        protos = protos[: cfg.n_prototypes]
    if cfg.space is not None and not cfg.space.is_linear:
        log.warning("predictor space is not a linear space")
    if protos[0].kind == "histogram":
        log.warning("response space is not a Banach space; the consistency guarantee does not apply")
    est = fit(cfg.loss, data, nuclei, protos, cfg.space)
    return json.dumps(est.to_json()) + "\n", None


def _cmd_predict(cfg, inputs):
    from .regression import predict

    est = inputs["estimator"]
    lines = [json.dumps(predict(est, x).to_json()) for x in inputs["query"]]
    return "\n".join(lines) + "\n", None


def _cmd_mean_converge(cfg, inputs):
    sampler = cfg.data.sampler
    report = run_mean_convergence(
        cfg.loss,
        sampler,
        cfg.n_grid,
        cfg.seeds,
        cfg.mc_m,
        master_seed=cfg.seed,
        oracle=cfg.oracle,
        pool_size=cfg.pool_size,
        jobs=cfg.jobs,
        timing=cfg.timing,
    )
    return report.to_csv(), report


def _cmd_regress_converge(cfg, inputs):
    report = run_regression_convergence(
        cfg.loss,
        cfg.data.sampler,
        cfg.n_grid,
        cfg.seeds,
        cfg.k_rule,
        cfg.mc_m,
        master_seed=cfg.seed,
        oracle=cfg.oracle,
        n_prototypes=cfg.n_prototypes,
        jobs=cfg.jobs,
        timing=cfg.timing,
    )
    return report.to_csv(), report


def _cmd_verify_loss(cfg, inputs):
    rep = verify_loss_conditions(cfg.loss, inputs["data"], cfg.tolerance)
    return json.dumps(rep.to_json()) + "\n", None


def _cmd_hoeffding(cfg, inputs):
    res = hoeffding_deviation_check(
        cfg.loss, cfg.data.sampler, cfg.n, cfg.epsilon, cfg.trials, seed=cfg.seed
    )
    return json.dumps(res.to_json()) + "\n", None


HANDLERS = {
    "mean": _cmd_mean,
    "regress": _cmd_regress,
    "predict": _cmd_predict,
    "mean-converge": _cmd_mean_converge,
    "regress-converge": _cmd_regress_converge,
    "verify-loss": _cmd_verify_loss,
    "hoeffding": _cmd_hoeffding,
}


def run(cfg: ExperimentConfig, stdout=None) -> int:
    """Execute one configured command; raises :class:`FrechetError` on failure."""
    stdout = stdout or sys.stdout
    inputs = _prepare(cfg)
    text, report = HANDLERS[cfg.command](cfg, inputs)
    svg_path = cfg.outputs.get("svg")
    svg = None
    if svg_path:
        if report is None:
            raise ConfigError(f"--svg is only available for convergence commands, not {cfg.command}")
        svg = convergence_svg(report)
    out_path = cfg.outputs.get("report")
    if out_path:
        atomic_write(out_path, text)
    if svg is not None:
        atomic_write(svg_path, svg)
    if not out_path or cfg.command == "mean":
        stdout.write(text)
    return 0


def _diagnostic(exc: Exception) -> str:
    info = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("path", "line", "column", "index", "expected", "got"):
        if getattr(exc, attr, None) is not None:
            info[attr] = getattr(exc, attr)
    return json.dumps(info)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="frechetq", description="Quantized Fréchet mean and regression estimators.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON configuration document")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--jobs", type=int, help="concurrent experiment jobs")
        p.add_argument("--out", help="output path (report, estimator or predictions)")
        p.add_argument("--svg", help="convergence chart output path")
    return parser


def main(argv=None) -> int:
    level = os.environ.get("FRECHET_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.command)
        if cfg.command != args.command:
            raise ConfigError(f"config is for {cfg.command!r} but {args.command!r} was requested")
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg.seed = args.seed
        if args.jobs is not None:
            cfg.jobs = args.jobs
        if args.out:
            cfg.outputs["report"] = args.out
        if args.svg:
            cfg.outputs["svg"] = args.svg
        return run(cfg)
    except FrechetError as exc:
        print(_diagnostic(exc), file=sys.stderr)
        return 2 if isinstance(exc, (ConfigError, ParseError)) else 1


if __name__ == "__main__":
    sys.exit(main())
