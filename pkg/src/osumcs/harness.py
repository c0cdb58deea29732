"""Monte-Carlo sweeps, real-data evaluation and result emission."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .data import Dataset, ResponseOracle
from .estimator import (
    Method,
    PilotError,
    PipelineConfig,
    draw_pilot,
    fit_full_surrogate,
    pilot_stage,
    run_pipeline,
)
from .glm import GlmFamily
from .scenarios import DESIGNS, ScenarioSpec, generate, real_data_surrogate
from .sampler import SingularInformationError

log = logging.getLogger(__name__)

METHOD_ORDER = (Method.OSUMCS, Method.OSUMC, Method.UNIFORM)
AUGMENT_MODES = ("on", "off", "osumcs")

# stage tags for the counter-based seed streams
STAGE_DATA, STAGE_PILOT, STAGE_DRAW, STAGE_SURROGATE, STAGE_SPLIT = range(5)

FULL_SCALE_N = 100_000
FULL_SCALE_GRID = tuple(range(1000, 2001, 100))


class ConfigError(ValueError):
    pass


class CsvFormatError(ValueError):
    pass


def stream(seed: int, rep: int, stage: int, method: int = 0, extra: int = 0) -> np.random.Generator:
    """Independent generator for one (seed, rep, stage, method, extra) cell."""
    return np.random.default_rng(np.random.SeedSequence([seed, rep, stage, method, extra]))


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str | None = None
    csv_path: str | None = None
    family: GlmFamily | None = None
    methods: tuple[Method, ...] = METHOD_ORDER
    n_grid: tuple[int, ...] = (1000, 1500, 2000)
    n0: int = 500
    reps: int = 50
    N: int = 20000
    seed: int = 42
    augment: str = "on"
    workers: int = 1
    train_size: int = 19000
    response: str | None = None
    intercept: bool = True

    def validate(self, n_rows: int | None = None) -> None:
        if (self.scenario is None) == (self.csv_path is None):
            raise ConfigError("exactly one of scenario or csv_path must be given")
        if self.scenario is not None and self.scenario not in DESIGNS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {', '.join(DESIGNS)}")
        if not self.methods:
            raise ConfigError("at least one method is required")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("methods must be distinct")
        if not self.n_grid:
            raise ConfigError("n_grid must be nonempty")
        if self.reps < 1:
            raise ConfigError("reps must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.augment not in AUGMENT_MODES:
            raise ConfigError(f"augment must be one of {AUGMENT_MODES}")
        N = self.N if n_rows is None else n_rows
        if not 0 < self.n0 < min(self.n_grid):
            raise ConfigError(f"need 0 < n0 < min(n_grid), got n0={self.n0}, n_grid={list(self.n_grid)}")
        if max(self.n_grid) > N:
            raise ConfigError(f"max(n_grid)={max(self.n_grid)} exceeds N={N}")

    def augment_for(self, method: Method) -> bool:
        if self.augment == "on":
            return True
        if self.augment == "osumcs":
            return method is Method.OSUMCS
        return False


@dataclass(frozen=True)
class RepRecord:
    method: Method
    n: int
    rep: int
    converged: bool
    sq_err: float = math.nan
    rel_est_se: float | None = None
    rel_pred_se: float | None = None
    unauthorized_reads: int = 0


@dataclass(frozen=True)
class ResultRow:
    method: str
    n: int
    reps_used: int
    reps_diverged: int
    mse: float
    log_mse: float
    rel_est_se: float | None = None
    rel_pred_se: float | None = None


def empirical_mse(estimates, beta0) -> float:
    """Mean squared Euclidean distance of the estimates from beta0."""
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    if est.size == 0:
        raise ValueError("no estimates")
    return float(np.mean(np.sum((est - np.asarray(beta0, dtype=float)) ** 2, axis=1)))


def _log(x: float) -> float:
    if math.isnan(x):
        return math.nan
    return math.log(x) if x > 0 else -math.inf


def aggregate(records, reps: int) -> list[ResultRow]:
    """One row per (method, n) over converged replications, independent of record order."""
    groups: dict[tuple[Method, int], list[RepRecord]] = {}
    for r in records:
        groups.setdefault((Method(r.method), r.n), []).append(r)
    rows = []
    for (m, n) in sorted(groups, key=lambda k: (METHOD_ORDER.index(k[0]), k[1])):
        ok = sorted((r for r in groups[(m, n)] if r.converged), key=lambda r: r.rep)
        used = len(ok)
        # math.fsum keeps the mean independent of summation order
        mse = math.fsum(r.sq_err for r in ok) / used if used else math.nan
        rel_est = rel_pred = None
        if ok and ok[0].rel_est_se is not None:
            rel_est = math.fsum(r.rel_est_se for r in ok) / used
            rel_pred = math.fsum(r.rel_pred_se for r in ok) / used
        rows.append(ResultRow(m.value, n, used, reps - used, mse, _log(mse), rel_est, rel_pred))
    return rows


def _unauthorized(oracle: ResponseOracle, allowed: set[int]) -> int:
    return sum(1 for i in oracle.accessed.tolist() if i not in allowed)


def _scenario_spec(config: ExperimentConfig) -> ScenarioSpec:
    return ScenarioSpec(config.scenario, N=config.N, family=config.family)


def _pipeline_config(config: ExperimentConfig, spec_family, method: Method, n: int) -> PipelineConfig:
    return PipelineConfig(
        n=n,
        n0=config.n0,
        method=method,
        family_y=spec_family,
        family_s=GlmFamily.LINEAR,
        augment=config.augment_for(method),
    )


def _run_methods(config, dataset, family_y, pilot, rep, evaluate) -> list[RepRecord]:
    """All (n, method) cells of one replication on a shared dataset and pilot."""
    allowed = set(pilot.idx.tolist())
    gamma_full = fit_full_surrogate(dataset, GlmFamily.LINEAR, init=pilot.gamma)
    out = []
    for n in config.n_grid:
        for m in config.methods:
            mi = METHOD_ORDER.index(m)
            pc = _pipeline_config(config, family_y, m, n)
            est = run_pipeline(
                dataset, pc, stream(config.seed, rep, STAGE_DRAW, mi, n), pilot=pilot, gamma_full=gamma_full
            )
            allowed.update(est.plan.selected.tolist())
            if est.converged:
                out.append(RepRecord(m, n, rep, True, **evaluate(est.beta_A)))
            else:
                out.append(RepRecord(m, n, rep, False))
    bad = _unauthorized(dataset.responses, allowed)
    if bad:
        out = [RepRecord(**{**asdict(r), "unauthorized_reads": bad}) for r in out]
    return out


def _diverged_all(config, rep) -> list[RepRecord]:
    return [RepRecord(m, n, rep, False) for n in config.n_grid for m in config.methods]


def simulate_replication(config: ExperimentConfig, rep: int) -> list[RepRecord]:
    spec = _scenario_spec(config)
    dataset = generate(spec, stream(config.seed, rep, STAGE_DATA))
    try:
        pilot = pilot_stage(
            dataset,
            config.n0,
            spec.family,
            GlmFamily.LINEAR,
            stream(config.seed, rep, STAGE_PILOT),
            fit_moments=Method.OSUMCS in config.methods,
        )
    except (PilotError, SingularInformationError) as exc:
        log.warning("rep %d: pilot failed: %s", rep, exc)
        return _diverged_all(config, rep)
    beta0 = spec.beta0

    def evaluate(beta):
        return {"sq_err": float(np.sum((beta - beta0) ** 2))}

    return _run_methods(config, dataset, spec.family, pilot, rep, evaluate)


def _map_reps(fn, config, reps):
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            chunks = list(pool.map(fn, [config] * len(reps), reps))
    else:
        chunks = [fn(config, r) for r in reps]
    return [rec for chunk in chunks for rec in chunk]


def collect_records(config: ExperimentConfig) -> list[RepRecord]:
    config.validate()
    return _map_reps(simulate_replication, config, list(range(config.reps)))


def run_sweep(config: ExperimentConfig) -> list[ResultRow]:
    """Paired Monte-Carlo sweep over methods and budgets."""
    return aggregate(collect_records(config), config.reps)


# --- real data ---------------------------------------------------------------


def load_csv(path, response: str | None = None) -> tuple[NDArray, NDArray, list[str]]:
    """Parse a numeric CSV with a header row; the response defaults to the last column."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        values = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise CsvFormatError(
                    f"{path}: row {lineno} has {len(row)} fields, header has {len(header)}"
                )
            parsed = []
            for col, cell in enumerate(row):
                try:
                    x = float(cell)
                except ValueError:
                    raise CsvFormatError(
                        f"{path}: row {lineno}, column {col + 1} ({header[col]!r}): "
                        f"non-numeric value {cell!r}"
                    ) from None
                if not math.isfinite(x):
                    raise CsvFormatError(f"{path}: row {lineno}, column {col + 1}: non-finite value")
                parsed.append(x)
            values.append(parsed)
    if not values:
        raise CsvFormatError(f"{path}: no data rows")
    data = np.array(values)
    j = len(header) - 1 if response is None else _column_index(header, response)
    features = [h for i, h in enumerate(header) if i != j]
    X = np.delete(data, j, axis=1)
    return X, data[:, j], features


def _column_index(header, name):
    try:
        return header.index(name)
    except ValueError:
        raise CsvFormatError(f"response column {name!r} not in header") from None


def drop_constant_columns(X, names):
    const = np.all(X == X[0], axis=0)
    for name in np.asarray(names)[const]:
        log.warning("dropping constant column %r", str(name))
    return X[:, ~const], [n for n, c in zip(names, const) if not c]


def ols(X, y) -> NDArray:
    return np.linalg.lstsq(X, y, rcond=None)[0]


@dataclass
class RealDataSplit:
    X_train: NDArray
    y_train: NDArray
    X_test: NDArray
    y_test: NDArray
    beta0: NDArray
    features: list[str] = field(default_factory=list)


def prepare_real_data(config: ExperimentConfig) -> RealDataSplit:
    X, y, names = load_csv(config.csv_path, config.response)
    X, names = drop_constant_columns(X, names)
    if config.intercept:
        X = np.column_stack([np.ones(X.shape[0]), X])
        names = ["(intercept)"] + names
    n_rows = X.shape[0]
    if not 0 < config.train_size < n_rows:
        raise ConfigError(f"train_size={config.train_size} must lie in (0, {n_rows})")
    config.validate(n_rows=config.train_size)
    perm = stream(config.seed, 0, STAGE_SPLIT).permutation(n_rows)
    tr, te = perm[: config.train_size], perm[config.train_size :]
    return RealDataSplit(X[tr], y[tr], X[te], y[te], ols(X[tr], y[tr]), names)


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else math.nan


def relative_errors(beta, split: RealDataSplit) -> dict:
    """Squared error against beta0 plus its relative estimation and test-prediction errors.

    A ratio whose baseline is exactly zero is reported as NaN.
    """
    beta0 = split.beta0
    sq = float(np.sum((beta - beta0) ** 2))
    pred = float(np.sum((split.X_test @ beta - split.y_test) ** 2))
    base_pred = float(np.sum((split.X_test @ beta0 - split.y_test) ** 2))
    return {
        "sq_err": sq,
        "rel_est_se": _ratio(sq, float(np.sum(beta0**2))),
        "rel_pred_se": _ratio(pred, base_pred),
    }


def realdata_replication(config: ExperimentConfig, rep: int, split: RealDataSplit) -> list[RepRecord]:
    X, N = split.X_train, split.X_train.shape[0]
    oracle = ResponseOracle(split.y_train)
    pilot_idx = draw_pilot(N, config.n0, stream(config.seed, rep, STAGE_PILOT, extra=1))
    gamma0 = ols(X[pilot_idx], oracle.fetch(pilot_idx))
    S = real_data_surrogate(X, gamma0, stream(config.seed, rep, STAGE_SURROGATE))
    dataset = Dataset(X=X, S=S, responses=oracle)
    try:
        pilot = pilot_stage(
            dataset,
            config.n0,
            GlmFamily.LINEAR,
            GlmFamily.LINEAR,
            stream(config.seed, rep, STAGE_PILOT),
            idx=pilot_idx,
            fit_moments=Method.OSUMCS in config.methods,
        )
    except (PilotError, SingularInformationError) as exc:
        log.warning("rep %d: pilot failed: %s", rep, exc)
        return _diverged_all(config, rep)

    def evaluate(beta):
        return relative_errors(beta, split)

    return _run_methods(config, dataset, GlmFamily.LINEAR, pilot, rep, evaluate)


def real_data_mode(config: ExperimentConfig) -> list[ResultRow]:
    """Repeated subsampling on a CSV data set against the full-training OLS fit."""
    split = prepare_real_data(config)
    records = []
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(realdata_replication, config, r, split) for r in range(config.reps)]
            for f in futures:
                records.extend(f.result())
    else:
        for r in range(config.reps):
            records.extend(realdata_replication(config, r, split))
    return aggregate(records, config.reps)


# --- output -------------------------------------------------------------------

BASE_FIELDS = ["method", "n", "reps_used", "reps_diverged", "mse", "log_mse"]
REAL_FIELDS = ["rel_est_se", "rel_pred_se"]


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _fields(rows) -> list[str]:
    if any(r.rel_est_se is not None for r in rows):
        return BASE_FIELDS + REAL_FIELDS
    return list(BASE_FIELDS)


def render_csv(rows) -> str:
    buf = io.StringIO()
    fields = _fields(rows)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        rec = asdict(r)
        w.writerow([_fmt(rec[f]) for f in fields])
    return buf.getvalue()


def render_json(rows) -> str:
    fields = _fields(rows)
    return json.dumps([{f: asdict(r)[f] for f in fields} for r in rows], indent=2) + "\n"


def emit_results(rows, fmt: str, path) -> None:
    if fmt == "csv":
        text = render_csv(rows)
    elif fmt == "json":
        text = render_json(rows)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    Path(path).write_text(text)
