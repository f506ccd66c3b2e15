"""Benchmark objectives, candidate pools, and the seeded trial runner."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    AcquisitionSpec,
    LoopConfig,
    LoopState,
    loop_step,
)
from .gp import GPHyperparams, LinearKernel, OptimizerBudget, RBFKernel

HDBO_DIM = 200


class PoolFormatError(ValueError):
    """Candidate-pool CSV does not conform to the expected format."""


@dataclass(frozen=True)
class CandidatePool:
    features: np.ndarray  # N x d
    labels: np.ndarray  # length N
    name: str = "pool"

    def __post_init__(self):
        if self.features.shape[0] < 1:
            raise ValueError("pool must contain at least one candidate")
        if self.labels.shape[0] != self.features.shape[0]:
            raise ValueError("labels/features length mismatch")

    @property
    def size(self):
        return self.features.shape[0]

    @property
    def f_star(self):
        return float(np.max(self.labels))


def toy1d_eval(x: float) -> float:
    """1D toy objective on [-1, 1] with two high-frequency flanks."""
    if abs(x) > 1.0:
        raise ValueError(f"x={x} outside [-1, 1]")
    return math.sin(64.0 * abs(x) ** 4) - (x - 0.2) ** 2


def hdbo_eval(x) -> float:
    """Additive 200-dimensional objective: sum of elementwise exponentials."""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != HDBO_DIM:
        raise ValueError(f"expected {HDBO_DIM} dimensions, got {x.shape[0]}")
    return float(np.sum(np.exp(x)))


@dataclass(frozen=True)
class ObjectiveSpec:
    name: str  # "toy1d" | "hdbo200" | "tabular"
    noise_std: float = 0.0
    path: str | None = None  # CSV path for tabular pools

    def __post_init__(self):
        if self.name not in ("toy1d", "hdbo200", "tabular"):
            raise ValueError(f"unknown objective {self.name!r}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")
        if self.name == "tabular" and not self.path:
            raise ValueError("tabular objective requires a CSV path")


def generate_pool(objective: ObjectiveSpec, pool_size: int, rng) -> CandidatePool:
    """Build the candidate pool; deterministic given the generator state."""
    if objective.name == "tabular":
        return load_pool_csv(objective.path)
    if pool_size < 1:
        raise ValueError("pool_size must be >= 1")
    if objective.name == "toy1d":
        xs = np.linspace(-1.0, 1.0, pool_size)
        labels = np.array([toy1d_eval(x) for x in xs])
        return CandidatePool(features=xs[:, None], labels=labels, name="toy1d")
    X = rng.standard_normal((pool_size, HDBO_DIM))
    labels = np.sum(np.exp(X), axis=1)
    return CandidatePool(features=X, labels=labels, name="hdbo200")


def load_pool_csv(path) -> CandidatePool:
    """Read a pool CSV: one header row, numeric body, last column = label."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh if ln.strip() != ""]
    except FileNotFoundError:
        raise PoolFormatError(f"pool file not found: {path}")
    if not lines:
        raise PoolFormatError(f"{path}: empty file")
    header = lines[0].split(",")
    ncols = len(header)
    if ncols < 2:
        raise PoolFormatError(f"{path}: need at least one feature column plus label")
    if len(lines) == 1:
        raise PoolFormatError(f"{path}: no data rows (header only)")
    rows = []
    for r, line in enumerate(lines[1:], start=1):
        cells = line.split(",")
        if len(cells) != ncols:
            raise PoolFormatError(
                f"{path}: row {r} has {len(cells)} columns, expected {ncols}"
            )
        parsed = []
        for c, cell in enumerate(cells, start=1):
            try:
                parsed.append(float(cell))
            except ValueError:
                raise PoolFormatError(
                    f"{path}: non-numeric cell at row {r}, column {c}: {cell!r}"
                )
        rows.append(parsed)
    data = np.asarray(rows, dtype=float)
    return CandidatePool(features=data[:, :-1], labels=data[:, -1], name=str(path))


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    objective: ObjectiveSpec
    acquisition: AcquisitionSpec
    kernel: str = "rbf"  # "rbf" | "linear"
    horizon: int = 40
    n_warmup: int = 10
    seeds: tuple = (0,)
    delta: float = 0.2
    beta_sqrt_filter: float = 0.2
    beta_trace: float = 2.0  # beta_t used for the optimum-interval widths
    beta_sqrt_acq: float = math.sqrt(2.0)
    refit_interval: int = 1
    pool_size: int = 1000
    pool_seed: int = 0
    intersection_mode: str = "per_step"
    filter_schedule: bool = False
    n_restarts: int = 8
    standardize: bool = True

    def __post_init__(self):
        if self.n_warmup < 1:
            raise ValueError("n_warmup must be >= 1")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        if self.kernel not in ("rbf", "linear"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.intersection_mode not in ("per_step", "historical"):
            raise ValueError(f"unknown intersection mode {self.intersection_mode!r}")

    def config_hash(self) -> str:
        payload = {
            "objective": [self.objective.name, self.objective.noise_std,
                          self.objective.path],
            "acquisition": [self.acquisition.family, self.acquisition.scope,
                            self.acquisition.beta_sqrt_acq],
            "kernel": self.kernel,
            "horizon": self.horizon,
            "n_warmup": self.n_warmup,
            "delta": self.delta,
            "beta_sqrt_filter": self.beta_sqrt_filter,
            "beta_trace": self.beta_trace,
            "refit_interval": self.refit_interval,
            "pool_size": self.pool_size,
            "pool_seed": self.pool_seed,
            "intersection_mode": self.intersection_mode,
            "filter_schedule": self.filter_schedule,
            "n_restarts": self.n_restarts,
            "standardize": self.standardize,
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha1(blob).hexdigest()[:12]

    def init_hyperparams(self) -> GPHyperparams:
        if self.kernel == "rbf":
            return GPHyperparams(RBFKernel(1.0, 1.0), 1e-2)
        return GPHyperparams(LinearKernel(1.0, 0.0), 1e-2)

    def loop_config(self) -> LoopConfig:
        return LoopConfig(
            init_hyperparams=self.init_hyperparams(),
            acquisition=AcquisitionSpec(
                self.acquisition.family, self.acquisition.scope, self.beta_sqrt_acq
            ),
            beta_sqrt_filter=self.beta_sqrt_filter,
            beta_sqrt_trace=math.sqrt(self.beta_trace),
            delta=self.delta,
            filter_schedule=self.filter_schedule,
            refit_interval=self.refit_interval,
            budget=OptimizerBudget(n_restarts=self.n_restarts),
            standardize=self.standardize,
            intersection_mode=self.intersection_mode,
            noise_std=self.objective.noise_std,
        )


TRACE_COLUMNS = (
    "trial_seed", "t", "phase", "chosen_index", "observed_y", "best_y",
    "simple_regret", "roi_ratio", "roi_threshold",
    "width_global", "width_roi", "width_intersect",
)


@dataclass(frozen=True)
class TraceRecord:
    t: int
    phase: str  # "warmup" | "step"
    chosen_index: int
    observed_y: float
    best_y: float
    simple_regret: float
    roi_ratio: float = math.nan
    roi_threshold: float = math.nan
    width_global: float = math.nan
    width_roi: float = math.nan
    width_intersect: float = math.nan


@dataclass(frozen=True)
class TrialTrace:
    seed: int
    config_hash: str
    horizon: int
    records: tuple

    def row_values(self, record: TraceRecord):
        return (self.seed, record.t, record.phase, record.chosen_index,
                record.observed_y, record.best_y, record.simple_regret,
                record.roi_ratio, record.roi_threshold, record.width_global,
                record.width_roi, record.width_intersect)


def build_pool(config: ExperimentConfig) -> CandidatePool:
    """Shared pool for all trials of a config (fixed pool seed)."""
    rng = np.random.default_rng(np.random.SeedSequence([config.pool_seed, 424243]))
    return generate_pool(config.objective, config.pool_size, rng)


def run_trial(config: ExperimentConfig, seed: int, pool: CandidatePool | None = None) -> TrialTrace:
    """One seeded run: warm-up draw, then `horizon` adaptive steps.

    Pure in (config, seed); the optional pool argument only avoids
    regenerating the (config-determined) pool.
    """
    if pool is None:
        pool = build_pool(config)
    if pool.size < config.n_warmup + config.horizon:
        raise ValueError(
            f"pool of {pool.size} cannot support "
            f"{config.n_warmup} warm-up + {config.horizon} steps"
        )
    ss = np.random.SeedSequence([int(seed), 97])
    rng_warm, rng_hyper, rng_acq, rng_noise = (
        np.random.default_rng(s) for s in ss.spawn(4)
    )
    warm = np.sort(rng_warm.choice(pool.size, size=config.n_warmup, replace=False))
    noise = config.objective.noise_std
    observed = []
    for i in warm:
        y = float(pool.labels[i])
        if noise > 0:
            y += noise * float(rng_noise.standard_normal())
        observed.append(y)

    f_star = pool.f_star
    # regret is measured on true labels so it stays non-negative under noise
    best_true = float(np.max(pool.labels[warm]))
    best_obs = max(observed)
    best_warm_pos = int(np.argmax(observed))
    records = [
        TraceRecord(
            t=0,
            phase="warmup",
            chosen_index=int(warm[best_warm_pos]),
            observed_y=observed[best_warm_pos],
            best_y=best_obs,
            simple_regret=f_star - best_true,
        )
    ]

    state = LoopState(
        features=pool.features,
        labels=pool.labels,
        selected_indices=[int(i) for i in warm],
        observed_y=list(observed),
        rng_hyper=rng_hyper,
        rng_acq=rng_acq,
        rng_noise=rng_noise,
    )
    cfg = config.loop_config()
    for t in range(1, config.horizon + 1):
        try:
            state, chosen, diag = loop_step(state, cfg)
        except Exception as exc:
            raise RuntimeError(f"trial seed={seed} failed at iteration {t}: {exc}") from exc
        y_obs = state.observed_y[-1]
        best_obs = max(best_obs, y_obs)
        best_true = max(best_true, float(pool.labels[chosen]))
        records.append(
            TraceRecord(
                t=t,
                phase="step",
                chosen_index=chosen,
                observed_y=y_obs,
                best_y=best_obs,
                simple_regret=f_star - best_true,
                roi_ratio=diag.roi_ratio,
                roi_threshold=diag.roi_threshold,
                width_global=diag.width_global,
                width_roi=diag.width_roi,
                width_intersect=diag.width_intersect,
            )
        )
    return TrialTrace(
        seed=int(seed),
        config_hash=config.config_hash(),
        horizon=config.horizon,
        records=tuple(records),
    )


SUMMARY_METRICS = (
    "simple_regret", "roi_ratio",
    "width_global", "width_roi", "width_intersect",
)


def aggregate(traces):
    """Per-iteration mean and standard error across same-config trials.

    Returns a list of row dicts keyed t, n, <metric>_mean, <metric>_se.
    SE uses the sample standard deviation; a single trace reports SE 0.
    """
    traces = list(traces)
    if not traces:
        raise ValueError("no traces to aggregate")
    h0, c0 = traces[0].horizon, traces[0].config_hash
    for tr in traces[1:]:
        if tr.horizon != h0 or tr.config_hash != c0:
            raise ValueError("traces mix different configs or horizons")
    traces = sorted(traces, key=lambda tr: tr.seed)
    rows = []
    for k in range(h0 + 1):
        row = {"t": traces[0].records[k].t, "n": len(traces)}
        for metric in SUMMARY_METRICS:
            vals = np.array([getattr(tr.records[k], metric) for tr in traces])
            row[f"{metric}_mean"] = float(np.mean(vals))
            if len(traces) > 1:
                row[f"{metric}_se"] = float(
                    np.std(vals, ddof=1) / math.sqrt(len(traces))
                )
            else:
                row[f"{metric}_se"] = 0.0
        rows.append(row)
    return rows
