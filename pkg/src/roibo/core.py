"""Two-model region-of-interest optimization loop on a candidate pool.

A global GP filters the pool to a superlevel-set region of interest
(every candidate whose UCB reaches the maximum LCB), a second GP is fit
on the observations inside that region, and acquisition scores come from
either model or from the intersection of their confidence intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .gp import (
    GPHyperparams,
    GPModel,
    OptimizerBudget,
    fit_posterior,
    optimize_hyperparams,
    posterior_mean_var,
    sample_posterior,
)

# Acquisition families. RCI and RTS are the interval-width and Thompson
# families pinned to the ROI model.
FAMILIES = ("ici", "rci", "rts", "ucb", "ts", "ei", "ciwidth")
SCOPES = ("global", "roi", "intersect")

TS_JOINT_SAMPLE_CAP = 2000


class PoolExhaustedError(RuntimeError):
    """No unselected candidate remains in the acquisition scope."""


def beta_schedule(t: int, pool_size: int, delta: float) -> float:
    """Anytime confidence multiplier beta_t = 2 log(2 |D| pi_t / delta).

    Uses pi_t = pi^2 t^2 / 6 so that sum over t of 1/pi_t equals 1.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    if pool_size < 1:
        raise ValueError("pool_size must be >= 1")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    pi_t = math.pi**2 * t**2 / 6.0
    return 2.0 * math.log(2.0 * pool_size * pi_t / delta)


@dataclass(frozen=True)
class ConfidenceBounds:
    indices: np.ndarray  # pool indices the bounds are defined on
    lcb: np.ndarray
    ucb: np.ndarray
    beta_sqrt: float
    model_tag: str  # "global" | "roi"

    @property
    def width(self):
        return self.ucb - self.lcb


@dataclass(frozen=True)
class RegionOfInterest:
    indices: np.ndarray  # sorted pool indices passing the filter
    threshold: float  # max over the pool of the global LCB
    ratio: float  # |ROI| / |pool|


@dataclass(frozen=True)
class IntersectedBounds:
    indices: np.ndarray
    lcb: np.ndarray  # elementwise max of the two LCBs
    ucb: np.ndarray  # elementwise min of the two UCBs
    empty_mask: np.ndarray  # True where the raw intersection was empty
    mode: str  # "per_step" | "historical"

    @property
    def width(self):
        """Interval widths with empty intersections treated as width 0."""
        return np.where(self.empty_mask, 0.0, self.ucb - self.lcb)


def confidence_bounds(
    model: GPModel, features, indices, beta_sqrt: float, model_tag: str
) -> ConfidenceBounds:
    """mu +/- beta_sqrt * sigma at the given pool indices."""
    if beta_sqrt < 0:
        raise ValueError("beta_sqrt must be non-negative")
    indices = np.asarray(indices, dtype=int)
    summary = posterior_mean_var(model, np.asarray(features)[indices])
    return ConfidenceBounds(
        indices=indices,
        lcb=summary.mean - beta_sqrt * summary.std,
        ucb=summary.mean + beta_sqrt * summary.std,
        beta_sqrt=beta_sqrt,
        model_tag=model_tag,
    )


def filter_roi(global_bounds: ConfidenceBounds) -> RegionOfInterest:
    """Superlevel-set filter: keep candidates whose UCB reaches max LCB.

    Never empty: the LCB argmax always satisfies ucb >= lcb = threshold.
    """
    threshold = float(np.max(global_bounds.lcb))
    keep = global_bounds.ucb >= threshold
    indices = np.sort(global_bounds.indices[keep])
    return RegionOfInterest(
        indices=indices,
        threshold=threshold,
        ratio=indices.size / global_bounds.indices.size,
    )


def partition_observations(selected_indices, roi: RegionOfInterest):
    """Positions within the selection history whose pool index is in the ROI."""
    member = np.isin(np.asarray(selected_indices, dtype=int), roi.indices)
    return np.flatnonzero(member)


def intersect_bounds(
    global_bounds: ConfidenceBounds,
    roi_bounds: ConfidenceBounds,
    roi: RegionOfInterest,
) -> IntersectedBounds:
    """Per-step intersection of the two models' intervals on the ROI."""
    if not np.array_equal(roi_bounds.indices, roi.indices):
        raise ValueError("roi_bounds must be defined on roi.indices")
    pos = np.searchsorted(global_bounds.indices, roi.indices)
    if not np.array_equal(global_bounds.indices[pos], roi.indices):
        raise ValueError("global bounds do not cover the ROI")
    lcb = np.maximum(global_bounds.lcb[pos], roi_bounds.lcb)
    ucb = np.minimum(global_bounds.ucb[pos], roi_bounds.ucb)
    return IntersectedBounds(
        indices=roi.indices,
        lcb=lcb,
        ucb=ucb,
        empty_mask=ucb < lcb,
        mode="per_step",
    )


def intersect_bounds_historical(
    prev: IntersectedBounds | None, step: IntersectedBounds
) -> IntersectedBounds:
    """Fold the current step into the running historical intersection.

    The domain follows the current step's index set; indices that left
    the ROI drop their history, new indices start from the step bounds.
    """
    if prev is None:
        return replace(step, mode="historical")
    common = np.isin(step.indices, prev.indices)
    pos = np.searchsorted(prev.indices, step.indices[common])
    lcb = step.lcb.copy()
    ucb = step.ucb.copy()
    lcb[common] = np.maximum(lcb[common], prev.lcb[pos])
    ucb[common] = np.minimum(ucb[common], prev.ucb[pos])
    return IntersectedBounds(
        indices=step.indices,
        lcb=lcb,
        ucb=ucb,
        empty_mask=ucb < lcb,
        mode="historical",
    )


@dataclass(frozen=True)
class AcquisitionSpec:
    family: str  # one of FAMILIES
    scope: str | None = None  # one of SCOPES; defaulted per family
    beta_sqrt_acq: float = math.sqrt(2.0)

    def __post_init__(self):
        fam = self.family.lower()
        if fam not in FAMILIES:
            raise ValueError(f"unknown acquisition family {self.family!r}")
        forced = {"ici": "intersect", "rci": "roi", "rts": "roi"}
        scope = self.scope.lower() if self.scope else forced.get(fam, "global")
        if scope not in SCOPES:
            raise ValueError(f"unknown scope {self.scope!r}")
        if fam in forced and scope != forced[fam]:
            raise ValueError(f"{fam} implies scope={forced[fam]}")
        if self.beta_sqrt_acq < 0:
            raise ValueError("beta_sqrt_acq must be non-negative")
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "scope", scope)

    @property
    def label(self):
        if self.family in ("ici", "rci", "rts"):
            return self.family
        return f"{self.family}-{self.scope}"


@dataclass(frozen=True)
class StepDiagnostics:
    roi_ratio: float
    roi_threshold: float
    width_global: float
    width_roi: float
    width_intersect: float


@dataclass(frozen=True)
class LoopConfig:
    init_hyperparams: GPHyperparams
    acquisition: AcquisitionSpec
    beta_sqrt_filter: float = 0.2
    beta_sqrt_trace: float = math.sqrt(2.0)
    delta: float = 0.2
    filter_schedule: bool = False  # True: beta_schedule(t) for filtering
    refit_interval: int = 1
    budget: OptimizerBudget = field(default_factory=OptimizerBudget)
    standardize: bool = True
    intersection_mode: str = "per_step"  # "per_step" | "historical"
    noise_std: float = 0.0


@dataclass
class LoopState:
    """Mutable per-trial state; one instance per seeded run."""

    features: np.ndarray  # pool feature matrix, N x d
    labels: np.ndarray  # pool objective values, length N
    selected_indices: list[int]
    observed_y: list[float]
    rng_hyper: np.random.Generator
    rng_acq: np.random.Generator
    rng_noise: np.random.Generator
    t: int = 0
    hyper_global: GPHyperparams | None = None
    hyper_roi: GPHyperparams | None = None
    global_model: GPModel | None = None
    roi_model: GPModel | None = None
    roi: RegionOfInterest | None = None
    historical: IntersectedBounds | None = None

    @property
    def pool_size(self):
        return self.features.shape[0]


def _eligible_indices(state: LoopState, scope: str) -> np.ndarray:
    if scope == "global":
        domain = np.arange(state.pool_size)
    else:
        domain = state.roi.indices
    mask = ~np.isin(domain, np.asarray(state.selected_indices, dtype=int))
    eligible = domain[mask]
    if eligible.size == 0:
        raise PoolExhaustedError(f"no unselected candidates in scope {scope!r}")
    return eligible


def _norm_pdf(z):
    return np.exp(-0.5 * z**2) / math.sqrt(2.0 * math.pi)


def _norm_cdf(z):
    return 0.5 * (1.0 + np.vectorize(math.erf)(z / math.sqrt(2.0)))


def acquisition_scores(
    state: LoopState,
    spec: AcquisitionSpec,
    global_bounds: ConfidenceBounds,
    roi_bounds: ConfidenceBounds,
    intersected: IntersectedBounds,
):
    """Score the eligible candidates; returns (scores, eligible indices)."""
    eligible = _eligible_indices(state, spec.scope)
    fam = spec.family

    def slice_bounds(bounds):
        pos = np.searchsorted(bounds.indices, eligible)
        return pos

    if fam == "ici" or (fam == "ciwidth" and spec.scope == "intersect"):
        pos = slice_bounds(intersected)
        return intersected.width[pos], eligible
    if fam in ("rci", "ciwidth"):
        bounds = roi_bounds if spec.scope == "roi" else global_bounds
        return bounds.width[slice_bounds(bounds)], eligible
    if fam == "ucb":
        # acquisition bounds are built with beta_sqrt_acq, so UCB is direct
        if spec.scope == "intersect":
            pos = slice_bounds(intersected)
            return intersected.ucb[pos], eligible
        bounds = roi_bounds if spec.scope == "roi" else global_bounds
        return bounds.ucb[slice_bounds(bounds)], eligible
    if fam in ("ts", "rts"):
        model = state.roi_model if spec.scope in ("roi", "intersect") else state.global_model
        if eligible.size > TS_JOINT_SAMPLE_CAP:
            sub = np.sort(
                state.rng_acq.choice(eligible, TS_JOINT_SAMPLE_CAP, replace=False)
            )
            draw = sample_posterior(model, state.features[sub], state.rng_acq)
            scores = np.full(eligible.size, -np.inf)
            scores[np.searchsorted(eligible, sub)] = draw
            return scores, eligible
        return sample_posterior(model, state.features[eligible], state.rng_acq), eligible
    if fam == "ei":
        model = state.roi_model if spec.scope in ("roi", "intersect") else state.global_model
        summary = posterior_mean_var(model, state.features[eligible])
        best = max(state.observed_y)
        improve = summary.mean - best
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(summary.std > 0, improve / summary.std, 0.0)
        ei = improve * _norm_cdf(z) + summary.std * _norm_pdf(z)
        return np.where(summary.std > 0, ei, 0.0), eligible
    raise ValueError(f"unknown acquisition family {fam!r}")


def select_next(scores, eligible) -> int:
    """Argmax with deterministic lowest-pool-index tie-breaking."""
    scores = np.asarray(scores, dtype=float)
    eligible = np.asarray(eligible, dtype=int)
    if eligible.size == 0:
        raise PoolExhaustedError("empty candidate set")
    best = np.max(scores)
    return int(np.min(eligible[scores == best]))


def ci_width_estimate(bounds) -> float:
    """Optimum-value interval width: max UCB minus max LCB, clamped at 0."""
    return max(float(np.max(bounds.ucb)) - float(np.max(bounds.lcb)), 0.0)


def _filter_beta_sqrt(cfg: LoopConfig, t: int, pool_size: int) -> float:
    if cfg.filter_schedule:
        return math.sqrt(beta_schedule(t, pool_size, cfg.delta))
    return cfg.beta_sqrt_filter


def loop_step(state: LoopState, cfg: LoopConfig):
    """One full iteration: fit, filter, partition, refit, score, observe.

    Mutates and returns the state, together with the chosen pool index
    and the step diagnostics.
    """
    t = state.t + 1
    sel = np.asarray(state.selected_indices, dtype=int)
    if sel.size < 1:
        raise ValueError("warm-up observations required before stepping")
    X = state.features[sel]
    y = np.asarray(state.observed_y, dtype=float)

    refit_due = state.hyper_global is None or (t - 1) % cfg.refit_interval == 0
    if refit_due and sel.size >= 2:
        state.hyper_global = optimize_hyperparams(
            X, y, state.hyper_global or cfg.init_hyperparams,
            cfg.budget, state.rng_hyper,
        )
    elif state.hyper_global is None:
        state.hyper_global = cfg.init_hyperparams
    state.global_model = fit_posterior(
        X, y, state.hyper_global, standardize=cfg.standardize
    )

    all_idx = np.arange(state.pool_size)
    beta_f = _filter_beta_sqrt(cfg, t, state.pool_size)
    gb_filter = confidence_bounds(
        state.global_model, state.features, all_idx, beta_f, "global"
    )
    state.roi = filter_roi(gb_filter)
    # without-replacement selection can leave the ROI fully observed; extend
    # it by the best-UCB unselected candidate rather than aborting the run
    if np.setdiff1d(state.roi.indices, sel).size == 0 and sel.size < state.pool_size:
        unsel = np.setdiff1d(all_idx, sel)
        extra = unsel[np.argmax(gb_filter.ucb[unsel])]
        indices = np.sort(np.append(state.roi.indices, extra))
        state.roi = RegionOfInterest(
            indices=indices,
            threshold=state.roi.threshold,
            ratio=indices.size / state.pool_size,
        )

    in_roi = partition_observations(sel, state.roi)
    if in_roi.size == sel.size or in_roi.size < 2:
        # ROI data equals the full history, or is too small for its own GP
        state.roi_model = state.global_model
        state.hyper_roi = state.hyper_global
    else:
        if refit_due or state.hyper_roi is None:
            state.hyper_roi = optimize_hyperparams(
                X[in_roi], y[in_roi], state.hyper_roi or cfg.init_hyperparams,
                cfg.budget, state.rng_hyper,
            )
        state.roi_model = fit_posterior(
            X[in_roi], y[in_roi], state.hyper_roi, standardize=cfg.standardize
        )

    beta_a = cfg.acquisition.beta_sqrt_acq
    gb_acq = confidence_bounds(
        state.global_model, state.features, all_idx, beta_a, "global"
    )
    rb_acq = confidence_bounds(
        state.roi_model, state.features, state.roi.indices, beta_a, "roi"
    )
    ib = intersect_bounds(gb_acq, rb_acq, state.roi)
    if cfg.intersection_mode == "historical":
        ib = intersect_bounds_historical(state.historical, ib)
        state.historical = ib

    # optimum-interval diagnostics at the trace beta, before observing
    gb_tr = confidence_bounds(
        state.global_model, state.features, all_idx, cfg.beta_sqrt_trace, "global"
    )
    rb_tr = confidence_bounds(
        state.roi_model, state.features, state.roi.indices, cfg.beta_sqrt_trace, "roi"
    )
    ib_tr = intersect_bounds(gb_tr, rb_tr, state.roi)
    diag = StepDiagnostics(
        roi_ratio=state.roi.ratio,
        roi_threshold=state.roi.threshold,
        width_global=ci_width_estimate(gb_tr),
        width_roi=ci_width_estimate(rb_tr),
        width_intersect=ci_width_estimate(ib_tr),
    )

    scores, eligible = acquisition_scores(state, cfg.acquisition, gb_acq, rb_acq, ib)
    chosen = select_next(scores, eligible)
    y_obs = float(state.labels[chosen])
    if cfg.noise_std > 0:
        y_obs += cfg.noise_std * float(state.rng_noise.standard_normal())
    state.selected_indices.append(chosen)
    state.observed_y.append(y_obs)
    state.t = t
    return state, chosen, diag
