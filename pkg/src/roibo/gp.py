"""Exact Gaussian process regression on numpy arrays.

Kernels, Cholesky-based posterior inference, marginal likelihood,
derivative-free hyperparameter search, and joint posterior sampling.
All randomness goes through an explicit numpy Generator; fitted models
are immutable and safe to share across threads.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

NOISE_FLOOR = 1e-6

# log-space search bounds for hyperparameter optimization
LOG_LENGTHSCALE_BOUNDS = (math.log(1e-3), math.log(1e3))
LOG_OUTPUTSCALE_BOUNDS = (math.log(1e-4), math.log(1e4))
LOG_NOISE_BOUNDS = (math.log(1e-6), math.log(1e1))


class GPNumericalError(RuntimeError):
    """Cholesky factorization failed even after jitter escalation."""


@dataclass(frozen=True)
class RBFKernel:
    """Squared-exponential kernel: outputscale * exp(-||x-x'||^2 / (2 l^2))."""

    outputscale: float = 1.0
    lengthscale: float = 1.0

    def __post_init__(self):
        if self.outputscale <= 0 or self.lengthscale <= 0:
            raise ValueError("outputscale and lengthscale must be positive")

    def __call__(self, X, X2=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        X2 = X if X2 is None else np.atleast_2d(np.asarray(X2, dtype=float))
        if X.shape[1] != X2.shape[1]:
            raise ValueError(
                f"dimension mismatch: {X.shape[1]} vs {X2.shape[1]}"
            )
        sq = (
            np.sum(X**2, axis=1)[:, None]
            + np.sum(X2**2, axis=1)[None, :]
            - 2.0 * X @ X2.T
        )
        np.clip(sq, 0.0, None, out=sq)
        return self.outputscale * np.exp(-0.5 * sq / self.lengthscale**2)

    def diag(self, X):
        X = np.atleast_2d(X)
        return np.full(X.shape[0], self.outputscale)


@dataclass(frozen=True)
class LinearKernel:
    """Linear kernel: variance * <x, x'> + bias_variance."""

    variance: float = 1.0
    bias_variance: float = 0.0

    def __post_init__(self):
        if self.variance <= 0:
            raise ValueError("variance must be positive")
        if self.bias_variance < 0:
            raise ValueError("bias_variance must be non-negative")

    def __call__(self, X, X2=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        X2 = X if X2 is None else np.atleast_2d(np.asarray(X2, dtype=float))
        if X.shape[1] != X2.shape[1]:
            raise ValueError(
                f"dimension mismatch: {X.shape[1]} vs {X2.shape[1]}"
            )
        return self.variance * (X @ X2.T) + self.bias_variance

    def diag(self, X):
        X = np.atleast_2d(X)
        return self.variance * np.sum(X**2, axis=1) + self.bias_variance


Kernel = RBFKernel | LinearKernel


def kernel_eval(kernel, x, x2):
    """Evaluate the kernel on a single pair of points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x.shape != x2.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x2.shape}")
    return float(kernel(x[None, :], x2[None, :])[0, 0])


def kernel_matrix(kernel, X, X2=None):
    """Cross-kernel matrix; X may be empty (returns a 0 x m matrix)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X2 is None:
        X2 = X
    else:
        X2 = np.asarray(X2, dtype=float)
        if X2.ndim == 1:
            X2 = X2[:, None]
    if X.shape[0] == 0 or X2.shape[0] == 0:
        if X.shape[0] and X.shape[1] != X2.shape[1]:
            raise ValueError("dimension mismatch")
        return np.zeros((X.shape[0], X2.shape[0]))
    return kernel(X, X2)


@dataclass(frozen=True)
class GPHyperparams:
    kernel: Kernel
    noise_variance: float = 1e-2

    def __post_init__(self):
        # clamp at the noise floor rather than rejecting tiny values
        object.__setattr__(
            self, "noise_variance", max(float(self.noise_variance), NOISE_FLOOR)
        )


def _chol_with_jitter(A):
    """Cholesky of a symmetric PSD matrix, escalating jitter on failure.

    Returns (L, jitter_used). Jitter starts at 1e-8 * mean(diag) and is
    escalated x10 up to 1e-2 * mean(diag).
    """
    scale = float(np.mean(np.diag(A)))
    if not np.isfinite(scale) or scale <= 0:
        scale = 1.0
    try:
        return np.linalg.cholesky(A), 0.0
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-8 * scale
    max_jitter = 1e-2 * scale
    n = A.shape[0]
    while jitter <= max_jitter * (1 + 1e-12):
        try:
            return np.linalg.cholesky(A + jitter * np.eye(n)), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise GPNumericalError(
        f"Cholesky factorization failed after jitter escalation to {jitter:.3e}"
    )


@dataclass(frozen=True)
class GPModel:
    """Fitted GP posterior. n == 0 denotes the prior."""

    train_inputs: np.ndarray
    train_targets: np.ndarray  # raw (un-standardized) targets
    hyperparams: GPHyperparams
    chol_factor: np.ndarray
    alpha: np.ndarray
    y_shift: float = 0.0
    y_scale: float = 1.0
    jitter: float = 0.0

    @property
    def n(self):
        return self.train_inputs.shape[0]


@dataclass(frozen=True)
class PosteriorSummary:
    mean: np.ndarray
    std: np.ndarray


def fit_posterior(X, y, hyper: GPHyperparams, standardize: bool = False) -> GPModel:
    """Factorize K + sigma^2 I and precompute alpha = (K + sigma^2 I)^-1 y."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    n = X.shape[0]
    if y.shape[0] != n:
        raise ValueError("X and y row counts differ")

    shift, scale = 0.0, 1.0
    if standardize and n >= 2:
        shift = float(np.mean(y))
        s = float(np.std(y))
        if s > 0:
            scale = s
    z = (y - shift) / scale

    if n == 0:
        return GPModel(
            train_inputs=X,
            train_targets=y,
            hyperparams=hyper,
            chol_factor=np.zeros((0, 0)),
            alpha=np.zeros(0),
        )

    K = kernel_matrix(hyper.kernel, X) + hyper.noise_variance * np.eye(n)
    L, jitter = _chol_with_jitter(K)
    alpha = cho_solve((L, True), z)
    return GPModel(
        train_inputs=X,
        train_targets=y,
        hyperparams=hyper,
        chol_factor=L,
        alpha=alpha,
        y_shift=shift,
        y_scale=scale,
        jitter=jitter,
    )


def posterior_mean_var(model: GPModel, Xq) -> PosteriorSummary:
    """Point-wise posterior mean and standard deviation at query points."""
    Xq = np.asarray(Xq, dtype=float)
    if Xq.ndim == 1:
        Xq = Xq[:, None]
    kern = model.hyperparams.kernel
    prior_var = kern.diag(Xq)
    if model.n == 0:
        mean = np.full(Xq.shape[0], model.y_shift)
        return PosteriorSummary(mean=mean, std=np.sqrt(prior_var) * model.y_scale)
    Ks = kernel_matrix(kern, model.train_inputs, Xq)
    mean_z = Ks.T @ model.alpha
    v = solve_triangular(model.chol_factor, Ks, lower=True)
    var = prior_var - np.sum(v**2, axis=0)
    np.clip(var, 0.0, None, out=var)
    mean = mean_z * model.y_scale + model.y_shift
    std = np.sqrt(var) * model.y_scale
    return PosteriorSummary(mean=mean, std=std)


def posterior_cov(model: GPModel, Xq) -> np.ndarray:
    """Full posterior covariance over the query points (target scale)."""
    Xq = np.asarray(Xq, dtype=float)
    if Xq.ndim == 1:
        Xq = Xq[:, None]
    kern = model.hyperparams.kernel
    Kss = kernel_matrix(kern, Xq)
    if model.n == 0:
        return Kss * model.y_scale**2
    Ks = kernel_matrix(kern, model.train_inputs, Xq)
    v = solve_triangular(model.chol_factor, Ks, lower=True)
    cov = Kss - v.T @ v
    cov = 0.5 * (cov + cov.T)
    return cov * model.y_scale**2


def neg_log_marginal_likelihood(X, y, hyper: GPHyperparams) -> float:
    """0.5 y'(K+s2 I)^-1 y + 0.5 log det(K+s2 I) + (n/2) log 2pi."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    n = X.shape[0]
    if n < 1:
        raise ValueError("need at least one observation")
    K = kernel_matrix(hyper.kernel, X) + hyper.noise_variance * np.eye(n)
    L, _ = _chol_with_jitter(K)
    alpha = cho_solve((L, True), y)
    return float(
        0.5 * y @ alpha
        + np.sum(np.log(np.diag(L)))
        + 0.5 * n * math.log(2.0 * math.pi)
    )


@dataclass(frozen=True)
class OptimizerBudget:
    n_restarts: int = 8
    n_sweeps: int = 25  # coordinate-descent sweeps per start
    min_step: float = 1e-3  # log-space step below which a start stops


def _hyper_to_logparams(hyper: GPHyperparams):
    k = hyper.kernel
    if isinstance(k, RBFKernel):
        vals = [math.log(k.outputscale), math.log(k.lengthscale)]
        bounds = [LOG_OUTPUTSCALE_BOUNDS, LOG_LENGTHSCALE_BOUNDS]
    else:
        vals = [math.log(k.variance)]
        bounds = [LOG_OUTPUTSCALE_BOUNDS]
    vals.append(math.log(hyper.noise_variance))
    bounds.append(LOG_NOISE_BOUNDS)
    return np.array(vals), bounds


def _logparams_to_hyper(p, template: GPHyperparams) -> GPHyperparams:
    k = template.kernel
    if isinstance(k, RBFKernel):
        kernel = RBFKernel(outputscale=math.exp(p[0]), lengthscale=math.exp(p[1]))
        noise = math.exp(p[2])
    else:
        kernel = LinearKernel(
            variance=math.exp(p[0]), bias_variance=k.bias_variance
        )
        noise = math.exp(p[1])
    return GPHyperparams(kernel=kernel, noise_variance=noise)


def optimize_hyperparams(
    X, y, init: GPHyperparams, budget: OptimizerBudget, rng: np.random.Generator
) -> GPHyperparams:
    """Multi-start derivative-free NLL minimization in log-parameter space.

    Returns hyperparameters whose NLL is never worse than init's. With
    n_restarts == 0 the init is returned unchanged.
    """
    if budget.n_restarts == 0:
        return init
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] < 2:
        raise ValueError("need at least two observations to fit hyperparameters")

    def objective(p):
        try:
            return neg_log_marginal_likelihood(X, y, _logparams_to_hyper(p, init))
        except (GPNumericalError, FloatingPointError, ValueError):
            return math.inf

    p0, bounds = _hyper_to_logparams(init)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    starts = [np.clip(p0, lo, hi)]
    for _ in range(budget.n_restarts):
        starts.append(lo + rng.random(len(p0)) * (hi - lo))

    best_p, best_f = None, math.inf
    for start in starts:
        p = start.copy()
        f = objective(p)
        step = 1.0
        for _ in range(budget.n_sweeps):
            improved = False
            for j in range(len(p)):
                for sign in (1.0, -1.0):
                    cand = p.copy()
                    cand[j] = np.clip(cand[j] + sign * step, lo[j], hi[j])
                    fc = objective(cand)
                    if fc < f - 1e-12:
                        p, f = cand, fc
                        improved = True
            if not improved:
                step *= 0.5
                if step < budget.min_step:
                    break
        if f < best_f:
            best_p, best_f = p, f

    f_init = objective(np.clip(p0, lo, hi))
    if not math.isfinite(best_f):
        warnings.warn("all hyperparameter candidates failed; returning init")
        return init
    if best_f >= f_init and math.isfinite(f_init):
        return init
    return _logparams_to_hyper(best_p, init)


def sample_posterior(model: GPModel, Xq, rng: np.random.Generator, size=None):
    """Joint posterior draw(s) at the query points: mean + L z.

    With size=None returns one vector of length m; with an integer size
    returns a (size, m) array sharing one covariance factorization.
    """
    Xq = np.asarray(Xq, dtype=float)
    if Xq.ndim == 1:
        Xq = Xq[:, None]
    m = Xq.shape[0]
    if m < 1:
        raise ValueError("need at least one query point")
    summary = posterior_mean_var(model, Xq)
    cov = posterior_cov(model, Xq)
    # degenerate (numerically zero) covariance still needs a valid factor
    base = max(float(np.mean(np.diag(cov))), 1e-12)
    L = None
    jitter = 1e-10 * base
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        while L is None:
            if jitter > 1e-2 * base:
                raise GPNumericalError(
                    "posterior covariance factorization failed"
                )
            try:
                L = np.linalg.cholesky(cov + jitter * np.eye(m))
            except np.linalg.LinAlgError:
                jitter *= 10.0
    if size is None:
        z = rng.standard_normal(m)
        return summary.mean + L @ z
    z = rng.standard_normal((size, m))
    return summary.mean[None, :] + z @ L.T
