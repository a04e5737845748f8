"""Multi-output Gaussian-process regression on block Gram matrices.

Observations of a K-component field at N points are flattened
point-major (all components of point 1, then point 2, ...), matching the
K x K blocks produced by the matrix kernels.  Factorization adds noise
variance on the diagonal and escalates a small jitter when the matrix is
numerically semidefinite; the jitter actually used is recorded on the
model so experiments can report it.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize

from .kernels import SeHyperparams

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))


class NotPositiveDefinite(Exception):
    """Factorization failed even after the maximum jitter escalation."""


@dataclass(frozen=True)
class JitterPolicy:
    """Diagonal-inflation schedule: base_scale * tr(M)/dim * 10^k, k = 0..max_escalations."""

    base_scale: float = 1e-12
    max_escalations: int = 6


DEFAULT_JITTER = JitterPolicy()


@dataclass
class Dataset:
    """Training data: inputs (N, D), outputs (N, K), and the noise level."""

    inputs: np.ndarray
    outputs: np.ndarray
    noise_std: float = 0.0

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        outputs = np.asarray(self.outputs, dtype=float)
        if outputs.ndim == 1:
            outputs = outputs[:, None]
        self.outputs = outputs
        if self.inputs.shape[0] != self.outputs.shape[0]:
            raise ValueError("inputs and outputs disagree on the number of points")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.outputs))):
            raise ValueError("data must be finite")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")

    @property
    def n_points(self):
        return self.inputs.shape[0]

    @property
    def in_dim(self):
        return self.inputs.shape[1]

    @property
    def out_dim(self):
        return self.outputs.shape[1]

    @property
    def y_flat(self):
        return self.outputs.reshape(-1)


@dataclass
class PredictionResult:
    """Posterior means and marginal variances, both (M, K)."""

    means: np.ndarray
    marginal_variances: np.ndarray
    covariance: np.ndarray | None = None


def assemble_gram(kernel, X, noise_variance=0.0):
    """Block Gram matrix of a matrix kernel with noise on the diagonal."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    k = kernel.eval_pairwise(X, X)
    n, _, r, c = k.shape
    if r != c:
        raise ValueError("Gram assembly needs a square kernel")
    gram = k.transpose(0, 2, 1, 3).reshape(n * r, n * r)
    if noise_variance:
        gram = gram + noise_variance * np.eye(n * r)
    return gram


def cross_gram(kernel, X1, X2):
    """Cross-covariance block matrix, shape (N1*rows, N2*cols)."""
    X1 = np.atleast_2d(np.asarray(X1, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    k = kernel.eval_pairwise(X1, X2)
    n1, n2, r, c = k.shape
    return k.transpose(0, 2, 1, 3).reshape(n1 * r, n2 * c)


def cholesky_jitter(M, policy=DEFAULT_JITTER):
    """Lower Cholesky factor with escalating jitter.

    Returns (L, jitter_used).  Raises NotPositiveDefinite when the
    largest jitter in the schedule still fails.
    """
    M = np.asarray(M, dtype=float)
    dim = M.shape[0]
    try:
        return np.linalg.cholesky(M), 0.0
    except np.linalg.LinAlgError:
        pass
    scale = np.trace(M) / dim
    if scale <= 0:
        scale = 1.0
    jitter = policy.base_scale * scale
    for _ in range(policy.max_escalations + 1):
        try:
            L = np.linalg.cholesky(M + jitter * np.eye(dim))
            logger.debug("cholesky needed jitter %.3e", jitter)
            return L, jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NotPositiveDefinite(
        f"matrix not factorizable after jitter escalation to {jitter / 10.0:.3e}"
    )


class GpModel:
    """A fitted GP: kernel, training data, and the factored Gram matrix."""

    def __init__(self, kernel, data, L, alpha, noise_variance, jitter):
        self.kernel = kernel
        self.data = data
        self.L = L
        self.alpha = alpha
        self.noise_variance = noise_variance
        self.jitter = jitter

    @property
    def theta(self):
        return self.kernel.theta


def fit_gp(data, kernel, noise_variance=None, jitter_policy=DEFAULT_JITTER):
    """Factor the training Gram matrix and solve for the prediction weights."""
    if noise_variance is None:
        noise_variance = data.noise_std ** 2
    gram = assemble_gram(kernel, data.inputs, noise_variance)
    L, jitter = cholesky_jitter(gram, jitter_policy)
    alpha = cho_solve((L, True), data.y_flat)
    return GpModel(kernel, data, L, alpha, noise_variance, jitter)


def log_marginal_likelihood(model):
    """Gaussian log evidence of the training outputs under the model."""
    y = model.data.y_flat
    n = y.size
    return float(
        -0.5 * y @ model.alpha
        - np.sum(np.log(np.diag(model.L)))
        - 0.5 * n * LOG_2PI
    )


def predict(model, Xstar, full_cov=False):
    """Posterior mean and marginal variance of the field at new points."""
    Xstar = np.atleast_2d(np.asarray(Xstar, dtype=float))
    k_out = model.data.out_dim
    C = cross_gram(model.kernel, Xstar, model.data.inputs)
    means = (C @ model.alpha).reshape(Xstar.shape[0], k_out)
    v = solve_triangular(model.L, C.T, lower=True)
    prior_diag = np.concatenate([
        np.diag(model.kernel.eval(x, x)) for x in Xstar])
    variances = prior_diag - np.sum(v * v, axis=0)
    covariance = None
    if full_cov:
        prior_full = cross_gram(model.kernel, Xstar, Xstar)
        covariance = prior_full - v.T @ v
    return PredictionResult(
        means=means,
        marginal_variances=_clamp_variances(variances).reshape(Xstar.shape[0], k_out),
        covariance=covariance,
    )


def _clamp_variances(var):
    worst = var.min(initial=0.0)
    if worst < -1e-10:
        logger.warning("clamping negative predictive variance %.3e to 0", worst)
    return np.maximum(var, 0.0)


# ---------------------------------------------------------------------------
# hyperparameter fitting


@dataclass
class OptConfig:
    """Settings for the derivative-free marginal-likelihood search."""

    restarts: int = 2
    seed: int = 0
    maxiter: int = 200
    xatol: float = 1e-3
    fatol: float = 1e-3
    learn_noise: bool = False
    signal_std_bounds: tuple | None = None
    length_scale_bounds: tuple | None = None
    noise_std_bounds: tuple = (1e-5, 1.0)


@dataclass
class FitResult:
    """Best hyperparameters found plus the optimizer's bookkeeping."""

    theta: SeHyperparams
    lml: float
    trace: list = field(default_factory=list)
    n_evals: int = 0


def fit_hyperparameters(data, kernel_family, init, opt_config=None):
    """Maximize the log marginal likelihood over log-hyperparameters.

    Runs a Nelder-Mead simplex on (log signal std, log length scale, and
    optionally log noise std) from ``init`` plus ``restarts - 1`` random
    log-uniform starting points.  Deterministic for a fixed seed.

    Parameters
    ----------
    kernel_family : callable mapping SeHyperparams to a matrix kernel.
    init : SeHyperparams starting point; its noise_variance is kept fixed
        unless ``opt_config.learn_noise`` is set.
    """
    cfg = opt_config or OptConfig()
    rng = np.random.default_rng(cfg.seed)
    sf_bounds, ls_bounds = _default_bounds(data, cfg)

    fixed_noise = init.noise_variance
    best_trace = []
    state = {"best": -np.inf, "n": 0}

    def theta_of(z):
        sv = np.exp(2.0 * z[0])
        ls = np.exp(z[1])
        nv = np.exp(2.0 * z[2]) if cfg.learn_noise else fixed_noise
        return SeHyperparams(signal_variance=sv, length_scale=ls, noise_variance=nv)

    def objective(z):
        state["n"] += 1
        try:
            theta = theta_of(z)
            model = fit_gp(data, kernel_family(theta), noise_variance=theta.noise_variance)
            lml = log_marginal_likelihood(model)
        except (NotPositiveDefinite, ValueError, FloatingPointError,
                np.linalg.LinAlgError, OverflowError):
            lml = -np.inf
        if np.isnan(lml):
            lml = -np.inf
        if lml > state["best"]:
            state["best"] = lml
        best_trace.append(state["best"])
        return -lml

    z0 = [np.log(np.sqrt(init.signal_variance)), np.log(init.length_scale)]
    if cfg.learn_noise:
        z0.append(np.log(max(np.sqrt(fixed_noise), cfg.noise_std_bounds[0])))
    starts = [np.array(z0)]
    for _ in range(max(cfg.restarts - 1, 0)):
        z = [rng.uniform(np.log(sf_bounds[0]), np.log(sf_bounds[1])),
             rng.uniform(np.log(ls_bounds[0]), np.log(ls_bounds[1]))]
        if cfg.learn_noise:
            z.append(rng.uniform(np.log(cfg.noise_std_bounds[0]),
                                 np.log(cfg.noise_std_bounds[1])))
        starts.append(np.array(z))

    best_z, best_val = None, np.inf
    for z_start in starts:
        res = minimize(objective, z_start, method="Nelder-Mead",
                       options={"maxiter": cfg.maxiter, "xatol": cfg.xatol,
                                "fatol": cfg.fatol, "adaptive": True})
        if res.fun < best_val:
            best_val, best_z = res.fun, res.x
    if best_z is None or not np.isfinite(best_val):
        raise RuntimeError("hyperparameter search failed on every restart")
    return FitResult(theta=theta_of(best_z), lml=-best_val,
                     trace=best_trace, n_evals=state["n"])


def _default_bounds(data, cfg):
    if cfg.signal_std_bounds and cfg.length_scale_bounds:
        return cfg.signal_std_bounds, cfg.length_scale_bounds
    y_scale = max(float(np.std(data.outputs)), 1e-8)
    span = float(np.max(np.ptp(data.inputs, axis=0)))
    span = span if span > 0 else 1.0
    sf = cfg.signal_std_bounds or (1e-2 * y_scale, 1e2 * y_scale)
    ls = cfg.length_scale_bounds or (5e-2 * span, 2.0 * span)
    return sf, ls


def model_to_json_dict(model, kernel_spec=None, data_ref=None):
    """Serializable description of a fitted model for reproducibility."""
    return {
        "hyperparams": model.theta.to_dict(),
        "kernel_spec": kernel_spec,
        "training_data": data_ref,
        "n_points": model.data.n_points,
        "out_dim": model.data.out_dim,
        "noise_variance": model.noise_variance,
        "jitter": model.jitter,
    }
