"""Benchmark protocols comparing constraint-aware and plain GP regression.

Two pipelines are provided.  The simulated pipeline draws noisy samples
of a known divergence-free planar field, reconstructs it on a regular
grid with a diagonal kernel, a constraint-transformed kernel, and a
diagonal kernel augmented with artificial constraint observations, and
reports root-mean-square errors per method.  The real-data pipeline runs
the analogous comparison for 3-D curl-free fields (e.g. magnetic-field
maps) on a CSV dataset with repeated random train/test splits.

All randomness is derived from one seed, so reports are reproducible
byte for byte.  Wall-clock timing is off by default for the same reason
and can be enabled per config.
"""

import csv
import json
import logging
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .baseline import augment, predict_augmented
from .gp import Dataset, NotPositiveDefinite, OptConfig, fit_gp, fit_hyperparameters, predict
from .kernels import CurlFreeKernel, DiagonalKernel, SeHyperparams, transform_kernel
from .operators import construct_g, make_curl_operator_3d, make_divergence_operator

logger = logging.getLogger(__name__)

SIM_METHODS = ("diagonal", "constrained", "artificial")
REAL_METHODS = ("diagonal", "curl_free", "artificial")

RMSE_CSV_HEADER = ("method", "nc", "mean", "std", "n_ok", "jitter", "seconds")


@dataclass
class ExperimentConfig:
    """Protocol parameters for the simulated and real-data pipelines."""

    domain: tuple = ((0.0, 4.0), (0.0, 4.0))
    n_train: int = 50
    nc_schedule: tuple = (25, 50, 100, 200, 400)
    grid_size: int = 20
    noise_std: float = 1e-4
    field_param_a: float = 0.01
    repetitions: int = 10
    seed: int = 0
    methods: tuple = SIM_METHODS
    train_size: int = 500
    test_size: int = 1000
    restarts: int = 2
    maxiter: int = 120
    learn_noise: bool = False
    record_timing: bool = False

    def __post_init__(self):
        self.domain = tuple((float(lo), float(hi)) for lo, hi in self.domain)
        self.nc_schedule = tuple(int(n) for n in self.nc_schedule)
        self.methods = tuple(self.methods)
        for lo, hi in self.domain:
            if not lo < hi:
                raise ValueError("domain bounds must be ordered")
        for name, value in (("n_train", self.n_train), ("grid_size", self.grid_size),
                            ("repetitions", self.repetitions),
                            ("train_size", self.train_size),
                            ("test_size", self.test_size)):
            if value < 1:
                raise ValueError(f"{name} must be >= 1")
        if any(n < 0 for n in self.nc_schedule):
            raise ValueError("nc_schedule entries must be >= 0")

    def to_json_dict(self):
        return {
            "domain": [list(b) for b in self.domain],
            "n_train": self.n_train,
            "nc_schedule": list(self.nc_schedule),
            "grid_size": self.grid_size,
            "noise_std": self.noise_std,
            "field_param_a": self.field_param_a,
            "repetitions": self.repetitions,
            "seed": self.seed,
            "methods": list(self.methods),
            "train_size": self.train_size,
            "test_size": self.test_size,
            "restarts": self.restarts,
            "maxiter": self.maxiter,
            "learn_noise": self.learn_noise,
            "record_timing": self.record_timing,
        }

    @classmethod
    def from_json_dict(cls, doc):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(doc)
        if "domain" in kwargs:
            kwargs["domain"] = tuple(tuple(b) for b in kwargs["domain"])
        return cls(**kwargs)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass
class RmseRow:
    """Aggregated accuracy of one method at one artificial-observation count."""

    method: str
    nc: int
    mean: float
    std: float
    n_ok: int
    jitter: float
    seconds: float


@dataclass
class FieldErrorTable:
    """Per-point reconstruction errors from the first repetition."""

    points: np.ndarray                       # (Np, D)
    errors: dict                             # label -> (Np, K) signed errors


@dataclass
class RmseReport:
    rows: list = field(default_factory=list)
    field_error: FieldErrorTable | None = None


def simulated_field(x, a):
    """Known divergence-free planar field used by the simulated benchmark."""
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    s = x1 * x2
    envelope = np.exp(-a * s)
    f1 = envelope * (a * x1 * np.sin(s) - x1 * np.cos(s))
    f2 = envelope * (x2 * np.cos(s) - a * x2 * np.sin(s))
    return np.stack([f1, f2], axis=-1)


def prediction_grid(domain, grid_size):
    """Regular grid of points covering the domain, one axis per dimension."""
    axes = [np.linspace(lo, hi, grid_size) for lo, hi in domain]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=-1)


def rmse(predicted, truth):
    """Root mean squared error over the concatenated prediction vector.

    The divisor is the number of prediction points (not points times
    components), matching the reported benchmark definition.
    """
    predicted = np.asarray(predicted, dtype=float)
    truth = np.asarray(truth, dtype=float)
    diff = (predicted - truth).reshape(-1)
    return float(np.sqrt(diff @ diff / truth.shape[0]))


def _init_theta(data, noise_variance, derivative_kernel=False):
    span = float(np.max(np.ptp(data.inputs, axis=0))) or 1.0
    ls = 0.3 * span
    sv = max(float(np.var(data.outputs)), 1e-10)
    if derivative_kernel:
        # field variance of a derivative-transformed prior scales like sv/ls^2
        sv = sv * ls ** 2
    return SeHyperparams(signal_variance=sv, length_scale=ls,
                         noise_variance=noise_variance)


class _Collector:
    """Per (method, nc) accumulation of repetition outcomes."""

    def __init__(self):
        self.rmse = {}
        self.jitter = {}
        self.seconds = {}
        self.attempts = {}

    def start(self, key):
        self.attempts[key] = self.attempts.get(key, 0) + 1
        return time.perf_counter()

    def ok(self, key, t0, rmse_value, jitter, record_timing):
        elapsed = (time.perf_counter() - t0) if record_timing else 0.0
        self.rmse.setdefault(key, []).append(rmse_value)
        self.jitter.setdefault(key, []).append(jitter)
        self.seconds[key] = self.seconds.get(key, 0.0) + elapsed

    def fail(self, key, rep, exc):
        logger.warning("repetition %d failed for %s: %s", rep, key, exc)

    def rows(self, keys):
        out = []
        for key in keys:
            values = self.rmse.get(key, [])
            method, nc = key
            out.append(RmseRow(
                method=method,
                nc=nc,
                mean=float(np.mean(values)) if values else float("nan"),
                std=float(np.std(values)) if values else float("nan"),
                n_ok=len(values),
                jitter=float(np.mean(self.jitter.get(key, []))) if values else 0.0,
                seconds=self.seconds.get(key, 0.0),
            ))
        return out


_FAILURES = (NotPositiveDefinite, RuntimeError, FloatingPointError,
             np.linalg.LinAlgError)


def run_simulated(config):
    """Reconstruction benchmark on the simulated divergence-free field.

    Per repetition: draw training inputs uniformly over the domain,
    corrupt the field values with Gaussian noise, refit hyperparameters
    per method by marginal likelihood, predict on the grid, and record
    the RMSE.  Artificial-observation runs reuse the diagonal kernel fit
    and place constraint points on random subsets of the grid.
    """
    if len(config.domain) != 2:
        raise ValueError("the simulated benchmark is two-dimensional")
    keys = _result_keys(config, SIM_METHODS)
    divergence = make_divergence_operator(2)
    G, _ = construct_g(divergence)
    grid = prediction_grid(config.domain, config.grid_size)
    truth = simulated_field(grid, config.field_param_a)
    n_grid = grid.shape[0]
    noise_var = config.noise_std ** 2

    collector = _Collector()
    field_errors = {}
    rep_seeds = np.random.SeedSequence(config.seed).spawn(config.repetitions)
    for rep, rep_seed in enumerate(rep_seeds):
        rng = np.random.default_rng(rep_seed)
        lows = np.array([lo for lo, _ in config.domain])
        highs = np.array([hi for _, hi in config.domain])
        X = rng.uniform(lows, highs, size=(config.n_train, 2))
        Y = simulated_field(X, config.field_param_a) \
            + rng.normal(0.0, config.noise_std, size=(config.n_train, 2))
        data = Dataset(X, Y, noise_std=config.noise_std)
        opt = OptConfig(restarts=config.restarts, maxiter=config.maxiter,
                        learn_noise=config.learn_noise,
                        seed=int(rng.integers(2 ** 31)))

        theta_diag = None
        if "diagonal" in config.methods or "artificial" in config.methods:
            key = ("diagonal", 0)
            t0 = collector.start(key)
            try:
                fit = fit_hyperparameters(
                    data, lambda th: DiagonalKernel(th, 2),
                    _init_theta(data, noise_var), opt)
                theta_diag = fit.theta
                model = fit_gp(data, DiagonalKernel(fit.theta, 2),
                               noise_variance=fit.theta.noise_variance)
                pred = predict(model, grid)
                if "diagonal" in config.methods:
                    collector.ok(key, t0, rmse(pred.means, truth), model.jitter,
                                 config.record_timing)
                    if rep == 0:
                        field_errors["diagonal"] = pred.means - truth
            except _FAILURES as exc:
                collector.fail(key, rep, exc)

        if "constrained" in config.methods:
            key = ("constrained", 0)
            t0 = collector.start(key)
            try:
                fit = fit_hyperparameters(
                    data, lambda th: transform_kernel(G, th),
                    _init_theta(data, noise_var, derivative_kernel=True),
                    replace(opt, seed=int(rng.integers(2 ** 31))))
                model = fit_gp(data, transform_kernel(G, fit.theta),
                               noise_variance=fit.theta.noise_variance)
                pred = predict(model, grid)
                collector.ok(key, t0, rmse(pred.means, truth), model.jitter,
                             config.record_timing)
                if rep == 0:
                    field_errors["constrained"] = pred.means - truth
            except _FAILURES as exc:
                collector.fail(key, rep, exc)

        if "artificial" in config.methods and theta_diag is not None:
            expr = DiagonalKernel(theta_diag, 2).as_expr(2)
            data_aug = Dataset(X, Y, noise_std=float(
                np.sqrt(theta_diag.noise_variance)))
            for nc in config.nc_schedule:
                key = ("artificial", nc)
                t0 = collector.start(key)
                try:
                    pts = grid[rng.choice(n_grid, size=min(nc, n_grid),
                                          replace=False)]
                    problem = augment(data_aug, divergence, pts, expr)
                    pred = predict_augmented(problem, grid)
                    collector.ok(key, t0, rmse(pred.means, truth),
                                 problem.jitter, config.record_timing)
                    if rep == 0 and nc == max(config.nc_schedule):
                        field_errors[f"artificial_nc{nc}"] = pred.means - truth
                except _FAILURES as exc:
                    collector.fail(key, rep, exc)

    table = FieldErrorTable(points=grid, errors=field_errors) if field_errors else None
    return RmseReport(rows=collector.rows(keys), field_error=table)


def _result_keys(config, known_methods):
    keys = []
    for method in config.methods:
        if method not in known_methods:
            raise ValueError(f"unknown method {method!r}; expected {known_methods}")
        if method == "artificial":
            keys.extend(("artificial", nc) for nc in config.nc_schedule)
        else:
            keys.append((method, 0))
    return keys


def run_real_data(config, dataset_path):
    """Train/test benchmark for 3-D curl-free field data from a CSV file.

    Each repetition draws a disjoint random train/test split, fits each
    requested method (closed-form curl-free kernel, diagonal kernel, and
    diagonal kernel with artificial curl observations at random subsets
    of the test points), and reports the RMSE over the test set.
    """
    keys = _result_keys(config, REAL_METHODS)
    X, B = load_field_csv(dataset_path)
    needed = config.train_size + config.test_size
    if X.shape[0] < needed:
        raise ValueError(
            f"dataset has {X.shape[0]} rows; need train+test = {needed}")
    curl = make_curl_operator_3d()
    noise_var = config.noise_std ** 2

    collector = _Collector()
    rep_seeds = np.random.SeedSequence(config.seed).spawn(config.repetitions)
    for rep, rep_seed in enumerate(rep_seeds):
        rng = np.random.default_rng(rep_seed)
        perm = rng.permutation(X.shape[0])
        train_idx = perm[:config.train_size]
        test_idx = perm[config.train_size:needed]
        data = Dataset(X[train_idx], B[train_idx], noise_std=config.noise_std)
        X_test, B_test = X[test_idx], B[test_idx]
        opt = OptConfig(restarts=config.restarts, maxiter=config.maxiter,
                        learn_noise=config.learn_noise,
                        seed=int(rng.integers(2 ** 31)))

        theta_diag = None
        if "diagonal" in config.methods or "artificial" in config.methods:
            key = ("diagonal", 0)
            t0 = collector.start(key)
            try:
                fit = fit_hyperparameters(
                    data, lambda th: DiagonalKernel(th, 3),
                    _init_theta(data, noise_var), opt)
                theta_diag = fit.theta
                model = fit_gp(data, DiagonalKernel(fit.theta, 3),
                               noise_variance=fit.theta.noise_variance)
                pred = predict(model, X_test)
                if "diagonal" in config.methods:
                    collector.ok(key, t0, rmse(pred.means, B_test), model.jitter,
                                 config.record_timing)
            except _FAILURES as exc:
                collector.fail(key, rep, exc)

        if "curl_free" in config.methods:
            key = ("curl_free", 0)
            t0 = collector.start(key)
            try:
                fit = fit_hyperparameters(
                    data, CurlFreeKernel, _init_theta(data, noise_var),
                    replace(opt, seed=int(rng.integers(2 ** 31))))
                model = fit_gp(data, CurlFreeKernel(fit.theta),
                               noise_variance=fit.theta.noise_variance)
                pred = predict(model, X_test)
                collector.ok(key, t0, rmse(pred.means, B_test), model.jitter,
                             config.record_timing)
            except _FAILURES as exc:
                collector.fail(key, rep, exc)

        if "artificial" in config.methods and theta_diag is not None:
            expr = DiagonalKernel(theta_diag, 3).as_expr(3)
            data_aug = Dataset(X[train_idx], B[train_idx], noise_std=float(
                np.sqrt(theta_diag.noise_variance)))
            for nc in config.nc_schedule:
                key = ("artificial", nc)
                t0 = collector.start(key)
                try:
                    pts = X_test[rng.choice(config.test_size,
                                            size=min(nc, config.test_size),
                                            replace=False)]
                    problem = augment(data_aug, curl, pts, expr)
                    pred = predict_augmented(problem, X_test)
                    collector.ok(key, t0, rmse(pred.means, B_test),
                                 problem.jitter, config.record_timing)
                except _FAILURES as exc:
                    collector.fail(key, rep, exc)

    return RmseReport(rows=collector.rows(keys))


# ---------------------------------------------------------------------------
# dataset I/O and synthetic stand-in data


FIELD_CSV_COLUMNS = ("x1", "x2", "x3", "b1", "b2", "b3")


def load_field_csv(path):
    """Load position/field data from a CSV with header x1,x2,x3,b1,b2,b3."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty CSV") from None
        header = [h.strip() for h in header]
        try:
            cols = [header.index(name) for name in FIELD_CSV_COLUMNS]
        except ValueError:
            raise ValueError(
                f"{path}: header must contain columns {FIELD_CSV_COLUMNS}") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(row[c]) for c in cols])
            except (ValueError, IndexError):
                raise ValueError(f"{path}: bad row at line {lineno}") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    arr = np.array(rows)
    return arr[:, :3], arr[:, 3:]


def write_field_csv(path, X, B):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FIELD_CSV_COLUMNS)
        for x, b in zip(np.asarray(X), np.asarray(B)):
            writer.writerow([repr(float(v)) for v in (*x, *b)])


def synthetic_curl_free_field(n_points, seed=0, n_bumps=40,
                              domain=((0.0, 4.0), (0.0, 4.0), (0.0, 2.0)),
                              bump_scale=1.2, noise_std=1e-3):
    """Sample a curl-free field: the gradient of a random smooth potential.

    The potential is a sum of Gaussian bumps with random centers and
    weights, so its gradient is available in closed form and is exactly
    curl-free.  Returns (X, B) with measurement noise already added.
    """
    rng = np.random.default_rng(seed)
    lows = np.array([lo for lo, _ in domain])
    highs = np.array([hi for _, hi in domain])
    centers = rng.uniform(lows - 0.5, highs + 0.5, size=(n_bumps, len(domain)))
    weights = rng.normal(0.0, 1.0, size=n_bumps)
    X = rng.uniform(lows, highs, size=(n_points, len(domain)))
    B = potential_gradient(X, centers, weights, bump_scale)
    return X, B + rng.normal(0.0, noise_std, size=B.shape)


def potential_gradient(X, centers, weights, bump_scale):
    """Gradient of the Gaussian-bump potential at each row of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    diff = X[:, None, :] - centers[None, :, :]          # (N, n_bumps, D)
    bumps = np.exp(-0.5 * np.sum(diff ** 2, axis=-1) / bump_scale ** 2)
    coeff = -weights[None, :] * bumps / bump_scale ** 2
    return np.sum(coeff[:, :, None] * diff, axis=1)


# ---------------------------------------------------------------------------
# report emission


def emit_report(report, out_dir):
    """Write rmse.csv (and field_error.csv when available) into a directory.

    Floats are written with shortest round-trip formatting, so reports
    from identical runs are byte-identical and parsing them back
    reproduces the in-memory values exactly.
    """
    os.makedirs(out_dir, exist_ok=True)
    rmse_path = os.path.join(out_dir, "rmse.csv")
    with open(rmse_path, "w", newline="") as fh:
        fh.write(",".join(RMSE_CSV_HEADER) + "\n")
        for row in report.rows:
            fh.write(",".join([
                row.method, str(row.nc), repr(row.mean), repr(row.std),
                str(row.n_ok), repr(row.jitter), repr(row.seconds),
            ]) + "\n")
    paths = [rmse_path]
    if report.field_error is not None:
        paths.append(_emit_field_error(report.field_error,
                                       os.path.join(out_dir, "field_error.csv")))
    return paths


def _emit_field_error(table, path):
    dim = table.points.shape[1]
    labels = sorted(table.errors)
    header = [f"x{i + 1}" for i in range(dim)]
    for label in labels:
        k = table.errors[label].shape[1]
        header.extend(f"d{c + 1}_{label}" for c in range(k))
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for a in range(table.points.shape[0]):
            cells = [repr(float(v)) for v in table.points[a]]
            for label in labels:
                cells.extend(repr(float(v)) for v in table.errors[label][a])
            fh.write(",".join(cells) + "\n")
    return path


def parse_rmse_csv(path):
    """Read rmse.csv back into RmseRow objects (exact float round-trip)."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != RMSE_CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for rec in reader:
            rows.append(RmseRow(
                method=rec[0], nc=int(rec[1]), mean=float(rec[2]),
                std=float(rec[3]), n_ok=int(rec[4]), jitter=float(rec[5]),
                seconds=float(rec[6])))
    return rows
