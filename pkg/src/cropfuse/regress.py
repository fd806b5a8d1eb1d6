"""Ridge and RBF kernel ridge regression with repeated hold-out evaluation."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist, pdist

from .errors import ConfigError, DataError, DimensionError

MODEL_FORMAT = "cropfuse-model"
MODEL_VERSION = 1

DEFAULT_LAMBDAS = tuple(float(v) for v in np.logspace(-6, 2, 9))
DEFAULT_SIGMA_FACTORS = (0.25, 0.5, 1.0, 2.0, 4.0)
MODEL_KINDS = ("rlr", "krr")


class ConditioningError(DataError):
    pass


# -- kernels ------------------------------------------------------------------


def rbf_kernel(x, x2, sigma: float) -> float:
    """exp(-||x - x2||^2 / (2 sigma^2))."""
    if not sigma > 0:
        raise ConfigError(f"lengthscale must be positive, got {sigma}")
    x = np.asarray(x, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    if x.shape != x2.shape:
        raise DimensionError(f"vectors differ in length: {x.size} vs {x2.size}")
    d = x - x2
    return float(np.exp(-(d @ d) / (2.0 * sigma**2)))


def rbf_gram(A, B, sigma: float) -> np.ndarray:
    if not sigma > 0:
        raise ConfigError(f"lengthscale must be positive, got {sigma}")
    return np.exp(-cdist(A, B, "sqeuclidean") / (2.0 * sigma**2))


KERNELS: dict[str, Callable] = {"rbf": rbf_gram}


# -- standardization ----------------------------------------------------------


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        scale = X.std(axis=0)
        # constant columns pass through centered but unscaled
        scale = np.where(scale > 0, scale, 1.0)
        return cls(X.mean(axis=0), scale)

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.scale


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise DimensionError(f"X has {X.shape[0]} rows but y has {y.size} entries")
    if X.shape[0] < 2:
        raise DataError("need at least two training rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DataError("training data contain non-finite values")
    return X, y


def _check_lambda(lam):
    if not lam > 0:
        raise ConfigError(f"regularization must be positive, got {lam}")


# -- models -------------------------------------------------------------------


@dataclass
class RlrModel:
    weights: np.ndarray
    bias: float
    lam: float
    x_mean: np.ndarray
    x_scale: np.ndarray

    kind = "rlr"

    @property
    def n_features(self) -> int:
        return self.weights.size


@dataclass
class KrrModel:
    dual_coef: np.ndarray
    bias: float
    X_train: np.ndarray
    sigma: float
    lam: float
    x_mean: np.ndarray
    x_scale: np.ndarray
    kernel: str | Callable = "rbf"

    kind = "krr"

    @property
    def n_features(self) -> int:
        return self.X_train.shape[1]

    def gram(self, A, B) -> np.ndarray:
        fn = KERNELS[self.kernel] if isinstance(self.kernel, str) else self.kernel
        return fn(A, B, self.sigma)


def fit_rlr(X, y, lam: float) -> RlrModel:
    """Ridge regression on z-scored features with an unpenalized bias.

    Solves ``(Z'Z + lam I) w = Z'(y - mean(y))``; the bias is the training
    mean of ``y``.
    """
    X, y = _check_xy(X, y)
    _check_lambda(lam)
    std = Standardizer.fit(X)
    Z = std.transform(X)
    bias = float(y.mean())
    A = Z.T @ Z + lam * np.eye(Z.shape[1])
    try:
        w = scipy.linalg.cho_solve(scipy.linalg.cho_factor(A), Z.T @ (y - bias))
    except np.linalg.LinAlgError as err:
        raise ConditioningError(f"ridge system is not positive definite: {err}") from err
    return RlrModel(w, bias, float(lam), std.mean, std.scale)


def fit_krr(X, y, lam: float, sigma: float, kernel: str | Callable = "rbf") -> KrrModel:
    """Kernel ridge regression: ``(K + lam I) alpha = y - mean(y)`` on z-scored inputs."""
    X, y = _check_xy(X, y)
    _check_lambda(lam)
    if not sigma > 0:
        raise ConfigError(f"lengthscale must be positive, got {sigma}")
    std = Standardizer.fit(X)
    Z = std.transform(X)
    bias = float(y.mean())
    model = KrrModel(np.empty(0), bias, X.copy(), float(sigma), float(lam), std.mean, std.scale, kernel)
    K = model.gram(Z, Z)
    K[np.diag_indices_from(K)] += lam
    try:
        alpha = scipy.linalg.cho_solve(scipy.linalg.cho_factor(K), y - bias)
    except np.linalg.LinAlgError as err:
        raise ConditioningError(f"K + lambda I is not positive definite: {err}") from err
    model.dual_coef = alpha
    return model


def predict(model: RlrModel | KrrModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :] if X.size == model.n_features else X[:, None]
    if X.shape[1] != model.n_features:
        raise DimensionError(f"model expects {model.n_features} features, got {X.shape[1]}")
    Z = (X - model.x_mean) / model.x_scale
    if isinstance(model, RlrModel):
        return Z @ model.weights + model.bias
    Ztrain = (model.X_train - model.x_mean) / model.x_scale
    return model.gram(Z, Ztrain) @ model.dual_coef + model.bias


def fit_model(kind: str, X, y, lam: float, sigma: float | None = None):
    if kind == "rlr":
        return fit_rlr(X, y, lam)
    if kind == "krr":
        return fit_krr(X, y, lam, sigma)
    raise ConfigError(f"unknown model kind {kind!r}")


# -- evaluation ---------------------------------------------------------------


@dataclass
class EvalStats:
    """Mean error, RMSE and R^2; the ``*_std`` fields are across repetitions."""

    me: float
    rmse: float
    r2: float
    me_std: float = 0.0
    rmse_std: float = 0.0
    r2_std: float = 0.0
    n_repetitions: int = 1


def evaluate(y_true, y_pred) -> EvalStats:
    y_true = np.asarray(y_true, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    if y_true.shape != y_pred.shape:
        raise DimensionError("y_true and y_pred differ in length")
    if y_true.size < 2:
        raise DataError("need at least two samples to evaluate")
    err = y_pred - y_true
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0:
        raise DataError("R^2 undefined: y_true has zero variance")
    return EvalStats(
        me=float(err.mean()),
        rmse=float(np.sqrt(np.mean(err**2))),
        r2=1.0 - float(err @ err) / ss_tot,
    )


def aggregate(stats: Sequence[EvalStats]) -> EvalStats:
    """Mean and sample standard deviation over repetitions."""
    if not stats:
        raise DataError("nothing to aggregate")
    arr = np.array([[s.me, s.rmse, s.r2] for s in stats])
    mean = arr.mean(axis=0)
    std = arr.std(axis=0, ddof=1) if len(stats) > 1 else np.zeros(3)
    return EvalStats(*mean.tolist(), *std.tolist(), n_repetitions=len(stats))


# -- hyperparameter selection -------------------------------------------------


@dataclass
class CvConfig:
    train_fraction: float = 0.7
    repetitions: int = 10
    inner_folds: int = 5
    lambdas: tuple[float, ...] = DEFAULT_LAMBDAS
    sigma_factors: tuple[float, ...] = DEFAULT_SIGMA_FACTORS
    sigmas: tuple[float, ...] | None = None
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        self.lambdas = tuple(float(v) for v in self.lambdas)
        self.sigma_factors = tuple(float(v) for v in self.sigma_factors)
        if self.sigmas is not None:
            self.sigmas = tuple(float(v) for v in self.sigmas)
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must lie in (0, 1)")
        if not self.lambdas or any(not v > 0 for v in self.lambdas):
            raise ConfigError("lambda grid must be non-empty and positive")
        grid = self.sigmas if self.sigmas is not None else self.sigma_factors
        if not grid or any(not v > 0 for v in grid):
            raise ConfigError("sigma grid must be non-empty and positive")
        if self.inner_folds < 2:
            raise ConfigError("inner_folds must be at least 2")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be at least 1")


def median_pairwise_distance(X) -> float:
    Z = Standardizer.fit(X).transform(X)
    if Z.shape[0] < 2:
        return 1.0
    d = pdist(Z)
    med = float(np.median(d))
    return med if med > 0 else 1.0


def sigma_grid(X, config: CvConfig) -> np.ndarray:
    if config.sigmas is not None:
        return np.array(config.sigmas)
    return median_pairwise_distance(X) * np.array(config.sigma_factors)


def inner_folds(n: int, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    if n < k:
        raise DataError(f"cannot split {n} rows into {k} folds")
    return np.array_split(rng.permutation(n), k)


def cv_scores(X, y, kind: str, lambdas, sigmas, folds) -> np.ndarray:
    """Mean validation RMSE over folds for every grid point.

    Returns an array of shape ``(len(lambdas), len(sigmas))``; for ``rlr``
    the sigma axis has length 1. Each fold standardizes on its own training
    rows. The kernel is eigendecomposed once per (fold, sigma) so the whole
    lambda path costs one factorization.
    """
    X, y = _check_xy(X, y)
    lambdas = np.asarray(lambdas, dtype=float)
    n_sig = len(sigmas) if kind == "krr" else 1
    total = np.zeros((lambdas.size, n_sig))
    for val in folds:
        train = np.setdiff1d(np.arange(y.size), val)
        std = Standardizer.fit(X[train])
        Zt, Zv = std.transform(X[train]), std.transform(X[val])
        mu = y[train].mean()
        yc = y[train] - mu
        if kind == "rlr":
            U, s, Vt = np.linalg.svd(Zt, full_matrices=False)
            Uy = U.T @ yc
            W = Vt.T @ (Uy[:, None] * (s / (s**2 + lambdas[:, None])).T)
            pred = Zv @ W + mu
            total[:, 0] += np.sqrt(np.mean((pred - y[val][:, None]) ** 2, axis=0))
        elif kind == "krr":
            d_tt = cdist(Zt, Zt, "sqeuclidean")
            d_vt = cdist(Zv, Zt, "sqeuclidean")
            for j, sigma in enumerate(sigmas):
                K = np.exp(-d_tt / (2.0 * sigma**2))
                evals, Q = np.linalg.eigh(K)
                evals = np.maximum(evals, 0.0)
                Qy = Q.T @ yc
                A = Q @ (Qy[:, None] / (evals[:, None] + lambdas[None, :]))
                pred = np.exp(-d_vt / (2.0 * sigma**2)) @ A + mu
                total[:, j] += np.sqrt(np.mean((pred - y[val][:, None]) ** 2, axis=0))
        else:
            raise ConfigError(f"unknown model kind {kind!r}")
    return total / len(folds)


def pick_grid_point(scores: np.ndarray, lambdas, sigmas, rtol: float = 1e-9) -> tuple[int, int]:
    """Index of the lowest score; near-ties go to larger lambda, then larger sigma."""
    best = np.nanmin(scores)
    tied = np.argwhere(scores <= best + rtol * abs(best) + 1e-300)
    lam = np.asarray(lambdas, dtype=float)
    sig = np.asarray(sigmas, dtype=float) if sigmas is not None else np.zeros(scores.shape[1])
    key = max((lam[i], sig[j], i, j) for i, j in tied)
    return key[2], key[3]


def select_hyperparams(
    X, y, config: CvConfig, kind: str = "krr", rng: np.random.Generator | None = None
) -> tuple[float, float | None]:
    """Grid search over (lambda, sigma) by inner k-fold CV.

    The sigma grid is the configured factors times the median pairwise
    distance of the standardized rows. RLR returns ``sigma=None``.
    """
    X, y = _check_xy(X, y)
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    folds = inner_folds(y.size, config.inner_folds, rng)
    sigmas = sigma_grid(X, config) if kind == "krr" else None
    scores = cv_scores(X, y, kind, config.lambdas, sigmas, folds)
    i, j = pick_grid_point(scores, config.lambdas, sigmas)
    return config.lambdas[i], (float(sigmas[j]) if kind == "krr" else None)


# -- repeated hold-out ----------------------------------------------------------


@dataclass
class Repetition:
    train: np.ndarray
    test: np.ndarray
    lam: float
    sigma: float | None
    stats: EvalStats
    predictions: np.ndarray


@dataclass
class CvResult:
    stats: EvalStats
    repetitions: list[Repetition]
    n_rows: int
    n_features: int

    def out_of_sample(self) -> tuple[np.ndarray, np.ndarray]:
        """Mean held-out prediction per row and how often each row was held out."""
        sums = np.zeros(self.n_rows)
        counts = np.zeros(self.n_rows, dtype=int)
        for rep in self.repetitions:
            np.add.at(sums, rep.test, rep.predictions)
            np.add.at(counts, rep.test, 1)
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
        return mean, counts


def _one_repetition(X, y, kind, config, seed_seq) -> Repetition:
    rng = np.random.default_rng(seed_seq)
    n = y.size
    perm = rng.permutation(n)
    n_train = int(round(config.train_fraction * n))
    n_train = min(max(n_train, config.inner_folds), n - 2)
    train, test = np.sort(perm[:n_train]), np.sort(perm[n_train:])
    lam, sigma = select_hyperparams(X[train], y[train], config, kind, rng)
    model = fit_model(kind, X[train], y[train], lam, sigma)
    pred = predict(model, X[test])
    return Repetition(train, test, lam, sigma, evaluate(y[test], pred), pred)


def run_cv_experiment(X, y, kind: str, config: CvConfig | None = None) -> CvResult:
    """Repeated random train/test splits with inner hyperparameter search.

    Each repetition draws its own generator from ``SeedSequence(seed)``, so
    results do not depend on ``config.jobs`` or on scheduling order.
    """
    config = config or CvConfig()
    X, y = _check_xy(X, y)
    if y.size < 10:
        raise DataError(f"need at least 10 rows for a CV experiment, got {y.size}")
    if kind not in MODEL_KINDS:
        raise ConfigError(f"unknown model kind {kind!r}")
    seeds = np.random.SeedSequence(config.seed).spawn(config.repetitions)
    run = lambda s: _one_repetition(X, y, kind, config, s)  # noqa: E731
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            reps = list(pool.map(run, seeds))
    else:
        reps = [run(s) for s in seeds]
    return CvResult(aggregate([r.stats for r in reps]), reps, y.size, X.shape[1])


# -- serialization ------------------------------------------------------------


def _pack(arr) -> dict:
    arr = np.asarray(arr, dtype=float)
    return {"shape": list(arr.shape), "data": [float(v).hex() for v in arr.ravel()]}


def _unpack(obj) -> np.ndarray:
    data = np.array([float.fromhex(v) for v in obj["data"]], dtype=float)
    return data.reshape(obj["shape"])


def save_model(model: RlrModel | KrrModel, path) -> None:
    """Write a model as JSON; floats are stored as hex so reloading is exact."""
    doc = {"format": MODEL_FORMAT, "version": MODEL_VERSION, "kind": model.kind}
    doc["bias"] = float(model.bias).hex()
    doc["lambda"] = float(model.lam).hex()
    doc["x_mean"] = _pack(model.x_mean)
    doc["x_scale"] = _pack(model.x_scale)
    if isinstance(model, RlrModel):
        doc["weights"] = _pack(model.weights)
    else:
        if not isinstance(model.kernel, str):
            raise ConfigError("only named kernels can be serialized")
        doc["kernel"] = model.kernel
        doc["sigma"] = float(model.sigma).hex()
        doc["dual_coef"] = _pack(model.dual_coef)
        doc["X_train"] = _pack(model.X_train)
    Path(path).write_text(json.dumps(doc, indent=1))


def load_model(path) -> RlrModel | KrrModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != MODEL_FORMAT:
        raise DataError(f"{path} is not a model file")
    if doc.get("version") != MODEL_VERSION:
        raise DataError(f"unsupported model version {doc.get('version')}")
    common = dict(
        bias=float.fromhex(doc["bias"]),
        lam=float.fromhex(doc["lambda"]),
        x_mean=_unpack(doc["x_mean"]),
        x_scale=_unpack(doc["x_scale"]),
    )
    if doc["kind"] == "rlr":
        return RlrModel(weights=_unpack(doc["weights"]), **common)
    return KrrModel(
        dual_coef=_unpack(doc["dual_coef"]),
        X_train=_unpack(doc["X_train"]),
        sigma=float.fromhex(doc["sigma"]),
        kernel=doc["kernel"],
        **common,
    )
