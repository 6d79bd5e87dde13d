"""Multi-output kernel ridge regression with a Laplacian kernel.

Inputs are the five channel readings, targets the chart location (A, B).
Hyperparameters are picked by shuffled k-fold cross-validation over a
log-spaced (alpha, gamma) grid, scoring each cell by the median Cartesian
localisation error on the dome.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from . import kernels
from .geometry import DomeSpec, chart_to_xyz, clamp_to_chart

GRID_SIZE = 20
GRID_LOW = 1e-5
GRID_HIGH = 1e1


class SolveError(np.linalg.LinAlgError):
    """Raised when the regularised kernel system is singular or too ill-conditioned."""

    def __init__(self, message, condition=math.inf):
        super().__init__(message)
        self.condition = condition


@dataclass(frozen=True)
class Hyperparams:
    alpha: float
    gamma: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")


@dataclass(frozen=True)
class FittedModel:
    train_inputs: np.ndarray
    dual_coefficients: np.ndarray
    hyper: Hyperparams
    dome: DomeSpec = DomeSpec()
    meta: dict = field(default_factory=dict)
    scaling: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        if len(self.train_inputs) != len(self.dual_coefficients):
            raise ValueError("train_inputs and dual_coefficients row counts differ")
        if not (np.all(np.isfinite(self.train_inputs)) and np.all(np.isfinite(self.dual_coefficients))):
            raise ValueError("model contains non-finite entries")

    def to_json(self) -> dict:
        meta = dict(self.meta)
        meta["scaling"] = (
            None
            if self.scaling is None
            else {"mean": self.scaling[0].tolist(), "scale": self.scaling[1].tolist()}
        )
        return {
            "alpha": self.hyper.alpha,
            "gamma": self.hyper.gamma,
            "train_inputs": self.train_inputs.tolist(),
            "dual_coefficients": self.dual_coefficients.tolist(),
            "dome": self.dome.to_json(),
            "meta": meta,
        }

    @classmethod
    def from_json(cls, data: dict) -> "FittedModel":
        meta = dict(data.get("meta", {}))
        scaling = meta.get("scaling")
        if scaling is not None:
            scaling = (np.asarray(scaling["mean"], float), np.asarray(scaling["scale"], float))
        return cls(
            train_inputs=np.asarray(data["train_inputs"], dtype=float).reshape(-1, 5),
            dual_coefficients=np.asarray(data["dual_coefficients"], dtype=float).reshape(-1, 2),
            hyper=Hyperparams(float(data["alpha"]), float(data["gamma"])),
            dome=DomeSpec.from_json(data["dome"]),
            meta=meta,
            scaling=scaling,
        )


def _as_matrix(X, name="X") -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1) if X.size else X.reshape(0, 5)
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite values")
    return X


def laplacian_kernel(X, Y, gamma: float) -> np.ndarray:
    """``K[i, j] = exp(-gamma * ||X_i - Y_j||_1)``."""
    if not gamma >= 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    X = _as_matrix(X, "X")
    Y = _as_matrix(Y, "Y")
    return np.exp(-gamma * kernels.l1_distances(X, Y))


def feature_scaling(X) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    return mean, np.where(scale > 0, scale, 1.0)


def fit(
    X,
    T,
    hyper: Hyperparams,
    *,
    dome: DomeSpec = DomeSpec(),
    meta: dict | None = None,
    scale_features: bool = False,
    max_condition: float = 1e13,
) -> FittedModel:
    """Solve ``(K + alpha I) W = T`` by Cholesky factorisation."""
    X = _as_matrix(X, "X")
    T = np.asarray(T, dtype=float).reshape(len(X), -1)
    if len(X) < 1:
        raise ValueError("need at least one training row")
    scaling = feature_scaling(X) if scale_features else None
    Xs = X if scaling is None else (X - scaling[0]) / scaling[1]
    A = laplacian_kernel(Xs, Xs, hyper.gamma)
    A[np.diag_indices_from(A)] += hyper.alpha
    anorm = float(np.abs(A).sum(axis=0).max())
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SolveError(f"kernel system is not positive definite: {exc}") from exc
    rcond, info = lapack.dpocon(factor[0], anorm, uplo="L")
    condition = math.inf if rcond == 0 else 1.0 / rcond
    if info != 0 or condition > max_condition:
        raise SolveError(
            f"kernel system too ill-conditioned (condition ~ {condition:.3g} > {max_condition:.3g})",
            condition,
        )
    W = scipy.linalg.cho_solve(factor, T, check_finite=False)
    return FittedModel(X, W, hyper, dome, dict(meta or {}), scaling)


def predict(model: FittedModel, X) -> np.ndarray:
    """Raw chart predictions, shape (m, 2); clamp before mapping to the dome."""
    X = _as_matrix(X, "X")
    if len(X) == 0:
        return np.zeros((0, model.dual_coefficients.shape[1]))
    train = model.train_inputs
    if model.scaling is not None:
        mean, scale = model.scaling
        X = (X - mean) / scale
        train = (train - mean) / scale
    return laplacian_kernel(X, train, model.hyper.gamma) @ model.dual_coefficients


def cartesian_errors(true_ab, pred_ab, dome: DomeSpec) -> np.ndarray:
    """Chord distance on the dome between true and (clamped) predicted locations."""
    true_ab = np.asarray(true_ab, dtype=float)
    pred_ab, _ = clamp_to_chart(pred_ab, dome)
    p = chart_to_xyz(true_ab[:, 0], true_ab[:, 1], dome)
    q = chart_to_xyz(pred_ab[:, 0], pred_ab[:, 1], dome)
    return np.linalg.norm(p - q, axis=1)


# ---------------------------------------------------------------------------
# cross-validation


def log_grid(low: float = GRID_LOW, high: float = GRID_HIGH, count: int = GRID_SIZE) -> np.ndarray:
    return np.logspace(math.log10(low), math.log10(high), count)


def kfold_indices(n: int, k: int, shuffle_seed: int) -> list[np.ndarray]:
    """Shuffle ``range(n)`` with the seed and cut it into ``k`` near-equal folds."""
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k > n:
        raise ValueError(f"k={k} folds need at least {k} rows, got {n}")
    order = np.random.default_rng(shuffle_seed).permutation(n)
    return np.array_split(order, k)


def _standardise(X_train, X_test, scale_features):
    if not scale_features:
        return X_train, X_test
    mean, scale = feature_scaling(X_train)
    return (X_train - mean) / scale, (X_test - mean) / scale


def _regularisation_path(X_tr, T_tr, X_te, T_te, gammas, alphas, dome, n_jobs=1):
    """Held-out errors for every (alpha, gamma), shape (n_alpha, n_gamma, m).

    One eigendecomposition of the training kernel per gamma is shared by
    all alphas: ``W = Q (L + alpha)^-1 Q^T T``.
    """
    D_tr = kernels.l1_distances(X_tr, X_tr)
    D_te = kernels.l1_distances(X_te, X_tr)
    true_xyz = chart_to_xyz(T_te[:, 0], T_te[:, 1], dome)
    out = np.empty((len(alphas), len(gammas), len(X_te)))

    def one_gamma(ig):
        g = gammas[ig]
        lam, Q = np.linalg.eigh(np.exp(-g * D_tr))
        lam = np.maximum(lam, 0.0)
        QtT = Q.T @ T_tr
        KQ = np.exp(-g * D_te) @ Q
        for ia, a in enumerate(alphas):
            P = KQ @ (QtT / (lam + a)[:, None])
            P, _ = clamp_to_chart(P, dome)
            pred_xyz = chart_to_xyz(P[:, 0], P[:, 1], dome)
            out[ia, ig] = np.linalg.norm(true_xyz - pred_xyz, axis=1)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            list(pool.map(one_gamma, range(len(gammas))))
    else:
        for ig in range(len(gammas)):
            one_gamma(ig)
    return out


def cv_error_surface(
    X, T, alphas, gammas, k: int = 5, shuffle_seed: int = 0, *, dome=DomeSpec(),
    scale_features=False, n_jobs=1,
) -> np.ndarray:
    """Median held-out Cartesian error for each (alpha, gamma) pair."""
    X = _as_matrix(X, "X")
    T = np.asarray(T, dtype=float)
    folds = kfold_indices(len(X), k, shuffle_seed)
    errors = np.empty((len(alphas), len(gammas), len(X)))
    for held in folds:
        train = np.setdiff1d(np.arange(len(X)), held, assume_unique=True)
        X_tr, X_te = _standardise(X[train], X[held], scale_features)
        errors[:, :, held] = _regularisation_path(
            X_tr, T[train], X_te, T[held], np.asarray(gammas, float), np.asarray(alphas, float),
            dome, n_jobs,
        )
    return np.median(errors, axis=2)


def _training_arrays(dataset, min_depth):
    rows = dataset.training_rows(min_depth)
    return rows.readings, rows.ab


def kfold_cv(
    dataset, hyper: Hyperparams, k: int = 5, shuffle_seed: int = 0, *,
    dome: DomeSpec = DomeSpec(), min_depth: float = 0.5, scale_features: bool = False,
) -> float:
    """Median Cartesian error (mm) over all held-out rows of a k-fold split."""
    X, T = _training_arrays(dataset, min_depth)
    surface = cv_error_surface(
        X, T, [hyper.alpha], [hyper.gamma], k, shuffle_seed, dome=dome,
        scale_features=scale_features,
    )
    return float(surface[0, 0])


@dataclass(frozen=True)
class GridSearchReport:
    alphas: np.ndarray
    gammas: np.ndarray
    scores: np.ndarray  # (n_alpha, n_gamma) median CV error in mm
    best: Hyperparams
    best_score: float
    fold_seed: int
    k: int

    def entries(self) -> list[dict]:
        return [
            {"alpha": float(a), "gamma": float(g), "cv_median_error_mm": float(self.scores[i, j])}
            for i, a in enumerate(self.alphas)
            for j, g in enumerate(self.gammas)
        ]

    def to_json(self) -> dict:
        return {
            "grid": self.entries(),
            "best": {
                "alpha": self.best.alpha,
                "gamma": self.best.gamma,
                "cv_median_error_mm": self.best_score,
            },
            "fold_seed": self.fold_seed,
            "k": self.k,
        }

    @classmethod
    def from_json(cls, data: dict) -> "GridSearchReport":
        alphas = np.array(sorted({e["alpha"] for e in data["grid"]}))
        gammas = np.array(sorted({e["gamma"] for e in data["grid"]}))
        scores = np.full((len(alphas), len(gammas)), np.nan)
        ai = {a: i for i, a in enumerate(alphas)}
        gi = {g: j for j, g in enumerate(gammas)}
        for e in data["grid"]:
            scores[ai[e["alpha"]], gi[e["gamma"]]] = e["cv_median_error_mm"]
        best = data["best"]
        return cls(alphas, gammas, scores, Hyperparams(best["alpha"], best["gamma"]),
                   best["cv_median_error_mm"], data["fold_seed"], data["k"])


def select_best(alphas, gammas, scores) -> tuple[int, int]:
    """Argmin of the score surface; ties go to smaller gamma, then smaller alpha."""
    best = None
    for j in np.argsort(gammas, kind="stable"):
        for i in np.argsort(alphas, kind="stable"):
            key = scores[i, j]
            if best is None or key < scores[best]:
                best = (int(i), int(j))
    return best


def grid_search(
    dataset, k: int = 5, shuffle_seed: int = 0, *, dome: DomeSpec = DomeSpec(),
    min_depth: float = 0.5, scale_features: bool = False,
    alphas=None, gammas=None, n_jobs: int = 1,
) -> GridSearchReport:
    """Exhaustive search over the 20 x 20 log grid on [1e-5, 1e1]."""
    alphas = log_grid() if alphas is None else np.asarray(alphas, float)
    gammas = log_grid() if gammas is None else np.asarray(gammas, float)
    X, T = _training_arrays(dataset, min_depth)
    scores = cv_error_surface(
        X, T, alphas, gammas, k, shuffle_seed, dome=dome, scale_features=scale_features,
        n_jobs=n_jobs,
    )
    i, j = select_best(alphas, gammas, scores)
    return GridSearchReport(
        alphas, gammas, scores, Hyperparams(float(alphas[i]), float(gammas[j])),
        float(scores[i, j]), shuffle_seed, k,
    )
