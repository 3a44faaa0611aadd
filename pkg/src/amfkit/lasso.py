"""L1-penalized least squares with a regularization path and the capped
one-standard-error penalty rule.

The solver minimizes (1/2n)||y - Xb||^2 + lambda*||b||_1 by cyclic
coordinate descent on the Gram matrix of the internally standardized
design (columns centered and scaled to unit variance, response centered).
Coefficients are mapped back to the original column scale on return; the
implicit centering intercept is never penalized, selected, or reported.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConstantColumn,
    EmptyPath,
    MaxIterations,
    TooFewObservations,
    ValidationError,
)

CD_TOL = 1e-9
CD_MAX_SWEEPS = 100_000
GRID_FLOOR = 1e-3
SUPPORT_TIE_TOL = 1e-12


@dataclass(frozen=True)
class Standardized:
    x: np.ndarray
    y: np.ndarray
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float


def _standardize(design: np.ndarray, response: np.ndarray) -> Standardized:
    x = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float).ravel()
    if x.ndim != 2 or x.shape[0] != y.size:
        raise ValidationError("design must be 2-d with one row per response element")
    mean = x.mean(axis=0)
    centered = x - mean
    scale = np.sqrt(np.mean(centered * centered, axis=0))
    dead = np.nonzero(scale <= 1e-14 * np.maximum(1.0, np.abs(mean)))[0]
    if dead.size:
        raise ConstantColumn(int(dead[0]))
    y_mean = float(y.mean())
    return Standardized(centered / scale, y - y_mean, mean, scale, y_mean)


def soft_threshold(z: float, t: float) -> float:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def _cd_kernel(gram, corr, lam, beta, tol, max_sweeps):
    """Cyclic coordinate descent on the Gram system; mutates ``beta``.

    Returns sweeps used, or -1 when the budget runs out.  Full sweeps
    alternate with active-set sweeps until a full sweep moves nothing.
    """
    p = corr.shape[0]
    used = 0
    while used < max_sweeps:
        used += 1
        delta = 0.0
        for j in range(p):
            old = beta[j]
            rho = corr[j]
            for k in range(p):
                rho -= gram[j, k] * beta[k]
            rho += gram[j, j] * old
            if rho > lam:
                new = (rho - lam) / gram[j, j]
            elif rho < -lam:
                new = (rho + lam) / gram[j, j]
            else:
                new = 0.0
            if new != old:
                beta[j] = new
                diff = abs(new - old)
                if diff > delta:
                    delta = diff
        if delta < tol:
            return used
        while used < max_sweeps:
            used += 1
            delta = 0.0
            for j in range(p):
                old = beta[j]
                if old == 0.0:
                    continue
                rho = corr[j]
                for k in range(p):
                    rho -= gram[j, k] * beta[k]
                rho += gram[j, j] * old
                if rho > lam:
                    new = (rho - lam) / gram[j, j]
                elif rho < -lam:
                    new = (rho + lam) / gram[j, j]
                else:
                    new = 0.0
                if new != old:
                    beta[j] = new
                    diff = abs(new - old)
                    if diff > delta:
                        delta = diff
            if delta < tol:
                break
    return -1


_cd_kernel_py = _cd_kernel

try:  # pragma: no cover - exercised implicitly wherever numba is present
    from numba import njit

    _cd_kernel = njit(cache=True)(_cd_kernel)
except ImportError:  # pragma: no cover
    pass


def _cd_solve(gram: np.ndarray, corr: np.ndarray, lam: float,
              beta: np.ndarray, sweeps_left: int) -> int:
    used = _cd_kernel(gram, corr, lam, beta, CD_TOL, sweeps_left)
    if used < 0:
        raise MaxIterations(f"coordinate descent did not converge in {sweeps_left} sweeps")
    return used


def lasso_solve(design: np.ndarray, response: np.ndarray, lam: float) -> np.ndarray:
    """Single-penalty solution, coefficients on the original column scale."""
    if lam < 0:
        raise ValidationError("penalty must be nonnegative")
    std = _standardize(design, response)
    n = std.y.size
    gram = (std.x.T @ std.x) / n
    corr = (std.x.T @ std.y) / n
    beta = np.zeros(corr.size)
    _cd_solve(gram, corr, lam, beta, CD_MAX_SWEEPS)
    return beta / std.x_scale


def kkt_gap(design: np.ndarray, response: np.ndarray, coef_original: np.ndarray,
            lam: float) -> float:
    """Worst violation of the stationarity conditions, on the standardized
    scale.  Zero coefficients need |X'r/n| <= lam; active ones need
    X'r/n = lam*sign(b)."""
    std = _standardize(design, response)
    n = std.y.size
    beta = np.asarray(coef_original, dtype=float) * std.x_scale
    grad = (std.x.T @ (std.y - std.x @ beta)) / n
    gap = 0.0
    for j in range(beta.size):
        if beta[j] == 0.0:
            gap = max(gap, abs(grad[j]) - lam)
        else:
            gap = max(gap, abs(grad[j] - lam * np.sign(beta[j])))
    return gap


def lambda_grid(lambda_max: float, grid_size: int) -> np.ndarray:
    if grid_size < 1:
        raise ValidationError("grid_size must be positive")
    if lambda_max <= 0:
        return np.zeros(1)
    return np.geomspace(lambda_max, GRID_FLOOR * lambda_max, grid_size)


@dataclass(frozen=True)
class LassoPath:
    """Full-data solutions and cross-validated errors along a penalty grid."""

    lambdas: np.ndarray
    coefficients: np.ndarray  # (n_lambda, p), original scale
    support_sizes: np.ndarray
    cv_mean: np.ndarray
    cv_se: np.ndarray

    def __len__(self) -> int:
        return self.lambdas.size


@dataclass(frozen=True)
class ModifiedLambdaChoice:
    lambda_1se: float
    lambda_cap: float
    chosen: float
    chosen_index: int
    support: tuple[int, ...]
    coefficients: np.ndarray


def _path_solve(gram: np.ndarray, corr: np.ndarray, lambdas: np.ndarray) -> np.ndarray:
    """Warm-started solutions for a descending grid; standardized scale."""
    p = corr.size
    betas = np.empty((lambdas.size, p))
    beta = np.zeros(p)
    for k, lam in enumerate(lambdas):
        _cd_solve(gram, corr, lam, beta, CD_MAX_SWEEPS)
        betas[k] = beta
    return betas


def cv_path(design: np.ndarray, response: np.ndarray, n_folds: int = 10,
            grid_size: int = 100) -> LassoPath:
    """Regularization path with blocked cross-validation.

    Folds are contiguous blocks of rows (time order is respected, no
    shuffling).  Held-out predictions recenter with the training means, so
    fold fits match the standardization convention of ``lasso_solve``.
    """
    x = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float).ravel()
    n = y.size
    if n_folds < 2:
        raise ValidationError("need at least 2 folds")
    if grid_size < 10:
        raise ValidationError("grid needs at least 10 points")
    if n < n_folds:
        raise TooFewObservations(f"{n} rows cannot form {n_folds} folds")

    std = _standardize(x, y)
    lambda_max = float(np.max(np.abs(std.x.T @ std.y))) / n
    lambdas = lambda_grid(lambda_max, grid_size)

    folds = np.array_split(np.arange(n), n_folds)
    fold_mse = np.empty((n_folds, lambdas.size))
    for i, hold in enumerate(folds):
        train = np.setdiff1d(np.arange(n), hold, assume_unique=True)
        st = _standardize(x[train], y[train])
        nt = train.size
        gram = (st.x.T @ st.x) / nt
        corr = (st.x.T @ st.y) / nt
        betas = _path_solve(gram, corr, lambdas)
        x_hold = (x[hold] - st.x_mean) / st.x_scale
        preds = st.y_mean + betas @ x_hold.T  # (n_lambda, n_hold)
        err = preds - y[hold]
        fold_mse[i] = np.mean(err * err, axis=1)

    cv_mean = fold_mse.mean(axis=0)
    cv_se = fold_mse.std(axis=0, ddof=1) / np.sqrt(n_folds)

    gram = (std.x.T @ std.x) / n
    corr = (std.x.T @ std.y) / n
    betas = _path_solve(gram, corr, lambdas) / std.x_scale
    supports = np.count_nonzero(np.abs(betas) > SUPPORT_TIE_TOL, axis=1)
    return LassoPath(
        lambdas=lambdas,
        coefficients=betas,
        support_sizes=supports,
        cv_mean=cv_mean,
        cv_se=cv_se,
    )


def choose_lambda(path: LassoPath, support_cap: int = 20) -> ModifiedLambdaChoice:
    """Penalty selection: the larger of the one-standard-error choice and
    the boundary penalty keeping the support within ``support_cap``."""
    if support_cap < 1:
        raise ValidationError("support_cap must be at least 1")
    if len(path) == 0:
        raise EmptyPath("regularization path is empty")

    i_min = int(np.argmin(path.cv_mean))
    threshold = path.cv_mean[i_min] + path.cv_se[i_min]
    idx_1se = int(np.nonzero(path.cv_mean <= threshold)[0][0])

    # walk down from the most regularized end; stop before the cap breaks
    idx_cap = 0
    for k in range(len(path)):
        if path.support_sizes[k] <= support_cap:
            idx_cap = k
        else:
            break

    chosen_idx = min(idx_1se, idx_cap)
    coef = path.coefficients[chosen_idx]
    support = tuple(int(j) for j in np.nonzero(np.abs(coef) > SUPPORT_TIE_TOL)[0])
    return ModifiedLambdaChoice(
        lambda_1se=float(path.lambdas[idx_1se]),
        lambda_cap=float(path.lambdas[idx_cap]),
        chosen=float(path.lambdas[chosen_idx]),
        chosen_index=chosen_idx,
        support=support,
        coefficients=coef.copy(),
    )
