"""Exact least squares, nested-model F comparison, fit metrics, and FDR control.

Tail probabilities for the Student-t and F distributions are computed from
the regularized incomplete beta function, so results are deterministic
across platforms:

    two-sided t p-value  = I(df/2, 1/2; df / (df + t^2))
    F upper tail         = I(d2/2, d1/2; d2 / (d2 + d1 f))
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import betainc

from .errors import (
    ConstantActuals,
    InvalidPValue,
    NotNested,
    PerfectFitDegenerate,
    RankDeficient,
    Underdetermined,
)

RANK_RTOL = 1e-10


def t_two_sided_p(t_stat: float | np.ndarray, df: int) -> float | np.ndarray:
    t2 = np.square(t_stat)
    return betainc(df / 2.0, 0.5, df / (df + t2))


def t_cdf(x: float, df: int) -> float:
    tail = 0.5 * betainc(df / 2.0, 0.5, df / (df + x * x))
    return 1.0 - tail if x >= 0 else tail


def f_upper_tail(f_stat: float, df1: int, df2: int) -> float:
    if f_stat <= 0:
        return 1.0
    return float(betainc(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f_stat)))


def f_cdf(f_stat: float, df1: int, df2: int) -> float:
    if f_stat <= 0:
        return 0.0
    return float(betainc(df1 / 2.0, df2 / 2.0, df1 * f_stat / (df1 * f_stat + df2)))


@dataclass(frozen=True)
class FitSummary:
    """Ordinary least squares fit of response on design columns."""

    coefficients: np.ndarray
    standard_errors: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray
    rss: float
    r2: float
    adj_r2: float
    df_resid: int
    n_obs: int

    @property
    def n_params(self) -> int:
        return self.n_obs - self.df_resid


@dataclass(frozen=True)
class AnovaResult:
    f_stat: float
    df1: int
    df2: int
    p_value: float


def ols_fit(design: np.ndarray, response: np.ndarray) -> FitSummary:
    """Exact OLS via pivoted QR with explicit rank checking.

    Raises ``Underdetermined`` when n <= p and ``RankDeficient`` (carrying
    the index of a dependent column) when a pivot falls below
    ``1e-10 * max column norm``.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float).ravel()
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    if p < 1:
        raise Underdetermined("design needs at least one column")
    if y.size != n:
        raise ValueError("design and response row counts differ")
    if n <= p:
        raise Underdetermined(f"n={n} rows cannot identify p={p} coefficients")

    q, r, piv = linalg.qr(X, mode="economic", pivoting=True)
    col_norms = np.linalg.norm(X, axis=0)
    tol = RANK_RTOL * max(col_norms.max(), 1e-300)
    diag = np.abs(np.diag(r))
    low = np.nonzero(diag < tol)[0]
    if low.size:
        raise RankDeficient(int(piv[low[0]]))

    qty = q.T @ y
    beta_piv = linalg.solve_triangular(r, qty)
    beta = np.empty(p)
    beta[piv] = beta_piv

    fitted = X @ beta
    resid = y - fitted
    rss = float(resid @ resid)
    df_resid = n - p
    sigma2 = rss / df_resid

    r_inv = linalg.solve_triangular(r, np.eye(p))
    xtx_inv_diag_piv = np.sum(r_inv * r_inv, axis=1)
    xtx_inv_diag = np.empty(p)
    xtx_inv_diag[piv] = xtx_inv_diag_piv
    se = np.sqrt(sigma2 * xtx_inv_diag)

    with np.errstate(divide="ignore", invalid="ignore"):
        t_stats = np.where(se > 0, beta / se, np.inf * np.sign(beta))
    t_stats = np.where(np.isnan(t_stats), 0.0, t_stats)
    p_values = np.asarray(t_two_sided_p(t_stats, df_resid), dtype=float)

    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - rss / tss if tss > 0 else 0.0
    adj = adjusted_r2(r2, n, p) if n > p + 1 else float("nan")
    return FitSummary(
        coefficients=beta,
        standard_errors=se,
        t_stats=t_stats,
        p_values=p_values,
        residuals=resid,
        fitted=fitted,
        rss=rss,
        r2=r2,
        adj_r2=adj,
        df_resid=df_resid,
        n_obs=n,
    )


def nested_anova(full: FitSummary, reduced: FitSummary, n: int) -> AnovaResult:
    """F comparison of a reduced model against a full model containing it."""
    p_full = n - full.df_resid
    p_red = n - reduced.df_resid
    if full.n_obs != n or reduced.n_obs != n:
        raise NotNested("models were fit on different row counts")
    if p_full <= p_red:
        raise NotNested("full model must have strictly more parameters")
    scale = max(full.rss, 1.0)
    if reduced.rss < full.rss - 1e-10 * scale:
        raise NotNested("reduced model fits better than full; models are not nested")
    if full.rss <= 1e-20 * max(reduced.rss, 1e-300):
        raise PerfectFitDegenerate("full model residual sum of squares is zero")
    df1 = p_full - p_red
    df2 = n - p_full
    num = max(reduced.rss - full.rss, 0.0) / df1
    den = full.rss / df2
    f_stat = num / den
    return AnovaResult(f_stat=f_stat, df1=df1, df2=df2, p_value=f_upper_tail(f_stat, df1, df2))


def adjusted_r2(r2: float, n: int, p: int) -> float:
    """Degrees-of-freedom adjusted coefficient of determination."""
    if n <= p + 1:
        raise Underdetermined(f"n={n} too small for p={p} plus adjustment")
    return 1.0 - (1.0 - r2) * (n - 1) / (n - p - 1)


def out_of_sample_r2(predictions: np.ndarray, actuals: np.ndarray, train_mean: float) -> float:
    """One minus prediction SSE over the SSE of the training-mean benchmark."""
    preds = np.asarray(predictions, dtype=float).ravel()
    acts = np.asarray(actuals, dtype=float).ravel()
    if preds.size != acts.size or preds.size < 1:
        raise ValueError("predictions and actuals must be equal-length, nonempty")
    denom = float(np.sum((acts - train_mean) ** 2))
    if denom == 0.0:
        raise ConstantActuals("actuals equal the training mean everywhere")
    return 1.0 - float(np.sum((acts - preds) ** 2)) / denom


def bhy_adjust(p_values: np.ndarray) -> np.ndarray:
    """Step-up FDR q-values with the harmonic correction for dependent tests.

    With m tests and c(m) = sum_{i<=m} 1/i, the k-th smallest p maps to
    min over j >= k of m*c(m)*p_(j)/j, clipped to 1, returned in the input
    order.
    """
    p = np.asarray(p_values, dtype=float).ravel()
    if p.size == 0:
        return p.copy()
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise InvalidPValue("p-values must lie in [0, 1]")
    m = p.size
    c_m = np.sum(1.0 / np.arange(1, m + 1))
    order = np.argsort(p, kind="stable")
    ranks = np.arange(1, m + 1)
    raw = m * c_m * p[order] / ranks
    q_sorted = np.minimum.accumulate(raw[::-1])[::-1]
    np.clip(q_sorted, 0.0, 1.0, out=q_sorted)
    q = np.empty(m)
    q[order] = q_sorted
    return q
