"""Size and power calibration of the test batteries on simulated nulls.

Each battery row isolates one test procedure with its design assumptions
met, so the reported rejection rate measures the test itself rather than
selection noise:

* The half-period and spline batteries draw i.i.d. factor differences and
  i.i.d. regression noise, matching the difference-model error structure.
* The intercept battery draws stationary level designs.  The two-step
  residual-mean test is exact only when the level columns do not span the
  constant; integrated (random-walk) levels partially do, which makes the
  naive second step conservative, so nominal-size calibration must use a
  stationary family.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .grids import SweepResult, sweep
from .invariance import (
    HalfIndicator,
    intercept_test,
    linear_invariance_test,
    spline_invariance_test,
)
from .stats import nested_anova, ols_fit
from .synth import SynthSpec, generate
from .windows import enumerate_windows


@dataclass(frozen=True)
class CalibrationRow:
    test: str
    n_reps: int
    rejections: int
    rate: float
    ci_low: float
    ci_high: float
    detail: str = ""


@dataclass(frozen=True)
class CalibrationReport:
    rows: tuple[CalibrationRow, ...]
    nominal: float = 0.05

    def format(self) -> str:
        lines = [f"{'test':<12} {'reps':>6} {'rate':>8} {'95% CI':>18}  detail"]
        for r in self.rows:
            lines.append(
                f"{r.test:<12} {r.n_reps:>6} {r.rate:>8.4f} "
                f"[{r.ci_low:.4f}, {r.ci_high:.4f}]  {r.detail}"
            )
        return "\n".join(lines) + "\n"


def wilson_interval(k: int, n: int, z: float = 1.96) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    phat = k / n
    denom = 1 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * np.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(center - half, 0.0), min(center + half, 1.0)


def _row(test: str, rejections: int, n_reps: int, detail: str = "") -> CalibrationRow:
    lo, hi = wilson_interval(rejections, n_reps)
    return CalibrationRow(test, n_reps, rejections, rejections / n_reps, lo, hi, detail)


def _mean_support(spec: SynthSpec) -> int:
    counts = [int(np.count_nonzero(spec.true_betas[i])) for i in range(spec.n_stocks)]
    return max(1, int(round(float(np.mean(counts)))))


def intercept_size(spec: SynthSpec, n_reps: int, level: float = 0.05) -> CalibrationRow:
    """Two-step intercept test on stationary level designs with zero alpha."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 101]))
    n, p = spec.n_weeks, _mean_support(spec)
    rejections = 0
    for _ in range(n_reps):
        v = rng.standard_normal((n, p))
        beta = rng.uniform(0.6, 1.4, size=p)
        y = v @ beta + rng.standard_normal(n) * spec.noise_sd
        if intercept_test(y, v) < level:
            rejections += 1
    return _row("intercept", rejections, n_reps, f"stationary levels, n={n}, p={p}")


def linear_size(spec: SynthSpec, n_reps: int, level: float = 0.05) -> CalibrationRow:
    """Half-period interaction test under constant coefficients."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 102]))
    n, p = spec.n_weeks - 1, _mean_support(spec)
    half = HalfIndicator.from_times(np.arange(n), n // 2)
    rejections = 0
    for _ in range(n_reps):
        dv = rng.standard_normal((n, p))
        beta = rng.uniform(0.6, 1.4, size=p)
        dy = dv @ beta + rng.standard_normal(n) * spec.noise_sd
        p_val, _ = linear_invariance_test(dy, dv, half)
        if p_val < level:
            rejections += 1
    return _row("linear", rejections, n_reps, f"constant betas, n={n}, p={p}")


def anova_size(spec: SynthSpec, n_reps: int, level: float = 0.05,
               p_extra: int = 2) -> CalibrationRow:
    """Nested F comparison with pure-noise extra columns."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 103]))
    n, p = spec.n_weeks - 1, _mean_support(spec)
    rejections = 0
    for _ in range(n_reps):
        base = rng.standard_normal((n, p))
        extra = rng.standard_normal((n, p_extra))
        beta = rng.uniform(0.6, 1.4, size=p)
        y = base @ beta + rng.standard_normal(n) * spec.noise_sd
        reduced = ols_fit(base, y)
        full = ols_fit(np.hstack([base, extra]), y)
        if nested_anova(full, reduced, n).p_value < level:
            rejections += 1
    return _row("anova", rejections, n_reps, f"{p_extra} noise columns, n={n}, p={p}")


def spline_size(spec: SynthSpec, n_reps: int, level: float = 0.05,
                basis_size: int = 5) -> CalibrationRow:
    """Spline time-variation test under constant coefficients."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 104]))
    n, p = spec.n_weeks - 1, _mean_support(spec)
    t_norm = np.linspace(0.0, 1.0, n)
    rejections = 0
    for _ in range(n_reps):
        dv = rng.standard_normal((n, p))
        beta = rng.uniform(0.6, 1.4, size=p)
        dy = dv @ beta + rng.standard_normal(n) * spec.noise_sd
        if spline_invariance_test(dy, dv, t_norm, basis_size) < level:
            rejections += 1
    return _row("spline", rejections, n_reps, f"basis={basis_size}, n={n}, p={p}")


def null_battery(spec: SynthSpec, n_reps: int, level: float = 0.05) -> CalibrationReport:
    """Empirical rejection rates of every battery at the nominal level on
    null (constant-beta, zero-alpha) families."""
    if n_reps < 1:
        raise ValueError("n_reps must be positive")
    if any(d.kind != "constant" for d in spec.beta_dynamics) or np.any(spec.alpha != 0):
        raise ValueError("null battery requires constant betas and zero alpha")
    rows = (
        intercept_size(spec, n_reps, level),
        linear_size(spec, n_reps, level),
        anova_size(spec, n_reps, level),
        spline_size(spec, n_reps, level),
    )
    return CalibrationReport(rows=rows, nominal=level)


def power_ladder(spec: SynthSpec, jump_sizes: tuple[float, ...] = (0.5, 1.0, 2.0),
                 n_reps: int = 200, level: float = 0.05) -> CalibrationReport:
    """Rejection rate of the half-period test against midpoint jumps of
    increasing size; power must be monotone in the jump."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 105]))
    n, p = spec.n_weeks - 1, _mean_support(spec)
    half = HalfIndicator.from_times(np.arange(n), n // 2)
    rows = []
    for size in jump_sizes:
        rejections = 0
        for _ in range(n_reps):
            dv = rng.standard_normal((n, p))
            beta = rng.uniform(0.6, 1.4, size=p)
            shifted = beta + size
            dy = np.where(half.h[:, None] > 0, dv * shifted, dv * beta).sum(axis=1)
            dy = dy + rng.standard_normal(n) * spec.noise_sd
            p_val, _ = linear_invariance_test(dy, dv, half)
            if p_val < level:
                rejections += 1
        rows.append(_row(f"jump={size:g}", rejections, n_reps, f"n={n}, p={p}"))
    return CalibrationReport(rows=tuple(rows), nominal=level)


def null_grid(spec: SynthSpec, model: str, cfg: RunConfig,
              workers: int = 1) -> SweepResult:
    """Half-period sweep over a fully-null market; with FDR control every
    populated cell should sit near zero."""
    prices, factors, _ = generate(spec)
    windows = enumerate_windows(cfg.first_year, cfg.last_year, cfg.min_len)
    return sweep(prices, factors, windows, model, "linear", cfg, workers=workers)
