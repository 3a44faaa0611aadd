"""Synthetic markets with known ground truth.

Factor differences are Gaussian with a configurable covariance (default:
one market-wide common component plus class-level components, so the
clustering stage has genuine structure to find).  Stock differences follow
the linear factor model with per-stock coefficient dynamics (constant, a
midpoint jump, or a linear drift), i.i.d. Gaussian noise, and an optional
price-level intercept.  Levels integrate the differences; masks honor
per-factor inception weeks.  Everything is a pure function of the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .config import parse_keyvalue
from .errors import InvalidCovariance, ValidationError
from .panels import (
    ROLE_ETF,
    ROLE_FF5,
    ROLE_MARKET,
    ROLE_MMA,
    FactorPanel,
    PricePanel,
    compound_mma,
)
from .taxonomy import Taxonomy, builtin_taxonomy
from .windows import WEEK_DAYS

START_DATE = np.datetime64("2007-01-05", "D")  # first Friday of 2007
BASE_PRICE = 1000.0
BASE_FACTOR_LEVEL = 100.0

DYN_CONSTANT = "constant"
DYN_JUMP = "jump"
DYN_DRIFT = "drift"


@dataclass(frozen=True)
class BetaDynamics:
    kind: str = DYN_CONSTANT
    size: float = 0.0      # jump height or drift slope over the full span
    at_week: int = 0       # first week the jump applies

    def __post_init__(self):
        if self.kind not in (DYN_CONSTANT, DYN_JUMP, DYN_DRIFT):
            raise ValidationError(f"unknown dynamics kind {self.kind!r}")
        if not np.isfinite(self.size):
            raise ValidationError("dynamics size must be finite")


@dataclass(frozen=True)
class SynthSpec:
    """Full description of a simulated market."""

    n_weeks: int
    n_factors: int            # total columns including mma and market
    n_stocks: int
    factor_cov: np.ndarray    # (n_factors - 1)^2 covariance of non-mma differences
    true_betas: np.ndarray    # (n_stocks, n_factors)
    beta_dynamics: tuple[BetaDynamics, ...]
    alpha: np.ndarray         # per-stock price-level intercept
    noise_sd: float
    inception_week: np.ndarray  # per-factor first availability
    seed: int
    n_ff5: int = 4

    def __post_init__(self):
        cov = np.asarray(self.factor_cov, dtype=float)
        m = self.n_factors - 1
        if cov.shape != (m, m) or not np.allclose(cov, cov.T):
            raise InvalidCovariance("factor covariance must be symmetric (n_factors-1)^2")
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise InvalidCovariance("factor covariance must be positive-definite") from None
        if self.true_betas.shape != (self.n_stocks, self.n_factors):
            raise ValidationError("true_betas must be (n_stocks, n_factors)")
        if len(self.beta_dynamics) != self.n_stocks or self.alpha.shape != (self.n_stocks,):
            raise ValidationError("per-stock dynamics and alpha required")
        if self.inception_week.shape != (self.n_factors,):
            raise ValidationError("per-factor inception weeks required")
        if not np.isfinite(self.noise_sd) or self.noise_sd < 0:
            raise ValidationError("noise_sd must be finite and nonnegative")

    @property
    def n_etf(self) -> int:
        return self.n_factors - 2 - self.n_ff5


@dataclass(frozen=True)
class GroundTruth:
    spec: SynthSpec
    factor_names: tuple[str, ...]
    asset_names: tuple[str, ...]

    def beta_at_week(self, stock: int, week: int) -> np.ndarray:
        """Active loadings over the difference interval starting at ``week``."""
        base = self.spec.true_betas[stock].copy()
        dyn = self.spec.beta_dynamics[stock]
        active = base != 0
        if dyn.kind == DYN_JUMP and week >= dyn.at_week:
            base[active] += dyn.size
        elif dyn.kind == DYN_DRIFT:
            base[active] += dyn.size * week / max(self.spec.n_weeks - 1, 1)
        return base

    def true_support(self, stock: int) -> tuple[int, ...]:
        return tuple(int(j) for j in np.nonzero(self.spec.true_betas[stock])[0])


def default_factor_cov(n_factors: int, n_ff5: int = 4, sd: float = 1.0,
                       market_share: float = 0.35, class_share: float = 0.35,
                       n_classes: int = 5) -> np.ndarray:
    """Covariance of the non-mma factor differences built from one common
    component, rotating class components for the ETF columns, and
    idiosyncratic remainders."""
    m = n_factors - 1  # market + ff5 + etf
    n_etf = m - 1 - n_ff5
    loadings = np.zeros((m, 1 + n_classes))
    idio = np.zeros(m)
    loadings[0, 0] = sd  # market: pure common component
    for k in range(1, 1 + n_ff5):
        loadings[k, 0] = sd * np.sqrt(0.05)
        idio[k] = sd * np.sqrt(0.95)
    for e in range(n_etf):
        k = 1 + n_ff5 + e
        cls = e % n_classes
        loadings[k, 0] = sd * np.sqrt(market_share)
        loadings[k, 1 + cls] = sd * np.sqrt(class_share)
        idio[k] = sd * np.sqrt(max(1.0 - market_share - class_share, 0.05))
    cov = loadings @ loadings.T + np.diag(idio**2)
    # market has no idiosyncratic slack above; give it a sliver so the
    # matrix is strictly positive-definite
    cov[0, 0] += (0.05 * sd) ** 2
    return cov


def make_spec(
    n_weeks: int = 626,
    n_factors: int = 16,
    n_stocks: int = 40,
    n_ff5: int = 4,
    noise_sd: float = 1.0,
    seed: int = 0,
    betas_per_stock: int = 3,
    beta_pool: str = "etf",      # etf | ff5 | all
    beta_low: float = 0.6,
    beta_high: float = 1.4,
    jump_fraction: float = 0.0,
    jump_size: float = 0.0,
    jump_week: int | None = None,
    drift_fraction: float = 0.0,
    drift_slope: float = 0.0,
    alpha: float = 0.0,
    alpha_fraction: float = 0.0,
    late_fraction: float = 0.0,
    late_week: int | None = None,
    factor_sd: float = 1.0,
    market_share: float = 0.35,
    class_share: float = 0.35,
) -> SynthSpec:
    """Scenario builder: draws ground-truth loadings and dynamics from the
    seed so a key-value scenario file fully determines the market."""
    if n_factors < 2 + n_ff5 + 1:
        raise ValidationError("need at least one ETF factor beyond mma/market/ff5")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    n_etf = n_factors - 2 - n_ff5
    pools = {
        "etf": np.arange(2 + n_ff5, n_factors),
        "ff5": np.arange(1, 2 + n_ff5),
        "all": np.arange(1, n_factors),
    }
    pool = pools[beta_pool]
    betas = np.zeros((n_stocks, n_factors))
    for i in range(n_stocks):
        chosen = rng.choice(pool, size=min(betas_per_stock, pool.size), replace=False)
        betas[i, np.sort(chosen)] = rng.uniform(beta_low, beta_high, size=chosen.size)

    dynamics: list[BetaDynamics] = []
    n_jump = int(round(jump_fraction * n_stocks))
    n_drift = int(round(drift_fraction * n_stocks))
    at = n_weeks // 2 if jump_week is None else jump_week
    for i in range(n_stocks):
        if i < n_jump:
            dynamics.append(BetaDynamics(DYN_JUMP, jump_size, at))
        elif i < n_jump + n_drift:
            dynamics.append(BetaDynamics(DYN_DRIFT, drift_slope))
        else:
            dynamics.append(BetaDynamics())

    alphas = np.zeros(n_stocks)
    n_alpha = int(round(alpha_fraction * n_stocks)) if alpha_fraction else (
        n_stocks if alpha else 0
    )
    alphas[:n_alpha] = alpha

    inception = np.zeros(n_factors, dtype=int)
    n_late = int(round(late_fraction * n_etf))
    if n_late:
        late = np.arange(n_factors - n_late, n_factors)
        inception[late] = n_weeks // 2 if late_week is None else late_week
    return SynthSpec(
        n_weeks=n_weeks,
        n_factors=n_factors,
        n_stocks=n_stocks,
        factor_cov=default_factor_cov(n_factors, n_ff5, sd=factor_sd,
                                      market_share=market_share, class_share=class_share),
        true_betas=betas,
        beta_dynamics=tuple(dynamics),
        alpha=alphas,
        noise_sd=noise_sd,
        inception_week=inception,
        seed=seed,
        n_ff5=n_ff5,
    )


def spec_from_file(path, **overrides) -> SynthSpec:
    raw = parse_keyvalue(path)
    raw.update(overrides)
    return make_spec(**raw)


def _factor_names(spec: SynthSpec) -> tuple[str, ...]:
    names = ["MMA", "MKT"]
    names += [f"FF_{k}" for k in ("SMB", "HML", "RMW", "CMA")[: spec.n_ff5]]
    names += [f"ETF_{e:03d}" for e in range(spec.n_etf)]
    return tuple(names)


def _etf_categories(spec: SynthSpec, taxonomy: Taxonomy) -> dict[str, tuple[str, str]]:
    """Deterministic class/subclass labels cycling through the taxonomy in
    the same rotation the default covariance uses for class components."""
    n_classes = 5
    by_class: dict[str, list[str]] = {}
    for sub, cls in taxonomy.subclasses.items():
        by_class.setdefault(cls, []).append(sub)
    class_names = sorted(by_class)[:n_classes]
    out = {}
    for e in range(spec.n_etf):
        cls = class_names[e % n_classes]
        out[f"ETF_{e:03d}"] = (cls, sorted(by_class[cls])[0])
    return out


def generate(spec: SynthSpec) -> tuple[PricePanel, FactorPanel, GroundTruth]:
    """Simulate one market; the seed fully determines the output."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0xA11CE]))
    n, m = spec.n_weeks, spec.n_factors
    dates = START_DATE + np.arange(n) * np.timedelta64(WEEK_DAYS, "D")

    rates = rng.uniform(2e-4, 6e-4, size=n - 1)
    mma = compound_mma(rates)

    chol = np.linalg.cholesky(np.asarray(spec.factor_cov, dtype=float))
    dv_rest = rng.standard_normal((n - 1, m - 1)) @ chol.T
    dv = np.column_stack([np.diff(mma), dv_rest])

    levels = np.empty((n, m))
    levels[0, 0] = 1.0
    levels[0, 1:] = BASE_FACTOR_LEVEL
    levels[1:] = levels[0] + np.cumsum(dv, axis=0)
    levels[:, 0] = mma

    truth = GroundTruth(spec=spec, factor_names=_factor_names(spec),
                        asset_names=tuple(f"S{i:04d}" for i in range(spec.n_stocks)))

    noise = rng.standard_normal((n - 1, spec.n_stocks)) * spec.noise_sd
    dy = np.empty((n - 1, spec.n_stocks))
    weeks = np.arange(n - 1)
    for i in range(spec.n_stocks):
        dyn = spec.beta_dynamics[i]
        base = spec.true_betas[i]
        if dyn.kind == DYN_CONSTANT or dyn.size == 0.0:
            dy[:, i] = dv @ base
        else:
            active = (base != 0).astype(float)
            if dyn.kind == DYN_JUMP:
                bump = (weeks >= dyn.at_week).astype(float)[:, None] * (dyn.size * active)
            else:
                bump = (weeks / max(n - 2, 1))[:, None] * (dyn.size * active)
            dy[:, i] = ((base + bump) * dv).sum(axis=1)
    dy += noise

    prices = np.empty((n, spec.n_stocks))
    prices[0] = BASE_PRICE
    prices[1:] = BASE_PRICE + np.cumsum(dy, axis=0)
    prices += spec.alpha
    if np.any(prices <= 0):
        raise ValidationError("simulated prices crossed zero; lower noise or factor scale")

    returns = np.full_like(prices, np.nan)
    returns[1:] = prices[1:] / prices[:-1] - 1.0

    mask_values = levels.copy()
    for j in range(m):
        w = int(spec.inception_week[j])
        if w > 0:
            mask_values[:w, j] = np.nan
            if j == 0:
                raise ValidationError("mma cannot have a late inception")

    taxonomy = builtin_taxonomy()
    roles = (ROLE_MMA, ROLE_MARKET) + (ROLE_FF5,) * spec.n_ff5 + (ROLE_ETF,) * spec.n_etf
    factor_panel = FactorPanel.build(
        dates=dates,
        factors=truth.factor_names,
        roles=roles,
        values=mask_values,
        categories=_etf_categories(spec, taxonomy),
        taxonomy=taxonomy,
    )
    price_panel = PricePanel.build(
        dates=dates,
        assets=truth.asset_names,
        prices=prices,
        returns=returns,
    )
    return price_panel, factor_panel, truth


def child_spec(spec: SynthSpec, rep: int) -> SynthSpec:
    """Replication with a derived seed; everything else unchanged."""
    child_seed = int(np.random.SeedSequence([spec.seed, rep + 1]).generate_state(1)[0])
    return replace(spec, seed=child_seed)
