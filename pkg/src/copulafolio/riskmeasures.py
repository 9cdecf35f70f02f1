"""Copula-weighted portfolio risk functionals over empirical marginals.

The three risk measures (variance, semi-variance below a target, tail mass
at or below a return threshold) are expectations of functions of the
portfolio return

    Rp(u, v, w) = w1 F1^{-1}(u) + w2 F2^{-1}(v) + w3 F3^{-1}(w)

taken under a copula on the unit cube. The cube measure is discretized once
into a :class:`ScenarioSet` (either copula Monte Carlo draws with uniform
probabilities, or a midpoint tensor grid weighted by the copula density) and
every measure then reduces to weighted moments of the scenario returns,
evaluated by the fused kernels in :mod:`copulafolio._kernels`.

:func:`expectation` exposes the raw quadrature/MC value of ``sum f * c`` so
its density-normalization error stays observable; the risk measures
normalize the scenario weights into a probability measure first, which keeps
variance-type results non-negative regardless of quadrature error.

Everything here works in daily return units; annualization happens at
reporting time only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _kernels
from .empirical import EmpiricalDistribution, quantile
from .errors import DataError, IntegrationError, ParameterError

INTEGRATION_METHODS = ("grid", "monte_carlo")


@dataclass(frozen=True)
class PortfolioWeights:
    """Wealth fractions (sp500, oil, gas); shorts and leverage allowed."""

    w1: float
    w2: float
    w3: float

    def __post_init__(self):
        if abs(self.w1 + self.w2 + self.w3 - 1.0) > 1e-8:
            raise ParameterError(
                f"weights must sum to 1 within 1e-8, got {self.w1 + self.w2 + self.w3!r}"
            )

    def as_array(self) -> np.ndarray:
        return np.array([self.w1, self.w2, self.w3])

    @classmethod
    def naive(cls) -> "PortfolioWeights":
        return cls(1.0 / 3.0, 1.0 / 3.0, 1.0 - 2.0 / 3.0)

    @classmethod
    def from_array(cls, arr) -> "PortfolioWeights":
        arr = np.asarray(arr, dtype=float)
        return cls(float(arr[0]), float(arr[1]), float(arr[2]))


@dataclass(frozen=True)
class IntegrationConfig:
    method: str = "monte_carlo"
    grid_points_per_axis: int = 64
    mc_samples: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.method not in INTEGRATION_METHODS:
            raise ParameterError(f"method must be one of {INTEGRATION_METHODS}")
        if self.grid_points_per_axis < 8:
            raise ParameterError("grid_points_per_axis must be >= 8")
        if self.mc_samples < 10_000:
            raise ParameterError("mc_samples must be >= 10000")


@dataclass(frozen=True)
class TailSpec:
    """Tail threshold q5 (daily log-return units) and the logistic bandwidth
    used when the tail indicator must be differentiable."""

    q5: float
    smoothing_bandwidth: float = 1e-4

    def __post_init__(self):
        if not (self.smoothing_bandwidth > 0.0):
            raise ParameterError("smoothing_bandwidth must be positive")


@dataclass(frozen=True)
class ScenarioSet:
    """Discretized copula measure: cube points, mapped marginal quantiles,
    and raw scenario weights (uniform for MC, density/N^3 for grid)."""

    points: np.ndarray  # (n, 3) cube coordinates
    quantiles: np.ndarray  # (n, 3) marginal quantile values
    probs: np.ndarray  # (n,) raw weights
    method: str
    n_clamped: int

    @property
    def total_mass(self) -> float:
        return float(self.probs.sum())

    @property
    def norm_probs(self) -> np.ndarray:
        return self.probs / self.total_mass

    @property
    def mean_returns(self) -> np.ndarray:
        """Per-asset expected daily return under the normalized measure."""
        return self.norm_probs @ self.quantiles


def build_scenarios(model, dists, cfg: IntegrationConfig) -> ScenarioSet:
    """Discretize the copula measure and map it through the marginals."""
    if len(dists) != 3:
        raise ParameterError("dists must be a triplet of EmpiricalDistribution")
    if cfg.method == "monte_carlo":
        pts = model.sample(cfg.mc_samples, cfg.seed)
        n_clamped = int(np.count_nonzero((pts <= 1e-12) | (pts >= 1.0 - 1e-12)))
        probs = np.full(pts.shape[0], 1.0 / pts.shape[0])
    else:
        n = cfg.grid_points_per_axis
        mids = (np.arange(n) + 0.5) / n
        uu, vv, ww = np.meshgrid(mids, mids, mids, indexing="ij")
        pts = np.column_stack([uu.ravel(), vv.ravel(), ww.ravel()])
        dens = np.asarray(model.density(pts[:, 0], pts[:, 1], pts[:, 2]))
        probs = dens / float(n ** 3)
        n_clamped = 0
    q = np.column_stack([quantile(d, pts[:, i]) for i, d in enumerate(dists)])
    return ScenarioSet(
        points=pts,
        quantiles=np.ascontiguousarray(q),
        probs=np.ascontiguousarray(probs),
        method=cfg.method,
        n_clamped=n_clamped,
    )


def portfolio_return(weights: PortfolioWeights, dists, point):
    """Portfolio daily return at a unit-cube point (or arrays of points)."""
    u, v, w = point
    return (
        weights.w1 * quantile(dists[0], u)
        + weights.w2 * quantile(dists[1], v)
        + weights.w3 * quantile(dists[2], w)
    )


def expectation(model, dists, f, cfg: IntegrationConfig, scenarios=None) -> float:
    """Raw integral of ``f(u, v, w)`` against the copula density.

    Grid mode is midpoint tensor quadrature of f*c over interior cells; MC
    mode is the sample mean of f over copula draws (the density weight is
    implicit in sampling). Deterministic for a fixed config.
    """
    sc = scenarios if scenarios is not None else build_scenarios(model, dists, cfg)
    vals = np.asarray(f(sc.points[:, 0], sc.points[:, 1], sc.points[:, 2]), dtype=float)
    vals = np.broadcast_to(vals, sc.probs.shape)
    bad = ~np.isfinite(vals)
    if bad.any():
        i = int(np.argmax(bad))
        raise IntegrationError(
            f"non-finite integrand value at cube point {tuple(sc.points[i])}"
        )
    return float(sc.probs @ vals)


def variance_measure(weights, dists, model, cfg, scenarios=None) -> float:
    """Var(Rp) = E[Rp^2] - (E[Rp])^2 under the copula measure."""
    sc = scenarios if scenarios is not None else build_scenarios(model, dists, cfg)
    m1, m2 = _kernels.scenario_moments(
        sc.quantiles, weights.w1, weights.w2, weights.w3, sc.norm_probs
    )
    return m2 - m1 * m1


def semivariance_measure(weights, dists, model, cfg, r: float, scenarios=None) -> float:
    """Var[min(0, Rp - r)]: the downside variance below target r."""
    sc = scenarios if scenarios is not None else build_scenarios(model, dists, cfg)
    m1, m2 = _kernels.downside_moments(
        sc.quantiles, weights.w1, weights.w2, weights.w3, sc.norm_probs, r
    )
    return m2 - m1 * m1


def tail_risk_measure(
    weights, dists, model, cfg, tail: TailSpec, mode: str = "hard", scenarios=None
) -> float:
    """Probability that Rp falls at or below the tail threshold.

    ``hard`` uses the exact indicator; ``smooth`` substitutes the logistic
    surrogate 1/(1+exp((Rp-q5)/h)), which is what gradient-based minimization
    needs. Reported tail risk should always be re-evaluated in hard mode.
    """
    if mode not in ("hard", "smooth"):
        raise ParameterError(f"mode must be 'hard' or 'smooth', got {mode!r}")
    sc = scenarios if scenarios is not None else build_scenarios(model, dists, cfg)
    if mode == "hard":
        return _kernels.tail_mass_hard(
            sc.quantiles, weights.w1, weights.w2, weights.w3, sc.norm_probs, tail.q5
        )
    return _kernels.tail_mass_smooth(
        sc.quantiles, weights.w1, weights.w2, weights.w3, sc.norm_probs,
        tail.q5, tail.smoothing_bandwidth,
    )


def scenario_upr(sc: ScenarioSet, weights: PortfolioWeights, r: float):
    """Upside potential ratio under the scenario measure; None when no
    scenario falls below the target (no downside to divide by)."""
    up, dn2 = _kernels.upside_downside_moments(
        sc.quantiles, weights.w1, weights.w2, weights.w3, sc.norm_probs, r
    )
    if dn2 <= 0.0:
        return None
    return up / np.sqrt(dn2)


def target_return(naive_daily_mean: float) -> float:
    """Target rule: the benchmark mean plus half its absolute value."""
    return naive_daily_mean + 0.5 * abs(naive_daily_mean)


@dataclass(frozen=True)
class NaiveStats:
    """Daily-unit sample statistics of the equal-weight benchmark."""

    n_obs: int
    mean: float
    std: float
    skewness: float
    excess_kurtosis: float
    upr: float | None
    target: float
    degenerate: bool


def naive_stats(panel) -> NaiveStats:
    """Sample moments, UPR, and the target-return rule for the 1/3-each
    benchmark over a regime panel."""
    from .diagnostics import upr as sample_upr
    from .errors import NoDownsideError

    if len(panel) < 30:
        raise DataError(f"need >= 30 regime observations, got {len(panel)}")
    daily = panel.returns @ np.array([1.0, 1.0, 1.0]) / 3.0
    mean = float(daily.mean())
    std = float(daily.std(ddof=1))
    target = target_return(mean)
    if std == 0.0:
        return NaiveStats(
            n_obs=daily.size, mean=mean, std=0.0, skewness=float("nan"),
            excess_kurtosis=float("nan"), upr=None, target=target, degenerate=True,
        )
    try:
        ratio = sample_upr(daily, target)
    except NoDownsideError:
        ratio = None
    return NaiveStats(
        n_obs=daily.size,
        mean=mean,
        std=std,
        skewness=float(stats.skew(daily)),
        excess_kurtosis=float(stats.kurtosis(daily, fisher=True)),
        upr=ratio,
        target=target,
        degenerate=False,
    )
