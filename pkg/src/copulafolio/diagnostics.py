"""Performance and risk analytics over optimization results.

Annualization convention used everywhere in reports: mean daily log return
scaled by 252 trading days, volatility by sqrt(252), values displayed in
percent. Cumulative returns are sums of daily log returns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DataError, NoDownsideError, ParameterError
from .marketdata import RegimeTable, ReturnPanel
from .optimizer import MEASURES, CellError, OptimizationResult, ResultMatrix
from .riskmeasures import PortfolioWeights

TRADING_DAYS_PER_YEAR = 252

MEASURE_SHORT = {"variance": "V", "semivariance": "SV", "tail_risk": "TR"}


def annualized_mean_pct(daily_mean: float) -> float:
    return daily_mean * TRADING_DAYS_PER_YEAR * 100.0

def annualized_std_pct(daily_std: float) -> float:
    return daily_std * np.sqrt(TRADING_DAYS_PER_YEAR) * 100.0


def upr(daily_returns, r: float) -> float:
    """Upside potential ratio: mean excess gain over root mean squared
    shortfall, both relative to the target r."""
    x = np.asarray(daily_returns, dtype=float)
    if x.size == 0:
        raise ParameterError("upr needs a non-empty return sequence")
    diff = x - r
    down2 = float(np.mean(np.minimum(diff, 0.0) ** 2))
    if down2 == 0.0:
        raise NoDownsideError(f"no observation falls below target {r!r}")
    return float(np.mean(np.maximum(diff, 0.0))) / np.sqrt(down2)


def dissimilarity(wj, wk) -> float:
    """Scaled Euclidean distance between two portfolios' weight vectors.

    Weights are compared on the percent scale; :class:`PortfolioWeights`
    (wealth fractions) are converted, raw arrays are taken as already in
    percent.
    """
    def as_pct(w):
        if isinstance(w, PortfolioWeights):
            return w.as_array() * 100.0
        return np.asarray(w, dtype=float)

    a, b = as_pct(wj), as_pct(wk)
    return float(np.sqrt(np.sum((a - b) ** 2)) / a.size)


@dataclass(frozen=True)
class StrategyPath:
    """Per-regime weight assignments stitched into one daily return series."""

    dates: np.ndarray
    daily_returns: np.ndarray
    regime_weights: dict  # regime id -> PortfolioWeights
    measure_labels: dict  # regime id -> label of the measure(s) used

    def __len__(self) -> int:
        return self.dates.size


def build_strategy(panel: ReturnPanel, regimes: RegimeTable, weights_by_regime,
                   labels_by_regime=None) -> StrategyPath:
    """Apply each regime's weights to its dates; every panel date must be
    covered by exactly one regime."""
    covered = np.zeros(len(panel), dtype=bool)
    daily = np.empty(len(panel))
    for spec in regimes:
        if spec.id not in weights_by_regime:
            raise DataError(f"no weights assigned for regime {spec.id}")
        mask = (panel.dates >= spec.start) & (panel.dates <= spec.end)
        w = weights_by_regime[spec.id].as_array()
        daily[mask] = panel.returns[mask] @ w
        covered |= mask
    if not covered.all():
        missing = panel.dates[~covered]
        raise DataError(
            f"{missing.size} panel dates not covered by any regime "
            f"(first: {missing[0]})"
        )
    return StrategyPath(
        dates=panel.dates,
        daily_returns=daily,
        regime_weights=dict(weights_by_regime),
        measure_labels=dict(labels_by_regime or {}),
    )


@dataclass(frozen=True)
class CumulativeReturn:
    daily: np.ndarray  # running sum of daily log returns
    total: float
    annualized_pct: float


def cumulative_return(strategy: StrategyPath) -> CumulativeReturn:
    """Total and annualized cumulative log return of a strategy path."""
    if len(strategy) == 0:
        raise DataError("strategy covers no dates")
    running = np.cumsum(strategy.daily_returns)
    total = float(running[-1])
    annualized = total / len(strategy) * TRADING_DAYS_PER_YEAR * 100.0
    return CumulativeReturn(daily=running, total=total, annualized_pct=annualized)


@dataclass(frozen=True)
class DrawdownInput:
    """Brownian model of cumulative returns: drift per day, volatility per
    sqrt(day), horizon in days."""

    mu: float
    sigma: float
    horizon: float

    def __post_init__(self):
        if self.sigma < 0.0:
            raise ParameterError("sigma must be non-negative")
        if not (self.horizon > 0.0):
            raise ParameterError("horizon must be positive")


@dataclass(frozen=True)
class DrawdownMC:
    paths: int = 20_000
    steps: int = 2_520
    seed: int = 0


@dataclass(frozen=True)
class EmddEstimate:
    value_pct: float
    std_error_pct: float
    paths: int


def expected_max_drawdown(inp: DrawdownInput, mc: DrawdownMC) -> EmddEstimate:
    """Monte Carlo expected maximum drawdown of X_t = mu*t + sigma*W_t.

    Paths are simulated on a grid of ``mc.steps`` increments over the
    horizon; per-chunk seeding keeps the estimate deterministic for a fixed
    seed regardless of chunking. Result in percent units.
    """
    dt = inp.horizon / mc.steps
    if inp.sigma == 0.0:
        # every path is the deterministic line mu*t
        value = abs(inp.mu) * inp.horizon if inp.mu < 0.0 else 0.0
        return EmddEstimate(value_pct=value * 100.0, std_error_pct=0.0,
                            paths=mc.paths)
    chunk = max(1, min(mc.paths, 8_000_000 // mc.steps))
    drift = inp.mu * dt
    scale = inp.sigma * np.sqrt(dt)
    total = 0.0
    total_sq = 0.0
    done = 0
    idx = 0
    while done < mc.paths:
        n = min(chunk, mc.paths - done)
        rng = np.random.default_rng(np.random.SeedSequence(mc.seed, spawn_key=(idx,)))
        incr = drift + scale * rng.standard_normal((n, mc.steps))
        vals = _kernels.max_drawdown_paths(incr)
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        done += n
        idx += 1
    mean = total / mc.paths
    var = max(0.0, total_sq / mc.paths - mean * mean)
    se = np.sqrt(var / mc.paths)
    return EmddEstimate(value_pct=mean * 100.0, std_error_pct=se * 100.0,
                        paths=mc.paths)


def _regime_cumulative_pct(results: ResultMatrix, regime_id: int,
                           res: OptimizationResult) -> float:
    meta = results.regime_meta[regime_id]
    total = float(res.weights.as_array() @ np.asarray(meta["return_sum"]))
    return total / meta["n_days"] * TRADING_DAYS_PER_YEAR * 100.0


def best_per_regime(results: ResultMatrix) -> dict:
    """Winning measure(s) per (regime, case) by regime annualized cumulative
    return; exact ties are reported jointly."""
    winners = {}
    for rid in results.regime_ids:
        for cid in results.case_ids:
            scored = []
            for measure in results.measures:
                cell = results.get(rid, cid, measure)
                if isinstance(cell, CellError):
                    continue
                scored.append((measure, _regime_cumulative_pct(results, rid, cell)))
            if not scored:
                raise DataError(f"empty cell: regime {rid}, case {cid}")
            best_val = max(v for _, v in scored)
            tol = 1e-12 * max(1.0, abs(best_val))
            winners[(rid, cid)] = [m for m, v in scored if v >= best_val - tol]
    return winners


def superoptimal(results: ResultMatrix, winners: dict, case_id: int,
                 mc: DrawdownMC | None = None):
    """Stitch each regime's winning-measure weights into one strategy and
    report its whole-sample cumulative return and expected max drawdown."""
    if results.panel is None or results.regimes is None:
        raise DataError("result matrix lacks the panel/regime context")
    weights_by_regime = {}
    labels = {}
    for rid in results.regime_ids:
        winning = winners.get((rid, case_id))
        if not winning:
            raise DataError(f"no winner recorded for regime {rid}, case {case_id}")
        cell = results.get(rid, case_id, winning[0])
        weights_by_regime[rid] = cell.weights
        labels[rid] = "-".join(MEASURE_SHORT[m] for m in winning)
    strategy = build_strategy(results.panel, results.regimes,
                              weights_by_regime, labels)
    cum = cumulative_return(strategy)
    mc = mc or DrawdownMC(steps=len(strategy))
    emdd = expected_max_drawdown(
        DrawdownInput(
            mu=float(strategy.daily_returns.mean()),
            sigma=float(strategy.daily_returns.std(ddof=1)),
            horizon=float(len(strategy)),
        ),
        DrawdownMC(paths=mc.paths, steps=len(strategy), seed=mc.seed),
    )
    record = {
        "annualized_cumulative_pct": cum.annualized_pct,
        "emdd_pct": emdd.value_pct,
        "emdd_se_pct": emdd.std_error_pct,
    }
    return strategy, record
