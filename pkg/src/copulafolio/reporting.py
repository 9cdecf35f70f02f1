"""Serialization of panels, fit scores, result matrices, and report tables.

All CSV outputs start with ``#`` comment rows declaring the units and the
root seed; files are written via a temp-file-then-rename so interrupted runs
never leave partial artifacts.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .diagnostics import (
    MEASURE_SHORT,
    TRADING_DAYS_PER_YEAR,
    DrawdownInput,
    DrawdownMC,
    annualized_mean_pct,
    annualized_std_pct,
    best_per_regime,
    build_strategy,
    cumulative_return,
    dissimilarity,
    expected_max_drawdown,
    superoptimal,
)
from .errors import DataError
from .marketdata import ReturnPanel
from .optimizer import CellError, OptimizationResult, ResultMatrix
from .riskmeasures import NaiveStats, PortfolioWeights


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, comments, header, rows) -> None:
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _pct(x) -> str:
    if x is None or (isinstance(x, float) and not np.isfinite(x)):
        return ""
    return f"{x:.4f}"


def write_panel_csv(panel: ReturnPanel, path, seed: int) -> None:
    rows = [
        [str(panel.dates[i])] + [repr(float(v)) for v in panel.returns[i]]
        for i in range(len(panel))
    ]
    write_csv(
        path,
        [f"aligned daily log returns (dimensionless); seed={seed}"],
        ["date", "sp500", "oil", "gas"],
        rows,
    )


def read_panel_csv(path) -> ReturnPanel:
    path = Path(path)
    if not path.exists():
        raise DataError(f"cached panel not found: {path} (run ingest first)")
    dates, rets = [], []
    with path.open() as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("date"):
                continue
            parts = line.split(",")
            dates.append(np.datetime64(parts[0], "D"))
            rets.append([float(p) for p in parts[1:4]])
    if not dates:
        raise DataError(f"cached panel {path} has no rows")
    return ReturnPanel(dates=np.array(dates), returns=np.array(rets))


def _naive_to_dict(s: NaiveStats) -> dict:
    return {
        "n_obs": s.n_obs, "mean": s.mean, "std": s.std,
        "skewness": s.skewness, "excess_kurtosis": s.excess_kurtosis,
        "upr": s.upr, "target": s.target, "degenerate": s.degenerate,
    }


def _naive_from_dict(d: dict) -> NaiveStats:
    return NaiveStats(**d)


def results_to_json(results: ResultMatrix) -> str:
    cells = []
    for (rid, cid, measure), cell in results.cells.items():
        entry = {"regime": rid, "case": cid, "measure": measure}
        if isinstance(cell, CellError):
            entry["status"] = "error"
            entry["error"] = cell.error
        else:
            entry.update(
                status="ok",
                w1=cell.weights.w1, w2=cell.weights.w2, w3=cell.weights.w3,
                achieved_r=cell.achieved_r, objective=cell.objective,
                upr=cell.upr, iterations=cell.iterations,
                converged=cell.converged,
                constraint_residuals=cell.constraint_residuals,
            )
        cells.append(entry)
    regime_meta = {}
    for rid, meta in results.regime_meta.items():
        meta = dict(meta)
        if isinstance(meta.get("naive"), NaiveStats):
            meta["naive"] = _naive_to_dict(meta["naive"])
        regime_meta[str(rid)] = meta
    doc = {
        "meta": {
            "seed": results.seed,
            "regime_ids": list(results.regime_ids),
            "case_ids": list(results.case_ids),
            "measures": list(results.measures),
        },
        "regime_meta": regime_meta,
        "cells": cells,
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def results_from_json(text: str, panel=None, regimes=None) -> ResultMatrix:
    doc = json.loads(text)
    cells = {}
    for entry in doc["cells"]:
        key = (entry["regime"], entry["case"], entry["measure"])
        if entry["status"] == "error":
            cells[key] = CellError(entry["error"])
        else:
            cells[key] = OptimizationResult(
                weights=PortfolioWeights(entry["w1"], entry["w2"], entry["w3"]),
                achieved_r=entry["achieved_r"],
                objective=entry["objective"],
                measure=entry["measure"],
                upr=entry["upr"],
                iterations=entry["iterations"],
                converged=entry["converged"],
                constraint_residuals=entry["constraint_residuals"],
                case_id=entry["case"],
            )
    regime_meta = {}
    for rid, meta in doc["regime_meta"].items():
        meta = dict(meta)
        if isinstance(meta.get("naive"), dict):
            meta["naive"] = _naive_from_dict(meta["naive"])
        regime_meta[int(rid)] = meta
    return ResultMatrix(
        cells=cells,
        regime_ids=tuple(doc["meta"]["regime_ids"]),
        case_ids=tuple(doc["meta"]["case_ids"]),
        measures=tuple(doc["meta"]["measures"]),
        regime_meta=regime_meta,
        seed=doc["meta"]["seed"],
        panel=panel,
        regimes=regimes,
    )


def _annualized_r_pct(res: OptimizationResult) -> float:
    r = res.achieved_r
    return r * TRADING_DAYS_PER_YEAR * 100.0


def write_measure_table(results: ResultMatrix, measure: str, path,
                        seed: int) -> None:
    """One optimal-portfolio table per measure: per case, the weights,
    target/achieved return, and UPR, all in percent at 4 decimals."""
    header = ["regime"]
    for cid in results.case_ids:
        header += [f"case{cid}_{c}" for c in ("w1", "w2", "w3", "r", "upr")]
    rows = []
    for rid in results.regime_ids:
        row = [str(rid)]
        for cid in results.case_ids:
            cell = results.get(rid, cid, measure)
            if isinstance(cell, CellError):
                row += [""] * 5
            else:
                w = cell.weights.as_array() * 100.0
                row += [
                    _pct(w[0]), _pct(w[1]), _pct(w[2]),
                    _pct(_annualized_r_pct(cell)),
                    _pct(None if cell.upr is None else cell.upr * 100.0),
                ]
        rows.append(row)
    write_csv(
        path,
        [
            f"optimal portfolios under {measure} minimization",
            "units: percent; weights and annualized return; UPR = ratio x 100",
            f"seed={seed}",
        ],
        header,
        rows,
    )


def write_fit_scores(score_rows, path, seed: int) -> None:
    header = ["regime", "family", "status", "loglik", "k", "aic", "selected", "error"]
    rows = []
    for rid, table, chosen in score_rows:
        for entry in table:
            rows.append([
                str(rid), entry["family"], entry["status"],
                "" if entry["loglik"] is None else f"{entry['loglik']:.6f}",
                "" if entry["k"] is None else str(entry["k"]),
                "" if entry["aic"] is None else f"{entry['aic']:.6f}",
                "yes" if entry["family"] == chosen else "",
                entry["error"] or "",
            ])
    write_csv(
        path,
        ["copula selection scores (AIC = 2k - 2 loglik); dimensionless",
         f"seed={seed}"],
        header,
        rows,
    )


def write_naive_table(results: ResultMatrix, path, seed: int) -> None:
    header = ["regime", "average_return", "target_return", "std_deviation",
              "skewness", "excess_kurtosis", "upr"]
    rows = []
    for rid in results.regime_ids:
        meta = results.regime_meta[rid]
        stats = meta.get("naive")
        if stats is None:
            rows.append([str(rid)] + [""] * 6)
            continue
        rows.append([
            str(rid),
            _pct(annualized_mean_pct(stats.mean)),
            _pct(annualized_mean_pct(stats.target)),
            _pct(annualized_std_pct(stats.std)),
            _pct(stats.skewness),
            _pct(stats.excess_kurtosis),
            _pct(None if stats.upr is None else stats.upr * 100.0),
        ])
    write_csv(
        path,
        ["equal-weight benchmark attributes; percent, annualized "
         "(skewness/kurtosis are daily sample moments)", f"seed={seed}"],
        header,
        rows,
    )


def _case_pairs(case_ids):
    ids = list(case_ids)
    return [(a, b) for i, a in enumerate(ids) for b in ids[i + 1:]]


def write_di_table(results: ResultMatrix, measure: str, path, seed: int) -> None:
    header = ["pair"] + [str(rid) for rid in results.regime_ids]
    rows = []
    for a, b in _case_pairs(results.case_ids):
        row = [f"{a}-{b}"]
        for rid in results.regime_ids:
            ca = results.get(rid, a, measure)
            cb = results.get(rid, b, measure)
            if isinstance(ca, CellError) or isinstance(cb, CellError):
                row.append("")
            else:
                row.append(_pct(dissimilarity(ca.weights, cb.weights)))
        rows.append(row)
    write_csv(
        path,
        [f"dissimilarity index across case pairs under {measure}; "
         "percent-weight units", f"seed={seed}"],
        header,
        rows,
    )


def measure_strategy(results: ResultMatrix, measure: str, case_id: int):
    """Whole-sample strategy that applies one measure's optimal weights
    regime by regime; None when any regime cell failed."""
    weights = {}
    for rid in results.regime_ids:
        cell = results.get(rid, case_id, measure)
        if isinstance(cell, CellError):
            return None
        weights[rid] = cell.weights
    labels = {rid: MEASURE_SHORT[measure] for rid in results.regime_ids}
    return build_strategy(results.panel, results.regimes, weights, labels)


def write_strategy_reports(results: ResultMatrix, outdir, seed: int,
                           emdd_paths: int = 20_000) -> None:
    """Cumulative-return and drawdown tables plus per-case trajectory CSVs."""
    outdir = Path(outdir)
    winners = best_per_regime_safe(results)
    cum_rows = {m: {} for m in results.measures}
    emdd_rows = {m: {} for m in results.measures}
    super_rows = {}
    trajectories = {}
    for cid in results.case_ids:
        traj_cols = {}
        for measure in results.measures:
            strategy = measure_strategy(results, measure, cid)
            if strategy is None:
                continue
            cum = cumulative_return(strategy)
            cum_rows[measure][cid] = cum.annualized_pct
            est = expected_max_drawdown(
                DrawdownInput(
                    mu=float(strategy.daily_returns.mean()),
                    sigma=float(strategy.daily_returns.std(ddof=1)),
                    horizon=float(len(strategy)),
                ),
                DrawdownMC(paths=emdd_paths, steps=len(strategy), seed=seed),
            )
            emdd_rows[measure][cid] = est.value_pct
            traj_cols[measure] = cum.daily
        if winners is not None:
            try:
                strategy, record = superoptimal(
                    results, winners, cid,
                    mc=DrawdownMC(paths=emdd_paths, seed=seed),
                )
                super_rows[cid] = record
                traj_cols["superoptimal"] = cumulative_return(strategy).daily
            except DataError:
                pass
        trajectories[cid] = traj_cols

    def table(path, rows_by_measure, title):
        header = ["measure"] + [f"case{cid}" for cid in results.case_ids]
        rows = []
        for measure in results.measures:
            row = [measure]
            for cid in results.case_ids:
                val = rows_by_measure[measure].get(cid)
                row.append(_pct(val))
            rows.append(row)
        write_csv(path, [title, f"seed={seed}"], header, rows)

    table(outdir / "cumulative_returns.csv", cum_rows,
          "annualized cumulative returns of optimal portfolios; percent, annualized")
    table(outdir / "emdd.csv", emdd_rows,
          "expected maximum drawdowns of optimal portfolios; percent")

    if winners is not None:
        header = ["regime"] + [f"case{cid}" for cid in results.case_ids]
        rows = []
        for rid in results.regime_ids:
            row = [str(rid)]
            for cid in results.case_ids:
                ws = winners.get((rid, cid), [])
                row.append("-".join(MEASURE_SHORT[m] for m in ws))
            rows.append(row)
        write_csv(outdir / "best_per_regime.csv",
                  ["winning measure per regime and case by annualized "
                   "cumulative return; labels", f"seed={seed}"],
                  header, rows)

        header = ["attribute"] + [f"case{cid}" for cid in results.case_ids]
        cum_row = ["cumulative_return"]
        emdd_row = ["expected_max_drawdown"]
        for cid in results.case_ids:
            rec = super_rows.get(cid)
            cum_row.append(_pct(None if rec is None else rec["annualized_cumulative_pct"]))
            emdd_row.append(_pct(None if rec is None else rec["emdd_pct"]))
        write_csv(outdir / "superoptimal.csv",
                  ["superoptimal portfolio attributes; percent, annualized "
                   "cumulative and expected max drawdown", f"seed={seed}"],
                  header, [cum_row, emdd_row])

    for cid, cols in trajectories.items():
        if not cols:
            continue
        names = list(cols)
        header = ["date"] + [f"cum_{n}" for n in names]
        dates = results.panel.dates
        rows = []
        for i in range(len(dates)):
            rows.append([str(dates[i])] + [f"{cols[n][i]:.8f}" for n in names])
        write_csv(outdir / f"trajectories_case{cid}.csv",
                  ["cumulative daily log return trajectories; dimensionless "
                   "(multiply by 100 for percent)", f"seed={seed}"],
                  header, rows)


def best_per_regime_safe(results: ResultMatrix):
    from .diagnostics import best_per_regime

    try:
        return best_per_regime(results)
    except DataError:
        return None
