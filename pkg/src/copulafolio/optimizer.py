"""DFP quasi-Newton minimization of the risk measures under four constraint
regimes.

Equality constraints are eliminated exactly: the budget constraint by
substituting w3 = 1 - w1 - w2, and the expected-return constraint (which is
linear in the weights because E[Rp] = w . mu with mu the per-asset scenario
means) by parametrizing the feasible affine line. The SP500 box constraint
is handled by an exterior quadratic penalty with continuation, followed by a
pinned-boundary polish so the returned point is exactly feasible. The tail
objective is minimized on its logistic surrogate with bandwidth annealing
and always reported in hard mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .empirical import EmpiricalDistribution, pit, quantile
from .errors import DataError, FitError, OptimizationError, ParameterError
from .copulas import fit_ml, make_copula
from .marketdata import RegimeTable, ReturnPanel, slice_by_regime
from .riskmeasures import (
    IntegrationConfig,
    PortfolioWeights,
    ScenarioSet,
    TailSpec,
    build_scenarios,
    naive_stats,
    scenario_upr,
    target_return,
)

MEASURES = ("variance", "semivariance", "tail_risk")

# (return_fixed, w1_boxed) per case id.
CASE_FLAGS = {1: (True, False), 2: (True, True), 3: (False, False), 4: (False, True)}

BOX_PENALTY_SCHEDULE = (1e2, 1e4, 1e6)
BANDWIDTH_SCHEDULE = (1e-2, 1e-3, 1e-4)
N_RANDOM_STARTS = 5
_MULTISTART_KEY = 20250401  # fixed: multi-start points never depend on run seed

BUDGET_TOL = 1e-8
RETURN_TOL = 1e-6
BOX_TOL = 1e-8


@dataclass(frozen=True)
class CaseSpec:
    """One of the four constraint regimes: fixed/free target return crossed
    with boxed/free SP500 weight."""

    case_id: int
    return_fixed: bool
    w1_boxed: bool
    r: float | None = None

    def __post_init__(self):
        if self.case_id not in CASE_FLAGS:
            raise ParameterError(f"case_id must be 1..4, got {self.case_id}")
        if (self.return_fixed, self.w1_boxed) != CASE_FLAGS[self.case_id]:
            raise ParameterError(
                f"case {self.case_id} flags must be {CASE_FLAGS[self.case_id]}"
            )
        if self.return_fixed and self.r is None:
            raise ParameterError(f"case {self.case_id} requires a target return r")

    @classmethod
    def from_id(cls, case_id: int, r: float | None = None) -> "CaseSpec":
        rf, bx = CASE_FLAGS[case_id]
        return cls(case_id=case_id, return_fixed=rf, w1_boxed=bx,
                   r=r if rf else None)


@dataclass(frozen=True)
class OptimizationResult:
    weights: PortfolioWeights
    achieved_r: float
    objective: float
    measure: str
    upr: float | None
    iterations: int
    converged: bool
    constraint_residuals: dict
    case_id: int

    def __post_init__(self):
        res = self.constraint_residuals
        if abs(res["budget"]) > BUDGET_TOL:
            raise OptimizationError(f"budget residual {res['budget']} exceeds 1e-8")
        if res.get("return") is not None and abs(res["return"]) > RETURN_TOL:
            raise OptimizationError(f"return residual {res['return']} exceeds 1e-6")
        if res.get("box") is not None and res["box"] > BOX_TOL:
            raise OptimizationError(f"box violation {res['box']} exceeds 1e-8")


@dataclass(frozen=True)
class DfpResult:
    x: np.ndarray
    fx: float
    iterations: int
    converged: bool


def _central_gradient(f, x, h):
    g = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def _wolfe_search(f, grad, x, d, fx, gd, c1=1e-4, c2=0.9, alpha_max=1e3):
    """Strong-Wolfe bracket + zoom; returns (alpha, f(x + alpha d)) or None."""

    def phi(a):
        return f(x + a * d)

    def dphi(a):
        return float(grad(x + a * d) @ d)

    a_prev, phi_prev = 0.0, fx
    a = 1.0
    for it in range(20):
        phi_a = phi(a)
        if not math.isfinite(phi_a) or phi_a > fx + c1 * a * gd or (
            it > 0 and phi_a >= phi_prev
        ):
            return _zoom(phi, dphi, a_prev, a, phi_prev, fx, gd, c1, c2)
        dphi_a = dphi(a)
        if abs(dphi_a) <= -c2 * gd:
            return a, phi_a
        if dphi_a >= 0.0:
            return _zoom(phi, dphi, a, a_prev, phi_a, fx, gd, c1, c2)
        a_prev, phi_prev = a, phi_a
        a = min(2.0 * a, alpha_max)
    return None


def _zoom(phi, dphi, lo, hi, phi_lo, fx, gd, c1, c2, max_bisect=30):
    for _ in range(max_bisect):
        a = 0.5 * (lo + hi)
        phi_a = phi(a)
        if not math.isfinite(phi_a) or phi_a > fx + c1 * a * gd or phi_a >= phi_lo:
            hi = a
        else:
            dphi_a = dphi(a)
            if abs(dphi_a) <= -c2 * gd:
                return a, phi_a
            if dphi_a * (hi - lo) >= 0.0:
                hi = lo
            lo, phi_lo = a, phi_a
        if abs(hi - lo) < 1e-14:
            break
    phi_lo2 = phi(lo)
    if math.isfinite(phi_lo2) and phi_lo2 < fx:
        return lo, phi_lo2
    return None


def dfp_minimize(f, x0, gradient_step: float = 1e-4, tol: float = 1e-6,
                 max_iter: int = 500) -> DfpResult:
    """Minimize a smooth function by the DFP inverse-Hessian update.

    Gradients are central differences with the given step; the line search
    enforces strong Wolfe conditions. Stops when the sup-norm of the gradient
    drops to ``tol`` or the iteration cap is reached; a failed line search
    terminates early with ``converged=False``.
    """
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    fx = float(f(x))
    if not math.isfinite(fx):
        raise OptimizationError(f"objective not finite at start point {x0!r}")
    grad = lambda z: _central_gradient(f, z, gradient_step)
    g = grad(x)
    hinv = np.eye(x.size)
    n_iter = 0
    converged = bool(np.max(np.abs(g)) <= tol)
    while not converged and n_iter < max_iter:
        n_iter += 1
        d = -hinv @ g
        gd = float(g @ d)
        if gd >= 0.0:  # stale curvature: restart from steepest descent
            hinv = np.eye(x.size)
            d = -g
            gd = float(g @ d)
            if gd >= 0.0:
                break
        ls = _wolfe_search(f, grad, x, d, fx, gd)
        if ls is None:
            break
        alpha, f_new = ls
        x_new = x + alpha * d
        g_new = grad(x_new)
        s = alpha * d
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            hy = hinv @ y
            hinv = hinv + np.outer(s, s) / sy - np.outer(hy, hy) / float(y @ hy)
        x, fx, g = x_new, float(f_new), g_new
        if np.max(np.abs(g)) <= tol:
            converged = True
    return DfpResult(x=x, fx=fx, iterations=n_iter, converged=converged)


class _CaseProblem:
    """Reduced-coordinate view of one (case, measure) minimization."""

    def __init__(self, case: CaseSpec, measure: str, sc: ScenarioSet,
                 tail: TailSpec | None):
        if measure not in MEASURES:
            raise ParameterError(f"unknown measure {measure!r}")
        if measure == "tail_risk" and tail is None:
            raise ParameterError("tail_risk needs a TailSpec")
        self.case = case
        self.measure = measure
        self.sc = sc
        self.tail = tail
        self.mu = sc.mean_returns
        self.probs = sc.norm_probs
        self.reduced_line = False
        if case.return_fixed:
            spread = float(self.mu.max() - self.mu.min())
            if spread < 1e-14:
                if abs(case.r - self.mu[0]) > 1e-12:
                    raise OptimizationError(
                        "infeasible return constraint: all asset means equal "
                        f"{self.mu[0]!r} but target is {case.r!r}"
                    )
                # constraint is vacuous; fall back to the 2-D parametrization
                self.dim = 2
            else:
                a = np.vstack([np.ones(3), self.mu])
                self.w_base = np.linalg.lstsq(a, np.array([1.0, case.r]),
                                              rcond=None)[0]
                d = np.cross(np.ones(3), self.mu)
                self.w_dir = d / np.linalg.norm(d)
                self.reduced_line = True
                self.dim = 1
        else:
            self.dim = 2

    def embed(self, x: np.ndarray) -> np.ndarray:
        if self.reduced_line:
            return self.w_base + x[0] * self.w_dir
        return np.array([x[0], x[1], 1.0 - x[0] - x[1]])

    def start_point(self, w: np.ndarray) -> np.ndarray:
        """Reduced coordinates of (the feasible projection of) a weight vector."""
        if self.reduced_line:
            return np.array([float(self.w_dir @ (w - self.w_base))])
        return np.array([w[0], w[1]])

    def _semivar_target(self, w: np.ndarray) -> float:
        if self.case.return_fixed:
            return self.case.r
        return float(w @ self.mu)  # free-r cases target the portfolio's own mean

    def measure_value(self, w: np.ndarray, bandwidth: float | None = None) -> float:
        q = self.sc.quantiles
        if self.measure == "variance":
            m1, m2 = _kernels.scenario_moments(q, w[0], w[1], w[2], self.probs)
            return m2 - m1 * m1
        if self.measure == "semivariance":
            m1, m2 = _kernels.downside_moments(
                q, w[0], w[1], w[2], self.probs, self._semivar_target(w)
            )
            return m2 - m1 * m1
        if bandwidth is None:
            return _kernels.tail_mass_hard(
                q, w[0], w[1], w[2], self.probs, self.tail.q5
            )
        return _kernels.tail_mass_smooth(
            q, w[0], w[1], w[2], self.probs, self.tail.q5, bandwidth
        )

    def hard_objective(self, w: np.ndarray) -> float:
        return self.measure_value(w, bandwidth=None)

    def smooth_objective_fn(self, bandwidth: float | None, rho: float | None):
        def f(x):
            w = self.embed(x)
            val = self.measure_value(w, bandwidth=bandwidth)
            if rho is not None:
                excess = max(0.0, -w[0]) + max(0.0, w[0] - 1.0)
                val += rho * excess * excess
            return val

        return f

    def is_feasible(self, w: np.ndarray) -> bool:
        if abs(w.sum() - 1.0) > BUDGET_TOL:
            return False
        if self.case.return_fixed and abs(float(w @ self.mu) - self.case.r) > RETURN_TOL:
            return False
        if self.case.w1_boxed and not (-BOX_TOL <= w[0] <= 1.0 + BOX_TOL):
            return False
        return True

    def pinned_candidates(self):
        """Exactly feasible points with w1 pinned at a box boundary."""
        if not self.case.w1_boxed:
            return []
        out = []
        for b in (0.0, 1.0):
            if self.case.return_fixed:
                a = np.array([[1.0, 1.0], [self.mu[1], self.mu[2]]])
                rhs = np.array([1.0 - b, self.case.r - b * self.mu[0]])
                if abs(np.linalg.det(a)) < 1e-14:
                    continue
                w23 = np.linalg.solve(a, rhs)
                out.append((np.array([b, w23[0], w23[1]]), 0, True))
            else:
                bandwidth = (
                    BANDWIDTH_SCHEDULE[-1] if self.measure == "tail_risk" else None
                )

                def f1(x, _b=b, _h=bandwidth):
                    w = np.array([_b, x[0], 1.0 - _b - x[0]])
                    return self.measure_value(w, bandwidth=_h)

                res = _scaled_dfp(f1, np.array([0.5 * (1.0 - b)]), max_iter=150)
                w = np.array([b, res.x[0], 1.0 - b - res.x[0]])
                out.append((w, res.iterations, res.converged))
        return out


def _scaled_dfp(f, x0, tol: float = 1e-7, max_iter: int = 300) -> DfpResult:
    """DFP on the objective normalized by its start magnitude, so the
    gradient tolerance is meaningful for daily-return-scale values."""
    f0 = abs(float(f(np.atleast_1d(np.asarray(x0, dtype=float)))))
    scale = f0 if f0 > 1e-12 else 1.0
    res = dfp_minimize(lambda x: f(x) / scale, x0, gradient_step=1e-4,
                       tol=tol, max_iter=max_iter)
    return DfpResult(x=res.x, fx=res.fx * scale, iterations=res.iterations,
                     converged=res.converged)


def _start_points(problem: _CaseProblem, measure_idx: int) -> list:
    naive = PortfolioWeights.naive().as_array()
    x_naive = problem.start_point(naive)
    starts = [x_naive]
    for j in range(N_RANDOM_STARTS):
        rng = np.random.default_rng(
            np.random.SeedSequence(
                _MULTISTART_KEY,
                spawn_key=(problem.case.case_id, measure_idx, j),
            )
        )
        starts.append(x_naive + rng.normal(0.0, 0.75, size=problem.dim))
    return starts


def _stage_schedule(problem: _CaseProblem) -> list:
    bandwidths = (
        list(BANDWIDTH_SCHEDULE) if problem.measure == "tail_risk" else [None]
    )
    rhos = list(BOX_PENALTY_SCHEDULE) if problem.case.w1_boxed else [None]
    n = max(len(bandwidths), len(rhos))
    bandwidths += [bandwidths[-1]] * (n - len(bandwidths))
    rhos += [rhos[-1]] * (n - len(rhos))
    return list(zip(bandwidths, rhos))


def solve_case(case: CaseSpec, measure: str, dists, model,
               cfg: IntegrationConfig, scenarios: ScenarioSet | None = None,
               tail: TailSpec | None = None) -> OptimizationResult:
    """Minimize one risk measure under one constraint case.

    Multi-start: the naive weights (projected onto the feasible set) plus
    five fixed-seed perturbations explore the first continuation stage; the
    two best candidates are carried through the full bandwidth/penalty
    schedule. Boxed cases additionally consider the two pinned-boundary
    solutions so the returned point is exactly feasible.
    """
    sc = scenarios if scenarios is not None else build_scenarios(model, dists, cfg)
    if measure == "tail_risk" and tail is None:
        tail = TailSpec(q5=quantile(dists[0], 0.05))
    problem = _CaseProblem(case, measure, sc, tail)
    measure_idx = MEASURES.index(measure)
    schedule = _stage_schedule(problem)
    total_iters = 0

    # stage 1: cheap exploration from every start
    explored = []
    h0, rho0 = schedule[0]
    f_stage0 = problem.smooth_objective_fn(h0, rho0)
    for x0 in _start_points(problem, measure_idx):
        try:
            res = _scaled_dfp(f_stage0, x0, max_iter=60)
        except OptimizationError:
            continue
        total_iters += res.iterations
        explored.append(res)
    if not explored:
        raise OptimizationError("no feasible multi-start point")
    explored.sort(key=lambda r: r.fx)
    keep = explored[: min(2, len(explored))]

    # remaining stages: warm-started continuation for the kept candidates
    candidates = []  # (weights, iterations, converged)
    for res in keep:
        x, conv = res.x, res.converged
        for h, rho in schedule[1:]:
            f_stage = problem.smooth_objective_fn(h, rho)
            res2 = _scaled_dfp(f_stage, x, max_iter=300)
            total_iters += res2.iterations
            x, conv = res2.x, res2.converged
        candidates.append((problem.embed(x), 0, conv))

    for pinned in problem.pinned_candidates():
        total_iters += pinned[1]
        candidates.append(pinned)

    best = None
    for w, _, conv in candidates:
        if not problem.is_feasible(w):
            continue
        obj = problem.hard_objective(w)
        if best is None or obj < best[1]:
            best = (w, obj, conv)
    if best is None:
        raise OptimizationError(
            f"case {case.case_id}/{measure}: no feasible candidate found"
        )
    w, obj, conv = best
    return _package_result(problem, w, obj, conv, total_iters)


def _package_result(problem: _CaseProblem, w: np.ndarray, obj: float,
                    converged: bool, iterations: int) -> OptimizationResult:
    case = problem.case
    achieved = float(w @ problem.mu)
    r_for_upr = case.r if case.return_fixed else achieved
    weights = PortfolioWeights.from_array(w)
    residuals = {
        "budget": float(w.sum() - 1.0),
        "return": (achieved - case.r) if case.return_fixed else None,
        "box": max(0.0, -w[0], w[0] - 1.0) if case.w1_boxed else None,
    }
    return OptimizationResult(
        weights=weights,
        achieved_r=achieved,
        objective=obj,
        measure=problem.measure,
        upr=scenario_upr(problem.sc, weights, r_for_upr),
        iterations=iterations,
        converged=converged,
        constraint_residuals=residuals,
        case_id=case.case_id,
    )


@dataclass(frozen=True)
class CellError:
    error: str


@dataclass
class ResultMatrix:
    """One OptimizationResult (or error record) per regime x case x measure,
    plus per-regime metadata needed by the diagnostics layer."""

    cells: dict
    regime_ids: tuple
    case_ids: tuple
    measures: tuple
    regime_meta: dict
    seed: int
    panel: ReturnPanel | None = None
    regimes: RegimeTable | None = None

    def get(self, regime_id: int, case_id: int, measure: str):
        return self.cells[(regime_id, case_id, measure)]

    @property
    def n_failed(self) -> int:
        return sum(1 for v in self.cells.values() if isinstance(v, CellError))


def regime_model(spec, regime_panel: ReturnPanel):
    """Copula for a regime: fixed parameters if the config carries them,
    otherwise a pseudo-ML fit of the configured family."""
    if spec.fixed_params:
        return make_copula(spec.family, **spec.fixed_params)
    obs = np.column_stack(
        [pit(EmpiricalDistribution.from_sample(regime_panel.returns[:, j]))
         for j in range(3)]
    )
    return fit_ml(obs, spec.family)


def solve_all(regimes: RegimeTable, panel: ReturnPanel, cases, measures,
              cfg: IntegrationConfig) -> ResultMatrix:
    """Solve every (regime, case, measure) cell; per-cell failures are
    recorded without aborting the batch."""
    cases = tuple(sorted(set(cases)))
    measures = tuple(m for m in MEASURES if m in set(measures))
    if not cases or not measures:
        raise ParameterError("cases and measures must be non-empty")
    cells = {}
    regime_meta = {}
    for spec in regimes:
        context = None
        try:
            context = _regime_context(spec, panel, cfg)
        except (DataError, FitError, ParameterError, OptimizationError) as exc:
            for case_id in cases:
                for measure in measures:
                    cells[(spec.id, case_id, measure)] = CellError(str(exc))
            regime_meta[spec.id] = {"error": str(exc)}
            continue
        regime_meta[spec.id] = context["meta"]
        for case_id in cases:
            for measure in measures:
                key = (spec.id, case_id, measure)
                try:
                    case = CaseSpec.from_id(
                        case_id,
                        r=context["r_target"] if CASE_FLAGS[case_id][0] else None,
                    )
                    cells[key] = solve_case(
                        case, measure, context["dists"], context["model"], cfg,
                        scenarios=context["scenarios"], tail=context["tail"],
                    )
                except (OptimizationError, ParameterError, FitError) as exc:
                    cells[key] = CellError(str(exc))
        _repair_nesting(cells, spec.id, cases, measures, context)
    return ResultMatrix(
        cells=cells,
        regime_ids=tuple(s.id for s in regimes),
        case_ids=cases,
        measures=measures,
        regime_meta=regime_meta,
        seed=cfg.seed,
        panel=panel,
        regimes=regimes,
    )


def _regime_context(spec, panel: ReturnPanel, cfg: IntegrationConfig) -> dict:
    sub = slice_by_regime(panel, spec)
    if len(sub) < 30:
        raise DataError(f"regime {spec.id} has {len(sub)} observations; need >= 30")
    dists = tuple(
        EmpiricalDistribution.from_sample(sub.returns[:, j]) for j in range(3)
    )
    model = regime_model(spec, sub)
    scenarios = build_scenarios(model, dists, cfg)
    stats = naive_stats(sub)
    meta = {
        "n_days": len(sub),
        "start": str(sub.dates[0]),
        "end": str(sub.dates[-1]),
        "family": model.family,
        "params": model.params(),
        "return_sum": sub.returns.sum(axis=0).tolist(),
        "naive": stats,
        "clamped_points": scenarios.n_clamped,
    }
    return {
        "dists": dists,
        "model": model,
        "scenarios": scenarios,
        "r_target": target_return(stats.mean),
        "tail": TailSpec(q5=quantile(dists[0], 0.05)),
        "meta": meta,
    }


def _repair_nesting(cells, regime_id, cases, measures, context) -> None:
    """Cross-case candidate sharing: a sibling case's solution that is
    feasible for this case and beats its objective replaces it. Keeps the
    nested-feasible-set monotonicity (case 2 >= case 1, case 4 >= case 3)
    from being violated by local optimization noise."""
    sc = context["scenarios"]
    for measure in measures:
        pool = {
            cid: cells[(regime_id, cid, measure)]
            for cid in cases
            if isinstance(cells.get((regime_id, cid, measure)), OptimizationResult)
        }
        for case_id in cases:
            key = (regime_id, case_id, measure)
            current = cells.get(key)
            if not isinstance(current, OptimizationResult):
                continue
            case = CaseSpec.from_id(
                case_id, r=context["r_target"] if CASE_FLAGS[case_id][0] else None
            )
            problem = _CaseProblem(case, measure, sc, context["tail"])
            best = current
            for donor_id, donor in pool.items():
                if donor_id == case_id:
                    continue
                w = donor.weights.as_array()
                if not problem.is_feasible(w):
                    continue
                obj = problem.hard_objective(w)
                if obj < best.objective - 1e-15:
                    best = _package_result(
                        problem, w, obj, donor.converged,
                        current.iterations,
                    )
            if best is not current:
                cells[key] = best
