"""Pseudo-maximum-likelihood fitting and AIC model selection."""

from __future__ import annotations

import numpy as np
from scipy import stats
from scipy.optimize import minimize_scalar

from ..errors import FitError, ParameterError
from ._shared import nearest_positive_definite_corr
from .archimedean import (
    CLAYTON_THETA_MAX,
    FRANK_THETA_MAX,
    GUMBEL_THETA_MAX,
    ClaytonCopula,
    FrankCopula,
    GumbelCopula,
)
from .elliptical import GaussCopula, StudentTCopula

MIN_OBSERVATIONS = 30
STUDENT_T_DOF_GRID = tuple(range(3, 31))

_ARCHIMEDEAN = {
    "clayton": (ClaytonCopula, 1e-3, CLAYTON_THETA_MAX),
    "gumbel": (GumbelCopula, 1.0, GUMBEL_THETA_MAX),
    "frank": (FrankCopula, 1e-3, FRANK_THETA_MAX),
}


def _validate_pseudo_obs(pseudo_obs) -> np.ndarray:
    arr = np.asarray(pseudo_obs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ParameterError("pseudo-observations must have shape (n, 3)")
    if arr.shape[0] < MIN_OBSERVATIONS:
        raise FitError(
            f"need at least {MIN_OBSERVATIONS} observations, got {arr.shape[0]}"
        )
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise FitError("pseudo-observations must lie strictly inside (0, 1)")
    for j in range(3):
        if np.ptp(arr[:, j]) == 0.0:
            raise FitError(f"degenerate input: column {j} is constant")
    return arr


def log_likelihood(model, pseudo_obs) -> float:
    arr = np.asarray(pseudo_obs, dtype=float)
    return float(np.sum(model.log_density(arr[:, 0], arr[:, 1], arr[:, 2])))


def mean_pairwise_tau(pseudo_obs) -> float:
    arr = np.asarray(pseudo_obs, dtype=float)
    taus = [
        stats.kendalltau(arr[:, i], arr[:, j]).statistic
        for i, j in ((0, 1), (0, 2), (1, 2))
    ]
    return float(np.mean(taus))


def pairwise_tau_matrix(pseudo_obs) -> np.ndarray:
    arr = np.asarray(pseudo_obs, dtype=float)
    out = np.eye(3)
    for i, j in ((0, 1), (0, 2), (1, 2)):
        out[i, j] = out[j, i] = stats.kendalltau(arr[:, i], arr[:, j]).statistic
    return out


def _fit_archimedean(arr: np.ndarray, family: str):
    cls, lo, hi = _ARCHIMEDEAN[family]
    theta0 = cls.theta_from_tau(mean_pairwise_tau(arr))

    def neg_loglik(theta):
        return -log_likelihood(cls(theta=float(theta)), arr)

    # Brent search bracketed around the tau-inversion start, widened to the
    # full domain if the optimum lands on the bracket edge.
    lo0 = max(lo, theta0 / 4.0)
    hi0 = min(hi, 4.0 * theta0 + 1.0)
    res = minimize_scalar(
        neg_loglik, bounds=(lo0, hi0), method="bounded", options={"maxiter": 200}
    )
    if res.x <= lo0 * 1.01 + 1e-9 or res.x >= hi0 * 0.99:
        res = minimize_scalar(
            neg_loglik, bounds=(lo, hi), method="bounded", options={"maxiter": 200}
        )
    if not res.success:
        raise FitError(f"{family} likelihood search did not converge: {res.message}")
    return cls(theta=float(res.x))


def _fit_gauss(arr: np.ndarray) -> GaussCopula:
    scores = stats.norm.ppf(arr)
    corr = nearest_positive_definite_corr(np.corrcoef(scores.T))
    return GaussCopula(corr=corr)


def _fit_student_t(arr: np.ndarray) -> StudentTCopula:
    tau = pairwise_tau_matrix(arr)
    corr = nearest_positive_definite_corr(np.sin(0.5 * np.pi * tau))
    best = None
    for dof in STUDENT_T_DOF_GRID:
        model = StudentTCopula(corr=corr, dof=float(dof))
        ll = log_likelihood(model, arr)
        if best is None or ll > best[0]:
            best = (ll, model)
    return best[1]


def fit_ml(pseudo_obs, family: str):
    """Fit one family to pseudo-observations by pseudo-maximum likelihood."""
    arr = _validate_pseudo_obs(pseudo_obs)
    if family in _ARCHIMEDEAN:
        return _fit_archimedean(arr, family)
    if family == "gauss":
        return _fit_gauss(arr)
    if family == "student_t":
        return _fit_student_t(arr)
    raise ParameterError(f"unknown copula family {family!r}")


def select(pseudo_obs, families):
    """Fit every requested family and return (best model by AIC, score table).

    A family that fails to fit is kept in the table with its error message;
    selection only fails if every family does.
    """
    arr = _validate_pseudo_obs(pseudo_obs)
    table = []
    best = None
    for family in families:
        row = {"family": family, "status": "ok", "error": None,
               "params": None, "loglik": None, "k": None, "aic": None}
        try:
            model = fit_ml(arr, family)
            ll = log_likelihood(model, arr)
            aic = 2.0 * model.n_params - 2.0 * ll
            row.update(params=model.params(), loglik=ll, k=model.n_params, aic=aic)
            if best is None or aic < best[0]:
                best = (aic, model)
        except (FitError, ParameterError) as exc:
            row.update(status="failed", error=str(exc))
        table.append(row)
    if best is None:
        raise FitError(f"all families failed to fit: {[r['error'] for r in table]}")
    return best[1], table
