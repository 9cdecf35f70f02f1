"""Trivariate copula families, fitting, and selection."""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError
from .archimedean import ClaytonCopula, FrankCopula, GumbelCopula
from .elliptical import GaussCopula, StudentTCopula
from .fitting import fit_ml, log_likelihood, mean_pairwise_tau, select

FAMILY_CLASSES = {
    "clayton": ClaytonCopula,
    "frank": FrankCopula,
    "gumbel": GumbelCopula,
    "gauss": GaussCopula,
    "student_t": StudentTCopula,
}


def make_copula(family: str, **params):
    """Build a copula model from a family label and its parameter dict.

    Archimedean families take ``theta``; ``gauss`` takes ``corr`` (3x3 nested
    list or array); ``student_t`` takes ``corr`` and ``dof``. This is the
    schema fitted models serialize to in regime-config JSON.
    """
    try:
        cls = FAMILY_CLASSES[family]
    except KeyError:
        raise ParameterError(f"unknown copula family {family!r}") from None
    if family in ("gauss", "student_t"):
        params = dict(params)
        params["corr"] = np.asarray(params["corr"], dtype=float)
    return cls(**params)


__all__ = [
    "ClaytonCopula",
    "FrankCopula",
    "GumbelCopula",
    "GaussCopula",
    "StudentTCopula",
    "FAMILY_CLASSES",
    "make_copula",
    "fit_ml",
    "select",
    "log_likelihood",
    "mean_pairwise_tau",
]
