"""Helpers shared by the copula families."""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError

UNIT_EPS = 1e-12


def per_call_rng(seed: int) -> np.random.Generator:
    """Fresh generator per call: output depends only on the seed, never on
    shared state, so concurrent callers cannot perturb each other."""
    return np.random.default_rng(np.random.SeedSequence(seed))


def validate_interior(u, v, w) -> None:
    """Density arguments must lie strictly inside the open unit cube."""
    for name, x in (("u", u), ("v", v), ("w", w)):
        x = np.asarray(x)
        if np.any(x <= 0.0) or np.any(x >= 1.0):
            raise ParameterError(f"density argument {name} must be strictly in (0, 1)")


def clamp_unit(*arrays):
    """Clamp values into [UNIT_EPS, 1 - UNIT_EPS]; also reports how many
    points were moved so callers can surface the count in diagnostics."""
    out = []
    n_clamped = 0
    for a in arrays:
        a = np.asarray(a, dtype=float)
        mask = (a < UNIT_EPS) | (a > 1.0 - UNIT_EPS)
        n_clamped += int(np.count_nonzero(mask))
        out.append(np.clip(a, UNIT_EPS, 1.0 - UNIT_EPS))
    return tuple(out), n_clamped


def validate_correlation(corr) -> np.ndarray:
    """Check a 3x3 unit-diagonal correlation matrix is symmetric positive
    definite; positive definiteness is verified by Cholesky factorization."""
    corr = np.asarray(corr, dtype=float)
    if corr.shape != (3, 3):
        raise ParameterError("correlation matrix must be 3x3")
    if not np.allclose(corr, corr.T, atol=1e-12):
        raise ParameterError("correlation matrix must be symmetric")
    if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
        raise ParameterError("correlation matrix must have unit diagonal")
    try:
        np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        raise ParameterError("correlation matrix must be positive definite") from None
    return corr


def nearest_positive_definite_corr(mat, floor: float = 1e-6) -> np.ndarray:
    """Project a symmetric matrix to the closest unit-diagonal correlation
    matrix with eigenvalues bounded away from zero."""
    sym = 0.5 * (np.asarray(mat, dtype=float) + np.asarray(mat, dtype=float).T)
    vals, vecs = np.linalg.eigh(sym)
    vals = np.maximum(vals, floor)
    fixed = vecs @ np.diag(vals) @ vecs.T
    scale = np.sqrt(np.diag(fixed))
    fixed = fixed / np.outer(scale, scale)
    np.fill_diagonal(fixed, 1.0)
    return 0.5 * (fixed + fixed.T)
