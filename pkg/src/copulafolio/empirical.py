"""Empirical marginal distributions: ECDF, generalized inverse, pseudo-observations.

Conventions: the ECDF uses the n+1 denominator so that transformed points
never touch 0 or 1 (copula densities stay finite on them), ties get average
ranks, and the quantile function is the left-continuous generalized inverse
of the rank grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import ParameterError


@dataclass(frozen=True)
class EmpiricalDistribution:
    """A sample held both in original order and sorted ascending."""

    sample: np.ndarray  # sorted ascending
    values: np.ndarray = field(repr=False)  # original observation order

    def __post_init__(self):
        if self.sample.ndim != 1 or self.sample.size < 2:
            raise ParameterError("empirical sample needs at least 2 observations")
        if np.any(np.diff(self.sample) < 0):
            raise ParameterError("sample field must be sorted ascending")
        if not np.all(np.isfinite(self.sample)):
            raise ParameterError("sample contains non-finite values")

    @classmethod
    def from_sample(cls, values) -> "EmpiricalDistribution":
        values = np.asarray(values, dtype=float)
        return cls(sample=np.sort(values), values=values)

    @property
    def n(self) -> int:
        return self.sample.size


def ecdf(d: EmpiricalDistribution, x):
    """F(x) = #{sample_i <= x} / (n + 1).

    Returns values strictly inside (0, 1) for x >= min(sample); 0 below it.
    Accepts scalars or arrays.
    """
    counts = np.searchsorted(d.sample, x, side="right")
    out = counts / (d.n + 1.0)
    if np.ndim(x) == 0:
        return float(out)
    return out


def quantile(d: EmpiricalDistribution, u):
    """Generalized inverse of :func:`ecdf` on the rank grid i/(n+1).

    Maps u to sample[ceil(u*(n+1))] with the index clamped to [1, n]
    (1-indexed), i.e. the smallest sample value whose ECDF rank reaches u.
    Requires 0 < u < 1.
    """
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr <= 0.0) or np.any(u_arr >= 1.0):
        raise ParameterError("quantile argument must lie strictly in (0, 1)")
    idx = np.ceil(u_arr * (d.n + 1.0)).astype(np.int64)
    np.clip(idx, 1, d.n, out=idx)
    out = d.sample[idx - 1]
    if np.ndim(u) == 0:
        return float(out)
    return out


def pit(d: EmpiricalDistribution) -> np.ndarray:
    """Pseudo-observations rank(x_i)/(n+1) in original order, average ranks on ties."""
    return rankdata(d.values, method="average") / (d.n + 1.0)
