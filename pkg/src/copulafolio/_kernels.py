"""Hot numeric kernels with numba-jitted and pure-numpy implementations.

The jitted versions are used by default when numba imports cleanly; set the
environment variable ``COPULAFOLIO_NO_NUMBA=1`` before import to force the
numpy fallbacks (useful for debugging and for the benchmark baseline).

Every kernel takes the per-scenario quantile matrix ``q`` of shape (n, 3),
the three portfolio weights, and the scenario probabilities ``probs`` of
shape (n,), and fuses the portfolio-return reduction with the moment
accumulation so no intermediate (n,) array is materialized on the jitted
path.
"""

from __future__ import annotations

import math
import os

import numpy as np


def _np_scenario_moments(q, w1, w2, w3, probs):
    rp = q[:, 0] * w1 + q[:, 1] * w2 + q[:, 2] * w3
    return float(probs @ rp), float(probs @ (rp * rp))


def _np_downside_moments(q, w1, w2, w3, probs, r):
    rp = q[:, 0] * w1 + q[:, 1] * w2 + q[:, 2] * w3 - r
    neg = np.minimum(rp, 0.0)
    return float(probs @ neg), float(probs @ (neg * neg))


def _np_upside_downside_moments(q, w1, w2, w3, probs, r):
    rp = q[:, 0] * w1 + q[:, 1] * w2 + q[:, 2] * w3 - r
    up = np.maximum(rp, 0.0)
    neg = np.minimum(rp, 0.0)
    return float(probs @ up), float(probs @ (neg * neg))


def _np_tail_mass_hard(q, w1, w2, w3, probs, q5):
    rp = q[:, 0] * w1 + q[:, 1] * w2 + q[:, 2] * w3
    return float(probs @ (rp <= q5))


def _np_tail_mass_smooth(q, w1, w2, w3, probs, q5, h):
    rp = q[:, 0] * w1 + q[:, 1] * w2 + q[:, 2] * w3
    z = np.clip((rp - q5) / h, -700.0, 700.0)
    return float(probs @ (1.0 / (1.0 + np.exp(z))))


def _np_max_drawdown_paths(incr):
    x = np.cumsum(incr, axis=1)
    peak = np.maximum.accumulate(np.maximum(x, 0.0), axis=1)
    return (peak - x).max(axis=1)


NUMPY_KERNELS = {
    "scenario_moments": _np_scenario_moments,
    "downside_moments": _np_downside_moments,
    "upside_downside_moments": _np_upside_downside_moments,
    "tail_mass_hard": _np_tail_mass_hard,
    "tail_mass_smooth": _np_tail_mass_smooth,
    "max_drawdown_paths": _np_max_drawdown_paths,
}

_disabled = os.environ.get("COPULAFOLIO_NO_NUMBA", "").strip() not in ("", "0")
NUMBA_KERNELS = None

if not _disabled:
    try:
        from numba import njit
    except ImportError:
        _disabled = True

if not _disabled:

    @njit(cache=True)
    def _nb_scenario_moments(q, w1, w2, w3, probs):
        m1 = 0.0
        m2 = 0.0
        for i in range(q.shape[0]):
            rp = w1 * q[i, 0] + w2 * q[i, 1] + w3 * q[i, 2]
            m1 += probs[i] * rp
            m2 += probs[i] * rp * rp
        return m1, m2

    @njit(cache=True)
    def _nb_downside_moments(q, w1, w2, w3, probs, r):
        m1 = 0.0
        m2 = 0.0
        for i in range(q.shape[0]):
            rp = w1 * q[i, 0] + w2 * q[i, 1] + w3 * q[i, 2] - r
            if rp < 0.0:
                m1 += probs[i] * rp
                m2 += probs[i] * rp * rp
        return m1, m2

    @njit(cache=True)
    def _nb_upside_downside_moments(q, w1, w2, w3, probs, r):
        up = 0.0
        dn2 = 0.0
        for i in range(q.shape[0]):
            rp = w1 * q[i, 0] + w2 * q[i, 1] + w3 * q[i, 2] - r
            if rp > 0.0:
                up += probs[i] * rp
            else:
                dn2 += probs[i] * rp * rp
        return up, dn2

    @njit(cache=True)
    def _nb_tail_mass_hard(q, w1, w2, w3, probs, q5):
        m = 0.0
        for i in range(q.shape[0]):
            rp = w1 * q[i, 0] + w2 * q[i, 1] + w3 * q[i, 2]
            if rp <= q5:
                m += probs[i]
        return m

    @njit(cache=True)
    def _nb_tail_mass_smooth(q, w1, w2, w3, probs, q5, h):
        m = 0.0
        for i in range(q.shape[0]):
            rp = w1 * q[i, 0] + w2 * q[i, 1] + w3 * q[i, 2]
            z = (rp - q5) / h
            if z > 700.0:
                z = 700.0
            elif z < -700.0:
                z = -700.0
            m += probs[i] / (1.0 + math.exp(z))
        return m

    @njit(cache=True)
    def _nb_max_drawdown_paths(incr):
        n_paths, n_steps = incr.shape
        out = np.empty(n_paths)
        for p in range(n_paths):
            x = 0.0
            peak = 0.0
            mdd = 0.0
            for t in range(n_steps):
                x += incr[p, t]
                if x > peak:
                    peak = x
                dd = peak - x
                if dd > mdd:
                    mdd = dd
            out[p] = mdd
        return out

    NUMBA_KERNELS = {
        "scenario_moments": _nb_scenario_moments,
        "downside_moments": _nb_downside_moments,
        "upside_downside_moments": _nb_upside_downside_moments,
        "tail_mass_hard": _nb_tail_mass_hard,
        "tail_mass_smooth": _nb_tail_mass_smooth,
        "max_drawdown_paths": _nb_max_drawdown_paths,
    }

ACTIVE_BACKEND = "numpy" if NUMBA_KERNELS is None else "numba"
_active = NUMPY_KERNELS if NUMBA_KERNELS is None else NUMBA_KERNELS

scenario_moments = _active["scenario_moments"]
downside_moments = _active["downside_moments"]
upside_downside_moments = _active["upside_downside_moments"]
tail_mass_hard = _active["tail_mass_hard"]
tail_mass_smooth = _active["tail_mass_smooth"]
max_drawdown_paths = _active["max_drawdown_paths"]
