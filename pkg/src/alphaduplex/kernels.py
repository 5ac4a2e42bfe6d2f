"""Hot inner loops: nearest-site search and path-loss-weighted power sums.

Each kernel has a pure-numpy implementation and, when numba is importable
and ``ALPHADUPLEX_NUMBA`` is not set to ``0``, an ``@njit`` twin that is
bound to the public name.  ``BACKEND`` reports which one is active.
"""

import os

import numpy as np


def _numba_requested():
    return os.environ.get("ALPHADUPLEX_NUMBA", "1").strip().lower() not in ("0", "false", "off", "no")


# --- numpy reference path -------------------------------------------------

def nearest_site_numpy(points, sites):
    d2 = ((points[:, None, :] - sites[None, :, :]) ** 2).sum(axis=2)
    # argmin returns the first minimum: ties go to the lowest index
    return np.argmin(d2, axis=1)


def _gain_constant(fc):
    # L(d) = 10^(-PL/10) = c * d^-2.2 with c = 10^-2.8 * fc^-2
    return 10.0 ** -2.8 / (fc * fc)


def _gain_numpy(d2, fc, dmin):
    """Linear path gain from *squared* distance, clamped at ``dmin``."""
    return _gain_constant(fc) * np.maximum(d2, dmin * dmin) ** -1.1


def faded_power_sum_numpy(rx, tx, weights, gains, skip, fc, dmin):
    """out[k] = sum_{j != skip[k]} weights[j] * gains[k, j] * L(|tx[j] - rx[k]|)."""
    d2 = ((rx[:, None, :] - tx[None, :, :]) ** 2).sum(axis=2)
    terms = weights[None, :] * gains * _gain_numpy(d2, fc, dmin)
    cols = np.arange(tx.shape[0])
    terms[cols[None, :] == skip[:, None]] = 0.0
    return terms.sum(axis=1)


def power_sum_numpy(rx, tx, weights, fc, dmin):
    """out[k] = sum_j weights[j] * L(|tx[j] - rx[k]|), chunked over receivers."""
    out = np.empty(rx.shape[0])
    step = max(1, 2_000_000 // max(tx.shape[0], 1))
    for s in range(0, rx.shape[0], step):
        blk = rx[s:s + step]
        d2 = ((blk[:, None, :] - tx[None, :, :]) ** 2).sum(axis=2)
        out[s:s + step] = (weights[None, :] * _gain_numpy(d2, fc, dmin)).sum(axis=1)
    return out


# --- numba path -----------------------------------------------------------

def _build_numba():
    # TBB on some hosts is too old and warns; prefer OpenMP / workqueue
    os.environ.setdefault("NUMBA_THREADING_LAYER_PRIORITY", "omp workqueue tbb")
    from numba import njit, prange

    @njit(cache=True)
    def _gain(d2, c, dmin2):
        if d2 < dmin2:
            d2 = dmin2
        return c * d2 ** -1.1

    @njit(cache=True)
    def nearest_site(points, sites):
        n = points.shape[0]
        m = sites.shape[0]
        out = np.empty(n, dtype=np.int64)
        for i in range(n):
            best = 0
            best_d2 = np.inf
            for j in range(m):
                dx = points[i, 0] - sites[j, 0]
                dy = points[i, 1] - sites[j, 1]
                d2 = dx * dx + dy * dy
                if d2 < best_d2:
                    best_d2 = d2
                    best = j
            out[i] = best
        return out

    @njit(cache=True)
    def faded_power_sum(rx, tx, weights, gains, skip, fc, dmin):
        k_n = rx.shape[0]
        j_n = tx.shape[0]
        out = np.zeros(k_n)
        c = 10.0 ** -2.8 / (fc * fc)
        for k in range(k_n):
            acc = 0.0
            for j in range(j_n):
                if j == skip[k] or weights[j] == 0.0:
                    continue
                dx = rx[k, 0] - tx[j, 0]
                dy = rx[k, 1] - tx[j, 1]
                acc += weights[j] * gains[k, j] * _gain(dx * dx + dy * dy, c, dmin * dmin)
            out[k] = acc
        return out

    @njit(cache=True, parallel=True)
    def power_sum(rx, tx, weights, fc, dmin):
        k_n = rx.shape[0]
        out = np.zeros(k_n)
        c = 10.0 ** -2.8 / (fc * fc)
        for k in prange(k_n):
            acc = 0.0
            for j in range(tx.shape[0]):
                dx = rx[k, 0] - tx[j, 0]
                dy = rx[k, 1] - tx[j, 1]
                acc += weights[j] * _gain(dx * dx + dy * dy, c, dmin * dmin)
            out[k] = acc
        return out

    return nearest_site, faded_power_sum, power_sum


BACKEND = "numpy"
nearest_site = nearest_site_numpy
faded_power_sum = faded_power_sum_numpy
power_sum = power_sum_numpy

if _numba_requested():
    try:
        nearest_site, faded_power_sum, power_sum = _build_numba()
        BACKEND = "numba"
    except ImportError:
        pass
