"""Hot numerical kernels: chopper-period normalization and bootstrap means.

Each kernel exists twice -- a numba-compiled version and a pure-numpy
fallback -- selected at import time by the CVBELL_NUMBA environment
variable: unset or "" picks numba when it is importable, "0" forces the
numpy path, "1" requires numba and fails loudly without it.

Bootstrap resampling uses counter-based SplitMix64 index streams: the k-th
index of replicate r is a pure function of (key, r, k), so both backends
draw identical resamples, replicates are independent of scheduling order,
and a run is reproducible from its seed alone.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import EmptyCalibration

try:
    import numba

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

_FLAG = os.environ.get("CVBELL_NUMBA", "")
if _FLAG == "1" and not HAS_NUMBA:
    raise ImportError("CVBELL_NUMBA=1 requires numba, which is not importable")
USE_NUMBA = HAS_NUMBA and _FLAG != "0"

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_GAMMA_U = np.uint64(_GAMMA)
_MIX1_U = np.uint64(_MIX1)
_MIX2_U = np.uint64(_MIX2)


def backend_name() -> str:
    """Name of the backend the dispatching kernels run on."""
    return "numba" if USE_NUMBA else "numpy"


def _mix64_int(z: int) -> int:
    """SplitMix64 finalizer on a Python integer."""
    z &= _MASK64
    z ^= z >> 30
    z = (z * _MIX1) & _MASK64
    z ^= z >> 27
    z = (z * _MIX2) & _MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, stream: int) -> int:
    """Derive an independent 64-bit kernel key from a seed and a stream index."""
    return _mix64_int((seed + _GAMMA * (stream + 1)) & _MASK64)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer, vectorized; `z` must be uint64 and is consumed."""
    z ^= z >> np.uint64(30)
    z *= _MIX1_U
    z ^= z >> np.uint64(27)
    z *= _MIX2_U
    z ^= z >> np.uint64(31)
    return z


def _bootstrap_means_numpy(
    products: np.ndarray, key: int, n_boot: int
) -> np.ndarray:
    n, q = products.shape
    out = np.empty((n_boot, q))
    rows = np.arange(n, dtype=np.uint64)
    nn = np.uint64(n)
    kk = np.uint64(key)
    for rep in range(n_boot):
        counters = kk + (np.uint64(rep) * nn + rows) * _GAMMA_U
        idx = (_mix64_array(counters) % nn).astype(np.intp)
        # The mean only needs row multiplicities, so stream the products
        # once with bincount weights instead of gathering rows at random.
        counts = np.bincount(idx, minlength=n).astype(np.float64)
        out[rep] = counts @ products
        out[rep] /= n
    return out


def _normalize_numpy(
    signal: np.ndarray, shot: np.ndarray, dark: np.ndarray, period_len: int
) -> tuple[np.ndarray, np.ndarray]:
    n_sig = signal.shape[0]
    n_shot = shot.shape[0]
    subtract_dark = dark.shape[0] > 0
    n_periods = max(1, n_shot // period_len)
    sigma = np.empty((n_periods, signal.shape[1]))
    out = np.empty_like(signal)
    for k in range(n_periods):
        lo = k * period_len
        hi = (k + 1) * period_len if k < n_periods - 1 else n_shot
        var = shot[lo:hi].var(axis=0, ddof=1)
        if subtract_dark:
            var = var - dark[lo:hi].var(axis=0, ddof=1)
        sigma[k] = np.sqrt(np.maximum(var, 0.0))
        s_lo = k * period_len
        s_hi = (k + 1) * period_len if k < n_periods - 1 else n_sig
        if s_lo < n_sig:
            out[s_lo:s_hi] = signal[s_lo:s_hi] / sigma[k]
    return out, sigma


if HAS_NUMBA:

    @numba.njit(parallel=True, cache=True)
    def _bootstrap_means_numba(products, key, n_boot):  # pragma: no cover
        n, q = products.shape
        nn = np.uint64(n)
        kk = np.uint64(key)
        out = np.empty((n_boot, q))
        for rep in numba.prange(n_boot):
            base = np.uint64(rep) * nn
            # Row multiplicities first, then one sequential weighted pass;
            # this streams the product matrix instead of gathering rows.
            counts = np.zeros(n, dtype=np.int32)
            for i in range(n):
                z = kk + (base + np.uint64(i)) * _GAMMA_U
                z ^= z >> np.uint64(30)
                z *= _MIX1_U
                z ^= z >> np.uint64(27)
                z *= _MIX2_U
                z ^= z >> np.uint64(31)
                counts[np.int64(z % nn)] += 1
            acc = np.zeros(q)
            for row in range(n):
                c = counts[row]
                if c != 0:
                    w = np.float64(c)
                    for col in range(q):
                        acc[col] += w * products[row, col]
            for col in range(q):
                out[rep, col] = acc[col] / n
        return out

    @numba.njit(parallel=True, cache=True)
    def _normalize_numba(signal, shot, dark, period_len):  # pragma: no cover
        n_sig, n_col = signal.shape
        n_shot = shot.shape[0]
        subtract_dark = dark.shape[0] > 0
        n_periods = max(1, n_shot // period_len)
        sigma = np.empty((n_periods, n_col))
        out = np.empty_like(signal)
        for k in numba.prange(n_periods):
            lo = k * period_len
            hi = (k + 1) * period_len if k < n_periods - 1 else n_shot
            cnt = hi - lo
            for c in range(n_col):
                mean = 0.0
                for i in range(lo, hi):
                    mean += shot[i, c]
                mean /= cnt
                ssq = 0.0
                for i in range(lo, hi):
                    d = shot[i, c] - mean
                    ssq += d * d
                var = ssq / (cnt - 1)
                if subtract_dark:
                    dmean = 0.0
                    for i in range(lo, hi):
                        dmean += dark[i, c]
                    dmean /= cnt
                    dssq = 0.0
                    for i in range(lo, hi):
                        d = dark[i, c] - dmean
                        dssq += d * d
                    var -= dssq / (cnt - 1)
                sigma[k, c] = np.sqrt(max(var, 0.0))
            s_lo = k * period_len
            s_hi = (k + 1) * period_len if k < n_periods - 1 else n_sig
            for i in range(s_lo, min(s_hi, n_sig)):
                for c in range(n_col):
                    out[i, c] = signal[i, c] / sigma[k, c]
        return out, sigma

else:
    _bootstrap_means_numba = None
    _normalize_numba = None


def bootstrap_means(products: np.ndarray, key: int, n_boot: int) -> np.ndarray:
    """Column means of `n_boot` with-replacement resamples of `products` rows.

    Args:
        products: (n, q) float64 matrix of per-sample derived products.
        key: 64-bit stream key from `stream_key`.
        n_boot: number of replicates.

    Returns:
        (n_boot, q) matrix; row r is the column mean of replicate r.
    """
    products = np.ascontiguousarray(products, dtype=np.float64)
    if products.ndim != 2 or products.shape[0] < 1:
        raise ValueError("products must be a non-empty 2-D matrix")
    if n_boot < 1:
        raise ValueError("n_boot must be >= 1")
    if USE_NUMBA:
        return _bootstrap_means_numba(products, np.uint64(key), np.int64(n_boot))
    return _bootstrap_means_numpy(products, key, n_boot)


def normalize_by_period(
    signal: np.ndarray,
    shot: np.ndarray,
    dark: np.ndarray,
    period_len: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Divide signal samples by their chop period's vacuum-noise deviation.

    The shot block is partitioned into periods of `period_len` rows (the
    trailing partial period is folded into the last full one); each signal
    row is divided, column by column, by the vacuum deviation of its
    period, estimated as sqrt(var(shot) - var(dark)) from that period's
    rows.  Subtracting the dark variance removes the electronic-noise
    floor from the calibration reference, and a multiplicative gain common
    to all three records of one period -- slow amplifier drift -- cancels
    exactly.  An empty dark block skips the subtraction.

    Returns:
        (normalized signal, per-period vacuum sigmas of shape (K, 4)).

    Raises:
        EmptyCalibration: when the shot block is empty.
        ValueError: when a period's vacuum deviation is degenerate.
    """
    signal = np.ascontiguousarray(signal, dtype=np.float64)
    shot = np.ascontiguousarray(shot, dtype=np.float64)
    dark = np.ascontiguousarray(dark, dtype=np.float64)
    if shot.shape[0] == 0:
        raise EmptyCalibration("shot block is empty; nothing to normalize against")
    if shot.shape[0] < 2:
        raise EmptyCalibration("shot block needs at least 2 samples per period")
    if dark.shape[0] > 0 and dark.shape[0] != shot.shape[0]:
        raise ValueError("dark and shot blocks must have the same length")
    if period_len < 2:
        raise ValueError("period_len must be >= 2")
    if USE_NUMBA:
        out, sigma = _normalize_numba(signal, shot, dark, np.int64(period_len))
    else:
        out, sigma = _normalize_numpy(signal, shot, dark, period_len)
    if not np.all(np.isfinite(sigma)) or np.any(sigma <= 0.0):
        raise ValueError(
            "degenerate vacuum deviation in a calibration period "
            "(shot variance does not clear the dark floor)"
        )
    return out, sigma
