"""Deterministic reduction primitives shared by kernels, validator, projection.

Every sum that can influence a feasibility decision or the iterate
trajectory goes through this module. Segments are accumulated in fixed
ascending order with a fixed block tree, so results are bit-identical no
matter how many threads numba schedules. numpy's own reductions are avoided
on those paths because their SIMD blocking is an implementation detail.
"""

import numba
import numpy as np
from numba import njit, prange

_BLOCK = 32
_PART = 4096


@njit(cache=True)
def _sum_range(values, lo, hi):
    # Two-level accumulation: ascending blocks of _BLOCK, block partials
    # added in order. The tree shape depends only on (lo, hi).
    total = 0.0
    i = lo
    while i < hi:
        j = i + _BLOCK
        if j > hi:
            j = hi
        part = 0.0
        for t in range(i, j):
            part += values[t]
        total += part
        i = j
    return total


@njit(cache=True)
def _sum_gather_range(values, idx, lo, hi):
    total = 0.0
    i = lo
    while i < hi:
        j = i + _BLOCK
        if j > hi:
            j = hi
        part = 0.0
        for t in range(i, j):
            part += values[idx[t]]
        total += part
        i = j
    return total


@njit(parallel=True, cache=True)
def segment_sums(values, ptr, out):
    """out[i] = sum of values[ptr[i]:ptr[i+1]], deterministic order."""
    for i in prange(ptr.shape[0] - 1):
        out[i] = _sum_range(values, ptr[i], ptr[i + 1])
    return out


@njit(parallel=True, cache=True)
def gather_segment_sums(values, idx, ptr, out):
    """out[i] = sum of values[idx[t]] for t in ptr[i]:ptr[i+1]."""
    for i in prange(ptr.shape[0] - 1):
        out[i] = _sum_gather_range(values, idx, ptr[i], ptr[i + 1])
    return out


@njit(parallel=True, cache=True)
def _sum_partials(values, out):
    n = values.shape[0]
    for b in prange(out.shape[0]):
        lo = b * _PART
        hi = lo + _PART
        if hi > n:
            hi = n
        out[b] = _sum_range(values, lo, hi)


@njit(parallel=True, cache=True)
def _sqdiff_partials(a, b, out):
    n = a.shape[0]
    for blk in prange(out.shape[0]):
        lo = blk * _PART
        hi = lo + _PART
        if hi > n:
            hi = n
        total = 0.0
        i = lo
        while i < hi:
            j = i + _BLOCK
            if j > hi:
                j = hi
            part = 0.0
            for t in range(i, j):
                d = a[t] - b[t]
                part += d * d
            total += part
            i = j
        out[blk] = total


def det_sum(values):
    """Deterministic sum of a 1-D float64 array.

    The block partition is a function of the array length alone, so the
    result does not depend on the thread count.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    n = values.shape[0]
    if n == 0:
        return 0.0
    nb = (n + _PART - 1) // _PART
    parts = np.empty(nb)
    _sum_partials(values, parts)
    return float(_sum_range(parts, 0, nb))


def det_diff_norm(a, b):
    """Deterministic Euclidean norm of (a - b)."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    n = a.shape[0]
    if n == 0:
        return 0.0
    nb = (n + _PART - 1) // _PART
    parts = np.empty(nb)
    _sqdiff_partials(a, b, parts)
    return float(np.sqrt(_sum_range(parts, 0, nb)))


def set_threads(n):
    """Request n kernel threads; returns the effective count.

    numba caps the pool at the value it saw at startup, so the request is
    clamped rather than raising on small hosts.
    """
    n = max(1, int(n))
    eff = min(n, int(numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(eff)
    return eff


def get_threads():
    return int(numba.get_num_threads())
