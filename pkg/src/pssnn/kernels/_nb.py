"""Numba-jitted Mersenne field kernels (default backend)."""

import numba
import numpy as np
from numba import njit, uint64


@njit(uint64(uint64, uint64, uint64, uint64, uint64), cache=True, inline="always")
def _mul1(a, b, p, ell, h):
    mask_h = (uint64(1) << h) - uint64(1)
    low = ell - h
    mask_low = (uint64(1) << low) - uint64(1)
    a1 = a >> h
    a0 = a & mask_h
    b1 = b >> h
    b0 = b & mask_h
    hi = a1 * b1
    mid = a1 * b0 + a0 * b1
    lo = a0 * b0
    s = (hi << uint64(1)) + (mid >> low) + ((mid & mask_low) << h) + lo
    s = (s >> ell) + (s & p)
    s = (s >> ell) + (s & p)
    if s >= p:
        s -= p
    return s


@njit(cache=True)
def _mul_mod_flat(a, b, out, p, ell, h):
    for i in range(a.shape[0]):
        out[i] = _mul1(a[i], b[i], p, ell, h)


@njit(cache=True, parallel=False)
def _matmul_mod(a, b, out, p, ell, h):
    r, m = a.shape
    c = b.shape[1]
    for i in range(r):
        for j in range(c):
            acc = uint64(0)
            for t in range(m):
                acc += _mul1(a[i, t], b[t, j], p, ell, h)
                if acc >= p:
                    acc -= p
            out[i, j] = acc


def mul_mod(a, b, p: int, ell: int):
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    a, b = np.broadcast_arrays(a, b)
    shape = a.shape
    af = np.ascontiguousarray(a).ravel()
    bf = np.ascontiguousarray(b).ravel()
    out = np.empty(af.shape, dtype=np.uint64)
    h = (ell + 1) // 2
    _mul_mod_flat(af, bf, out, np.uint64(p), np.uint64(ell), np.uint64(h))
    return out.reshape(shape)


def matmul_mod(a, b, p: int, ell: int):
    a = np.ascontiguousarray(a, dtype=np.uint64)
    b = np.ascontiguousarray(b, dtype=np.uint64)
    out = np.empty((a.shape[0], b.shape[1]), dtype=np.uint64)
    h = (ell + 1) // 2
    _matmul_mod(a, b, out, np.uint64(p), np.uint64(ell), np.uint64(h))
    return out
