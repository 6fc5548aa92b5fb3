"""Pure-numpy Mersenne field kernels (fallback backend)."""

import numpy as np


def mul_mod(a, b, p: int, ell: int):
    """Elementwise a*b mod p for canonical uint64 residues, p = 2^ell - 1.

    Operands are split at h = (ell+1)//2 bits so every intermediate fits in
    uint64; the high parts are folded with 2^ell = 1 (mod p).
    """
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    h = (ell + 1) // 2
    uh = np.uint64(h)
    uell = np.uint64(ell)
    ulow = np.uint64(ell - h)
    up = np.uint64(p)
    mask_h = np.uint64((1 << h) - 1)
    mask_low = np.uint64((1 << (ell - h)) - 1)

    a1 = a >> uh
    a0 = a & mask_h
    b1 = b >> uh
    b0 = b & mask_h

    hi = a1 * b1                      # < 2^(ell-1); times 2^(2h) = 2^(ell+1) == 2
    mid = a1 * b0 + a0 * b1           # < 2^(ell+1)
    lo = a0 * b0                      # < 2^(ell+1)

    s = (hi << np.uint64(1)) + (mid >> ulow) + ((mid & mask_low) << uh) + lo
    s = (s >> uell) + (s & up)
    s = (s >> uell) + (s & up)
    return np.where(s >= up, s - up, s)


def matmul_mod(a, b, p: int, ell: int):
    """Matrix product (r x m)@(m x c) mod p over uint64 residues."""
    a = np.ascontiguousarray(a, dtype=np.uint64)
    b = np.ascontiguousarray(b, dtype=np.uint64)
    r, m = a.shape
    c = b.shape[1]
    up = np.uint64(p)
    out = np.zeros((r, c), dtype=np.uint64)
    for j in range(m):
        t = out + mul_mod(a[:, j : j + 1], b[j : j + 1, :], p, ell)
        out = np.where(t >= up, t - up, t)
    return out
