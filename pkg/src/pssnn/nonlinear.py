"""Comparison-based protocols on packed bit sharings.

Values are fixed-point field elements; a value is negative when it lies in
the upper half of the field.  The comparison pipeline masks a value with a
random r whose bit decomposition is secret-shared, opens the masked sum, and
recovers the sign from the low bit plus a bitwise wraparound test against the
public opening.  All protocols are slot-parallel: one call compares k values
per sharing across the whole batch.

Bit batches travel as PackedShare objects whose value array has the bit index
on axis 0 (LSB first unless noted) and the batch on the trailing axes.
"""

import numpy as np

from .pss import PackedShare
from .linear import pmult_dn
from .offline import degree_trans_store


def _complement(f, val):
    """Share of 1 - b for bit-valued slots (adds the constant polynomial 1)."""
    return f.sub(np.uint64(1), val)


def xor_public(rt, cfg, store, b: PackedShare, pub) -> PackedShare:
    """b XOR c for public bits c, batched; 1 online round.

    pub has shape (k,) + b.value.shape: slot-j bits for every sharing in the
    batch.  The public factor enters as a degree-(k-1) polynomial, so the
    product needs one degree reduction.
    """
    f = cfg.field
    shape = np.atleast_1d(b.value).shape
    factor = cfg.eval_public_vec(rt.pid, np.asarray(pub, dtype=np.uint64).reshape(cfg.k, -1))
    bl = np.atleast_1d(b.value).ravel()
    prod = f.mul(bl, factor)
    z = f.sub(f.add(bl, factor), f.add(prod, prod))
    with rt.tagged("xor"):
        out = degree_trans_store(rt, cfg, store, PackedShare(rt.pid, z, b.degree + cfg.k - 1), cfg.d)
    return PackedShare(rt.pid, out.value.reshape(shape), cfg.d)


def xor_secret(rt, cfg, store, a: PackedShare, b: PackedShare) -> PackedShare:
    """a XOR b for two degree-d bit sharings; 1 online round."""
    f = cfg.field
    shape = np.atleast_1d(a.value).shape
    av, bv = np.atleast_1d(a.value).ravel(), np.atleast_1d(b.value).ravel()
    prod = f.mul(av, bv)
    z = f.sub(f.add(av, bv), f.add(prod, prod))
    with rt.tagged("xor"):
        out = degree_trans_store(rt, cfg, store, PackedShare(rt.pid, z, 2 * cfg.d), cfg.d)
    return PackedShare(rt.pid, out.value.reshape(shape), cfg.d)


def pre_mult(rt, cfg, store, bits: PackedShare) -> PackedShare:
    """Prefix products along axis 0: out[i] = prod_{j <= i} bits[j].

    Fan-in doubling with one batched packed multiplication per level, so
    ceil(log2 m) online rounds for m inputs.
    """
    val = np.atleast_2d(bits.value)
    m = val.shape[0]
    with rt.tagged("pre_mult"):
        for s in range((m - 1).bit_length()):
            idx = [i for i in range(m) if (i >> s) & 1]
            src = [((i >> (s + 1)) << (s + 1)) + (1 << s) - 1 for i in idx]
            prod = pmult_dn(
                rt,
                cfg,
                store,
                PackedShare(rt.pid, val[idx].ravel(), cfg.d),
                PackedShare(rt.pid, val[src].ravel(), cfg.d),
            )
            val = val.copy()
            val[idx] = prod.value.reshape(len(idx), -1)
    return PackedShare(rt.pid, val.reshape(np.atleast_1d(bits.value).shape), cfg.d)


def pre_or(rt, cfg, store, bits: PackedShare) -> PackedShare:
    """Prefix ORs along axis 0 via De Morgan on pre_mult; ceil(log2 m) rounds."""
    f = cfg.field
    with rt.tagged("pre_or"):
        comp = pre_mult(rt, cfg, store, PackedShare(rt.pid, _complement(f, bits.value), cfg.d))
    return PackedShare(rt.pid, _complement(f, comp.value), cfg.d)


def _lt_from_xored(rt, cfg, store, x: PackedShare, sec_bits: PackedShare) -> PackedShare:
    """[c < r] given x = bits(c) XOR bits(r) and the secret bits of r.

    Prefix-OR from the MSB down marks everything at or below the highest
    differing bit; the difference of neighbours isolates that bit, and its
    product with r's bit says whether r wins there.  log2(ell) + 1 rounds.
    """
    f = cfg.field
    xv = np.atleast_2d(x.value)[::-1]  # MSB first
    z = np.atleast_2d(pre_or(rt, cfg, store, PackedShare(rt.pid, xv, cfg.d)).value)
    h = z.copy()
    h[1:] = f.sub(z[1:], z[:-1])
    rv = np.atleast_2d(sec_bits.value)[::-1]
    terms = f.mul(h, rv)  # degree 2d, one product per bit position
    acc = terms[0]
    for row in terms[1:]:
        acc = f.add(acc, row)
    return degree_trans_store(rt, cfg, store, PackedShare(rt.pid, acc, 2 * cfg.d), cfg.d)


def bitwise_lt(rt, cfg, store, sec_bits: PackedShare, pub_bits) -> PackedShare:
    """[c < r] for a public c and a bit-shared secret r, both LSB-first on
    axis 0; ceil(log2 ell) + 2 online rounds."""
    with rt.tagged("bitwise_lt"):
        x = xor_public(rt, cfg, store, sec_bits, pub_bits)
        return _lt_from_xored(rt, cfg, store, x, sec_bits)


def _public_bits(f, opened, m):
    """(k, B) public field values -> (m, k, B) bit planes, LSB first."""
    return np.stack([(opened >> np.uint64(i)) & np.uint64(1) for i in range(m)])


def drelu(rt, cfg, store, a: PackedShare) -> PackedShare:
    """Sign bit of a: 1 for a >= 0 (lower half of the field), else 0.

    Masks 2a with a bit-decomposed random r, opens y = 2a + r, and recovers
    the low bit of 2a as y_0 XOR r_0 XOR [y < r]; the comparison corrects the
    parity flip when y wrapped past the (odd) modulus.  ceil(log2 ell) + 4
    online rounds.
    """
    f = cfg.field
    shape = np.atleast_1d(a.value).shape
    flat = np.atleast_1d(a.value).ravel()
    m = flat.shape[0]
    with rt.tagged("drelu"):
        (raw,) = store.take(("bits",), f.ell * m)
        bits = raw.reshape(f.ell, m)
        r = np.zeros(m, dtype=np.uint64)
        for i in range(f.ell):
            r = f.add(r, f.mul(bits[i], np.uint64((1 << i) % f.p)))
        masked = PackedShare(rt.pid, f.add(f.add(flat, flat), r), cfg.d)
        y = rt.open_to_all(cfg, masked)  # (k, m) public
        yb = _public_bits(f, y, f.ell)  # (ell, k, m)
        x = xor_public(rt, cfg, store, PackedShare(rt.pid, bits, cfg.d), yb.transpose(1, 0, 2))
        wrap = _lt_from_xored(rt, cfg, store, x, PackedShare(rt.pid, bits, cfg.d))
        lsb = xor_secret(rt, cfg, store, PackedShare(rt.pid, np.atleast_2d(x.value)[0], cfg.d), wrap)
        out = _complement(f, lsb.value)
    return PackedShare(rt.pid, out.reshape(shape), cfg.d)


def relu(rt, cfg, store, a: PackedShare) -> PackedShare:
    """max(a, 0) = DReLU(a) * a; ceil(log2 ell) + 5 online rounds."""
    with rt.tagged("relu"):
        sign = drelu(rt, cfg, store, a)
        prod = pmult_dn(rt, cfg, store, sign, PackedShare(rt.pid, np.atleast_1d(a.value).ravel(), cfg.d))
    return PackedShare(rt.pid, prod.value.reshape(np.atleast_1d(a.value).shape), cfg.d)


def maxpool(rt, cfg, store, vals: PackedShare) -> PackedShare:
    """Slot-parallel maximum along axis 0 by a pairwise tournament:
    max(a, b) = b + ReLU(a - b), one batched ReLU per level, so
    ceil(log2 m) * (ceil(log2 ell) + 5) online rounds."""
    f = cfg.field
    val = np.atleast_2d(vals.value)
    with rt.tagged("maxpool"):
        while val.shape[0] > 1:
            m = val.shape[0]
            half = m // 2
            a, b = val[0 : 2 * half : 2], val[1 : 2 * half : 2]
            diff = f.sub(a, b).ravel()
            rl = relu(rt, cfg, store, PackedShare(rt.pid, diff, cfg.d))
            new = f.add(b.ravel(), rl.value).reshape(half, -1)
            if m % 2:
                new = np.concatenate([new, val[-1:]], axis=0)
            val = new
    return PackedShare(rt.pid, val[0], cfg.d)
