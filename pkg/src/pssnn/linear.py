"""Online linear-layer protocols.

All protocols share one shape: mask locally, reconstruct the masked value at
P1, reshare at the output degree, unmask.  Packing conventions:

* block packing (vectors, and matrices entering a vector-matrix product):
  plaintext index j lives in share floor(j/k), slot j mod k, zero-padded to
  a multiple of k;
* slot-parallel packing (parallel matrix products for convolution): share
  entry (alpha, beta) packs the (alpha, beta) entries of k independent
  matrices.

Every function takes the party runtime, the packing config, and the party's
randomness store, and is called by all n parties in lockstep.
"""

from dataclasses import dataclass

import numpy as np

from .pss import PackedShare
from .offline import degree_trans_store


class ShapeMismatch(Exception):
    pass


# -- packing helpers (plaintext <-> block layout) --------------------------------


def pad_len(length: int, k: int) -> int:
    return -(-length // k) * k


def pack_vector(cfg, vec) -> np.ndarray:
    """Plaintext length-u vector -> (k, ceil(u/k)) secrets in block layout."""
    vec = np.asarray(vec, dtype=np.uint64)
    ub = pad_len(vec.shape[0], cfg.k) // cfg.k
    out = np.zeros((cfg.k, ub), dtype=np.uint64)
    for j, x in enumerate(vec):
        out[j % cfg.k, j // cfg.k] = x
    return out


def unpack_vector(cfg, secrets: np.ndarray, length: int) -> np.ndarray:
    """Inverse of pack_vector; strips zero padding."""
    return secrets.T.ravel()[:length]


def pack_matrix_rb(cfg, mat) -> np.ndarray:
    """Plaintext (u, v) matrix -> (k, ceil(u/k), v_pad) row-block secrets:
    slot i of block b in column j holds mat[b*k+i, j]."""
    mat = np.asarray(mat, dtype=np.uint64)
    u, v = mat.shape
    up, vp = pad_len(u, cfg.k), pad_len(v, cfg.k)
    padded = np.zeros((up, vp), dtype=np.uint64)
    padded[:u, :v] = mat
    return padded.reshape(up // cfg.k, cfg.k, vp).transpose(1, 0, 2)


def pack_matrix_sp(cfg, mats) -> np.ndarray:
    """k plaintext matrices (k, u, v) -> (k, u, v) slot-parallel secrets
    (identity layout; slot i carries matrix i)."""
    mats = np.asarray(mats, dtype=np.uint64)
    if mats.shape[0] != cfg.k:
        raise ShapeMismatch(f"need {cfg.k} slot matrices, got {mats.shape[0]}")
    return mats


@dataclass
class PackedVector:
    """Block-packed length-u vector: share values shape (ceil(u/k),), degree d."""

    value: np.ndarray
    length: int


@dataclass
class PackedMatrixRB:
    """Row-block packed (u, v) matrix: share values shape (ceil(u/k), v_pad)."""

    value: np.ndarray
    shape: tuple


@dataclass
class PackedMatrixSP:
    """Slot-parallel (u, v) matrices: share values shape (u, v), k per slot."""

    value: np.ndarray
    shape: tuple


def share_grid(cfg, secrets, rng, degree=None):
    """Share an arbitrary-shape secrets array whose leading axis is the slot
    axis (k, ...); returns (n, ...) share values."""
    degree = cfg.d if degree is None else degree
    secrets = np.asarray(secrets, dtype=np.uint64)
    flat = secrets.reshape(cfg.k, -1)
    grid = cfg.share(flat, degree, rng)
    return grid.reshape((cfg.n,) + secrets.shape[1:])


def reconstruct_grid(cfg, values, degree=None):
    """Inverse of share_grid: (n, ...) share values -> (k, ...) secrets."""
    degree = cfg.d if degree is None else degree
    values = np.asarray(values, dtype=np.uint64)
    flat = values.reshape(cfg.n, -1)
    sec = cfg.reconstruct(flat, cfg.party_points, degree)
    return sec.reshape((cfg.k,) + values.shape[1:])


# -- reshare-via-P1 core -----------------------------------------------------------


def _mask_open_reshare(rt, cfg, masked, src_degree, out_degree, p1_transform):
    """Send masked degree-src shares to P1; P1 reconstructs the (k, m)
    plaintext, applies p1_transform, reshares at out_degree and scatters."""
    gathered = rt.gather_at_p1(masked)
    if rt.pid == 1:
        plain = cfg.reconstruct(np.stack(gathered), cfg.party_points, src_degree, check=False)
        grid = cfg.share(p1_transform(plain), out_degree, rt.rng)
        return rt.scatter_from_p1(list(grid))
    return rt.scatter_from_p1()


# -- multiplication protocols --------------------------------------------------------


def pmult_dn(rt, cfg, store, x: PackedShare, y: PackedShare) -> PackedShare:
    """Coordinate-wise product of two degree-d packed share batches: local
    product to degree 2d, then one masked degree reduction (1 online round)."""
    f = cfg.field
    with rt.tagged("pmult_dn"):
        prod = PackedShare(rt.pid, f.mul(x.value, y.value), x.degree + y.degree)
        return degree_trans_store(rt, cfg, store, prod, cfg.d)


def _block_sums(f, plain, vt, k):
    """(k, vt*k) reconstructed slot values -> per-sharing slot sums (vt*k,)."""
    acc = plain[0]
    for i in range(1, k):
        acc = f.add(acc, plain[i])
    return acc


def _vec_mat_core(rt, cfg, store, a, mat, key, shift):
    f = cfg.field
    if a.value.shape[0] != mat.value.shape[0]:
        raise ShapeMismatch(f"vector blocks {a.value.shape[0]} != matrix blocks {mat.value.shape[0]}")
    v_pad = mat.value.shape[1]
    if v_pad % cfg.k:
        raise ShapeMismatch(f"matrix columns {v_pad} not a multiple of k={cfg.k}")
    vt = v_pad // cfg.k
    r, rp = store.take(key, vt)
    z = f.add(f.matmul(a.value[None, :], mat.value)[0], r)

    def fold(plain):
        # plain: (k, v_pad) slot values of the masked partial products;
        # column c = t*k + j holds output column c, packed into slot j of
        # output sharing t
        sums = _block_sums(f, plain, vt, cfg.k)
        if shift:
            sums = sums >> np.uint64(f.ell_x)
        return sums.reshape(vt, cfg.k).T

    mine = _mask_open_reshare(rt, cfg, z, 2 * cfg.d, cfg.d, fold)
    return PackedVector(f.sub(mine, rp), mat.shape[1])


def vec_mat_mult(rt, cfg, store, a: PackedVector, mat: PackedMatrixRB) -> PackedVector:
    """Exact a.T @ A over F_p in 1 online round: parties pre-sum block
    products locally, P1 folds the kv masked partials into ceil(v/k) packed
    outputs."""
    with rt.tagged("vec_mat_mult"):
        return _vec_mat_core(rt, cfg, store, a, mat, ("vm",), shift=False)


def vec_mat_mult_trunc(rt, cfg, store, a: PackedVector, mat: PackedMatrixRB) -> PackedVector:
    """Fixed-point a.T @ A: P1 integer-shifts each folded block sum by ell_x
    before resharing, truncation-triple masks restore signed semantics.  Each
    output slot is floor(plain / 2^ell_x) +- 1, except with mask-wraparound
    probability <= |value| / 2^ell; callers keep |values| < 2^(ell-2)."""
    with rt.tagged("vec_mat_mult_trunc"):
        return _vec_mat_core(rt, cfg, store, a, mat, ("trunc",), shift=True)


def pmat_mult_trunc(rt, cfg, store, a: PackedMatrixSP, b: PackedMatrixSP) -> PackedMatrixSP:
    """k independent fixed-point matrix products, one per slot, in 1 online
    round; per non-P1 party traffic is 2um elements for the k-product batch
    (2um/k per product)."""
    f = cfg.field
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"inner dims {a.shape} x {b.shape}")
    u, m = a.shape[0], b.shape[1]
    with rt.tagged("pmat_mult_trunc"):
        big, small = store.take(("pmatmask",), u * m)
        c = f.add(f.matmul(a.value, b.value).ravel(), big)

        def shift(plain):
            return plain >> np.uint64(f.ell_x)

        mine = _mask_open_reshare(rt, cfg, c, 2 * cfg.d, cfg.d, shift)
        return PackedMatrixSP(f.sub(mine, small).reshape(u, m), (u, m))


def pack_trans(rt, cfg, store, x: PackedShare) -> list:
    """Turn each sharing of (x_0, ..., x_{k-1}) into k sharings of constant
    vectors (x_i, ..., x_i); 1 online round.  Batched over x.value."""
    f = cfg.field
    m = np.atleast_1d(x.value).shape[0]
    with rt.tagged("pack_trans"):
        const, r = store.take(("packtrans",), m)
        z = f.add(x.value, r)
        gathered = rt.gather_at_p1(z)
        if rt.pid == 1:
            plain = cfg.reconstruct(np.stack(gathered), cfg.party_points, cfg.d, check=False)
            # constant sharing i of batch element u goes to column i*m + u
            secrets = np.zeros((cfg.k, cfg.k * m), dtype=np.uint64)
            for i in range(cfg.k):
                secrets[:, i * m : (i + 1) * m] = plain[i]
            grid = cfg.share(secrets, cfg.d, rt.rng)
            mine = rt.scatter_from_p1(list(grid))
        else:
            mine = rt.scatter_from_p1()
        rp = const.reshape(m, cfg.k).T  # (k, m), row i = mask of output i
        outs = []
        for i in range(cfg.k):
            outs.append(PackedShare(rt.pid, f.sub(mine[i * m : (i + 1) * m], rp[i]), cfg.d))
        return outs
