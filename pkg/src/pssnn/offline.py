"""Correlated-randomness generation for the online protocols.

Interactive generators extract randomness from per-party contributions with a
Vandermonde transform (any t columns of contributions stay hidden), batching
every independent request of a protocol into a single all-to-all pass.  The
RandomnessStore buffers generated material per correlation type; a Dealer can
fill stores centrally from one seed for tests and benchmarks, in which case
the online phase consumes it with zero offline communication.

Store keys:
  ("rand", degree)                uniform packed sharings
  ("rand_const", degree)          packed sharings with all k slots equal
  ("zero", degree)                packed sharings of the zero vector
  ("bits",)                       packed sharings of k uniform bits, degree d
  ("pair", d1, d2)                same packed secrets shared at two degrees
  ("pair_sh", pos, d1, d2)        Shamir pairs at a fixed position
  ("vm",)                         block-sum tuples (r at 2d, r' at d)
  ("trunc",)                      truncation triples (r' = blocksum(r) >> ell_x)
"""

import json
import math
import struct
from collections import deque
from pathlib import Path

import numpy as np

from .pss import PackedShare
from .transport import PHASE_OFFLINE

MAX_RETRIES = 8

_SHARE_HEADER = struct.Struct("<5I")


class OfflineError(Exception):
    pass


class MissingRandomness(OfflineError):
    pass


class ZeroSquare(OfflineError):
    pass


class SetupMissing(OfflineError):
    pass


class IoError(OfflineError):
    pass


# -- batched Vandermonde extraction -------------------------------------------


def _vdm(cfg):
    m = getattr(cfg, "_vdm_cache", None)
    if m is None:
        m = cfg.vandermonde_t()
        cfg._vdm_cache = m
    return m


def _sample_secrets(cfg, rng, passes, mode):
    f = cfg.field
    if mode == "uniform":
        return f.random(rng, (cfg.k, passes))
    if mode == "constant":
        return np.tile(f.random(rng, (1, passes)), (cfg.k, 1))
    if mode == "zero":
        return np.zeros((cfg.k, passes), dtype=np.uint64)
    raise ValueError(f"unknown secrets mode {mode!r}")


def _vdm_extract(rt, cfg, grids):
    """One all-to-all: everyone contributes grid rows, everyone returns the
    Vandermonde transform of what it received.  grids are (n, cols); output
    list of (n-t, cols) arrays."""
    widths = [g.shape[1] for g in grids]
    per_dst = [np.concatenate([g[j] for g in grids]) for j in range(cfg.n)]
    recvd = rt.all_to_all(per_dst)
    stacked = np.stack(recvd)
    out = cfg.field.matmul(_vdm(cfg), stacked)
    pieces = []
    off = 0
    for w in widths:
        pieces.append(out[:, off : off + w])
        off += w
    return pieces


def gen_random_multi(rt, cfg, requests) -> list:
    """Serve several randomness requests from one synchronized pass.

    Request forms (count is always last):
      ("packed", degree, mode, count)
      ("packed_pair", d1, d2, mode, count)
      ("shamir", position, degree, count)
      ("shamir_pair", position, d1, d2, count)

    Returns one array (or tuple of two aligned arrays for pairs) per request.
    """
    f = cfg.field
    width = cfg.n - cfg.t
    grids = []
    meta = []
    for req in requests:
        kind = req[0]
        count = req[-1]
        passes = -(-count // width)
        if kind == "packed":
            _, degree, mode, _ = req
            grids.append(cfg.share(_sample_secrets(cfg, rt.rng, passes, mode), degree, rt.rng))
            parts = 1
        elif kind == "packed_pair":
            _, d1, d2, mode, _ = req
            secrets = _sample_secrets(cfg, rt.rng, passes, mode)
            grids.append(cfg.share(secrets, d1, rt.rng))
            grids.append(cfg.share(secrets, d2, rt.rng))
            parts = 2
        elif kind == "shamir":
            _, position, degree, _ = req
            grids.append(cfg.share_at(f.random(rt.rng, passes), position, degree, rt.rng))
            parts = 1
        elif kind == "shamir_pair":
            _, position, d1, d2, _ = req
            vals = f.random(rt.rng, passes)
            grids.append(cfg.share_at(vals, position, d1, rt.rng))
            grids.append(cfg.share_at(vals, position, d2, rt.rng))
            parts = 2
        else:
            raise ValueError(f"unknown request kind {kind!r}")
        meta.append((parts, passes, count))
    blocks = _vdm_extract(rt, cfg, grids)
    results = []
    bi = 0
    for parts, passes, count in meta:
        arrs = []
        for _ in range(parts):
            # pass-major flattening: all parties produce the same order
            arrs.append(blocks[bi].T.ravel()[:count])
            bi += 1
        results.append(arrs[0] if parts == 1 else tuple(arrs))
    return results


def gen_random(rt, cfg, count, degree, mode="uniform") -> np.ndarray:
    return gen_random_multi(rt, cfg, [("packed", degree, mode, count)])[0]


def gen_random_pair(rt, cfg, count, d1, d2, mode="uniform"):
    return gen_random_multi(rt, cfg, [("packed_pair", d1, d2, mode, count)])[0]


def gen_zero_share(rt, cfg, count, degree) -> np.ndarray:
    """Interactive zero sharings: a Random-style pass with zero secrets.

    Costs one round; a dealer provides the same correlation with zero
    communication (accounting reports flag the difference).
    """
    return gen_random(rt, cfg, count, degree, mode="zero")


# -- degree transformation -----------------------------------------------------


def degree_trans(rt, cfg, share: PackedShare, target_degree: int, pair) -> PackedShare:
    """Mask with r at the source degree, reconstruct at P1, reshare at the
    target degree, unmask with r at the target degree.  One online round for
    non-P1 parties (send m, receive m)."""
    f = cfg.field
    r_src, r_dst = pair
    z = f.add(np.atleast_1d(share.value), r_src)
    gathered = rt.gather_at_p1(z)
    if rt.pid == 1:
        plain = cfg.reconstruct(np.stack(gathered), cfg.party_points, share.degree, check=False)
        grid = cfg.share(plain, target_degree, rt.rng)
        mine = rt.scatter_from_p1(list(grid))
    else:
        mine = rt.scatter_from_p1()
    return PackedShare(rt.pid, f.sub(mine, r_dst), target_degree)


def degree_trans_shamir_grouped(rt, cfg, groups, target_degree: int, pairs) -> list:
    """Degree-transform batches of Shamir shares, one batch per position,
    in a single gather/scatter.  groups: (position, values, src_degree)."""
    f = cfg.field
    z = np.concatenate([f.add(vals, pair[0]) for (pos, vals, src), pair in zip(groups, pairs)])
    gathered = rt.gather_at_p1(z)
    if rt.pid == 1:
        stacked = np.stack(gathered)
        grids = []
        off = 0
        for pos, vals, src in groups:
            mlen = vals.shape[0]
            row = cfg.interp_matrix(tuple(cfg.party_points[: src + 1]), (pos,))
            plain = f.matmul(row, stacked[: src + 1, off : off + mlen])[0]
            grids.append(cfg.share_at(plain, pos, target_degree, rt.rng))
            off += mlen
        mine = rt.scatter_from_p1(list(np.concatenate(grids, axis=1)))
    else:
        mine = rt.scatter_from_p1()
    outs = []
    off = 0
    for (pos, vals, src), pair in zip(groups, pairs):
        mlen = vals.shape[0]
        outs.append(f.sub(mine[off : off + mlen], pair[1]))
        off += mlen
    return outs


# -- random bits ----------------------------------------------------------------


def _bits_from_material(rt, cfg, a, sq_pair, fin_pair, count) -> np.ndarray:
    """Shared pipeline: square, open, reject zeros (bounded retries with fresh
    material), divide by the canonical root, reduce degree, map to {0,1}."""
    f = cfg.field
    d, k = cfg.d, cfg.k
    kept_a = []
    kept_sq = []
    need = count
    for attempt in range(MAX_RETRIES):
        sq_local = PackedShare(rt.pid, f.mul(a, a), 2 * d)
        sq = degree_trans(rt, cfg, sq_local, d, sq_pair)
        opened = rt.open_to_all(cfg, sq)
        ok = np.all(opened != 0, axis=0)
        kept_a.append(a[ok])
        kept_sq.append(opened[:, ok])
        need -= int(ok.sum())
        if need == 0:
            break
        a, sq_pair = gen_random_multi(
            rt,
            cfg,
            [("packed", d, "uniform", need), ("packed_pair", 2 * d, d, "uniform", need)],
        )
    else:
        raise ZeroSquare(f"still {need} zero squares after {MAX_RETRIES} attempts")
    a = np.concatenate(kept_a)
    sq = np.concatenate(kept_sq, axis=1)
    b = f.sqrt_canonical(sq)
    factor = cfg.eval_public_vec(rt.pid, f.inv(b))
    c = degree_trans(rt, cfg, PackedShare(rt.pid, f.mul(a, factor), d + k - 1), d, fin_pair)
    inv2 = pow(2, f.p - 2, f.p)
    return f.mul(f.add(c.value, np.uint64(1)), np.uint64(inv2))


def gen_random_bits(rt, cfg, count) -> np.ndarray:
    """Packed sharings (degree d) whose k secrets are uniform bits; 4 rounds
    when no zero-square retry triggers."""
    d, k = cfg.d, cfg.k
    a, sq_pair, fin_pair = gen_random_multi(
        rt,
        cfg,
        [
            ("packed", d, "uniform", count),
            ("packed_pair", 2 * d, d, "uniform", count),
            ("packed_pair", d + k - 1, d, "uniform", count),
        ],
    )
    return _bits_from_material(rt, cfg, a, sq_pair, fin_pair, count)


# -- block-sum tuples ------------------------------------------------------------


def gen_vm_randtuple(rt, cfg, count):
    """Tuples (r at degree 2d covering k packed sharings = k^2 secrets,
    r' at degree d packing the k block sums).  Two synchronized passes.

    Returns (r_flat, rp_flat) with k r-sharings then 1 r'-sharing per tuple.
    """
    f = cfg.field
    n, d, k, t = cfg.n, cfg.d, cfg.k, cfg.t
    width = n - t
    m = -(-count // width)
    # column (u*m + pass) of sec holds slot values of packed sharing u
    sec = f.random(rt.rng, (k, k * m))
    (a_blk,) = _vdm_extract(rt, cfg, [cfg.share(sec, 2 * d, rt.rng)])
    # block sums b_u = sum of the k slots of sharing u, Shamir-shared at s_u
    sec3 = sec.reshape(k, k, m)
    grids = []
    for u in range(k):
        b_u = sec3[0, u]
        for slot in range(1, k):
            b_u = f.add(b_u, sec3[slot, u])
        grids.append(cfg.share_at(b_u, cfg.secret_positions[u], t, rt.rng))
    (b_blk,) = _vdm_extract(rt, cfg, [np.concatenate(grids, axis=1)])
    a3 = a_blk.reshape(width, k, m)
    b3 = b_blk.reshape(width, k, m)
    fv = np.zeros((width, m), dtype=np.uint64)
    for u in range(k):
        fv = f.add(fv, f.mul(b3[:, u, :], cfg.unit_shares[rt.pid - 1, u]))
    r_flat = a3.transpose(2, 0, 1).reshape(-1, k)[:count].ravel()
    rp_flat = fv.T.ravel()[:count]
    return r_flat, rp_flat


def gen_trunc_triple(rt, cfg, count):
    """Truncation triples: r (k packed sharings at 2d, k^2 secrets) and r'
    (one degree-d sharing) with r'_j = (block-sum of r over slot axis)_j >> ell_x.

    Composed of ell random-bit sharings, k-1 random masks, local share
    conversion to per-slot Shamir positions, and one grouped Shamir degree
    transformation; all randomness requests ride a single initial pass, so
    the whole generation takes 5 rounds absent zero-square retries.
    """
    f = cfg.field
    d, k, ell, ell_x = cfg.d, cfg.k, f.ell, f.ell_x
    m = count
    nb = ell * m
    reqs = [
        ("packed", d, "uniform", nb),
        ("packed_pair", 2 * d, d, "uniform", nb),
        ("packed_pair", d + k - 1, d, "uniform", nb),
        ("packed", d, "uniform", (k - 1) * m),
    ]
    reqs += [
        ("shamir_pair", cfg.secret_positions[i], 2 * d, 2 * d - k + 1, k * m) for i in range(k)
    ]
    res = gen_random_multi(rt, cfg, reqs)
    bits = _bits_from_material(rt, cfg, res[0], res[1], res[2], nb)
    bits = bits.reshape(ell, m)
    rp = np.zeros(m, dtype=np.uint64)
    q = np.zeros(m, dtype=np.uint64)
    for i in range(ell):
        q = f.add(q, f.mul(bits[i], np.uint64((1 << i) % f.p)))
        if i >= ell_x:
            rp = f.add(rp, f.mul(bits[i], np.uint64((1 << (i - ell_x)) % f.p)))
    wrest = res[3].reshape(k - 1, m) if k > 1 else np.zeros((0, m), dtype=np.uint64)
    w0 = q
    for row in wrest:
        w0 = f.sub(w0, row)
    wall = [w0] + list(wrest)
    groups = []
    for i in range(k):
        conv = cfg.sh_convert(PackedShare(rt.pid, wall[i], d), cfg.secret_positions[i])
        # order: slot index j major, triple index minor
        groups.append(
            (cfg.secret_positions[i], np.concatenate([s.value for s in conv]), 2 * d)
        )
    outs = degree_trans_shamir_grouped(rt, cfg, groups, 2 * d - k + 1, res[4:])
    racc = np.zeros((k, m), dtype=np.uint64)
    for i in range(k):
        block = outs[i].reshape(k, m)
        for j in range(k):
            racc[j] = f.add(racc[j], f.mul(block[j], cfg.unit_shares[rt.pid - 1, i]))
    return racc.T.ravel(), rp


# -- protocol-specific masks -------------------------------------------------------


def gen_pack_trans_masks(rt, cfg, units):
    """Masks for the pack transformation: k constant-vector sharings
    (r_i, ..., r_i) at degree d plus the packed diagonal (r_0, ..., r_{k-1})
    reduced to degree d.  Two rounds: one randomness pass, one degree
    transformation.

    Returns (rprime_flat, r) with k constant sharings then one diagonal
    sharing per unit; rprime_flat[u*k + i] is the share of (r_i, ..., r_i).
    """
    f = cfg.field
    d, k = cfg.d, cfg.k
    const, pair = gen_random_multi(
        rt,
        cfg,
        [
            ("packed", d, "constant", units * k),
            ("packed_pair", d + k - 1, d, "uniform", units),
        ],
    )
    grouped = const.reshape(units, k)
    sel = np.zeros(units, dtype=np.uint64)
    for i in range(k):
        sel = f.add(sel, f.mul(grouped[:, i], cfg.unit_shares[rt.pid - 1, i]))
    r = degree_trans(rt, cfg, PackedShare(rt.pid, sel, d + k - 1), d, pair)
    return const, r.value


def gen_pmat_masks(rt, cfg, units):
    """Masks for parallel matrix multiplication with truncation: per entry a
    degree-2d sharing R of a uniform ell-bit value (bit squares plus a zero
    sharing) and the shifted degree-d mask R' = R >> ell_x.  Four rounds: the
    zero sharings ride the random-bit generation's first pass."""
    f = cfg.field
    d, k, ell, ell_x = cfg.d, cfg.k, f.ell, f.ell_x
    nb = units * ell
    res = gen_random_multi(
        rt,
        cfg,
        [
            ("packed", d, "uniform", nb),
            ("packed_pair", 2 * d, d, "uniform", nb),
            ("packed_pair", d + k - 1, d, "uniform", nb),
            ("packed", 2 * d, "zero", units),
        ],
    )
    bits = _bits_from_material(rt, cfg, res[0], res[1], res[2], nb).reshape(ell, units)
    big = res[3]
    small = np.zeros(units, dtype=np.uint64)
    for i in range(ell):
        sq = f.mul(bits[i], bits[i])  # degree 2d, same secrets (bits are 0/1)
        big = f.add(big, f.mul(sq, np.uint64((1 << i) % f.p)))
        if i >= ell_x:
            small = f.add(small, f.mul(bits[i], np.uint64((1 << (i - ell_x)) % f.p)))
    return big, small


# -- randomness store -------------------------------------------------------------

_KEY_WIDTHS = {
    "rand": (1,),
    "rand_const": (1,),
    "zero": (1,),
    "bits": (1,),
    "pair": (1, 1),
    "pair_sh": (1, 1),
}


def key_widths(cfg, key):
    """Array lengths per stored unit, for each field of the correlation."""
    if key[0] in _KEY_WIDTHS:
        return _KEY_WIDTHS[key[0]]
    if key[0] in ("vm", "trunc"):
        return (cfg.k, 1)
    if key[0] == "packtrans":
        return (cfg.k, 1)
    if key[0] == "pmatmask":
        return (1, 1)
    raise ValueError(f"unknown store key {key!r}")


# generated in bulk when auto mode refills cheap correlation types
_AUTO_CHUNK = {
    "rand": 64,
    "rand_const": 64,
    "zero": 64,
    "bits": 64,
    "pair": 256,
    "pair_sh": 256,
    "packtrans": 16,
    "pmatmask": 16,
}


class RandomnessStore:
    """Per-party buffer of correlated randomness.

    In auto mode (interactive runs) a miss triggers on-the-fly generation
    over the party runtime, accounted to the offline phase.  Without auto
    (dealer mode) a miss raises MissingRandomness.
    """

    def __init__(self, cfg, rt=None, auto=False):
        self.cfg = cfg
        self.rt = rt
        self.auto = auto
        self._buf: dict = {}  # key -> [units, list-per-field of chunks]

    def put(self, key, arrays, units: int):
        widths = key_widths(self.cfg, key)
        arrays = tuple(np.atleast_1d(a) for a in arrays)
        assert len(arrays) == len(widths)
        for a, w in zip(arrays, widths):
            assert a.shape[0] == units * w, (key, a.shape, units, w)
        entry = self._buf.setdefault(key, [0, [[] for _ in widths]])
        entry[0] += units
        for chunks, a in zip(entry[1], arrays):
            chunks.append(a)

    def available(self, key) -> int:
        entry = self._buf.get(key)
        return entry[0] if entry else 0

    def take(self, key, units: int):
        while self.available(key) < units:
            if not (self.auto and self.rt is not None):
                raise MissingRandomness(f"store empty for {key}, need {units}")
            self._generate(key, units - self.available(key))
        widths = key_widths(self.cfg, key)
        entry = self._buf[key]
        out = []
        for fi, w in enumerate(widths):
            flat = np.concatenate(entry[1][fi]) if len(entry[1][fi]) > 1 else entry[1][fi][0]
            out.append(flat[: units * w])
            entry[1][fi] = [flat[units * w :]]
        entry[0] -= units
        return tuple(out)

    def _generate(self, key, units: int):
        rt, cfg = self.rt, self.cfg
        units = max(units, _AUTO_CHUNK.get(key[0], units))
        prev = rt.phase
        rt.set_phase(PHASE_OFFLINE)
        try:
            kind = key[0]
            if kind == "rand":
                arrays = (gen_random(rt, cfg, units, key[1]),)
            elif kind == "rand_const":
                arrays = (gen_random(rt, cfg, units, key[1], mode="constant"),)
            elif kind == "zero":
                arrays = (gen_zero_share(rt, cfg, units, key[1]),)
            elif kind == "bits":
                arrays = (gen_random_bits(rt, cfg, units),)
            elif kind == "pair":
                arrays = gen_random_pair(rt, cfg, units, key[1], key[2])
            elif kind == "pair_sh":
                arrays = gen_random_multi(
                    rt, cfg, [("shamir_pair", key[1], key[2], key[3], units)]
                )[0]
            elif kind == "vm":
                arrays = gen_vm_randtuple(rt, cfg, units)
            elif kind == "trunc":
                arrays = gen_trunc_triple(rt, cfg, units)
            elif kind == "packtrans":
                arrays = gen_pack_trans_masks(rt, cfg, units)
            elif kind == "pmatmask":
                arrays = gen_pmat_masks(rt, cfg, units)
            else:
                raise ValueError(f"unknown store key {key!r}")
        finally:
            rt.set_phase(prev)
        self.put(key, arrays, units)

    # convenience wrappers used by the online protocols

    def take_pair(self, d1, d2, count):
        return self.take(("pair", d1, d2), count)

    def take_pair_shamir(self, position, d1, d2, count):
        return self.take(("pair_sh", position, d1, d2), count)


def degree_trans_store(rt, cfg, store, share: PackedShare, target_degree: int) -> PackedShare:
    m = np.atleast_1d(share.value).shape[0]
    pair = store.take_pair(share.degree, target_degree, m)
    return degree_trans(rt, cfg, share, target_degree, pair)


# -- dealer ------------------------------------------------------------------------


class Dealer:
    """Trusted central generation of offline material (tests/benchmarks).

    Produces the same correlations as the interactive protocols, keyed and
    laid out identically, so online code cannot tell the modes apart.
    Deterministic for a fixed seed.
    """

    def __init__(self, cfg, seed: int):
        self.cfg = cfg
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def _grids(self, key, units):
        """Returns a list of (n, units*width) share grids, one per field."""
        cfg, f, rng = self.cfg, self.cfg.field, self.rng
        k, d, t = cfg.k, cfg.d, cfg.t
        kind = key[0]
        if kind in ("rand", "rand_const", "zero"):
            mode = {"rand": "uniform", "rand_const": "constant", "zero": "zero"}[kind]
            return [cfg.share(_sample_secrets(cfg, rng, units, mode), key[1], rng)]
        if kind == "bits":
            secrets = rng.integers(0, 2, size=(k, units), dtype=np.uint64)
            return [cfg.share(secrets, d, rng)]
        if kind == "pair":
            secrets = f.random(rng, (k, units))
            return [cfg.share(secrets, key[1], rng), cfg.share(secrets, key[2], rng)]
        if kind == "pair_sh":
            vals = f.random(rng, units)
            return [
                cfg.share_at(vals, key[1], key[2], rng),
                cfg.share_at(vals, key[1], key[3], rng),
            ]
        if kind == "vm":
            rsec = f.random(rng, (k, k * units))  # column (t*k + j)
            rp = np.zeros((k, units), dtype=np.uint64)
            r3 = rsec.reshape(k, units, k)
            for j in range(k):
                acc = r3[0, :, j]
                for slot in range(1, k):
                    acc = f.add(acc, r3[slot, :, j])
                rp[j] = acc
            return [cfg.share(rsec, 2 * d, rng), cfg.share(rp, d, rng)]
        if kind == "trunc":
            ell, ell_x = f.ell, f.ell_x
            q = rng.integers(0, 1 << ell, size=(k, units), dtype=np.uint64)
            rp = (q >> np.uint64(ell_x)).astype(np.uint64)
            rsec = np.zeros((k, k * units), dtype=np.uint64)  # column (t*k + j)
            r3 = rsec.reshape(k, units, k)
            for j in range(k):
                acc = f.reduce(q[j])
                for slot in range(1, k):
                    r3[slot, :, j] = f.random(rng, units)
                    acc = f.sub(acc, r3[slot, :, j])
                r3[0, :, j] = acc
            return [cfg.share(rsec, 2 * d, rng), cfg.share(rp, d, rng)]
        if kind == "packtrans":
            vals = f.random(rng, (k, units))
            const = np.zeros((k, units * k), dtype=np.uint64)
            for i in range(k):
                const[:, i::k] = vals[i]  # column u*k+i is constant vals[i, u]
            return [cfg.share(const, d, rng), cfg.share(vals, d, rng)]
        if kind == "pmatmask":
            big = rng.integers(0, 1 << f.ell, size=(k, units), dtype=np.uint64)
            small = (big >> np.uint64(f.ell_x)).astype(np.uint64)
            return [cfg.share(f.reduce(big), 2 * d, rng), cfg.share(small, d, rng)]
        raise ValueError(f"unknown store key {key!r}")

    def fill_stores(self, stores, requirements: dict):
        """requirements: key -> units; stores: one RandomnessStore per party."""
        for key, units in requirements.items():
            if units <= 0:
                continue
            grids = self._grids(key, units)
            for pid in range(1, self.cfg.n + 1):
                stores[pid - 1].put(key, tuple(g[pid - 1] for g in grids), units)

    def write_files(self, dirpath, requirements: dict):
        """Per-party binary share files plus a JSON manifest."""
        cfg = self.cfg
        dirpath = Path(dirpath)
        dirpath.mkdir(parents=True, exist_ok=True)
        sections = []
        per_party = [[] for _ in range(cfg.n)]
        for key, units in requirements.items():
            if units <= 0:
                continue
            grids = self._grids(key, units)
            sections.append({"key": list(key), "units": units, "fields": len(grids)})
            for pid in range(1, cfg.n + 1):
                for g in grids:
                    per_party[pid - 1].append(g[pid - 1])
        manifest = {
            "ell": cfg.field.ell,
            "ell_x": cfg.field.ell_x,
            "n": cfg.n,
            "d": cfg.d,
            "k": cfg.k,
            "seed": self.seed,
            "sections": sections,
        }
        (dirpath / "manifest.json").write_text(json.dumps(manifest, indent=1))
        for pid in range(1, cfg.n + 1):
            header = _SHARE_HEADER.pack(cfg.field.ell, cfg.n, cfg.d, cfg.k, pid)
            body = cfg.field.to_bytes(
                np.concatenate(per_party[pid - 1]) if per_party[pid - 1] else np.empty(0)
            )
            (dirpath / f"party_{pid}.shares").write_bytes(header + body)
        return manifest


def load_store(dirpath, pid: int, cfg) -> RandomnessStore:
    """Reload one party's dealer file into a strict (non-auto) store."""
    dirpath = Path(dirpath)
    try:
        manifest = json.loads((dirpath / "manifest.json").read_text())
        raw = (dirpath / f"party_{pid}.shares").read_bytes()
    except OSError as exc:
        raise IoError(str(exc))
    ell, n, d, k, file_pid = _SHARE_HEADER.unpack(raw[: _SHARE_HEADER.size])
    if (ell, n, d, k, file_pid) != (cfg.field.ell, cfg.n, cfg.d, cfg.k, pid):
        raise IoError("share file header does not match the packing config")
    flat = cfg.field.from_bytes(raw[_SHARE_HEADER.size :])
    store = RandomnessStore(cfg)
    off = 0
    for sec in manifest["sections"]:
        key = tuple(sec["key"])
        units = sec["units"]
        widths = key_widths(cfg, key)
        arrays = []
        for w in widths:
            arrays.append(flat[off : off + units * w])
            off += units * w
        store.put(key, tuple(arrays), units)
    return store
