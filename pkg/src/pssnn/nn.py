"""Secure CNN inference on top of the packed-sharing protocols.

A model is a straight-line graph of Conv2d / ReLU / MaxPool2d / Flatten /
Dense layers over fixed-point values with ell_x fractional bits.  Weights
and the input image are secret-shared ahead of time; inference is then a
sequence of the linear and comparison protocols with only local glue in
between.

Activation layouts (k = packing width, d = threshold degree):

* slot-replicated: every feature is one packed sharing whose k slots all
  carry the same value.  Produced by the input client and by pack_trans;
  consumed by convolutions, whose im2col matrix is assembled locally from
  these sharings.
* slot-parallel: convolution outputs; sharing (g, q) carries channels
  g*k+i (slot i) at spatial position q.
* block-packed vector: dense-layer vectors; plaintext index j lives in
  sharing j//k, slot j%k.

Flatten is free: reading the slot-parallel grid in [position, group, slot]
order is already a valid block packing, and the dense weight matrix is
permuted to match when the model is shared.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from .pss import PackedShare
from . import linear as lin
from . import nonlinear as nl


class ModelError(Exception):
    pass


class FixedPointCodec:
    """Float <-> fixed-point with ell_x fractional bits, via the field's
    signed integer embedding."""

    def __init__(self, fld):
        self.field = fld
        self.scale = 1 << fld.ell_x

    def to_int(self, x) -> np.ndarray:
        return np.rint(np.asarray(x, dtype=np.float64) * self.scale).astype(np.int64)

    def to_field(self, x) -> np.ndarray:
        return self.field.encode_int(self.to_int(x))

    def from_field(self, fe) -> np.ndarray:
        return self.field.decode_int(fe).astype(np.float64) / self.scale

    def from_int(self, iv) -> np.ndarray:
        return np.asarray(iv, dtype=np.float64) / self.scale


# -- model description -----------------------------------------------------------


@dataclass
class Conv2d:
    out_channels: int
    kernel: int
    stride: int = 1
    padding: int = 0
    weight: np.ndarray = None  # (c_out, c_in, kernel, kernel)
    bias: np.ndarray = None  # (c_out,)
    kind: str = dc_field(default="conv2d", init=False)


@dataclass
class ReLU:
    kind: str = dc_field(default="relu", init=False)


@dataclass
class MaxPool2d:
    size: int
    kind: str = dc_field(default="maxpool2d", init=False)


@dataclass
class Flatten:
    kind: str = dc_field(default="flatten", init=False)


@dataclass
class Dense:
    out_features: int
    weight: np.ndarray = None  # (out, in)
    bias: np.ndarray = None  # (out,)
    kind: str = dc_field(default="dense", init=False)


class ModelGraph:
    """Ordered layers plus the (c, h, w) input shape; validates shapes on
    construction and exposes per-layer output shapes."""

    def __init__(self, input_shape, layers):
        self.input_shape = tuple(input_shape)
        self.layers = list(layers)
        self.shapes = self._infer_shapes()

    def _infer_shapes(self):
        shape = self.input_shape
        out = []
        for li, layer in enumerate(self.layers):
            if layer.kind == "conv2d":
                if len(shape) != 3:
                    raise ModelError(f"layer {li}: conv needs (c, h, w), got {shape}")
                c, h, w = shape
                kk, s, p = layer.kernel, layer.stride, layer.padding
                oh = (h + 2 * p - kk) // s + 1
                ow = (w + 2 * p - kk) // s + 1
                if oh <= 0 or ow <= 0:
                    raise ModelError(f"layer {li}: empty output {oh}x{ow}")
                if layer.weight is not None and layer.weight.shape != (layer.out_channels, c, kk, kk):
                    raise ModelError(f"layer {li}: weight shape {layer.weight.shape}")
                shape = (layer.out_channels, oh, ow)
            elif layer.kind == "relu":
                pass
            elif layer.kind == "maxpool2d":
                if len(shape) != 3:
                    raise ModelError(f"layer {li}: maxpool needs (c, h, w), got {shape}")
                c, h, w = shape
                t = layer.size
                if h % t or w % t:
                    raise ModelError(f"layer {li}: pool {t} does not divide {h}x{w}")
                shape = (c, h // t, w // t)
            elif layer.kind == "flatten":
                shape = (int(np.prod(shape)),)
            elif layer.kind == "dense":
                if len(shape) != 1:
                    raise ModelError(f"layer {li}: dense needs a flat input, got {shape}")
                if layer.weight is not None and layer.weight.shape != (layer.out_features, shape[0]):
                    raise ModelError(f"layer {li}: weight shape {layer.weight.shape}")
                shape = (layer.out_features,)
            else:
                raise ModelError(f"unknown layer kind {layer.kind!r}")
            out.append(shape)
        return out

    # -- (de)serialization: one npz with a json-ish header array -------------

    def save(self, path):
        meta = [f"input:{','.join(map(str, self.input_shape))}"]
        arrays = {}
        for li, layer in enumerate(self.layers):
            if layer.kind == "conv2d":
                meta.append(
                    f"conv2d:{layer.out_channels},{layer.kernel},{layer.stride},{layer.padding}"
                )
                arrays[f"w{li}"] = layer.weight
                arrays[f"b{li}"] = layer.bias
            elif layer.kind == "maxpool2d":
                meta.append(f"maxpool2d:{layer.size}")
            elif layer.kind == "dense":
                meta.append(f"dense:{layer.out_features}")
                arrays[f"w{li}"] = layer.weight
                arrays[f"b{li}"] = layer.bias
            else:
                meta.append(layer.kind)
        np.savez(path, meta=np.array(meta), **arrays)

    @classmethod
    def load(cls, path):
        data = np.load(path, allow_pickle=False)
        meta = [str(m) for m in data["meta"]]
        input_shape = tuple(int(x) for x in meta[0].split(":")[1].split(","))
        layers = []
        for li, entry in enumerate(meta[1:]):
            kind, _, args = entry.partition(":")
            if kind == "conv2d":
                co, kk, s, p = (int(x) for x in args.split(","))
                layers.append(Conv2d(co, kk, s, p, data[f"w{li}"], data[f"b{li}"]))
            elif kind == "relu":
                layers.append(ReLU())
            elif kind == "maxpool2d":
                layers.append(MaxPool2d(int(args)))
            elif kind == "flatten":
                layers.append(Flatten())
            elif kind == "dense":
                layers.append(Dense(int(args), data[f"w{li}"], data[f"b{li}"]))
            else:
                raise ModelError(f"unknown layer kind {kind!r} in {path}")
        return cls(input_shape, layers)


def _im2col_indices(c, h, w, kk, stride, pad):
    """Gather indices (c*kk*kk, oh*ow) into a flat (c*h*w) activation;
    -1 marks zero padding."""
    oh = (h + 2 * pad - kk) // stride + 1
    ow = (w + 2 * pad - kk) // stride + 1
    idx = np.empty((c * kk * kk, oh * ow), dtype=np.int64)
    row = 0
    for ci in range(c):
        for di in range(kk):
            for dj in range(kk):
                col = 0
                for oi in range(oh):
                    ii = oi * stride + di - pad
                    for oj in range(ow):
                        jj = oj * stride + dj - pad
                        idx[row, col] = ci * h * w + ii * w + jj if 0 <= ii < h and 0 <= jj < w else -1
                        col += 1
                row += 1
    return idx, oh, ow


def _flatten_perm(c, h, w, k):
    """Plaintext feature index for each block-packed position after a free
    flatten of a slot-parallel (c, h, w) activation; -1 marks slot padding.

    Block j of the packed vector is (position q, channel group g) with
    j = q * groups + g; slot i inside it is channel g*k+i.
    """
    groups = -(-c // k)
    perm = np.full(groups * h * w * k, -1, dtype=np.int64)
    for q in range(h * w):
        for g in range(groups):
            for i in range(k):
                ch = g * k + i
                if ch < c:
                    perm[(q * groups + g) * k + i] = ch * h * w + q
    return perm


# -- sharing (client side) ---------------------------------------------------------


def share_input(cfg, image, rng):
    """Slot-replicate and share a (c, h, w) float image; returns (n, c*h*w)
    share values."""
    codec = FixedPointCodec(cfg.field)
    flat = codec.to_field(np.asarray(image).ravel())
    secrets = np.broadcast_to(flat, (cfg.k, flat.shape[0]))
    return cfg.share(secrets, cfg.d, rng)


def _dense_matrix(layer, perm):
    """Dense weights -> plaintext (in_pad, out) matrix in packed row order;
    perm maps packed feature index to plaintext column of W (-1 -> zero row)."""
    w = np.asarray(layer.weight, dtype=np.float64)
    out = np.zeros((perm.shape[0], w.shape[0]), dtype=np.float64)
    live = perm >= 0
    out[live] = w[:, perm[live]].T
    return out


def share_model(cfg, model: ModelGraph, rng):
    """Share every weight tensor; returns a list of n per-party dicts keyed
    by layer index."""
    codec = FixedPointCodec(cfg.field)
    k = cfg.k
    parties = [dict() for _ in range(cfg.n)]
    shape = model.input_shape
    for li, layer in enumerate(model.layers):
        if layer.kind == "conv2d":
            c_in = shape[0]
            groups = -(-layer.out_channels // k)
            inner = c_in * layer.kernel * layer.kernel
            bank = np.zeros((k, groups, inner), dtype=np.uint64)
            bvals = np.zeros((k, groups), dtype=np.uint64)
            wf = codec.to_field(np.asarray(layer.weight, dtype=np.float64).reshape(layer.out_channels, inner))
            bf = codec.to_field(layer.bias)
            for ch in range(layer.out_channels):
                bank[ch % k, ch // k] = wf[ch]
                bvals[ch % k, ch // k] = bf[ch]
            wg = lin.share_grid(cfg, bank, rng)
            bg = lin.share_grid(cfg, bvals, rng)
            for pid in range(cfg.n):
                parties[pid][li] = {"w": wg[pid], "b": bg[pid]}
        elif layer.kind == "dense":
            if len(shape) != 1:
                raise ModelError("dense after non-flat shape")
            # perm covers slot padding when the flatten came from conv output
            if li and model.layers[li - 1].kind == "flatten":
                c, h, w = model.shapes[li - 2] if li >= 2 else model.input_shape
                perm = _flatten_perm(c, h, w, k)
            else:
                perm = np.arange(shape[0])
            mat = codec.to_field(_dense_matrix(layer, perm))
            wg = lin.share_grid(cfg, lin.pack_matrix_rb(cfg, mat), rng)
            bg = cfg.share(lin.pack_vector(cfg, codec.to_field(layer.bias)), cfg.d, rng)
            for pid in range(cfg.n):
                parties[pid][li] = {"w": wg[pid], "b": bg[pid], "rows": perm.shape[0]}
        shape = model.shapes[li]
    return parties


# -- secure inference (party side) ---------------------------------------------------


def infer_secure(rt, cfg, store, model: ModelGraph, model_shares: dict, input_share):
    """Run the model over shared weights and a shared input; returns the
    party's block-packed logits as a PackedVector."""
    f = cfg.field
    k = cfg.k
    state = ("slotrep", np.asarray(input_share, dtype=np.uint64))
    shape = model.input_shape
    for li, layer in enumerate(model.layers):
        if layer.kind == "conv2d":
            if state[0] == "slotpar":
                state = ("slotrep", _to_slotrep(rt, cfg, store, state[1], shape))
            if state[0] != "slotrep":
                raise ModelError(f"layer {li}: conv needs a spatial activation")
            c, h, w = shape
            idx, oh, ow = _im2col_indices(c, h, w, layer.kernel, layer.stride, layer.padding)
            act = state[1]
            bmat = np.where(idx >= 0, act[idx.clip(0)], np.uint64(0))
            groups = -(-layer.out_channels // k)
            prod = lin.pmat_mult_trunc(
                rt,
                cfg,
                store,
                lin.PackedMatrixSP(model_shares[li]["w"], (groups, idx.shape[0])),
                lin.PackedMatrixSP(bmat, (idx.shape[0], oh * ow)),
            )
            val = f.add(prod.value, model_shares[li]["b"][:, None])
            state = ("slotpar", val)
        elif layer.kind == "relu":
            if state[0] == "vec":
                out = nl.relu(rt, cfg, store, PackedShare(rt.pid, state[1].value, cfg.d))
                state = ("vec", lin.PackedVector(out.value, state[1].length))
            else:
                val = state[1]
                out = nl.relu(rt, cfg, store, PackedShare(rt.pid, val.ravel(), cfg.d))
                state = (state[0], out.value.reshape(val.shape))
        elif layer.kind == "maxpool2d":
            if state[0] != "slotpar":
                raise ModelError(f"layer {li}: maxpool needs conv-style activation")
            c, h, w = shape
            t = layer.size
            groups = state[1].shape[0]
            grid = state[1].reshape(groups, h, w)
            # window element (di, dj) on axis 0, pooled cells on the batch axis
            wins = np.stack(
                [grid[:, di::t, dj::t].reshape(groups, -1) for di in range(t) for dj in range(t)]
            )
            out = nl.maxpool(rt, cfg, store, PackedShare(rt.pid, wins.reshape(t * t, -1), cfg.d))
            state = ("slotpar", out.value.reshape(groups, (h // t) * (w // t)))
        elif layer.kind == "flatten":
            if state[0] != "slotpar":
                raise ModelError(f"layer {li}: flatten expects conv-style activation")
            flat = state[1].T.ravel()  # [position, group] order: free repack
            state = ("vec", lin.PackedVector(flat, flat.shape[0] * k))
        elif layer.kind == "dense":
            if state[0] != "vec":
                raise ModelError(f"layer {li}: dense expects a flat activation")
            rows = model_shares[li]["rows"]
            a = state[1]
            if a.value.shape[0] * k != lin.pad_len(rows, k):
                raise ModelError(f"layer {li}: got {a.value.shape[0] * k} features, matrix has {rows} rows")
            prod = lin.vec_mat_mult_trunc(
                rt, cfg, store, a, lin.PackedMatrixRB(model_shares[li]["w"], (rows, layer.out_features))
            )
            val = f.add(prod.value, model_shares[li]["b"])
            state = ("vec", lin.PackedVector(val, layer.out_features))
        shape = model.shapes[li]
    if state[0] != "vec":
        raise ModelError("model must end in a flat vector (add Flatten/Dense)")
    return state[1]


def _to_slotrep(rt, cfg, store, slotpar, shape):
    """Slot-parallel (groups, m) activation -> slot-replicated flat (c*m,)
    via one batched pack transformation."""
    c, h, w = shape
    groups, m = slotpar.shape
    outs = lin.pack_trans(rt, cfg, store, PackedShare(rt.pid, slotpar.ravel(), cfg.d))
    flat = np.zeros(c * m, dtype=np.uint64)
    for ch in range(c):
        # batch element g*m+q of output ch%k replicates channel ch at position q
        flat[ch * m : (ch + 1) * m] = outs[ch % cfg.k].value[(ch // cfg.k) * m : (ch // cfg.k + 1) * m]
    return flat


def reveal_output(rt, cfg, vec: lin.PackedVector):
    """Open the logits to every party; returns plaintext floats."""
    codec = FixedPointCodec(cfg.field)
    opened = rt.open_to_all(cfg, PackedShare(rt.pid, vec.value, cfg.d))
    return codec.from_field(lin.unpack_vector(cfg, opened, vec.length))


# -- offline randomness budget ---------------------------------------------------


def _prefix_products(m):
    """Products consumed by a fan-in-doubling prefix pass over m inputs."""
    return sum(bin(i).count("1") for i in range(m))


def _budget_add(budget, key, units):
    budget[key] = budget.get(key, 0) + units


def _budget_relu(cfg, budget, count):
    f, d, k = cfg.field, cfg.d, cfg.k
    _budget_add(budget, ("bits",), f.ell * count)
    _budget_add(budget, ("pair", d + k - 1, d), f.ell * count)
    pm = _prefix_products(f.ell) * count  # prefix-or ladder
    _budget_add(budget, ("pair", 2 * d, d), pm + 3 * count)  # + wrap, lsb-xor, final product


def randomness_budget(cfg, model: ModelGraph):
    """Exact per-key offline units consumed by one secure inference."""
    k = cfg.k
    budget: dict = {}
    shape = model.input_shape
    layout = "slotrep"
    for li, layer in enumerate(model.layers):
        if layer.kind == "conv2d":
            c, h, w = shape
            if layout == "slotpar":
                _budget_add(budget, ("packtrans",), -(-c // k) * h * w)
            _, oh, ow = _im2col_indices(c, h, w, layer.kernel, layer.stride, layer.padding)
            _budget_add(budget, ("pmatmask",), -(-layer.out_channels // k) * oh * ow)
            layout = "slotpar"
        elif layer.kind == "relu":
            if layout == "vec":
                count = lin.pad_len(shape[0], k) // k
            else:
                c, h, w = shape
                count = -(-c // k) * h * w
            _budget_relu(cfg, budget, count)
        elif layer.kind == "maxpool2d":
            c, h, w = shape
            m = layer.size * layer.size
            batch = -(-c // k) * (h // layer.size) * (w // layer.size)
            while m > 1:
                half = m // 2
                _budget_relu(cfg, budget, half * batch)
                m = half + (m % 2)
        elif layer.kind == "flatten":
            layout = "vec"
        elif layer.kind == "dense":
            _budget_add(budget, ("trunc",), lin.pad_len(layer.out_features, k) // k)
            layout = "vec"
        shape = model.shapes[li]
    return budget
