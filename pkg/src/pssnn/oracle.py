"""Plaintext reference semantics for the secure protocols.

Everything here runs over exact integers (Python ints via object arrays) so
the fixed-point behaviour is bit-defined: every multiply-accumulate that the
secure protocols truncate is followed by an arithmetic floor-shift of ell_x
bits.  Secure inference must match these outputs up to the +-1 per-output
truncation slack of the masked-shift protocols.
"""

import numpy as np

from .nn import FixedPointCodec, ModelGraph, _im2col_indices


def _obj(x):
    return np.asarray(x, dtype=object)


def o_trunc(x, ell_x):
    """Arithmetic floor shift, elementwise."""
    return _obj(x) >> ell_x


def o_xor(a, b):
    return _obj(a) ^ _obj(b)


def o_prefix_mult(bits):
    return np.multiply.accumulate(_obj(bits), axis=0)


def o_prefix_or(bits):
    return (np.add.accumulate(_obj(bits), axis=0) > 0).astype(object) * 1


def o_bitwise_lt(c, r):
    return (_obj(c) < _obj(r)).astype(object) * 1


def o_drelu(x):
    return (_obj(x) >= 0).astype(object) * 1


def o_relu(x):
    x = _obj(x)
    return x * (x >= 0)


def o_maxpool(x):
    return np.max(_obj(x), axis=0)


FUNCTIONALITIES = {
    "trunc": o_trunc,
    "xor": o_xor,
    "pre_mult": o_prefix_mult,
    "pre_or": o_prefix_or,
    "bitwise_lt": o_bitwise_lt,
    "drelu": o_drelu,
    "relu": o_relu,
    "maxpool": o_maxpool,
}


def plaintext_infer(fld, model: ModelGraph, image) -> np.ndarray:
    """Fixed-point reference inference; returns int logits at scale 2^ell_x."""
    codec = FixedPointCodec(fld)
    ell_x = fld.ell_x
    act = _obj(codec.to_int(np.asarray(image).ravel()))
    shape = model.input_shape
    for li, layer in enumerate(model.layers):
        if layer.kind == "conv2d":
            c, h, w = shape
            idx, oh, ow = _im2col_indices(c, h, w, layer.kernel, layer.stride, layer.padding)
            cols = np.where(idx >= 0, act[idx.clip(0)], 0)
            wmat = _obj(codec.to_int(layer.weight.reshape(layer.out_channels, -1)))
            bias = _obj(codec.to_int(layer.bias))
            act = ((wmat @ cols) >> ell_x) + bias[:, None]
            act = act.ravel()
        elif layer.kind == "relu":
            act = o_relu(act)
        elif layer.kind == "maxpool2d":
            c, h, w = shape
            t = layer.size
            grid = act.reshape(c, h, w)
            wins = np.stack(
                [grid[:, di::t, dj::t].reshape(c, -1) for di in range(t) for dj in range(t)]
            )
            act = o_maxpool(wins).ravel()
        elif layer.kind == "flatten":
            pass
        elif layer.kind == "dense":
            wmat = _obj(codec.to_int(layer.weight))
            bias = _obj(codec.to_int(layer.bias))
            act = ((wmat @ act) >> ell_x) + bias
        shape = model.shapes[li]
    return act


def plaintext_infer_float(fld, model: ModelGraph, image) -> np.ndarray:
    """Reference logits decoded to floats."""
    return FixedPointCodec(fld).from_int(plaintext_infer(fld, model, image))
