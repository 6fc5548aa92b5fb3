"""Field arithmetic against big-integer oracles, exhaustively at ell=13."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pssnn.field import Field, FieldParams, DivisionByZero, NonResidue
from pssnn import kernels

F13 = Field(FieldParams(13))
P13 = F13.p


def test_wraparound_example():
    assert int(F13.add(np.uint64(8190), np.uint64(5))) == 4


def test_params_validation():
    with pytest.raises(ValueError):
        FieldParams(17)
    with pytest.raises(ValueError):
        FieldParams(13, 12)  # ell_x must stay below ell - 2
    assert FieldParams(13).ell_x == 4
    assert FieldParams(31).ell_x == 13
    assert FieldParams(61).ell_x == 13


def test_add_sub_exhaustive_ell13():
    a = np.repeat(np.arange(P13, dtype=np.uint64), 4)
    rng = np.random.default_rng(0)
    b = F13.random(rng, a.shape[0])
    ao, bo = a.astype(object), b.astype(object)
    assert np.all(F13.add(a, b).astype(object) == (ao + bo) % P13)
    assert np.all(F13.sub(a, b).astype(object) == (ao - bo) % P13)
    assert np.all(F13.neg(a).astype(object) == (-ao) % P13)


def test_mul_exhaustive_ell13():
    # every residue times several uniform partners, against Python ints
    a = np.repeat(np.arange(P13, dtype=np.uint64), 4)
    rng = np.random.default_rng(1)
    b = F13.random(rng, a.shape[0])
    want = (a.astype(object) * b.astype(object)) % P13
    assert np.all(F13.mul(a, b).astype(object) == want)


def test_sqrt_exhaustive_ell13():
    a = np.arange(P13, dtype=np.uint64)
    r = F13.sqrt_canonical(F13.mul(a, a))
    assert np.all(F13.mul(r, r) == F13.mul(a, a))
    # canonical branch: root lies in [0, (p-1)/2]
    assert np.all(r <= np.uint64((P13 - 1) // 2))
    with pytest.raises(NonResidue):
        # 3 is a non-residue mod 8191 (3^((p-1)/2) = p-1)
        F13.sqrt_canonical(np.uint64(3))


def test_inverse_exhaustive_ell13():
    a = np.arange(1, P13, dtype=np.uint64)
    assert np.all(F13.mul(a, F13.inv(a)) == 1)
    with pytest.raises(DivisionByZero):
        F13.inv(np.uint64(0))


@pytest.mark.parametrize("ell", [13, 31, 61])
def test_mul_random_bigint_oracle(ell):
    f = Field(FieldParams(ell))
    rng = np.random.default_rng(ell)
    a, b = f.random(rng, 4096), f.random(rng, 4096)
    want = (a.astype(object) * b.astype(object)) % f.p
    assert np.all(f.mul(a, b).astype(object) == want)


@pytest.mark.parametrize("ell", [13, 31, 61])
def test_matmul_bigint_oracle(ell):
    f = Field(FieldParams(ell))
    rng = np.random.default_rng(ell + 1)
    a, b = f.random(rng, (9, 7)), f.random(rng, (7, 5))
    want = (a.astype(object) @ b.astype(object)) % f.p
    assert np.all(f.matmul(a, b).astype(object) == want)


@pytest.mark.parametrize("ell", [13, 31, 61])
def test_backends_agree(ell):
    f = Field(FieldParams(ell))
    rng = np.random.default_rng(2)
    a, b = f.random(rng, 1000), f.random(rng, 1000)
    ma, mb = f.random(rng, (17, 13)), f.random(rng, (13, 11))
    impls = [kernels.get_impl(nm) for nm in kernels.available_backends()]
    muls = [impl.mul_mod(a, b, f.p, f.ell) for impl in impls]
    mats = [impl.matmul_mod(ma, mb, f.p, f.ell) for impl in impls]
    for other in muls[1:]:
        assert np.array_equal(muls[0], other)
    for other in mats[1:]:
        assert np.array_equal(mats[0], other)


@pytest.mark.parametrize("ell", [13, 31, 61])
def test_encode_decode_signed(ell):
    f = Field(FieldParams(ell))
    lim = 1 << (ell - 2)
    rng = np.random.default_rng(3)
    x = rng.integers(-lim + 1, lim, size=256)
    assert np.array_equal(f.decode_int(f.encode_int(x)), x)


def test_bytes_roundtrip():
    f = Field(FieldParams(31))
    rng = np.random.default_rng(4)
    a = f.random(rng, 100)
    assert np.array_equal(f.from_bytes(f.to_bytes(a)), a)
    with pytest.raises(ValueError):
        Field(FieldParams(13)).from_bytes((123456789).to_bytes(8, "little"))


@settings(max_examples=200, deadline=None)
@given(
    a=st.integers(min_value=0, max_value=P13 - 1),
    b=st.integers(min_value=0, max_value=P13 - 1),
    c=st.integers(min_value=0, max_value=P13 - 1),
)
def test_field_axioms(a, b, c):
    ua, ub, uc = np.uint64(a), np.uint64(b), np.uint64(c)
    assert F13.mul(ua, ub) == F13.mul(ub, ua)
    assert F13.mul(F13.mul(ua, ub), uc) == F13.mul(ua, F13.mul(ub, uc))
    # distributivity
    assert F13.mul(ua, F13.add(ub, uc)) == F13.add(F13.mul(ua, ub), F13.mul(ua, uc))
    assert F13.add(ua, F13.neg(ua)) == 0
