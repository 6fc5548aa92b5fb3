"""Arithmetic in the Mersenne prime field F_p, p = 2^ell - 1.

Elements are canonical residues in [0, p), stored either as Python ints or
as numpy uint64 arrays; all array operations are vectorized through the
kernel backend (see :mod:`pssnn.kernels`).
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels

SUPPORTED_ELL = (13, 31, 61)


class FieldError(Exception):
    pass


class DivisionByZero(FieldError):
    pass


class NonResidue(FieldError):
    pass


def _default_ell_x(ell: int) -> int:
    # 13 fractional bits unless the field is too small to hold them
    return 13 if 13 < ell - 2 else 4


@dataclass(frozen=True)
class FieldParams:
    """Mersenne field parameters plus fixed-point precision.

    ell must be one of 13, 31, 61 (prime exponents with 2^ell - 1 prime);
    ell_x is the number of fractional bits used by fixed-point encoding and
    truncation and must satisfy 0 < ell_x < ell - 2.
    """

    ell: int
    ell_x: int = None  # type: ignore[assignment]
    p: int = field(init=False)

    def __post_init__(self):
        if self.ell not in SUPPORTED_ELL:
            raise ValueError(f"unsupported ell={self.ell}; supported: {SUPPORTED_ELL}")
        object.__setattr__(self, "p", (1 << self.ell) - 1)
        if self.ell_x is None:
            object.__setattr__(self, "ell_x", _default_ell_x(self.ell))
        if not 0 < self.ell_x < self.ell - 2:
            raise ValueError(f"ell_x={self.ell_x} out of range for ell={self.ell}")


class Field:
    """Vectorized field arithmetic for one FieldParams instance."""

    def __init__(self, params: FieldParams):
        self.params = params
        self.ell = params.ell
        self.p = params.p
        self.ell_x = params.ell_x
        self._up = np.uint64(self.p)

    def __repr__(self):
        return f"Field(2^{self.ell}-1, ell_x={self.ell_x})"

    # -- canonicalization ---------------------------------------------------

    def reduce(self, x):
        """Reduce an integer (or int array) below p^2 to its canonical residue.

        Shift-and-add folding: x = (x >> ell) + (x & p), repeated, using
        2^ell = 1 (mod p).
        """
        if isinstance(x, (int, np.integer)):
            x = int(x)
            if x < 0:
                raise ValueError("reduce expects a non-negative integer")
            while x > self.p:
                x = (x >> self.ell) + (x & self.p)
            return 0 if x == self.p else x
        x = np.asarray(x, dtype=np.uint64)
        for _ in range(2):
            x = (x >> np.uint64(self.ell)) + (x & self._up)
        return np.where(x >= self._up, x - self._up, x)

    def asarray(self, x):
        arr = np.asarray(x, dtype=np.uint64)
        if np.any(arr >= self._up):
            raise ValueError("non-canonical field element")
        return arr

    def encode_int(self, x):
        """Map a signed integer (or array) to the field; negatives as p - |x|."""
        arr = np.asarray(x, dtype=np.int64)
        # |x| < p, so a signed modulo lands on the canonical residue
        return (arr % np.int64(self.p)).astype(np.uint64)

    def decode_int(self, x):
        """Inverse of encode_int: representatives above p/2 map to negatives."""
        arr = np.asarray(x, dtype=np.uint64)
        half = np.uint64(self.p // 2)
        return np.where(arr > half, arr.astype(np.int64) - np.int64(self.p), arr.astype(np.int64))

    # -- ring operations ----------------------------------------------------

    def add(self, a, b):
        s = np.asarray(a, dtype=np.uint64) + np.asarray(b, dtype=np.uint64)
        # conditional subtract without a wrapping branch (sums stay < 2^62)
        return s - self._up * (s >= self._up)

    def sub(self, a, b):
        s = np.asarray(a, dtype=np.uint64) + self._up - np.asarray(b, dtype=np.uint64)
        return s - self._up * (s >= self._up)

    def neg(self, a):
        a = np.asarray(a, dtype=np.uint64)
        return np.where(a == 0, a, self._up - a)

    def mul(self, a, b):
        return kernels.mul_mod(a, b, self.p, self.ell)

    def matmul(self, a, b):
        return kernels.matmul_mod(a, b, self.p, self.ell)

    def dot(self, a, b):
        """Inner product of two 1-d arrays."""
        return kernels.matmul_mod(
            np.asarray(a, dtype=np.uint64).reshape(1, -1),
            np.asarray(b, dtype=np.uint64).reshape(-1, 1),
            self.p,
            self.ell,
        )[0, 0]

    def pow(self, a, e: int):
        """a**e mod p by square-and-multiply; works on scalars and arrays."""
        a = np.asarray(a, dtype=np.uint64)
        result = np.ones_like(a)
        base = a
        e = int(e)
        while e:
            if e & 1:
                result = self.mul(result, base)
            base = self.mul(base, base)
            e >>= 1
        return result

    def inv(self, a):
        a = np.asarray(a, dtype=np.uint64)
        if np.any(a == 0):
            raise DivisionByZero("inverse of zero")
        return self.pow(a, self.p - 2)

    def sqrt_canonical(self, a):
        """Square root of a quadratic residue, canonicalized to [1, (p-1)/2].

        Uses a^((p+1)/4), valid since Mersenne primes satisfy p = 3 (mod 4).
        Raises NonResidue when the candidate does not square back to a.
        """
        a = np.asarray(a, dtype=np.uint64)
        r = self.pow(a, (self.p + 1) // 4)
        if np.any(self.mul(r, r) != a):
            raise NonResidue("input has no square root in F_p")
        half = np.uint64((self.p - 1) // 2)
        return np.where(r > half, self._up - r, r)

    # -- random sampling ----------------------------------------------------

    def random(self, rng: np.random.Generator, shape):
        return rng.integers(0, self.p, size=shape, dtype=np.uint64)

    # -- serialization ------------------------------------------------------

    def to_bytes(self, arr) -> bytes:
        """Little-endian unsigned 64-bit words."""
        return np.ascontiguousarray(np.asarray(arr, dtype=np.uint64)).astype("<u8").tobytes()

    def from_bytes(self, data: bytes):
        arr = np.frombuffer(data, dtype="<u8").astype(np.uint64)
        if np.any(arr >= self._up):
            raise ValueError("serialized element exceeds modulus")
        return arr
