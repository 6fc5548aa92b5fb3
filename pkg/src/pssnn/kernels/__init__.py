"""Hot arithmetic kernels over Mersenne prime fields.

Two interchangeable implementations exist: a numba-jitted one (`_nb`) and a
pure-numpy one (`_np`).  The active backend is chosen at import time from the
``PSSNN_KERNELS`` environment variable ("numba" or "numpy"); the default is
numba when importable, numpy otherwise.

All kernels operate on canonical residues stored as uint64 and never form a
full double-width product: multiplication splits operands into half-words and
folds with the Mersenne identity 2^ell = 1 (mod p).
"""

import os

from . import _np as numpy_impl

_IMPLS = {"numpy": numpy_impl}

try:
    from . import _nb as numba_impl

    _IMPLS["numba"] = numba_impl
except ImportError:  # numba not installed
    numba_impl = None

_requested = os.environ.get("PSSNN_KERNELS", "").strip().lower()
if _requested:
    if _requested not in _IMPLS:
        raise RuntimeError(
            f"PSSNN_KERNELS={_requested!r} not available; "
            f"choose from {sorted(_IMPLS)}"
        )
    _active_name = _requested
else:
    _active_name = "numba" if "numba" in _IMPLS else "numpy"

_active = _IMPLS[_active_name]

mul_mod = _active.mul_mod
matmul_mod = _active.matmul_mod


def backend_name() -> str:
    """Name of the kernel backend selected at import time."""
    return _active_name


def available_backends() -> list:
    return sorted(_IMPLS)


def get_impl(name: str):
    """Fetch a specific backend module (for benchmarks/tests)."""
    return _IMPLS[name]
