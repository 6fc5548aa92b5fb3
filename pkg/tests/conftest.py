import numpy as np
import pytest

from pssnn.field import Field, FieldParams
from pssnn.offline import RandomnessStore
from pssnn.pss import PackingConfig
from pssnn.transport import PHASE_ONLINE, run_parties

# k must satisfy 2 <= k <= d = (n-1)/2, which excludes (5, 3)
VALID_GRID = [(5, 2), (7, 2), (7, 3), (11, 2), (11, 3)]


def make_cfg(n, k, ell=31, ellx=None):
    return PackingConfig(Field(FieldParams(ell, ellx)), n, k)


@pytest.fixture(params=VALID_GRID, ids=lambda nk: f"n{nk[0]}k{nk[1]}")
def cfg(request):
    n, k = request.param
    return make_cfg(n, k)


def run_protocol(cfg, fn, seed=0):
    """All parties run fn(rt, store) online with auto randomness stores.

    Returns (per-party results, online rounds on party 2,
    online elements sent+recvd on party 2)."""

    def party(rt):
        store = RandomnessStore(cfg, rt, auto=True)
        rt.set_phase(PHASE_ONLINE)
        out = fn(rt, store)
        st = rt.stats
        return out, st.rounds[PHASE_ONLINE], st.elements_sent(PHASE_ONLINE) + st.elements_recvd(
            PHASE_ONLINE
        )

    res = run_parties(cfg.n, party, seed=seed)
    return [r[0] for r in res], res[1][1], res[1][2]


def reconstruct_results(cfg, outputs, degree=None):
    """Stack per-party PackedShare results and reconstruct the (k, ...) secrets."""
    degree = cfg.d if degree is None else degree
    shape = np.atleast_1d(outputs[0].value).shape
    vals = np.stack([np.atleast_1d(o.value).ravel() for o in outputs])
    sec = cfg.reconstruct(vals, cfg.party_points, degree)
    return sec.reshape((cfg.k,) + shape)
