"""Packed/Shamir sharing: roundtrips, error paths, privacy, local conversion."""

import numpy as np
import pytest
from scipy.stats import chisquare

from pssnn.field import Field, FieldParams
from pssnn.pss import (
    PackingConfig,
    PackedShare,
    DegreeOutOfRange,
    TooFewShares,
    InconsistentDegree,
    DegreeOverflow,
    PositionMismatch,
)
from conftest import VALID_GRID, make_cfg


def test_grid_validation():
    f = Field(FieldParams(31))
    with pytest.raises(ValueError):
        PackingConfig(f, 5, 3)  # k exceeds d = 2
    with pytest.raises(ValueError):
        PackingConfig(f, 6, 2)  # even n
    with pytest.raises(ValueError):
        PackingConfig(f, 5, 1)  # k < 2
    for n, k in VALID_GRID:
        cfg = PackingConfig(f, n, k)
        assert cfg.t == cfg.d - k + 1 >= 1


def test_share_reconstruct_roundtrip(cfg):
    rng = np.random.default_rng(0)
    f = cfg.field
    secrets = f.random(rng, (cfg.k, 33))
    for degree in (cfg.k - 1, cfg.d, 2 * cfg.d):
        grid = cfg.share(secrets, degree, rng)
        got = cfg.reconstruct(grid, cfg.party_points, degree)
        assert np.array_equal(got, secrets)
        # any degree+1 subset suffices
        idx = rng.permutation(cfg.n)[: degree + 1]
        got2 = cfg.reconstruct(grid[idx], [cfg.party_points[i] for i in idx], degree)
        assert np.array_equal(got2, secrets)


def test_shamir_roundtrip(cfg):
    rng = np.random.default_rng(1)
    vals = cfg.field.random(rng, 17)
    for pos in cfg.secret_positions + [cfg.convert_position]:
        grid = cfg.share_at(vals, pos, cfg.d, rng)
        got = cfg.reconstruct(grid, cfg.party_points, cfg.d, positions=[pos])
        assert np.array_equal(got[0], vals)


def test_reconstruct_errors(cfg):
    rng = np.random.default_rng(2)
    secrets = cfg.field.random(rng, (cfg.k, 3))
    grid = cfg.share(secrets, cfg.d, rng)
    with pytest.raises(TooFewShares):
        cfg.reconstruct(grid[: cfg.d], cfg.party_points[: cfg.d], cfg.d)
    bad = grid.copy()
    bad[-1, 0] = cfg.field.add(bad[-1, 0], np.uint64(1))
    with pytest.raises(InconsistentDegree):
        cfg.reconstruct(bad, cfg.party_points, cfg.d)
    with pytest.raises(DegreeOutOfRange):
        cfg.share(secrets, cfg.n, rng)
    with pytest.raises(DegreeOutOfRange):
        cfg.share(secrets, cfg.k - 2, rng)


def test_local_linear(cfg):
    rng = np.random.default_rng(3)
    f = cfg.field
    x = f.random(rng, (cfg.k, 5))
    y = f.random(rng, (cfg.k, 5))
    gx, gy = cfg.share(x, cfg.d, rng), cfg.share(y, cfg.d, rng)
    outs = []
    for pid in cfg.party_points:
        outs.append(
            cfg.local_linear(
                [PackedShare(pid, gx[pid - 1], cfg.d), PackedShare(pid, gy[pid - 1], cfg.d)],
                [3, 5],
                public_offset=7,
            )
        )
    got = cfg.reconstruct_packed(outs)
    want = f.add(f.add(f.mul(x, np.uint64(3)), f.mul(y, np.uint64(5))), np.uint64(7))
    assert np.array_equal(got, want)


def test_mul_public_vec(cfg):
    rng = np.random.default_rng(4)
    f = cfg.field
    x = f.random(rng, (cfg.k, 4))
    c = f.random(rng, (cfg.k, 4))
    grid = cfg.share(x, cfg.d, rng)
    outs = [cfg.mul_public_vec(PackedShare(pid, grid[pid - 1], cfg.d), c) for pid in cfg.party_points]
    assert outs[0].degree == cfg.d + cfg.k - 1
    got = cfg.reconstruct_packed(outs)
    assert np.array_equal(got, f.mul(x, c))
    with pytest.raises(DegreeOverflow):
        cfg.mul_public_vec(PackedShare(1, grid[0], cfg.n - cfg.k + 1), c)


def test_sh_convert_theorem(cfg):
    """Local conversion of 100 random packed sharings: the rescaled shares
    interpolate at the target position to each slot's value, at degree 2d."""
    rng = np.random.default_rng(5)
    f = cfg.field
    secrets = f.random(rng, (cfg.k, 100))
    grid = cfg.share(secrets, cfg.d, rng)
    per_party = [cfg.sh_convert(PackedShare(pid, grid[pid - 1], cfg.d)) for pid in cfg.party_points]
    for v in range(cfg.k):
        vals = np.stack([per_party[i][v].value for i in range(cfg.n)])
        got = cfg.reconstruct(
            vals, cfg.party_points, 2 * cfg.d, positions=[cfg.convert_position], check=False
        )[0]
        assert np.array_equal(got, secrets[v])


def test_sh_convert_custom_position(cfg):
    rng = np.random.default_rng(6)
    secrets = cfg.field.random(rng, (cfg.k, 10))
    grid = cfg.share(secrets, cfg.d, rng)
    pos = cfg.secret_positions[1]
    per_party = [
        cfg.sh_convert(PackedShare(pid, grid[pid - 1], cfg.d), pos) for pid in cfg.party_points
    ]
    vals = np.stack([per_party[i][0].value for i in range(cfg.n)])
    got = cfg.reconstruct(vals, cfg.party_points, 2 * cfg.d, positions=[pos], check=False)[0]
    assert np.array_equal(got, secrets[0])


def test_combine_and_select(cfg):
    rng = np.random.default_rng(7)
    f = cfg.field
    vals = [f.random(rng, 6) for _ in range(cfg.k)]
    grids = [cfg.share_at(vals[i], cfg.secret_positions[i], cfg.d, rng) for i in range(cfg.k)]
    from pssnn.pss import ShamirShareAt

    outs = []
    for pid in cfg.party_points:
        shares = [
            ShamirShareAt(pid, grids[i][pid - 1], cfg.d, cfg.secret_positions[i])
            for i in range(cfg.k)
        ]
        outs.append(cfg.combine_shamir_to_packed(shares))
    got = cfg.reconstruct_packed(outs)
    assert np.array_equal(got, np.stack(vals))
    with pytest.raises(PositionMismatch):
        cfg.combine_shamir_to_packed(
            [ShamirShareAt(1, grids[i][0], cfg.d, 12345 + i) for i in range(cfg.k)]
        )


def test_select_from_packed(cfg):
    rng = np.random.default_rng(8)
    f = cfg.field
    xs = [f.random(rng, (cfg.k, 4)) for _ in range(cfg.k)]
    grids = [cfg.share(x, cfg.d, rng) for x in xs]
    outs = []
    for pid in cfg.party_points:
        outs.append(
            cfg.select_from_packed(
                [PackedShare(pid, grids[i][pid - 1], cfg.d) for i in range(cfg.k)]
            )
        )
    got = cfg.reconstruct_packed(outs)
    want = np.stack([xs[i][i] for i in range(cfg.k)])
    assert np.array_equal(got, want)


@pytest.mark.parametrize("n,k", [(5, 2), (7, 2), (7, 3), (11, 3)])
def test_privacy_chi_square(n, k):
    """Any t = d-k+1 parties' shares of a fixed secret look uniform: a
    chi-square test on binned share values must not reject uniformity."""
    cfg = make_cfg(n, k, ell=13)
    rng = np.random.default_rng(9)
    secrets = np.tile(
        cfg.field.random(rng, (cfg.k, 1)), (1, 30000)
    )  # same secret every time
    grid = cfg.share(secrets, cfg.d, rng)
    bins = 64
    scale = -(-cfg.field.p // bins)
    for pid in range(1, min(cfg.t, 2) + 1):
        counts = np.bincount((grid[pid - 1] // np.uint64(scale)).astype(int), minlength=bins)
        _, pvalue = chisquare(counts)
        assert pvalue > 1e-3, f"party {pid} share distribution rejected uniformity"
    if cfg.t >= 2:
        # joint distribution of two parties, coarse 8x8 binning
        coarse = -(-cfg.field.p // 8)
        joint = (grid[0] // np.uint64(coarse)) * np.uint64(8) + grid[1] // np.uint64(coarse)
        counts = np.bincount(joint.astype(int), minlength=64)
        _, pvalue = chisquare(counts)
        assert pvalue > 1e-3


def test_privacy_two_secrets_indistinguishable():
    """Share-value histograms for two different secrets agree (chi-square
    two-sample) at ell=13."""
    cfg = make_cfg(7, 3, ell=13)
    rng = np.random.default_rng(10)
    m = 30000
    g1 = cfg.share(np.zeros((cfg.k, m), dtype=np.uint64), cfg.d, rng)
    g2 = cfg.share(np.full((cfg.k, m), 1234, dtype=np.uint64), cfg.d, rng)
    scale = -(-cfg.field.p // 64)
    c1 = np.bincount((g1[0] // np.uint64(scale)).astype(int), minlength=64).astype(float)
    c2 = np.bincount((g2[0] // np.uint64(scale)).astype(int), minlength=64).astype(float)
    # two-sample chi-square statistic, dof = bins - 1
    stat = float((((c1 - c2) ** 2) / (c1 + c2)).sum())
    from scipy.stats import chi2

    assert chi2.sf(stat, 63) > 1e-3
