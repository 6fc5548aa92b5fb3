"""Packed and standard Shamir secret sharing over a Mersenne prime field.

A degree-d packed sharing of k secrets is a degree-d polynomial f with
f(s_i) = x_i at public secret positions s_0..s_{k-1}; party j holds f(j).
Share values here are numpy uint64 arrays so one PackedShare object can carry
a whole batch of independent sharings at the same degree.
"""

from dataclasses import dataclass

import numpy as np

from .field import Field


class PssError(Exception):
    pass


class DegreeOutOfRange(PssError):
    pass


class TooFewShares(PssError):
    pass


class InconsistentDegree(PssError):
    pass


class DegreeMismatch(PssError):
    pass


class DegreeOverflow(PssError):
    pass


class PositionMismatch(PssError):
    pass


@dataclass
class PackedShare:
    """One party's share of a batch of packed sharings at a common degree."""

    owner: int
    value: np.ndarray
    degree: int


@dataclass
class ShamirShareAt:
    """One party's Shamir share with the secret stored at `position`."""

    owner: int
    value: np.ndarray
    degree: int
    position: int


class PackingConfig:
    """Parameters of a packed sharing scheme: n = 2d+1 parties, k secrets.

    Secret positions are s_0 = 0 and s_i = p - i for i >= 1, disjoint from
    the party evaluation points 1..n.  Lagrange/interpolation matrices are
    computed once and cached; the config is immutable after construction.
    """

    def __init__(self, field: Field, n: int, k: int):
        if n < 5 or n % 2 == 0:
            raise ValueError(f"n must be odd and >= 5, got {n}")
        d = (n - 1) // 2
        if not 2 <= k <= d:
            raise ValueError(f"k must satisfy 2 <= k <= d={d}, got {k}")
        self.field = field
        self.n = n
        self.d = d
        self.k = k
        self.t = d - k + 1
        p = field.p
        if n >= p - k:
            raise ValueError("field too small for this party count")
        self.party_points = list(range(1, n + 1))
        self.secret_positions = [0] + [p - i for i in range(1, k)]
        self.convert_position = p - k  # first free position beyond s_{k-1}
        self._interp_cache: dict = {}
        self._factor_cache: dict = {}
        # public degree-(k-1) polynomials through (s_j, delta_ij), evaluated
        # at the party points: column i is the sharing of unit vector E_i
        self.unit_shares = self.interp_matrix(
            tuple(self.secret_positions), tuple(self.party_points)
        )

    # -- interpolation machinery --------------------------------------------

    def interp_matrix(self, xs: tuple, targets: tuple) -> np.ndarray:
        """Matrix M with (M @ values_at_xs) = values at `targets`."""
        key = (xs, targets)
        cached = self._interp_cache.get(key)
        if cached is not None:
            return cached
        p = self.field.p
        m = np.empty((len(targets), len(xs)), dtype=np.uint64)
        for jj, xj in enumerate(xs):
            denom = 1
            for xm in xs:
                if xm != xj:
                    denom = denom * (xj - xm) % p
            denom_inv = pow(denom, p - 2, p)
            for tt, tx in enumerate(targets):
                num = 1
                for xm in xs:
                    if xm != xj:
                        num = num * (tx - xm) % p
                m[tt, jj] = num * denom_inv % p
        self._interp_cache[key] = m
        return m

    def vandermonde_t(self) -> np.ndarray:
        """Van(n, n-t)^T with evaluation points 1..n, for randomness extraction."""
        p = self.field.p
        w = self.n - self.t
        v = np.empty((w, self.n), dtype=np.uint64)
        for i in range(self.n):
            acc = 1
            for j in range(w):
                v[j, i] = acc
                acc = acc * (i + 1) % p
        return v

    # -- sharing and reconstruction (dealer/test side) -----------------------

    def share(self, secrets: np.ndarray, degree: int, rng: np.random.Generator) -> np.ndarray:
        """Share a (k, m) secrets array at `degree`; returns (n, m) share values.

        The polynomial is pinned at the secret positions and at degree+1-k
        auxiliary party points carrying fresh uniform values.
        """
        secrets = np.atleast_2d(np.asarray(secrets, dtype=np.uint64))
        if secrets.shape[0] != self.k:
            raise ValueError(f"expected {self.k} secret rows, got {secrets.shape[0]}")
        if not self.k - 1 <= degree <= self.n - 1:
            raise DegreeOutOfRange(f"degree {degree} not in [{self.k - 1}, {self.n - 1}]")
        n_aux = degree + 1 - self.k
        aux = self.field.random(rng, (n_aux, secrets.shape[1]))
        xs = tuple(self.secret_positions) + tuple(self.party_points[:n_aux])
        m = self.interp_matrix(xs, tuple(self.party_points))
        return self.field.matmul(m, np.concatenate([secrets, aux], axis=0))

    def share_at(
        self, values: np.ndarray, position: int, degree: int, rng: np.random.Generator
    ) -> np.ndarray:
        """Shamir-share a (m,) vector at `position` with `degree`; returns (n, m)."""
        values = np.atleast_1d(np.asarray(values, dtype=np.uint64))
        if not 0 <= degree <= self.n - 1:
            raise DegreeOutOfRange(f"degree {degree} not in [0, {self.n - 1}]")
        aux = self.field.random(rng, (degree, values.shape[0]))
        xs = (position,) + tuple(self.party_points[:degree])
        m = self.interp_matrix(xs, tuple(self.party_points))
        return self.field.matmul(m, np.concatenate([values[None, :], aux], axis=0))

    def reconstruct(
        self,
        values: np.ndarray,
        owners,
        degree: int,
        positions=None,
        check: bool = True,
    ) -> np.ndarray:
        """Interpolate share values back to the secrets.

        `values` is (len(owners), m); returns (len(positions), m) with
        positions defaulting to the secret positions.  When more than
        degree+1 shares are supplied and `check` is set, the surplus shares
        are verified against the interpolated polynomial.
        """
        values = np.atleast_2d(np.asarray(values, dtype=np.uint64))
        owners = list(owners)
        if positions is None:
            positions = self.secret_positions
        if len(owners) < degree + 1:
            raise TooFewShares(f"need {degree + 1} shares, got {len(owners)}")
        base = tuple(owners[: degree + 1])
        m = self.interp_matrix(base, tuple(positions))
        secrets = self.field.matmul(m, values[: degree + 1])
        if check and len(owners) > degree + 1:
            extra = tuple(owners[degree + 1 :])
            mver = self.interp_matrix(base, extra)
            predicted = self.field.matmul(mver, values[: degree + 1])
            if not np.array_equal(predicted, values[degree + 1 :]):
                raise InconsistentDegree(f"shares are not on a degree-{degree} polynomial")
        return secrets

    def share_packed(self, secrets, degree, rng) -> list:
        """Like share() but returns per-party PackedShare objects."""
        grid = self.share(secrets, degree, rng)
        return [PackedShare(i + 1, grid[i], degree) for i in range(self.n)]

    def reconstruct_packed(self, shares, check: bool = True) -> np.ndarray:
        shares = list(shares)
        degree = shares[0].degree
        if any(s.degree != degree for s in shares):
            raise DegreeMismatch("mixed degrees in reconstruction")
        values = np.stack([np.atleast_1d(s.value) for s in shares])
        return self.reconstruct(values, [s.owner for s in shares], degree, check=check)

    def reconstruct_shamir(self, shares, check: bool = True) -> np.ndarray:
        shares = list(shares)
        degree = shares[0].degree
        position = shares[0].position
        values = np.stack([np.atleast_1d(s.value) for s in shares])
        return self.reconstruct(
            values, [s.owner for s in shares], degree, positions=[position], check=check
        )[0]

    # -- local share algebra (party side) ------------------------------------

    def local_linear(self, shares, coeffs, public_offset=0) -> PackedShare:
        """Sum of c_i * share_i plus a public constant added to every slot."""
        shares = list(shares)
        owner = shares[0].owner
        degree = shares[0].degree
        if any(s.owner != owner or s.degree != degree for s in shares):
            raise DegreeMismatch("operands must share owner and degree")
        f = self.field
        acc = np.zeros_like(np.atleast_1d(shares[0].value))
        for s, c in zip(shares, coeffs):
            acc = f.add(acc, f.mul(s.value, np.uint64(c % f.p)))
        if public_offset:
            acc = f.add(acc, np.uint64(public_offset % f.p))
        return PackedShare(owner, acc, degree)

    def eval_public_vec(self, owner: int, public_vec) -> np.ndarray:
        """Party `owner`'s value of the degree-(k-1) polynomial through
        (s_i, public_vec[i])."""
        vec = np.asarray(public_vec, dtype=np.uint64).reshape(self.k, -1)
        return self.field.matmul(self.unit_shares[owner - 1 : owner], vec)[0]

    def mul_public_vec(self, share: PackedShare, public_vec) -> PackedShare:
        """Coordinate-wise product with a public length-k vector; degree +k-1."""
        if share.degree > self.n - self.k:
            raise DegreeOverflow(
                f"degree {share.degree} > n-k = {self.n - self.k}"
            )
        factor = self.eval_public_vec(share.owner, public_vec)
        value = self.field.mul(share.value, factor)
        return PackedShare(share.owner, value, share.degree + self.k - 1)

    def combine_shamir_to_packed(self, shares) -> PackedShare:
        """Sum of E_i-evaluations times Shamir shares at s_0..s_{k-1}."""
        shares = list(shares)
        if [s.position for s in shares] != self.secret_positions:
            raise PositionMismatch("inputs must sit at the secret positions, in order")
        owner = shares[0].owner
        degree = shares[0].degree
        f = self.field
        acc = np.zeros_like(np.atleast_1d(shares[0].value))
        for i, s in enumerate(shares):
            acc = f.add(acc, f.mul(s.value, self.unit_shares[owner - 1, i]))
        return PackedShare(owner, acc, degree + self.k - 1)

    def select_from_packed(self, shares) -> PackedShare:
        """Diagonal selection: output packs (x^0_0, x^1_1, ..., x^{k-1}_{k-1})."""
        shares = list(shares)
        degree = shares[0].degree
        if degree > self.n - self.k:
            raise DegreeOverflow(f"degree {degree} > n-k = {self.n - self.k}")
        owner = shares[0].owner
        f = self.field
        acc = np.zeros_like(np.atleast_1d(shares[0].value))
        for i, s in enumerate(shares):
            acc = f.add(acc, f.mul(s.value, self.unit_shares[owner - 1, i]))
        return PackedShare(owner, acc, degree + self.k - 1)

    def convert_factors(self, target_position: int) -> np.ndarray:
        """Per-(party, slot) rescaling factors for the local share conversion.

        factor[i-1, v] = prod_{j != i} (s_v - j) / (b - j); multiplying party
        i's share by it turns slot v into a degree-2d Shamir share at b.
        """
        key = target_position
        cached = self._factor_cache.get(key)
        if cached is not None:
            return cached
        p = self.field.p
        out = np.empty((self.n, self.k), dtype=np.uint64)
        for i in self.party_points:
            num = [1] * self.k
            den = 1
            for j in self.party_points:
                if j == i:
                    continue
                den = den * (target_position - j) % p
                for v, sv in enumerate(self.secret_positions):
                    num[v] = num[v] * (sv - j) % p
            den_inv = pow(den, p - 2, p)
            for v in range(self.k):
                out[i - 1, v] = num[v] * den_inv % p
        self._factor_cache[key] = out
        return out

    def sh_convert(self, share: PackedShare, target_position: int = None) -> list:
        """Locally convert a degree-d packed share into k degree-2d Shamir
        shares of its slots at `target_position` (no communication)."""
        if target_position is None:
            target_position = self.convert_position
        factors = self.convert_factors(target_position)[share.owner - 1]
        out = []
        for v in range(self.k):
            value = self.field.mul(share.value, factors[v])
            out.append(ShamirShareAt(share.owner, value, 2 * self.d, target_position))
        return out
