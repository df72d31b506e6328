"""Folner tiling sequences: construction, verification, and the built-ins.

A tiling sequence is a sequence of finite letter sets F_k whose products
tile each other disjointly: with left orientation the tiles satisfy
T_{k+1} = T_k F_{k+1} (disjoint union over F_{k+1}); with right orientation
T_{k+1} = F_{k+1} T_k.  Every element of T_k factors uniquely into letters,
which is what :meth:`TilingSequence.decode` computes.

Letter sets are addressed by index so that product spaces over two tilings
with equal letter counts can be identified coordinate-wise; letters are
unranked on demand because some built-ins (lamplighter) have letter counts
that grow doubly exponentially.

Built-ins carry the claimed quantitative parameters (epsilon_k, R_k) so the
verifier can compare computed boundary ratios and diameters against them.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Sequence

from . import groups
from ._rng import randbelow
from .errors import NotInTile, ResourceExhausted, TilingViolation, UsageError

DEFAULT_TILE_BUDGET = 4_000_000


class Orientation(Enum):
    LEFT = "left"
    RIGHT = "right"


class TilingSequence:
    """Base class; subclasses provide letters, membership, and decoding."""

    group: groups.Group
    orientation: Orientation = Orientation.LEFT
    name: str = "?"

    # -- letters -----------------------------------------------------------

    def letter_count(self, k: int) -> int:
        raise NotImplementedError

    def letter(self, k: int, idx: int):
        """Unrank: the idx-th letter of F_k (0 <= idx < letter_count(k))."""
        raise NotImplementedError

    def letters(self, k: int, budget: int = DEFAULT_TILE_BUDGET) -> list:
        n = self.letter_count(k)
        if n > budget:
            raise ResourceExhausted(f"|F_{k}| = {n} exceeds budget {budget}")
        return [self.letter(k, i) for i in range(n)]

    # -- tiles -------------------------------------------------------------

    def tile_size(self, k: int) -> int:
        size = 1
        for i in range(k + 1):
            size *= self.letter_count(i)
        return size

    def contains(self, g, k: int) -> bool:
        """Membership in T_k, in closed form where the family allows it."""
        try:
            self.decode(g, k)
            return True
        except NotInTile:
            return False

    def decode(self, g, k: int) -> tuple[int, ...]:
        """Letter indices (i_0, ..., i_k) of the unique factorization of g.

        Left orientation: g = f_0 f_1 ... f_k; right: g = f_k ... f_1 f_0.
        Raises NotInTile when g in not in T_k.  Built-ins override this with
        digit extraction; the default falls back to a memo table built by
        materializing the tile, which only works within the budget.
        """
        memo = self._decode_memo(k)
        idxs = memo.get(g)
        if idxs is None:
            raise NotInTile(f"{g} not in T_{k} of {self.name}")
        return idxs

    def _decode_memo(self, k: int) -> dict:
        cache = getattr(self, "_memo_tables", None)
        if cache is None:
            cache = {}
            self._memo_tables = cache
        memo = cache.get(k)
        if memo is None:
            mul = self.group.multiply
            left = self.orientation is Orientation.LEFT
            memo = {f: (i,) for i, f in enumerate(self.letters(0))}
            for lvl in range(1, k + 1):
                prev, memo = memo, {}
                for j, f in enumerate(self.letters(lvl)):
                    for t, idxs in prev.items():
                        g = mul(t, f) if left else mul(f, t)
                        memo[g] = idxs + (j,)
            cache[k] = memo
        return memo

    def claimed_epsilon(self, k: int) -> Fraction | None:
        return None

    def claimed_radius(self, k: int) -> int | None:
        return None

    def escape_fraction(self, gamma, k: int) -> Fraction | None:
        """Exact |T_k \\ gamma^-1 T_k| / |T_k| (left; right uses T_k gamma)
        in closed form, or None when only enumeration will do."""
        return None

    # -- generic machinery ---------------------------------------------------

    def prefix_product(self, indices: Sequence[int]):
        """Product of the letters addressed by indices, in tile order."""
        g = None
        for k, idx in enumerate(indices):
            f = self.letter(k, idx)
            if g is None:
                g = f
            elif self.orientation is Orientation.LEFT:
                g = self.group.multiply(g, f)
            else:
                g = self.group.multiply(f, g)
        return self.group.identity if g is None else g

    def random_letter_index(self, k: int, seed: int, *counters: int) -> int:
        return randbelow(self.letter_count(k), seed, k, *counters)

    def build_tiles(self, K: int, budget: int = DEFAULT_TILE_BUDGET) -> list[list]:
        """Materialize T_0..T_K, proving disjointness by cardinality.

        The tiling condition |T_k| = prod |F_i| is checked level by level;
        on failure the first colliding pair of factorizations is reported.
        """
        if K < 0:
            raise UsageError("build_tiles needs K >= 0")
        if self.tile_size(K) > budget:
            raise ResourceExhausted(
                f"|T_{K}| = {self.tile_size(K)} exceeds budget {budget}"
            )
        mul = self.group.multiply
        left = self.orientation is Orientation.LEFT
        tiles = [list(self.letters(0, budget))]
        if len(set(tiles[0])) != self.letter_count(0):
            raise TilingViolation(0, _first_duplicate(tiles[0]))
        for k in range(1, K + 1):
            new = []
            seen: set = set()
            for f in self.letters(k, budget):
                for t in tiles[k - 1]:
                    g = mul(t, f) if left else mul(f, t)
                    new.append(g)
                    seen.add(g)
            if len(seen) != len(new):
                # disjointness failed; rebuild with provenance to find a witness
                prov: dict = {}
                for f in self.letters(k, budget):
                    for t in tiles[k - 1]:
                        g = mul(t, f) if left else mul(f, t)
                        if g in prov:
                            raise TilingViolation(k, (prov[g], (t, f), g))
                        prov[g] = (t, f)
            tiles.append(new)
        return tiles

    def folner_constant(
        self, k: int, tiles_k=None, budget: int = DEFAULT_TILE_BUDGET
    ) -> "FolnerReport":
        """max over generators s of the exact boundary ratio of T_k.

        Left orientation measures |T_k \\ s T_k| / |T_k|; right orientation
        measures |T_k \\ T_k s| / |T_k| (the convention the lamplighter
        construction is stated in).  Uses closed forms when the built-in
        provides them, enumeration otherwise.
        """
        per_gen = {}
        gens = self.group.generators
        closed = {s: self.escape_fraction(self.group.inverse(s), k) for s in gens}
        # |T \ sT| = #{t in T : s^-1 t not in T} = escape fraction of s^-1
        if all(v is not None for v in closed.values()):
            per_gen = {s: closed[s] for s in gens}
        else:
            if tiles_k is None:
                tiles_k = self.build_tiles(k, budget)[k]
            tile_set = set(tiles_k)
            size = len(tile_set)
            mul = self.group.multiply
            for s in gens:
                sinv = self.group.inverse(s)
                if self.orientation is Orientation.LEFT:
                    esc = sum(1 for t in tile_set if mul(sinv, t) not in tile_set)
                else:
                    esc = sum(1 for t in tile_set if mul(t, sinv) not in tile_set)
                per_gen[s] = Fraction(esc, size)
        value = max(per_gen.values())
        return FolnerReport(
            k=k,
            value=value,
            per_generator=per_gen,
            claimed=self.claimed_epsilon(k),
            orientation=self.orientation,
        )

    def tile_diameter(
        self,
        k: int,
        mode: str = "auto",
        samples: int = 100_000,
        seed: int = 0,
        budget: int = DEFAULT_TILE_BUDGET,
    ) -> "DiameterReport":
        """Diameter of T_k in the word metric: exact, or a sampled lower bound.

        Pairwise cost is quadratic, so "auto" samples once |T_k| > 1e5 and
        exact mode is an explicit opt-in for larger tiles.
        """
        if mode == "auto":
            cheap = getattr(self, "exact_diameter_cheap", False)
            mode = "exact" if cheap or self.tile_size(k) <= 100_000 else "sampled"
        if mode == "exact":
            value = self._exact_diameter(k, budget)
            return DiameterReport(k, value, False, self.claimed_radius(k))
        if mode != "sampled":
            raise UsageError(f"diameter mode must be auto|exact|sampled, got {mode!r}")
        best = 0
        mul, inv = self.group.multiply, self.group.inverse
        for i in range(samples):
            u = self.prefix_product(
                [self.random_letter_index(j, seed, 2 * i) for j in range(k + 1)]
            )
            v = self.prefix_product(
                [self.random_letter_index(j, seed, 2 * i + 1) for j in range(k + 1)]
            )
            d = self.group.word_length(mul(inv(u), v))
            if d > best:
                best = d
        return DiameterReport(k, best, True, self.claimed_radius(k))

    def _exact_diameter(self, k: int, budget: int) -> int:
        tile = self.build_tiles(k, budget)[k]
        mul, inv = self.group.multiply, self.group.inverse
        quotients = {mul(inv(u), v) for u in tile for v in tile}
        lengths = self.group.word_lengths_of(quotients)
        return max(lengths.values())


def _first_duplicate(items):
    seen = {}
    for i, x in enumerate(items):
        if x in seen:
            return (seen[x], i, x)
        seen[x] = i
    return None


@dataclass
class FolnerReport:
    k: int
    value: Fraction
    per_generator: dict
    claimed: Fraction | None
    orientation: Orientation

    @property
    def within_claim(self) -> bool | None:
        if self.claimed is None:
            return None
        return self.value <= self.claimed


@dataclass
class DiameterReport:
    k: int
    value: int
    lower_bound_only: bool
    claimed: int | None

    @property
    def within_claim(self) -> bool | None:
        if self.claimed is None:
            return None
        return self.value <= self.claimed


# ---------------------------------------------------------------------------
# built-ins
# ---------------------------------------------------------------------------


class ZnTiling(TilingSequence):
    """Z^n with F_k = {0, 2^k}^n; tiles are the boxes [0, 2^(k+1))^n.

    Exact parameters: epsilon_k = 2^-(k+1) (equality, not just a bound) and
    tile diameter n(2^(k+1) - 1) <= R_k = n 2^(k+1).
    """

    exact_diameter_cheap = True  # box diameter is a closed form

    def __init__(self, n: int):
        self.group = groups.ZN(n)
        self.n = n
        self.name = f"zn:{n}"

    def letter_count(self, k):
        return 1 << self.n

    def letter(self, k, idx):
        if not 0 <= idx < (1 << self.n):
            raise UsageError(f"letter index {idx} out of range for F_{k}")
        return tuple(((idx >> j) & 1) << k for j in range(self.n))

    def side(self, k):
        return 1 << (k + 1)

    def contains(self, g, k):
        L = self.side(k)
        return all(0 <= a < L for a in g)

    def decode(self, g, k):
        if not self.contains(g, k):
            raise NotInTile(f"{g} not in T_{k} of {self.name}")
        return tuple(
            sum(((a >> i) & 1) << j for j, a in enumerate(g)) for i in range(k + 1)
        )

    def claimed_epsilon(self, k):
        return Fraction(1, 1 << (k + 1))

    def claimed_radius(self, k):
        return self.n << (k + 1)

    def escape_fraction(self, gamma, k):
        # box translation: survivors form the shifted sub-box
        L = self.side(k)
        stay = 1
        for a in gamma:
            stay *= max(0, L - abs(a))
        return 1 - Fraction(stay, L**self.n)

    def _exact_diameter(self, k, budget):
        return self.n * (self.side(k) - 1)


class ZnGroupedTiling(TilingSequence):
    """Z^n with m levels grouped per step: F_k = (2^(mk) [0, 2^m))^n.

    Letter count 2^(nm) per level; epsilon_k = 2^-m(k+1) exactly.
    """

    exact_diameter_cheap = True

    def __init__(self, n: int, m: int):
        if m < 1:
            raise UsageError("grouping needs m >= 1")
        self.group = groups.ZN(n)
        self.n = n
        self.m = m
        self.name = f"zn:{n}:grouped:{m}"

    def letter_count(self, k):
        return 1 << (self.n * self.m)

    def letter(self, k, idx):
        if not 0 <= idx < self.letter_count(k):
            raise UsageError(f"letter index {idx} out of range")
        base = 1 << self.m
        out = []
        for _ in range(self.n):
            out.append((idx % base) << (self.m * k))
            idx //= base
        return tuple(out)

    def side(self, k):
        return 1 << (self.m * (k + 1))

    def contains(self, g, k):
        L = self.side(k)
        return all(0 <= a < L for a in g)

    def decode(self, g, k):
        if not self.contains(g, k):
            raise NotInTile(f"{g} not in T_{k} of {self.name}")
        base = 1 << self.m
        out = []
        for i in range(k + 1):
            idx = 0
            for j in reversed(range(self.n)):
                idx = idx * base + ((g[j] >> (self.m * i)) % base)
            out.append(idx)
        return tuple(out)

    def claimed_epsilon(self, k):
        return Fraction(1, 1 << (self.m * (k + 1)))

    def claimed_radius(self, k):
        return self.n << (self.m * (k + 1))

    def escape_fraction(self, gamma, k):
        L = self.side(k)
        stay = 1
        for a in gamma:
            stay *= max(0, L - abs(a))
        return 1 - Fraction(stay, L**self.n)

    def _exact_diameter(self, k, budget):
        return self.n * (self.side(k) - 1)


class HeisTiling(TilingSequence):
    """Heisenberg tiles: F_k = {(2^k x, 2^k y, 4^k z) : x,y in {0,1}, z in [0,4)}.

    |F_k| = 16, |T_k| = 2^(4k+4), claimed epsilon_k = 2^-k and
    R_k = 10 * 2^(k+2).  Membership and decoding invert the product identity

        x_A = sum 2^i x_i,  y_A = sum 2^i y_i,
        z_A = sum 4^i z_i + sum_i 2^i x_i (y_A mod 2^i),

    and the same identity gives an exact escape count by enumerating the
    (x_A, y_A) pair and counting admissible values of sum 4^i z_i, which
    stays polynomial in the tile SIDE rather than its size.
    """

    def __init__(self):
        self.group = groups.Heisenberg()
        self.name = "heis"

    def letter_count(self, k):
        return 16

    def letter(self, k, idx):
        if not 0 <= idx < 16:
            raise UsageError(f"letter index {idx} out of range")
        x = idx & 1
        y = (idx >> 1) & 1
        z = idx >> 2
        return (x << k, y << k, z << (2 * k))

    @staticmethod
    def _cross(x: int, y: int) -> int:
        # sum over set bits i >= 1 of x: 2^i * (y mod 2^i)
        total = 0
        i = 1
        while (x >> i) != 0:
            if (x >> i) & 1:
                total += (1 << i) * (y & ((1 << i) - 1))
            i += 1
        return total

    def contains(self, g, k):
        x, y, z = g
        L = 1 << (k + 1)
        if not (0 <= x < L and 0 <= y < L):
            return False
        w = z - self._cross(x, y)
        return 0 <= w < (1 << (2 * (k + 1)))

    def decode(self, g, k):
        if not self.contains(g, k):
            raise NotInTile(f"{g} not in T_{k} of heis")
        x, y, z = g
        w = z - self._cross(x, y)
        out = []
        for i in range(k + 1):
            xi = (x >> i) & 1
            yi = (y >> i) & 1
            zi = (w >> (2 * i)) & 3
            out.append(xi | (yi << 1) | (zi << 2))
        return tuple(out)

    def claimed_epsilon(self, k):
        return Fraction(1, 1 << k) if k >= 1 else Fraction(1)

    def claimed_radius(self, k):
        return 10 << (k + 2)

    def escape_fraction(self, gamma, k):
        p, q, r = gamma
        L = 1 << (k + 1)
        W = 1 << (2 * (k + 1))
        esc = 0
        for X in range(L):
            X2 = X + p
            if not 0 <= X2 < L:
                esc += L * W
                continue
            for Y in range(L):
                Y2 = Y + q
                if not 0 <= Y2 < L:
                    esc += W
                    continue
                # gamma * (X,Y,Z) = (X+p, Y+q, Z + r + q*X); Z = w + cross(X,Y)
                delta = r + q * X + self._cross(X, Y) - self._cross(X2, Y2)
                esc += min(W, abs(delta))
        return Fraction(esc, L * L * W)


class LamplighterTiling(TilingSequence):
    """Right tiling of Z/mZ wr Z, per the lamplighter construction.

    F_0 = {(f, n): supp f in {0,1}, n in {0,1}} and for k >= 1
    F_k = {(f, 0): supp f in [2^k, 2^(k+1))} u {(f, 2^k): supp f in [0, 2^k)};
    tiles are T_k = {(f, n): supp f in [0, 2^(k+1)), n in [0, 2^(k+1))} with
    T_{k+1} = F_{k+1} T_k.  Claimed epsilon_k = 2^-(k+1), R_k = (m+1) 2^(k+1).
    """

    orientation = Orientation.RIGHT

    def __init__(self, m: int):
        self.group = groups.Lamplighter(m)
        self.m = m
        self.name = f"ll:{m}"

    def letter_count(self, k):
        if k == 0:
            return 2 * self.m * self.m
        return 2 * self.m ** (1 << k)

    def letter(self, k, idx):
        if not 0 <= idx < self.letter_count(k):
            raise UsageError(f"letter index {idx} out of range")
        m = self.m
        if k == 0:
            n = idx // (m * m)
            rem = idx % (m * m)
            return self.group.make({0: rem // m, 1: rem % m}, n)
        width = 1 << k
        branch, rem = divmod(idx, m**width)
        start = width if branch == 0 else 0
        lamps = {}
        for j in range(width):
            rem, v = divmod(rem, m)
            if v:
                lamps[start + j] = v
        return self.group.make(lamps, 0 if branch == 0 else width)

    def contains(self, g, k):
        lamps, n = g
        L = 1 << (k + 1)
        return 0 <= n < L and all(0 <= p < L for p, _ in lamps)

    def decode(self, g, k):
        if not self.contains(g, k):
            raise NotInTile(f"{g} not in T_{k} of {self.name}")
        m = self.m
        out = []
        lamps = dict(g[0])
        n = g[1]
        for lvl in range(k, 0, -1):
            width = 1 << lvl
            rem = 0
            if n < width:
                # letter (h, 0) holds the top half; remainder keeps [0, width)
                branch = 0
                for j in reversed(range(width)):
                    rem = rem * m + lamps.pop(width + j, 0)
            else:
                # letter (h, width) holds [0, width); the remainder acted
                # from position width, so its lamps shift back down
                branch = 1
                n -= width
                for j in reversed(range(width)):
                    rem = rem * m + lamps.pop(j, 0)
                lamps = {p - width: v for p, v in lamps.items()}
            out.append(branch * m**width + rem)
        # level 0: remaining lamps sit in {0,1}, cursor n in {0,1}
        out.append(n * m * m + lamps.pop(0, 0) * m + lamps.pop(1, 0))
        if lamps:
            raise NotInTile(f"{g} not in T_{k} of {self.name}")
        return tuple(reversed(out))

    def claimed_epsilon(self, k):
        return Fraction(1, 1 << (k + 1))

    def claimed_radius(self, k):
        return (self.m + 1) << (k + 1)

    def escape_fraction(self, gamma, k):
        # right tiles: (f, n) escapes under right multiplication by gamma
        # iff the cursor leaves [0, 2^(k+1)) or a shifted lamp of gamma does
        lamps, j = gamma
        L = 1 << (k + 1)
        bad = 0
        for n in range(L):
            if not 0 <= n + j < L:
                bad += 1
            elif any(not 0 <= p + n < L for p, _ in lamps):
                bad += 1
        return Fraction(bad, L)


class ZBlocksTiling(TilingSequence):
    """Z tiled by intervals with prescribed letter counts.

    F_0 = [0, c_0) and F_k = |T_{k-1}| * [0, c_k), so T_k = [0, prod c_i).
    This is the workhorse for matching Z against another tiling with the
    same letter counts (the construction pairing Z with the lamplighter
    uses exactly these letters).
    """

    exact_diameter_cheap = True

    def __init__(self, sizes: Callable[[int], int] | Sequence[int], name: str = "zblocks"):
        self.group = groups.ZN(1)
        if callable(sizes):
            self._sizes = sizes
        else:
            sz = list(sizes)

            def _fn(k: int, _sz=sz) -> int:
                if k >= len(_sz):
                    raise UsageError(f"zblocks sizes given only up to k={len(_sz)-1}")
                return _sz[k]

            self._sizes = _fn
        self.name = name

    def letter_count(self, k):
        c = self._sizes(k)
        if c < 1:
            raise UsageError("letter counts must be >= 1")
        return c

    def letter(self, k, idx):
        if not 0 <= idx < self.letter_count(k):
            raise UsageError(f"letter index {idx} out of range")
        return (idx * (self.tile_size(k - 1) if k > 0 else 1),)

    def contains(self, g, k):
        return 0 <= g[0] < self.tile_size(k)

    def decode(self, g, k):
        if not self.contains(g, k):
            raise NotInTile(f"{g} not in T_{k} of {self.name}")
        v = g[0]
        out = []
        for i in range(k + 1):
            v, idx = divmod(v, self.letter_count(i))
            out.append(idx)
        return tuple(out)

    def claimed_epsilon(self, k):
        # stated bound for the Z-side matched tiling; computed value is 1/|T_k|
        return Fraction(2, self.tile_size(k))

    def claimed_radius(self, k):
        return self.tile_size(k) - 1

    def escape_fraction(self, gamma, k):
        L = self.tile_size(k)
        return 1 - Fraction(max(0, L - abs(gamma[0])), L)

    def _exact_diameter(self, k, budget):
        return self.tile_size(k) - 1


class FiniteCyclicTiling(TilingSequence):
    """Trivial tiling of Z/qZ: F_0 is the whole group, F_k = {0} after.

    Used as the lamp coupling in wreath products; epsilon_k = 0 for k >= 1.
    """

    def __init__(self, q: int):
        self.group = groups.CyclicGroup(q)
        self.q = q
        self.name = f"cyclic:{q}"

    def letter_count(self, k):
        return self.q if k == 0 else 1

    def letter(self, k, idx):
        if not 0 <= idx < self.letter_count(k):
            raise UsageError(f"letter index {idx} out of range")
        return idx if k == 0 else 0

    def contains(self, g, k):
        return 0 <= g < self.q

    def decode(self, g, k):
        if not self.contains(g, k):
            raise NotInTile(f"{g} not in Z/{self.q}Z")
        return (g,) + (0,) * k

    def claimed_epsilon(self, k):
        return Fraction(0) if k >= 1 else Fraction(1)

    def claimed_radius(self, k):
        return self.q // 2

    def escape_fraction(self, gamma, k):
        return Fraction(0)


def builtin(spec: str) -> TilingSequence:
    """Tiling from a CLI spec.

    Grammar: ``zn:N``, ``zn:N:grouped:M``, ``heis``, ``ll:M``,
    ``zmatch:ll:M`` (Z with letters matched to the lamplighter sizes),
    ``zblocks:c0,c1,...``, ``cyclic:Q``.
    """
    parts = spec.split(":")
    try:
        if parts[0] == "zn":
            if len(parts) == 2:
                return ZnTiling(int(parts[1]))
            if len(parts) == 4 and parts[2] == "grouped":
                return ZnGroupedTiling(int(parts[1]), int(parts[3]))
        elif parts[0] == "heis" and len(parts) == 1:
            return HeisTiling()
        elif parts[0] == "ll" and len(parts) == 2:
            return LamplighterTiling(int(parts[1]))
        elif parts[0] == "zmatch" and len(parts) == 3 and parts[1] == "ll":
            ll = LamplighterTiling(int(parts[2]))
            return ZBlocksTiling(ll.letter_count, name=f"zmatch:ll:{parts[2]}")
        elif parts[0] == "zblocks" and len(parts) == 2:
            sizes = [int(c) for c in parts[1].split(",")]
            return ZBlocksTiling(sizes, name=spec)
        elif parts[0] == "cyclic" and len(parts) == 2:
            return FiniteCyclicTiling(int(parts[1]))
    except ValueError:
        raise UsageError(f"bad tiling spec: {spec!r}") from None
    raise UsageError(f"unknown tiling spec: {spec!r}")
