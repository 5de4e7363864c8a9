"""Exact exponential-time counting oracles.

Hamilton cycles are counted with a subset dynamic programme anchored at
vertex 0; 1-factors (equivalently, the permanent of the 0/1 adjacency
matrix) with Ryser's formula iterated in Gray-code order.  Everything is
exact: machine integers are used only where a counting bound proves they
cannot overflow, and big integers elsewhere.  Both counters refuse to run
above a configurable size cap.
"""
from __future__ import annotations

import math
from functools import reduce
from typing import Iterator, Optional

import numpy as np

from .digraph import Digraph
from .errors import DomainError, ResourceCapError

DEFAULT_CAP = 24

# Moduli for the Chinese-remainder path (n = 22..24): primes below 2^28 so a
# 23-term int64 dot product of reduced values cannot overflow.
_CRT_PRIMES = (268435399, 268435367, 268435361)


class OneFactor:
    """A spanning union of directed cycles, stored as the successor map.

    ``image[v]`` is the successor of v; the image is a permutation of the
    vertex set, so loops are fixed points and the cycles partition [0, n).
    """

    __slots__ = ("image", "_cycles")

    def __init__(self, image):
        img = tuple(int(x) for x in image)
        n = len(img)
        if sorted(img) != list(range(n)):
            raise DomainError("image is not a permutation of the vertex set")
        self.image = img
        self._cycles: Optional[tuple[tuple[int, ...], ...]] = None

    @property
    def n(self) -> int:
        return len(self.image)

    def cycles(self) -> tuple[tuple[int, ...], ...]:
        """Cycle decomposition; each cycle starts at its smallest vertex."""
        if self._cycles is None:
            seen = [False] * self.n
            out = []
            for start in range(self.n):
                if seen[start]:
                    continue
                cyc = []
                v = start
                while not seen[v]:
                    seen[v] = True
                    cyc.append(v)
                    v = self.image[v]
                out.append(tuple(cyc))
            self._cycles = tuple(out)
        return self._cycles

    @property
    def num_loops(self) -> int:
        return sum(1 for v, w in enumerate(self.image) if v == w)

    @property
    def num_cycles(self) -> int:
        return len(self.cycles())

    def edges(self) -> list[tuple[int, int]]:
        return [(v, w) for v, w in enumerate(self.image)]

    def is_subgraph_of(self, d: Digraph) -> bool:
        return all(d.has_edge(v, w) for v, w in enumerate(self.image))

    @classmethod
    def from_cycles(cls, n: int, cycles) -> "OneFactor":
        image = [-1] * n
        for cyc in cycles:
            for i, v in enumerate(cyc):
                image[v] = cyc[(i + 1) % len(cyc)]
        return cls(image)

    def __eq__(self, other) -> bool:
        return isinstance(other, OneFactor) and self.image == other.image

    def __hash__(self) -> int:
        return hash(self.image)

    def __repr__(self) -> str:
        return f"OneFactor({list(self.image)})"


def cycle_type(f: OneFactor) -> tuple[int, int]:
    """(number of loops, total number of cycles including loops)."""
    return f.num_loops, f.num_cycles


# -- Hamilton cycle counting ---------------------------------------------------


def count_hamilton_cycles(d: Digraph, cap: int = DEFAULT_CAP) -> int:
    """Number of directed Hamilton cycles, each counted once.

    The programme anchors at vertex 0 and counts directed closed tours, so a
    cycle is not re-counted per starting vertex.  Loops are ignored: a
    Hamilton cycle is a 1-factor with a single cycle and no loops (hence 0
    for n = 1).
    """
    n = d.n
    if n > cap:
        raise ResourceCapError(f"n={n} exceeds the Hamilton-cycle counting cap of {cap}")
    if n == 1:
        return 0
    adj = d.adjacency_matrix()
    np.fill_diagonal(adj, 0)
    if n <= 21:
        # Every dp entry counts paths on a vertex subset, so it is bounded by
        # (n-1)! <= 20! < 2^63: plain int64 arithmetic is exact here.
        return _count_hc_dp(adj, modulus=None)
    residues = [_count_hc_dp(adj, modulus=p) for p in _CRT_PRIMES]
    return _crt(residues, _CRT_PRIMES)


def _count_hc_dp(adj: np.ndarray, modulus: Optional[int]) -> int:
    n = adj.shape[0]
    full = 1 << (n - 1)
    a_inner = np.ascontiguousarray(adj[1:, 1:], dtype=np.int64)
    closing = np.ascontiguousarray(adj[1:, 0], dtype=np.int64)
    dtype = np.int64 if modulus is None else np.int32
    dp = np.zeros((full, n - 1), dtype=dtype)
    for w in range(1, n):
        if adj[0, w]:
            dp[1 << (w - 1), w - 1] = 1
    total = 0
    for mask in range(1, full):
        row = dp[mask]
        if not row.any():
            continue
        if mask == full - 1:
            total += int(np.dot(row.astype(np.int64), closing))
            continue
        contrib = np.dot(row.astype(np.int64), a_inner)
        if modulus is not None:
            contrib %= modulus
        rem = (full - 1) & ~mask
        while rem:
            bit = rem & (-rem)
            w = bit.bit_length() - 1
            c = contrib[w]
            if c:
                t = mask | bit
                if modulus is None:
                    dp[t, w] += c
                else:
                    dp[t, w] = (int(dp[t, w]) + int(c)) % modulus
            rem ^= bit
    return total if modulus is None else total % modulus


def _crt(residues, moduli) -> int:
    total_mod = reduce(lambda a, b: a * b, moduli)
    x = 0
    for r, p in zip(residues, moduli):
        q = total_mod // p
        x += r * q * pow(q, -1, p)
    return x % total_mod


# -- permanent / 1-factor counting ---------------------------------------------


def count_one_factors(d: Digraph, cap: int = DEFAULT_CAP) -> int:
    """Number of 1-factors: the permanent of the 0/1 adjacency matrix.

    Diagonal entries are the loops.  Ryser's inclusion-exclusion over column
    subsets, iterated in Gray-code order so each step updates the row-sum
    vector by a single column.
    """
    n = d.n
    if n > cap:
        raise ResourceCapError(f"n={n} exceeds the 1-factor counting cap of {cap}")
    adj = d.adjacency_matrix()
    return permanent(adj, cap=cap)


def permanent(matrix: np.ndarray, cap: int = DEFAULT_CAP) -> int:
    n = matrix.shape[0]
    if matrix.shape != (n, n):
        raise DomainError("permanent needs a square matrix")
    if n > cap:
        raise ResourceCapError(f"n={n} exceeds the permanent cap of {cap}")
    if n == 0:
        return 1
    if n <= 15:
        return _ryser_int64(matrix.astype(np.int64))
    return _ryser_bigint(matrix)


def _ryser_int64(m: np.ndarray) -> int:
    # 0/1 entries: each row sum is at most n, so the product is at most
    # n^n <= 15^15 < 2^63.  The signed accumulation happens in Python ints.
    n = m.shape[0]
    cols = [np.ascontiguousarray(m[:, j]) for j in range(n)]
    row_sums = np.zeros(n, dtype=np.int64)
    total = 0
    prev_gray = 0
    for k in range(1, 1 << n):
        gray = k ^ (k >> 1)
        j = (gray ^ prev_gray).bit_length() - 1
        if gray > prev_gray:
            row_sums += cols[j]
        else:
            row_sums -= cols[j]
        prev_gray = gray
        prod = int(np.prod(row_sums))
        if prod:
            total += -prod if (bin(gray).count("1") & 1) else prod
    return total if n % 2 == 0 else -total


def _ryser_bigint(m: np.ndarray) -> int:
    n = m.shape[0]
    cols = [[int(m[i, j]) for i in range(n)] for j in range(n)]
    row_sums = [0] * n
    total = 0
    prev_gray = 0
    for k in range(1, 1 << n):
        gray = k ^ (k >> 1)
        j = (gray ^ prev_gray).bit_length() - 1
        col = cols[j]
        if gray > prev_gray:
            for i in range(n):
                row_sums[i] += col[i]
        else:
            for i in range(n):
                row_sums[i] -= col[i]
        prev_gray = gray
        prod = math.prod(row_sums)
        if prod:
            total += -prod if (bin(gray).count("1") & 1) else prod
    return total if n % 2 == 0 else -total


# -- enumeration ----------------------------------------------------------------


class FactorEnumeration:
    """Result of a (possibly truncated) 1-factor enumeration."""

    def __init__(self, factors: list[OneFactor], truncated: bool):
        self.factors = factors
        self.truncated = truncated

    def __iter__(self) -> Iterator[OneFactor]:
        return iter(self.factors)

    def __len__(self) -> int:
        return len(self.factors)


def enumerate_one_factors(d: Digraph, limit: int) -> FactorEnumeration:
    """Distinct 1-factors in lexicographic order of the successor map.

    Collects at most ``limit`` factors; the result records whether the
    enumeration was cut short (detected by probing for one factor beyond).
    """
    if limit < 0:
        raise DomainError("limit must be non-negative")
    n = d.n
    out_sorted = [d.out_neighbors(v) for v in range(n)]
    target = limit + 1
    factors: list[OneFactor] = []
    image = [-1] * n
    used = [False] * n

    def backtrack(v: int) -> bool:
        if v == n:
            factors.append(OneFactor(image))
            return len(factors) >= target
        for w in out_sorted[v]:
            if not used[w]:
                image[v] = w
                used[w] = True
                done = backtrack(v + 1)
                used[w] = False
                image[v] = -1
                if done:
                    return True
        return False

    backtrack(0)
    truncated = len(factors) > limit
    return FactorEnumeration(factors[:limit], truncated)


# -- permutation fixed-point counts ----------------------------------------------


def derangements(m: int) -> int:
    """Permutations of m elements with no fixed point."""
    if m < 0:
        raise DomainError("negative size")
    a, b = 1, 0  # D(0), D(1)
    if m == 0:
        return a
    for k in range(2, m + 1):
        a, b = b, (k - 1) * (a + b)
    return b

def rencontres(n: int, k: int) -> int:
    """Permutations of n elements with exactly k fixed points."""
    if k < 0 or n < 0:
        raise DomainError("negative arguments")
    if k > n:
        raise DomainError(f"cannot have {k} fixed points among {n} elements")
    return math.comb(n, k) * derangements(n - k)
