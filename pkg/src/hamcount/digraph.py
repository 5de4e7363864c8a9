"""Core digraph representation, random models, the edge process, and hitting times.

Vertices are 0-indexed.  A digraph either allows loops (all n^2 ordered pairs
admissible) or not (n(n-1) pairs).  The random edge *process* is a uniformly
random ordering of the admissible pairs; prefixes of it realise the uniform
m-edge model.  A loopful process can be coupled with a loopless one by
deleting loops while preserving relative order, so that for every m the
non-loop edges of the loopful prefix are contained in the loopless prefix.

Loop degree convention: a loop contributes 1 to both the in- and the
out-degree of its vertex.
"""
from __future__ import annotations

import math
import threading
from typing import IO, Iterable, Iterator, Optional, Sequence

import numpy as np

from .errors import DomainError, FormatError
from .rng import make_generator

# Universes at most this size are materialised with one Fisher-Yates shuffle;
# larger ones are sampled lazily without replacement in fixed-size blocks so
# that hitting-time runs at n = 10^4 never touch all ~10^8 pairs.
_FULL_SHUFFLE_MAX = 1 << 22
_DRAW_BLOCK = 1 << 16


class Digraph:
    """Immutable directed graph on vertex set {0, ..., n-1}."""

    __slots__ = ("n", "allow_loops", "_edges", "_out", "_in")

    def __init__(self, n: int, edges: Iterable[tuple[int, int]] = (), allow_loops: bool = False):
        if n <= 0:
            raise DomainError(f"vertex count must be positive, got {n}")
        self.n = int(n)
        self.allow_loops = bool(allow_loops)
        edge_list = [(int(u), int(v)) for u, v in edges]
        edge_set = frozenset(edge_list)
        if len(edge_set) != len(edge_list):
            raise DomainError("duplicate edges in input")
        out_adj: list[list[int]] = [[] for _ in range(self.n)]
        in_adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in edge_set:
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise DomainError(f"edge ({u},{v}) out of range for n={self.n}")
            if u == v and not self.allow_loops:
                raise DomainError(f"loop ({u},{u}) in a loopless digraph")
            out_adj[u].append(v)
            in_adj[v].append(u)
        self._edges = edge_set
        self._out = tuple(tuple(sorted(a)) for a in out_adj)
        self._in = tuple(tuple(sorted(a)) for a in in_adj)

    # -- queries ------------------------------------------------------------

    @property
    def edge_count(self) -> int:
        return len(self._edges)

    def edges(self) -> list[tuple[int, int]]:
        """Edges in sorted order (deterministic iteration)."""
        return sorted(self._edges)

    def edge_set(self) -> frozenset[tuple[int, int]]:
        return self._edges

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self._edges

    def out_neighbors(self, v: int) -> tuple[int, ...]:
        return self._out[v]

    def in_neighbors(self, v: int) -> tuple[int, ...]:
        return self._in[v]

    def out_degree(self, v: int) -> int:
        return len(self._out[v])

    def in_degree(self, v: int) -> int:
        return len(self._in[v])

    def degrees(self) -> tuple[np.ndarray, np.ndarray]:
        """(out-degree array, in-degree array)."""
        outd = np.fromiter((len(a) for a in self._out), dtype=np.int64, count=self.n)
        ind = np.fromiter((len(a) for a in self._in), dtype=np.int64, count=self.n)
        return outd, ind

    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.int64)
        for u, v in self._edges:
            a[u, v] = 1
        return a

    def audit(self) -> bool:
        """Verify adjacency indices against the edge set; raises on corruption."""
        rebuilt = {(u, v) for u in range(self.n) for v in self._out[u]}
        rebuilt_in = {(u, v) for v in range(self.n) for u in self._in[v]}
        if rebuilt != self._edges or rebuilt_in != self._edges:
            raise AssertionError("adjacency indices inconsistent with edge set")
        return True

    def with_edges(self, extra: Iterable[tuple[int, int]], allow_loops: Optional[bool] = None) -> "Digraph":
        """New digraph with ``extra`` unioned in."""
        loops = self.allow_loops if allow_loops is None else allow_loops
        return Digraph(self.n, set(self._edges) | set(extra), allow_loops=loops)

    @classmethod
    def complete(cls, n: int, allow_loops: bool = False) -> "Digraph":
        pairs = [(u, v) for u in range(n) for v in range(n) if allow_loops or u != v]
        return cls(n, pairs, allow_loops=allow_loops)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Digraph)
            and self.n == other.n
            and self.allow_loops == other.allow_loops
            and self._edges == other._edges
        )

    def __hash__(self) -> int:
        return hash((self.n, self.allow_loops, self._edges))

    def __repr__(self) -> str:
        return f"Digraph(n={self.n}, edges={self.edge_count}, loops={self.allow_loops})"


# -- pair <-> code translation ----------------------------------------------
# Internally every ordered pair (u, v) is the code u*n + v.  A loopless draw
# uses the compact index q in [0, n(n-1)) and skips the diagonal on decode.


def _codes_to_pairs(codes: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    return codes // n, codes % n


def _loopless_index_to_code(q: np.ndarray, n: int) -> np.ndarray:
    u = q // (n - 1)
    r = q % (n - 1)
    v = r + (r >= u)
    return u * n + v


class EdgeSequence:
    """A uniformly random ordering of all admissible ordered pairs.

    ``prefix(m)`` realises the uniform m-edge digraph.  The full order is a
    permutation of the pair universe; for large universes only the prefix
    actually requested is materialised (uniformity is preserved: the distinct
    values of an i.i.d. uniform stream, in order of first appearance, form a
    uniform permutation prefix).  Materialisation is internally locked, so a
    constructed sequence may be shared across threads.
    """

    def __init__(self, n: int, loopful: bool, *, _codes: Optional[np.ndarray] = None,
                 _rng: Optional[np.random.Generator] = None,
                 _parent: Optional["EdgeSequence"] = None):
        if n < 2:
            raise DomainError(f"edge process needs n >= 2, got {n}")
        self.n = int(n)
        self.loopful = bool(loopful)
        self.universe_size = n * n if loopful else n * (n - 1)
        self._codes = _codes if _codes is not None else np.empty(0, dtype=np.int64)
        self._rng = _rng
        self._parent = _parent
        self._parent_scanned = 0
        self._lock = threading.Lock()
        self._hitting: Optional[int] = None

    # -- constructors ---------------------------------------------------

    @classmethod
    def generate(cls, n: int, loopful: bool, seed: int) -> "EdgeSequence":
        rng = make_generator(seed)
        seq = cls(n, loopful, _rng=rng)
        if seq.universe_size <= _FULL_SHUFFLE_MAX:
            perm = rng.permutation(seq.universe_size).astype(np.int64)
            if not loopful:
                perm = _loopless_index_to_code(perm, n)
            seq._codes = perm
        return seq

    @classmethod
    def from_order(cls, n: int, loopful: bool, order: Sequence[tuple[int, int]]) -> "EdgeSequence":
        """Explicit order (must be a permutation of the full universe)."""
        codes = np.array([int(u) * n + int(v) for u, v in order], dtype=np.int64)
        universe = n * n if loopful else n * (n - 1)
        if len(order) != universe or len(np.unique(codes)) != universe:
            raise DomainError("order is not a permutation of the pair universe")
        for u, v in order:
            if not (0 <= u < n and 0 <= v < n) or (u == v and not loopful):
                raise DomainError(f"pair ({u},{v}) not in the universe")
        return cls(n, loopful, _codes=codes)

    @classmethod
    def _derived_loopless(cls, parent: "EdgeSequence") -> "EdgeSequence":
        return cls(parent.n, False, _parent=parent)

    # -- materialisation --------------------------------------------------

    @property
    def materialized(self) -> int:
        return int(self._codes.size)

    def ensure(self, m: int) -> None:
        if m > self.universe_size:
            raise DomainError(f"prefix length {m} exceeds universe size {self.universe_size}")
        if self._codes.size >= m:
            return
        with self._lock:
            while self._codes.size < m:
                if self._parent is not None:
                    self._extend_from_parent()
                elif self._codes.size < self.universe_size // 2:
                    # Consumption from the rng depends only on how much is
                    # already materialised, never on the request, so any
                    # request pattern yields the same order for one seed.
                    self._draw_block()
                else:
                    self._finish_with_shuffle()

    def _draw_block(self) -> None:
        assert self._rng is not None
        block = self._rng.integers(0, self.universe_size, size=_DRAW_BLOCK, dtype=np.int64)
        if not self.loopful:
            block = _loopless_index_to_code(block, self.n)
        _, first_idx = np.unique(block, return_index=True)
        in_order = block[np.sort(first_idx)]
        fresh = in_order[~np.isin(in_order, self._codes)]
        self._codes = np.concatenate([self._codes, fresh])

    def _finish_with_shuffle(self) -> None:
        # Past half the universe rejection stalls; finish with a shuffle of
        # the leftovers (the conditional law of a uniform permutation's tail).
        assert self._rng is not None
        have = self._codes
        all_codes = np.arange(self.universe_size, dtype=np.int64)
        if not self.loopful:
            all_codes = _loopless_index_to_code(all_codes, self.n)
        rest = np.setdiff1d(all_codes, have, assume_unique=False)
        self._codes = np.concatenate([have, self._rng.permutation(rest)])

    def _extend_from_parent(self) -> None:
        parent = self._parent
        assert parent is not None
        scan_to = min(parent.universe_size, max(self._parent_scanned + _DRAW_BLOCK, 1))
        parent.ensure(scan_to)
        chunk = parent._codes[self._parent_scanned:scan_to]
        u, v = _codes_to_pairs(chunk, self.n)
        self._codes = np.concatenate([self._codes, chunk[u != v]])
        self._parent_scanned = scan_to

    # -- access ------------------------------------------------------------

    def codes(self, m: int) -> np.ndarray:
        self.ensure(m)
        return self._codes[:m]

    def pair(self, i: int) -> tuple[int, int]:
        """The (i+1)-th edge of the process (0-based index)."""
        self.ensure(i + 1)
        c = int(self._codes[i])
        return c // self.n, c % self.n

    def pairs(self, m: int) -> list[tuple[int, int]]:
        u, v = _codes_to_pairs(self.codes(m), self.n)
        return list(zip(u.tolist(), v.tolist()))

    def prefix(self, m: int) -> Digraph:
        return Digraph(self.n, self.pairs(m), allow_loops=self.loopful)

    def full_order(self) -> list[tuple[int, int]]:
        return self.pairs(self.universe_size)

    def __len__(self) -> int:
        return self.universe_size


class CoupledProcess:
    """Loopful edge process together with its loop-deleted loopless shadow.

    For every m, the non-loop edges of the loopful prefix of length m form a
    subset of the loopless prefix of length m (deleting loops only advances
    non-loop edges).
    """

    def __init__(self, loopful: EdgeSequence, loopless: EdgeSequence):
        self.loopful = loopful
        self.loopless = loopless

    @property
    def n(self) -> int:
        return self.loopful.n

    def audit(self, m: int) -> bool:
        """Check the coupling invariant at one m <= n(n-1); raises if violated."""
        ful = {p for p in self.loopful.pairs(m) if p[0] != p[1]}
        less = set(self.loopless.pairs(m))
        if not ful <= less:
            raise AssertionError(f"coupling invariant violated at m={m}")
        return True

    def audit_all(self, up_to: Optional[int] = None) -> bool:
        limit = self.loopless.universe_size if up_to is None else up_to
        for m in range(limit + 1):
            self.audit(m)
        return True


# -- operations ---------------------------------------------------------------


def gen_binomial(n: int, p: float, allow_loops: bool, seed: int) -> Digraph:
    """Each admissible pair present independently with probability p."""
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"probability p must lie in [0,1], got {p}")
    if n <= 0:
        raise DomainError(f"vertex count must be positive, got {n}")
    rng = make_generator(seed)
    universe = n * n if allow_loops else n * (n - 1)
    if universe <= _FULL_SHUFFLE_MAX:
        mask = rng.random(universe) < p
        idx = np.nonzero(mask)[0].astype(np.int64)
        codes = idx if allow_loops else _loopless_index_to_code(idx, n)
    else:
        # Draw the edge count, then a uniform set of that size: exactly the
        # same joint law, without touching all ~n^2 pairs.
        m = int(rng.binomial(universe, p))
        codes = _draw_distinct(rng, n, allow_loops, m)
    u, v = _codes_to_pairs(codes, n)
    return Digraph(n, zip(u.tolist(), v.tolist()), allow_loops=allow_loops)


def _draw_distinct(rng: np.random.Generator, n: int, loopful: bool, m: int) -> np.ndarray:
    universe = n * n if loopful else n * (n - 1)
    if m > universe:
        raise DomainError("cannot draw more pairs than the universe holds")
    out = np.empty(0, dtype=np.int64)
    while out.size < m:
        block = rng.integers(0, universe, size=_DRAW_BLOCK, dtype=np.int64)
        if not loopful:
            block = _loopless_index_to_code(block, n)
        _, first_idx = np.unique(block, return_index=True)
        in_order = block[np.sort(first_idx)]
        out = np.concatenate([out, in_order[~np.isin(in_order, out)]])
    return out[:m]


def gen_process(n: int, universe: str, seed: int) -> EdgeSequence:
    """Uniformly random edge ordering; ``universe`` is 'loopless' or 'loopful'."""
    if universe not in ("loopless", "loopful"):
        raise DomainError(f"universe must be 'loopless' or 'loopful', got {universe!r}")
    if n < 2:
        raise DomainError(f"edge process needs n >= 2, got {n}")
    return EdgeSequence.generate(n, universe == "loopful", seed)


def couple(loopful_seq: EdgeSequence) -> CoupledProcess:
    """Derive the loopless process by deleting loops, preserving order."""
    if not loopful_seq.loopful:
        raise DomainError("coupling requires a loopful sequence")
    return CoupledProcess(loopful_seq, EdgeSequence._derived_loopless(loopful_seq))


def _first_positions(keys: np.ndarray, n: int) -> np.ndarray:
    """first[v] = least index i with keys[i] == v, or len(keys) if absent."""
    length = keys.size
    first = np.full(n, length, dtype=np.int64)
    first[keys[::-1]] = np.arange(length - 1, -1, -1)
    return first


def hitting_time(seq: EdgeSequence) -> int:
    """Least m such that prefix(m) has all in- and out-degrees >= 1.

    Work is linear in the scanned prefix: one pass records, per vertex, the
    first position where it appears as a source and as a target.
    """
    if seq._hitting is not None:
        return seq._hitting
    n = seq.n
    guess = min(seq.universe_size, max(4 * n, int(n * (math.log(n) + 4.0))))
    while True:
        codes = seq.codes(guess)
        u, v = _codes_to_pairs(codes, n)
        first_out = _first_positions(u, n)
        first_in = _first_positions(v, n)
        worst = int(max(first_out.max(), first_in.max()))
        if worst < guess:
            seq._hitting = worst + 1
            return worst + 1
        if guess == seq.universe_size:
            raise AssertionError("universe exhausted without covering all degrees")
        guess = min(seq.universe_size, guess * 2)


def min_degrees(d: Digraph) -> tuple[int, int]:
    """(min out-degree, min in-degree); a loop counts toward both at its vertex."""
    outd, ind = d.degrees()
    return int(outd.min()), int(ind.min())


# -- edge-list text format -----------------------------------------------------
# First line: `n <n> loops <0|1>`; then one `u v` pair per line.


def write_edge_list(d: Digraph, stream: IO[str], one_indexed: bool = False) -> None:
    off = 1 if one_indexed else 0
    stream.write(f"n {d.n} loops {1 if d.allow_loops else 0}\n")
    for u, v in d.edges():
        stream.write(f"{u + off} {v + off}\n")


def read_edge_list(stream: IO[str], one_indexed: bool = False) -> Digraph:
    header = stream.readline().split()
    if len(header) != 4 or header[0] != "n" or header[2] != "loops" or header[3] not in ("0", "1"):
        raise FormatError("expected header 'n <n> loops <0|1>'")
    try:
        n = int(header[1])
    except ValueError:
        raise FormatError(f"bad vertex count {header[1]!r}") from None
    allow_loops = header[3] == "1"
    off = 1 if one_indexed else 0
    edges = []
    seen = set()
    for lineno, line in enumerate(stream, start=2):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 2:
            raise FormatError(f"line {lineno}: expected 'u v', got {line.rstrip()!r}")
        try:
            u, v = int(parts[0]) - off, int(parts[1]) - off
        except ValueError:
            raise FormatError(f"line {lineno}: non-integer vertex id") from None
        if not (0 <= u < n and 0 <= v < n):
            raise FormatError(f"line {lineno}: vertex id out of range for n={n}")
        if u == v and not allow_loops:
            raise FormatError(f"line {lineno}: loop ({u},{u}) in a loopless file")
        if (u, v) in seen:
            raise FormatError(f"line {lineno}: duplicate edge ({u},{v})")
        seen.add((u, v))
        edges.append((u, v))
    return Digraph(n, edges, allow_loops=allow_loops)
