"""The 1-factor-to-Hamilton-cycle construction pipeline.

Stages: expose a two-thirds prefix of the loopful edge process, augment it
with every later edge touching a low-degree vertex, extract a 1-factor of
that graph (preferring each vertex's few earliest edges), re-extract under
random right-side relabelings until the factor has few loops and few cycles,
merge loops into other cycles (recording virtual edges where a needed edge
is absent), then use the still-unexposed random edges to patch cycles
together, rotate-and-close the remaining cycles into one, and finally rotate
away any virtual edges.  The output is verified against the loopless prefix
at its hitting time.

``compress``/``CompressionMap`` implement the instance-shrinking step that
removes low-degree vertices by contracting them with their factor
neighbours; the default pipeline applies it as the identity (see the
module-level notes on small-n behaviour in README).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .digraph import CoupledProcess, Digraph, hitting_time
from .errors import DomainError, MergeFailureError, PreconditionError
from .exact import OneFactor
from .matching import hopcroft_karp
from .rng import derive_seed, make_generator

MIN_N = 16  # below this log log n is too small for the degree window


@dataclass(frozen=True)
class Constants:
    """Derived quantities controlling the pipeline at a given n.

    ``m0``/``m1`` bracket the degree-1 hitting time, ``m3`` is the two-thirds
    exposure milestone; all logs are natural.
    """

    n: int
    m0: int
    m1: int
    m3: int
    large_threshold: int
    early_edges_per_vertex: int
    isolation_distance: int
    degree_window_eps: float
    good_loop_cap: float
    good_cycle_cap: float
    short_cycle_len: int
    degree_cap: float


def compute_constants(n: int) -> Constants:
    if n < MIN_N:
        raise DomainError(f"constants need n >= {MIN_N}, got {n}")
    log_n = math.log(n)
    loglog = math.log(log_n)
    m0 = math.floor(n * log_n - n * math.log(loglog))
    m1 = math.floor(n * log_n + n * math.log(loglog))
    m3 = math.ceil(2.0 / 3.0 * n * log_n)
    c = Constants(
        n=n,
        m0=m0,
        m1=m1,
        m3=m3,
        large_threshold=math.ceil(3.0 * log_n / loglog),
        early_edges_per_vertex=10,
        isolation_distance=10,
        degree_window_eps=4.0 / loglog,
        good_loop_cap=loglog,
        good_cycle_cap=2.0 * log_n,
        short_cycle_len=3,
        degree_cap=log_n * log_n,
    )
    # m0 == m1 can only happen at the very bottom of the range (n = 16).
    if not (c.m3 < c.m0 <= c.m1):
        raise AssertionError(f"milestone ordering violated at n={n}: {c}")
    return c


def compute_large(d: Digraph, thr: int) -> frozenset[int]:
    """Vertices with out-degree >= thr AND in-degree >= thr."""
    outd, ind = d.degrees()
    return frozenset(np.nonzero((outd >= thr) & (ind >= thr))[0].tolist())


class StarDigraph:
    """Two-thirds prefix plus all hitting-time edges at low-degree vertices."""

    def __init__(self, base: Digraph, extra: frozenset, large: frozenset, m_star_loopful: int):
        self.base = base
        self.extra = extra
        self.large = large
        self.m_star_loopful = m_star_loopful
        self._star: Optional[Digraph] = None

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def star(self) -> Digraph:
        if self._star is None:
            self._star = self.base.with_edges(self.extra)
        return self._star

    def audit(self) -> bool:
        for u, v in self.extra:
            if u in self.large and v in self.large:
                raise AssertionError(f"extra edge ({u},{v}) lies inside the large set")
        return True


def build_star_digraph(cp: CoupledProcess, c: Constants,
                       threshold_override: Optional[int] = None) -> StarDigraph:
    m_star_l = hitting_time(cp.loopful)
    base = cp.loopful.prefix(c.m3)
    thr = c.large_threshold if threshold_override is None else threshold_override
    large = compute_large(base, thr)
    extra = frozenset(
        (u, v) for u, v in cp.loopful.pairs(m_star_l)
        if u not in large or v not in large
    )
    return StarDigraph(base, extra, large, m_star_l)


def build_early_subgraph(cp: CoupledProcess, c: Constants,
                         star: Optional[StarDigraph] = None) -> Digraph:
    """Per vertex, the earliest few outgoing and incoming process edges.

    Two ordered passes over the loopful order up to its hitting time: first
    collect up to ``early_edges_per_vertex`` out-edges per vertex, then the
    same for in-edges, skipping edges already taken.  The result is checked
    to be a subgraph of the star digraph.
    """
    if star is None:
        star = build_star_digraph(cp, c)
    taken = _early_edges(cp, c, star.m_star_loopful)
    star_edges = star.star.edge_set()
    stray = sorted(taken - star_edges)
    if stray:
        raise AssertionError(f"early subgraph leaves the star digraph: {stray[:5]}")
    return Digraph(cp.n, taken, allow_loops=True)


# -- 1-factor extraction ---------------------------------------------------------


def find_one_factor(d: Digraph, seed: int = 0) -> Optional[OneFactor]:
    """A 1-factor of d (perfect matching of its bipartite form), if one exists.

    Tie-breaking is random but reproducible for a fixed seed.
    """
    rng = make_generator(seed)
    adj = []
    for u in range(d.n):
        nbrs = list(d.out_neighbors(u))
        rng.shuffle(nbrs)
        adj.append(nbrs)
    size, match_left, _ = hopcroft_karp(d.n, d.n, adj)
    if size < d.n:
        return None
    return OneFactor(match_left)


def is_good_factor(f: OneFactor, c: Constants) -> bool:
    """Few loops, few cycles (strict caps)."""
    return f.num_loops < c.good_loop_cap and f.num_cycles < c.good_cycle_cap


# -- star property report ---------------------------------------------------------


@dataclass
class StarPropertyReport:
    size_ok: bool              # complement of large is O(sqrt n)
    isolation_ok: bool         # no two non-large vertices within distance 10
    short_cycles_ok: bool      # every cycle of length <= 3 inside large
    degree_ok: bool            # max degree at most log^2 n
    large_size: int
    non_large: int
    sqrt_budget: float
    max_out_degree: int
    max_in_degree: int
    degree_cap: float
    witnesses: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.size_ok and self.isolation_ok and self.short_cycles_ok and self.degree_ok


def check_star_properties(s: StarDigraph, c: Constants, size_constant: float = 10.0) -> StarPropertyReport:
    d = s.star
    n = d.n
    large = s.large
    non_large = sorted(set(range(n)) - large)
    witnesses: dict = {}

    sqrt_budget = size_constant * math.sqrt(n)
    size_ok = len(non_large) <= sqrt_budget

    # Undirected BFS to the isolation radius from every non-large vertex.
    isolation_ok = True
    non_large_set = set(non_large)
    for src in non_large:
        dist = {src: 0}
        frontier = [src]
        hit = None
        for depth in range(1, c.isolation_distance + 1):
            nxt = []
            for x in frontier:
                for y in d.out_neighbors(x) + d.in_neighbors(x):
                    if y not in dist:
                        dist[y] = depth
                        nxt.append(y)
                        if y in non_large_set and y != src:
                            hit = (src, y, depth)
                            break
                if hit:
                    break
            if hit:
                break
            frontier = nxt
        if hit:
            isolation_ok = False
            witnesses.setdefault("isolation", []).append(hit)
            break

    bad_cycles = [cyc for cyc in _short_cycles(d, c.short_cycle_len)
                  if any(v not in large for v in cyc)]
    short_cycles_ok = not bad_cycles
    if bad_cycles:
        witnesses["short_cycles"] = bad_cycles[:10]

    outd, ind = d.degrees()
    max_out, max_in = int(outd.max()), int(ind.max())
    degree_ok = max_out <= c.degree_cap and max_in <= c.degree_cap
    if not degree_ok:
        witnesses["degree"] = [int(np.argmax(outd)), int(np.argmax(ind))]

    return StarPropertyReport(
        size_ok=size_ok, isolation_ok=isolation_ok, short_cycles_ok=short_cycles_ok,
        degree_ok=degree_ok, large_size=len(large), non_large=len(non_large),
        sqrt_budget=sqrt_budget, max_out_degree=max_out, max_in_degree=max_in,
        degree_cap=c.degree_cap, witnesses=witnesses,
    )


def _short_cycles(d: Digraph, max_len: int) -> list[tuple[int, ...]]:
    """All directed cycles of length <= max_len (loops, 2-cycles, triangles)."""
    assert max_len == 3, "only the loop/2-cycle/triangle enumeration is implemented"
    cycles: list[tuple[int, ...]] = []
    for v in range(d.n):
        if d.has_edge(v, v):
            cycles.append((v,))
    for u, v in d.edges():
        if u < v and u != v and d.has_edge(v, u):
            cycles.append((u, v))
    in_sets = [set(d.in_neighbors(v)) for v in range(d.n)]
    for u, v in d.edges():
        if u == v:
            continue
        for w in d.out_neighbors(v):
            if w != u and w != v and w in in_sets[u]:
                if u == min(u, v, w):  # canonical rotation: smallest first
                    cycles.append((u, v, w))
    return cycles


# -- loop merging -----------------------------------------------------------------


class VirtualEdgeSet:
    """Vertex-disjoint directed edges added formally (absent from the host)."""

    def __init__(self, edges: Iterable[tuple[int, int]] = ()):
        es = [(int(u), int(v)) for u, v in edges]
        touched: set[int] = set()
        for u, v in es:
            if u == v:
                raise DomainError(f"virtual loop ({u},{u}) not allowed")
            if u in touched or v in touched:
                raise DomainError(f"virtual edges must be vertex-disjoint; ({u},{v}) collides")
            touched.update((u, v))
        self._edges = frozenset(es)

    def __contains__(self, edge) -> bool:
        return tuple(edge) in self._edges

    def __iter__(self):
        return iter(sorted(self._edges))

    def __len__(self) -> int:
        return len(self._edges)

    def edge_set(self) -> frozenset:
        return self._edges


def merge_loops(f: OneFactor, d: Digraph, large: frozenset, seed: int = 0) -> tuple[OneFactor, VirtualEdgeSet]:
    """Splice every loop of f into another cycle.

    A loop vertex v (required to lie in ``large``) is inserted after one of
    its in-neighbours v0 on a different cycle: the real edge (v0, v) replaces
    (v0, v1), and (v, v1) is recorded as a virtual edge unless d already has
    it.  Vertices used by earlier merges are avoided, keeping the virtual
    edges vertex-disjoint.
    """
    loops = sorted(v for v, w in enumerate(f.image) if v == w)
    outside = [v for v in loops if v not in large]
    if outside:
        raise PreconditionError(f"loop vertices outside the large set: {outside}", witnesses=outside)
    image = list(f.image)
    if not loops:
        return OneFactor(image), VirtualEdgeSet()

    input_cycles = {frozenset(cyc) for cyc in f.cycles() if len(cyc) <= 3}
    rng = make_generator(seed)
    pending = set(loops)
    used: set[int] = set()
    virtual: list[tuple[int, int]] = []
    for v in rng.permutation(loops).tolist():
        best = None
        best_real = None
        candidates = list(d.in_neighbors(v))
        rng.shuffle(candidates)
        for v0 in candidates:
            if v0 == v or v0 in pending or v0 in used:
                continue
            v1 = image[v0]
            if v1 in used or v1 == v or v1 == v0:
                continue
            if best is None:
                best = v0
            if d.has_edge(v, v1):
                best_real = v0
                break
        pick = best_real if best_real is not None else best
        if pick is None:
            raise MergeFailureError(
                f"no admissible neighbour to merge the loop at vertex {v}", vertex=v)
        v1 = image[pick]
        image[pick] = v
        image[v] = v1
        if not d.has_edge(v, v1):
            virtual.append((v, v1))
        used.update((pick, v1, v))
        pending.discard(v)

    out = OneFactor(image)
    if out.num_loops:
        raise AssertionError("loop merging left a fixed point")
    for cyc in out.cycles():
        if len(cyc) <= 3 and frozenset(cyc) not in input_cycles:
            if any(x not in large for x in cyc):
                raise MergeFailureError(
                    f"merge created a short cycle outside the large set: {cyc}")
    return out, VirtualEdgeSet(virtual)


# -- paths, rotations, patching ----------------------------------------------------


class PathState:
    """Directed path with O(1) vertex-position lookup."""

    __slots__ = ("n", "_verts", "_pos")

    def __init__(self, vertices: Sequence[int], n: int):
        verts = np.asarray(list(vertices), dtype=np.int64)
        if verts.size == 0:
            raise DomainError("empty path")
        if np.unique(verts).size != verts.size:
            raise DomainError("path vertices must be distinct")
        if verts.min() < 0 or verts.max() >= n:
            raise DomainError("path vertex out of range")
        self.n = n
        self._verts = verts
        pos = np.full(n, -1, dtype=np.int64)
        pos[verts] = np.arange(verts.size)
        self._pos = pos

    @classmethod
    def _raw(cls, verts: np.ndarray, n: int) -> "PathState":
        obj = object.__new__(cls)
        obj.n = n
        obj._verts = verts
        pos = np.full(n, -1, dtype=np.int64)
        pos[verts] = np.arange(verts.size)
        obj._pos = pos
        return obj

    @property
    def vertices(self) -> tuple[int, ...]:
        return tuple(self._verts.tolist())

    @property
    def first(self) -> int:
        return int(self._verts[0])

    @property
    def last(self) -> int:
        return int(self._verts[-1])

    def position(self, v: int) -> int:
        """Index of v on the path, or -1."""
        return int(self._pos[v])

    def __len__(self) -> int:
        return int(self._verts.size)

    def __eq__(self, other) -> bool:
        return isinstance(other, PathState) and self.n == other.n and \
            np.array_equal(self._verts, other._verts)

    def __hash__(self) -> int:
        return hash((self.n, self.vertices))

    def rotated(self, i: int, j: int) -> "PathState":
        """v0..vi vj..vl v_{i+1}..v_{j-1}; no edge checks (see ``rotate``)."""
        v = self._verts
        return PathState._raw(np.concatenate([v[: i + 1], v[j:], v[i + 1: j]]), self.n)

    def __repr__(self) -> str:
        return f"PathState({self._verts.tolist()})"


def rotate(p: PathState, i: int, j: int, d: Digraph) -> PathState:
    """Path rotation using the chord (v_i, v_j) and the end edge (v_l, v_{i+1})."""
    ell = len(p) - 1
    if not (1 <= i < j <= ell):
        raise PreconditionError(f"rotation indices out of range: i={i}, j={j}, l={ell}")
    verts = p._verts
    vi, vj, vl, vnext = int(verts[i]), int(verts[j]), int(verts[ell]), int(verts[i + 1])
    if not d.has_edge(vi, vj):
        raise PreconditionError(f"missing chord ({vi},{vj})")
    if not d.has_edge(vl, vnext):
        raise PreconditionError(f"missing end edge ({vl},{vnext})")
    return p.rotated(i, j)


def patch_cycles(c1: Sequence[int], c2: Sequence[int], d: Digraph) -> Optional[list[int]]:
    """Merge two vertex-disjoint cycles via a cross pair of edges.

    Looks for cycle edges (v1, w1) in c1 and (v2, w2) in c2 with both
    (v1, w2) and (v2, w1) present in d; returns the merged cycle or None.
    The first pair in index order wins, so the search is reproducible.
    """
    c1, c2 = list(c1), list(c2)
    if set(c1) & set(c2):
        raise PreconditionError("cycles must be vertex-disjoint")
    len1, len2 = len(c1), len(c2)
    for a in range(len1):
        v1, w1 = c1[a], c1[(a + 1) % len1]
        for b in range(len2):
            v2, w2 = c2[b], c2[(b + 1) % len2]
            if d.has_edge(v1, w2) and d.has_edge(v2, w1):
                return c1[: a + 1] + c2[b + 1:] + c2[: b + 1] + c1[a + 1:]
    return None


def _default_budget(n: int) -> int:
    return math.ceil(3.0 * math.log(n))


def _close_path_impl(path: PathState, d: Digraph, forbidden: frozenset,
                     budget: int, rng: np.random.Generator) -> Optional[tuple[list[int], int]]:
    """Breadth-first search over rotation sequences; returns (cycle, depth)."""
    v0 = path.first

    def closes(p: PathState) -> bool:
        return d.has_edge(p.last, v0) and (p.last, v0) not in forbidden

    if closes(path):
        return list(path.vertices), 0
    seen_ends = {path.last}
    frontier = [path]
    for depth in range(1, budget + 1):
        nxt: list[PathState] = []
        for p in frontier:
            verts = p._verts
            ell = verts.size - 1
            vl = int(verts[-1])
            cands: list[tuple[int, int]] = []
            for u in d.out_neighbors(vl):
                pu = p.position(u)
                if pu < 2 or pu > ell - 1 or (vl, u) in forbidden:
                    continue
                i = pu - 1
                vi = int(verts[i])
                for w in d.out_neighbors(vi):
                    j = p.position(w)
                    if j >= i + 2 and (vi, w) not in forbidden:
                        cands.append((i, j))
            if len(cands) > 1:
                rng.shuffle(cands)
            for i, j in cands:
                end = int(verts[j - 1])
                if end in seen_ends:
                    continue
                q = p.rotated(i, j)
                if closes(q):
                    return list(q.vertices), depth
                seen_ends.add(end)
                nxt.append(q)
        if not nxt:
            return None
        frontier = nxt
    return None


def close_path(p: PathState, d: Digraph, forbidden: Optional[VirtualEdgeSet] = None,
               rotation_budget: Optional[int] = None, seed: int = 0) -> Optional[list[int]]:
    """Rotate the path until some endpoint closes back to its first vertex.

    Returns a cycle on exactly the path's vertex set, or None if the budget
    is exhausted.  Edges in ``forbidden`` are never added.
    """
    fb = forbidden.edge_set() if forbidden is not None else frozenset()
    budget = rotation_budget if rotation_budget is not None else _default_budget(d.n)
    got = _close_path_impl(p, d, fb, budget, make_generator(seed))
    return got[0] if got else None


def eliminate_forbidden(h: Sequence[int], virtual: VirtualEdgeSet, d: Digraph,
                        rotation_budget: Optional[int] = None, seed: int = 0) -> Optional[list[int]]:
    """Rotate virtual edges out of a Hamilton cycle, one per round."""
    got = _eliminate_impl(list(h), virtual.edge_set(), d,
                          rotation_budget if rotation_budget is not None else _default_budget(d.n),
                          seed)
    return got[0] if got else None


def _eliminate_impl(cycle: list[int], forbidden: frozenset, d: Digraph,
                    budget: int, seed: int) -> Optional[tuple[list[int], int, int]]:
    rounds = 0
    rotations = 0
    while True:
        k = len(cycle)
        present = [(idx, (cycle[idx], cycle[(idx + 1) % k])) for idx in range(k)
                   if (cycle[idx], cycle[(idx + 1) % k]) in forbidden]
        if not present:
            return cycle, rounds, rotations
        # A removal can be unclosable (e.g. the freed head has no usable
        # in-edge); any of the present edges may be removed first, so try
        # them all before declaring the round stuck.
        got = None
        for attempt, (idx, _edge) in enumerate(present):
            path_vertices = cycle[idx + 1:] + cycle[: idx + 1]
            path = PathState(path_vertices, d.n)
            got = _close_path_impl(path, d, forbidden, budget,
                                   make_generator(derive_seed(seed, rounds, attempt)))
            if got is not None:
                break
        if got is None:
            return None
        new_cycle, used = got
        new_count = sum(1 for t in range(len(new_cycle))
                        if (new_cycle[t], new_cycle[(t + 1) % len(new_cycle)]) in forbidden)
        if new_count >= len(present):
            raise AssertionError("forbidden-edge round did not make progress")
        cycle = new_cycle
        rounds += 1
        rotations += used


# -- compression ---------------------------------------------------------------------


class CompressionMap:
    """Bookkeeping for contracted (pred, v, succ) triples.

    ``triples`` maps a new compressed label to its (v-, v, v+); every other
    original vertex maps straight through.  ``map_edge`` translates an
    original edge to a compressed one (None if an endpoint's role drops it),
    and ``decompress_cycle`` expands a compressed Hamilton cycle back.
    """

    def __init__(self, n_orig: int, reps: list, triples: dict):
        self.n_orig = n_orig
        self.n_comp = len(reps)
        self.triples = triples  # comp id -> (v-, v, v+)
        self._out_map: dict[int, int] = {}
        self._in_map: dict[int, int] = {}
        self.expansion: dict[int, tuple[int, ...]] = {}
        for comp_id, rep in enumerate(reps):
            if isinstance(rep, tuple):
                vm, v, vp = rep
                self._out_map[vp] = comp_id
                self._in_map[vm] = comp_id
                self.expansion[comp_id] = (vm, v, vp)
            else:
                self._out_map[rep] = comp_id
                self._in_map[rep] = comp_id
                self.expansion[comp_id] = (rep,)

    @classmethod
    def identity(cls, n: int) -> "CompressionMap":
        return cls(n, list(range(n)), {})

    def map_edge(self, x: int, y: int) -> Optional[tuple[int, int]]:
        cx = self._out_map.get(x)
        cy = self._in_map.get(y)
        if cx is None or cy is None:
            return None
        return cx, cy

    def decompress_cycle(self, cycle: Sequence[int]) -> list[int]:
        out: list[int] = []
        for cv in cycle:
            out.extend(self.expansion[int(cv)])
        return out


class CompressResult(tuple):
    """(digraph, factor, mapping) with attribute access."""

    def __new__(cls, digraph: Digraph, factor: OneFactor, mapping: CompressionMap):
        return super().__new__(cls, (digraph, factor, mapping))

    digraph = property(lambda self: self[0])
    factor = property(lambda self: self[1])
    mapping = property(lambda self: self[2])


def compress(d: Digraph, m: OneFactor, l_set: frozenset) -> CompressResult:
    """Contract every vertex outside ``l_set`` with its factor neighbours.

    Preconditions (validated, with offending vertices named): no two
    non-members within distance 10 along the factor's cycles, and every
    factor cycle of length <= 3 contained in ``l_set``.
    """
    n = d.n
    non_l = sorted(v for v in range(n) if v not in l_set)
    cycles = m.cycles()

    for cyc in cycles:
        outs = [v for v in cyc if v not in l_set]
        if len(cyc) <= 3 and outs:
            raise PreconditionError(
                f"short factor cycle {cyc} leaves the compression set", witnesses=outs)
        if len(outs) >= 2:
            k = len(cyc)
            pos = {v: i for i, v in enumerate(cyc)}
            for a in range(len(outs)):
                for b in range(a + 1, len(outs)):
                    gap = abs(pos[outs[a]] - pos[outs[b]])
                    dist = min(gap, k - gap)
                    if dist <= 10:
                        raise PreconditionError(
                            f"vertices {outs[a]} and {outs[b]} are within factor distance "
                            f"{dist}", witnesses=[outs[a], outs[b]])

    pred = [0] * n
    for v, w in enumerate(m.image):
        pred[w] = v
    triple_of: dict[int, tuple[int, int, int]] = {}
    absorbed: set[int] = set()
    for v in non_l:
        vm, vp = pred[v], m.image[v]
        if vm in absorbed or vp in absorbed or v in absorbed:
            raise PreconditionError(f"overlapping compression triples at vertex {v}",
                                    witnesses=[v])
        triple_of[v] = (vm, v, vp)
        absorbed.update((vm, v, vp))

    reps: list = sorted(set(range(n)) - absorbed)
    reps.extend(triple_of[v] for v in non_l)
    reps.sort(key=lambda r: r[1] if isinstance(r, tuple) else r)
    mapping = CompressionMap(n, reps, {i: r for i, r in enumerate(reps) if isinstance(r, tuple)})

    comp_edges = set()
    for x, y in d.edges():
        e = mapping.map_edge(x, y)
        if e is not None and e[0] != e[1]:
            comp_edges.add(e)

    comp_cycles = []
    for cyc in cycles:
        cc = []
        for v in cyc:
            if v in triple_of:
                cc.append(mapping._in_map[triple_of[v][0]])
            elif v not in absorbed:
                cc.append(mapping._in_map[v])
            # v- / v+ members are folded into their triple's label
        comp_cycles.append(cc)
    if any(len(cc) == 0 for cc in comp_cycles):
        raise AssertionError("a factor cycle vanished during compression")
    comp_factor = OneFactor.from_cycles(mapping.n_comp, comp_cycles)
    comp_digraph = Digraph(mapping.n_comp, comp_edges, allow_loops=False)
    return CompressResult(comp_digraph, comp_factor, mapping)


# -- the full pipeline ------------------------------------------------------------------


@dataclass(frozen=True)
class PipelineConfig:
    relabel_retries: int = 25
    rotation_budget: Optional[int] = None      # None: ceil(3 log n)
    merge_retry_cap: int = 5                   # unravel attempts per cycle merge
    patch_fraction: float = 0.5                # share of reserved edges used for patching
    # Edge supply for rotations/closures: "target" (default) uses the whole
    # loopless prefix at the hitting time minus the factor's own edges; the
    # reserved-pool variants ("split", "reserve") are kept selectable but are
    # too thin to percolate at moderate n (see README).
    rotation_source: str = "target"
    overlap_constant: float = 10.0             # overlap >= n - this * log^2 n
    size_constant: float = 10.0                # budget for the low-degree fallback test
    large_threshold: Optional[int] = None      # None: formula with small-n fallback
    include_timings: bool = False


@dataclass
class PipelineOutcome:
    ok: bool
    cycle: Optional[tuple[int, ...]]
    overlap: Optional[int]
    failure_phase: Optional[str]
    failure_reason: Optional[str]
    phase_log: dict
    m_star: int
    m_star_loopful: int

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "cycle": list(self.cycle) if self.cycle is not None else None,
            "overlap": self.overlap,
            "failure_phase": self.failure_phase,
            "failure_reason": self.failure_reason,
            "phase_log": self.phase_log,
            "m_star": self.m_star,
            "m_star_loopful": self.m_star_loopful,
        }


def verify_hamilton_cycle(cycle: Sequence[int], n: int, edge_set: frozenset) -> bool:
    """n distinct vertices, n edges all present, cyclically closed."""
    cyc = list(cycle)
    if len(cyc) != n or len(set(cyc)) != n:
        return False
    return all((cyc[i], cyc[(i + 1) % n]) in edge_set for i in range(n))


def _canonical_cycle(cyc: Sequence[int]) -> list[int]:
    k = list(cyc)
    i = k.index(min(k))
    return k[i:] + k[:i]


def find_hamilton(cp: CoupledProcess, c: Constants, seed: int,
                  config: PipelineConfig = PipelineConfig()) -> PipelineOutcome:
    """Run the full construction on a coupled process; verify against the
    loopless prefix at its hitting time."""
    n = cp.n
    log: dict = {}
    timings: dict = {}
    t_start = time.perf_counter()

    def mark(stage: str, t0: float) -> None:
        if config.include_timings:
            timings[stage] = time.perf_counter() - t0

    def fail(phase: str, reason: str) -> PipelineOutcome:
        if config.include_timings:
            log["durations"] = timings
        return PipelineOutcome(False, None, None, phase, reason, log, m_star, m_star_l)

    t0 = time.perf_counter()
    m_star_l = hitting_time(cp.loopful)
    m_star = hitting_time(cp.loopless)
    target_edges = frozenset(cp.loopless.pairs(m_star))
    d_m3 = cp.loopful.prefix(c.m3)
    log["m_star"] = m_star
    log["m_star_loopful"] = m_star_l
    mark("exposure", t0)

    # Degree threshold for the working large set: the formula value when it
    # leaves only O(sqrt n) vertices outside.  Otherwise fall back to 2:
    # vertices with a side of degree <= 1 in the two-thirds prefix get all
    # their hitting-time edges (degree-1 vertices colliding on a single
    # neighbour are the dominant matching obstruction at moderate n).
    t0 = time.perf_counter()
    if config.large_threshold is not None:
        thr = config.large_threshold
    else:
        thr = c.large_threshold
        if n - len(compute_large(d_m3, thr)) > config.size_constant * math.sqrt(n):
            thr = 2
    star = build_star_digraph(cp, c, threshold_override=thr)
    large = star.large
    log["large_threshold_formula"] = c.large_threshold
    log["large_threshold_used"] = thr
    log["large_size"] = len(large)
    mark("star", t0)

    # Factor-eligible edges: loops may enter the factor (they are merged away
    # later); non-loop edges must already lie in the verification target.
    t0 = time.perf_counter()
    eligible = frozenset(
        (u, v) for u, v in star.star.edge_set()
        if u == v or (u, v) in target_edges
    )
    log["eligible_edges"] = len(eligible)
    log["trimmed_star_edges"] = len(star.star.edge_set()) - len(eligible)

    early = _early_edges(cp, c, m_star_l)
    early_eligible = sorted(early & eligible)
    eligible_sorted = sorted(eligible)
    # Last-resort factor source: the whole loopless prefix at its hitting
    # time (degrees >= 1 by definition) plus the exposed loops.
    full_eligible = sorted(
        set(target_edges) | {(v, v) for v, w in cp.loopful.pairs(m_star_l) if v == w}
    )
    tiers = (
        ("early", _out_lists(n, early_eligible)),
        ("star", _out_lists(n, eligible_sorted)),
        ("full", _out_lists(n, full_eligible)),
    )
    mark("early", t0)

    # Extract a factor; re-extract under fresh right-side relabelings until
    # it is good and its loops sit inside the large set.
    t0 = time.perf_counter()
    factor = None
    factor_source = None
    attempts = 0
    for attempt in range(config.relabel_retries + 1):
        attempts = attempt + 1
        rng = make_generator(derive_seed(seed, 1, attempt))
        sigma = np.arange(n) if attempt == 0 else rng.permutation(n)
        inv = np.empty(n, dtype=np.int64)
        inv[sigma] = np.arange(n)
        got = None
        for source, adj in tiers:
            # The matcher is positional, so the relabeled lists must be
            # re-sorted: that is what makes a fresh sigma reach a genuinely
            # different factor rather than replaying the same execution.
            relabeled = [sorted(int(sigma[w]) for w in row) for row in adj]
            size, match_left, _ = hopcroft_karp(n, n, relabeled)
            if size == n:
                got = OneFactor([int(inv[w]) for w in match_left])
                factor_source = source
                break
        if got is None:
            if attempt == 0:
                return fail("one_factor", "no 1-factor in the hitting-time edges")
            continue
        if is_good_factor(got, c) and all(got.image[v] != v or v in large for v in range(n)):
            factor = got
            break
    log["relabel_attempts"] = attempts
    log["factor_source"] = factor_source
    mark("factor", t0)
    if factor is None:
        return fail("goodness", f"no good factor within {config.relabel_retries} relabelings")
    loops0, cycles0 = factor.num_loops, factor.num_cycles
    log["factor_loops"] = loops0
    log["factor_cycles"] = cycles0

    # Merge loops away; only real non-loop eligible edges back the merge.
    t0 = time.perf_counter()
    work = Digraph(n, [e for e in eligible_sorted if e[0] != e[1]], allow_loops=False)
    try:
        merged, virtual = merge_loops(factor, work, large, seed=derive_seed(seed, 2))
    except (PreconditionError, MergeFailureError) as exc:
        return fail("merge", str(exc))
    log["virtual_edges"] = len(virtual)
    mark("merge", t0)

    # Compression stage: run as the identity (every vertex kept).  The
    # contraction variant is exercised by its own operation-level tests; at
    # these sizes its isolation precondition is never met by real instances.
    mapping = CompressionMap.identity(n)
    log["compression"] = "identity"

    # Reserve the unexposed loopless edges between large vertices and split
    # them between the patching and rotation phases.
    t0 = time.perf_counter()
    reserved = [
        (u, v) for u, v in cp.loopless.pairs(m_star)[c.m3:]
        if u in large and v in large
    ]
    patch_edges, rot_edges = [], []
    acc = 0.0
    for e in reserved:
        acc += config.patch_fraction
        if acc >= 1.0:
            acc -= 1.0
            patch_edges.append(e)
        else:
            rot_edges.append(e)
    if config.rotation_source == "reserve":
        rot_edges = reserved
    elif config.rotation_source == "target":
        # every verified edge is usable for rotations and closures; the BFS
        # is breadth-first, so denser supply means shallower (fewer) changes
        rot_edges = sorted(target_edges)
    elif config.rotation_source != "split":
        raise DomainError(f"unknown rotation_source {config.rotation_source!r}")
    patch_d = Digraph(n, patch_edges, allow_loops=False)
    rot_d = Digraph(n, rot_edges, allow_loops=False)
    log["reserved_edges"] = len(reserved)
    log["patch_pool"] = len(patch_edges)
    log["rotation_pool"] = len(rot_edges)
    mark("pools", t0)

    # Phase 2: greedy patching.
    t0 = time.perf_counter()
    cycles = sorted((_canonical_cycle(cy) for cy in merged.cycles()),
                    key=lambda cy: (-len(cy), cy[0]))
    log["cycles_before_patching"] = len(cycles)
    patches = 0
    progress = True
    while progress and len(cycles) > 1:
        progress = False
        for i in range(len(cycles)):
            for j in range(i + 1, len(cycles)):
                got = patch_cycles(cycles[i], cycles[j], patch_d)
                if got is not None:
                    rest = [cycles[k] for k in range(len(cycles)) if k not in (i, j)]
                    rest.append(_canonical_cycle(got))
                    cycles = sorted(rest, key=lambda cy: (-len(cy), cy[0]))
                    patches += 1
                    progress = True
                    break
            if progress:
                break
    log["patches"] = patches
    log["cycles_after_patching"] = len(cycles)
    mark("patch", t0)

    # Phase 3: unravel each remaining cycle into the main one and re-close.
    t0 = time.perf_counter()
    budget = config.rotation_budget if config.rotation_budget is not None else _default_budget(n)
    forbidden = virtual.edge_set()
    main = cycles[0]
    pending = cycles[1:]
    rotations_total = 0
    closes = 0
    deferrals: dict[int, int] = {}
    while pending:
        cyc = pending.pop(0)
        got = _merge_into(main, cyc, rot_d, forbidden, budget,
                          config.merge_retry_cap, derive_seed(seed, 3, closes, len(cyc)))
        if got is None:
            key = cyc[0]
            deferrals[key] = deferrals.get(key, 0) + 1
            if deferrals[key] > 1:
                return fail("phase3", f"could not merge the cycle starting at {cyc[0]} "
                                      f"(length {len(cyc)})")
            pending.append(cyc)
            continue
        main, used = got
        rotations_total += used
        closes += 1
    log["closes"] = closes
    log["rotations_total"] = rotations_total
    mark("phase3", t0)

    # Rotate away virtual edges, then decompress (identity here).
    t0 = time.perf_counter()
    if virtual.edge_set():
        got = _eliminate_impl(main, forbidden, rot_d, budget, derive_seed(seed, 4))
        if got is None:
            return fail("eliminate", "could not rotate a virtual edge out")
        main, rounds, el_rot = got
        rotations_total += el_rot
        log["eliminate_rounds"] = rounds
        log["rotations_total"] = rotations_total
    else:
        log["eliminate_rounds"] = 0
    final_cycle = mapping.decompress_cycle(main)
    mark("eliminate", t0)

    if not verify_hamilton_cycle(final_cycle, n, target_edges):
        return fail("verify", "result is not a Hamilton cycle of the loopless prefix")
    cyc_edges = {(final_cycle[i], final_cycle[(i + 1) % n]) for i in range(n)}
    overlap = len(cyc_edges & set(factor.edges()))
    log["overlap"] = overlap
    overlap_floor = n - config.overlap_constant * (math.log(n) ** 2)
    log["overlap_floor"] = overlap_floor
    log["edges_changed"] = n - overlap
    if overlap < overlap_floor:
        return fail("overlap", f"overlap {overlap} below floor {overlap_floor:.1f}")
    if config.include_timings:
        timings["total"] = time.perf_counter() - t_start
        log["durations"] = timings
    return PipelineOutcome(True, tuple(_canonical_cycle(final_cycle)), overlap,
                           None, None, log, m_star, m_star_l)


def _early_edges(cp: CoupledProcess, c: Constants, m_star_l: int) -> set:
    width = c.early_edges_per_vertex
    pairs = cp.loopful.pairs(m_star_l)
    out_quota = [0] * cp.n
    taken: set[tuple[int, int]] = set()
    for u, v in pairs:
        if out_quota[u] < width:
            out_quota[u] += 1
            taken.add((u, v))
    in_quota = [0] * cp.n
    for u, v in pairs:
        if (u, v) in taken:
            continue
        if in_quota[v] < width:
            in_quota[v] += 1
            taken.add((u, v))
    return taken


def _out_lists(n: int, edges: Iterable[tuple[int, int]]) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
    return adj


def _merge_into(main: list[int], cyc: list[int], rot_d: Digraph, forbidden: frozenset,
                budget: int, retry_cap: int, seed: int) -> Optional[tuple[list[int], int]]:
    """Unravel ``cyc`` into ``main`` via a connecting pool edge, then close."""
    main_pos = {v: i for i, v in enumerate(main)}
    cyc_pos = {v: i for i, v in enumerate(cyc)}
    candidates: list[tuple[int, int]] = []
    for a in cyc:
        for b in rot_d.out_neighbors(a):
            if b in main_pos and (a, b) not in forbidden:
                candidates.append((a, b))
    for a in main:
        for b in rot_d.out_neighbors(a):
            if b in cyc_pos and (a, b) not in forbidden:
                candidates.append((a, b))
    if not candidates:
        return None
    rng = make_generator(seed)
    rng.shuffle(candidates)
    rotations = 0
    for k, (a, b) in enumerate(candidates[:retry_cap]):
        if a in cyc_pos:
            ca, cb, apos, bpos = cyc, main, cyc_pos[a], main_pos[b]
        else:
            ca, cb, apos, bpos = main, cyc, main_pos[a], cyc_pos[b]
        path_vertices = ca[apos + 1:] + ca[: apos + 1] + cb[bpos:] + cb[: bpos]
        path = PathState(path_vertices, rot_d.n)
        got = _close_path_impl(path, rot_d, forbidden, budget,
                               make_generator(derive_seed(seed, k)))
        if got is not None:
            cycle, used = got
            return cycle, rotations + used + 1  # +1 for the closing edge round
        rotations += budget
    return None
