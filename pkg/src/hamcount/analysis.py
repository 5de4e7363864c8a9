"""Bound calculators and statistical checkers.

Binomial tail bounds (with their validity conditions), exact rational tails
to compare them against, permanent lower bounds for regular bipartite
digraphs, edge-discrepancy pseudorandomness checks, greedy degree
regularisation, head-side relabeling, and random-permutation cycle
statistics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .digraph import Digraph
from .errors import DomainError
from .exact import OneFactor, rencontres
from .rng import make_generator

EXACT_TAIL_MAX_N = 1000  # rational arithmetic cap; log-space floats beyond


# -- Chernoff-style bounds -----------------------------------------------------


@dataclass(frozen=True)
class TailBound:
    """A bound value plus the validity of its precondition.

    ``value`` is an upper bound for the tail probability whenever ``valid``
    is true; it is reported raw, so degenerate parameters can push it above 1
    (e.g. the two-sided bound at eps = 0 evaluates to 2).  ``log_value`` is
    the natural log of the bound: deep in the tail the linear value
    underflows float64 (around e^-745) while the log stays exact.
    """

    value: float
    valid: bool
    params: dict
    log_value: float = 0.0


def chernoff_upper(a: float, n: int, p: float) -> TailBound:
    """Upper-tail bound (e EX / a)^a = exp(-a (log(a/EX) - 1)); valid when a > 4 EX.

    This is the classic moment bound Pr(X >= a) <= e^{-EX} (e EX/a)^a with
    the e^{-EX} slack dropped, so dominance over the exact tail holds for
    every a above the mean and in particular throughout the validity range.
    """
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"probability p must lie in [0,1], got {p}")
    mean = n * p
    valid = a > 4 * mean
    if mean == 0.0:
        log_value = -math.inf if a >= 1 else 0.0
    elif a <= 0:
        log_value = 0.0
    else:
        log_value = -a * (math.log(a / mean) - 1.0)
    return TailBound(math.exp(log_value), valid,
                     {"a": a, "n": n, "p": p, "mean": mean}, log_value)


def chernoff_two_sided(eps: float, n: int, p: float) -> TailBound:
    """Two-sided bound 2 exp(-(eps^2/3) EX); valid when eps <= 3/2."""
    if eps < 0:
        raise DomainError(f"relative deviation must be non-negative, got {eps}")
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"probability p must lie in [0,1], got {p}")
    mean = n * p
    log_value = math.log(2.0) - (eps * eps / 3.0) * mean
    return TailBound(math.exp(log_value), eps <= 1.5,
                     {"eps": eps, "n": n, "p": p, "mean": mean}, log_value)


def exact_binomial_upper_tail(n: int, p, a) -> Fraction:
    """Pr(X >= a) for X ~ Bin(n, p), exact (n <= 1000)."""
    if n > EXACT_TAIL_MAX_N:
        raise DomainError(f"exact tails are rational-arithmetic only up to n={EXACT_TAIL_MAX_N}")
    p = Fraction(p)
    if not (0 <= p <= 1):
        raise DomainError("p outside [0,1]")
    k0 = max(0, math.ceil(Fraction(a)))
    if k0 > n:
        return Fraction(0)
    return _pmf_sum(n, p, range(k0, n + 1))


def exact_binomial_two_sided(n: int, p, eps) -> Fraction:
    """Pr(|X - EX| >= eps EX) for X ~ Bin(n, p), exact (n <= 1000)."""
    if n > EXACT_TAIL_MAX_N:
        raise DomainError(f"exact tails are rational-arithmetic only up to n={EXACT_TAIL_MAX_N}")
    p = Fraction(p)
    mean = n * p
    margin = Fraction(eps) * mean
    ks = [k for k in range(n + 1) if abs(k - mean) >= margin]
    return _pmf_sum(n, p, ks)


def _pmf_sum(n: int, p: Fraction, ks: Iterable[int]) -> Fraction:
    if p == 0:
        return Fraction(sum(1 for k in ks if k == 0))
    if p == 1:
        return Fraction(sum(1 for k in ks if k == n))
    q = 1 - p
    total = Fraction(0)
    for k in ks:
        total += math.comb(n, k) * p ** k * q ** (n - k)
    return total


def log_binomial_upper_tail(n: int, p: float, a: float) -> float:
    """log Pr(X >= a), float log-space for n beyond the rational cap."""
    k0 = max(0, math.ceil(a))
    if k0 > n:
        return -math.inf
    if p <= 0.0:
        return 0.0 if k0 == 0 else -math.inf
    if p >= 1.0:
        return 0.0
    logs = [
        math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
        + k * math.log(p) + (n - k) * math.log1p(-p)
        for k in range(k0, n + 1)
    ]
    top = max(logs)
    return top + math.log(sum(math.exp(x - top) for x in logs))


# -- permanent lower bounds ------------------------------------------------------


def falikman_bound(n: int, r) -> float:
    """log of n! (r/n)^n: the doubly-stochastic permanent minimum scaled to
    row/column sums r."""
    if not (0 < r <= n):
        raise DomainError(f"need 0 < r <= n, got r={r}, n={n}")
    return math.log(math.factorial(n)) + n * (math.log(r) - math.log(n))


def gk_lower_bound(n: int, r, slack: float = 0.1) -> float:
    """log of ((r - slack*r)/e)^n, the pseudorandom-digraph 1-factor count bound."""
    if not (0 < r <= n):
        raise DomainError(f"need 0 < r <= n, got r={r}, n={n}")
    if not (0 <= slack < 1):
        raise DomainError(f"slack must lie in [0,1), got {slack}")
    return n * (math.log(r * (1.0 - slack)) - 1.0)


# -- edge discrepancy --------------------------------------------------------------


@dataclass(frozen=True)
class PairRecord:
    x1_size: int
    x2_size: int
    observed: int
    bound: float
    check: str          # which inequality this pair was tested against
    passed: bool
    margin: float       # bound minus observed deviation (negative = violation)


@dataclass
class DiscrepancyReport:
    exhaustive: bool
    tested: dict = field(default_factory=dict)      # check name -> pairs tested
    violations: dict = field(default_factory=dict)  # check name -> violation count
    records: list = field(default_factory=list)     # sampled records / all violations
    worst: Optional[PairRecord] = None

    def note(self, rec: PairRecord, keep_record: bool) -> None:
        self.tested[rec.check] = self.tested.get(rec.check, 0) + 1
        if not rec.passed:
            self.violations[rec.check] = self.violations.get(rec.check, 0) + 1
        if keep_record or not rec.passed:
            self.records.append(rec)
        if not rec.passed and (self.worst is None or rec.margin < self.worst.margin):
            self.worst = rec

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "exhaustive": self.exhaustive,
            "tested": dict(sorted(self.tested.items())),
            "violations": dict(sorted(self.violations.items())),
            "passed": self.passed,
            "worst": None if self.worst is None else vars(self.worst),
        }


EXHAUSTIVE_MAX_N = 12


def edge_discrepancy_check(d: Digraph, m3: int, samples: int = 10_000, seed: int = 0,
                           gate_constant: float = 4.0) -> DiscrepancyReport:
    """Check subset-pair edge counts of a two-thirds-prefix digraph.

    Centred check: |e(X1,X2) - |X1||X2| m3/n^2| <= 4 sqrt(|X1||X2| m3/n),
    applied to pairs with |X1||X2| >= gate_constant * n^2 / log n.
    Cap check: e(X1,X2) <= (4 m3 / 5n) sqrt(|X1||X2|) for sizes <= 3n/5.
    Exhaustive over all subset pairs for n <= 12, sampled otherwise.
    """
    n = d.n
    gate = gate_constant * n * n / math.log(n)
    size_cap = math.floor(0.6 * n)

    def centred_bound(prod: float) -> float:
        return 4.0 * math.sqrt(prod * m3 / n)

    def cap_bound(prod: float) -> float:
        return (4.0 * m3 / (5.0 * n)) * math.sqrt(prod)

    if n <= EXHAUSTIVE_MAX_N:
        return _exhaustive_scan(d, gate, size_cap, centred_bound, cap_bound, m3)

    report = DiscrepancyReport(exhaustive=False)
    rng = make_generator(seed)
    us, vs = _edge_arrays(d)
    for _ in range(samples):
        s1, s2 = int(rng.integers(0, n + 1)), int(rng.integers(0, n + 1))
        x1 = rng.permutation(n)[:s1]
        x2 = rng.permutation(n)[:s2]
        in1 = np.zeros(n, dtype=bool); in1[x1] = True
        in2 = np.zeros(n, dtype=bool); in2[x2] = True
        e = int(np.count_nonzero(in1[us] & in2[vs])) if us.size else 0
        prod = s1 * s2
        if prod >= gate:
            dev = abs(e - prod * m3 / (n * n))
            b = centred_bound(prod)
            report.note(PairRecord(s1, s2, e, b, "centred", dev <= b, b - dev), True)
        if s1 <= size_cap and s2 <= size_cap:
            b = cap_bound(prod)
            report.note(PairRecord(s1, s2, e, b, "cap", e <= b, b - e), True)
    return report


def _edge_arrays(d: Digraph) -> tuple[np.ndarray, np.ndarray]:
    edges = d.edges()
    if not edges:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    arr = np.asarray(edges, dtype=np.int64)
    return arr[:, 0], arr[:, 1]


def _pair_counts(d: Digraph) -> tuple[np.ndarray, np.ndarray]:
    """counts[mask1, mask2] = e(X1, X2) over all subset pairs, plus popcounts."""
    n = d.n
    full = 1 << n
    adj = d.adjacency_matrix().astype(np.int32)
    out_count = np.zeros((full, n), dtype=np.int32)
    for mask in range(1, full):
        low = mask & (-mask)
        out_count[mask] = out_count[mask ^ low] + adj[low.bit_length() - 1]
    member = np.zeros((n, full), dtype=np.int32)
    for v in range(n):
        member[v, :] = (np.arange(full) >> v) & 1
    counts = out_count @ member
    pop = np.array([bin(m).count("1") for m in range(full)], dtype=np.int64)
    return counts, pop


def _blocked_violations(report: DiscrepancyReport, name: str, counts, pop,
                        gate_fn, bound_fn, metric_fn, block: int = 256) -> None:
    """Scan all subset pairs block-by-block to bound peak memory."""
    full = counts.shape[0]
    p2 = pop[None, :].astype(np.float64)
    for start in range(0, full, block):
        stop = min(start + block, full)
        p1 = pop[start:stop, None].astype(np.float64)
        prod = p1 * p2
        gate = gate_fn(p1, p2, prod)
        report.tested[name] = report.tested.get(name, 0) + int(gate.sum())
        bound = bound_fn(prod)
        metric = metric_fn(counts[start:stop], prod)
        bad = gate & (metric > bound)
        idx = np.argwhere(bad)
        if not idx.size:
            continue
        report.violations[name] = report.violations.get(name, 0) + len(idx)
        for r, m2 in idx[:200]:
            rec = PairRecord(int(pop[start + r]), int(pop[m2]),
                             int(counts[start + r, m2]), float(bound[r, m2]), name,
                             False, float(bound[r, m2] - metric[r, m2]))
            if len(report.records) < 500:
                report.records.append(rec)
            if report.worst is None or rec.margin < report.worst.margin:
                report.worst = rec


def _exhaustive_scan(d: Digraph, gate, size_cap, centred_bound, cap_bound, m3) -> DiscrepancyReport:
    n = d.n
    counts, pop = _pair_counts(d)
    report = DiscrepancyReport(exhaustive=True)
    _blocked_violations(
        report, "centred", counts, pop,
        gate_fn=lambda p1, p2, prod: prod >= gate,
        bound_fn=lambda prod: 4.0 * np.sqrt(prod * m3 / n),
        metric_fn=lambda c, prod: np.abs(c - prod * m3 / (n * n)),
    )
    _blocked_violations(
        report, "cap", counts, pop,
        gate_fn=lambda p1, p2, prod: (p1 <= size_cap) & (p2 <= size_cap),
        bound_fn=lambda prod: (4.0 * m3 / (5.0 * n)) * np.sqrt(prod),
        metric_fn=lambda c, prod: c.astype(np.float64),
    )
    return report


@dataclass
class GkReport:
    """Degree-window and subset-bound hypotheses for the 1-factor count bound.

    ``r_over_loglog`` is reported (not gated on): the count bound is only
    meaningful when the target degree dwarfs log log n.
    """

    degree_ok: bool
    degree_lo: float
    degree_hi: float
    degree_offenders: list
    r_over_loglog: float
    discrepancy: DiscrepancyReport

    @property
    def passed(self) -> bool:
        return self.degree_ok and self.discrepancy.passed


def gk_hypotheses(d: Digraph, r: float, samples: int = 10_000, seed: int = 0) -> GkReport:
    """Degrees within (1 +/- 4/loglog n) r, and e(X1,X2) <= (4r/5) sqrt(|X1||X2|)
    for subset pairs with both sizes at most 3n/5."""
    if r <= 0:
        raise DomainError(f"target degree must be positive, got {r}")
    n = d.n
    eps = 4.0 / math.log(math.log(n)) if n >= 16 else math.inf
    lo, hi = (1 - eps) * r, (1 + eps) * r
    outd, ind = d.degrees()
    offenders = sorted(
        int(v) for v in range(n)
        if not (lo <= outd[v] <= hi) or not (lo <= ind[v] <= hi)
    )
    size_cap = math.floor(0.6 * n)

    def bound(prod: float) -> float:
        return 0.8 * r * math.sqrt(prod)

    if n <= EXHAUSTIVE_MAX_N:
        disc = _exhaustive_gk(d, size_cap, r)
    else:
        disc = DiscrepancyReport(exhaustive=False)
        rng = make_generator(seed)
        us, vs = _edge_arrays(d)
        for _ in range(samples):
            s1, s2 = int(rng.integers(0, size_cap + 1)), int(rng.integers(0, size_cap + 1))
            x1 = rng.permutation(n)[:s1]
            x2 = rng.permutation(n)[:s2]
            in1 = np.zeros(n, dtype=bool); in1[x1] = True
            in2 = np.zeros(n, dtype=bool); in2[x2] = True
            e = int(np.count_nonzero(in1[us] & in2[vs])) if us.size else 0
            b = bound(s1 * s2)
            disc.note(PairRecord(s1, s2, e, b, "gk-subset", e <= b, b - e), True)
    loglog = math.log(math.log(n)) if n >= 3 else float("nan")
    return GkReport(not offenders, lo, hi, offenders, r / loglog, disc)


def _exhaustive_gk(d: Digraph, size_cap: int, r: float) -> DiscrepancyReport:
    counts, pop = _pair_counts(d)
    report = DiscrepancyReport(exhaustive=True)
    _blocked_violations(
        report, "gk-subset", counts, pop,
        gate_fn=lambda p1, p2, prod: (p1 <= size_cap) & (p2 <= size_cap),
        bound_fn=lambda prod: 0.8 * r * np.sqrt(prod),
        metric_fn=lambda c, prod: c.astype(np.float64),
    )
    return report


# -- greedy degree regularisation ----------------------------------------------------


@dataclass
class RegularizedInstance:
    active_left: frozenset
    active_right: frozenset
    removed: list               # matching pairs (left, right), in removal order
    out_degrees: dict           # surviving left vertex -> degree into active right
    in_degrees: dict            # surviving right vertex -> degree from active left


def regularize_degrees(g: Digraph, m: OneFactor, window_eps: float, target: float) -> RegularizedInstance:
    """Repeatedly remove the matching pair of any vertex whose bipartite
    degree falls outside (1 +/- window_eps) * target.

    Left degrees are out-degrees into the surviving right side; right degrees
    are in-degrees from the surviving left side.  Termination is guaranteed:
    every step removes one pair.
    """
    n = g.n
    if m.n != n:
        raise DomainError("matching size differs from the digraph order")
    lo, hi = (1 - window_eps) * target, (1 + window_eps) * target
    inv = [0] * n
    for v, w in enumerate(m.image):
        inv[w] = v
    active_left = set(range(n))
    active_right = set(range(n))
    outd = {v: g.out_degree(v) for v in range(n)}
    ind = {v: g.in_degree(v) for v in range(n)}
    removed: list[tuple[int, int]] = []

    def bad_left(v):
        return not (lo <= outd[v] <= hi)

    def bad_right(v):
        return not (lo <= ind[v] <= hi)

    while True:
        v = next((u for u in sorted(active_left) if bad_left(u)), None)
        side = "left"
        if v is None:
            v = next((w for w in sorted(active_right) if bad_right(w)), None)
            side = "right"
        if v is None:
            break
        left = v if side == "left" else inv[v]
        right = m.image[left]
        removed.append((left, right))
        active_left.discard(left)
        active_right.discard(right)
        for w in g.out_neighbors(left):
            if w in active_right:
                ind[w] -= 1
        for u in g.in_neighbors(right):
            if u in active_left:
                outd[u] -= 1
    return RegularizedInstance(
        frozenset(active_left), frozenset(active_right), removed,
        {v: outd[v] for v in sorted(active_left)},
        {v: ind[v] for v in sorted(active_right)},
    )


# -- relabeling --------------------------------------------------------------------


def _check_permutation(sigma: Sequence[int], n: int) -> list[int]:
    s = [int(x) for x in sigma]
    if sorted(s) != list(range(n)):
        raise DomainError("sigma is not a permutation of the vertex set")
    return s


def relabel(d: Digraph, sigma: Sequence[int]) -> Digraph:
    """Map every edge (v, w) to (v, sigma(w)).

    Relabeling only the head side can create loops from a loopless input;
    the result allows loops exactly when one appears.
    """
    s = _check_permutation(sigma, d.n)
    edges = [(u, s[v]) for u, v in d.edges()]
    loops = d.allow_loops or any(u == v for u, v in edges)
    return Digraph(d.n, edges, allow_loops=loops)


def relabel_factor(f: OneFactor, sigma: Sequence[int]) -> OneFactor:
    """sigma composed with the successor map."""
    s = _check_permutation(sigma, f.n)
    return OneFactor([s[w] for w in f.image])


# -- random permutation statistics -----------------------------------------------------


@dataclass
class PermutationStats:
    n: int
    trials: int
    fixed_point_histogram: dict
    mean_fixed_points: float
    cycle_count_mean: float
    cycle_count_sd: float
    many_cycles_threshold: float
    fraction_many_cycles: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "trials": self.trials,
            "fixed_point_histogram": {str(k): v for k, v in sorted(self.fixed_point_histogram.items())},
            "mean_fixed_points": self.mean_fixed_points,
            "cycle_count_mean": self.cycle_count_mean,
            "cycle_count_sd": self.cycle_count_sd,
            "many_cycles_threshold": self.many_cycles_threshold,
            "fraction_many_cycles": self.fraction_many_cycles,
        }


def permutation_cycle_stats(n: int, trials: int, seed: int = 0) -> PermutationStats:
    """Fixed-point and cycle-count statistics of uniform random permutations.

    Permutations are drawn in batches; cycle counts come from leader
    counting (a vertex is counted when it is the minimum of its cycle) via
    pointer doubling, so a batch costs O(n log n) vector work.
    """
    if trials < 1:
        raise DomainError("need at least one trial")
    rng = make_generator(seed)
    hist: dict[int, int] = {}
    fp_total = 0
    cyc_sum = 0.0
    cyc_sumsq = 0.0
    threshold = 2.0 * math.log(n)
    many = 0
    batch = max(1, min(trials, 1_000_000 // max(n, 1)))
    left = trials
    idx = np.arange(n)
    while left > 0:
        b = min(batch, left)
        perms = rng.permuted(np.tile(idx, (b, 1)), axis=1)
        fixed = (perms == idx).sum(axis=1)
        for k, cnt in zip(*np.unique(fixed, return_counts=True)):
            hist[int(k)] = hist.get(int(k), 0) + int(cnt)
        fp_total += int(fixed.sum())
        cycles = _cycle_counts(perms)
        cyc_sum += float(cycles.sum())
        cyc_sumsq += float((cycles.astype(np.float64) ** 2).sum())
        many += int((cycles >= threshold).sum())
        left -= b
    mean_c = cyc_sum / trials
    var_c = max(0.0, cyc_sumsq / trials - mean_c * mean_c)
    return PermutationStats(
        n=n, trials=trials, fixed_point_histogram=hist,
        mean_fixed_points=fp_total / trials,
        cycle_count_mean=mean_c, cycle_count_sd=math.sqrt(var_c),
        many_cycles_threshold=threshold,
        fraction_many_cycles=many / trials,
    )


def _cycle_counts(perms: np.ndarray) -> np.ndarray:
    """Number of cycles per row: count vertices that are their cycle's minimum."""
    b, n = perms.shape
    power = perms
    mins = np.minimum(np.tile(np.arange(n), (b, 1)), perms)
    steps = max(1, math.ceil(math.log2(max(n, 2))))
    for _ in range(steps):
        mins = np.minimum(mins, np.take_along_axis(mins, power, axis=1))
        power = np.take_along_axis(power, power, axis=1)
    return (mins == np.arange(n)).sum(axis=1)


def fixed_point_reference(n: int, k_max: Optional[int] = None) -> list[Fraction]:
    """Exact distribution of fixed-point counts of a uniform permutation."""
    k_max = n if k_max is None else min(k_max, n)
    total = math.factorial(n)
    return [Fraction(rencontres(n, k), total) for k in range(k_max + 1)]


def tv_distance(histogram: dict, reference: Sequence[Fraction], trials: int) -> float:
    """Total-variation distance between an empirical histogram and an exact
    reference distribution over {0, 1, ..., len(reference)-1}."""
    acc = Fraction(0)
    seen = 0
    for k, p in enumerate(reference):
        cnt = histogram.get(k, 0)
        seen += cnt
        acc += abs(Fraction(cnt, trials) - p)
    acc += Fraction(trials - seen, trials)  # mass observed beyond the reference support
    return float(acc / 2)


def harmonic_number(n: int) -> float:
    return math.fsum(1.0 / k for k in range(1, n + 1))
