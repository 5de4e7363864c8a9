import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hamcount.digraph import (
    CoupledProcess,
    Digraph,
    EdgeSequence,
    couple,
    gen_binomial,
    gen_process,
    hitting_time,
    min_degrees,
    read_edge_list,
    write_edge_list,
)
from hamcount.errors import DomainError, FormatError


class TestDigraph:
    def test_rejects_duplicates(self):
        with pytest.raises(DomainError):
            Digraph(3, [(0, 1), (0, 1)])

    def test_rejects_loop_when_loopless(self):
        with pytest.raises(DomainError):
            Digraph(3, [(1, 1)])

    def test_rejects_out_of_range(self):
        with pytest.raises(DomainError):
            Digraph(3, [(0, 3)])

    def test_adjacency_audit(self):
        d = Digraph(4, [(0, 1), (1, 2), (2, 0), (3, 3)], allow_loops=True)
        assert d.audit()
        assert d.out_neighbors(0) == (1,)
        assert d.in_neighbors(0) == (2,)

    def test_complete_counts(self):
        assert Digraph.complete(5).edge_count == 20
        assert Digraph.complete(5, allow_loops=True).edge_count == 25


class TestGenBinomial:
    def test_p_zero_empty(self):
        assert gen_binomial(5, 0.0, False, 1).edge_count == 0

    def test_p_one_complete(self):
        assert gen_binomial(5, 1.0, False, 7).edge_count == 20

    def test_p_out_of_range(self):
        with pytest.raises(DomainError):
            gen_binomial(5, 1.5, False, 1)

    def test_seed_reproducible(self):
        a = gen_binomial(30, 0.3, True, 42)
        b = gen_binomial(30, 0.3, True, 42)
        assert a == b
        assert a != gen_binomial(30, 0.3, True, 43)

    def test_mean_edge_count(self):
        # mean over 200 seeds within 4 single-draw standard deviations
        sizes = [gen_binomial(100, 0.5, False, s).edge_count for s in range(200)]
        sd = math.sqrt(9900 * 0.25)
        assert abs(np.mean(sizes) - 4950) < 4 * sd

    def test_sparse_path_matches_distribution(self):
        # large-universe branch: n^2 > 2^22 forces the two-stage sampler
        d = gen_binomial(3000, 1e-5, False, 5)
        assert 20 <= d.edge_count <= 160  # Bin(9e6, 1e-5) far tails excluded


class TestEdgeProcess:
    def test_universe_size_and_permutation(self):
        seq = gen_process(3, "loopful", 7)
        order = seq.full_order()
        assert len(order) == 9
        assert len(set(order)) == 9
        for v in range(3):
            assert (v, v) in order

    def test_small_universe(self):
        seq = gen_process(2, "loopless", 3)
        assert sorted(seq.full_order()) == [(0, 1), (1, 0)]
        assert seq.prefix(2).edge_count == 2

    def test_determinism(self):
        assert gen_process(4, "loopless", 1).full_order() == gen_process(4, "loopless", 1).full_order()
        assert gen_process(4, "loopless", 1).full_order() != gen_process(4, "loopless", 2).full_order()

    def test_rejects_small_n(self):
        with pytest.raises(DomainError):
            gen_process(1, "loopless", 0)

    def test_rejects_bad_universe(self):
        with pytest.raises(DomainError):
            gen_process(4, "maybe-loops", 0)

    @given(st.integers(2, 8), st.integers(0, 50))
    @settings(max_examples=30, deadline=None)
    def test_prefix_monotone(self, n, seed):
        seq = gen_process(n, "loopless", seed)
        universe = n * (n - 1)
        prev: set = set()
        for m in range(universe + 1):
            cur = set(seq.pairs(m))
            assert len(cur) == m
            assert prev <= cur
            prev = cur

    def test_lazy_prefix_determinism(self):
        # n large enough that the universe is materialised lazily
        a = gen_process(3000, "loopless", 42)
        b = gen_process(3000, "loopless", 42)
        a.ensure(64)
        b.ensure(120_000)
        assert a.pairs(64) == b.pairs(64)

    def test_from_order_validates(self):
        with pytest.raises(DomainError):
            EdgeSequence.from_order(2, False, [(0, 1), (0, 1)])
        seq = EdgeSequence.from_order(2, False, [(1, 0), (0, 1)])
        assert seq.pair(0) == (1, 0)


class TestCoupling:
    def test_loop_deletion_preserves_order(self):
        lf = EdgeSequence.from_order(2, True, [(0, 0), (0, 1), (1, 0), (1, 1)])
        cp = couple(lf)
        assert cp.loopless.pairs(2) == [(0, 1), (1, 0)]

    def test_requires_loopful(self):
        with pytest.raises(DomainError):
            couple(gen_process(3, "loopless", 1))

    @given(st.integers(0, 100))
    @settings(max_examples=25, deadline=None)
    def test_invariant_exhaustive(self, seed):
        cp = couple(gen_process(5, "loopful", seed))
        assert cp.audit_all()

    def test_invariant_larger_n(self):
        cp = couple(gen_process(40, "loopful", 9))
        for m in range(0, 40 * 39 + 1, 7):
            assert cp.audit(m)

    def test_invariant_exhaustive_n50(self):
        # full m-scan at the upper end of the documented exhaustive range
        cp = couple(gen_process(50, "loopful", 3))
        n = 50
        loopless_iter = iter(cp.loopless.pairs(n * (n - 1)))
        seen_loopless: set = set()
        seen_loopful_nonloop: set = set()
        for m, edge in enumerate(cp.loopful.pairs(n * n), start=1):
            if edge[0] != edge[1]:
                seen_loopful_nonloop.add(edge)
            if m <= n * (n - 1):
                seen_loopless.add(next(loopless_iter))
                assert seen_loopful_nonloop <= seen_loopless

    def test_loops_first_strict_containment(self):
        lf = EdgeSequence.from_order(2, True, [(0, 0), (1, 1), (0, 1), (1, 0)])
        cp = couple(lf)
        ful_nonloop = {p for p in cp.loopful.pairs(2) if p[0] != p[1]}
        less = set(cp.loopless.pairs(2))
        assert ful_nonloop < less  # strictly smaller here


class TestHittingTime:
    def test_n2_always_two(self):
        for s in range(10):
            assert hitting_time(gen_process(2, "loopless", s)) == 2

    def test_constructed_position(self):
        # (2,0) is the only edge leaving vertex 2 and appears seventh
        order = [(0, 1), (0, 2), (1, 0), (1, 2), (0, 0), (1, 1), (2, 0), (2, 1), (2, 2)]
        seq = EdgeSequence.from_order(3, True, order)
        assert hitting_time(seq) == 7

    def test_boundary_is_tight(self):
        for seed in range(20):
            seq = gen_process(6, "loopless", seed)
            m = hitting_time(seq)
            assert min_degrees(seq.prefix(m)) >= (1, 1)
            before = min_degrees(seq.prefix(m - 1))
            assert before[0] == 0 or before[1] == 0

    def test_coupled_large_n(self):
        cp = couple(gen_process(2000, "loopful", 3))
        m_loopful = hitting_time(cp.loopful)
        m_loopless = hitting_time(cp.loopless)
        logn = 2000 * math.log(2000)
        assert 0.8 * logn < m_loopful < 1.6 * logn
        assert 0.8 * logn < m_loopless < 1.6 * logn


class TestMinDegrees:
    def test_empty(self):
        assert min_degrees(Digraph(3)) == (0, 0)

    def test_complete(self):
        assert min_degrees(Digraph.complete(4)) == (3, 3)

    def test_loop_counts_both_ways(self):
        d = Digraph(3, [(1, 1)], allow_loops=True)
        assert min_degrees(d) == (0, 0)
        assert d.out_degree(1) == 1
        assert d.in_degree(1) == 1


class TestEdgeListFormat:
    def roundtrip(self, d: Digraph, one_indexed=False) -> Digraph:
        buf = io.StringIO()
        write_edge_list(d, buf, one_indexed=one_indexed)
        buf.seek(0)
        return read_edge_list(buf, one_indexed=one_indexed)

    def test_roundtrip(self):
        d = gen_binomial(12, 0.3, True, 5)
        assert self.roundtrip(d) == d
        assert self.roundtrip(d, one_indexed=True) == d

    def test_rejects_bad_header(self):
        with pytest.raises(FormatError):
            read_edge_list(io.StringIO("vertices 3 loops 0\n"))

    def test_rejects_duplicate(self):
        with pytest.raises(FormatError):
            read_edge_list(io.StringIO("n 3 loops 0\n0 1\n0 1\n"))

    def test_rejects_out_of_range(self):
        with pytest.raises(FormatError):
            read_edge_list(io.StringIO("n 3 loops 0\n0 3\n"))

    def test_rejects_loop_in_loopless(self):
        with pytest.raises(FormatError):
            read_edge_list(io.StringIO("n 3 loops 0\n1 1\n"))
