import itertools

import numpy as np

from hamcount.matching import hopcroft_karp


def brute_max_matching(n_left, n_right, adj):
    best = 0
    rights = list(range(n_right))
    for perm in itertools.permutations(rights):
        best = max(best, sum(1 for u in range(min(n_left, n_right))
                             if perm[u] in adj[u]))
        if best == min(n_left, n_right):
            break
    return best


class TestHopcroftKarp:
    def test_perfect_matching(self):
        size, ml, mr = hopcroft_karp(3, 3, [[0, 1], [0], [2]])
        assert size == 3
        assert sorted(ml) == [0, 1, 2]
        assert all(mr[ml[u]] == u for u in range(3))

    def test_deficient(self):
        size, _, _ = hopcroft_karp(2, 2, [[0], [0]])
        assert size == 1

    def test_empty(self):
        size, ml, _ = hopcroft_karp(3, 3, [[], [], []])
        assert size == 0 and ml == [-1, -1, -1]

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(80):
            n = 7
            adj = [sorted(set(rng.integers(0, n, size=rng.integers(0, 4)).tolist()))
                   for _ in range(n)]
            size, ml, mr = hopcroft_karp(n, n, adj)
            assert size == brute_max_matching(n, n, adj)
            # returned matching is consistent and uses real edges
            for u, v in enumerate(ml):
                if v != -1:
                    assert v in adj[u] and mr[v] == u

    def test_deep_augmenting_paths_iterative(self):
        # long alternating chain: would overflow a recursive DFS at scale
        n = 5000
        adj = [[u, u + 1] if u + 1 < n else [u] for u in range(n)]
        size, _, _ = hopcroft_karp(n, n, adj)
        assert size == n
