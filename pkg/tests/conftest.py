import itertools

import numpy as np
import pytest

from hamcount.digraph import Digraph


def brute_force_hamilton_count(d: Digraph) -> int:
    """Independent oracle: enumerate cyclic orders anchored at vertex 0."""
    n = d.n
    if n == 1:
        return 0
    count = 0
    for perm in itertools.permutations(range(1, n)):
        walk = (0,) + perm
        if all(d.has_edge(walk[i], walk[(i + 1) % n]) for i in range(n)):
            count += 1
    return count


def brute_force_factor_count(d: Digraph) -> int:
    """Independent oracle: enumerate all successor permutations."""
    n = d.n
    count = 0
    for perm in itertools.permutations(range(n)):
        if all(d.has_edge(v, perm[v]) for v in range(n)):
            count += 1
    return count


def random_digraph(rng: np.random.Generator, n: int, p: float, allow_loops: bool) -> Digraph:
    edges = [
        (u, v)
        for u in range(n)
        for v in range(n)
        if (allow_loops or u != v) and rng.random() < p
    ]
    return Digraph(n, edges, allow_loops=allow_loops)


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)
