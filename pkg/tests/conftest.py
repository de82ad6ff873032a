"""Shared fixtures and independent oracles used across the test suite."""

from __future__ import annotations

from collections import deque

import numpy as np
import pytest

from lpdlab.factor_graph import EnsembleParams, FactorGraph, sample_bit_regular
from lpdlab.lp_decoder import gf2_nullspace_basis, gf2_rank


def make_graph(n: int, m: int, var_adj) -> FactorGraph:
    return FactorGraph(n, m, var_adj)


def random_small_code(
    rng: np.random.Generator,
    n_range=(16, 28),
    d_v_choices=(3, 4),
    rates=(0.4, 0.5),
    max_dc: int = 10,
    max_nullspace: int = 18,
    attempts: int = 200,
) -> FactorGraph:
    """Random regular code within the small-instance budgets, by rejection."""
    for _ in range(attempts):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        d_v = int(rng.choice(d_v_choices))
        rate = float(rng.choice(rates))
        params = EnsembleParams(rate=rate, d_v=d_v, n=n, seed=int(rng.integers(2**31)))
        graph = sample_bit_regular(params)
        if graph.max_check_degree > max_dc:
            continue
        k = graph.n - gf2_rank(graph.check_masks(), graph.n)
        if k > max_nullspace:
            continue
        return graph
    raise RuntimeError("could not sample a small code within the budgets")


def sample_codewords(graph: FactorGraph, rng: np.random.Generator, count: int) -> list[np.ndarray]:
    """Random codewords from the GF(2) nullspace basis (independent oracle path)."""
    basis = gf2_nullspace_basis(graph.check_masks(), graph.n)
    out = []
    for _ in range(count):
        word = 0
        for vec in basis:
            if rng.integers(2):
                word ^= vec
        out.append(np.array([(word >> i) & 1 for i in range(graph.n)], dtype=np.int8))
    return out


def edmonds_karp(n_nodes: int, edges: list[tuple[int, int, int]], s: int, t: int) -> int:
    """BFS augmenting-path max flow; the independent oracle for flow values."""
    cap = {}
    adj: list[list[int]] = [[] for _ in range(n_nodes)]
    for u, v, c in edges:
        if (u, v) not in cap:
            adj[u].append(v)
            adj[v].append(u)
            cap[(u, v)] = 0
            cap[(v, u)] = 0
        cap[(u, v)] += c
    flow = 0
    while True:
        parent = {s: None}
        queue = deque([s])
        while queue and t not in parent:
            u = queue.popleft()
            for v in adj[u]:
                if v not in parent and cap[(u, v)] > 0:
                    parent[v] = u
                    queue.append(v)
        if t not in parent:
            return flow
        path = []
        v = t
        while parent[v] is not None:
            path.append((parent[v], v))
            v = parent[v]
        bottleneck = min(cap[e] for e in path)
        for e in path:
            cap[e] -= bottleneck
            cap[(e[1], e[0])] += bottleneck
        flow += bottleneck


def parity_oracle(graph: FactorGraph, y) -> bool:
    """Dense mod-2 matrix-vector check, independent of the bitset path."""
    H = np.zeros((graph.m, graph.n), dtype=np.int64)
    for a in range(graph.m):
        for i in graph.check_adj[a]:
            H[a, i] = 1
    return bool(np.all((H @ np.asarray(y, dtype=np.int64)) % 2 == 0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
