"""Request numbers, (p,q)-matching via integral max-flow, contraction search.

A (p,q)-matching gives every flipped bit p private checks from its own
neighborhood and every contaminated unflipped bit j enough private checks
from N(F) to keep q clean neighbors: X_j = max(q - (deg_j - Z_j), 0) where
Z_j counts j's edges into N(F). Checks are used at most once. By Hall's
theorem (max-flow/min-cut on the unit network), the matching exists iff no
pair (S1, S2) of flipped/requesting-unflipped subsets has fewer usable
neighbors than requests.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from .channel import FlipPattern
from .factor_graph import FactorGraph

__all__ = [
    "MatchingError",
    "ContractionBudgetError",
    "RequestVector",
    "MatchingResult",
    "ContractionWitness",
    "validate_pq_params",
    "request_numbers",
    "find_pq_matching",
    "validate_matching",
    "find_contraction_bruteforce",
]


class MatchingError(ValueError):
    """Raised on parameter violations or structurally invalid matchings."""


class ContractionBudgetError(RuntimeError):
    """Raised when contraction enumeration would exceed its pair budget."""


def validate_pq_params(p: int, q: int, d_v: int) -> None:
    """Enforce p >= q, 2p + q > 2*d_v and d_v >= p + 2, naming the failure."""
    if p < q:
        raise MatchingError(f"requires p >= q, got p={p} < q={q}")
    if 2 * p + q <= 2 * d_v:
        raise MatchingError(f"requires 2p + q > 2*d_v, got 2*{p} + {q} = {2 * p + q} <= {2 * d_v}")
    if d_v < p + 2:
        raise MatchingError(f"requires d_v >= p + 2, got d_v={d_v} < {p + 2}")


@dataclass(frozen=True)
class RequestVector:
    """Per-variable matching demand: p for flipped bits, X_j for the rest."""

    p: int
    q: int
    requests: tuple[int, ...]
    z: tuple[int, ...]          # |N(j) & N(F)| for every variable

    @property
    def total(self) -> int:
        return sum(self.requests)


@dataclass(frozen=True)
class MatchingResult:
    """Explicit assignment of disjoint check sets to requesting variables."""

    assignment: dict[int, frozenset[int]]

    def used_checks(self) -> frozenset[int]:
        out: set[int] = set()
        for checks in self.assignment.values():
            out.update(checks)
        return frozenset(out)


@dataclass(frozen=True)
class ContractionWitness:
    """Pair (S1, S2) whose joint usable neighborhood is short of its requests."""

    s1: tuple[int, ...]
    s2: tuple[int, ...]
    neighborhood_size: int
    total_requests: int


def request_numbers(graph: FactorGraph, flips: FlipPattern, p: int, q: int) -> RequestVector:
    """Z and per-bit request counts for the given flipped set."""
    if flips.n != graph.n:
        raise MatchingError("flip pattern length does not match graph")
    d_v = graph.max_var_degree
    validate_pq_params(p, q, d_v)
    nf = set()
    for i in flips.flipped:
        nf.update(graph.var_adj[i])
    z = []
    requests = []
    for j in range(graph.n):
        zj = sum(1 for a in graph.var_adj[j] if a in nf)
        z.append(zj)
        if j in flips.flipped:
            requests.append(p)
        else:
            clean = graph.var_degree(j) - zj
            requests.append(max(q - clean, 0))
    return RequestVector(p=p, q=q, requests=tuple(requests), z=tuple(z))


class _Dinic:
    """Blocking-flow max-flow; unit capacities on the check side."""

    def __init__(self, n_nodes: int):
        self.n = n_nodes
        self.head: list[list[int]] = [[] for _ in range(n_nodes)]
        self.to: list[int] = []
        self.cap: list[int] = []

    def add_edge(self, u: int, v: int, cap: int) -> int:
        idx = len(self.to)
        self.head[u].append(idx)
        self.to.append(v)
        self.cap.append(cap)
        self.head[v].append(idx + 1)
        self.to.append(u)
        self.cap.append(0)
        return idx

    def max_flow(self, s: int, t: int) -> int:
        flow = 0
        while True:
            level = [-1] * self.n
            level[s] = 0
            queue = [s]
            for u in queue:
                for e in self.head[u]:
                    v = self.to[e]
                    if self.cap[e] > 0 and level[v] < 0:
                        level[v] = level[u] + 1
                        queue.append(v)
            if level[t] < 0:
                return flow
            it = [0] * self.n

            def dfs(u: int, pushed: int) -> int:
                if u == t:
                    return pushed
                while it[u] < len(self.head[u]):
                    e = self.head[u][it[u]]
                    v = self.to[e]
                    if self.cap[e] > 0 and level[v] == level[u] + 1:
                        got = dfs(v, min(pushed, self.cap[e]))
                        if got > 0:
                            self.cap[e] -= got
                            self.cap[e ^ 1] += got
                            return got
                    it[u] += 1
                return 0

            while True:
                pushed = dfs(s, 1 << 60)
                if pushed == 0:
                    break
                flow += pushed


def find_pq_matching(graph: FactorGraph, flips: FlipPattern, p: int, q: int) -> MatchingResult | None:
    """Integral max-flow construction of a (p,q)-matching, or None.

    Network: source -> variable (capacity = request), variable -> eligible
    check (capacity 1; N(i) for flipped i, N(j) & N(F) for unflipped j),
    check -> sink (capacity 1). A matching exists iff the max flow saturates
    every request.
    """
    req = request_numbers(graph, flips, p, q)
    requesters = [j for j in range(graph.n) if req.requests[j] > 0]
    nf = sorted(set().union(*(graph.var_adj[i] for i in flips.flipped)) if flips.flipped else set())
    check_id = {a: idx for idx, a in enumerate(nf)}
    if not requesters:
        return MatchingResult(assignment={})
    n_nodes = 1 + len(requesters) + len(nf) + 1
    sink = n_nodes - 1
    net = _Dinic(n_nodes)
    var_edges: dict[int, list[tuple[int, int]]] = {}
    for vi, j in enumerate(requesters):
        net.add_edge(0, 1 + vi, req.requests[j])
        eligible = graph.var_adj[j] if j in flips.flipped else [a for a in graph.var_adj[j] if a in check_id]
        edges = []
        for a in eligible:
            e = net.add_edge(1 + vi, 1 + len(requesters) + check_id[a], 1)
            edges.append((a, e))
        var_edges[j] = edges
    for idx in range(len(nf)):
        net.add_edge(1 + len(requesters) + idx, sink, 1)
    flow = net.max_flow(0, sink)
    if flow != req.total:
        return None
    assignment = {
        j: frozenset(a for a, e in var_edges[j] if net.cap[e] == 0)
        for j in requesters
    }
    return MatchingResult(assignment=assignment)


def validate_matching(
    graph: FactorGraph, flips: FlipPattern, matching: MatchingResult, p: int, q: int
) -> None:
    """Raise MatchingError unless the assignment meets every invariant."""
    req = request_numbers(graph, flips, p, q)
    nf = set()
    for i in flips.flipped:
        nf.update(graph.var_adj[i])
    seen: set[int] = set()
    for j, checks in matching.assignment.items():
        if not checks.isdisjoint(seen):
            raise MatchingError(f"variable {j}: check reused across the matching")
        seen.update(checks)
        if j in flips.flipped:
            if len(checks) != p:
                raise MatchingError(f"flipped bit {j} matched with {len(checks)} checks, needs {p}")
            if not checks <= set(graph.var_adj[j]):
                raise MatchingError(f"flipped bit {j} matched outside its neighborhood")
        else:
            need = req.requests[j]
            if len(checks) != need:
                raise MatchingError(f"unflipped bit {j} matched with {len(checks)} checks, needs {need}")
            if not checks <= (set(graph.var_adj[j]) & nf):
                raise MatchingError(f"unflipped bit {j} matched outside N(j) & N(F)")
    for j in range(graph.n):
        if req.requests[j] > 0 and len(matching.assignment.get(j, frozenset())) != req.requests[j]:
            raise MatchingError(f"variable {j} with {req.requests[j]} requests is unmatched")


def find_contraction_bruteforce(
    graph: FactorGraph,
    flips: FlipPattern,
    p: int,
    q: int,
    size_cap: int | None = None,
    budget: int = 2_000_000,
) -> ContractionWitness | None:
    """Smallest contracting pair (S1, S2), or None when every pair has enough
    neighbors (equivalently, a matching exists).

    Enumerates by total size |S1| + |S2| ascending, then |S1| ascending, then
    lexicographically, so the first hit is a minimal witness. Only unflipped
    bits with positive requests are considered for S2: zero-request bits
    never appear in a minimal witness. Contraction uses the strict
    inequality |N(S1) u (N(S2) & N(F))| < p|S1| + sum X_j.
    """
    req = request_numbers(graph, flips, p, q)
    fs = sorted(flips.flipped)
    support = [j for j in range(graph.n) if j not in flips.flipped and req.requests[j] > 0]
    masks = graph.var_masks()
    nf_mask = 0
    for i in fs:
        nf_mask |= masks[i]
    cap = size_cap if size_cap is not None else len(fs) + len(support)

    def subsets_by_size(items, getmask, getreq, max_size):
        per_size: list[list[tuple[int, int, tuple[int, ...]]]] = [[] for _ in range(max_size + 1)]
        per_size[0].append((0, 0, ()))
        for k in range(1, max_size + 1):
            for combo in combinations(items, k):
                m = 0
                r = 0
                for j in combo:
                    m |= getmask(j)
                    r += getreq(j)
                per_size[k].append((m, r, combo))
        return per_size

    s1_sets = subsets_by_size(fs, lambda j: masks[j], lambda j: p, min(len(fs), cap))
    s2_sets = subsets_by_size(
        support, lambda j: masks[j] & nf_mask, lambda j: req.requests[j], min(len(support), cap)
    )
    examined = 0
    for total in range(1, cap + 1):
        for a in range(0, min(total, len(fs)) + 1):
            b = total - a
            if b > len(support):
                continue
            for m1, r1, s1 in s1_sets[a]:
                for m2, r2, s2 in s2_sets[b]:
                    examined += 1
                    if examined > budget:
                        raise ContractionBudgetError(
                            f"examined {examined} pairs, budget is {budget}"
                        )
                    union = m1 | m2
                    nbrs = union.bit_count()
                    if nbrs < r1 + r2:
                        return ContractionWitness(
                            s1=s1, s2=s2, neighborhood_size=nbrs, total_requests=r1 + r2
                        )
    return None
