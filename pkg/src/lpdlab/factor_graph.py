"""Factor-graph data model, bit-regular ensemble sampling, expansion checking, alist I/O."""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from math import comb, floor
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "GraphError",
    "AlistFormatError",
    "ExpansionBudgetError",
    "FactorGraph",
    "EnsembleParams",
    "ExpansionSpec",
    "sample_bit_regular",
    "neighborhood",
    "check_expansion_exhaustive",
    "read_alist",
    "write_alist",
]


class GraphError(ValueError):
    """Raised when adjacency data violates the factor-graph invariants."""


class AlistFormatError(ValueError):
    """Raised on malformed alist input; carries the offending 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ExpansionBudgetError(RuntimeError):
    """Raised when exhaustive expansion checking would exceed its enumeration budget."""


class FactorGraph:
    """Bipartite adjacency of a binary linear code: n variables, m checks.

    Immutable after construction; ``check_adj`` is derived as the exact
    transpose of ``var_adj``. Adjacency lists are sorted and duplicate-free
    (simple graph).
    """

    __slots__ = ("n", "m", "var_adj", "check_adj", "_var_masks", "_check_masks")

    def __init__(self, n: int, m: int, var_adj: Sequence[Iterable[int]]):
        if n < 0 or m < 0:
            raise GraphError("node counts must be non-negative")
        if len(var_adj) != n:
            raise GraphError(f"var_adj has {len(var_adj)} rows, expected n={n}")
        adj = []
        check_lists: list[list[int]] = [[] for _ in range(m)]
        for i, nbrs in enumerate(var_adj):
            row = sorted(nbrs)
            for a in row:
                if not 0 <= a < m:
                    raise GraphError(f"variable {i}: check index {a} out of range [0, {m})")
            if len(set(row)) != len(row):
                raise GraphError(f"variable {i}: duplicate check index in adjacency")
            adj.append(tuple(row))
            for a in row:
                check_lists[a].append(i)
        self.n = n
        self.m = m
        self.var_adj: tuple[tuple[int, ...], ...] = tuple(adj)
        self.check_adj: tuple[tuple[int, ...], ...] = tuple(tuple(c) for c in check_lists)
        self._var_masks: tuple[int, ...] | None = None
        self._check_masks: tuple[int, ...] | None = None

    # -- basic queries -------------------------------------------------

    def var_degree(self, i: int) -> int:
        return len(self.var_adj[i])

    def check_degree(self, a: int) -> int:
        return len(self.check_adj[a])

    @property
    def max_var_degree(self) -> int:
        return max((len(r) for r in self.var_adj), default=0)

    @property
    def max_check_degree(self) -> int:
        return max((len(r) for r in self.check_adj), default=0)

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return tuple((i, a) for i in range(self.n) for a in self.var_adj[i])

    def var_masks(self) -> tuple[int, ...]:
        """Per-variable neighborhoods as int bitmasks over checks (cached)."""
        if self._var_masks is None:
            self._var_masks = tuple(
                sum(1 << a for a in nbrs) for nbrs in self.var_adj
            )
        return self._var_masks

    def check_masks(self) -> tuple[int, ...]:
        """Per-check neighborhoods as int bitmasks over variables (cached)."""
        if self._check_masks is None:
            self._check_masks = tuple(
                sum(1 << i for i in nbrs) for nbrs in self.check_adj
            )
        return self._check_masks

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, FactorGraph)
            and self.n == other.n
            and self.m == other.m
            and self.var_adj == other.var_adj
        )

    def __hash__(self) -> int:
        return hash((self.n, self.m, self.var_adj))

    def __repr__(self) -> str:
        return f"FactorGraph(n={self.n}, m={self.m}, edges={sum(map(len, self.var_adj))})"

    # -- JSON interchange ----------------------------------------------

    def to_json_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "var_adj": [list(r) for r in self.var_adj]}

    @classmethod
    def from_json_dict(cls, d: dict) -> "FactorGraph":
        return cls(int(d["n"]), int(d["m"]), d["var_adj"])

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, s: str) -> "FactorGraph":
        return cls.from_json_dict(json.loads(s))


@dataclass(frozen=True)
class EnsembleParams:
    """Parameters of the bit-degree-regular random ensemble: m = floor((1-rate)*n)."""

    rate: float
    d_v: int
    n: int
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.rate < 1.0:
            raise GraphError(f"rate must lie in (0, 1), got {self.rate}")
        if self.d_v < 1:
            raise GraphError(f"d_v must be >= 1, got {self.d_v}")
        if self.m < self.d_v:
            raise GraphError(
                f"m = floor((1-rate)*n) = {self.m} is smaller than d_v = {self.d_v}"
            )

    @property
    def m(self) -> int:
        return floor((1.0 - self.rate) * self.n)


@dataclass(frozen=True)
class ExpansionSpec:
    """Expansion target: every variable set S with |S| <= mu*n must see >= p_expand*|S| checks."""

    mu: float
    p_expand: float

    def __post_init__(self):
        if not 0.0 < self.mu <= 1.0:
            raise GraphError(f"mu must lie in (0, 1], got {self.mu}")
        if self.p_expand < 0:
            raise GraphError(f"p_expand must be non-negative, got {self.p_expand}")


def sample_bit_regular(params: EnsembleParams, rng: np.random.Generator | None = None) -> FactorGraph:
    """Sample a graph where each variable picks a uniform d_v-subset of checks.

    Neighborhoods are drawn without replacement, independently across
    variables. Deterministic given ``params.seed`` when no rng is passed.
    Two variables may end up with identical neighborhoods; the ensemble
    does not forbid it.
    """
    if rng is None:
        rng = np.random.default_rng(params.seed)
    m = params.m
    var_adj = [np.sort(rng.choice(m, size=params.d_v, replace=False)).tolist() for _ in range(params.n)]
    return FactorGraph(params.n, m, var_adj)


def neighborhood(graph: FactorGraph, variables: Iterable[int]) -> set[int]:
    """Union of the check neighborhoods of the given variables."""
    out: set[int] = set()
    for i in variables:
        if not 0 <= i < graph.n:
            raise GraphError(f"variable index {i} out of range [0, {graph.n})")
        out.update(graph.var_adj[i])
    return out


def _enumeration_cost(n: int, kmax: int) -> int:
    return sum(comb(n, k) for k in range(1, kmax + 1))


def check_expansion_exhaustive(
    graph: FactorGraph,
    spec: ExpansionSpec,
    budget: int = 20_000_000,
) -> tuple[int, ...] | None:
    """Exhaustively verify (mu*n, p_expand)-expansion; None on pass.

    Enumerates every variable subset S with 1 <= |S| <= floor(mu*n) and
    demands |N(S)| >= p_expand*|S|. On failure returns the first violating
    subset in (size, lexicographic) order, so the result has minimum size.
    Raises ExpansionBudgetError up front if the subset count exceeds
    ``budget``; sampling cannot stand in for this universally quantified
    check, so there is no fallback.
    """
    kmax = floor(spec.mu * graph.n)
    if kmax <= 0:
        return None
    kmax = min(kmax, graph.n)
    cost = _enumeration_cost(graph.n, kmax)
    if cost > budget:
        raise ExpansionBudgetError(
            f"subset enumeration needs {cost} evaluations, budget is {budget}"
        )

    degrees = [graph.var_degree(i) for i in range(graph.n)]
    # size 1: |N({i})| = deg(i)
    for i in range(graph.n):
        if degrees[i] < spec.p_expand:
            return (i,)
    if kmax >= 2:
        bad = _violating_pair(graph, degrees, spec.p_expand)
        if bad is not None:
            return bad
    masks = graph.var_masks()
    for k in range(3, kmax + 1):
        need = spec.p_expand * k
        for subset in combinations(range(graph.n), k):
            u = 0
            for i in subset:
                u |= masks[i]
            if u.bit_count() < need:
                return subset
    return None


def _violating_pair(graph: FactorGraph, degrees: list[int], p: float) -> tuple[int, int] | None:
    """First (lexicographic) pair with |N({i,j})| < 2p, or None.

    Pairs with disjoint neighborhoods have |N| = deg_i + deg_j; when the two
    smallest degrees already cover 2p only overlapping pairs can violate, and
    those are found by counting co-occurrences within each check's list.
    """
    need = 2.0 * p
    if graph.n < 2:
        return None
    lo1, lo2 = sorted(degrees)[:2]
    if lo1 + lo2 < need:
        # disjoint pairs may violate; fall back to the full scan
        masks = graph.var_masks()
        for i, j in combinations(range(graph.n), 2):
            if (masks[i] | masks[j]).bit_count() < need:
                return (i, j)
        return None
    overlap: dict[tuple[int, int], int] = {}
    for nbrs in graph.check_adj:
        for i, j in combinations(nbrs, 2):
            key = (i, j) if i < j else (j, i)
            overlap[key] = overlap.get(key, 0) + 1
    violating = [
        pair
        for pair, ov in overlap.items()
        if degrees[pair[0]] + degrees[pair[1]] - ov < need
    ]
    return min(violating) if violating else None


# -- alist interchange -------------------------------------------------


def _parse_int_row(tokens: list[str], line_no: int, what: str) -> list[int]:
    try:
        return [int(t) for t in tokens]
    except ValueError as exc:
        raise AlistFormatError(f"non-integer token in {what}: {exc}", line_no) from None


def read_alist(path: str) -> FactorGraph:
    """Parse a standard alist file (1-based neighbor lists, zero-padded rows)."""
    with open(path, "r", encoding="ascii") as fh:
        raw = fh.read().splitlines()
    lines = [(idx + 1, ln.split()) for idx, ln in enumerate(raw) if ln.strip()]
    if len(lines) < 4:
        raise AlistFormatError("file has fewer than 4 header lines", len(lines))
    ln_no, header = lines[0]
    if len(header) != 2:
        raise AlistFormatError(f"header must be 'n m', got {header!r}", ln_no)
    n, m = _parse_int_row(header, ln_no, "header")
    if n < 0 or m < 0:
        raise AlistFormatError(f"negative dimensions n={n}, m={m}", ln_no)
    if len(lines) != 4 + n + m:
        raise AlistFormatError(
            f"expected {4 + n + m} non-empty lines for n={n}, m={m}, found {len(lines)}",
            lines[-1][0],
        )
    ln_no, maxdeg = lines[1]
    if len(maxdeg) != 2:
        raise AlistFormatError("second line must hold the two maximum degrees", ln_no)
    ln_no, vdeg_tok = lines[2]
    var_degs = _parse_int_row(vdeg_tok, ln_no, "variable degree list")
    if len(var_degs) != n:
        raise AlistFormatError(f"variable degree list has {len(var_degs)} entries, expected {n}", ln_no)
    ln_no, cdeg_tok = lines[3]
    check_degs = _parse_int_row(cdeg_tok, ln_no, "check degree list")
    if len(check_degs) != m:
        raise AlistFormatError(f"check degree list has {len(check_degs)} entries, expected {m}", ln_no)

    var_adj: list[list[int]] = []
    for i in range(n):
        ln_no, tokens = lines[4 + i]
        row = [v for v in _parse_int_row(tokens, ln_no, f"variable {i} neighbor list") if v != 0]
        for v in row:
            if not 1 <= v <= m:
                raise AlistFormatError(f"variable {i}: neighbor index {v} out of range [1, {m}]", ln_no)
        if len(row) != var_degs[i]:
            raise AlistFormatError(
                f"variable {i}: {len(row)} neighbors listed but degree list says {var_degs[i]}", ln_no
            )
        var_adj.append([v - 1 for v in row])

    check_adj: list[list[int]] = []
    for a in range(m):
        ln_no, tokens = lines[4 + n + a]
        row = [v for v in _parse_int_row(tokens, ln_no, f"check {a} neighbor list") if v != 0]
        for v in row:
            if not 1 <= v <= n:
                raise AlistFormatError(f"check {a}: neighbor index {v} out of range [1, {n}]", ln_no)
        if len(row) != check_degs[a]:
            raise AlistFormatError(
                f"check {a}: {len(row)} neighbors listed but degree list says {check_degs[a]}", ln_no
            )
        check_adj.append([v - 1 for v in row])

    try:
        graph = FactorGraph(n, m, var_adj)
    except GraphError as exc:
        raise AlistFormatError(str(exc), lines[4][0] if n else lines[0][0]) from None
    for a in range(m):
        if tuple(sorted(check_adj[a])) != graph.check_adj[a]:
            raise AlistFormatError(
                f"check {a}: row/column lists disagree (transpose mismatch)", lines[4 + n + a][0]
            )
    return graph


def write_alist(graph: FactorGraph, path: str) -> None:
    """Write the graph in alist layout; read_alist(write_alist(g)) == g."""
    dv = graph.max_var_degree
    dc = graph.max_check_degree
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{graph.n} {graph.m}\n")
        fh.write(f"{dv} {dc}\n")
        fh.write(" ".join(str(len(r)) for r in graph.var_adj) + "\n")
        fh.write(" ".join(str(len(r)) for r in graph.check_adj) + "\n")
        for row in graph.var_adj:
            padded = [a + 1 for a in row] + [0] * max(dv - len(row), 1 - len(row))
            fh.write(" ".join(map(str, padded)) + "\n")
        for row in graph.check_adj:
            padded = [i + 1 for i in row] + [0] * max(dc - len(row), 1 - len(row))
            fh.write(" ".join(map(str, padded)) + "\n")
