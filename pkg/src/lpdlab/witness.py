"""Dual-witness verification and the poison-hyperflow certificate machinery.

A witness is an edge weighting tau with

    (a)  tau_ia + tau_ja >= 0   for every check a and distinct i, j in N(a),
    (b)  sum_{a in N(i)} tau_ia < gamma_i   for every bit i,

which certifies that the LP decoder returns the transmitted (all-zero)
codeword. The canonical form is a hyperflow: per check, one source edge
carrying -P and P replicated on all other edges. Strict inequalities are
realized with a configurable margin (default 1e-9).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .channel import FlipPattern, Gamma
from .factor_graph import FactorGraph
from .matching import MatchingResult, validate_matching, validate_pq_params
from .simplex import OPTIMAL, BoxedSimplex

__all__ = [
    "WitnessError",
    "InvalidWitnessError",
    "EdgeWeights",
    "Hyperflow",
    "WitnessCheck",
    "check_dual_witness",
    "canonicalize_to_hyperflow",
    "chi_interval",
    "hyperflow_from_matching",
    "find_dual_witness_lp",
]

PAIR_TOL = 1e-9
MARGIN = 1e-9


class WitnessError(ValueError):
    """Parameter or structure errors in witness construction."""


class InvalidWitnessError(WitnessError):
    """Input weights fail the witness conditions; carries the violations."""

    def __init__(self, message: str, violations: list):
        super().__init__(message)
        self.violations = violations


@dataclass(frozen=True)
class EdgeWeights:
    """Weights tau keyed by the graph's (variable, check) edges, exactly."""

    tau: dict[tuple[int, int], float]

    def validate_keys(self, graph: FactorGraph) -> None:
        keys = set(self.tau)
        edges = set(graph.edges)
        if keys != edges:
            extra = sorted(keys - edges)[:3]
            missing = sorted(edges - keys)[:3]
            raise WitnessError(
                f"tau keys do not match graph edges (extra {extra}, missing {missing})"
            )

    def check_weights(self, graph: FactorGraph, a: int) -> list[float]:
        return [self.tau[(i, a)] for i in graph.check_adj[a]]


@dataclass(frozen=True)
class Hyperflow:
    """Canonical witness: per check, a source neighbor and poison P >= 0."""

    source: tuple[int, ...]
    poison: tuple[float, ...]

    def validate(self, graph: FactorGraph) -> None:
        if len(self.source) != graph.m or len(self.poison) != graph.m:
            raise WitnessError("hyperflow arrays must have one entry per check")
        for a in range(graph.m):
            if self.poison[a] < 0:
                raise WitnessError(f"check {a}: poison {self.poison[a]} is negative")
            if graph.check_adj[a] and self.source[a] not in graph.check_adj[a]:
                raise WitnessError(f"check {a}: source {self.source[a]} is not a neighbor")

    def to_edge_weights(self, graph: FactorGraph) -> EdgeWeights:
        tau = {}
        for a in range(graph.m):
            for i in graph.check_adj[a]:
                tau[(i, a)] = -self.poison[a] if i == self.source[a] else self.poison[a]
        return EdgeWeights(tau)


@dataclass(frozen=True)
class WitnessCheck:
    ok: bool
    violations: tuple[tuple[str, float], ...]   # (description, slack) pairs


def check_dual_witness(
    graph: FactorGraph,
    gamma: Gamma,
    tau: EdgeWeights,
    margin: float = MARGIN,
    pair_tol: float = PAIR_TOL,
) -> WitnessCheck:
    """Verify both witness conditions; report every violated constraint.

    Condition (a) is checked to tolerance ``pair_tol``; the strict
    inequality (b) is enforced as sum <= gamma_i - margin.
    """
    tau.validate_keys(graph)
    violations: list[tuple[str, float]] = []
    for a in range(graph.m):
        nbrs = graph.check_adj[a]
        if len(nbrs) < 2:
            continue
        weights = [(tau.tau[(i, a)], i) for i in nbrs]
        weights.sort()
        (w1, i1), (w2, i2) = weights[0], weights[1]
        if w1 + w2 < -pair_tol:
            # the two smallest weights witness every violated pair; list them all
            for idx, (wa, ia) in enumerate(weights):
                for wb, ib in weights[idx + 1:]:
                    if wa + wb < -pair_tol:
                        violations.append(
                            (f"pair check={a} bits=({min(ia, ib)},{max(ia, ib)})", float(wa + wb))
                        )
    for i in range(graph.n):
        total = sum(tau.tau[(i, a)] for a in graph.var_adj[i])
        slack = gamma.values[i] - margin - total
        if slack < 0:
            violations.append((f"bit {i}: sum tau = {total} !< gamma = {gamma.values[i]}", float(slack)))
    return WitnessCheck(ok=not violations, violations=tuple(violations))


def canonicalize_to_hyperflow(graph: FactorGraph, tau: EdgeWeights) -> Hyperflow:
    """Rewrite a valid witness into hyperflow shape, check by check.

    All weights at a check non-negative: zero them (P = 0, lowest-index
    neighbor as source). Exactly one negative weight: it becomes the source
    with P equal to its magnitude, all other edges get +P. Sums per bit only
    decrease, so condition (b) survives. Two negative weights at one check
    are rejected: such input already violates condition (a) pairwise.
    """
    gamma_probe = _implied_gamma_check(graph, tau)
    if not gamma_probe.ok:
        raise InvalidWitnessError(
            "input weights are not a valid dual witness", list(gamma_probe.violations)
        )
    source = []
    poison = []
    for a in range(graph.m):
        nbrs = graph.check_adj[a]
        if not nbrs:
            source.append(0)
            poison.append(0.0)
            continue
        negatives = [i for i in nbrs if tau.tau[(i, a)] < 0]
        if len(negatives) >= 2:
            raise InvalidWitnessError(
                f"check {a} carries {len(negatives)} negative weights; a valid witness has at most one",
                [(f"check {a} negatives", float(sum(tau.tau[(i, a)] for i in negatives)))],
            )
        if negatives:
            src = negatives[0]
            source.append(src)
            poison.append(-tau.tau[(src, a)])
        else:
            source.append(min(nbrs))
            poison.append(0.0)
    return Hyperflow(source=tuple(source), poison=tuple(poison))


def _implied_gamma_check(graph: FactorGraph, tau: EdgeWeights) -> WitnessCheck:
    """Check condition (a) only; canonicalization does not need gamma for it."""
    tau.validate_keys(graph)
    violations = []
    for a in range(graph.m):
        nbrs = graph.check_adj[a]
        if len(nbrs) < 2:
            continue
        weights = sorted(tau.tau[(i, a)] for i in nbrs)
        if weights[0] + weights[1] < -PAIR_TOL:
            violations.append((f"pair condition at check {a}", float(weights[0] + weights[1])))
    return WitnessCheck(ok=not violations, violations=tuple(violations))


def chi_interval(p: int, q: int, d_v: int) -> tuple[float, float]:
    """Open interval of valid per-edge poison rates: (1/(2p - d_v), 1/(d_v - q)).

    A flipped bit purges at least (2p - d_v) * chi > 1 of poison in the worst
    case; an unflipped bit absorbs at most (d_v - q) * chi < 1.
    """
    try:
        validate_pq_params(p, q, d_v)
    except Exception as exc:
        raise WitnessError(str(exc)) from None
    return (1.0 / (2 * p - d_v), 1.0 / (d_v - q))


def hyperflow_from_matching(
    graph: FactorGraph,
    flips: FlipPattern,
    matching: MatchingResult,
    p: int,
    q: int,
    chi: float | None = None,
) -> EdgeWeights:
    """Edge weights routing chi units of poison through each matched check.

    Every flipped bit pushes chi into each of its p matched checks (source
    edges carry -chi) and those checks replicate +chi to all their other
    neighbors; every other edge carries 0. ``chi`` defaults to the midpoint
    of chi_interval and must lie strictly inside it.
    """
    lo, hi = chi_interval(p, q, graph.max_var_degree)
    if chi is None:
        chi = 0.5 * (lo + hi)
    if not lo < chi < hi:
        raise WitnessError(f"chi = {chi} outside the open interval ({lo}, {hi})")
    validate_matching(graph, flips, matching, p, q)
    tau = {(i, a): 0.0 for i in range(graph.n) for a in graph.var_adj[i]}
    for i in flips.flipped:
        for a in matching.assignment.get(i, frozenset()):
            for j in graph.check_adj[a]:
                tau[(j, a)] = -chi if j == i else chi
    return EdgeWeights(tau)


def find_dual_witness_lp(
    graph: FactorGraph,
    gamma: Gamma,
    margin_threshold: float = 1e-7,
    weight_box: float | None = None,
) -> EdgeWeights | None:
    """Max-margin witness search: maximize delta subject to

        tau_ia + tau_ja >= 0,   sum_a tau_ia <= gamma_i - delta,   0 <= delta <= 1.

    Returns the weights when the optimum margin exceeds ``margin_threshold``,
    else None (also None when no margin-0 witness exists at all). Edge
    weights are boxed at +-weight_box, which is enlarged and re-solved in
    the unlikely event the box binds.
    """
    edges = graph.edges
    ne = len(edges)
    edge_id = {e: idx for idx, e in enumerate(edges)}
    box = weight_box if weight_box is not None else 4.0 * (graph.max_var_degree + 1)
    for _ in range(4):
        c = [0.0] * ne + [-1.0]            # maximize delta
        lower = [-box] * ne + [0.0]
        upper = [box] * ne + [1.0]
        rows: list[list[float]] = []
        rhs: list[float] = []
        for a in range(graph.m):
            nbrs = graph.check_adj[a]
            for x in range(len(nbrs)):
                for y in range(x + 1, len(nbrs)):
                    row = [0.0] * (ne + 1)
                    row[edge_id[(nbrs[x], a)]] = -1.0
                    row[edge_id[(nbrs[y], a)]] = -1.0
                    rows.append(row)
                    rhs.append(0.0)
        for i in range(graph.n):
            row = [0.0] * (ne + 1)
            for a in graph.var_adj[i]:
                row[edge_id[(i, a)]] = 1.0
            row[ne] = 1.0
            rows.append(row)
            rhs.append(float(gamma.values[i]))
        solver = BoxedSimplex(c, lower, upper)
        solver.add_rows(rows, rhs)
        if solver.solve() != OPTIMAL:
            return None
        sol = solver.solution()
        delta = sol.x[ne]
        if delta <= margin_threshold:
            return None
        if np.max(np.abs(sol.x[:ne])) < box - 1e-6:
            return EdgeWeights({e: float(sol.x[edge_id[e]]) for e in edges})
        box *= 8.0
    raise WitnessError("witness LP kept hitting its weight box; instance looks unbounded")
