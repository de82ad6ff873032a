"""First-order LP relaxation decoding via cutting planes, plus exact ML oracle.

The relaxed polytope is the intersection of the [0,1] box with one
"forbidding" inequality per check and odd-size neighbor subset S:

    sum_{i in N(a)\\S} y_i + sum_{i in S} (1 - y_i) >= 1.

The decoder either enumerates all of them (small check degrees) or grows
them on demand with a most-violated-cut separation oracle per check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Sequence

import numpy as np

from .channel import Gamma
from .factor_graph import FactorGraph
from .simplex import INFEASIBLE, OPTIMAL, BoxedSimplex, SimplexFailure

__all__ = [
    "DecodeError",
    "MLBudgetError",
    "LinearConstraint",
    "DecoderConfig",
    "DecodeResult",
    "MLResult",
    "INTEGRAL_CODEWORD",
    "FRACTIONAL",
    "DEGENERATE_TIE",
    "forbidding_inequality",
    "build_full_relaxation",
    "separate",
    "decode_lp",
    "decode_ml_bruteforce",
    "is_codeword",
    "write_lp_file",
    "gf2_rank",
    "gf2_nullspace_basis",
]

INTEGRAL_CODEWORD = "IntegralCodeword"
FRACTIONAL = "Fractional"
DEGENERATE_TIE = "DegenerateTie"


class DecodeError(RuntimeError):
    """Decoder failure; may carry a partial result and an instance dump."""

    def __init__(self, message: str, partial=None, instance: dict | None = None):
        super().__init__(message)
        self.partial = partial
        self.instance = instance or {}


class MLBudgetError(RuntimeError):
    """Nullspace dimension exceeds the exhaustive enumeration budget."""


@dataclass(frozen=True)
class LinearConstraint:
    """Inequality sum_j coeffs[j]*y_j >= rhs over variables of one graph."""

    coeffs: tuple[tuple[int, float], ...]
    rhs: float
    kind: str = "forbidding"       # "forbidding" or "box"
    check: int | None = None
    subset: frozenset[int] = frozenset()

    sense = ">="

    def evaluate(self, y) -> float:
        return sum(c * y[j] for j, c in self.coeffs)

    def violation(self, y) -> float:
        """Positive when y violates the inequality."""
        return self.rhs - self.evaluate(y)

    def as_leq_row(self, n: int) -> tuple[np.ndarray, float]:
        """Row for a <=-form solver: -coeffs . y <= -rhs."""
        row = np.zeros(n)
        for j, c in self.coeffs:
            row[j] = -c
        return row, -self.rhs


def forbidding_inequality(graph: FactorGraph, check: int, subset) -> LinearConstraint:
    """The odd-subset cut for one check, with the constant moved to the RHS:

    sum_{N(a)\\S} y_i - sum_S y_i >= 1 - |S|.
    """
    nbrs = graph.check_adj[check]
    S = frozenset(subset)
    if len(S) % 2 == 0:
        raise ValueError(f"subset size {len(S)} is even; forbidding cuts need odd subsets")
    if not S <= set(nbrs):
        raise ValueError(f"subset {sorted(S)} is not contained in N({check}) = {list(nbrs)}")
    coeffs = tuple((i, -1.0 if i in S else 1.0) for i in nbrs)
    return LinearConstraint(coeffs, rhs=1.0 - len(S), kind="forbidding", check=check, subset=S)


def build_full_relaxation(
    graph: FactorGraph, include_box: bool = True, degree_cap: int = 12
) -> list[LinearConstraint]:
    """All forbidding inequalities of every check (2^(d_c - 1) each) plus box rows.

    Refuses check degrees above ``degree_cap``: enumeration is exponential,
    so larger degrees must go through cut generation instead.
    """
    if graph.max_check_degree > degree_cap:
        raise DecodeError(
            f"check degree {graph.max_check_degree} exceeds the full-enumeration cap "
            f"{degree_cap}; use cut generation (mode='cuts')"
        )
    cons: list[LinearConstraint] = []
    for a in range(graph.m):
        nbrs = graph.check_adj[a]
        for k in range(1, len(nbrs) + 1, 2):
            for S in combinations(nbrs, k):
                cons.append(forbidding_inequality(graph, a, S))
    if include_box:
        for i in range(graph.n):
            cons.append(LinearConstraint(((i, 1.0),), rhs=0.0, kind="box"))
            cons.append(LinearConstraint(((i, -1.0),), rhs=-1.0, kind="box"))
    return cons


def separate(y, graph: FactorGraph, check: int, tol: float = 1e-7):
    """Most violated forbidding inequality of one check at the point y, or None.

    Takes S = {i in N(a): y_i > 1/2} and, if |S| is even, toggles the
    membership of the neighbor whose coordinate is closest to 1/2 (smallest
    index on ties); that subset minimizes the cut's left-hand side over all
    odd subsets. Returned only when the violation exceeds ``tol``.
    """
    nbrs = graph.check_adj[check]
    if not nbrs:
        return None
    half = Fraction(1, 2) if isinstance(y[nbrs[0]], Fraction) else 0.5
    S = {i for i in nbrs if y[i] > half}
    if len(S) % 2 == 0:
        toggle = min(nbrs, key=lambda i: (abs(y[i] - half), i))
        S.symmetric_difference_update({toggle})
    cut = forbidding_inequality(graph, check, S)
    if cut.violation(y) > tol:
        return cut
    return None


@dataclass
class DecoderConfig:
    mode: str = "cuts"                 # "cuts" or "full"
    exact: bool = False                # Fraction arithmetic end to end
    separation_tol: float = 1e-7
    integrality_tol: float = 1e-6
    tie_probe: bool = True
    tie_probe_magnitude: float = 1e-9
    tie_objective_tol: float = 1e-9
    tie_probe_seed: int = 0
    max_rounds: int = 200
    full_degree_cap: int = 12
    simplex_tol: float = 1e-9


@dataclass
class DecodeResult:
    y: np.ndarray
    objective: float
    status: str
    cuts_added: int
    iterations: int                    # total simplex pivots
    rounds: int = 0
    tie_detected: bool = False
    constraints: list = field(default_factory=list)   # forbidding cuts in force

    @property
    def rounded(self) -> np.ndarray:
        return np.array([1 if float(v) > 0.5 else 0 for v in self.y], dtype=np.int8)


def _box_lower(n: int, exact: bool):
    return [Fraction(0)] * n if exact else np.zeros(n)


def _box_upper(n: int, exact: bool):
    return [Fraction(1)] * n if exact else np.ones(n)


def _new_solver(gamma_vec, exact: bool, tol: float) -> BoxedSimplex:
    n = len(gamma_vec)
    return BoxedSimplex(gamma_vec, _box_lower(n, exact), _box_upper(n, exact), exact=exact, tol=tol)


def decode_lp(graph: FactorGraph, gamma: Gamma, config: DecoderConfig | None = None) -> DecodeResult:
    """Minimize gamma . y over the relaxed polytope; classify the optimum.

    Status is IntegralCodeword only when every coordinate sits within
    ``integrality_tol`` of {0, 1} and the rounding satisfies all checks;
    DegenerateTie when a perturbation re-solve exposes a second optimum with
    a different rounded support; Fractional otherwise. Ties and fractional
    outputs both count as decoding failures in experiments.
    """
    cfg = config or DecoderConfig()
    if gamma.n != graph.n:
        raise DecodeError(f"gamma has length {gamma.n}, graph has n = {graph.n}")
    exact = cfg.exact
    gvec = [Fraction(v) for v in gamma.values] if exact else [float(v) for v in gamma.values]
    solver = _new_solver(gvec, exact, cfg.simplex_tol)
    rows_added: list[tuple[np.ndarray, float]] = []
    cuts_in_force: list[LinearConstraint] = []
    sep_tol = Fraction(0) if exact else cfg.separation_tol

    def add_cuts(cuts):
        rows = []
        rhs = []
        cuts_in_force.extend(cuts)
        for cut in cuts:
            row, b = cut.as_leq_row(graph.n)
            if exact:
                row = [Fraction(v) for v in row]
                b = Fraction(b)
            rows.append(row)
            rhs.append(b)
            rows_added.append((row, b))
        solver.add_rows(rows, rhs)

    rounds = 0
    cuts_added = 0
    try:
        if cfg.mode == "full":
            add_cuts(build_full_relaxation(graph, include_box=False, degree_cap=cfg.full_degree_cap))
            cuts_added = solver.m
            status = solver.solve()
            if status != OPTIMAL:
                raise DecodeError("full relaxation reported infeasible; relaxation is never empty",
                                  instance=solver._instance_dump())
        elif cfg.mode == "cuts":
            status = solver.solve()
            while True:
                y = solver.solution().x
                new_cuts = []
                for a in range(graph.m):
                    cut = separate(y, graph, a, tol=sep_tol)
                    if cut is not None:
                        new_cuts.append(cut)
                if not new_cuts:
                    break
                rounds += 1
                if rounds > cfg.max_rounds:
                    partial = DecodeResult(
                        y=y, objective=solver.objective_value(), status=FRACTIONAL,
                        cuts_added=cuts_added, iterations=solver.iterations, rounds=rounds,
                    )
                    raise DecodeError(f"cut generation exceeded {cfg.max_rounds} rounds",
                                      partial=partial)
                add_cuts(new_cuts)
                cuts_added += len(new_cuts)
                if solver.solve() != OPTIMAL:
                    raise DecodeError("cut LP reported infeasible; relaxation is never empty",
                                      instance=solver._instance_dump())
        else:
            raise DecodeError(f"unknown mode {cfg.mode!r}")
    except SimplexFailure as exc:
        raise DecodeError(f"simplex failure: {exc}", instance=exc.instance) from exc

    sol = solver.solution()
    y = sol.x
    objective = sol.objective

    tie = False
    if cfg.tie_probe and not exact:
        tie = _probe_degenerate_tie(gvec, rows_added, y, objective, cfg)

    if tie:
        status = DEGENERATE_TIE
    else:
        rounded = [1 if float(v) > 0.5 else 0 for v in y]
        integral = all(min(abs(float(v)), abs(float(v) - 1.0)) <= cfg.integrality_tol for v in y)
        if integral and is_codeword(graph, rounded):
            status = INTEGRAL_CODEWORD
        else:
            status = FRACTIONAL
    return DecodeResult(
        y=y, objective=objective, status=status, cuts_added=cuts_added,
        iterations=solver.iterations, rounds=rounds, tie_detected=tie,
        constraints=cuts_in_force,
    )


def _probe_degenerate_tie(gvec, rows_added, y, objective, cfg: DecoderConfig) -> bool:
    """Single perturbed re-solve over the same constraint system.

    Flags a tie when the perturbed optimum has the same unperturbed
    objective (within tie_objective_tol) but a different rounded support.
    """
    n = len(gvec)
    rng = np.random.default_rng(cfg.tie_probe_seed)
    perturbed = np.asarray(gvec, dtype=float) + rng.uniform(
        -cfg.tie_probe_magnitude, cfg.tie_probe_magnitude, size=n
    )
    solver = _new_solver(list(perturbed), exact=False, tol=cfg.simplex_tol)
    if rows_added:
        solver.add_rows([r for r, _ in rows_added], [b for _, b in rows_added])
    if solver.solve() != OPTIMAL:
        return False
    y2 = solver.solution().x
    obj2 = float(np.dot(np.asarray(gvec, dtype=float), y2))
    if abs(obj2 - float(objective)) > cfg.tie_objective_tol:
        return False
    supp = [float(v) > 0.5 for v in y]
    supp2 = [float(v) > 0.5 for v in y2]
    return supp != supp2


def is_codeword(graph: FactorGraph, y) -> bool:
    """True when every check's neighborhood sums to an even bit count."""
    bits = 0
    for i, v in enumerate(y):
        b = int(round(float(v)))
        if b not in (0, 1):
            raise ValueError(f"y[{i}] = {v} is not binary")
        bits |= b << i
    return all((bits & mask).bit_count() % 2 == 0 for mask in graph.check_masks())


# -- GF(2) helpers (int bitset rows) -------------------------------------


def gf2_rank(rows: Sequence[int], n_cols: int) -> int:
    """Rank over GF(2) by Gaussian elimination on bitset rows."""
    work = [r for r in rows if r]
    rank = 0
    for col in range(n_cols):
        pivot = None
        for idx in range(rank, len(work)):
            if (work[idx] >> col) & 1:
                pivot = idx
                break
        if pivot is None:
            continue
        work[rank], work[pivot] = work[pivot], work[rank]
        for idx in range(len(work)):
            if idx != rank and ((work[idx] >> col) & 1):
                work[idx] ^= work[rank]
        rank += 1
        if rank == len(work):
            break
    return rank


def gf2_nullspace_basis(rows: Sequence[int], n_cols: int) -> list[int]:
    """Basis (as bitsets) of {y : row . y = 0 mod 2 for all rows}."""
    work = [r for r in rows if r]
    pivots: list[int] = []
    rank = 0
    for col in range(n_cols):
        pivot = None
        for idx in range(rank, len(work)):
            if (work[idx] >> col) & 1:
                pivot = idx
                break
        if pivot is None:
            continue
        work[rank], work[pivot] = work[pivot], work[rank]
        for idx in range(len(work)):
            if idx != rank and ((work[idx] >> col) & 1):
                work[idx] ^= work[rank]
        pivots.append(col)
        rank += 1
    pivot_set = set(pivots)
    basis = []
    for free in range(n_cols):
        if free in pivot_set:
            continue
        vec = 1 << free
        for r_idx, pcol in enumerate(pivots):
            if (work[r_idx] >> free) & 1:
                vec |= 1 << pcol
        basis.append(vec)
    return basis


@dataclass
class MLResult:
    codeword: np.ndarray
    objective: int
    tie: bool


def decode_ml_bruteforce(graph: FactorGraph, gamma: Gamma, max_dim: int = 22) -> MLResult:
    """Exact minimizer of gamma . y over all codewords, by nullspace enumeration.

    Ties are broken toward the lexicographically smallest bit vector and
    flagged. Refuses nullspace dimension above ``max_dim`` (2^k codewords).
    """
    if gamma.n != graph.n:
        raise ValueError("gamma length does not match graph")
    basis = gf2_nullspace_basis(graph.check_masks(), graph.n)
    k = len(basis)
    if k > max_dim:
        raise MLBudgetError(f"nullspace dimension {k} exceeds budget {max_dim}")
    flipped_mask = sum(1 << i for i, v in enumerate(gamma.values) if v < 0)
    all_mask = (1 << graph.n) - 1
    unflipped_mask = all_mask ^ flipped_mask

    def bit_tuple(word: int):
        return tuple((word >> i) & 1 for i in range(graph.n))

    best_word, best_cost, tie = 0, 0, False
    word = 0
    for idx in range(1, 1 << k):
        word ^= basis[(idx & -idx).bit_length() - 1]  # Gray-code step
        cost = (word & unflipped_mask).bit_count() - (word & flipped_mask).bit_count()
        if cost < best_cost:
            best_word, best_cost, tie = word, cost, False
        elif cost == best_cost:
            tie = True
            if bit_tuple(word) < bit_tuple(best_word):
                best_word = word
    codeword = np.array([(best_word >> i) & 1 for i in range(graph.n)], dtype=np.int8)
    return MLResult(codeword=codeword, objective=best_cost, tie=tie)


def write_lp_file(graph: FactorGraph, gamma: Gamma, constraints: Sequence[LinearConstraint], path: str) -> None:
    """Dump the decoding LP in LP text format for external solvers."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("Minimize\n obj:")
        terms = []
        for i, g in enumerate(gamma.values):
            terms.append(f" {'+' if g >= 0 else '-'} {abs(g)} y{i}")
        fh.write("".join(terms) + "\n")
        fh.write("Subject To\n")
        for idx, cut in enumerate(constraints):
            parts = []
            for j, c in cut.coeffs:
                parts.append(f" {'+' if c >= 0 else '-'} {abs(c)} y{j}")
            fh.write(f" c{idx}:{''.join(parts)} >= {cut.rhs}\n")
        fh.write("Bounds\n")
        for i in range(graph.n):
            fh.write(f" 0 <= y{i} <= 1\n")
        fh.write("End\n")
