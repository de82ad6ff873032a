"""Dense bounded-variable dual simplex, the internal LP engine.

Solves   minimize c.x   subject to   A x <= b,   lower <= x <= upper,
with every structural variable boxed by finite bounds. Slacks start basic
and every structural variable begins at whichever bound makes its reduced
cost dual-feasible, so a single dual-simplex loop solves any instance from
scratch and re-optimizes cheaply after rows are appended (cutting planes
arrive as violated rows whose new slack is basic and negative).

Anti-cycling: the leaving row is picked by largest bound violation until a
run of degenerate pivots is detected, after which the solver switches to
Bland's rule (smallest basic variable index); entering columns always break
ratio ties toward the smallest column index. Feasibility, dual feasibility
and pivot tolerances default to 1e-9.

``exact=True`` runs the same pivot logic over ``fractions.Fraction``
entries with zero tolerances; that mode is the reference the floating path
is tested against.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

__all__ = ["SimplexFailure", "LPSolution", "BoxedSimplex", "solve_boxed_lp", "OPTIMAL", "INFEASIBLE"]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"

_STALL_LIMIT = 60


class SimplexFailure(RuntimeError):
    """Iteration cap or numerical breakdown; carries the instance for dumping."""

    def __init__(self, message: str, instance: dict | None = None):
        super().__init__(message)
        self.instance = instance or {}


@dataclass
class LPSolution:
    status: str
    x: np.ndarray
    objective: float
    duals: np.ndarray
    reduced_costs: np.ndarray
    iterations: int
    basis: list = field(default_factory=list)


class BoxedSimplex:
    """Incremental dual-simplex state over a growing row set."""

    def __init__(
        self,
        c: Sequence,
        lower: Sequence,
        upper: Sequence,
        exact: bool = False,
        tol: float = 1e-9,
        max_iter: int | None = None,
    ):
        self.exact = exact
        self.nstruct = len(c)
        if exact:
            self._conv = Fraction
            self.tol = Fraction(0)
        else:
            self._conv = float
            self.tol = tol
        self._zero = self._conv(0)
        self._one = self._conv(1)
        self.c = [self._conv(v) for v in c]
        if len(lower) != self.nstruct or len(upper) != self.nstruct:
            raise ValueError("bounds must match the number of structural variables")
        self.lower = [self._conv(v) for v in lower]
        self.upper = [self._upper_bound(v) for v in upper]
        for lo, up in zip(self.lower, self.upper):
            if lo > up:
                raise ValueError("lower bound exceeds upper bound")
        self.max_iter = max_iter
        self.rows_A: list[list] = []   # original structural coefficients per row
        self.rows_b: list = []
        # dual-feasible start: nonbasic at lower when c_j >= 0, else at upper
        at_upper = [cv < 0 for cv in self.c]
        for j, au in enumerate(at_upper):
            if au and self.upper[j] == np.inf:
                raise ValueError("negative objective on a variable without finite upper bound")
        self.at_upper = np.array(at_upper, dtype=bool)       # grows with slacks (always False there)
        self.in_basis = np.zeros(self.nstruct, dtype=bool)   # grows with slacks
        self.basis: list[int] = []                            # basic column per row
        self.T = np.zeros((0, self.nstruct), dtype=self._dtype())
        self.xB = np.zeros(0, dtype=self._dtype())
        self.d = np.array(self.c, dtype=self._dtype())        # reduced costs, all columns
        self.iterations = 0
        self._bland = False
        self._stall = 0
        self._refreshes = 0

    # -- construction helpers -------------------------------------------

    def _upper_bound(self, v):
        if not self.exact:
            return float(v)
        if isinstance(v, float) and np.isinf(v):
            return np.inf
        return Fraction(v)

    def _dtype(self):
        return object if self.exact else np.float64

    @property
    def m(self) -> int:
        return len(self.rows_A)

    def _ncols(self) -> int:
        return self.nstruct + self.m

    def _col_lower(self, j):
        return self.lower[j] if j < self.nstruct else self._zero

    def _col_upper(self, j):
        return self.upper[j] if j < self.nstruct else np.inf

    def _nonbasic_value(self, j):
        if j < self.nstruct and self.at_upper[j]:
            return self.upper[j]
        return self._col_lower(j)

    def add_rows(self, rows: Sequence[Sequence], rhs: Sequence) -> None:
        """Append constraints A_new x <= b_new; their slacks enter the basis."""
        if not len(rows):
            return
        rows = [[self._conv(v) for v in r] for r in rows]
        rhs = [self._conv(v) for v in rhs]
        x = self._full_solution()
        old_m, k = self.m, len(rows)
        ncols_new = self.nstruct + old_m + k
        T_new = self._zeros((old_m + k, ncols_new))
        T_new[:old_m, : self.nstruct + old_m] = self.T
        xB_new = self._zeros(old_m + k)
        xB_new[:old_m] = self.xB
        for t in range(k):
            r = old_m + t
            arow = self._zeros(ncols_new)
            for j, v in enumerate(rows[t]):
                arow[j] = v
            arow[self.nstruct + r] = self._one
            for rr in range(old_m):
                coef = arow[self.basis[rr]]
                if coef != 0:
                    arow = arow - coef * T_new[rr]
            T_new[r] = arow
            self.rows_A.append(rows[t])
            self.rows_b.append(rhs[t])
            self.basis.append(self.nstruct + r)
            xB_new[r] = rhs[t] - sum(v * x[j] for j, v in enumerate(rows[t]) if v != 0)
        self.T = T_new
        self.xB = xB_new
        self.d = np.concatenate([self.d, self._zeros(k)])
        self.at_upper = np.concatenate([self.at_upper, np.zeros(k, dtype=bool)])
        self.in_basis = np.concatenate([self.in_basis, np.ones(k, dtype=bool)])

    def _zeros(self, shape):
        z = np.zeros(shape, dtype=self._dtype())
        if self.exact:
            z.flat = [Fraction(0)] * z.size
        return z

    def _full_solution(self) -> list:
        x = [self._nonbasic_value(j) for j in range(self._ncols())]
        for r, j in enumerate(self.basis):
            x[j] = self.xB[r]
        return x

    # -- core loop -------------------------------------------------------

    def solve(self) -> str:
        """Run dual simplex to optimality (or detect primal infeasibility)."""
        cap = self.max_iter or max(20_000, 60 * (self.m + self.nstruct))
        while True:
            r = self._pick_leaving()
            if r is None:
                if not self.exact and not self._refresh_ok():
                    continue
                return OPTIMAL
            if self.iterations >= cap:
                raise SimplexFailure(f"iteration cap {cap} exceeded", self._instance_dump())
            if not self._pivot(r):
                return INFEASIBLE

    def _pick_leaving(self):
        tol = self.tol
        best_r, best_v = None, tol
        for r in range(self.m):
            j = self.basis[r]
            v = self.xB[r]
            lo, up = self._col_lower(j), self._col_upper(j)
            viol = lo - v if v < lo else (v - up if v > up else self._zero)
            if viol > tol:
                if self._bland:
                    if best_r is None or j < self.basis[best_r]:
                        best_r = r
                elif viol > best_v:
                    best_r, best_v = r, viol
        return best_r

    def _choose_entering(self, row, sigma):
        """Dual ratio test; returns (column, ratio) or (None, None)."""
        if not self.exact:
            srow = row if sigma > 0 else -row
            ptol = self.tol
            atup = self.at_upper
            eligible = ~self.in_basis & (
                (~atup & (srow > ptol)) | (atup & (srow < -ptol))
            )
            if not eligible.any():
                return None, None
            ratios = np.full(srow.shape, np.inf)
            np.divide(self.d, srow, out=ratios, where=eligible)
            j = int(np.argmin(ratios))  # first minimum = smallest column index
            return j, ratios[j]
        best_j, best_ratio = None, None
        for j in range(self._ncols()):
            if self.in_basis[j]:
                continue
            a = row[j] if sigma > 0 else -row[j]
            at_up = bool(self.at_upper[j])
            if (not at_up and a > 0) or (at_up and a < 0):
                ratio = self.d[j] / a
                if best_ratio is None or ratio < best_ratio:
                    best_j, best_ratio = j, ratio
        return best_j, best_ratio

    def _pivot(self, r: int) -> bool:
        T, d = self.T, self.d
        j_out = self.basis[r]
        lo, up = self._col_lower(j_out), self._col_upper(j_out)
        above = self.xB[r] > up
        target = up if above else lo
        sigma = 1 if above else -1
        j_in, ratio = self._choose_entering(T[r], sigma)
        if j_in is None:
            return False
        piv = T[r, j_in]
        delta = self.xB[r] - target
        t = delta / piv
        xq = self._nonbasic_value(j_in) + t
        col = T[:, j_in].copy()
        col[r] = self._zero
        # basic values move as the entering variable absorbs the violation
        self.xB = self.xB - col * t
        self.xB[r] = xq
        # tableau pivot
        T[r] = T[r] / piv
        nz = np.flatnonzero(col != 0)
        if nz.size:
            T[nz] = T[nz] - np.outer(col[nz], T[r])
        dj = d[j_in]
        if dj != 0:
            self.d = d - dj * T[r]
        self.d[j_in] = self._zero
        # bookkeeping
        self.in_basis[j_out] = False
        self.in_basis[j_in] = True
        if j_out < self.nstruct:
            self.at_upper[j_out] = above
        self.basis[r] = j_in
        self.iterations += 1
        if not self.exact:
            improvement = float(ratio) * abs(float(delta))
            if improvement <= 1e-12:
                self._stall += 1
                if self._stall > _STALL_LIMIT:
                    self._bland = True
            else:
                self._stall = 0
        return True

    # -- accuracy control ---------------------------------------------------

    def _refresh_ok(self) -> bool:
        """Re-solve the basis system in fresh arithmetic; True if still feasible.

        Tableau updates accumulate drift in float mode; once the loop thinks
        it is optimal, the basic values are recomputed from the original
        data, and pivoting resumes if the refreshed point violates a bound.
        """
        if self.m == 0 or self._refreshes >= 5:
            return True
        self._refreshes += 1
        B = np.zeros((self.m, self.m))
        for idx, j in enumerate(self.basis):
            if j < self.nstruct:
                for r in range(self.m):
                    B[r, idx] = float(self.rows_A[r][j])
            else:
                B[j - self.nstruct, idx] = 1.0
        rhs = np.array([float(b) for b in self.rows_b])
        basic_set = set(self.basis)
        for j in range(self._ncols()):
            if j in basic_set:
                continue
            v = float(self._nonbasic_value(j))
            if v == 0.0:
                continue
            if j < self.nstruct:
                for r in range(self.m):
                    rhs[r] -= float(self.rows_A[r][j]) * v
            else:
                rhs[j - self.nstruct] -= v
        try:
            xb = np.linalg.solve(B, rhs)
        except np.linalg.LinAlgError:
            return True  # near-singular basis: keep tableau values
        drift = float(np.max(np.abs(self.xB - xb)))
        self.xB = xb
        if drift > 10 * float(self.tol):
            return self._pick_leaving() is None
        return True

    # -- results -----------------------------------------------------------

    def solution(self) -> LPSolution:
        x_full = self._full_solution()
        if self.exact:
            x = np.array(x_full[: self.nstruct], dtype=object)
            d = np.array(self.d, dtype=object)
        else:
            x = np.array([float(v) for v in x_full[: self.nstruct]])
            d = np.asarray(self.d, dtype=np.float64)
        obj = sum(self.c[j] * x_full[j] for j in range(self.nstruct))
        return LPSolution(
            status=OPTIMAL,
            x=x,
            objective=obj if self.exact else float(obj),
            duals=-d[self.nstruct:],
            reduced_costs=d,
            iterations=self.iterations,
            basis=list(self.basis),
        )

    def objective_value(self):
        x_full = self._full_solution()
        obj = sum(self.c[j] * x_full[j] for j in range(self.nstruct))
        return obj if self.exact else float(obj)

    def _instance_dump(self) -> dict:
        return {
            "c": [float(v) for v in self.c],
            "rows_A": [[float(v) for v in row] for row in self.rows_A],
            "rows_b": [float(v) for v in self.rows_b],
            "lower": [float(v) for v in self.lower],
            "upper": [float(v) for v in self.upper],
            "iterations": self.iterations,
        }


def solve_boxed_lp(
    c: Sequence,
    A_ub: Sequence[Sequence],
    b_ub: Sequence,
    lower: Sequence,
    upper: Sequence,
    exact: bool = False,
    tol: float = 1e-9,
    max_iter: int | None = None,
) -> LPSolution:
    """One-shot solve of min c.x s.t. A_ub x <= b_ub, lower <= x <= upper."""
    solver = BoxedSimplex(c, lower, upper, exact=exact, tol=tol, max_iter=max_iter)
    solver.add_rows(A_ub, b_ub)
    status = solver.solve()
    if status != OPTIMAL:
        x = np.full(len(c), np.nan)
        return LPSolution(status, x, float("nan"), np.array([]), np.array([]), solver.iterations)
    return solver.solution()
