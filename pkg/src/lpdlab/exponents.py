"""Rate-function evaluation and the numeric certificate for correctable error fractions.

Everything here works with n -> infinity limits: the binomial contamination
probabilities use t = alpha*d_v/(1 - rate), and all set sizes are fractions
of n. The certificate for a parameter set (rate, d_v, p, q, alpha) holds
when

  * the combinatorial restrictions p >= q, 2p + q > 2*d_v, d_v >= p + 2 hold,
  * s_crit < alpha/2,  alpha*d_v < ((1-rate) - d_v*s_crit)/2,  and the
    gamma -> 0 limit of the residual-neighborhood exponent is negative,
  * the big-set exponent F(alpha) is certifiably negative, and
  * some eps2 in the grid makes the small-set exponent F'(alpha, eps2)
    certifiably negative.

Suprema are estimated by a coarse multistart grid (at least 9 points per
axis) plus pattern-search refinement; "certifiably negative" additionally
requires an interval-style margin: an empirical per-axis Lipschitz bound on
a stored grid, refined axis by axis until the margin drops below a tenth of
the best value. Negativity never rests on a lucky grid alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, comb, inf, isfinite

import numpy as np

__all__ = [
    "ExponentError",
    "ExponentParams",
    "SupOptions",
    "SupResult",
    "ExponentReport",
    "AlphaSearchResult",
    "DEFAULT_EPS2_GRID",
    "entropy",
    "b_coeffs",
    "ybar_up",
    "vbar",
    "f_exponent",
    "s_crit",
    "gamma1_crit",
    "gamma2_star",
    "beta_nu",
    "G_value",
    "F_alpha",
    "three_inequalities",
    "F_prime",
    "certificate",
    "alpha_crit_search",
    "feldman_coefficient",
    "feldman_bound",
]

NEG = -inf

# eps2 values tried for the small-set exponent; a single negative value
# suffices. Values well below 1e-5 are needed: at alpha ~ 0.002 the
# p*eps2 surplus in the request-cover term keeps F' positive until
# eps2 <= 1e-6.
DEFAULT_EPS2_GRID = (1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9)


class ExponentError(ValueError):
    """Parameter/domain violations in exponent evaluation."""


@dataclass(frozen=True)
class ExponentParams:
    rate: float
    d_v: int
    p: int
    q: int
    alpha: float
    eps1: float = 0.0
    eps2_grid: tuple[float, ...] = DEFAULT_EPS2_GRID

    def __post_init__(self):
        if not 0.0 < self.rate < 1.0:
            raise ExponentError(f"rate must lie in (0, 1), got {self.rate}")
        if not 0.0 < self.alpha < 1.0:
            raise ExponentError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.eps1 < 0:
            raise ExponentError(f"eps1 must be >= 0, got {self.eps1}")
        if min(self.d_v, self.p, self.q) < 1:
            raise ExponentError("d_v, p, q must be positive integers")

    @property
    def contamination(self) -> float:
        """t = alpha*d_v/(1-rate), the limiting per-edge contamination rate."""
        return self.alpha * self.d_v / (1.0 - self.rate)

    def restrictions_ok(self) -> bool:
        return self.p >= self.q and 2 * self.p + self.q > 2 * self.d_v and self.d_v >= self.p + 2


# -- elementary pieces ---------------------------------------------------


def entropy(x):
    """Binary entropy H(x) in bits, H(0) = H(1) = 0 by continuity."""
    arr = np.asarray(x, dtype=float)
    if np.any((arr < 0) | (arr > 1)):
        raise ExponentError(f"entropy argument outside [0, 1]: {x}")
    out = _H(arr)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def _H(x: np.ndarray) -> np.ndarray:
    """Entropy without domain checks; NaN outside [0,1], 0 at the endpoints."""
    x = np.asarray(x, dtype=float)
    inside = (x > 0.0) & (x < 1.0)
    xi = np.where(inside, x, 0.5)
    h = -xi * np.log2(xi) - (1.0 - xi) * np.log2(1.0 - xi)
    out = np.where(inside, h, 0.0)
    return np.where((x < 0.0) | (x > 1.0), np.nan, out)


def _xlog2(coef, arg) -> np.ndarray:
    """coef * log2(arg) with 0 * log2(0) = 0 and coef > 0, arg <= 0 -> -inf."""
    coef = np.asarray(coef, dtype=float)
    arg = np.asarray(arg, dtype=float)
    pos = arg > 0.0
    out = coef * np.log2(np.where(pos, arg, 1.0))
    return np.where(pos, out, np.where(coef == 0.0, 0.0, NEG))


def b_coeffs(params: ExponentParams) -> np.ndarray:
    """Limit fractions b_1..b_q of unflipped bits carrying i requests.

    b_i = C(d_v, d_v - q + i) * t^(d_v - q + i) * (1 - t)^(q - i) with
    t = alpha*d_v/(1-rate); index i counts requests, so the exponent
    d_v - q + i is the number of contaminated edges.
    """
    t = params.contamination
    if t > 1.0:
        raise ExponentError(f"contamination t = {t} exceeds 1; alpha too large for this model")
    q, dv = params.q, params.d_v
    return np.array(
        [comb(dv, dv - q + i) * t ** (dv - q + i) * (1.0 - t) ** (q - i) for i in range(1, q + 1)]
    )


def ybar_up(params: ExponentParams) -> np.ndarray:
    """Concentration upper bounds: b_i*(1 - alpha) + eps1."""
    return b_coeffs(params) * (1.0 - params.alpha) + params.eps1


def vbar(params: ExponentParams) -> float:
    """Total request density sum_i i * ybar_up_i."""
    yup = ybar_up(params)
    return float(np.sum(np.arange(1, params.q + 1) * yup))


def f_exponent(s, params: ExponentParams, _vbar: float | None = None):
    """Large-set exponent f(s); +inf where the neighborhood bound degenerates.

    f(s) = alpha*H(s/alpha) + (1-R)*H((p*s + v)/(1-R)) + d_v*s*log2((p*s + v)/(1-R)).
    An argument (p*s + v)/(1-R) above 1 means the binomial bound cannot
    certify decay at that size; the value is +inf and certification fails
    downstream rather than raising.
    """
    v = vbar(params) if _vbar is None else _vbar
    s_arr = np.asarray(s, dtype=float)
    if np.any((s_arr < 0) | (s_arr > params.alpha + 1e-15)):
        raise ExponentError(f"s outside [0, alpha]: {s}")
    R, alpha = params.rate, params.alpha
    arg = (params.p * s_arr + v) / (1.0 - R)
    out = (
        alpha * _H(np.clip(s_arr / alpha, 0.0, 1.0))
        + (1.0 - R) * _H(np.minimum(arg, 1.0))
        + _xlog2(params.d_v * s_arr, arg)
    )
    out = np.where(arg > 1.0, inf, out)
    return float(out) if np.isscalar(s) or s_arr.ndim == 0 else out


def s_crit(params: ExponentParams, scan_step: float = 1e-6) -> float:
    """Critical size: min(alpha, inf{s : f(s') < 0 for all s' in [s, alpha]}).

    Dense scan at ``scan_step`` resolution locates the last non-negative
    value of f; bisection then refines the sign change.
    """
    v = vbar(params)
    alpha = params.alpha
    npts = max(int(ceil(alpha / scan_step)), 16)
    grid = np.linspace(0.0, alpha, npts + 1)[1:]
    vals = f_exponent(grid, params, _vbar=v)
    if vals[-1] >= 0:
        return alpha
    nonneg = np.flatnonzero(vals >= 0)
    if nonneg.size == 0:
        return 0.0
    lo = float(grid[nonneg[-1]])
    hi = float(grid[nonneg[-1] + 1])
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if f_exponent(mid, params, _vbar=v) >= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def gamma1_crit(s1: float, d_v: int, rate: float) -> float:
    """Largest neighborhood fraction with 2 + d_v*s1*log2(g/(1-rate)) < 0.

    Closed form (1-rate) * 2^(-2/(d_v*s1)), capped at the trivial bound
    d_v*s1; tends to 0 as s1 -> 0 (the exponent diverges). May underflow to
    0.0 for very small s1, which is the honest float answer.
    """
    if s1 < 0:
        raise ExponentError(f"s1 must be >= 0, got {s1}")
    if s1 == 0:
        return 0.0
    root = (1.0 - rate) * 2.0 ** (-2.0 / (d_v * s1))
    return min(root, d_v * s1)


def _b_residual(gamma, params: ExponentParams, sc: float):
    """Residual-neighborhood exponent b(gamma) used for the gamma2 threshold."""
    R, dv, alpha = params.rate, params.d_v, params.alpha
    rem = (1.0 - R) - dv * sc
    g = np.asarray(gamma, dtype=float)
    head = alpha * float(_H(np.clip(sc / alpha, 0.0, 1.0)))
    out = head + _H(np.clip(g / rem, 0.0, 1.0)) + _xlog2(dv * (alpha - sc), (g + dv * sc) / (1.0 - R))
    out = np.where(g / rem > 1.0, inf, out)
    return out


def gamma2_star(params: ExponentParams, s_crit_val: float) -> float | None:
    """Largest gamma with b(gamma') < 0 for all gamma' <= gamma; None when
    even the gamma -> 0 limit fails (third certificate inequality broken)."""
    rem = (1.0 - params.rate) - params.d_v * s_crit_val
    if rem <= 0:
        return None
    grid = np.linspace(0.0, rem, 100_001)[1:]
    vals = _b_residual(grid, params, s_crit_val)
    if vals[0] >= 0:
        return None
    nonneg = np.flatnonzero(vals >= 0)
    if nonneg.size == 0:
        return float(rem)
    k = nonneg[0]
    lo, hi = float(grid[k - 1]) if k else 0.0, float(grid[k])
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if _b_residual(mid, params, s_crit_val) < 0:
            lo = mid
        else:
            hi = mid
    return lo


def beta_nu(s1: float, g1: float, y, params: ExponentParams) -> tuple[float, float]:
    """Uncovered-request count beta = p*s1 - g1 + sum i*y_i and the edge
    count nu = sum (d_v - q + i)*y_i of a request configuration."""
    y = np.asarray(y, dtype=float)
    idx = np.arange(1, params.q + 1)
    beta = params.p * s1 - g1 + float(np.sum(idx * y))
    nu = float(np.sum((params.d_v - params.q + idx) * y))
    return beta, nu


# -- the G landscapes ------------------------------------------------------


class _GLandscape:
    """Vectorized evaluation of the big-set exponent surface G.

    Points live in relative coordinates u in [0,1]^(3+q):
    s1 = u0*s_crit, g1 = u1*d_v*s1, g2 = u2*d_v*(alpha - s1),
    y_i = yup_i*(1 + u_{3+i})/2. All box and dependency constraints are
    absorbed by the mapping, so every u is feasible (up to -inf regions of
    G itself).
    """

    def __init__(self, params: ExponentParams, sc: float, cap_counting: bool = True):
        self.params = params
        self.sc = sc
        self.yup = ybar_up(params)
        self.cap_counting = cap_counting
        self.dim = 3 + params.q
        q = params.q
        self._wi = np.arange(1, q + 1, dtype=float)
        self._wn = params.d_v - q + self._wi
        self.evaluations = 0

    def map_point(self, U: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        p = self.params
        s1 = U[..., 0] * self.sc
        g1 = U[..., 1] * p.d_v * s1
        g2 = U[..., 2] * p.d_v * (p.alpha - s1)
        Y = self.yup * (1.0 + U[..., 3:]) / 2.0
        return s1, g1, g2, Y

    def components(self, s1, g1, g2, Y):
        p = self.params
        R, dv, alpha, q = p.rate, p.d_v, p.alpha, p.q
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.divide(Y, self.yup, out=np.zeros_like(Y), where=self.yup > 0)
            yent = np.sum(
                np.where(self.yup > 0, self.yup * _H(np.clip(ratio, 0.0, 1.0)), 0.0), axis=-1
            )
            siy = Y @ self._wi
            nu = Y @ self._wn
            bad1 = (
                (s1 < 0)
                | (s1 > alpha * (1 + 1e-12))
                | np.any((ratio < -1e-12) | (ratio > 1 + 1e-9), axis=-1)
            )
            G1 = alpha * _H(np.clip(s1 / alpha, 0.0, 1.0)) + yent
            G1 = np.where(bad1, NEG, G1)
            oneR = 1.0 - R
            bad2 = g1 > oneR
            G2 = oneR * _H(np.clip(g1 / oneR, 0.0, 1.0)) + _xlog2(dv * s1, g1 / oneR)
            G2 = np.where(bad2, NEG, G2)
            rem = oneR - g1
            bad3 = (g2 > rem) | (g1 + g2 > oneR)
            G3 = np.where(rem > 0, rem, 1.0) * _H(
                np.clip(np.divide(g2, rem, out=np.zeros_like(g2 * 1.0), where=rem > 0), 0.0, 1.0)
            ) + _xlog2(dv * (alpha - s1), (g1 + g2) / oneR)
            G3 = np.where(bad3, NEG, G3)
            beta = p.p * s1 - g1 + siy
            mn = np.minimum(g2, beta)
            h4 = np.where(
                g2 > 0,
                g2 * _H(np.clip(np.divide(mn, g2, out=np.zeros_like(mn), where=g2 > 0), 0.0, 1.0)),
                0.0,
            )
            denom = g1 + g2
            log_arg = np.divide(g1 + mn, denom, out=np.ones_like(denom), where=denom > 0)
            G4 = np.where(beta < 0, NEG, h4 + _xlog2(nu, log_arg))
        return G1, G2, G3, G4

    def total(self, G1, G2, G3, G4):
        lead = np.minimum(0.0, G1) if self.cap_counting else G1
        out = lead + np.minimum(0.0, G2) + np.minimum(0.0, G3) + np.minimum(0.0, G4)
        return np.where(np.isnan(out), NEG, out)

    def eval_u(self, U: np.ndarray) -> np.ndarray:
        self.evaluations += int(np.prod(U.shape[:-1]))
        return self.total(*self.components(*self.map_point(U)))


class _GPrimeLandscape:
    """Small-set exponent surface G' at fixed eps2; u in [0,1]^(1+q) with
    g2 = u0*d_v*alpha and the same y mapping as the big-set surface."""

    def __init__(self, params: ExponentParams, eps2: float):
        self.params = params
        self.eps2 = eps2
        self.yup = ybar_up(params)
        self.dim = 1 + params.q
        q = params.q
        self._wi = np.arange(1, q + 1, dtype=float)
        self._wn = params.d_v - q + self._wi
        self.evaluations = 0

    def map_point(self, U: np.ndarray):
        p = self.params
        g2 = U[..., 0] * p.d_v * p.alpha
        Y = self.yup * (1.0 + U[..., 1:]) / 2.0
        return g2, Y

    def eval_u(self, U: np.ndarray) -> np.ndarray:
        self.evaluations += int(np.prod(U.shape[:-1]))
        g2, Y = self.map_point(U)
        p, eps2 = self.params, self.eps2
        R, dv, alpha = p.rate, p.d_v, p.alpha
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.divide(Y, self.yup, out=np.zeros_like(Y), where=self.yup > 0)
            yent = np.sum(
                np.where(self.yup > 0, self.yup * _H(np.clip(ratio, 0.0, 1.0)), 0.0), axis=-1
            )
            siy = Y @ self._wi
            nu = Y @ self._wn
            rem = (1.0 - R) - dv * eps2
            if rem <= 0 or eps2 > alpha:
                return np.full(g2.shape, NEG)
            bad = g2 > rem
            Gp1 = rem * _H(np.clip(g2 / rem, 0.0, 1.0)) + _xlog2(
                dv * (alpha - eps2), (dv * eps2 + g2) / (1.0 - R)
            )
            Gp1 = np.where(bad, NEG, Gp1)
            betap = siy + p.p * eps2
            mn = np.minimum(g2, betap)
            h2 = np.where(
                g2 > 0,
                g2 * _H(np.clip(np.divide(mn, g2, out=np.zeros_like(mn), where=g2 > 0), 0.0, 1.0)),
                0.0,
            )
            Gp2 = h2 + _xlog2(nu, (dv * eps2 + mn) / (dv * eps2 + g2))
            Gp3 = alpha * float(_H(np.clip(eps2 / alpha, 0.0, 1.0))) + yent
            out = np.minimum(0.0, Gp1) + np.minimum(0.0, Gp2) + Gp3
        return np.where(np.isnan(out), NEG, out)


def G_value(s1: float, g1: float, g2: float, y, params: ExponentParams,
            s_crit_val: float | None = None, cap_counting: bool = True):
    """Evaluate G and its four components at one absolute point.

    Infeasible points (an entropy argument outside [0,1], or a negative
    uncovered-request count) evaluate to -inf rather than raising; they
    contribute nothing to a supremum.
    """
    sc = s_crit_val if s_crit_val is not None else s_crit(params)
    land = _GLandscape(params, sc, cap_counting=cap_counting)
    y = np.asarray(y, dtype=float)
    if y.shape != (params.q,):
        raise ExponentError(f"y must have length q = {params.q}")
    comps = land.components(np.asarray(s1, float), np.asarray(g1, float), np.asarray(g2, float), y)
    total = land.total(*comps)
    return float(total), tuple(float(c) for c in comps)


# -- supremum machinery ----------------------------------------------------
#
# The request vector y enters the min-capped objective only through the two
# weighted sums sigma = sum_i i*y_i and nu = sum_i (d_v-q+i)*y_i, and the
# capped surface is non-increasing in nu, so the supremum over the whole y
# box equals the supremum over sigma with nu at its knapsack minimum: higher
# request counts buy request mass with fewer edges, so the minimizing
# allocation fills y_q down to y_1. That collapses the search space to
# (s1, gamma1, gamma2, sigma). The small-set surface keeps an uncapped
# entropy term in y, so its certification uses the same reduction as a
# pointwise upper envelope (entropy replaced by its box maximum) while the
# reported supremum is still searched in full dimension.


@dataclass
class SupOptions:
    multistart_axis_points: int = 9      # minimum points per axis
    g2_axis_points: int = 17
    margin_grid: tuple[int, ...] = (33, 33, 129, 17)
    margin_ratio: float = 0.1            # refine until slack < ratio * |best|
    max_refines: int = 24
    max_grid_size: int = 30_000_000
    pattern_starts: int = 24
    pattern_step_min: float = 1e-8
    pattern_max_moves: int = 4000


@dataclass
class SupResult:
    value: float
    point: dict = field(default_factory=dict)
    certified_negative: bool = False
    slack: float = inf
    refinements: int = 0
    evaluations: int = 0


def _knapsack_edge_minimum(params: ExponentParams, yup: np.ndarray):
    """Breakpoints of min sum (d_v-q+i)*y_i at fixed sigma = sum i*y_i.

    Raising y_i buys request mass at (d_v-q+i)/i edges per unit, which is
    cheapest for the largest i; filling from i = q downward traces the
    convex piecewise-linear lower boundary of the reachable (sigma, nu) set.
    """
    q, dv = params.q, params.d_v
    sig = float(np.sum(np.arange(1, q + 1) * yup / 2.0))
    nu = float(np.sum((dv - q + np.arange(1, q + 1)) * yup / 2.0))
    sig_knots, nu_knots = [sig], [nu]
    for i in range(q, 0, -1):
        width = yup[i - 1] / 2.0
        if width <= 0:
            continue
        sig += i * width
        nu += (dv - q + i) * width
        sig_knots.append(sig)
        nu_knots.append(nu)
    return np.array(sig_knots), np.array(nu_knots)


def _y_from_sigma(params: ExponentParams, yup: np.ndarray, sigma: float) -> np.ndarray:
    """The edge-minimizing request vector realizing the given sigma."""
    q = params.q
    y = yup / 2.0
    remaining = sigma - float(np.sum(np.arange(1, q + 1) * y))
    for i in range(q, 0, -1):
        if remaining <= 0:
            break
        room = i * (yup[i - 1] - y[i - 1])
        take = min(room, remaining)
        y[i - 1] += take / i
        remaining -= take
    return y


class _GReduced:
    """Four-axis reduction of the big-set surface (capped counting term).

    u in [0,1]^4 maps to s1 = u0*s_crit, g1 = u1*d_v*s1,
    g2 = u2*d_v*(alpha-s1), sigma = (1+u3)/2 * vbar. With the counting term
    capped at zero it contributes nothing, so this evaluation is exactly the
    supremum objective; with ``envelope_uncapped`` the counting term is
    replaced by its box maximum alpha*H(s1/alpha) + sum_i yup_i, a pointwise
    upper bound used only for certification.
    """

    def __init__(self, params: ExponentParams, sc: float, envelope_uncapped: bool = False):
        self.params = params
        self.sc = sc
        self.yup = ybar_up(params)
        self.envelope_uncapped = envelope_uncapped
        self.dim = 4
        self.sig_knots, self.nu_knots = _knapsack_edge_minimum(params, self.yup)
        self.sig_lo = self.sig_knots[0]
        self.sig_hi = self.sig_knots[-1]
        self.yup_total = float(np.sum(self.yup))
        self.evaluations = 0

    def map_point(self, U: np.ndarray):
        p = self.params
        s1 = U[..., 0] * self.sc
        g1 = U[..., 1] * p.d_v * s1
        g2 = U[..., 2] * p.d_v * (p.alpha - s1)
        sigma = self.sig_lo + U[..., 3] * (self.sig_hi - self.sig_lo)
        return s1, g1, g2, sigma

    def eval_u(self, U: np.ndarray) -> np.ndarray:
        self.evaluations += int(np.prod(U.shape[:-1]))
        s1, g1, g2, sigma = self.map_point(U)
        p = self.params
        R, dv, alpha = p.rate, p.d_v, p.alpha
        nu = np.interp(sigma, self.sig_knots, self.nu_knots)
        with np.errstate(divide="ignore", invalid="ignore"):
            oneR = 1.0 - R
            G2 = oneR * _H(np.clip(g1 / oneR, 0.0, 1.0)) + _xlog2(dv * s1, g1 / oneR)
            G2 = np.where(g1 > oneR, NEG, G2)
            rem = oneR - g1
            G3 = np.where(rem > 0, rem, 1.0) * _H(
                np.clip(np.divide(g2, rem, out=np.zeros_like(g2), where=rem > 0), 0.0, 1.0)
            ) + _xlog2(dv * (alpha - s1), (g1 + g2) / oneR)
            G3 = np.where((g2 > rem) | (g1 + g2 > oneR), NEG, G3)
            beta = p.p * s1 - g1 + sigma
            mn = np.minimum(g2, beta)
            h4 = np.where(
                g2 > 0,
                g2 * _H(np.clip(np.divide(mn, g2, out=np.zeros_like(mn), where=g2 > 0), 0.0, 1.0)),
                0.0,
            )
            denom = g1 + g2
            log_arg = np.divide(g1 + mn, denom, out=np.ones_like(denom), where=denom > 0)
            G4 = np.where(beta < 0, NEG, h4 + _xlog2(nu, log_arg))
            out = np.minimum(0.0, G2) + np.minimum(0.0, G3) + np.minimum(0.0, G4)
            if self.envelope_uncapped:
                out = out + alpha * _H(np.clip(s1 / alpha, 0.0, 1.0)) + self.yup_total
        return np.where(np.isnan(out), NEG, out)


class _GPrimeEnvelope:
    """Two-axis upper envelope of the small-set surface for certification.

    u in [0,1]^2 maps to g2 = u0*d_v*alpha and sigma as above; the entropy
    term is replaced by its maximum sum_i yup_i, the edge count by its
    knapsack minimum, both of which only raise the surface.
    """

    def __init__(self, params: ExponentParams, eps2: float):
        self.params = params
        self.eps2 = eps2
        self.yup = ybar_up(params)
        self.dim = 2
        self.sig_knots, self.nu_knots = _knapsack_edge_minimum(params, self.yup)
        self.sig_lo, self.sig_hi = self.sig_knots[0], self.sig_knots[-1]
        self.yup_total = float(np.sum(self.yup))
        self.evaluations = 0

    def eval_u(self, U: np.ndarray) -> np.ndarray:
        self.evaluations += int(np.prod(U.shape[:-1]))
        p, eps2 = self.params, self.eps2
        R, dv, alpha = p.rate, p.d_v, p.alpha
        g2 = U[..., 0] * dv * alpha
        sigma = self.sig_lo + U[..., 1] * (self.sig_hi - self.sig_lo)
        nu = np.interp(sigma, self.sig_knots, self.nu_knots)
        rem = (1.0 - R) - dv * eps2
        if rem <= 0 or eps2 > alpha:
            return np.full(g2.shape, NEG)
        with np.errstate(divide="ignore", invalid="ignore"):
            Gp1 = rem * _H(np.clip(g2 / rem, 0.0, 1.0)) + _xlog2(
                dv * (alpha - eps2), (dv * eps2 + g2) / (1.0 - R)
            )
            Gp1 = np.where(g2 > rem, NEG, Gp1)
            betap = sigma + p.p * eps2
            mn = np.minimum(g2, betap)
            h2 = np.where(
                g2 > 0,
                g2 * _H(np.clip(np.divide(mn, g2, out=np.zeros_like(mn), where=g2 > 0), 0.0, 1.0)),
                0.0,
            )
            Gp2 = h2 + _xlog2(nu, (dv * eps2 + mn) / (dv * eps2 + g2))
            head = alpha * float(_H(np.clip(eps2 / alpha, 0.0, 1.0))) + self.yup_total
            out = np.minimum(0.0, Gp1) + np.minimum(0.0, Gp2) + head
        return np.where(np.isnan(out), NEG, out)


def _axis_linspaces(dims: tuple[int, ...]) -> list[np.ndarray]:
    return [np.linspace(0.0, 1.0, max(int(k), 1)) for k in dims]


def _grid_eval(land, axes: list[np.ndarray], chunk: int = 2_000_000) -> np.ndarray:
    """Evaluate the landscape on the product grid, chunked by leading axes."""
    shape = tuple(len(ax) for ax in axes)
    total = int(np.prod(shape))
    if total <= chunk or len(shape) <= 2:
        mesh = np.meshgrid(*axes, indexing="ij")
        U = np.stack(mesh, axis=-1)
        return land.eval_u(U)
    out = np.empty(shape)
    tail_axes = axes[1:]
    mesh_tail = np.meshgrid(*tail_axes, indexing="ij")
    tail = np.stack(mesh_tail, axis=-1)
    for i0, a0 in enumerate(axes[0]):
        lead = np.broadcast_to(np.array([a0]), tail.shape[:-1] + (1,))
        U = np.concatenate([lead, tail], axis=-1)
        out[i0] = land.eval_u(U)
    return out


def _multistart_best(land, dims: tuple[int, ...], keep: int) -> tuple[float, list[np.ndarray]]:
    """Product-grid sweep; returns the best value and top-``keep`` points."""
    axes = _axis_linspaces(dims)
    shape = tuple(len(ax) for ax in axes)
    total = int(np.prod(shape))
    best = NEG
    tops: list[tuple[float, np.ndarray]] = []
    if total <= 4_000_000:
        V = _grid_eval(land, axes)
        k = min(keep, V.size)
        flat = np.argpartition(V, V.size - k, axis=None)[-k:]
        coords = np.unravel_index(flat, V.shape)
        pts = [
            np.array([axes[d][coords[d][t]] for d in range(len(axes))])
            for t in range(len(flat))
        ]
        order = np.argsort([-float(V[tuple(c[t] for c in coords)]) for t in range(len(flat))])
        return float(np.max(V)), [pts[i] for i in order]
    tail_axes = axes[1:]
    mesh_tail = np.meshgrid(*tail_axes, indexing="ij")
    tail = np.stack(mesh_tail, axis=-1).reshape(-1, len(tail_axes))
    for a0 in axes[0]:
        lead = np.broadcast_to(np.array([a0]), (tail.shape[0], 1))
        U = np.concatenate([lead, tail], axis=-1)
        vals = land.eval_u(U)
        k = min(keep, vals.size)
        idx = np.argpartition(vals, vals.size - k)[-k:]
        for t in idx:
            v = float(vals[t])
            if v > best:
                best = v
            tops.append((v, U[t].copy()))
    tops.sort(key=lambda kv: -kv[0])
    return best, [u for _, u in tops[:keep]]


def _pattern_search(land, start: np.ndarray, opts: SupOptions) -> tuple[float, np.ndarray]:
    """Coordinate pattern search inside the unit box, step halving to 1e-8."""
    x = np.clip(start.astype(float), 0.0, 1.0)
    fx = float(land.eval_u(x[None, :])[0])
    h = 0.25
    moves = 0
    d = len(x)
    while h > opts.pattern_step_min and moves < opts.pattern_max_moves:
        improved = False
        for k in range(d):
            for sign in (1.0, -1.0):
                xk = x[k] + sign * h
                if xk < 0.0 or xk > 1.0:
                    continue
                x2 = x.copy()
                x2[k] = xk
                f2 = float(land.eval_u(x2[None, :])[0])
                moves += 1
                if f2 > fx + 1e-15:
                    x, fx = x2, f2
                    improved = True
        if not improved:
            h *= 0.5
    return fx, x


def _peak_field(V: np.ndarray) -> np.ndarray:
    """Local peak estimates V + sum_ax (largest adjacent jump)/2.

    Between two samples a smooth ridge can overshoot the larger one by about
    half the jump per axis; summing the per-axis local variations yields a
    cell-local margin that stays enormous only where the surface is already
    far below zero. Non-finite neighbors (infeasible cells) contribute
    nothing: the surface dives to -inf there.
    """
    finite = np.isfinite(V)
    localvar = np.zeros_like(V)
    with np.errstate(invalid="ignore"):
        for ax in range(V.ndim):
            if V.shape[ax] < 2:
                continue
            a = np.moveaxis(V, ax, 0)
            fin = np.moveaxis(finite, ax, 0)
            diff = np.abs(np.where(fin[:-1] & fin[1:], a[:-1] - a[1:], 0.0))
            contrib = np.zeros_like(a)
            contrib[:-1] = diff
            contrib[1:] = np.maximum(contrib[1:], diff)
            localvar += np.moveaxis(contrib, 0, ax) / 2.0
    return np.where(finite, V + localvar, NEG)


def _negativity_margin(land, dims: tuple[int, ...], opts: SupOptions, best: float):
    """Grid-plus-margin negativity check with adaptive local refinement.

    A global grid gives per-cell peak estimates; cells whose peak reaches
    the target band best + margin_ratio*|best| are re-sampled on 3^d local
    subgrids at half spacing, recursively, until every local peak drops
    below the band (certified) or the refinement budget runs out. Kinks of
    the min{0, .} pieces make global refinement converge only linearly, so
    effort concentrates where the bound is actually at risk.

    Returns (best, slack, certified, levels). ``slack`` is the final gap
    between the worst surviving peak estimate and the best value.
    """
    d = land.dim
    axes = _axis_linspaces(tuple(dims[:d]) if len(dims) >= d else tuple(dims) + (9,) * (d - len(dims)))
    V = _grid_eval(land, axes)
    grid_best = float(np.max(V))
    if grid_best > best:
        best = grid_best
    if best >= 0:
        return best, inf, False, 0
    peak = _peak_field(V)
    max_peak = float(np.max(peak))
    slack = max(max_peak - best, 0.0)

    def threshold() -> float:
        return best + opts.margin_ratio * abs(best)

    sus = np.argwhere(peak >= threshold())
    if sus.size == 0:
        return best, slack, max_peak < 0, 0
    centers = np.stack(
        [np.asarray(axes[k])[sus[:, k]] for k in range(d)], axis=1
    )
    h = np.array([ax[1] - ax[0] if len(ax) > 1 else 0.0 for ax in axes])
    offsets = np.stack(np.meshgrid(*([np.array([-1.0, 0.0, 1.0])] * d), indexing="ij"), axis=-1)
    offsets = offsets.reshape(-1, d)                      # (3^d, d)
    levels = 0
    spent = 0
    for levels in range(1, opts.max_refines + 1):
        if centers.shape[0] == 0:
            return best, slack, True, levels
        if centers.shape[0] > 400_000 or spent > opts.max_grid_size:
            return best, slack, False, levels
        pts = centers[:, None, :] + offsets[None, :, :] * (h / 2.0)
        np.clip(pts, 0.0, 1.0, out=pts)
        Vl = land.eval_u(pts).reshape((centers.shape[0],) + (3,) * d)
        spent += Vl.size
        local_best = float(np.max(Vl))
        if local_best > best:
            best = local_best
            if best >= 0:
                return best, slack, False, levels
        # per-point local variation inside each 3^d cube
        localvar = np.zeros_like(Vl)
        finite = np.isfinite(Vl)
        with np.errstate(invalid="ignore"):
            for ax in range(d):
                a = np.moveaxis(Vl, 1 + ax, 1)
                fin = np.moveaxis(finite, 1 + ax, 1)
                diff = np.abs(np.where(fin[:, :-1] & fin[:, 1:], a[:, :-1] - a[:, 1:], 0.0))
                contrib = np.zeros_like(a)
                contrib[:, :-1] = diff
                contrib[:, 1:] = np.maximum(contrib[:, 1:], diff)
                localvar += np.moveaxis(contrib, 1, 1 + ax) / 2.0
        peak_l = np.where(finite, Vl + localvar, NEG)
        max_peak = float(np.max(peak_l))
        slack = max(max_peak - best, 0.0)
        keep = peak_l >= threshold()
        if not keep.any():
            return best, slack, True, levels
        flat_pts = pts.reshape(-1, d)[keep.reshape(-1)]
        h = h / 2.0
        # dedupe points shared by adjacent cells
        key = np.round(flat_pts / np.maximum(h / 4.0, 1e-15)).astype(np.int64)
        _, uniq = np.unique(key, axis=0, return_index=True)
        centers = flat_pts[np.sort(uniq)]
    return best, slack, False, levels


def F_alpha(params: ExponentParams, options: SupOptions | None = None,
            s_crit_val: float | None = None, cap_counting: bool = True) -> SupResult:
    """Supremum of the big-set exponent G over its certificate box.

    With the default capped counting term the four-axis reduction is exact,
    so both the multistart grid (>= 9 points per axis) and the negativity
    margin run on (s1, gamma1, gamma2, sigma). The uncapped variant searches
    the full box for the value and certifies against the four-axis upper
    envelope instead.
    """
    opts = options or SupOptions()
    sc = s_crit_val if s_crit_val is not None else s_crit(params)
    reduced = _GReduced(params, sc)
    dims = (opts.multistart_axis_points + 4, opts.multistart_axis_points + 4,
            opts.g2_axis_points, opts.multistart_axis_points + 4)
    best, tops = _multistart_best(reduced, dims, keep=opts.pattern_starts)
    arg = tops[0] if tops else np.zeros(4)
    for u0 in tops:
        f, u = _pattern_search(reduced, u0, opts)
        if f > best:
            best, arg = f, u
    evaluations = reduced.evaluations

    if not cap_counting:
        # value needs the full box; seed the search from the reduced optimum
        land = _GLandscape(params, sc, cap_counting=False)
        s1, g1, g2, sigma = reduced.map_point(np.asarray(arg))
        y0 = _y_from_sigma(params, reduced.yup, float(sigma))
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.divide(2.0 * y0, reduced.yup, out=np.ones_like(y0), where=reduced.yup > 0) - 1.0
        seed = np.concatenate([np.asarray(arg)[:3], np.clip(w, 0.0, 1.0)])
        gdims = tuple([opts.multistart_axis_points] * 2 + [opts.g2_axis_points]
                      + [opts.multistart_axis_points] * 2 + [5] * max(params.q - 2, 0))
        gbest, gtops = _multistart_best(land, gdims, keep=opts.pattern_starts)
        best = max(best, gbest)
        arg_full = seed
        for u0 in [seed] + gtops:
            f, u = _pattern_search(land, u0, opts)
            if f > best:
                best, arg_full = f, u
        evaluations += land.evaluations
        s1f, g1f, g2f, Y = land.map_point(np.asarray(arg_full))
        point = {"s1": float(s1f), "gamma1": float(g1f), "gamma2": float(g2f),
                 "y": np.asarray(Y, dtype=float).tolist()}
        env = _GReduced(params, sc, envelope_uncapped=True)
        margin_land = env
    else:
        s1, g1, g2, sigma = reduced.map_point(np.asarray(arg))
        y = _y_from_sigma(params, reduced.yup, float(sigma))
        point = {"s1": float(s1), "gamma1": float(g1), "gamma2": float(g2),
                 "y": y.tolist()}
        margin_land = reduced

    certified = False
    slack = inf
    refinements = 0
    if best < 0:
        best, slack, certified, refinements = _negativity_margin(
            margin_land, opts.margin_grid, opts, best
        )
    evaluations = margin_land.evaluations if margin_land is reduced else evaluations + margin_land.evaluations
    return SupResult(value=best, point=point, certified_negative=certified,
                     slack=slack, refinements=refinements, evaluations=evaluations)


def F_prime(params: ExponentParams, eps2: float, options: SupOptions | None = None) -> SupResult:
    """Supremum of the small-set exponent G' at the given eps2.

    The reported value is searched in full (gamma2, y) dimension;
    certification bounds the two-axis upper envelope, which is tight at the
    entropy-maximizing request vectors where the surface actually peaks.
    """
    if eps2 <= 0:
        raise ExponentError(f"eps2 must be positive, got {eps2}")
    opts = options or SupOptions()
    land = _GPrimeLandscape(params, eps2)
    dims = tuple([max(opts.g2_axis_points, 2 * opts.multistart_axis_points + 1)]
                 + [opts.multistart_axis_points] * params.q)
    best, tops = _multistart_best(land, dims, keep=opts.pattern_starts)
    arg = tops[0] if tops else np.zeros(land.dim)
    for u0 in tops:
        f, u = _pattern_search(land, u0, opts)
        if f > best:
            best, arg = f, u
    g2, Y = land.map_point(np.asarray(arg))
    point = {"gamma2": float(g2), "y": np.asarray(Y, dtype=float).tolist()}

    certified = False
    slack = inf
    refinements = 0
    env_evals = 0
    if best < 0:
        env = _GPrimeEnvelope(params, eps2)
        env_best, slack, certified, refinements = _negativity_margin(
            env, (65, 33), opts, best
        )
        env_evals = env.evaluations
        # the envelope dominates the surface pointwise; its peak is the bound
        if env_best > best and not certified:
            slack = max(slack, env_best - best)
    return SupResult(value=best, point=point, certified_negative=certified,
                     slack=slack, refinements=refinements,
                     evaluations=land.evaluations + env_evals)


def three_inequalities(params: ExponentParams, s_crit_val: float, reading: str = "sum") -> dict:
    """The three scalar certificate inequalities evaluated literally.

    The third line is printed in the source material with no operator
    between its two factors; ``reading='sum'`` (default) adds them, which is
    the combination the gamma -> 0 limit of the residual exponent actually
    uses; ``reading='product'`` multiplies instead.
    """
    sc, alpha, dv, R = s_crit_val, params.alpha, params.d_v, params.rate
    cond_a = sc < alpha / 2.0
    cond_b = alpha * dv < ((1.0 - R) - dv * sc) / 2.0
    t1 = alpha * float(_H(np.clip(sc / alpha, 0.0, 1.0)))
    t2 = float(_xlog2(dv * (alpha - sc), dv * sc / (1.0 - R)))
    lhs = t1 + t2 if reading == "sum" else t1 * t2
    cond_c = lhs < 0
    return {
        "s_crit_below_half_alpha": bool(cond_a),
        "alpha_dv_below_residual_half": bool(cond_b),
        "gamma_limit_negative": bool(cond_c),
        "gamma_limit_value": lhs,
        "reading": reading,
    }


# -- certificate and threshold search --------------------------------------


@dataclass
class ExponentReport:
    params: ExponentParams
    b: tuple[float, ...]
    ybar_up: tuple[float, ...]
    vbar: float
    s_crit: float
    gamma1_crit: float
    gamma1_crit_eps2: dict
    gamma2_star: float | None
    F: SupResult | None
    Fprime: dict
    conditions: dict
    certified: bool
    metadata: dict

    def to_json_dict(self) -> dict:
        def supdict(r: SupResult | None):
            if r is None:
                return None
            return {
                "value": r.value, "point": r.point, "certified_negative": r.certified_negative,
                "slack": None if not isfinite(r.slack) else r.slack,
                "refinements": r.refinements, "evaluations": r.evaluations,
            }

        return {
            "schema_version": 1,
            "params": {
                "rate": self.params.rate, "d_v": self.params.d_v, "p": self.params.p,
                "q": self.params.q, "alpha": self.params.alpha, "eps1": self.params.eps1,
                "eps2_grid": list(self.params.eps2_grid),
            },
            "b": list(self.b),
            "ybar_up": list(self.ybar_up),
            "vbar": self.vbar,
            "s_crit": self.s_crit,
            "gamma1_crit": self.gamma1_crit,
            "gamma1_crit_eps2": {str(k): v for k, v in self.gamma1_crit_eps2.items()},
            "gamma2_star": self.gamma2_star,
            "F": supdict(self.F),
            "Fprime": {str(k): supdict(v) for k, v in self.Fprime.items()},
            "conditions": self.conditions,
            "certified": self.certified,
            "metadata": self.metadata,
        }


def certificate(
    params: ExponentParams,
    options: SupOptions | None = None,
    compute_all_fprime: bool = True,
    ineq_reading: str = "sum",
    cap_counting: bool = True,
) -> ExponentReport:
    """Full evaluation: every rate quantity, all conditions, and the verdict.

    Certified requires the (p, q, d_v) restrictions, the three scalar
    inequalities, a certifiably negative F(alpha), and at least one eps2
    from the grid with a certifiably negative F'(alpha, eps2). With
    ``compute_all_fprime`` false, eps2 values are tried smallest-first and
    evaluation stops at the first negative one.
    """
    opts = options or SupOptions()
    meta = {
        "contraction_inequality": "strict",
        "qmodel_inequality": "leq",
        "third_inequality_reading": ineq_reading,
        "counting_term_capped": cap_counting,
        "duplicate_neighborhoods_allowed": True,
    }
    restrictions = params.restrictions_ok()
    conditions: dict = {"pq_dv_restrictions": restrictions}
    try:
        b = tuple(float(x) for x in b_coeffs(params))
    except ExponentError as exc:
        conditions.update({"model_valid": False, "reason": str(exc)})
        return ExponentReport(
            params=params, b=(), ybar_up=(), vbar=float("nan"), s_crit=params.alpha,
            gamma1_crit=0.0, gamma1_crit_eps2={}, gamma2_star=None, F=None, Fprime={},
            conditions=conditions, certified=False, metadata=meta,
        )
    yup = tuple(float(x) for x in ybar_up(params))
    v = vbar(params)
    sc = s_crit(params)
    ineq = three_inequalities(params, sc, reading=ineq_reading)
    conditions.update(ineq)
    g1c = gamma1_crit(sc, params.d_v, params.rate)
    g1c_eps2 = {e: gamma1_crit(e, params.d_v, params.rate) for e in params.eps2_grid}
    g2s = gamma2_star(params, sc) if ineq["gamma_limit_negative"] else None

    scalar_ok = (
        restrictions
        and ineq["s_crit_below_half_alpha"]
        and ineq["alpha_dv_below_residual_half"]
        and ineq["gamma_limit_negative"]
    )
    Fres = None
    fprime: dict = {}
    exists_eps2 = False
    if scalar_ok or compute_all_fprime:
        Fres = F_alpha(params, opts, s_crit_val=sc, cap_counting=cap_counting)
        conditions["F_negative"] = bool(Fres.certified_negative)
        if Fres.certified_negative or compute_all_fprime:
            for e in sorted(e for e in params.eps2_grid if e > 0):
                r = F_prime(params, e, opts)
                fprime[e] = r
                if r.certified_negative:
                    exists_eps2 = True
                    if not compute_all_fprime:
                        break
        conditions["exists_eps2_Fprime_negative"] = exists_eps2
    else:
        conditions["F_negative"] = False
        conditions["exists_eps2_Fprime_negative"] = False
    certified = bool(scalar_ok and conditions["F_negative"] and exists_eps2)
    return ExponentReport(
        params=params, b=b, ybar_up=yup, vbar=v, s_crit=sc,
        gamma1_crit=g1c, gamma1_crit_eps2=g1c_eps2, gamma2_star=g2s,
        F=Fres, Fprime=fprime, conditions=conditions, certified=certified, metadata=meta,
    )


@dataclass
class AlphaSearchResult:
    alpha_star: float
    bracket: tuple[float, float]
    verified_below: tuple[tuple[float, bool], ...]
    report_at_star: ExponentReport | None


def alpha_crit_search(
    rate: float,
    d_v: int,
    p: int,
    q: int,
    eps1: float = 0.0,
    eps2_grid: tuple[float, ...] | None = None,
    resolution: float = 1e-5,
    alpha_init: float = 1e-3,
    options: SupOptions | None = None,
) -> AlphaSearchResult:
    """Largest certified alpha by bisection at the given resolution.

    Brackets by doubling from a certified starting point, bisects to
    ``resolution``, then re-verifies certification on a 5-point grid below
    the result. Returns alpha_star = 0 when nothing certifies.
    """
    grid = tuple(eps2_grid) if eps2_grid is not None else DEFAULT_EPS2_GRID
    probe = ExponentParams(rate=rate, d_v=d_v, p=p, q=q, alpha=0.5, eps1=eps1, eps2_grid=grid)
    if not probe.restrictions_ok():
        return AlphaSearchResult(0.0, (0.0, 0.0), (), None)

    cache: dict[float, ExponentReport] = {}

    def cert(alpha: float) -> ExponentReport:
        key = round(alpha, 12)
        if key not in cache:
            params = ExponentParams(rate=rate, d_v=d_v, p=p, q=q, alpha=alpha, eps1=eps1, eps2_grid=grid)
            cache[key] = certificate(params, options, compute_all_fprime=False)
        return cache[key]

    lo = alpha_init
    tries = 0
    while lo > resolution and not cert(lo).certified and tries < 12:
        lo /= 2.0
        tries += 1
    if not cert(lo).certified:
        return AlphaSearchResult(0.0, (0.0, lo), (), None)
    hi = lo * 2.0
    while hi < 0.5 and cert(hi).certified:
        lo = hi
        hi *= 2.0
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if cert(mid).certified:
            lo = mid
        else:
            hi = mid

    alpha_star = lo
    verified: list[tuple[float, bool]] = []
    for _ in range(3):
        verified = []
        ok = True
        for frac in (0.5, 0.6, 0.7, 0.8, 0.9):
            a = alpha_star * frac
            good = cert(a).certified
            verified.append((a, good))
            if not good:
                ok = False
                alpha_star = max(a - resolution, 0.0)
                break
        if ok:
            break
    if alpha_star <= 0:
        return AlphaSearchResult(0.0, (0.0, hi), tuple(verified), None)
    return AlphaSearchResult(alpha_star, (lo, hi), tuple(verified), cert(alpha_star))


def feldman_coefficient(p_expand: int) -> Fraction:
    """Exact comparison coefficient (3p - 2)/(2p - 1)."""
    if p_expand < 1:
        raise ExponentError(f"p_expand must be >= 1, got {p_expand}")
    return Fraction(3 * p_expand - 2, 2 * p_expand - 1)


def feldman_bound(p_expand: int, mu: float) -> float:
    """Correctable-fraction guarantee (3p - 2)/(2p - 1) * mu of the prior
    worst-case expansion analysis, for comparison against alpha_star."""
    if not 0.0 <= mu <= 1.0:
        raise ExponentError(f"mu must lie in [0, 1], got {mu}")
    return float(feldman_coefficient(p_expand)) * mu
