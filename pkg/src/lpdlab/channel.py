"""Binary symmetric channel simulation under the all-zero-codeword convention.

Decoding and witness code consume only the normalized cost vector gamma
(entries in {-1, +1}), never a transmitted word: by the symmetry of the
relaxed polytope, success depends only on the flipped set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import ceil

import numpy as np

__all__ = ["FlipPattern", "Gamma", "sample_flips", "gamma_from_flips"]


@dataclass(frozen=True)
class FlipPattern:
    """Set of flipped bit positions within a block of length n."""

    n: int
    flipped: frozenset[int]

    def __post_init__(self):
        if any(not 0 <= i < self.n for i in self.flipped):
            raise ValueError("flipped index out of range")

    @property
    def count(self) -> int:
        return len(self.flipped)

    @property
    def alpha(self) -> float:
        return len(self.flipped) / self.n if self.n else 0.0

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "flipped": sorted(self.flipped)})

    @classmethod
    def from_json(cls, s: str) -> "FlipPattern":
        d = json.loads(s)
        return cls(int(d["n"]), frozenset(int(i) for i in d["flipped"]))


@dataclass(frozen=True)
class Gamma:
    """Normalized log-likelihood vector: -1 on flipped bits, +1 elsewhere."""

    values: tuple[int, ...]

    def __post_init__(self):
        if any(v not in (-1, 1) for v in self.values):
            raise ValueError("gamma entries must be -1 or +1")

    @property
    def n(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


def sample_flips(
    n: int,
    alpha: float,
    mode: str = "exact",
    rng: np.random.Generator | None = None,
) -> FlipPattern:
    """Sample the flipped set: 'exact' draws a uniform ceil(alpha*n)-subset,
    'bernoulli' flips each bit independently with probability alpha."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if n < 0:
        raise ValueError("n must be non-negative")
    if rng is None:
        rng = np.random.default_rng()
    if mode == "exact":
        k = ceil(alpha * n)
        flipped = rng.choice(n, size=k, replace=False) if k else np.empty(0, dtype=int)
    elif mode == "bernoulli":
        flipped = np.flatnonzero(rng.random(n) < alpha)
    else:
        raise ValueError(f"mode must be 'exact' or 'bernoulli', got {mode!r}")
    return FlipPattern(n, frozenset(int(i) for i in flipped))


def gamma_from_flips(pattern: FlipPattern) -> Gamma:
    """gamma_i = -1 iff bit i was flipped, else +1."""
    return Gamma(tuple(-1 if i in pattern.flipped else 1 for i in range(pattern.n)))
