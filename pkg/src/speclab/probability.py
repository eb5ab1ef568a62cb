"""Probability primitives shared by every verifier and oracle in the lab.

Mass vectors are plain numpy float64 arrays wrapped in a validated
``Distribution``. Joint probabilities of token prefixes are carried in log
space with an absorbing -inf marker for exact zeros, because products of
conditionals over a block underflow in linear space for peaked models.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

SUM_TOL = 1e-9
LOG_ZERO = float("-inf")


class AllZeroMass(ValueError):
    """Raised when a vector that must be normalized has no positive mass."""


def derive_seed(master: int, *indices: int) -> int:
    """Stable 63-bit seed for a (master seed, index...) cell.

    Used to hand each (config, trial, prompt) cell its own stream so that
    result aggregation is order independent.
    """
    blob = ":".join(str(x) for x in (master, *indices)).encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big") >> 1


class RandomSource:
    """Seeded uniform stream. Identical seed, identical draw sequence."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self) -> float:
        return float(self._gen.random())

    def spawn(self, *indices: int) -> "RandomSource":
        return RandomSource(derive_seed(self.seed, *indices))

    def __repr__(self) -> str:  # pragma: no cover
        return f"RandomSource(seed={self.seed})"


@dataclass(frozen=True)
class Distribution:
    """Probability vector over the vocabulary: entries >= 0, sum within 1e-9 of 1."""

    mass: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=np.float64)
        object.__setattr__(self, "mass", m)
        if m.ndim != 1 or m.size == 0:
            raise ValueError("mass must be a non-empty 1-d vector")
        if np.any(m < 0):
            raise ValueError("negative probability mass")
        s = float(m.sum())
        if abs(s - 1.0) > SUM_TOL:
            raise ValueError(f"mass sums to {s!r}, not 1")

    @property
    def vocab_size(self) -> int:
        return int(self.mass.size)

    def __len__(self) -> int:
        return int(self.mass.size)


def normalize(raw) -> Distribution:
    """Scale a nonnegative vector to total mass 1.

    Raises AllZeroMass when every entry is zero; callers on defensive
    residual branches decide their own fallback.
    """
    v = np.asarray(raw, dtype=np.float64)
    if np.any(v < 0):
        raise ValueError("normalize requires nonnegative entries")
    s = float(v.sum())
    if s <= 0.0:
        raise AllZeroMass("no positive mass to normalize")
    return Distribution(v / s)


def residual_sd(p: Distribution, q: Distribution) -> Distribution:
    """Single-draft rejection residual: norm(max(q - p, 0)).

    AllZeroMass can only occur when p >= q pointwise, in which case the
    rejection event that needs this residual has probability zero.
    """
    return normalize(np.maximum(q.mass - p.mass, 0.0))


def tv_distance(a: Distribution, b: Distribution) -> float:
    return 0.5 * float(np.abs(a.mass - b.mass).sum())


def sample(d: Distribution, rng: RandomSource) -> int:
    """Inverse-CDF draw with a single uniform and a linear vocabulary scan."""
    u = rng.uniform()
    acc = 0.0
    last_positive = -1
    for i, w in enumerate(d.mass):
        if w > 0.0:
            last_positive = i
            acc += float(w)
            if u < acc:
                return i
    # u landed in the float dust past the last cumulative step
    return last_positive


@dataclass(frozen=True)
class PrefixJoint:
    """Joint probability of a token prefix under draft (p) and target (q) chains.

    log_p and log_q are natural logs; exact zero probability is the absorbing
    marker -inf, which is a representable state rather than an error.
    """

    log_p: float
    log_q: float
    tokens: tuple[int, ...] = field(default=())

    @classmethod
    def empty(cls) -> "PrefixJoint":
        return cls(0.0, 0.0, ())

    @property
    def p(self) -> float:
        return math.exp(self.log_p) if self.log_p != LOG_ZERO else 0.0

    @property
    def q(self) -> float:
        return math.exp(self.log_q) if self.log_q != LOG_ZERO else 0.0

    def ratio_p_over_q(self) -> float:
        """p/q with the convention q = 0 => +inf (so min(ratio, 1) = 1)."""
        if self.log_q == LOG_ZERO:
            return float("inf")
        if self.log_p == LOG_ZERO:
            return 0.0
        d = self.log_p - self.log_q
        if d > 700.0:
            return float("inf")
        return math.exp(d)

    def ratio_q_over_p(self) -> float:
        """q/p likelihood ratio; p = 0 => +inf."""
        if self.log_p == LOG_ZERO:
            return float("inf")
        if self.log_q == LOG_ZERO:
            return 0.0
        d = self.log_q - self.log_p
        if d > 700.0:
            return float("inf")
        return math.exp(d)


def _log(x: float) -> float:
    return math.log(x) if x > 0.0 else LOG_ZERO


def extend_joint(j: PrefixJoint, next_token: int, p_cond: Distribution, q_cond: Distribution) -> PrefixJoint:
    """Multiply one more conditional into both chains; -inf absorbs."""
    lp = j.log_p + _log(float(p_cond.mass[next_token])) if j.log_p != LOG_ZERO else LOG_ZERO
    lq = j.log_q + _log(float(q_cond.mass[next_token])) if j.log_q != LOG_ZERO else LOG_ZERO
    return PrefixJoint(lp, lq, j.tokens + (int(next_token),))
