"""Precision emulation and mergeable mean/variance accumulators."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class PrecisionMode(str, enum.Enum):
    FULL = "full"
    BF16 = "bf16"


# bfloat16: 8 significant bits, float32 exponent range.
_BF16_SIG_BITS = 8
_BF16_MIN_EXP = -133  # exponent of the smallest subnormal, 2**-133
_BF16_MAX = (2.0 - 2.0**-7) * 2.0**127
_BF16_OVERFLOW = (2.0 - 2.0**-8) * 2.0**127


def round_bf16(x):
    """Round to the nearest bfloat16 value (ties to even), returned as float64.

    Works elementwise on arrays; scalars come back as Python floats.
    Non-finite inputs pass through unchanged.
    """
    arr = np.asarray(x, dtype=np.float64)
    _, exp = np.frexp(arr)
    # ulp of an 8-bit significand in [0.5, 1) * 2**exp, floored at the subnormal step
    quantum_exp = np.maximum(exp - _BF16_SIG_BITS, _BF16_MIN_EXP)
    with np.errstate(invalid="ignore", over="ignore"):
        out = np.ldexp(np.rint(np.ldexp(arr, -quantum_exp)), quantum_exp)
        out = np.where(np.abs(arr) >= _BF16_OVERFLOW, np.copysign(np.inf, arr), out)
    out = np.where(np.isfinite(arr), out, arr)
    if np.ndim(x) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class Welford:
    """Count / mean / sum of squared deviations; ``mean`` and ``m2`` may be arrays."""

    count: int = 0
    mean: np.ndarray | float = 0.0
    m2: np.ndarray | float = 0.0

    @classmethod
    def from_samples(cls, values: np.ndarray) -> Welford:
        """Accumulate along axis 0.

        The data are shifted by the first sample before averaging, so a batch of
        identical values yields that value exactly and a zero ``m2``.
        """
        values = np.asarray(values, dtype=np.float64)
        n = values.shape[0]
        if n == 0:
            return cls()
        shift = values[0]
        mean = shift + np.mean(values - shift, axis=0)
        m2 = np.sum(np.square(values - mean), axis=0)
        return cls(n, mean, m2)

    @property
    def variance(self):
        """Sample (n - 1) variance."""
        if self.count < 2:
            return np.zeros_like(self.m2) if np.ndim(self.m2) else 0.0
        return self.m2 / (self.count - 1)

    @property
    def std_error(self):
        if self.count < 2:
            return np.zeros_like(self.m2) if np.ndim(self.m2) else 0.0
        return np.sqrt(self.variance / self.count)


def welford_merge(a: Welford, b: Welford) -> Welford:
    """Combine two accumulators (Chan et al. parallel update).

    Written so that ``welford_merge(a, b)`` and ``welford_merge(b, a)`` agree
    bit for bit: every binary operation used is commutative in its operands.
    """
    if a.count == 0:
        return b
    if b.count == 0:
        return a
    n = a.count + b.count
    delta = b.mean - a.mean
    weighted = (a.count * a.mean + b.count * b.mean) / n
    # equal means stay exact instead of picking up rounding from the weighted form
    mean = np.where(delta == 0, a.mean, weighted)
    m2 = (a.m2 + b.m2) + delta * delta * (a.count * b.count / n)
    if np.ndim(mean) == 0:
        mean = float(mean)
        m2 = float(m2)
    return Welford(n, mean, m2)
