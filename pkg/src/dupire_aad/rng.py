"""Counter-based normal streams indexed by (seed, salt, path, step).

Each draw is one Philox-4x32-10 block evaluated at counter
``(step, path, salt_lo, salt_hi)`` under key ``(seed_lo, seed_hi)``. The first
two output words form a 64-bit integer ``w`` mapped to ``((w >> 11) + 0.5) * 2**-53``,
which lies strictly inside (0, 1). Normals come from inverting the normal CDF
with Wichura's AS241 rational approximation (about 1e-16 relative accuracy),
so one counter always maps to exactly one normal and the draw for a given
(path, step) never depends on evaluation order or thread schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

_MASK32 = 0xFFFFFFFF
_U64_MASK = (1 << 64) - 1

PHILOX_M0 = np.uint64(0xD2511F53)
PHILOX_M1 = np.uint64(0xCD9E8D57)
PHILOX_W0 = np.uint64(0x9E3779B9)
PHILOX_W1 = np.uint64(0xBB67AE85)


@dataclass(frozen=True)
class RngKey:
    seed: int = 0
    stream_salt: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_salt"):
            v = getattr(self, name)
            if not 0 <= v <= _U64_MASK:
                raise ValueError(f"{name} must fit in 64 unsigned bits, got {v}")


@numba.njit(cache=True, nogil=True)
def _philox4x32_10(c0, c1, c2, c3, k0, k1):
    m32 = np.uint64(0xFFFFFFFF)
    s32 = np.uint64(32)
    for r in range(10):
        p0 = PHILOX_M0 * c0
        p1 = PHILOX_M1 * c2
        n0 = (p1 >> s32) ^ c1 ^ k0
        n1 = p1 & m32
        n2 = (p0 >> s32) ^ c3 ^ k1
        n3 = p0 & m32
        c0, c1, c2, c3 = n0, n1, n2, n3
        if r < 9:
            k0 = (k0 + PHILOX_W0) & m32
            k1 = (k1 + PHILOX_W1) & m32
    return c0, c1, c2, c3


def philox4x32_10(counter, key) -> tuple[int, int, int, int]:
    """Raw Philox block; ``counter`` is 4 and ``key`` 2 unsigned 32-bit words."""
    out = _philox4x32_10(*(np.uint64(c & _MASK32) for c in counter),
                         *(np.uint64(k & _MASK32) for k in key))
    return tuple(int(v) for v in out)


@numba.njit(cache=True, nogil=True)
def _uniform(seed_lo, seed_hi, salt_lo, salt_hi, path, step):
    r0, r1, _, _ = _philox4x32_10(np.uint64(step), np.uint64(path), salt_lo, salt_hi,
                                  seed_lo, seed_hi)
    word = (r0 << np.uint64(32)) | r1
    return ((word >> np.uint64(11)) + 0.5) * 1.1102230246251565e-16  # 2**-53


@numba.njit(cache=True, nogil=True)
def _ndtri(p):
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2509.0809287301226727 * r + 33430.575583588128105) * r
                    + 67265.770927008700853) * r + 45921.953931549871457) * r
                  + 13731.693765509461125) * r + 1971.5909503065514427) * r
                + 133.14166789178437745) * r + 3.387132872796366608)
        den = (((((((5226.495278852854561 * r + 28729.085735721942674) * r
                    + 39307.89580009271061) * r + 21213.794301586595867) * r
                  + 5394.1960214247511077) * r + 687.1870074920579083) * r
                + 42.313330701600911252) * r + 1.0)
        return q * num / den
    r = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        num = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r
                    + 0.24178072517745061177) * r + 1.27045825245236838258) * r
                  + 3.64784832476320460504) * r + 5.7694972214606914055) * r
                + 4.6303378461565452959) * r + 1.42343711074968357734)
        den = (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r
                    + 0.0151986665636164571966) * r + 0.14810397642748007459) * r
                  + 0.68976733498510000455) * r + 1.6763848301838038494) * r
                + 2.05319162663775882187) * r + 1.0)
    else:
        r -= 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 0.0012426609473880784386) * r + 0.026532189526576123093) * r
                  + 0.29656057182850489123) * r + 1.7848265399172913358) * r
                + 5.4637849111641143699) * r + 6.6579046435011037772)
        den = (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r
                    + 1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r
                  + 0.0148753612908506148525) * r + 0.13692988092273580531) * r
                + 0.59983220655588793769) * r + 1.0)
    z = num / den
    return -z if q < 0.0 else z


@numba.njit(cache=True, nogil=True)
def _normal_block(seed_lo, seed_hi, salt_lo, salt_hi, path_start, n_paths, n_steps):
    out = np.empty((n_steps, n_paths))
    for n in range(n_steps):
        for p in range(n_paths):
            u = _uniform(seed_lo, seed_hi, salt_lo, salt_hi, np.uint64(path_start + p),
                         np.uint64(n))
            out[n, p] = _ndtri(u)
    return out


def _key_words(key: RngKey):
    return (np.uint64(key.seed & _MASK32), np.uint64(key.seed >> 32),
            np.uint64(key.stream_salt & _MASK32), np.uint64(key.stream_salt >> 32))


def _check_counter(path: int, step: int) -> None:
    if not (0 <= path <= _MASK32 and 0 <= step <= _MASK32):
        raise ValueError(f"path and step must lie in [0, 2**32), got ({path}, {step})")


def uniform(key: RngKey, path: int, step: int) -> float:
    _check_counter(path, step)
    return float(_uniform(*_key_words(key), np.uint64(path), np.uint64(step)))


def inverse_normal_cdf(u):
    """Standard normal quantile (AS241). Accepts scalars or arrays in (0, 1)."""
    if np.ndim(u) == 0:
        return float(_ndtri(float(u)))
    return _ndtri_vec(np.asarray(u, dtype=np.float64))


@numba.vectorize(["float64(float64)"], cache=True)
def _ndtri_vec(u):
    return _ndtri(u)


def normal(key: RngKey, path: int, step: int) -> float:
    return inverse_normal_cdf(uniform(key, path, step))


def normal_block(key: RngKey, path_start: int, n_paths: int, n_steps: int) -> np.ndarray:
    """Normals for paths ``path_start .. path_start+n_paths-1`` and steps ``0..n_steps-1``.

    Returned step-major, shape ``(n_steps, n_paths)``.
    """
    _check_counter(path_start + max(n_paths - 1, 0), max(n_steps - 1, 0))
    return _normal_block(*_key_words(key), path_start, n_paths, n_steps)


def uniform_block(key: RngKey, path_start: int, n_paths: int, n_steps: int) -> np.ndarray:
    _check_counter(path_start + max(n_paths - 1, 0), max(n_steps - 1, 0))
    return _uniform_block(*_key_words(key), path_start, n_paths, n_steps)


@numba.njit(cache=True, nogil=True)
def _uniform_block(seed_lo, seed_hi, salt_lo, salt_hi, path_start, n_paths, n_steps):
    out = np.empty((n_steps, n_paths))
    for n in range(n_steps):
        for p in range(n_paths):
            out[n, p] = _uniform(seed_lo, seed_hi, salt_lo, salt_hi,
                                 np.uint64(path_start + p), np.uint64(n))
    return out
