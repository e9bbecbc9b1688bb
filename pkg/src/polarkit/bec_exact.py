"""Exact erasure-probability evolution on the BEC.

Subchannel ``i`` of a length ``2**n`` code is reached by walking the bits of
``i - 1`` from the most significant down; a 0 bit is a check step
(erased if either input is erased) and a 1 bit a variable step (erased only if
both are).  State convention for joint distributions: 0 = erased, 1 = known.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

__all__ = [
    "JointErasureDist",
    "JointErasureDistS",
    "evolve_erasure",
    "erasure_vector",
    "evolve_joint",
    "evolve_joint_s",
    "brute_force_events",
    "brute_force_status",
    "MAX_ORDER",
    "MAX_BRUTE_FORCE_N",
]

MAX_ORDER = 20
MAX_BRUTE_FORCE_N = 4


def _check_index(i: int, n: int) -> None:
    if not 1 <= i <= (1 << n):
        raise IndexError(f"index {i} outside 1..{1 << n}")


def _check_eps(eps: float) -> None:
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"erasure probability must lie in [0, 1], got {eps}")


def _bits_msb_first(i: int, n: int):
    v = i - 1
    for t in range(n - 1, -1, -1):
        yield (v >> t) & 1


def evolve_erasure(eps: float, n: int, i: int) -> float:
    """Probability that the SC message for bit ``i`` is an erasure."""
    _check_eps(eps)
    _check_index(i, n)
    e = eps
    for bit in _bits_msb_first(i, n):
        e = e * e if bit else 2.0 * e - e * e
    return e


def erasure_vector(eps: float, n: int) -> np.ndarray:
    """Erasure probabilities of all ``2**n`` subchannels, by level order.

    Uses the same float expressions as :func:`evolve_erasure`, so the two
    agree bit for bit.
    """
    _check_eps(eps)
    e = np.array([eps])
    for _ in range(n):
        nxt = np.empty(2 * e.size)
        nxt[0::2] = 2.0 * e - e * e
        nxt[1::2] = e * e
        e = nxt
    return e


@dataclass(frozen=True)
class JointErasureDist:
    """Joint erasure law of two subchannels; ``pab`` = P(state a, state b)."""

    p00: float
    p01: float
    p10: float
    p11: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.p00, self.p01, self.p10, self.p11)

    @property
    def first_erased(self) -> float:
        return self.p00 + self.p01

    @property
    def second_erased(self) -> float:
        return self.p00 + self.p10


def _clip(x: float) -> float:
    # the residual "1 - others" terms can land a few ulps below zero
    return x if x > 0.0 else 0.0


def _step_joint(p: JointErasureDist, bi: int, bj: int) -> JointErasureDist:
    p00, p01, p10, p11 = p.as_tuple()
    if bi and bj:
        q00 = p00 * p00
        q01 = p01 * p01 + 2.0 * p00 * p01
        q10 = p10 * p10 + 2.0 * p00 * p10
        q11 = _clip(1.0 - q00 - q01 - q10)
    elif bi:
        q00 = p00 * p00 + 2.0 * p00 * p01
        q01 = p01 * p01
        q11 = p11 * p11 + 2.0 * p11 * p01
        q10 = _clip(1.0 - q00 - q01 - q11)
    elif bj:
        q00 = p00 * p00 + 2.0 * p00 * p10
        q10 = p10 * p10
        q11 = p11 * p11 + 2.0 * p11 * p10
        q01 = _clip(1.0 - q00 - q10 - q11)
    else:
        q01 = p01 * p01 + 2.0 * p01 * p11
        q10 = p10 * p10 + 2.0 * p10 * p11
        q11 = p11 * p11
        q00 = _clip(1.0 - q01 - q10 - q11)
    return JointErasureDist(q00, q01, q10, q11)


def evolve_joint(eps: float, n: int, i: int, j: int) -> JointErasureDist:
    """Joint erasure distribution of subchannels ``i`` and ``j``."""
    _check_eps(eps)
    _check_index(i, n)
    _check_index(j, n)
    p = JointErasureDist(eps, 0.0, 0.0, 1.0 - eps)
    for bi, bj in zip(_bits_msb_first(i, n), _bits_msb_first(j, n)):
        p = _step_joint(p, bi, bj)
    return p


@dataclass(frozen=True, eq=False)
class JointErasureDistS:
    """Joint erasure law over an ordered tuple of subchannels.

    ``probs[w]`` is the probability of pattern ``w``; bit ``k`` of ``w`` is the
    state of ``indices[k]`` (0 erased, 1 known).
    """

    indices: tuple[int, ...]
    probs: np.ndarray

    @property
    def order(self) -> int:
        return len(self.indices)

    def prob(self, states: Sequence[int]) -> float:
        w = sum(int(s) << k for k, s in enumerate(states))
        return float(self.probs[w])

    @property
    def all_erased(self) -> float:
        return float(self.probs[0])

    @property
    def all_known(self) -> float:
        return float(self.probs[-1])

    @property
    def any_erased(self) -> float:
        return float(self.probs[:-1].sum())

    def marginal(self, keep: Sequence[int]) -> "JointErasureDistS":
        """Marginal over the positions ``keep`` (positions into ``indices``)."""
        keep = list(keep)
        w = np.arange(self.probs.size)
        code = np.zeros_like(w)
        for new_k, old_k in enumerate(keep):
            code |= ((w >> old_k) & 1) << new_k
        out = np.bincount(code, weights=self.probs, minlength=1 << len(keep))
        return JointErasureDistS(tuple(self.indices[k] for k in keep), out)

    def pair(self, a: int = 0, b: int = 1) -> JointErasureDist:
        m = self.marginal([a, b]).probs
        # pattern bit0 = first, bit1 = second; state 1 = known
        return JointErasureDist(float(m[0b00]), float(m[0b10]), float(m[0b01]), float(m[0b11]))


def _validate_indices(indices: Sequence[int], n: int) -> tuple[int, ...]:
    idx = tuple(int(i) for i in indices)
    if not idx:
        raise ValueError("need at least one index")
    if len(set(idx)) != len(idx):
        raise ValueError(f"duplicate indices in {idx}")
    if len(idx) > MAX_ORDER:
        raise ValueError(f"order {len(idx)} exceeds storage guard {MAX_ORDER}")
    for i in idx:
        _check_index(i, n)
    return idx


def evolve_joint_s(eps: float, n: int, indices: Sequence[int]) -> JointErasureDistS:
    """Joint erasure pattern law of ``len(indices)`` subchannels.

    At each level the pattern law is pushed forward through two independent
    copies: known-bits combine by AND on check coordinates and by OR on
    variable coordinates.
    """
    _check_eps(eps)
    idx = _validate_indices(indices, n)
    s = len(idx)
    full = (1 << s) - 1
    p = np.zeros(1 << s)
    p[0] = eps
    p[full] = 1.0 - eps
    for t in range(n - 1, -1, -1):
        var_mask = 0
        for k, i in enumerate(idx):
            if ((i - 1) >> t) & 1:
                var_mask |= 1 << k
        sup = np.flatnonzero(p)
        u, v = np.meshgrid(sup, sup, indexing="ij")
        w = ((u | v) & var_mask) | ((u & v) & ~var_mask & full)
        weights = np.outer(p[sup], p[sup])
        p = np.bincount(w.ravel(), weights=weights.ravel(), minlength=1 << s)
    return JointErasureDistS(idx, p)


def _sc_erasures(erased: np.ndarray) -> np.ndarray:
    """Genie-aided SC erasure status of every subchannel, one row per pattern."""
    m = erased.shape[1]
    if m == 1:
        return erased
    first = _sc_erasures(erased[:, : m // 2])
    second = _sc_erasures(erased[:, m // 2 :])
    out = np.empty_like(erased)
    out[:, 0::2] = first | second
    out[:, 1::2] = first & second
    return out


@lru_cache(maxsize=4)
def brute_force_status(n: int) -> tuple[np.ndarray, np.ndarray]:
    """All channel erasure patterns and the resulting subchannel erasures.

    Returns ``(channel, status)``, both boolean of shape ``(2**N, N)``.
    """
    if not 0 <= n <= MAX_BRUTE_FORCE_N:
        raise ValueError(f"brute force supports n <= {MAX_BRUTE_FORCE_N}, got {n}")
    size = 1 << n
    patterns = np.arange(1 << size)
    channel = ((patterns[:, None] >> np.arange(size)[None, :]) & 1).astype(bool)
    status = _sc_erasures(channel)
    channel.setflags(write=False)
    status.setflags(write=False)
    return channel, status


def brute_force_events(eps: float, n: int, indices: Sequence[int]) -> JointErasureDistS:
    """Joint erasure law over ``indices`` by enumerating every channel pattern."""
    _check_eps(eps)
    if not 0 <= n <= MAX_BRUTE_FORCE_N:
        raise ValueError(f"brute force supports n <= {MAX_BRUTE_FORCE_N}, got {n}")
    idx = _validate_indices(indices, n)
    counts = _pattern_counts(n, idx)
    size = 1 << n
    k = np.arange(size + 1)
    weights = eps**k * (1.0 - eps) ** (size - k)
    return JointErasureDistS(idx, counts @ weights)


@lru_cache(maxsize=4096)
def _pattern_counts(n: int, idx: tuple[int, ...]) -> np.ndarray:
    """Integer counts of channel patterns per (event pattern, number of erasures).

    All channel patterns with ``k`` erasures share one weight, so the counts
    are exact and the weighting happens once at the end.
    """
    known, erased = _known_table(n)
    size = 1 << n
    code = erased.copy()
    for k, i in enumerate(idx):
        code += known[i - 1] << k
    counts = np.bincount(code, minlength=(1 << len(idx)) * (size + 1))
    out = counts.reshape(-1, size + 1).astype(float)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=4)
def _known_table(n: int) -> tuple[np.ndarray, np.ndarray]:
    # known[i] is 0/1 per channel pattern, pre-scaled by (N + 1) so that
    # adding the erasure count gives a joint bincount key
    channel, status = brute_force_status(n)
    size = 1 << n
    known = np.ascontiguousarray(~status.T).astype(np.int64) * (size + 1)
    return known, channel.sum(axis=1).astype(np.int64)
