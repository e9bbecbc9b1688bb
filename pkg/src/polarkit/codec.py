"""Polar encoder, successive-cancellation decoder and Monte Carlo estimation.

The encoder follows the interleaved recursion
``x(u) = enc(u_odd ^ u_even) || enc(u_even)``.  Its output equals the plain
Kronecker transform of ``u`` read in bit-reversed order, so the decoder undoes
that permutation and then runs the butterfly recursion; each received LLR
block is split into halves and combined elementwise.  Bits are still decided
in ascending index order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channels import ChannelModel, sample_llrs
from .construction import CodeSpec
from .density import boxplus

__all__ = [
    "DecodeResult",
    "SimResult",
    "encode",
    "bit_reversal",
    "sc_decode",
    "genie_events",
    "simulate_block",
    "default_workers",
]

SHARD_TRIALS = 1000


def _log2_exact(size: int) -> int:
    n = size.bit_length() - 1
    if size < 1 or (1 << n) != size:
        raise ValueError(f"length {size} is not a power of 2")
    return n


def encode(u) -> np.ndarray:
    """Polar transform over GF(2); works on the last axis."""
    u = np.asarray(u).astype(np.uint8)
    _log2_exact(u.shape[-1])
    return _encode(u)


def _encode(u: np.ndarray) -> np.ndarray:
    if u.shape[-1] == 1:
        return u.copy()
    odd, even = u[..., 0::2], u[..., 1::2]
    return np.concatenate([_encode(odd ^ even), _encode(even)], axis=-1)


@lru_cache(maxsize=32)
def bit_reversal(n: int) -> np.ndarray:
    idx = np.arange(1 << n)
    rev = np.zeros_like(idx)
    for t in range(n):
        rev |= ((idx >> t) & 1) << (n - 1 - t)
    rev.setflags(write=False)
    return rev


@dataclass
class DecodeResult:
    """Outcome of SC decoding; arrays have one row per received word.

    ``erasure`` flags rows where some information bit saw an LLR of exactly 0;
    ``llr`` holds the decision LLR of every bit and ``operations`` counts the
    butterfly combines per word.
    """

    u_hat: np.ndarray
    erasure: np.ndarray
    llr: np.ndarray
    operations: int

    def __iter__(self):
        yield self.u_hat
        yield self.erasure


def _g(a: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        out = b + np.where(x.astype(bool), -a, a)
    # +inf and -inf evidence on one bit carries no information
    return np.where(np.isnan(out), 0.0, out)


class _Decoder:
    def __init__(self, info: np.ndarray, coins: np.ndarray, genie: np.ndarray | None):
        self.info = info
        self.coins = coins
        self.genie = genie
        rows = coins.shape[0]
        size = info.size
        self.u_hat = np.zeros((rows, size), dtype=np.uint8)
        self.llr = np.zeros((rows, size))
        self.erasure = np.zeros(rows, dtype=bool)
        self.ops = 0

    def run(self, llr: np.ndarray, offset: int = 0) -> np.ndarray:
        m = llr.shape[1]
        if m == 1:
            return self._leaf(llr[:, 0], offset)
        h = m // 2
        a, b = llr[:, :h], llr[:, h:]
        x_first = self.run(boxplus(a, b), offset)
        x_second = self.run(_g(a, b, x_first), offset + h)
        self.ops += m
        return np.concatenate([x_first ^ x_second, x_second], axis=1)

    def _leaf(self, lam: np.ndarray, i: int) -> np.ndarray:
        self.llr[:, i] = lam
        if self.info[i]:
            zero = lam == 0
            self.erasure |= zero
            bit = (lam < 0) | (zero & self.coins[:, i].astype(bool))
            self.u_hat[:, i] = bit
        feedback = self.u_hat[:, i] if self.genie is None else self.genie[:, i]
        return feedback[:, None].astype(np.uint8)


def sc_decode(
    llr,
    code: CodeSpec,
    rng: np.random.Generator | None = None,
    *,
    coins=None,
    genie=None,
) -> DecodeResult:
    """Successive-cancellation decoding of one word (1-D) or a batch (2-D).

    Frozen bits are decided 0.  An information bit with LLR exactly 0 is
    decided by a fair coin: ``coins`` (same shape as ``llr``) if given, else
    drawn from ``rng``.  With ``genie`` set, the partial sums feed back the
    genie bits instead of the decisions.
    """
    llr = np.asarray(llr, dtype=float)
    single = llr.ndim == 1
    batch = np.atleast_2d(llr)
    size = code.size
    if batch.shape[1] != size:
        raise ValueError(f"expected {size} LLRs per word, got {batch.shape[1]}")
    if coins is None:
        rng = rng if rng is not None else np.random.default_rng()
        coins = rng.integers(0, 2, size=batch.shape, dtype=np.uint8)
    coins = np.atleast_2d(np.asarray(coins, dtype=np.uint8))
    if genie is not None:
        genie = np.broadcast_to(np.atleast_2d(np.asarray(genie, dtype=np.uint8)), batch.shape)
    dec = _Decoder(code.info_mask(), coins, genie)
    dec.run(batch[:, bit_reversal(code.n)])
    ops = dec.ops
    if single:
        return DecodeResult(dec.u_hat[0], bool(dec.erasure[0]), dec.llr[0], ops)
    return DecodeResult(dec.u_hat, dec.erasure, dec.llr, ops)


def genie_events(llr, n: int, rng: np.random.Generator | None = None, coins=None):
    """Per-bit genie-aided erasure and error indicators under all-zero transmission.

    Returns boolean arrays ``(erased, error)`` shaped like ``llr`` (batched).
    """
    full = CodeSpec.from_info_set(n, range(1, (1 << n) + 1))
    res = sc_decode(llr, full, rng, coins=coins, genie=np.zeros(1 << n, dtype=np.uint8))
    lam = np.atleast_2d(res.llr)
    return lam == 0, np.atleast_2d(res.u_hat).astype(bool)


@dataclass(frozen=True)
class SimResult:
    trials: int
    failures: int
    seed: int
    failure_kind: str

    @property
    def estimate(self) -> float:
        return self.failures / self.trials

    @property
    def ci95(self) -> float:
        p = self.estimate
        return 1.96 * math.sqrt(p * (1.0 - p) / self.trials)

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "failures": self.failures,
            "estimate": self.estimate,
            "ci95": self.ci95,
            "seed": self.seed,
            "failure_kind": self.failure_kind,
        }


def default_workers() -> int:
    cap = os.environ.get("POLARKIT_THREADS")
    cpus = os.cpu_count() or 1
    if cap:
        return max(1, min(cpus, int(cap)))
    return cpus


def _shard_failures(code: CodeSpec, channel: ChannelModel, rows: int, seed: int, shard: int, kind: str) -> int:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(shard,)))
    llr = sample_llrs(channel, rng, (rows, code.size))
    res = sc_decode(llr, code, rng)
    if kind == "erasure":
        return int(res.erasure.sum())
    info = code.info_mask()
    return int(res.u_hat[:, info].any(axis=1).sum())


def simulate_block(
    code: CodeSpec,
    channel: ChannelModel,
    trials: int,
    seed: int = 0,
    failure_kind: str = "erasure",
    workers: int | None = None,
) -> SimResult:
    """Monte Carlo block failure rate of SC decoding with the all-zero codeword.

    Trials are cut into fixed shards with streams derived from
    ``(seed, shard)``, so the result does not depend on ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    if failure_kind not in {"erasure", "error"}:
        raise ValueError(f"unknown failure kind {failure_kind!r}")
    sizes = [SHARD_TRIALS] * (trials // SHARD_TRIALS)
    if trials % SHARD_TRIALS:
        sizes.append(trials % SHARD_TRIALS)
    jobs = [(code, channel, rows, seed, s, failure_kind) for s, rows in enumerate(sizes)]
    workers = workers or 1
    if workers == 1 or len(jobs) == 1:
        counts = [_shard_failures(*job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(lambda job: _shard_failures(*job), jobs))
    return SimResult(trials, sum(counts), seed, failure_kind)
