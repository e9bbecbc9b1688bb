"""Subchannel reliabilities, information-set selection and the bit-subset order."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import bec_exact
from .channels import ChannelModel, llr_density, parse_channel
from .density import (
    LlrDensity,
    QuantizationSpec,
    bhattacharyya,
    chk_conv,
    erasure_mass,
    error_prob,
    var_conv,
)

__all__ = [
    "MetricKind",
    "ReliabilityVector",
    "CodeSpec",
    "density_evolution_tree",
    "bec_reliability",
    "reliability",
    "select_info_set",
    "construct",
    "code_size",
    "precedes",
    "minimal_elements",
]


class MetricKind(str, enum.Enum):
    ERROR_PROB = "error_prob"
    ERASURE_PROB = "erasure_prob"
    BHATTACHARYYA = "bhattacharyya"


_FUNCTIONALS = {
    MetricKind.ERROR_PROB: error_prob,
    MetricKind.ERASURE_PROB: erasure_mass,
    MetricKind.BHATTACHARYYA: bhattacharyya,
}


@dataclass(frozen=True, eq=False)
class ReliabilityVector:
    """Per-subchannel metric for a length ``2**n`` code.

    ``values[i - 1]`` belongs to subchannel ``i``.  ``levels[m]`` holds the
    same metric for the shorter length ``2**m`` (``levels[n]`` is ``values``).
    """

    n: int
    kind: MetricKind
    values: np.ndarray
    levels: tuple[np.ndarray, ...] = field(default=(), repr=False)
    convolutions: int = 0

    def __getitem__(self, i: int) -> float:
        return float(self.values[i - 1])

    @property
    def size(self) -> int:
        return 1 << self.n


def density_evolution_tree(
    a_w: LlrDensity, n: int, kind: MetricKind | str = MetricKind.ERROR_PROB
) -> ReliabilityVector:
    """Evolve the channel density down the full depth-``n`` tree.

    Level ``l + 1`` is built from level ``l`` by one check and one variable
    self-convolution per density, so exactly ``2 * 2**n - 2`` convolutions run.
    Only one level is held at a time.
    """
    kind = MetricKind(kind)
    if kind is MetricKind.ERASURE_PROB and not a_w.is_bec_closed():
        raise ValueError("erasure_prob metric needs a density supported on {0, +inf}")
    functional = _FUNCTIONALS[kind]
    level = [a_w]
    levels = [np.array([functional(a_w)])]
    count = 0
    for _ in range(n):
        nxt: list[LlrDensity] = []
        for dens in level:
            nxt.append(chk_conv(dens, dens))
            nxt.append(var_conv(dens, dens))
            count += 2
        level = nxt
        levels.append(np.array([functional(d) for d in level]))
    return ReliabilityVector(n, kind, levels[-1], tuple(levels), count)


def bec_reliability(eps: float, n: int, kind: MetricKind | str = MetricKind.ERASURE_PROB) -> ReliabilityVector:
    """Closed-form BEC reliabilities (erasure ``e``; error ``e/2``; Bhattacharyya ``e``)."""
    kind = MetricKind(kind)
    scale = 0.5 if kind is MetricKind.ERROR_PROB else 1.0
    levels = tuple(scale * bec_exact.erasure_vector(eps, m) for m in range(n + 1))
    return ReliabilityVector(n, kind, levels[-1], levels, 0)


def reliability(
    channel: ChannelModel,
    n: int,
    kind: MetricKind | str = MetricKind.ERROR_PROB,
    quant: QuantizationSpec | None = None,
) -> ReliabilityVector:
    """Reliabilities of ``channel``: closed form on the BEC, density evolution otherwise."""
    kind = MetricKind(kind)
    if channel.is_bec:
        return bec_reliability(channel.param, n, kind)
    if kind is MetricKind.ERASURE_PROB:
        raise ValueError("erasure_prob metric is only defined for the BEC")
    return density_evolution_tree(llr_density(channel, quant), n, kind)


def select_info_set(r: ReliabilityVector | Sequence[float], k: int) -> list[int]:
    """The ``k`` subchannels of smallest metric, as sorted 1-based indices.

    Linear time: one selection for the ``k``-th smallest value, then a scan.
    Ties at the threshold go to the larger index.
    """
    values = np.asarray(r.values if isinstance(r, ReliabilityVector) else r, dtype=float)
    size = values.size
    if not 1 <= k <= size:
        raise ValueError(f"K must lie in 1..{size}, got {k}")
    threshold = np.partition(values, k - 1)[k - 1]
    below = np.flatnonzero(values < threshold)
    ties = np.flatnonzero(values == threshold)
    chosen = np.concatenate([below, ties[::-1][: k - below.size]])
    return sorted(int(i) + 1 for i in chosen)


def code_size(n: int, rate: float) -> int:
    """``round(N * R)`` with halves rounded up."""
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"rate must lie in (0, 1], got {rate}")
    return int(np.floor((1 << n) * rate + 0.5))


@dataclass(frozen=True)
class CodeSpec:
    n: int
    channel: str
    metric: MetricKind
    info_set: tuple[int, ...]
    values: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "metric", MetricKind(self.metric))
        info = tuple(sorted(int(i) for i in self.info_set))
        if len(set(info)) != len(info):
            raise ValueError("information set has duplicate indices")
        if info and not (1 <= info[0] and info[-1] <= self.size):
            raise ValueError(f"information set must lie in 1..{self.size}")
        object.__setattr__(self, "info_set", info)
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @property
    def size(self) -> int:
        return 1 << self.n

    @property
    def rate(self) -> float:
        return len(self.info_set) / self.size

    @property
    def channel_model(self) -> ChannelModel:
        return parse_channel(self.channel)

    def info_mask(self) -> np.ndarray:
        mask = np.zeros(self.size, dtype=bool)
        mask[[i - 1 for i in self.info_set]] = True
        return mask

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "channel": self.channel,
            "metric": self.metric.value,
            "info_set": list(self.info_set),
            "values": list(self.values),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "CodeSpec":
        return cls(
            n=int(d["n"]),
            channel=str(d["channel"]),
            metric=d.get("metric", MetricKind.ERROR_PROB.value),
            info_set=tuple(d["info_set"]),
            values=tuple(d.get("values", ())),
        )

    @classmethod
    def from_json(cls, text: str) -> "CodeSpec":
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_info_set(cls, n: int, info_set: Iterable[int], channel: str = "bec:0.5") -> "CodeSpec":
        return cls(n, channel, MetricKind.ERROR_PROB, tuple(info_set))


def construct(
    channel: ChannelModel,
    n: int,
    rate: float,
    kind: MetricKind | str = MetricKind.ERROR_PROB,
    quant: QuantizationSpec | None = None,
) -> tuple[CodeSpec, ReliabilityVector]:
    r = reliability(channel, n, kind, quant)
    info = select_info_set(r, code_size(n, rate))
    spec = CodeSpec(n, channel.descriptor, r.kind, tuple(info), tuple(r.values))
    return spec, r


def precedes(i: int, j: int, n: int | None = None) -> bool:
    """``i`` precedes ``j`` when the set bits of ``i - 1`` are a subset of those of ``j - 1``."""
    if n is not None:
        size = 1 << n
        if not (1 <= i <= size and 1 <= j <= size):
            raise IndexError(f"indices must lie in 1..{size}")
    a, b = i - 1, j - 1
    return a & b == a


def minimal_elements(indices: Iterable[int], n: int | None = None) -> list[int]:
    """Elements of ``indices`` with no other element preceding them."""
    items = sorted(set(int(i) for i in indices))
    out = []
    for i in items:
        # a strict predecessor has fewer set bits, hence a smaller index
        if not any(precedes(j, i, n) for j in out if j != i):
            out.append(i)
    return out
