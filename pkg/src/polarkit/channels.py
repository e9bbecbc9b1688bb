"""Symmetric binary-input memoryless channels.

All channels are described by their LLR law under input 0.  BIAWGN uses the
antipodal map ``0 -> +1, 1 -> -1`` with unit energy, so ``LLR = 2 y / sigma**2``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .density import LlrDensity, QuantizationSpec

__all__ = ["ChannelKind", "ChannelModel", "parse_channel", "llr_density", "sample_llr", "sample_llrs"]


class ChannelKind(str, enum.Enum):
    BEC = "bec"
    BSC = "bsc"
    BIAWGN = "biawgn"


@dataclass(frozen=True)
class ChannelModel:
    kind: ChannelKind
    param: float

    def __post_init__(self):
        kind = ChannelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        p = float(self.param)
        object.__setattr__(self, "param", p)
        if kind is ChannelKind.BEC and not 0.0 <= p <= 1.0:
            raise ValueError(f"BEC erasure probability must lie in [0, 1], got {p}")
        if kind is ChannelKind.BSC and not 0.0 <= p <= 0.5:
            raise ValueError(f"BSC crossover must lie in [0, 1/2], got {p}")
        if kind is ChannelKind.BIAWGN and not p > 0.0:
            raise ValueError(f"BIAWGN noise deviation must be positive, got {p}")

    @classmethod
    def bec(cls, epsilon: float) -> "ChannelModel":
        return cls(ChannelKind.BEC, epsilon)

    @classmethod
    def bsc(cls, p: float) -> "ChannelModel":
        return cls(ChannelKind.BSC, p)

    @classmethod
    def biawgn(cls, sigma: float) -> "ChannelModel":
        return cls(ChannelKind.BIAWGN, sigma)

    @property
    def is_bec(self) -> bool:
        return self.kind is ChannelKind.BEC

    @property
    def descriptor(self) -> str:
        return f"{self.kind.value}:{self.param!r}"

    def __str__(self) -> str:
        return self.descriptor


def parse_channel(text: str) -> ChannelModel:
    """Parse ``bec:<eps>``, ``bsc:<p>`` or ``biawgn:<sigma>``."""
    kind, sep, value = text.strip().partition(":")
    if not sep:
        raise ValueError(f"channel descriptor {text!r} must look like 'bec:0.5'")
    try:
        kind_enum = ChannelKind(kind.lower())
    except ValueError:
        raise ValueError(f"unknown channel kind {kind!r}") from None
    try:
        param = float(value)
    except ValueError:
        raise ValueError(f"bad channel parameter {value!r}") from None
    if not math.isfinite(param):
        raise ValueError(f"bad channel parameter {value!r}")
    return ChannelModel(kind_enum, param)


def _bsc_magnitude(p: float) -> float:
    if p == 0.0:
        return math.inf
    return math.log((1.0 - p) / p)


def llr_density(channel: ChannelModel, quant: QuantizationSpec | None = None) -> LlrDensity:
    """Quantized LLR density of ``channel`` under input 0."""
    quant = quant or QuantizationSpec()
    if channel.kind is ChannelKind.BEC:
        eps = channel.param
        return LlrDensity.from_atoms(quant, [(0.0, eps), (math.inf, 1.0 - eps)])
    if channel.kind is ChannelKind.BSC:
        p = channel.param
        m = _bsc_magnitude(p)
        if math.isfinite(m) and m > quant.half_range:
            raise ValueError(
                f"grid half range {quant.half_range} cannot hold BSC atom at {m:.4g}"
            )
        return LlrDensity.from_atoms(quant, [(m, 1.0 - p), (-m, p)])
    sigma = channel.param
    mean, std = 2.0 / sigma**2, 2.0 / sigma
    edges = (np.arange(quant.size + 1) - quant.half_points - 0.5) * quant.step
    cdf = norm.cdf(edges, loc=mean, scale=std)
    mass = np.empty(quant.size + 2)
    mass[0] = cdf[0]
    mass[1:-1] = np.diff(cdf)
    mass[-1] = norm.sf(edges[-1], loc=mean, scale=std)
    return LlrDensity(quant, mass)


def sample_llrs(channel: ChannelModel, rng: np.random.Generator, size) -> np.ndarray:
    """Exact (unquantized) LLR draws under input 0."""
    p = channel.param
    if channel.kind is ChannelKind.BEC:
        erased = rng.random(size) < p
        return np.where(erased, 0.0, np.inf)
    if channel.kind is ChannelKind.BSC:
        flipped = rng.random(size) < p
        m = _bsc_magnitude(p)
        return np.where(flipped, -m, m)
    y = 1.0 + p * rng.standard_normal(size)
    return 2.0 * y / p**2


def sample_llr(channel: ChannelModel, rng: np.random.Generator) -> float:
    return float(sample_llrs(channel, rng, None))
