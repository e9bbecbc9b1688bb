"""Quantized LLR densities and their convolutions.

Densities are conditioned on the all-zero input.  A density lives on the
uniform grid ``{-L, ..., -step, 0, step, ..., +L}`` extended by two atoms at
``-inf`` and ``+inf``.  Internally the mass is a single vector in *extended
index* order::

    index 0          -> -inf
    index 1 .. G     -> grid points -L .. +L
    index G + 1      -> +inf
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, TextIO

import numpy as np
from scipy import sparse

__all__ = [
    "NumericGuardError",
    "QuantizationSpec",
    "LlrDensity",
    "JointLlrDensity",
    "boxplus",
    "var_conv",
    "chk_conv",
    "error_prob",
    "erasure_mass",
    "bhattacharyya",
    "joint_conv",
    "joint_event_probs",
    "joint_density_evolution",
]

MASS_TOL = 1e-10
JOINT_MASS_TOL = 1e-8


class NumericGuardError(ValueError):
    """A density functional is undefined or a mass invariant was violated."""


@dataclass(frozen=True)
class QuantizationSpec:
    step: float = 1.0 / 16.0
    half_range: float = 40.0

    def __post_init__(self):
        if not (self.step > 0 and self.half_range > 0):
            raise ValueError("step and half_range must be positive")
        ratio = self.half_range / self.step
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError(
                f"half_range {self.half_range} is not a multiple of step {self.step}"
            )

    @classmethod
    def joint_default(cls) -> "QuantizationSpec":
        return cls(step=0.25, half_range=20.0)

    @property
    def half_points(self) -> int:
        """Number of positive grid points K, so the grid has 2K + 1 points."""
        return int(round(self.half_range / self.step))

    @property
    def size(self) -> int:
        return 2 * self.half_points + 1

    @property
    def grid(self) -> np.ndarray:
        k = self.half_points
        return np.arange(-k, k + 1) * self.step

    @property
    def extended_values(self) -> np.ndarray:
        return np.concatenate(([-np.inf], self.grid, [np.inf]))

    @property
    def zero_index(self) -> int:
        return self.half_points + 1

    def quantize(self, x) -> np.ndarray:
        """Map extended reals to extended indices.

        Rounds to the nearest grid point with ties toward zero; anything
        beyond ``half_range`` after rounding saturates to the matching
        infinite atom.
        """
        x = np.asarray(x, dtype=float)
        k_max = self.half_points
        out = np.empty(x.shape, dtype=np.int64)
        finite = np.isfinite(x)
        q = np.abs(x[finite]) / self.step
        k = np.sign(x[finite]) * np.ceil(q - 0.5)
        idx = np.where(k > k_max, self.size + 1, np.where(k < -k_max, 0, k + k_max + 1))
        out[finite] = idx.astype(np.int64)
        out[~finite & (x > 0)] = self.size + 1
        out[~finite & (x < 0)] = 0
        if np.isnan(x).any():
            raise NumericGuardError("cannot quantize NaN")
        return out


def boxplus(a, b):
    """Check-node rule ``2 atanh(tanh(a/2) tanh(b/2))`` on extended reals.

    Uses the overflow-free form
    ``min(|a|,|b|) + log1p(exp(-|a|-|b|)) - log1p(exp(-||a|-|b||))``.
    ``+inf`` is the identity and ``0`` is absorbing.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    p, q = np.abs(a), np.abs(b)
    with np.errstate(invalid="ignore"):
        mag = (
            np.minimum(p, q)
            + np.log1p(np.exp(-(p + q)))
            - np.log1p(np.exp(-np.abs(p - q)))
        )
    mag = np.where(np.isinf(p) & np.isinf(q), np.inf, np.maximum(mag, 0.0))
    mag = np.where((p == 0) | (q == 0), 0.0, mag)
    return np.sign(a) * np.sign(b) * mag


@dataclass(frozen=True, eq=False)
class LlrDensity:
    """Quantized density of the LLR in extended-index layout."""

    quant: QuantizationSpec
    mass: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.mass, dtype=float)
        if m.shape != (self.quant.size + 2,):
            raise ValueError(
                f"mass vector must have length {self.quant.size + 2}, got {m.shape}"
            )
        if (m < 0).any():
            raise ValueError("negative mass")
        m.setflags(write=False)
        object.__setattr__(self, "mass", m)

    # constructors -------------------------------------------------------

    @classmethod
    def from_atoms(cls, quant: QuantizationSpec, atoms: Iterable[tuple[float, float]]):
        """Build a density from ``(llr, mass)`` pairs, rounding each location."""
        atoms = list(atoms)
        mass = np.zeros(quant.size + 2)
        if atoms:
            xs = np.array([x for x, _ in atoms], dtype=float)
            ws = np.array([w for _, w in atoms], dtype=float)
            np.add.at(mass, quant.quantize(xs), ws)
        return cls(quant, mass)

    @classmethod
    def point(cls, quant: QuantizationSpec, x: float) -> "LlrDensity":
        return cls.from_atoms(quant, [(x, 1.0)])

    # accessors ----------------------------------------------------------

    @property
    def bin_mass(self) -> np.ndarray:
        return self.mass[1:-1]

    @property
    def atom_neg_inf(self) -> float:
        return float(self.mass[0])

    @property
    def atom_pos_inf(self) -> float:
        return float(self.mass[-1])

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    def support(self) -> list[tuple[float, float]]:
        vals = self.quant.extended_values
        nz = np.flatnonzero(self.mass)
        return [(float(vals[k]), float(self.mass[k])) for k in nz]

    def mean(self) -> float:
        """Mean over the finite grid; the infinite atoms must be negligible."""
        if self.atom_neg_inf + self.atom_pos_inf > MASS_TOL:
            raise NumericGuardError("mean is undefined with mass at infinity")
        return float(np.dot(self.quant.grid, self.bin_mass))

    def is_bec_closed(self) -> bool:
        """True when all mass sits on ``0`` and ``+inf``."""
        keep = self.mass.copy()
        keep[self.quant.zero_index] = 0.0
        keep[-1] = 0.0
        return not keep.any()

    def array_equal(self, other: "LlrDensity") -> bool:
        return self.quant == other.quant and np.array_equal(self.mass, other.mass)

    # debug dump ---------------------------------------------------------

    def dump(self, fp: TextIO) -> None:
        for x, w in self.support():
            label = "+inf" if x == math.inf else "-inf" if x == -math.inf else repr(x)
            fp.write(f"{label}\t{w!r}\n")

    def dumps(self) -> str:
        buf = io.StringIO()
        self.dump(buf)
        return buf.getvalue()

    @classmethod
    def loads(cls, text: str, quant: QuantizationSpec) -> "LlrDensity":
        atoms = []
        for line in text.splitlines():
            if not line.strip():
                continue
            x, w = line.split("\t")
            atoms.append((float(x), float(w)))
        return cls.from_atoms(quant, atoms)


def _check_same(a, b):
    if a.quant != b.quant:
        raise ValueError(f"quantization mismatch: {a.quant} vs {b.quant}")


def _canonical(a: LlrDensity, b: LlrDensity):
    # Fixed operand order makes the float summation order, and hence the
    # result, independent of argument order.
    if a.mass.tobytes() <= b.mass.tobytes():
        return a, b
    return b, a


def var_conv(a: LlrDensity, b: LlrDensity) -> LlrDensity:
    """Density of ``X1 + X2`` (variable node)."""
    _check_same(a, b)
    a, b = _canonical(a, b)
    q = a.quant
    k, g = q.half_points, q.size
    fa, fb = a.bin_mass, b.bin_mass
    full = np.convolve(fa, fb)  # index m <-> value (m - 2k) * step
    out = np.zeros(g + 2)
    out[1:-1] = full[k : k + g]
    ta, tb = fa.sum(), fb.sum()
    an, ap = a.atom_neg_inf, a.atom_pos_inf
    bn, bp = b.atom_neg_inf, b.atom_pos_inf
    clash = 0.5 * (ap * bn + an * bp)
    out[0] = full[:k].sum() + an * tb + an * bn + ta * bn + clash
    out[-1] = full[k + g :].sum() + ap * tb + ap * bp + ta * bp + clash
    return LlrDensity(q, out)


@lru_cache(maxsize=8)
def _chk_table(q: QuantizationSpec) -> np.ndarray:
    vals = q.extended_values
    out = boxplus(vals[:, None], vals[None, :])
    return q.quantize(out)


def chk_conv(a: LlrDensity, b: LlrDensity) -> LlrDensity:
    """Density of ``2 atanh(tanh(X1/2) tanh(X2/2))`` (check node).

    Every pair of support points is combined exactly and the result is
    re-quantized.
    """
    _check_same(a, b)
    a, b = _canonical(a, b)
    table = _chk_table(a.quant)
    ia = np.flatnonzero(a.mass)
    ib = np.flatnonzero(b.mass)
    w = np.outer(a.mass[ia], b.mass[ib])
    idx = table[np.ix_(ia, ib)]
    out = np.bincount(idx.ravel(), weights=w.ravel(), minlength=a.quant.size + 2)
    return LlrDensity(a.quant, out)


def _error_weights(q: QuantizationSpec) -> np.ndarray:
    w = np.zeros(q.size + 2)
    w[: q.zero_index] = 1.0
    w[q.zero_index] = 0.5
    return w


def error_prob(a: LlrDensity) -> float:
    """Probability of a negative LLR plus half the mass at zero."""
    return float(np.dot(_error_weights(a.quant), a.mass))


def erasure_mass(a: LlrDensity) -> float:
    """Mass of the zero bin; the erasure probability for BEC-closed densities."""
    return float(a.mass[a.quant.zero_index])


def bhattacharyya(a: LlrDensity) -> float:
    """``E[exp(-X/2)]``.  Mass at ``-inf`` makes this diverge and is rejected."""
    if a.atom_neg_inf > 0:
        raise NumericGuardError(
            f"Bhattacharyya functional diverges: mass {a.atom_neg_inf:g} at -inf"
        )
    return float(np.dot(np.exp(-a.quant.grid / 2.0), a.bin_mass))


# ---------------------------------------------------------------------------
# joint densities


@dataclass(frozen=True, eq=False)
class JointLlrDensity:
    """Joint density of two LLRs; ``mass[x, y]`` in extended-index layout."""

    quant: QuantizationSpec
    mass: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.mass, dtype=float)
        n = self.quant.size + 2
        if m.shape != (n, n):
            raise ValueError(f"joint mass must be {n}x{n}, got {m.shape}")
        if (m < 0).any():
            raise ValueError("negative mass")
        m.setflags(write=False)
        object.__setattr__(self, "mass", m)

    @classmethod
    def diagonal(cls, a: LlrDensity) -> "JointLlrDensity":
        """Joint law of ``(X, X)`` for ``X ~ a``."""
        return cls(a.quant, np.diag(a.mass))

    @classmethod
    def product(cls, a: LlrDensity, b: LlrDensity) -> "JointLlrDensity":
        _check_same(a, b)
        return cls(a.quant, np.outer(a.mass, b.mass))

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    def marginal_x(self) -> LlrDensity:
        return LlrDensity(self.quant, self.mass.sum(axis=1))

    def marginal_y(self) -> LlrDensity:
        return LlrDensity(self.quant, self.mass.sum(axis=0))


@lru_cache(maxsize=8)
def _combine_matrix(q: QuantizationSpec, rule: str) -> sparse.csr_matrix:
    """Sparse map from index pairs ``(i1, i2)`` (row ``i1 * n + i2``) to outputs.

    Entries are 1, except the ``+inf`` / ``-inf`` clash of the variable rule,
    which sends half of the pair mass to each infinite atom.
    """
    n = q.size + 2
    i1, i2 = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    rows = (i1 * n + i2).ravel()
    if rule == "C":
        cols = _chk_table(q).ravel()
        return sparse.csr_matrix(
            (np.ones(rows.size), (rows, cols)), shape=(n * n, n)
        )
    if rule != "V":
        raise ValueError(f"unknown combine rule {rule!r}")
    k = q.half_points
    a, b = i1.ravel(), i2.ravel()
    top = n - 1
    clash = ((a == 0) & (b == top)) | ((a == top) & (b == 0))
    pos = ((a == top) | (b == top)) & ~clash
    neg = ((a == 0) | (b == 0)) & ~clash
    s = (a - k - 1) + (b - k - 1)
    sat = np.where(s > k, top, np.where(s < -k, 0, s + k + 1))
    cols = np.where(pos, top, np.where(neg, 0, sat))
    data = np.where(clash, 0.5, 1.0)
    rows_all = np.concatenate([rows, rows[clash]])
    cols_all = np.concatenate([np.where(clash, 0, cols), np.full(clash.sum(), top)])
    data_all = np.concatenate([data, data[clash]])
    return sparse.csr_matrix((data_all, (rows_all, cols_all)), shape=(n * n, n))


def _sub_combine(e: sparse.csr_matrix, n: int, sup: np.ndarray) -> sparse.csr_matrix:
    rows = (sup[:, None] * n + sup[None, :]).ravel()
    return e[rows]


def joint_conv(a: JointLlrDensity, mode: str) -> JointLlrDensity:
    """Self-convolution of a joint density.

    ``mode`` names the rule per coordinate: ``"VV"``, ``"VC"``, ``"CV"`` or
    ``"CC"``, where ``V`` adds and ``C`` applies the tanh rule.  The result is
    the law of ``(x-rule(X1, X2), y-rule(Y1, Y2))`` for two independent draws.
    """
    mode = mode.upper()
    if mode not in {"VV", "VC", "CV", "CC"}:
        raise ValueError(f"unknown joint mode {mode!r}")
    q = a.quant
    n = q.size + 2
    sx = np.flatnonzero(a.mass.any(axis=1))
    sy = np.flatnonzero(a.mass.any(axis=0))
    m = a.mass[np.ix_(sx, sy)]
    ex = _sub_combine(_combine_matrix(q, mode[0]), n, sx)  # (|sx|^2, n)
    ey = _sub_combine(_combine_matrix(q, mode[1]), n, sy)  # (|sy|^2, n)
    ny = sy.size
    # stage 1: combine the x coordinate for every (y1, y2) pair
    stage = np.empty((n, ny, ny))
    ext = ex.T.tocsr()
    for j1 in range(ny):
        pair = (m[:, j1][:, None, None] * m[None, :, :]).reshape(sx.size * sx.size, ny)
        stage[:, j1, :] = ext @ pair
    # stage 2: combine the y coordinate
    out = (ey.T @ stage.reshape(n, ny * ny).T).T
    return JointLlrDensity(q, np.asarray(out))


def joint_event_probs(a: JointLlrDensity) -> tuple[float, float, float, float]:
    """``(P(Ei & Ej), P(Ei & Cj), P(Ci & Ej), P(Ci & Cj))``.

    ``E`` is the error event (negative LLR, or a lost coin flip at zero) and
    ``C`` its complement; the two coins are independent.
    """
    we = _error_weights(a.quant)
    wc = 1.0 - we
    return (
        float(we @ a.mass @ we),
        float(we @ a.mass @ wc),
        float(wc @ a.mass @ we),
        float(wc @ a.mass @ wc),
    )


def _bits(index: int, n: int) -> list[int]:
    """Bits of ``index - 1`` from most to least significant."""
    return [((index - 1) >> t) & 1 for t in range(n - 1, -1, -1)]


def joint_density_evolution(
    base: LlrDensity, n: int, i: int, j: int, cache: dict | None = None
) -> JointLlrDensity:
    """Joint LLR density of subchannels ``i`` and ``j`` (1-based) of length ``2**n``.

    Starts from the diagonal density and applies one joint self-convolution per
    level, most significant bit first (bit 1 selects the variable rule).
    ``cache`` may be shared across calls on the same base to reuse common
    prefixes.
    """
    size = 1 << n
    if not (1 <= i <= size and 1 <= j <= size):
        raise IndexError(f"indices must lie in 1..{size}")
    if cache is None:
        cache = {}
    key: tuple[str, ...] = ()
    dens = cache.get(key)
    if dens is None:
        dens = cache[key] = JointLlrDensity.diagonal(base)
    for bi, bj in zip(_bits(i, n), _bits(j, n)):
        mode = ("V" if bi else "C") + ("V" if bj else "C")
        key = key + (mode,)
        nxt = cache.get(key)
        if nxt is None:
            nxt = cache[key] = joint_conv(dens, mode)
        dens = nxt
    return dens
