"""Upper and lower bounds on block error / erasure probability."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

from . import bec_exact
from .channels import ChannelModel, llr_density
from .construction import (
    MetricKind,
    ReliabilityVector,
    density_evolution_tree,
    minimal_elements,
    reliability,
)
from .density import (
    JointLlrDensity,
    QuantizationSpec,
    joint_density_evolution,
    joint_event_probs,
)

__all__ = [
    "BoundKind",
    "BoundReport",
    "BecErasureEvents",
    "DensityErrorEvents",
    "union_bound",
    "block_union_prob",
    "dyadic_blocks",
    "decomposed_union_bound",
    "pairwise_lower_bound",
    "tree_upper_bound",
    "positive_association_check",
]

ROOT = 0  # virtual root of the arborescence; real indices are 1-based


class BoundKind(str, enum.Enum):
    UNION = "union"
    DECOMPOSED = "decomposed"
    TREE_UPPER = "tree_upper"
    PAIR_LOWER = "pair_lower"


@dataclass(frozen=True)
class BoundReport:
    kind: BoundKind
    value: float
    witness: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kind": BoundKind(self.kind).value, "value": self.value, "witness": self.witness}


class BecErasureEvents:
    """Erasure events of genie-aided SC decoding on the BEC, computed exactly."""

    exact = True
    kind = "bec_erasure"

    def __init__(self, epsilon: float, n: int):
        self.epsilon = float(epsilon)
        self.n = n
        self._marginals = bec_exact.erasure_vector(self.epsilon, n)
        self._pairs: dict[tuple[int, int], tuple[float, float, float, float]] = {}

    def prob(self, i: int) -> float:
        return float(self._marginals[i - 1])

    def pair(self, i: int, j: int) -> tuple[float, float, float, float]:
        """``(P(Ai & Aj), P(Ai & ~Aj), P(~Ai & Aj), P(~Ai & ~Aj))``."""
        key = (i, j)
        hit = self._pairs.get(key)
        if hit is None:
            hit = bec_exact.evolve_joint(self.epsilon, self.n, i, j).as_tuple()
            self._pairs[key] = hit
        return hit

    def intersection(self, i: int, j: int) -> float:
        return self.pair(i, j)[0]

    def joint_complement(self, indices: Sequence[int]) -> float:
        return bec_exact.evolve_joint_s(self.epsilon, self.n, indices).all_known


class DensityErrorEvents:
    """Error events ``A_i`` of a general symmetric channel via quantized joint density evolution.

    Coarse grid by default; intended for small ``n``.
    """

    exact = False
    kind = "error"

    def __init__(self, channel: ChannelModel, n: int, quant: QuantizationSpec | None = None):
        self.channel = channel
        self.n = n
        self.quant = quant or QuantizationSpec.joint_default()
        self.base = llr_density(channel, self.quant)
        self._marginals = reliability_from_density(self.base, n)
        self._cache: dict = {}
        self._pairs: dict[tuple[int, int], tuple[float, float, float, float]] = {}

    def prob(self, i: int) -> float:
        return float(self._marginals[i - 1])

    def joint_density(self, i: int, j: int) -> JointLlrDensity:
        return joint_density_evolution(self.base, self.n, i, j, self._cache)

    def pair(self, i: int, j: int) -> tuple[float, float, float, float]:
        key = (i, j)
        hit = self._pairs.get(key)
        if hit is None:
            if i == j:
                p = self.prob(i)
                hit = (p, 0.0, 0.0, 1.0 - p)
            else:
                hit = joint_event_probs(self.joint_density(i, j))
            self._pairs[key] = hit
        return hit

    def intersection(self, i: int, j: int) -> float:
        return self.pair(i, j)[0]


def reliability_from_density(base, n: int) -> np.ndarray:
    return density_evolution_tree(base, n, MetricKind.ERROR_PROB).values


def _reduce(es, indices: Iterable[int]) -> list[int]:
    items = sorted(set(int(i) for i in indices))
    if getattr(es, "kind", None) == "bec_erasure":
        return minimal_elements(items)
    return items


# ---------------------------------------------------------------------------
# union-type bounds


def union_bound(r: ReliabilityVector, indices: Iterable[int]) -> BoundReport:
    """Sum of per-bit metrics over the information set (unclamped).

    A Bhattacharyya vector contributes ``Z / 2`` per bit.
    """
    idx = sorted(set(int(i) for i in indices))
    scale = 0.5 if r.kind is MetricKind.BHATTACHARYYA else 1.0
    value = scale * math.fsum(r[i] for i in idx)
    return BoundReport(BoundKind.UNION, value, {"size": len(idx), "metric": r.kind.value})


def block_union_prob(
    channel: ChannelModel,
    n: int,
    k: int,
    i: int,
    kind: MetricKind | str | None = None,
    r: ReliabilityVector | None = None,
) -> float:
    """Probability of the union over the aligned block ``2**k * i + 1 .. 2**k * (i + 1)``.

    Equals ``1 - (1 - p)**(2**k)`` with ``p`` the metric of subchannel ``i + 1``
    of the length ``2**(n - k)`` code.  ``kind`` defaults to erasure events on
    the BEC and error events otherwise.  ``r`` may carry precomputed levels.
    """
    if not 0 <= k <= n:
        raise ValueError(f"k must lie in 0..{n}, got {k}")
    if not 0 <= i < (1 << (n - k)):
        raise ValueError(f"i must lie in 0..{(1 << (n - k)) - 1}, got {i}")
    if kind is None:
        kind = MetricKind.ERASURE_PROB if channel.is_bec else MetricKind.ERROR_PROB
    kind = MetricKind(kind)
    if kind is MetricKind.BHATTACHARYYA:
        raise ValueError("block unions are defined for error or erasure events")
    depth = n - k
    if r is not None and r.kind is kind and len(r.levels) > depth:
        p = float(r.levels[depth][i])
    elif channel.is_bec:
        e = bec_exact.evolve_erasure(channel.param, depth, i + 1)
        p = e if kind is MetricKind.ERASURE_PROB else 0.5 * e
    else:
        p = reliability(channel, depth, kind)[i + 1]
    return 1.0 - (1.0 - p) ** (1 << k)


def dyadic_blocks(indices: Iterable[int], n: int) -> list[tuple[int, int]]:
    """Greedy partition into aligned runs of length ``2**k``, largest ``k`` first.

    Returns ``(k, i)`` pairs naming blocks ``2**k * i + 1 .. 2**k * (i + 1)``,
    ordered by start index.
    """
    remaining = set(int(i) for i in indices)
    blocks = []
    for k in range(n, -1, -1):
        width = 1 << k
        for i in range((1 << n) // width):
            block = range(width * i + 1, width * (i + 1) + 1)
            if all(j in remaining for j in block):
                blocks.append((k, i))
                remaining.difference_update(block)
    return sorted(blocks, key=lambda b: b[1] << b[0])


def decomposed_union_bound(
    r: ReliabilityVector, indices: Iterable[int], channel: ChannelModel
) -> BoundReport:
    """Union bound over dyadic blocks, each block union evaluated exactly."""
    if r.kind is MetricKind.BHATTACHARYYA:
        raise ValueError("decomposed bound needs error or erasure probabilities")
    blocks = dyadic_blocks(indices, r.n)
    terms = [block_union_prob(channel, r.n, k, i, r.kind, r) for k, i in blocks]
    witness = {"blocks": [[(i << k) + 1, (i + 1) << k] for k, i in blocks]}
    return BoundReport(BoundKind.DECOMPOSED, math.fsum(terms), witness)


# ---------------------------------------------------------------------------
# pairwise bounds


def pairwise_lower_bound(es, indices: Iterable[int], strategy: str = "greedy") -> BoundReport:
    """Second-order Bonferroni lower bound over a greedily grown subset.

    Starts from the most probable event and keeps adding the event with the
    largest positive gain ``P(A_i) - sum_{j in S} P(A_i & A_j)``.
    """
    if strategy != "greedy":
        raise ValueError(f"unknown strategy {strategy!r}")
    cand = _reduce(es, indices)
    witness = {"subset": [], "minimal_count": len(cand)}
    if not cand:
        return BoundReport(BoundKind.PAIR_LOWER, 0.0, witness)
    probs = {i: es.prob(i) for i in cand}
    first = max(cand, key=lambda i: (probs[i], -i))
    chosen = [first]
    gain = {i: probs[i] - es.intersection(min(i, first), max(i, first)) for i in cand if i != first}
    value = probs[first]
    while gain:
        best = max(gain, key=lambda i: (gain[i], -i))
        if not gain[best] > 0.0:
            break
        value += gain.pop(best)
        chosen.append(best)
        for i in gain:
            gain[i] -= es.intersection(min(i, best), max(i, best))
    witness["subset"] = sorted(chosen)
    return BoundReport(BoundKind.PAIR_LOWER, value, witness)


def _edge_weights(es, cand: Sequence[int]) -> tuple[dict[int, float], dict[tuple[int, int], float]]:
    """Log survival weights: root -> i and j -> i (``log P(~Ai | ~Aj)``)."""
    root = {i: math.log(1.0 - es.prob(i)) for i in cand}
    edges = {}
    for a, b in itertools.combinations(cand, 2):
        p_cc = es.pair(a, b)[3]
        if p_cc <= 0.0:
            continue
        lp = math.log(p_cc)
        edges[(a, b)] = lp - math.log(1.0 - es.prob(a))
        edges[(b, a)] = lp - math.log(1.0 - es.prob(b))
    return root, edges


def _tree_value(root: dict, edges: dict, parent: dict[int, int]) -> float:
    log_surv = math.fsum(root[i] if p == ROOT else edges[(p, i)] for i, p in parent.items())
    return 1.0 - math.exp(log_surv)


def tree_upper_bound(es, indices: Iterable[int], unsafe: bool = False) -> BoundReport:
    """``1 - prod_i P(~A_i | ~A_parent(i))`` over a maximum-weight arborescence.

    Valid for BEC erasure events, whose complements are positively
    associated.  Other event systems need ``unsafe=True``.
    """
    if getattr(es, "kind", None) != "bec_erasure" and not unsafe:
        raise ValueError("tree upper bound is only proven for BEC erasure events")
    cand = _reduce(es, indices)
    witness: dict = {"parent": {}, "minimal_count": len(cand)}
    if not cand:
        return BoundReport(BoundKind.TREE_UPPER, 0.0, witness)
    if any(es.prob(i) >= 1.0 for i in cand):
        witness["forced"] = True
        return BoundReport(BoundKind.TREE_UPPER, 1.0, witness)
    root, edges = _edge_weights(es, cand)
    graph = nx.DiGraph()
    for i, w in root.items():
        graph.add_edge(ROOT, i, weight=w)
    for (j, i), w in edges.items():
        graph.add_edge(j, i, weight=w)
    tree = nx.maximum_spanning_arborescence(graph, attr="weight", preserve_attrs=True)
    parent = {i: p for p, i in tree.edges()}
    value = min(1.0, max(0.0, _tree_value(root, edges, parent)))
    witness["parent"] = {str(i): parent[i] for i in sorted(parent)}
    return BoundReport(BoundKind.TREE_UPPER, value, witness)


def positive_association_check(es, index_sets: Iterable[Sequence[int]], oracle: bool = False) -> list[dict]:
    """Check ``P(all complements) >= product of complement probabilities``.

    Joint probabilities come from the s-wise evolution, or from exhaustive
    enumeration when ``oracle`` is set.
    """
    if getattr(es, "kind", None) != "bec_erasure":
        raise ValueError("positive association is only checked for BEC erasure events")
    out = []
    for s in index_sets:
        s = tuple(int(i) for i in s)
        if oracle:
            joint = bec_exact.brute_force_events(es.epsilon, es.n, s).all_known
        else:
            joint = es.joint_complement(s)
        product = math.prod(1.0 - es.prob(i) for i in s)
        out.append({"indices": list(s), "joint": joint, "product": product, "margin": joint - product})
    return out
