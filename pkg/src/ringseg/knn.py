"""Nearest-neighbour retrieval of segments under a mixed Euclidean/Hamming
metric."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .features import SegmentFeatures
from .trace import Annotation


@dataclass(frozen=True)
class FeatureMask:
    use_f1: bool = True
    use_f23: bool = True

    def __post_init__(self) -> None:
        if not (self.use_f1 or self.use_f23):
            raise ValueError("a feature mask must enable at least one feature group")

    def to_json(self) -> dict:
        return {"use_f1": self.use_f1, "use_f23": self.use_f23}


FULL = FeatureMask(True, True)
BOOLEAN_ONLY = FeatureMask(False, True)
F1_ONLY = FeatureMask(True, False)


@dataclass(frozen=True)
class MetricContext:
    d_emax: float
    d_hmax: float

    def __post_init__(self) -> None:
        if not self.d_emax > 0:
            raise ValueError("d_emax must be positive")
        if not 0 < self.d_hmax <= 1:
            raise ValueError("d_hmax must lie in (0, 1]")


@dataclass(frozen=True)
class RetrievalSet:
    query: int
    members: tuple[tuple[int, float], ...]
    k: int

    @property
    def ids(self) -> list[int]:
        return [m for m, _ in self.members]


def euclidean_f1(a: SegmentFeatures, b: SegmentFeatures) -> float:
    if a.f1.shape != b.f1.shape:
        raise ValueError("f1 lengths differ")
    return float(np.sqrt(np.sum((a.f1 - b.f1) ** 2)))


def hamming_f23(a: SegmentFeatures, b: SegmentFeatures) -> float:
    x, y = a.f23, b.f23
    if x.shape != y.shape:
        raise ValueError("[f2, f3] lengths differ")
    return float(np.count_nonzero(x != y)) / x.size


def _stack(dataset: Sequence[SegmentFeatures]) -> tuple[np.ndarray, np.ndarray]:
    F1 = np.stack([s.f1 for s in dataset]).astype(float)
    F23 = np.stack([s.f23 for s in dataset]).astype(bool)
    return F1, F23


def _pairwise(F1: np.ndarray, F23: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    de = cdist(F1, F1, "euclidean")
    dh = cdist(F23, F23, "hamming")
    return de, dh


def compute_metric_context(dataset: Sequence[SegmentFeatures]) -> MetricContext:
    """Largest pairwise Euclidean (f1) and Hamming ([f2, f3]) distance in the
    dataset. A zero maximum (all segments identical) becomes 1."""
    if len(dataset) < 2:
        raise ValueError("need at least two segments to normalize distances")
    de, dh = _pairwise(*_stack(dataset))
    d_emax = float(de.max()) or 1.0
    d_hmax = float(dh.max()) or 1.0
    return MetricContext(d_emax, d_hmax)


def _combine(de, dh, ctx: MetricContext, mask: FeatureMask):
    if mask.use_f1 and mask.use_f23:
        return np.sqrt((de / ctx.d_emax) ** 2 + (dh / ctx.d_hmax) ** 2)
    if mask.use_f1:
        return de / ctx.d_emax
    return dh / ctx.d_hmax


def mixed_distance(
    a: SegmentFeatures,
    b: SegmentFeatures,
    ctx: MetricContext,
    mask: FeatureMask = FULL,
) -> float:
    """sqrt((d_e/d_emax)^2 + (d_h/d_hmax)^2), or one term alone under a mask."""
    return float(_combine(euclidean_f1(a, b), hamming_f23(a, b), ctx, mask))


class DistanceTable:
    """Pairwise Euclidean and Hamming distances of a dataset, computed once
    and combined on demand for any mask."""

    def __init__(self, dataset: Sequence[SegmentFeatures]) -> None:
        if len(dataset) < 2:
            raise ValueError("need at least two segments")
        self.de, self.dh = _pairwise(*_stack(dataset))
        self.context = MetricContext(float(self.de.max()) or 1.0, float(self.dh.max()) or 1.0)

    def __len__(self) -> int:
        return self.de.shape[0]

    def row(self, query: int, mask: FeatureMask, ctx: MetricContext | None = None) -> np.ndarray:
        return _combine(self.de[query], self.dh[query], ctx or self.context, mask)


def rank(scores: np.ndarray, ids: Sequence[int] | None = None) -> np.ndarray:
    """Positions sorted by score, ties by id."""
    ids = np.arange(len(scores)) if ids is None else np.asarray(ids)
    return np.lexsort((ids, scores))


def p_set(scores: np.ndarray, k: int, limit: int | None = None) -> np.ndarray:
    """Top-``k`` positions plus every later position tying the ``k``-th
    score. With ``limit``, only the ``limit`` best positions are eligible."""
    n = len(scores)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")
    order = rank(scores)
    if limit is not None:
        order = order[: max(limit, k)]
    s_max = scores[order[k - 1]]
    end = k
    while end < len(order) and scores[order[end]] == s_max:
        end += 1
    return order[:end]


def knn_retrieve(
    query: int,
    dataset: Sequence[SegmentFeatures] | DistanceTable,
    k: int,
    ctx: MetricContext | None = None,
    mask: FeatureMask = FULL,
    limit: int | None = None,
) -> RetrievalSet:
    """Rank every segment by its distance to ``query`` (itself included, at
    distance 0) and return the tie-expanded top-``k``.

    ``limit`` caps the neighbourhood the ties may be drawn from, the way a
    plain k-NN returns exactly ``limit`` neighbours.
    """
    table = dataset if isinstance(dataset, DistanceTable) else DistanceTable(dataset)
    n = len(table)
    if not 0 <= query < n:
        raise ValueError(f"query {query} not in dataset")
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")
    scores = table.row(query, mask, ctx)
    members = p_set(scores, k, limit)
    return RetrievalSet(query, tuple((int(i), float(scores[i])) for i in members), k)


def action_counts(annotations: Iterable[Annotation]) -> Counter:
    return Counter(a.action.value for a in annotations)


def choose_k(counts: Mapping[str, int] | Iterable[Annotation]) -> int:
    """Occurrences of the most frequent action."""
    if not isinstance(counts, Mapping):
        counts = action_counts(counts)
    if not counts:
        raise ValueError("no action counts to choose k from")
    return int(max(counts.values()))
