"""Scoring of segmentation (matching score) and retrieval (precision, recall,
F1) against annotated ground truth."""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .config import PipelineConfig, mask_name
from .features import SegmentFeatures, build_all
from .knn import BOOLEAN_ONLY, FULL, DistanceTable, FeatureMask, RetrievalSet, choose_k, knn_retrieve
from .segmenter import Segment, segment
from .trace import Action, Annotation, ExecutionTrace

Interval = tuple[float, float]


class EvaluationError(ValueError):
    pass


def _span(x: Segment | Annotation | Interval) -> Interval:
    if isinstance(x, Segment):
        return x.start.t, x.end.t
    if isinstance(x, Annotation):
        return x.start, x.end
    a, b = x
    return float(a), float(b)


def overlap(a: Segment | Annotation | Interval, b: Segment | Annotation | Interval) -> float:
    a0, a1 = _span(a)
    b0, b1 = _span(b)
    return max(0.0, min(a1, b1) - max(a0, b0))


def matching_score(identified: Segment | Annotation | Interval, truth: Segment | Annotation | Interval) -> float:
    """Length of the intersection over the length of the truth interval."""
    t0, t1 = _span(truth)
    if not t1 > t0:
        raise EvaluationError("truth interval has zero length")
    return overlap(identified, truth) / (t1 - t0)


def match_segments(identified: Sequence, truth: Sequence) -> list[int | None]:
    """For each truth interval, the index of the identified interval with the
    largest intersection (earliest on ties), or None when nothing overlaps."""
    out: list[int | None] = []
    for g in truth:
        best, best_ov = None, 0.0
        for i, s in enumerate(identified):
            ov = overlap(s, g)
            if ov > best_ov:
                best, best_ov = i, ov
        out.append(best)
    return out


def segment_labels(segments: Sequence[Segment], annotations: Sequence[Annotation]) -> list[str | None]:
    """Label each segment with the action it overlaps most (earliest on ties)."""
    idx = match_segments(annotations, segments)
    return [None if i is None else annotations[i].action.value for i in idx]


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


def prf_from_counts(tp: int, p_size: int, n_occ: int) -> PRF:
    if not 0 <= tp <= min(p_size, n_occ):
        raise EvaluationError(f"inconsistent counts: tp={tp}, |P|={p_size}, n_occ={n_occ}")
    pr = tp / p_size if p_size else 0.0
    rec = tp / n_occ if n_occ else 0.0
    f1 = 2 * pr * rec / (pr + rec) if pr + rec > 0 else 0.0
    return PRF(pr, rec, f1, tp, p_size - tp, n_occ - tp)


def precision_recall_f1(
    retrieval: RetrievalSet, truth_labels: Mapping[int, str | None], action: str | Action
) -> PRF:
    """TP are members of the retrieval set labelled ``action``; the class has
    as many occurrences as dataset segments carrying that label."""
    action = Action(action).value
    n_occ = sum(1 for v in truth_labels.values() if v == action)
    if n_occ == 0:
        raise EvaluationError(f"action {action!r} does not occur in the truth labels")
    tp = sum(1 for m in retrieval.ids if truth_labels.get(m) == action)
    return prf_from_counts(tp, len(retrieval.members), n_occ)


@dataclass(frozen=True)
class Occurrence:
    trace: int
    annotation: Annotation
    segment_id: int | None  # global id of the matched identified segment
    score: float


@dataclass
class PreparedDataset:
    """Segments, features and truth of a set of traces, ready for retrieval."""

    segments: list[tuple[int, Segment]]  # (trace index, segment), global id = position
    features: list[SegmentFeatures]
    labels: list[str | None]
    occurrences: list[Occurrence]
    table: DistanceTable | None
    mean_duration: dict[str, float] = field(default_factory=dict)

    @property
    def actions(self) -> list[str]:
        present = {o.annotation.action.value for o in self.occurrences}
        return [a.value for a in Action if a.value in present]

    def annotation_counts(self) -> Counter:
        return Counter(o.annotation.action.value for o in self.occurrences)

    def label_counts(self) -> Counter:
        return Counter(lbl for lbl in self.labels if lbl is not None)

    def matching(self, action: str) -> float:
        scores = [o.score for o in self.occurrences if o.annotation.action.value == action]
        return float(np.mean(scores)) if scores else 0.0


def prepare_dataset(traces: Sequence[ExecutionTrace], cfg: PipelineConfig | None = None) -> PreparedDataset:
    cfg = cfg or PipelineConfig()
    segs: list[tuple[int, Segment]] = []
    feats: list[SegmentFeatures] = []
    labels: list[str | None] = []
    occ: list[Occurrence] = []
    durations: dict[str, list[float]] = {}
    for ti, tr in enumerate(traces):
        if tr.annotations is None:
            raise EvaluationError(f"trace {ti} has no annotations")
        base = len(segs)
        found = segment(tr, cfg.segmenter)
        segs += [(ti, s) for s in found]
        feats += build_all(tr, found, cfg.features)
        labels += segment_labels(found, tr.annotations)
        for ann, m in zip(tr.annotations, match_segments(found, tr.annotations)):
            score = 0.0 if m is None else matching_score(found[m], ann)
            occ.append(Occurrence(ti, ann, None if m is None else base + m, score))
            durations.setdefault(ann.action.value, []).append(ann.duration)
    table = DistanceTable(feats) if len(feats) >= 2 else None
    mean_dur = {a: float(np.mean(v)) for a, v in durations.items()}
    return PreparedDataset(segs, feats, labels, occ, table, mean_dur)


def resolve_mask(action: str, data: PreparedDataset, cfg: PipelineConfig) -> FeatureMask:
    if action in cfg.masks:
        return cfg.masks[action]
    return BOOLEAN_ONLY if data.mean_duration[action] < cfg.short_action_s else FULL


def pick_exemplar(action: str, data: PreparedDataset, cfg: PipelineConfig) -> int | None:
    if action in cfg.exemplars:
        sid = cfg.exemplars[action]
        if not 0 <= sid < len(data.segments):
            raise EvaluationError(f"exemplar {sid} for {action} is not a segment id")
        return sid
    cands = [o for o in data.occurrences if o.annotation.action.value == action and o.segment_id is not None]
    for o in cands:
        if o.score >= cfg.exemplar_min_score:
            return o.segment_id
    if not cands:
        return None
    return max(cands, key=lambda o: o.score).segment_id


def resolve_k(data: PreparedDataset, cfg: PipelineConfig) -> int:
    if cfg.k == "auto":
        return choose_k(data.annotation_counts())
    return int(cfg.k)


@dataclass(frozen=True)
class ActionResult:
    matching: float
    precision: float
    recall: float
    f1: float
    n_occ: int
    exemplar: int | None
    mask: str
    retrieved: tuple[tuple[int, float], ...] = ()

    def to_json(self) -> dict:
        return {
            "matching": self.matching,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "n_occ": self.n_occ,
            "exemplar": self.exemplar,
            "mask": self.mask,
        }


@dataclass(frozen=True)
class EvalReport:
    per_action: dict[str, ActionResult]
    averages: dict[str, float]
    k: int
    n_segments: int
    config: dict

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "k": self.k,
            "n_segments": self.n_segments,
            "per_action": {a: r.to_json() for a, r in self.per_action.items()},
            "averages": self.averages,
        }

    def to_csv(self) -> str:
        """Percentages, one row per action class followed by the average row."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["action", "matching", "precision", "recall", "f1", "n_occ"])

        def pct(v: float) -> str:
            return f"{100 * v:.2f}"

        for a, r in self.per_action.items():
            w.writerow([a, pct(r.matching), pct(r.precision), pct(r.recall), pct(r.f1), r.n_occ])
        avg = self.averages
        w.writerow(["Average", pct(avg["matching"]), pct(avg["precision"]), pct(avg["recall"]), pct(avg["f1"]), ""])
        return buf.getvalue()

    def retrievals_json(self) -> dict:
        return {
            "k": self.k,
            "queries": [
                {
                    "action": a,
                    "query_id": r.exemplar,
                    "mask": self.config_mask(r.mask),
                    "members": [[i, s] for i, s in r.retrieved],
                }
                for a, r in self.per_action.items()
                if r.exemplar is not None
            ],
        }

    @staticmethod
    def config_mask(name: str) -> dict:
        from .config import MASK_NAMES

        return MASK_NAMES[name].to_json()


def classify(data: PreparedDataset, cfg: PipelineConfig | None = None, k: int | None = None) -> EvalReport:
    """Retrieve one tie-expanded set per action class and score it.

    Each class queries with its exemplar; the set holds the class's
    occurrence count of neighbours (plus ties), drawn from the ``k`` nearest.
    """
    cfg = cfg or PipelineConfig()
    if data.table is None:
        raise EvaluationError("need at least two segments to classify")
    k = resolve_k(data, cfg) if k is None else k
    n = len(data.segments)
    truth = dict(enumerate(data.labels))
    label_counts = data.label_counts()
    per: dict[str, ActionResult] = {}
    for action in data.actions:
        mask = resolve_mask(action, data, cfg)
        q = pick_exemplar(action, data, cfg)
        n_occ = label_counts.get(action, 0)
        matching = data.matching(action)
        if q is None or n_occ == 0:
            per[action] = ActionResult(matching, 0.0, 0.0, 0.0, n_occ, q, mask_name(mask))
            continue
        ret = knn_retrieve(q, data.table, min(n_occ, n), mask=mask, limit=min(k, n))
        prf = precision_recall_f1(ret, truth, action)
        per[action] = ActionResult(
            matching, prf.precision, prf.recall, prf.f1, n_occ, q, mask_name(mask), ret.members
        )
    if not per:
        raise EvaluationError("no action classes to evaluate")
    averages = {
        key: float(np.mean([getattr(r, key) for r in per.values()]))
        for key in ("matching", "precision", "recall", "f1")
    }
    return EvalReport(per, averages, k, n, cfg.to_dict())


def evaluate(traces: Sequence[ExecutionTrace], cfg: PipelineConfig | None = None) -> EvalReport:
    cfg = cfg or PipelineConfig()
    return classify(prepare_dataset(traces, cfg), cfg)


def k_sweep(data: PreparedDataset, ks: Sequence[int], cfg: PipelineConfig | None = None) -> list[tuple[int, float]]:
    """Average F1 for each neighbourhood size in ``ks``."""
    cfg = cfg or PipelineConfig()
    return [(int(k), classify(data, cfg, k=int(k)).averages["f1"]) for k in ks]


def default_sweep(data: PreparedDataset, cfg: PipelineConfig | None = None) -> list[int]:
    """1 up to twice the automatic k, in roughly even steps."""
    cfg = cfg or PipelineConfig()
    top = min(2 * choose_k(data.annotation_counts()), len(data.segments))
    return sorted({int(round(v)) for v in np.linspace(1, top, num=min(top, 12))})
