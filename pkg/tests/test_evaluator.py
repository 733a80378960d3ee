import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ringseg.config import PipelineConfig
from ringseg.evaluator import (
    EvaluationError,
    Occurrence,
    PreparedDataset,
    classify,
    evaluate,
    k_sweep,
    match_segments,
    matching_score,
    precision_recall_f1,
    prepare_dataset,
    prf_from_counts,
    segment_labels,
)
from ringseg.features import SegmentFeatures
from ringseg.knn import DistanceTable, RetrievalSet
from ringseg.segmenter import Changepoint, Segment
from ringseg.trace import Action, Annotation, Arm, ExecutionTrace


def seg(a, b):
    return Segment(Changepoint(int(a * 50), a), Changepoint(int(b * 50), b))


def test_matching_score_examples():
    assert matching_score(seg(1, 3), seg(1, 3)) == 1.0
    assert matching_score(seg(1, 3), seg(4, 5)) == 0.0
    assert matching_score(seg(2, 6), seg(4, 8)) == 0.5
    ann = Annotation(4.0, 8.0, Action.GRASP, Arm.PSM1)
    assert matching_score((2.0, 6.0), ann) == 0.5
    with pytest.raises(EvaluationError):
        matching_score((0.0, 1.0), (2.0, 2.0))


@settings(max_examples=100, deadline=None)
@given(
    a=st.floats(0, 50), la=st.floats(0.1, 20), b=st.floats(0, 50), lb=st.floats(0.1, 20), shift=st.floats(-100, 100)
)
def test_matching_score_shift_invariant(a, la, b, lb, shift):
    m0 = matching_score((a, a + la), (b, b + lb))
    m1 = matching_score((a + shift, a + la + shift), (b + shift, b + lb + shift))
    assert m1 == pytest.approx(m0, abs=1e-9)
    assert 0.0 <= m0 <= 1.0


def test_match_segments():
    ident = [(0, 2), (2, 4), (4, 6)]
    assert match_segments(ident, ident) == [0, 1, 2]
    assert match_segments([(0, 7), (7, 10)], [(0, 10)]) == [0]
    assert match_segments([(0, 3), (7, 10)], [(3, 7)]) == [None]
    # equal overlaps go to the earlier segment
    assert match_segments([(0, 5), (5, 10)], [(3, 7)]) == [0]
    # one identified segment may serve several truths
    assert match_segments([(0, 10)], [(0, 4), (4, 10)]) == [0, 0]


def test_segment_labels():
    anns = [Annotation(0, 4, Action.MOVE_RING, Arm.PSM1), Annotation(4, 5, Action.GRASP, Arm.PSM1)]
    assert segment_labels([seg(0, 3.9), seg(3.9, 5), seg(6, 7)], anns) == ["move_ring", "grasp", None]


def retrieval(labels_in_p):
    return RetrievalSet(0, tuple((i, 0.1 * i) for i in labels_in_p), len(labels_in_p))


def test_prf_full_precision_partial_recall():
    # 10 retrieved, all correct, out of 12 occurrences
    truth = {i: "move_ring" for i in range(12)} | {i: "grasp" for i in range(12, 20)}
    prf = precision_recall_f1(retrieval(range(10)), truth, "move_ring")
    assert (round(100 * prf.precision, 2), round(100 * prf.recall, 2), round(100 * prf.f1, 2)) == (100.0, 83.33, 90.91)


def test_prf_perfect_set():
    truth = {i: ("grasp" if i < 5 else "release") for i in range(9)}
    prf = precision_recall_f1(retrieval(range(5)), truth, Action.GRASP)
    assert (prf.precision, prf.recall, prf.f1) == (1.0, 1.0, 1.0)


def test_prf_hand_confusion():
    truth = {i: "grasp" for i in range(8)} | {i: "release" for i in range(8, 20)}
    members = [0, 1, 2, 3] + list(range(8, 14))
    prf = precision_recall_f1(retrieval(members), truth, "grasp")
    assert (prf.tp, prf.fp, prf.fn) == (4, 6, 4)
    assert prf.precision == 0.4
    assert prf.recall == 0.5
    assert prf.f1 == pytest.approx(0.4444, abs=5e-5)


def test_prf_absent_action():
    with pytest.raises(EvaluationError):
        precision_recall_f1(retrieval([0]), {0: "grasp"}, "extract")


@settings(max_examples=200, deadline=None)
@given(n_occ=st.integers(1, 50), p=st.integers(1, 50), data=st.data())
def test_prf_invariants(n_occ, p, data):
    tp = data.draw(st.integers(0, min(n_occ, p)))
    r = prf_from_counts(tp, p, n_occ)
    assert 0 <= r.precision <= 1 and 0 <= r.recall <= 1
    assert abs(r.f1 * (r.precision + r.recall) - 2 * r.precision * r.recall) <= 1e-12


def _toy_dataset():
    """Two classes of identical, well separated segments and perfect matches."""
    feats, labels, occ, segs = [], [], [], []
    for i in range(6):
        cls = "move_ring" if i % 2 == 0 else "grasp"
        f1 = np.full(96, 0.0 if cls == "grasp" else 1.0)
        f23 = np.zeros(28, dtype=bool)
        f23[0] = cls == "grasp"
        feats.append(SegmentFeatures(f1, f23[:12], f23[12:], "psm1_first"))
        labels.append(cls)
        s = seg(i, i + 1)
        segs.append((0, s))
        ann = Annotation(i, i + 1, Action(cls), Arm.PSM1)
        occ.append(Occurrence(0, ann, i, 1.0))
    durations = {"move_ring": 4.0, "grasp": 1.0}
    return PreparedDataset(segs, feats, labels, occ, DistanceTable(feats), durations)


def test_perfect_pipeline_fixed_point():
    report = classify(_toy_dataset())
    for r in report.per_action.values():
        assert (r.matching, r.precision, r.recall, r.f1) == (1.0, 1.0, 1.0, 1.0)
    assert report.averages == {"matching": 1.0, "precision": 1.0, "recall": 1.0, "f1": 1.0}
    assert report.per_action["grasp"].mask == "boolean_only"
    assert report.per_action["move_ring"].mask == "full"


def test_report_formats():
    report = classify(_toy_dataset())
    rows = list(csv.reader(io.StringIO(report.to_csv())))
    assert rows[0] == ["action", "matching", "precision", "recall", "f1", "n_occ"]
    assert [r[0] for r in rows[1:]] == ["move_ring", "grasp", "Average"]
    assert rows[1][1:] == ["100.00", "100.00", "100.00", "100.00", "3"]
    doc = report.to_json()
    assert set(doc) == {"config", "k", "n_segments", "per_action", "averages"}
    q = report.retrievals_json()["queries"][0]
    assert set(q) == {"action", "query_id", "mask", "members"}


def test_standard_trace_covers_six_classes(standard_trace):
    report = evaluate([standard_trace])
    assert list(report.per_action) == [a.value for a in Action]
    for r in report.per_action.values():
        assert 0 <= r.precision <= 1 and 0 <= r.recall <= 1 and 0 <= r.matching <= 1
    assert report.k == 8


def test_unannotated_trace_rejected(standard_trace):
    bare = ExecutionTrace(standard_trace.sample_rate, standard_trace.frames, None)
    with pytest.raises(EvaluationError):
        evaluate([bare])


def test_pinned_exemplars_make_order_irrelevant(test_b_traces):
    a, b, c = test_b_traces[0], test_b_traces[4], test_b_traces[9]
    data_abc = prepare_dataset([a, b, c])
    n_a = sum(1 for ti, _ in data_abc.segments if ti == 0)
    n_b = sum(1 for ti, _ in data_abc.segments if ti == 1)
    n = len(data_abc.segments)
    pins_abc = {"grasp": 2, "release": 7, "move_ring": n_a + 1}
    cfg = PipelineConfig(exemplars=pins_abc, k=n)
    first = classify(data_abc, cfg)
    # same segments, trace order c, a, b
    n_c = n - n_a - n_b
    pins_cab = {"grasp": n_c + 2, "release": n_c + 7, "move_ring": n_c + n_a + 1}
    second = classify(prepare_dataset([c, a, b]), PipelineConfig(exemplars=pins_cab, k=n))
    for act in pins_abc:
        r1, r2 = first.per_action[act], second.per_action[act]
        assert (r1.precision, r1.recall, r1.f1) == (r2.precision, r2.recall, r2.f1)
    assert first.averages["matching"] == second.averages["matching"]


def test_bad_exemplar_rejected(standard_trace):
    data = prepare_dataset([standard_trace])
    with pytest.raises(EvaluationError):
        classify(data, PipelineConfig(exemplars={"grasp": 10_000}))


def test_k_sweep_rows(standard_trace):
    data = prepare_dataset([standard_trace])
    rows = k_sweep(data, [1, 8, 20])
    assert [k for k, _ in rows] == [1, 8, 20]
    assert all(0 <= f <= 1 for _, f in rows)
