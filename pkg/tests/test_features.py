import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ringseg.features import (
    BOTH,
    F2_LEN,
    F3_LEN,
    PSM1_FIRST,
    PSM2_FIRST,
    FeatureConfig,
    FeatureError,
    arm_moved,
    build_all,
    build_f1,
    build_f2,
    build_f3,
    build_features,
    fit_polynomials,
)
from ringseg.segmenter import Changepoint, Segment, normalize_features, segment
from ringseg.trace import Arm, kinematic_matrix, trace_from_kinematics

from conftest import make_scene, matrix_trace, static_matrix, swap_arms

CFG = FeatureConfig()


def whole(trace) -> Segment:
    n = len(trace) - 1
    return Segment(Changepoint(0, 0.0), Changepoint(n, float(trace.times[n])))


def ramp_trace(cols, T=100, amount=0.05):
    K = static_matrix(T)
    for c in cols:
        K[:, c] = K[0, c] + np.linspace(0, amount, T)
    return matrix_trace(K)


def test_arm_moved():
    static = matrix_trace(static_matrix(100))
    assert not arm_moved(static, whole(static), Arm.PSM1, CFG)
    tr = ramp_trace([0])  # 5 cm along x
    assert arm_moved(tr, whole(tr), Arm.PSM1, CFG)
    assert not arm_moved(tr, whole(tr), Arm.PSM2, CFG)
    K = static_matrix(100)
    K[:, 15] = np.linspace(math.pi / 2, 0.0, 100)
    grip = matrix_trace(K)
    assert arm_moved(grip, whole(grip), Arm.PSM2, CFG)


def test_fit_polynomials_examples():
    dt = 0.02
    t = np.arange(50) * dt
    coef = fit_polynomials(np.column_stack([np.full(50, 0.7), 2 * t]), dt, 5)
    assert np.allclose(coef[:, 0], [0.7, 0, 0, 0, 0, 0], atol=1e-9)
    assert np.allclose(coef[:, 1], [0, 2, 0, 0, 0, 0], atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(
    coeffs=st.lists(st.floats(-2, 2, allow_nan=False), min_size=1, max_size=6),
    n=st.integers(30, 120),
)
def test_fit_is_exact_for_low_degree_polynomials(coeffs, n):
    dt = 0.02
    t = np.arange(n) * dt
    y = np.polynomial.polynomial.polyval(t, coeffs)
    c = fit_polynomials(y[:, None], dt, 5)[:, 0]
    assert np.max(np.abs(np.polynomial.polynomial.polyval(t, c) - y)) <= 1e-9


def test_segment_too_short_to_fit():
    tr = matrix_trace(static_matrix(50))
    seg = Segment(Changepoint(0, 0.0), Changepoint(4, 0.08))
    with pytest.raises(FeatureError):
        build_f1(tr, seg)


def test_f1_on_normalized_features():
    # f1 describes the max-abs normalized signature
    tr = ramp_trace([0], T=51, amount=0.05)
    f1, order = build_f1(tr, whole(tr))
    assert order == PSM1_FIRST
    t = np.arange(51) * tr.dt
    x = normalize_features(kinematic_matrix(tr))[:, 0]
    slope = (x[-1] - x[0]) / t[-1]
    assert np.allclose(f1[0:6], [x[0], slope, 0, 0, 0, 0], atol=1e-9)


def test_only_psm2_moves_fills_first_half():
    tr = ramp_trace([9])
    f1, order = build_f1(tr, whole(tr))
    assert order == PSM2_FIRST
    assert f1.shape == (96,)
    assert np.all(f1[48:] == 0)
    K = normalize_features(kinematic_matrix(tr))
    # first block is PSM2's y position in column 9 -> feature 1 of the block
    assert np.isclose(f1[6], K[0, 9])
    assert f1[7] != 0


def test_static_segment():
    tr = matrix_trace(static_matrix(60))
    f = build_features(tr, whole(tr))
    assert f.arm_order == BOTH
    assert not f.f3.any()
    per_feature = f.f1.reshape(16, 6)
    assert np.allclose(per_feature[:, 1:], 0, atol=1e-9)
    assert (f.f1.size, f.f2.size, f.f3.size) == (96, F2_LEN, F3_LEN)


def test_f2_empty_scene_is_all_false():
    tr = matrix_trace(static_matrix(30))
    assert not build_f2(tr, whole(tr)).any()


def test_f2_in_hand_arm_blind():
    scene = make_scene(rings=[("blue", (0.0, -0.1, 0.1))])
    K = static_matrix(30)
    K[:, 15] = math.pi / 16  # PSM2 closed on the ring
    tr = matrix_trace(K, scene=scene)
    f2 = build_f2(tr, whole(tr))
    assert f2[4:6].tolist() == [True, False]  # in_hand
    assert f2[0:2].tolist() == [True, False]  # at_ring
    assert f2[8:10].tolist() == [True, False]  # closed_gripper


def test_f2_both_closed():
    K = static_matrix(30)
    K[:, 7] = K[:, 15] = 0.1
    tr = matrix_trace(K)
    assert build_f2(tr, whole(tr))[8:10].tolist() == [True, True]


def test_f2_on_counts_relations():
    scene = make_scene(
        rings=[("red", (0.0, 0.0, 0.025)), ("blue", (0.1, 0.0, 0.025))],
        pegs=[("red", (0.0, 0.0, 0.03)), ("blue", (0.1, 0.0, 0.03))],
    )
    tr = matrix_trace(static_matrix(30), scene=scene)
    assert build_f2(tr, whole(tr))[6:8].tolist() == [True, True]


def test_f3_translation_only():
    tr = ramp_trace([0, 1, 2])
    f3 = build_f3(tr, whole(tr))
    assert f3[:3].all() and not f3[3:].any()


def test_f3_grasp_flags_jaw_of_acting_arm(standard_trace):
    grasp = next(a for a in standard_trace.annotations if a.action.value == "grasp" and a.arm is Arm.PSM2)
    i0, i1 = (int(round(x * standard_trace.sample_rate)) for x in (grasp.start, grasp.end))
    seg = Segment(Changepoint(i0, standard_trace.times[i0]), Changepoint(i1, standard_trace.times[i1]))
    f = build_features(standard_trace, seg)
    assert f.arm_order == PSM2_FIRST
    assert f.f3.tolist() == [False] * 7 + [True] + [False] * 8


def test_build_features_json_shape(standard_trace):
    segs = segment(standard_trace)
    feats = build_all(standard_trace, segs)
    doc = feats[3].to_json()
    assert (len(doc["f1"]), len(doc["f2"]), len(doc["f3"])) == (96, 12, 16)
    assert doc["arm_order"] in {PSM1_FIRST, PSM2_FIRST, BOTH}
    for f in feats:
        if f.arm_order != BOTH:
            assert np.all(f.f1[48:] == 0)


def test_time_shift_invariance():
    base = ramp_trace([0, 1, 7], T=80)
    shifted = trace_from_kinematics(kinematic_matrix(base), 50.0, base.frames[0].scene, t0=12.34)
    s0, s1 = whole(base), Segment(Changepoint(0, 12.34), Changepoint(79, float(shifted.times[79])))
    assert np.array_equal(build_features(base, s0).f1, build_features(shifted, s1).f1)


@pytest.mark.parametrize("mirror", [False, True])
def test_arm_swap_invariance(standard_trace, mirror):
    swapped = swap_arms(standard_trace, mirror=mirror)
    segs_a, segs_b = segment(standard_trace), segment(swapped)
    assert [(s.start.index, s.end.index) for s in segs_a] == [(s.start.index, s.end.index) for s in segs_b]
    fa, fb = build_all(standard_trace, segs_a), build_all(swapped, segs_b)
    for a, b in zip(fa, fb):
        assert np.array_equal(a.f2, b.f2)
        assert np.array_equal(a.f3, b.f3)
        if not mirror and a.arm_order != BOTH:
            assert np.array_equal(a.f1, b.f1)
            assert {a.arm_order, b.arm_order} == {PSM1_FIRST, PSM2_FIRST}


def test_config_validation():
    with pytest.raises(ValueError):
        FeatureConfig(poly_degree=0)
    with pytest.raises(ValueError):
        FeatureConfig(move_eps=0)
    assert FeatureConfig(poly_degree=3).f1_len == 64
