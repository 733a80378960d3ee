"""Per-segment feature vector: polynomial kinematics plus Boolean scene and
variation flags, packed so that the acting arm does not matter."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .fluents import Predicate, compute_fluents
from .segmenter import Segment, normalize_features
from .trace import FEATURES_PER_ARM, N_FEATURES, Arm, ExecutionTrace, kinematic_matrix

F2_PREDICATES = (
    Predicate.AT_RING,
    Predicate.AT_PEG,
    Predicate.IN_HAND,
    Predicate.ON,
    Predicate.CLOSED_GRIPPER,
    Predicate.AT_CENTER,
)
F2_LEN = 2 * len(F2_PREDICATES)
F3_LEN = N_FEATURES

PSM1_FIRST = "psm1_first"
PSM2_FIRST = "psm2_first"
BOTH = "both"

_BLOCKS = {Arm.PSM1: slice(0, FEATURES_PER_ARM), Arm.PSM2: slice(FEATURES_PER_ARM, N_FEATURES)}


@dataclass(frozen=True)
class FeatureConfig:
    poly_degree: int = 5
    move_eps: float = 0.02
    var_eps: float = 0.02

    def __post_init__(self) -> None:
        if self.poly_degree < 1:
            raise ValueError("poly_degree must be >= 1")
        if not (self.move_eps > 0 and self.var_eps > 0):
            raise ValueError("move_eps and var_eps must be positive")

    @property
    def f1_len(self) -> int:
        return (self.poly_degree + 1) * N_FEATURES

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class SegmentFeatures:
    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray
    arm_order: str

    @property
    def f23(self) -> np.ndarray:
        return np.concatenate([self.f2, self.f3])

    def to_json(self) -> dict:
        return {
            "f1": [float(v) for v in self.f1],
            "f2": [bool(v) for v in self.f2],
            "f3": [bool(v) for v in self.f3],
            "arm_order": self.arm_order,
        }

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SegmentFeatures):
            return NotImplemented
        return (
            self.arm_order == other.arm_order
            and np.array_equal(self.f1, other.f1)
            and np.array_equal(self.f2, other.f2)
            and np.array_equal(self.f3, other.f3)
        )


class FeatureError(ValueError):
    pass


def _normalized(trace: ExecutionTrace, K_norm: np.ndarray | None) -> np.ndarray:
    return normalize_features(kinematic_matrix(trace)) if K_norm is None else K_norm


def arm_moved(
    trace: ExecutionTrace,
    seg: Segment,
    arm: Arm,
    cfg: FeatureConfig,
    K_norm: np.ndarray | None = None,
) -> bool:
    """True when any of the arm's normalized features differs by at least
    ``move_eps`` between the segment's first and last frame."""
    K = _normalized(trace, K_norm)[:, _BLOCKS[Arm(arm)]]
    delta = np.abs(K[seg.end.index] - K[seg.start.index])
    return bool(np.any(delta >= cfg.move_eps))


def _variation_flags(K: np.ndarray, seg: Segment, eps: float) -> np.ndarray:
    window = K[seg.start.index : seg.end.index + 1]
    return np.max(np.abs(window - window[0]), axis=0) >= eps


def _arm_sequence(
    moved1: bool, moved2: bool, flags: np.ndarray
) -> tuple[tuple[Arm, Arm], str]:
    if moved1 and not moved2:
        return (Arm.PSM1, Arm.PSM2), PSM1_FIRST
    if moved2 and not moved1:
        return (Arm.PSM2, Arm.PSM1), PSM2_FIRST
    # Both (or neither) moved: put the arm whose variation pattern sorts
    # first in front, so relabelling the arms cannot change the packing.
    b1 = tuple(bool(v) for v in flags[_BLOCKS[Arm.PSM1]])
    b2 = tuple(bool(v) for v in flags[_BLOCKS[Arm.PSM2]])
    key1 = (-sum(b1), tuple(not v for v in b1))
    key2 = (-sum(b2), tuple(not v for v in b2))
    if key2 < key1:
        return (Arm.PSM2, Arm.PSM1), BOTH
    return (Arm.PSM1, Arm.PSM2), BOTH


def _arm_layout(
    trace: ExecutionTrace, seg: Segment, cfg: FeatureConfig, K: np.ndarray
) -> tuple[tuple[Arm, Arm], str, np.ndarray]:
    flags = _variation_flags(K, seg, cfg.var_eps)
    moved1 = arm_moved(trace, seg, Arm.PSM1, cfg, K)
    moved2 = arm_moved(trace, seg, Arm.PSM2, cfg, K)
    order, label = _arm_sequence(moved1, moved2, flags)
    return order, label, flags


def fit_polynomials(y: np.ndarray, dt: float, degree: int) -> np.ndarray:
    """Least-squares polynomial coefficients (constant term first) for each
    column of ``y`` sampled every ``dt`` seconds starting at t = 0."""
    y = np.asarray(y, dtype=float)
    if y.shape[0] < degree + 1:
        raise FeatureError(
            f"segment has {y.shape[0]} samples; a degree-{degree} fit needs {degree + 1}"
        )
    t = np.arange(y.shape[0]) * dt
    V = np.vander(t, degree + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(V, y, rcond=None)
    return coef


def _f1(
    trace: ExecutionTrace,
    seg: Segment,
    cfg: FeatureConfig,
    K: np.ndarray,
    order: tuple[Arm, Arm],
    label: str,
) -> np.ndarray:
    window = K[seg.start.index : seg.end.index + 1]
    coef = fit_polynomials(window, trace.dt, cfg.poly_degree)  # (n+1) x 16
    per_feature = coef.T  # 16 x (n+1)
    first = per_feature[_BLOCKS[order[0]]].ravel()
    if label == BOTH:
        second = per_feature[_BLOCKS[order[1]]].ravel()
    else:
        second = np.zeros_like(first)
    return np.concatenate([first, second])


def build_f1(
    trace: ExecutionTrace,
    seg: Segment,
    cfg: FeatureConfig | None = None,
    K_norm: np.ndarray | None = None,
) -> tuple[np.ndarray, str]:
    """Polynomial coefficients of the normalized features over the segment.

    Returns the ``(n+1)*16`` coefficient vector and the arm order label. A
    lone moving arm always fills the first half; the idle arm's half is zero.
    """
    cfg = cfg or FeatureConfig()
    K = _normalized(trace, K_norm)
    order, label, _ = _arm_layout(trace, seg, cfg, K)
    return _f1(trace, seg, cfg, K, order, label), label


def build_f2(trace: ExecutionTrace, seg: Segment) -> np.ndarray:
    """Colour- and arm-blind fluent flags at the segment's first frame.

    Two slots per predicate: slot 0 is set when the predicate holds for at
    least one arm, slot 1 when it holds for both. ``on`` has no arm, so its
    slots count relations instead (>= 1, >= 2).
    """
    fluents = compute_fluents(trace.frames[seg.start.index])
    out = np.zeros(F2_LEN, dtype=bool)
    for k, pred in enumerate(F2_PREDICATES):
        if pred is Predicate.ON:
            count = sum(1 for f in fluents if f.predicate is pred)
        else:
            count = len({f.args[0] for f in fluents if f.predicate is pred})
        out[2 * k] = count >= 1
        out[2 * k + 1] = count >= 2
    return out


def build_f3(
    trace: ExecutionTrace,
    seg: Segment,
    cfg: FeatureConfig | None = None,
    K_norm: np.ndarray | None = None,
) -> np.ndarray:
    """Which normalized features drift by at least ``var_eps`` from their
    starting value somewhere in the segment, in f1's arm order."""
    cfg = cfg or FeatureConfig()
    K = _normalized(trace, K_norm)
    order, _, flags = _arm_layout(trace, seg, cfg, K)
    return np.concatenate([flags[_BLOCKS[order[0]]], flags[_BLOCKS[order[1]]]])


def build_features(
    trace: ExecutionTrace,
    seg: Segment,
    cfg: FeatureConfig | None = None,
    K_norm: np.ndarray | None = None,
) -> SegmentFeatures:
    cfg = cfg or FeatureConfig()
    K = _normalized(trace, K_norm)
    order, label, flags = _arm_layout(trace, seg, cfg, K)
    f1 = _f1(trace, seg, cfg, K, order, label)
    f3 = np.concatenate([flags[_BLOCKS[order[0]]], flags[_BLOCKS[order[1]]]])
    return SegmentFeatures(f1, build_f2(trace, seg), f3, label)


def build_all(
    trace: ExecutionTrace, segments: list[Segment], cfg: FeatureConfig | None = None
) -> list[SegmentFeatures]:
    K = normalize_features(kinematic_matrix(trace))
    return [build_features(trace, s, cfg, K) for s in segments]
