"""Execution-trace data model and its JSON file format.

A trace couples the 16-quantity kinematic signature of the two arms with a
synchronized stream of scene geometry (ring and peg positions) and, for
labelled data, the ground-truth action annotations.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

N_FEATURES = 16
FEATURES_PER_ARM = 8

FEATURE_NAMES = tuple(
    f"{arm}_{name}"
    for arm in ("psm1", "psm2")
    for name in ("x", "y", "z", "qx", "qy", "qz", "qw", "jaw")
)

_QUAT_TOL = 1e-6
_SPACING_TOL = 1e-9


class Color(str, Enum):
    RED = "red"
    GREEN = "green"
    BLUE = "blue"
    YELLOW = "yellow"
    GREY = "grey"


class Arm(str, Enum):
    PSM1 = "psm1"
    PSM2 = "psm2"
    BOTH = "both"


ARMS = (Arm.PSM1, Arm.PSM2)


class Action(str, Enum):
    MOVE_RING = "move_ring"
    MOVE_PEG = "move_peg"
    MOVE_CENTER = "move_center"
    GRASP = "grasp"
    EXTRACT = "extract"
    RELEASE = "release"


class TraceError(ValueError):
    """Base class for trace loading and validation failures."""


class TraceParseError(TraceError):
    """The file is not valid JSON or does not follow the trace schema."""


class TraceInvariantError(TraceError):
    """The trace parsed but violates a domain invariant."""


def _vec(values: Sequence[float], n: int, what: str) -> tuple[float, ...]:
    out = tuple(float(v) for v in values)
    if len(out) != n:
        raise TraceInvariantError(f"{what} must have {n} components, got {len(out)}")
    if not all(math.isfinite(v) for v in out):
        raise TraceInvariantError(f"{what} has non-finite components")
    return out


@dataclass(frozen=True)
class ArmState:
    pos: tuple[float, float, float]
    quat: tuple[float, float, float, float]  # x, y, z, w
    jaw: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "pos", _vec(self.pos, 3, "pos"))
        object.__setattr__(self, "quat", _vec(self.quat, 4, "quat"))
        object.__setattr__(self, "jaw", float(self.jaw))
        norm = math.sqrt(sum(q * q for q in self.quat))
        if abs(norm - 1.0) > _QUAT_TOL:
            raise TraceInvariantError(f"quaternion norm {norm!r} is not 1")
        if not 0.0 <= self.jaw <= math.pi:
            raise TraceInvariantError(f"jaw angle {self.jaw!r} outside [0, pi]")


@dataclass(frozen=True)
class Ring:
    color: Color
    pos: tuple[float, float, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "color", Color(self.color))
        object.__setattr__(self, "pos", _vec(self.pos, 3, "ring pos"))


@dataclass(frozen=True)
class Peg:
    color: Color
    pos: tuple[float, float, float]  # tip

    def __post_init__(self) -> None:
        object.__setattr__(self, "color", Color(self.color))
        object.__setattr__(self, "pos", _vec(self.pos, 3, "peg pos"))


@dataclass(frozen=True)
class SceneState:
    rings: tuple[Ring, ...]
    pegs: tuple[Peg, ...]
    base_center: tuple[float, float, float]
    ring_radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "rings", tuple(self.rings))
        object.__setattr__(self, "pegs", tuple(self.pegs))
        object.__setattr__(self, "base_center", _vec(self.base_center, 3, "base_center"))
        object.__setattr__(self, "ring_radius", float(self.ring_radius))
        if not self.ring_radius > 0:
            raise TraceInvariantError("ring_radius must be positive")
        ring_colors = [r.color for r in self.rings]
        if len(set(ring_colors)) != len(ring_colors):
            raise TraceInvariantError("ring colors must be unique")
        # Several grey pegs may coexist (standard setup parks every ring on one).
        peg_colors = [p.color for p in self.pegs if p.color is not Color.GREY]
        if len(set(peg_colors)) != len(peg_colors):
            raise TraceInvariantError("non-grey peg colors must be unique")

    def ring(self, color: Color) -> Ring | None:
        for r in self.rings:
            if r.color is color:
                return r
        return None


@dataclass(frozen=True)
class Frame:
    t: float
    arms: tuple[ArmState, ArmState]
    scene: SceneState

    def __post_init__(self) -> None:
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "arms", tuple(self.arms))
        if len(self.arms) != 2:
            raise TraceInvariantError(f"frame needs exactly 2 arms, got {len(self.arms)}")
        if not (math.isfinite(self.t) and self.t >= 0.0):
            raise TraceInvariantError(f"frame time {self.t!r} must be finite and non-negative")

    def arm(self, arm: Arm) -> ArmState:
        return self.arms[0] if arm is Arm.PSM1 else self.arms[1]


@dataclass(frozen=True)
class Annotation:
    start: float
    end: float
    action: Action
    arm: Arm
    color: Color | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "start", float(self.start))
        object.__setattr__(self, "end", float(self.end))
        object.__setattr__(self, "action", Action(self.action))
        object.__setattr__(self, "arm", Arm(self.arm))
        if self.color is not None:
            object.__setattr__(self, "color", Color(self.color))
        if not self.start < self.end:
            raise TraceInvariantError(f"annotation start {self.start} must precede end {self.end}")

    @property
    def duration(self) -> float:
        return self.end - self.start


def _check_annotation_overlap(annotations: Sequence[Annotation]) -> None:
    for arm in ARMS:
        spans = sorted(
            (a.start, a.end) for a in annotations if a.arm is arm or a.arm is Arm.BOTH
        )
        for (s0, e0), (s1, e1) in zip(spans, spans[1:]):
            if s1 < e0:
                raise TraceInvariantError(
                    f"annotations for {arm.value} overlap: [{s0}, {e0}] and [{s1}, {e1}]"
                )


@dataclass(frozen=True)
class ExecutionTrace:
    sample_rate: float
    frames: tuple[Frame, ...]
    annotations: tuple[Annotation, ...] | None = None
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "sample_rate", float(self.sample_rate))
        object.__setattr__(self, "frames", tuple(self.frames))
        if self.annotations is not None:
            object.__setattr__(self, "annotations", tuple(self.annotations))
        object.__setattr__(self, "meta", {str(k): str(v) for k, v in dict(self.meta).items()})
        if not (math.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise TraceInvariantError("sample_rate must be positive")
        if not self.frames:
            raise TraceInvariantError("trace has no frames")
        dt = 1.0 / self.sample_rate
        t0 = self.frames[0].t
        prev = t0
        for i, fr in enumerate(self.frames[1:], start=1):
            if not fr.t > prev:
                raise TraceInvariantError(f"frame {i}: time {fr.t!r} is not increasing")
            if abs(fr.t - t0 - i * dt) > _SPACING_TOL:
                raise TraceInvariantError(
                    f"frame {i}: time {fr.t!r} is off the 1/{self.sample_rate} Hz grid"
                )
            prev = fr.t
        if self.annotations:
            _check_annotation_overlap(self.annotations)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @cached_property
    def _times(self) -> np.ndarray:
        return np.array([f.t for f in self.frames])

    @property
    def times(self) -> np.ndarray:
        return self._times.copy()

    @cached_property
    def _kinematics(self) -> np.ndarray:
        rows = np.empty((len(self.frames), N_FEATURES))
        for i, fr in enumerate(self.frames):
            a, b = fr.arms
            rows[i, 0:3] = a.pos
            rows[i, 3:7] = a.quat
            rows[i, 7] = a.jaw
            rows[i, 8:11] = b.pos
            rows[i, 11:15] = b.quat
            rows[i, 15] = b.jaw
        rows.setflags(write=False)
        return rows


def kinematic_matrix(trace: ExecutionTrace) -> np.ndarray:
    """Return the T x 16 kinematic signature of ``trace``.

    Columns are PSM1 position (3), quaternion x/y/z/w (4), jaw (1), then the
    same eight quantities for PSM2. The result is a fresh copy.
    """
    return np.array(trace._kinematics, copy=True)


def trace_from_kinematics(
    K: np.ndarray,
    sample_rate: float,
    scene: SceneState | Sequence[SceneState],
    annotations: Sequence[Annotation] | None = None,
    meta: Mapping[str, str] | None = None,
    t0: float = 0.0,
) -> ExecutionTrace:
    """Build a trace from a T x 16 signature; ``scene`` is one state shared
    by every frame or one state per frame."""
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[1] != N_FEATURES:
        raise TraceInvariantError(f"kinematics must be T x {N_FEATURES}, got {K.shape}")
    scenes = [scene] * len(K) if isinstance(scene, SceneState) else list(scene)
    if len(scenes) != len(K):
        raise TraceInvariantError("need one scene state per frame")
    frames = []
    for i, (row, sc) in enumerate(zip(K.tolist(), scenes)):
        arms = (ArmState(row[0:3], row[3:7], row[7]), ArmState(row[8:11], row[11:15], row[15]))
        frames.append(Frame(t0 + i / sample_rate, arms, sc))
    return ExecutionTrace(sample_rate, frames, annotations, meta or {})


# ---------------------------------------------------------------------------
# JSON serialization


def _arm_to_json(a: ArmState) -> dict[str, Any]:
    return {"pos": list(a.pos), "quat": list(a.quat), "jaw": a.jaw}


def _scene_to_json(s: SceneState) -> dict[str, Any]:
    return {
        "rings": [{"color": r.color.value, "pos": list(r.pos)} for r in s.rings],
        "pegs": [{"color": p.color.value, "pos": list(p.pos)} for p in s.pegs],
        "base_center": list(s.base_center),
        "ring_radius": s.ring_radius,
    }


def annotation_to_json(a: Annotation) -> dict[str, Any]:
    return {
        "start": a.start,
        "end": a.end,
        "action": a.action.value,
        "arm": a.arm.value,
        "color": a.color.value if a.color is not None else None,
    }


def trace_to_json(trace: ExecutionTrace) -> dict[str, Any]:
    return {
        "sample_rate": trace.sample_rate,
        "meta": dict(sorted(trace.meta.items())),
        "frames": [
            {
                "t": fr.t,
                "psm1": _arm_to_json(fr.arms[0]),
                "psm2": _arm_to_json(fr.arms[1]),
                "scene": _scene_to_json(fr.scene),
            }
            for fr in trace.frames
        ],
        "annotations": (
            None
            if trace.annotations is None
            else [annotation_to_json(a) for a in trace.annotations]
        ),
    }


def dumps_json(obj: Any) -> str:
    """Canonical JSON text: fixed key order from the producer, shortest
    round-trip float repr, trailing newline."""
    return json.dumps(obj, indent=1, allow_nan=False) + "\n"


def write_atomic(path: str | os.PathLike[str], text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_trace(trace: ExecutionTrace, path: str | os.PathLike[str]) -> None:
    write_atomic(path, dumps_json(trace_to_json(trace)))


class _Reader:
    """Schema checks that remember where in the document they are."""

    def __init__(self, where: str) -> None:
        self.where = where

    def fail(self, msg: str) -> TraceParseError:
        return TraceParseError(f"{self.where}: {msg}")

    def obj(self, value: Any, keys: set[str], optional: set[str] = frozenset()) -> dict:
        if not isinstance(value, dict):
            raise self.fail("expected an object")
        unknown = set(value) - keys - optional
        if unknown:
            raise self.fail(f"unknown keys {sorted(unknown)}")
        missing = keys - set(value)
        if missing:
            raise self.fail(f"missing keys {sorted(missing)}")
        return value

    def num(self, value: Any, what: str) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.fail(f"{what} must be a number")
        return float(value)

    def vec(self, value: Any, n: int, what: str) -> list[float]:
        if not isinstance(value, list) or len(value) != n:
            raise self.fail(f"{what} must be a list of {n} numbers")
        return [self.num(v, what) for v in value]

    def enum(self, cls: type[Enum], value: Any, what: str) -> Any:
        try:
            return cls(value)
        except ValueError:
            raise self.fail(f"invalid {what} {value!r}") from None


def _parse_arm(r: _Reader, value: Any) -> ArmState:
    d = r.obj(value, {"pos", "quat", "jaw"})
    return ArmState(r.vec(d["pos"], 3, "pos"), r.vec(d["quat"], 4, "quat"), r.num(d["jaw"], "jaw"))


def _parse_scene(r: _Reader, value: Any) -> SceneState:
    d = r.obj(value, {"rings", "pegs", "base_center", "ring_radius"})
    items = {}
    for key, cls in (("rings", Ring), ("pegs", Peg)):
        if not isinstance(d[key], list):
            raise r.fail(f"{key} must be a list")
        parsed = []
        for obj in d[key]:
            o = r.obj(obj, {"color", "pos"})
            parsed.append(cls(r.enum(Color, o["color"], "color"), r.vec(o["pos"], 3, "pos")))
        items[key] = parsed
    return SceneState(
        items["rings"],
        items["pegs"],
        r.vec(d["base_center"], 3, "base_center"),
        r.num(d["ring_radius"], "ring_radius"),
    )


def _parse_annotation(r: _Reader, value: Any) -> Annotation:
    d = r.obj(value, {"start", "end", "action", "arm", "color"})
    color = None if d["color"] is None else r.enum(Color, d["color"], "color")
    return Annotation(
        r.num(d["start"], "start"),
        r.num(d["end"], "end"),
        r.enum(Action, d["action"], "action"),
        r.enum(Arm, d["arm"], "arm"),
        color,
    )


def trace_from_json(doc: Any) -> ExecutionTrace:
    top = _Reader("trace")
    d = top.obj(doc, {"sample_rate", "meta", "frames", "annotations"})
    if not isinstance(d["meta"], dict) or not all(isinstance(v, str) for v in d["meta"].values()):
        raise top.fail("meta must be an object of strings")
    if not isinstance(d["frames"], list):
        raise top.fail("frames must be a list")
    frames = []
    prev_raw, prev_scene = None, None
    for i, fr in enumerate(d["frames"]):
        r = _Reader(f"frame {i}")
        try:
            f = r.obj(fr, {"t", "psm1", "psm2", "scene"})
            # the scene is usually unchanged from one frame to the next
            if f["scene"] != prev_raw or type(f["scene"]) is not dict:
                prev_raw, prev_scene = f["scene"], _parse_scene(r, f["scene"])
            frames.append(
                Frame(
                    r.num(f["t"], "t"),
                    (_parse_arm(r, f["psm1"]), _parse_arm(r, f["psm2"])),
                    prev_scene,
                )
            )
        except TraceInvariantError as exc:
            raise TraceInvariantError(f"frame {i}: {exc}") from None
    annotations = None
    if d["annotations"] is not None:
        if not isinstance(d["annotations"], list):
            raise top.fail("annotations must be a list or null")
        annotations = []
        for i, a in enumerate(d["annotations"]):
            r = _Reader(f"annotation {i}")
            try:
                annotations.append(_parse_annotation(r, a))
            except TraceInvariantError as exc:
                raise TraceInvariantError(f"annotation {i}: {exc}") from None
    return ExecutionTrace(
        top.num(d["sample_rate"], "sample_rate"), frames, annotations, d["meta"]
    )


def load_trace(path: str | os.PathLike[str]) -> ExecutionTrace:
    """Read and validate a trace file.

    Raises
    ------
    TraceParseError
        Malformed JSON or a schema violation (unknown/missing keys, wrong
        arity, a third arm). The message names the offending frame.
    TraceInvariantError
        Well-formed data that breaks a domain invariant, e.g. time not
        increasing at some frame.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TraceParseError(f"line {exc.lineno}: {exc.msg}") from None
    return trace_from_json(doc)
