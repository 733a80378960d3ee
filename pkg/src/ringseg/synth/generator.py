"""Turn a scripted scenario into a sampled, annotated execution trace.

Every arm motion is a straight-line move whose velocity rises and falls
through minimum-jerk blends (10u^3 - 15u^4 + 6u^5) centred on the action's
start and end times, so acceleration peaks sit on the annotated boundaries.
The jaw follows the same profile between open and closed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..trace import (
    ARMS,
    Action,
    Annotation,
    Arm,
    ArmState,
    Color,
    ExecutionTrace,
    Frame,
    Ring,
    SceneState,
)
from .scenarios import Scenario, Timing

JAW_OPEN = math.pi / 2
JAW_CLOSED = math.pi / 16


class ScriptError(ValueError):
    """The action script cannot be executed from the current state."""


def smoothstep(u: np.ndarray) -> np.ndarray:
    """Minimum-jerk blend 10u^3 - 15u^4 + 6u^5, clamped to [0, 1]."""
    u = np.clip(u, 0.0, 1.0)
    return u**3 * (10.0 - 15.0 * u + 6.0 * u**2)


def _smoothstep_integral(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    c = np.clip(u, 0.0, 1.0)
    inner = c**4 * (2.5 - 3.0 * c + c**2)
    return inner + np.maximum(u - 1.0, 0.0)


def blended_progress(t: np.ndarray, t0: float, duration: float, blend: float) -> np.ndarray:
    """Progress 0 -> 1 of a cruise-speed move over [t0, t0 + duration] whose
    velocity ramps are ``blend`` seconds wide and centred on both ends."""
    if blend <= 0:
        return np.clip((np.asarray(t) - t0) / duration, 0.0, 1.0)
    a = (np.asarray(t) - t0) / blend + 0.5
    b = (np.asarray(t) - t0 - duration) / blend + 0.5
    return (blend / duration) * (_smoothstep_integral(a) - _smoothstep_integral(b))


def minimum_jerk(t: np.ndarray, t0: float, duration: float) -> np.ndarray:
    """Classic point-to-point minimum-jerk progress over [t0, t0 + duration]."""
    return smoothstep((np.asarray(t) - t0) / duration)


def quat_from_yaw(yaw: float, tilt: float) -> tuple[float, float, float, float]:
    """Tool pointing down (rotation pi - tilt about x) then yaw about z; (x, y, z, w)."""
    half_r = (math.pi - tilt) / 2.0
    qx = (math.sin(half_r), 0.0, 0.0, math.cos(half_r))
    qz = (0.0, 0.0, math.sin(yaw / 2.0), math.cos(yaw / 2.0))
    x1, y1, z1, w1 = qz
    x2, y2, z2, w2 = qx
    return (
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
    )


@dataclass
class _Primitive:
    t0: float
    duration: float
    delta: np.ndarray  # (x, y, z, yaw, jaw) increment


@dataclass
class _RingEvent:
    t: float
    kind: str  # "attach" | "detach" | "drop"
    arm: Arm | None = None
    to: tuple[float, float, float] | None = None


@dataclass
class _State:
    tip: dict[Arm, np.ndarray]
    yaw: dict[Arm, float]
    jaw: dict[Arm, float]
    ring: dict[Color, np.ndarray]
    holder: dict[Color, Arm | None]
    prims: dict[Arm, list[_Primitive]] = field(default_factory=dict)
    ring_events: dict[Color, list[_RingEvent]] = field(default_factory=dict)


def _durations(scenario: Scenario, timing: Timing) -> list[float]:
    rng = np.random.default_rng(scenario.rng_seed)
    out = []
    for step in scenario.script:
        d = timing.base_duration(step.action)
        if timing.jitter > 0:
            d *= 1.0 + timing.jitter * rng.standard_normal()
        out.append(max(timing.min_duration, d))
    return out


def _schedule(scenario: Scenario, timing: Timing) -> list[tuple[float, float]]:
    """(start, duration) per step; a ``sync`` step shares its predecessor's start."""
    durations = _durations(scenario, timing)
    out: list[tuple[float, float]] = []
    cursor = timing.lead_in
    group_start, group_end = cursor, cursor
    for step, d in zip(scenario.script, durations):
        if step.sync and out:
            start = group_start
        else:
            start = group_start = group_end
        out.append((start, d))
        group_end = max(group_end, start + d)
    return out


def _execute(scenario: Scenario, schedule: list[tuple[float, float]], st: _State) -> None:
    g = scenario.geometry
    rr = g.ring_radius
    pegs = scenario.pegs
    bx, by, bz = g.base_center

    def yaw_at(x: float) -> float:
        return g.yaw_offset + g.yaw_gain * x

    def move_tip(arm: Arm, t0: float, d: float, target: np.ndarray) -> None:
        delta = np.zeros(5)
        delta[:3] = target - st.tip[arm]
        new_yaw = yaw_at(float(target[0]))
        delta[3] = new_yaw - st.yaw[arm]
        st.prims[arm].append(_Primitive(t0, d, delta))
        st.tip[arm] = target.copy()
        st.yaw[arm] = new_yaw

    def set_jaw(arm: Arm, t0: float, d: float, value: float) -> None:
        delta = np.zeros(5)
        delta[4] = value - st.jaw[arm]
        st.prims[arm].append(_Primitive(t0, d, delta))
        st.jaw[arm] = value

    def held(arm: Arm, color: Color | None, what: str) -> Color:
        if color is None or st.holder.get(color) is not arm:
            raise ScriptError(f"{what}: {arm.value} is not holding the {color} ring")
        return color

    for i, (step, (t0, d)) in enumerate(zip(scenario.script, schedule)):
        arm = step.arm
        if arm not in ARMS:
            raise ScriptError(f"step {i}: actions are executed by a single arm")
        where = f"step {i} ({step.action.value} {arm.value})"
        a = step.action
        if a is Action.MOVE_RING:
            if step.color not in st.ring:
                raise ScriptError(f"{where}: no {step.color} ring in the scene")
            if any(h is arm for h in st.holder.values()):
                raise ScriptError(f"{where}: arm is already holding a ring")
            target = st.ring[step.color] + np.array(g.offset(arm))
            move_tip(arm, t0, d, target)
        elif a is Action.GRASP:
            color = step.color
            if color not in st.ring:
                raise ScriptError(f"{where}: no {color} ring in the scene")
            if np.linalg.norm(st.tip[arm] - st.ring[color]) >= rr:
                raise ScriptError(f"{where}: gripper is not at the {color} ring")
            if st.jaw[arm] < math.pi / 8:
                raise ScriptError(f"{where}: gripper already closed")
            set_jaw(arm, t0, d, JAW_CLOSED)
            st.holder[color] = arm
            st.ring_events[color].append(_RingEvent(t0 + d / 2, "attach", arm))
        elif a is Action.RELEASE:
            if st.jaw[arm] >= math.pi / 8:
                raise ScriptError(f"{where}: gripper is not closed")
            set_jaw(arm, t0, d, JAW_OPEN)
            for color, h in st.holder.items():
                if h is arm:
                    st.holder[color] = None
                    st.ring_events[color].append(_RingEvent(t0 + d / 2, "detach"))
        elif a is Action.EXTRACT:
            color = held(arm, step.color, where)
            lift = np.array([0.0, 0.0, g.lift])
            move_tip(arm, t0, d, st.tip[arm] + lift)
            st.ring[color] = st.ring[color] + lift
        elif a in (Action.MOVE_PEG, Action.MOVE_CENTER):
            color = held(arm, step.color, where)
            if a is Action.MOVE_PEG:
                peg = next((p for p in pegs if p.color is step.target), None)
                if peg is None:
                    raise ScriptError(f"{where}: no {step.target} peg")
                ring_target = np.array(g.seated(peg))
            else:
                ring_target = np.array([bx, by, bz + g.transfer_height])
            grip = st.tip[arm] - st.ring[color]
            move_tip(arm, t0, d, ring_target + grip)
            if step.drop_at is not None:
                if step.drop_to is None:
                    raise ScriptError(f"{where}: drop_at needs drop_to")
                st.holder[color] = None
                st.ring_events[color].append(
                    _RingEvent(t0 + step.drop_at * d, "drop", to=tuple(step.drop_to))
                )
                st.ring[color] = np.array(step.drop_to, dtype=float)
            else:
                st.ring[color] = ring_target
        else:  # pragma: no cover - Action is exhaustive
            raise ScriptError(f"{where}: unsupported action")


def _arm_tracks(st: _State, initial: dict[Arm, np.ndarray], t: np.ndarray, blend: float):
    tracks = {}
    for arm in ARMS:
        val = np.tile(initial[arm], (t.size, 1))
        for p in st.prims[arm]:
            val += np.outer(blended_progress(t, p.t0, p.duration, blend), p.delta)
        tracks[arm] = val
    return tracks


def _ring_tracks(st: _State, rings: tuple[Ring, ...], tracks, t: np.ndarray):
    out = {}
    for ring in rings:
        pos = np.tile(np.array(ring.pos, dtype=float), (t.size, 1))
        for ev in sorted(st.ring_events[ring.color], key=lambda e: e.t):
            i = int(np.searchsorted(t, ev.t))
            if i >= t.size:
                continue
            if ev.kind == "attach":
                tip = tracks[ev.arm][:, :3]
                offset = pos[i] - tip[i]
                pos[i:] = tip[i:] + offset
            elif ev.kind == "detach":
                pos[i:] = pos[i]
            else:
                pos[i:] = np.array(ev.to)
        out[ring.color] = pos
    return out


def generate_trace(
    scenario: Scenario,
    sample_rate: float = 50.0,
    timing: Timing | None = None,
) -> ExecutionTrace:
    """Sample ``scenario`` at ``sample_rate`` Hz and annotate every action."""
    timing = timing or Timing()
    g = scenario.geometry
    schedule = _schedule(scenario, timing)

    st = _State(
        tip={arm: np.array(g.home(arm), dtype=float) for arm in ARMS},
        yaw={arm: g.yaw_offset + g.yaw_gain * g.home(arm)[0] for arm in ARMS},
        jaw={arm: JAW_OPEN for arm in ARMS},
        ring={r.color: np.array(r.pos, dtype=float) for r in scenario.rings},
        holder={r.color: None for r in scenario.rings},
        prims={arm: [] for arm in ARMS},
        ring_events={r.color: [] for r in scenario.rings},
    )
    initial = {
        arm: np.array([*g.home(arm), st.yaw[arm], st.jaw[arm]], dtype=float) for arm in ARMS
    }
    _execute(scenario, schedule, st)

    end = max(s + d for s, d in schedule) if schedule else timing.lead_in
    n = int(math.ceil((end + timing.lead_out) * sample_rate)) + 1
    t = np.arange(n) / sample_rate
    tracks = _arm_tracks(st, initial, t, timing.blend)
    rings = _ring_tracks(st, scenario.rings, tracks, t)
    tilt = {Arm.PSM1: g.tilt, Arm.PSM2: -g.tilt}

    frames = []
    for i in range(n):
        arms = []
        for arm in ARMS:
            x, y, z, yaw, jaw = tracks[arm][i]
            arms.append(
                ArmState(
                    (x, y, z), quat_from_yaw(yaw, tilt[arm]), min(max(jaw, 0.0), math.pi)
                )
            )
        scene = SceneState(
            tuple(Ring(r.color, tuple(rings[r.color][i])) for r in scenario.rings),
            scenario.pegs,
            g.base_center,
            g.ring_radius,
        )
        frames.append(Frame(float(t[i]), tuple(arms), scene))

    annotations = [
        Annotation(
            s,
            s + d,
            step.action,
            step.arm,
            None if step.action is Action.RELEASE else step.color,
        )
        for step, (s, d) in zip(scenario.script, schedule)
    ]
    meta = {
        "scenario": scenario.name,
        "seed": str(scenario.rng_seed),
        "generator": "ringseg.synth",
        "timing": json.dumps(timing.to_dict(), sort_keys=True),
        "geometry": json.dumps(g.to_dict(), sort_keys=True),
    }
    return ExecutionTrace(sample_rate, frames, annotations, meta)
