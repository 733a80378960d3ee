"""Scripted ring-transfer scenarios: initial layout plus an action script."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Mapping

from ..trace import Action, Arm, Color, Peg, Ring

Vec3 = tuple[float, float, float]

SCENARIO_NAMES = ("standard", "failure", "occupied_pegs", "simultaneous")

EXPECTED_ACTIONS = {"standard": 36, "failure": 18, "occupied_pegs": 17, "simultaneous": 12}


def _number(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ValueError(f"{name} must be a finite number, got {value!r}")
    return float(value)


def _check_numbers(obj: Any, positive: tuple[str, ...] = (), non_negative: tuple[str, ...] = ()) -> None:
    for f in fields(obj):
        value = getattr(obj, f.name)
        if isinstance(value, tuple):
            if len(value) != 3:
                raise ValueError(f"{f.name} must have 3 components")
            for v in value:
                _number(v, f.name)
        else:
            v = _number(value, f.name)
            if f.name in positive and not v > 0:
                raise ValueError(f"{f.name} must be positive")
            if f.name in non_negative and v < 0:
                raise ValueError(f"{f.name} must be non-negative")


@dataclass(frozen=True)
class Geometry:
    ring_radius: float = 0.01
    base_center: Vec3 = (0.0, 0.0, 0.0)
    peg_height: float = 0.03
    seat_depth: float = 0.005  # ring center below the peg tip when seated
    base_ring_z: float = 0.002  # ring center lying on the base
    transfer_height: float = 0.05
    lift: float = 0.03  # extraction height
    grasp_offset: float = 0.004  # gripper tip to ring center, along y
    grasp_height: float = 0.006  # gripper tip above the ring center
    home_psm1: Vec3 = (0.0, 0.09, 0.07)
    home_psm2: Vec3 = (0.0, -0.09, 0.07)
    yaw_gain: float = 3.0  # rad of wrist yaw per metre of x
    yaw_offset: float = 0.7  # rad, keeps the quaternion away from its turning point
    tilt: float = 0.3  # rad, each arm leans toward its own side

    def __post_init__(self) -> None:
        _check_numbers(self, positive=("ring_radius", "peg_height"))

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> Geometry:
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown geometry keys {sorted(unknown)}")
        vals = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return cls(**vals)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    def home(self, arm: Arm) -> Vec3:
        return self.home_psm1 if arm is Arm.PSM1 else self.home_psm2

    def offset(self, arm: Arm) -> Vec3:
        g, h = self.grasp_offset, self.grasp_height
        return (0.0, g, h) if arm is Arm.PSM1 else (0.0, -g, h)

    def peg(self, color: Color, x: float, y: float) -> Peg:
        return Peg(color, (x, y, self.base_center[2] + self.peg_height))

    def seated(self, peg: Peg) -> Vec3:
        x, y, z = peg.pos
        return (x, y, z - self.seat_depth)

    def on_base(self, x: float, y: float) -> Vec3:
        return (x, y, self.base_center[2] + self.base_ring_z)


@dataclass(frozen=True)
class Timing:
    move: float = 3.69
    short: float = 1.05  # grasp, release, extract
    jitter: float = 0.0  # std of a relative duration perturbation
    min_duration: float = 0.3
    blend: float = 0.3  # width of the velocity ramps around each boundary
    lead_in: float = 1.5
    lead_out: float = 1.5

    def __post_init__(self) -> None:
        _check_numbers(
            self,
            positive=("move", "short", "min_duration"),
            non_negative=("jitter", "blend", "lead_in", "lead_out"),
        )

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> Timing:
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown timing keys {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    def base_duration(self, action: Action) -> float:
        if action in (Action.MOVE_RING, Action.MOVE_PEG, Action.MOVE_CENTER):
            return self.move
        return self.short


@dataclass(frozen=True)
class ScriptStep:
    action: Action
    arm: Arm
    color: Color | None = None
    target: Color | None = None  # peg color for move_peg
    sync: bool = False  # start together with the previous step
    drop_at: float | None = None  # move progress at which the ring falls
    drop_to: Vec3 | None = None


@dataclass(frozen=True)
class Scenario:
    name: str
    rings: tuple[Ring, ...]
    pegs: tuple[Peg, ...]
    script: tuple[ScriptStep, ...]
    geometry: Geometry = field(default_factory=Geometry)
    rng_seed: int = 0

    @property
    def n_actions(self) -> int:
        return len(self.script)


def _transfer(giver: Arm, taker: Arm, color: Color, peg: Color) -> list[ScriptStep]:
    return [
        ScriptStep(Action.MOVE_RING, giver, color),
        ScriptStep(Action.GRASP, giver, color),
        ScriptStep(Action.EXTRACT, giver, color),
        ScriptStep(Action.MOVE_CENTER, giver, color),
        ScriptStep(Action.MOVE_RING, taker, color),
        ScriptStep(Action.GRASP, taker, color),
        ScriptStep(Action.RELEASE, giver),
        ScriptStep(Action.MOVE_PEG, taker, color, peg),
        ScriptStep(Action.RELEASE, taker),
    ]


def _place(arm: Arm, color: Color, peg: Color, extract: bool, sync: bool = False) -> list[ScriptStep]:
    steps = [ScriptStep(Action.MOVE_RING, arm, color, sync=sync), ScriptStep(Action.GRASP, arm, color, sync=sync)]
    if extract:
        steps.append(ScriptStep(Action.EXTRACT, arm, color, sync=sync))
    steps += [
        ScriptStep(Action.MOVE_PEG, arm, color, peg, sync=sync),
        ScriptStep(Action.RELEASE, arm, sync=sync),
    ]
    return steps


def _interleave(a: list[ScriptStep], b: list[ScriptStep]) -> list[ScriptStep]:
    out = []
    for x, y in zip(a, b):
        out += [x, replace(y, sync=True)]
    return out


def standard(geometry: Geometry | None = None, seed: int = 0) -> Scenario:
    """Every ring starts on a grey peg on PSM1's side; its coloured peg is on
    PSM2's side, so each ring is handed over at the centre (9 actions each)."""
    g = geometry or Geometry()
    xs = (-0.045, -0.015, 0.015, 0.045)
    colors = (Color.RED, Color.GREEN, Color.BLUE, Color.YELLOW)
    grey = [g.peg(Color.GREY, x, 0.05) for x in xs]
    target_x = dict(zip((Color.YELLOW, Color.RED, Color.GREEN, Color.BLUE), xs))
    colored = [g.peg(c, target_x[c], -0.05) for c in colors]
    rings = tuple(Ring(c, g.seated(p)) for c, p in zip(colors, grey))
    script: list[ScriptStep] = []
    for c in colors:
        script += _transfer(Arm.PSM1, Arm.PSM2, c, c)
    return Scenario("standard", rings, tuple(grey + colored), tuple(script), g, seed)


def failure(geometry: Geometry | None = None, seed: int = 0) -> Scenario:
    """The blue ring slips out of PSM1's gripper on the way to the centre and
    lands on PSM2's side of the base, where PSM2 recovers it."""
    g = geometry or Geometry()
    grey_a = g.peg(Color.GREY, -0.03, 0.05)
    grey_b = g.peg(Color.GREY, 0.0, 0.05)
    pegs = (
        grey_a,
        grey_b,
        g.peg(Color.RED, 0.04, 0.06),
        g.peg(Color.BLUE, 0.03, -0.05),
        g.peg(Color.GREEN, -0.03, -0.05),
        g.peg(Color.YELLOW, 0.0, -0.06),
    )
    rings = (
        Ring(Color.RED, g.seated(grey_a)),
        Ring(Color.BLUE, g.seated(grey_b)),
        Ring(Color.GREEN, g.on_base(-0.045, -0.075)),
    )
    script = _place(Arm.PSM1, Color.RED, Color.RED, extract=True)
    script += [
        ScriptStep(Action.MOVE_RING, Arm.PSM1, Color.BLUE),
        ScriptStep(Action.GRASP, Arm.PSM1, Color.BLUE),
        ScriptStep(Action.EXTRACT, Arm.PSM1, Color.BLUE),
        ScriptStep(
            Action.MOVE_CENTER, Arm.PSM1, Color.BLUE, drop_at=0.6, drop_to=g.on_base(0.015, -0.03)
        ),
        ScriptStep(Action.RELEASE, Arm.PSM1),
        ScriptStep(Action.MOVE_RING, Arm.PSM2, Color.BLUE),
        ScriptStep(Action.GRASP, Arm.PSM2, Color.BLUE),
        ScriptStep(Action.MOVE_PEG, Arm.PSM2, Color.BLUE, Color.BLUE),
        ScriptStep(Action.RELEASE, Arm.PSM2),
    ]
    script += _place(Arm.PSM2, Color.GREEN, Color.GREEN, extract=False)
    return Scenario("failure", rings, pegs, tuple(script), g, seed)


def occupied_pegs(geometry: Geometry | None = None, seed: int = 0) -> Scenario:
    """The blue ring sits on the red peg; PSM2 must clear it before seating
    the red ring. PSM1 handles the two rings lying on its side."""
    g = geometry or Geometry()
    red_peg = g.peg(Color.RED, 0.03, -0.05)
    pegs = (
        g.peg(Color.GREY, 0.0, 0.03),
        red_peg,
        g.peg(Color.BLUE, -0.03, -0.05),
        g.peg(Color.GREEN, 0.03, 0.05),
        g.peg(Color.YELLOW, -0.03, 0.05),
    )
    rings = (
        Ring(Color.BLUE, g.seated(red_peg)),
        Ring(Color.RED, g.on_base(0.0, -0.075)),
        Ring(Color.GREEN, g.on_base(-0.045, 0.075)),
        Ring(Color.YELLOW, g.on_base(0.045, 0.08)),
    )
    script = _place(Arm.PSM2, Color.BLUE, Color.BLUE, extract=True)
    script += _place(Arm.PSM2, Color.RED, Color.RED, extract=False)
    script += _place(Arm.PSM1, Color.GREEN, Color.GREEN, extract=False)
    script += _place(Arm.PSM1, Color.YELLOW, Color.YELLOW, extract=False)
    return Scenario("occupied_pegs", rings, pegs, tuple(script), g, seed)


def simultaneous(geometry: Geometry | None = None, seed: int = 0) -> Scenario:
    """Both arms place a ring in lock-step, then PSM1 places a third alone."""
    g = geometry or Geometry()
    pegs = (
        g.peg(Color.RED, 0.035, 0.05),
        g.peg(Color.BLUE, -0.035, -0.05),
        g.peg(Color.GREEN, -0.035, 0.05),
        g.peg(Color.GREY, 0.0, 0.0 + 0.03),
    )
    rings = (
        Ring(Color.RED, g.on_base(-0.04, 0.08)),
        Ring(Color.BLUE, g.on_base(0.04, -0.08)),
        Ring(Color.GREEN, g.on_base(0.045, 0.075)),
    )
    script = _interleave(
        _place(Arm.PSM1, Color.RED, Color.RED, extract=False),
        _place(Arm.PSM2, Color.BLUE, Color.BLUE, extract=False),
    )
    script += _place(Arm.PSM1, Color.GREEN, Color.GREEN, extract=False)
    return Scenario("simultaneous", rings, pegs, tuple(script), g, seed)


BUILDERS = {
    "standard": standard,
    "failure": failure,
    "occupied_pegs": occupied_pegs,
    "simultaneous": simultaneous,
}


def build_scenario(name: str, geometry: Geometry | None = None, seed: int = 0) -> Scenario:
    try:
        builder = BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; expected one of {SCENARIO_NAMES}") from None
    return builder(geometry, seed)
