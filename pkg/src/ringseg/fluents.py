"""Semantic scene fluents computed from arm and object geometry."""

from __future__ import annotations

import math
from enum import Enum
from typing import Iterable, NamedTuple

from .trace import ARMS, Arm, Frame

CLOSED_JAW = math.pi / 8


class Predicate(str, Enum):
    AT_RING = "at_ring"
    AT_PEG = "at_peg"
    IN_HAND = "in_hand"
    ON = "on"
    REACHABLE = "reachable"
    CLOSED_GRIPPER = "closed_gripper"
    AT_CENTER = "at_center"


ARITY = {
    Predicate.AT_RING: 2,  # arm, color
    Predicate.AT_PEG: 2,
    Predicate.IN_HAND: 2,
    Predicate.ON: 2,  # ring color, peg color
    Predicate.REACHABLE: 3,  # arm, object class, color
    Predicate.CLOSED_GRIPPER: 1,  # arm
    Predicate.AT_CENTER: 1,
}


class Fluent(NamedTuple):
    predicate: Predicate
    args: tuple[str, ...]

    @classmethod
    def make(cls, predicate: Predicate, *args: str) -> Fluent:
        predicate = Predicate(predicate)
        args = tuple(a.value if isinstance(a, Enum) else str(a) for a in args)
        if len(args) != ARITY[predicate]:
            raise ValueError(f"{predicate.value} takes {ARITY[predicate]} args, got {len(args)}")
        return cls(predicate, args)

    @property
    def arm(self) -> str | None:
        if self.predicate is Predicate.ON:
            return None
        return self.args[0]

    def __str__(self) -> str:
        p, a = self.predicate, self.args
        if p is Predicate.AT_RING:
            return f"at({a[0]},ring,{a[1]})"
        if p is Predicate.AT_PEG:
            return f"at({a[0]},peg,{a[1]})"
        if p is Predicate.IN_HAND:
            return f"in_hand({a[0]},ring,{a[1]})"
        if p is Predicate.ON:
            return f"on(ring,{a[0]},peg,{a[1]})"
        if p is Predicate.AT_CENTER:
            return f"at({a[0]},center)"
        return f"{p.value}({','.join(a)})"


FluentSet = frozenset  # frozenset[Fluent]; set equality is order-independent


def _dist(a: tuple[float, ...], b: tuple[float, ...]) -> float:
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def compute_fluents(frame: Frame) -> frozenset[Fluent]:
    """Return every fluent whose rule body holds in ``frame``.

    All comparisons are strict. ``reachable`` ties go to PSM1.
    """
    scene = frame.scene
    rr = scene.ring_radius
    out: set[Fluent] = set()
    arm_ids = [arm.value for arm in ARMS]

    for arm_id, state in zip(arm_ids, frame.arms):
        p = state.pos
        closed = state.jaw < CLOSED_JAW
        if closed:
            out.add(Fluent(Predicate.CLOSED_GRIPPER, (arm_id,)))
        bx, by, _ = scene.base_center
        if math.hypot(p[0] - bx, p[1] - by) < rr:
            out.add(Fluent(Predicate.AT_CENTER, (arm_id,)))
        for ring in scene.rings:
            if _dist(p, ring.pos) < rr:
                out.add(Fluent(Predicate.AT_RING, (arm_id, ring.color.value)))
                if closed:
                    out.add(Fluent(Predicate.IN_HAND, (arm_id, ring.color.value)))
        for peg in scene.pegs:
            if _dist(p, peg.pos) < rr and peg.pos[2] < p[2]:
                out.add(Fluent(Predicate.AT_PEG, (arm_id, peg.color.value)))

    for ring in scene.rings:
        for peg in scene.pegs:
            if _dist(ring.pos, peg.pos) < rr and ring.pos[2] < peg.pos[2]:
                out.add(Fluent(Predicate.ON, (ring.color.value, peg.color.value)))

    y1 = frame.arms[0].pos[1]
    y2 = frame.arms[1].pos[1]
    for kind, objs in (("ring", scene.rings), ("peg", scene.pegs)):
        for obj in objs:
            y = obj.pos[1]
            nearest = Arm.PSM1 if abs(y - y1) <= abs(y - y2) else Arm.PSM2
            out.add(Fluent(Predicate.REACHABLE, (nearest.value, kind, obj.color.value)))

    return frozenset(out)


def fluents_equal(a: Iterable[Fluent], b: Iterable[Fluent]) -> bool:
    return frozenset(a) == frozenset(b)


def without_reachable(fluents: Iterable[Fluent]) -> frozenset[Fluent]:
    return frozenset(f for f in fluents if f.predicate is not Predicate.REACHABLE)


def format_fluents(fluents: Iterable[Fluent]) -> list[str]:
    return sorted(str(f) for f in fluents)
