import math

import numpy as np
import pytest

from ringseg.synth import NoiseConfig, augment_with_noise, build_scenario, generate_trace
from ringseg.synth.dataset import TEST_B_BETAS
from ringseg.trace import ArmState, Color, Frame, Peg, Ring, SceneState, trace_from_kinematics

IDENTITY = (0.0, 0.0, 0.0, 1.0)


def make_scene(rings=(), pegs=(), base=(0.0, 0.0, 0.0), rr=0.01) -> SceneState:
    return SceneState(
        tuple(Ring(Color(c), p) for c, p in rings),
        tuple(Peg(Color(c), p) for c, p in pegs),
        base,
        rr,
    )


def make_frame(p1=(0, 0.1, 0.1), p2=(0, -0.1, 0.1), j1=math.pi / 2, j2=math.pi / 2, scene=None, t=0.0):
    return Frame(t, (ArmState(p1, IDENTITY, j1), ArmState(p2, IDENTITY, j2)), scene or make_scene())


def static_matrix(T: int) -> np.ndarray:
    row = np.array([0, 0.1, 0.1, *IDENTITY, math.pi / 2, 0, -0.1, 0.1, *IDENTITY, math.pi / 2])
    return np.tile(row, (T, 1))


def matrix_trace(K, rate=50.0, scene=None, annotations=None):
    return trace_from_kinematics(K, rate, scene or make_scene(), annotations)


@pytest.fixture(scope="session")
def standard_trace():
    return generate_trace(build_scenario("standard"))


@pytest.fixture(scope="session")
def test_b_traces(standard_trace):
    return [standard_trace] + [
        augment_with_noise(standard_trace, NoiseConfig(beta=b, seed=i))
        for i, b in enumerate(TEST_B_BETAS, start=1)
    ]


def _swap_frame(fr: Frame, mirror: bool) -> Frame:
    def m_arm(a: ArmState) -> ArmState:
        if not mirror:
            return a
        x, y, z = a.pos
        qx, qy, qz, qw = a.quat
        # reflection y -> -y conjugates the rotation: (x, y, z, w) -> (-x, y, -z, w)
        return ArmState((x, -y, z), (-qx, qy, -qz, qw), a.jaw)

    def m_pos(p):
        return (p[0], -p[1], p[2]) if mirror else p

    sc = fr.scene
    scene = SceneState(
        tuple(Ring(r.color, m_pos(r.pos)) for r in sc.rings),
        tuple(Peg(p.color, m_pos(p.pos)) for p in sc.pegs),
        m_pos(sc.base_center),
        sc.ring_radius,
    )
    return Frame(fr.t, (m_arm(fr.arms[1]), m_arm(fr.arms[0])), scene)


def swap_arms(trace, mirror: bool = False):
    """Relabel PSM1 <-> PSM2; with ``mirror`` also reflect the workspace in y."""
    from ringseg.trace import Annotation, Arm, ExecutionTrace

    other = {Arm.PSM1: Arm.PSM2, Arm.PSM2: Arm.PSM1, Arm.BOTH: Arm.BOTH}
    ann = None
    if trace.annotations is not None:
        ann = [Annotation(a.start, a.end, a.action, other[a.arm], a.color) for a in trace.annotations]
    return ExecutionTrace(trace.sample_rate, [_swap_frame(f, mirror) for f in trace.frames], ann, trace.meta)
