"""Synthetic ring-transfer traces and kinematic noise."""

from .generator import JAW_CLOSED, JAW_OPEN, ScriptError, generate_trace, minimum_jerk
from .noise import NoiseConfig, augment_with_noise, noise_psd, synthesize_noise
from .scenarios import (
    EXPECTED_ACTIONS,
    SCENARIO_NAMES,
    Geometry,
    Scenario,
    ScriptStep,
    Timing,
    build_scenario,
)

__all__ = [
    "EXPECTED_ACTIONS",
    "JAW_CLOSED",
    "JAW_OPEN",
    "SCENARIO_NAMES",
    "Geometry",
    "NoiseConfig",
    "Scenario",
    "ScriptError",
    "ScriptStep",
    "Timing",
    "augment_with_noise",
    "build_scenario",
    "generate_trace",
    "minimum_jerk",
    "noise_psd",
    "synthesize_noise",
]
