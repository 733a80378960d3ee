"""Scenario spec files and the multi-trace datasets built from them."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

from ..trace import ExecutionTrace
from .generator import generate_trace
from .noise import NoiseConfig, augment_with_noise
from .scenarios import SCENARIO_NAMES, Geometry, Timing, build_scenario

TEST_B_BETAS = tuple(round(0.01 * i, 2) for i in range(1, 10))
TEST_C_SCENARIOS = ("failure", "occupied_pegs", "simultaneous")
DATASETS = ("test_b", "test_c")

_SPEC_KEYS = {"name", "seed", "rate", "timing", "geometry", "noise"}
_NOISE_KEYS = {"betas", "lambda", "f_min", "seed", "position_unit", "quat_unit", "jaw_unit"}


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    """What to generate: a scenario (or a named dataset), timing, geometry
    and the noise replicas to add next to the clean trace."""

    name: str = "standard"
    seed: int = 0
    rate: float = 50.0
    timing: Timing = field(default_factory=Timing)
    geometry: Geometry = field(default_factory=Geometry)
    betas: tuple[float, ...] = ()
    noise: NoiseConfig = field(default_factory=NoiseConfig)

    def __post_init__(self) -> None:
        if self.name not in SCENARIO_NAMES + DATASETS:
            raise SpecError(f"unknown scenario {self.name!r}; expected one of {SCENARIO_NAMES + DATASETS}")
        if not self.rate > 0:
            raise SpecError("rate must be positive")
        if any(not b > 0 for b in self.betas):
            raise SpecError("noise betas must be positive")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ScenarioSpec:
        if not isinstance(d, Mapping):
            raise SpecError("scenario spec must be a JSON object")
        unknown = set(d) - _SPEC_KEYS
        if unknown:
            raise SpecError(f"unknown spec keys {sorted(unknown)}")
        if "name" not in d:
            raise SpecError("scenario spec needs a 'name'")
        kw: dict[str, Any] = {"name": d["name"]}
        try:
            if "seed" in d:
                kw["seed"] = int(d["seed"])
            if "rate" in d:
                kw["rate"] = float(d["rate"])
            if "timing" in d:
                kw["timing"] = Timing.from_dict(d["timing"])
            if "geometry" in d:
                kw["geometry"] = Geometry.from_dict(d["geometry"])
            noise = d.get("noise") or {}
            unknown = set(noise) - _NOISE_KEYS
            if unknown:
                raise SpecError(f"unknown noise keys {sorted(unknown)}")
            if "betas" in noise:
                kw["betas"] = tuple(float(b) for b in noise["betas"])
            elif d["name"] == "test_b":
                kw["betas"] = TEST_B_BETAS
            nkw = {k: noise[k] for k in ("f_min", "seed", "position_unit", "quat_unit", "jaw_unit") if k in noise}
            if "lambda" in noise:
                nkw["lam"] = noise["lambda"]
            kw["noise"] = NoiseConfig(**nkw)
        except SpecError:
            raise
        except (TypeError, ValueError) as exc:
            raise SpecError(str(exc)) from None
        return cls(**kw)

    def to_dict(self) -> dict:
        noise = self.noise.to_dict()
        noise.pop("beta")
        noise["betas"] = list(self.betas)
        return {
            "name": self.name,
            "seed": self.seed,
            "rate": self.rate,
            "timing": self.timing.to_dict(),
            "geometry": self.geometry.to_dict(),
            "noise": noise,
        }


def load_spec(path) -> ScenarioSpec:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecError(f"{path}: invalid JSON ({exc})") from None
    return ScenarioSpec.from_dict(doc)


def build_dataset(spec: ScenarioSpec) -> list[tuple[str, ExecutionTrace]]:
    """(file stem, trace) pairs: each scenario's clean trace followed by one
    noisy replica per beta. Replica i uses noise seed ``noise.seed + i``."""
    names = TEST_C_SCENARIOS if spec.name == "test_c" else ("standard",) if spec.name == "test_b" else (spec.name,)
    out = []
    for name in names:
        scenario = build_scenario(name, spec.geometry, spec.seed)
        trace = generate_trace(scenario, spec.rate, spec.timing)
        stem = f"{name}_s{spec.seed}"
        out.append((stem, trace))
        for i, beta in enumerate(spec.betas, start=1):
            cfg = replace(spec.noise, beta=beta, seed=spec.noise.seed + i)
            out.append((f"{stem}_beta{beta:.2f}", augment_with_noise(trace, cfg)))
    return out
