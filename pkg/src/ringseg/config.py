"""Pipeline configuration with JSON round-trip and strict key checking."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from typing import Any, Mapping

from .features import FeatureConfig
from .knn import BOOLEAN_ONLY, F1_ONLY, FULL, FeatureMask
from .segmenter import SegmenterConfig
from .trace import Action

MASK_NAMES = {"full": FULL, "boolean_only": BOOLEAN_ONLY, "f1_only": F1_ONLY}


class ConfigError(ValueError):
    pass


def _check_keys(d: Mapping[str, Any], allowed: set[str], where: str) -> None:
    if not isinstance(d, Mapping):
        raise ConfigError(f"{where}: expected an object")
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def _sub(cls, d: Mapping[str, Any], where: str):
    _check_keys(d, {f.name for f in fields(cls)}, where)
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_mask(value: Any) -> FeatureMask:
    if isinstance(value, str):
        try:
            return MASK_NAMES[value]
        except KeyError:
            raise ConfigError(f"unknown mask {value!r}; expected one of {sorted(MASK_NAMES)}") from None
    return _sub(FeatureMask, value, "mask")


def mask_name(mask: FeatureMask) -> str:
    for name, m in MASK_NAMES.items():
        if m == mask:
            return name
    raise AssertionError("unreachable: FeatureMask has three valid states")


def _action(name: str, where: str) -> str:
    try:
        return Action(name).value
    except ValueError:
        raise ConfigError(f"{where}: unknown action {name!r}") from None


@dataclass(frozen=True)
class PipelineConfig:
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    # explicit per-action masks; actions not listed are chosen by duration
    masks: Mapping[str, FeatureMask] = field(default_factory=dict)
    short_action_s: float = 2.0
    k: int | str = "auto"
    exemplars: Mapping[str, int] = field(default_factory=dict)
    exemplar_min_score: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k != "auto" and not (isinstance(self.k, int) and self.k >= 1):
            raise ConfigError("k must be a positive integer or 'auto'")
        if not self.short_action_s >= 0:
            raise ConfigError("short_action_s must be non-negative")
        for name in list(self.masks) + list(self.exemplars):
            _action(name, "config")
        for name, sid in self.exemplars.items():
            if not (isinstance(sid, int) and sid >= 0):
                raise ConfigError(f"exemplar for {name} must be a segment id >= 0")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> PipelineConfig:
        _check_keys(d, {f.name for f in fields(cls)}, "config")
        kw: dict[str, Any] = {}
        if "segmenter" in d:
            kw["segmenter"] = _sub(SegmenterConfig, d["segmenter"], "segmenter")
        if "features" in d:
            kw["features"] = _sub(FeatureConfig, d["features"], "features")
        if "masks" in d:
            _check_keys(d["masks"], {a.value for a in Action}, "masks")
            kw["masks"] = {a: parse_mask(v) for a, v in d["masks"].items()}
        if "exemplars" in d:
            _check_keys(d["exemplars"], {a.value for a in Action}, "exemplars")
            kw["exemplars"] = dict(d["exemplars"])
        for key in ("short_action_s", "k", "exemplar_min_score", "seed"):
            if key in d:
                kw[key] = d[key]
        return cls(**kw)

    def to_dict(self) -> dict:
        return {
            "segmenter": self.segmenter.to_dict(),
            "features": self.features.to_dict(),
            "masks": {a: mask_name(m) for a, m in sorted(self.masks.items())},
            "short_action_s": self.short_action_s,
            "k": self.k,
            "exemplars": dict(sorted(self.exemplars.items())),
            "exemplar_min_score": self.exemplar_min_score,
            "seed": self.seed,
        }


def load_config(path: str | os.PathLike[str]) -> PipelineConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return PipelineConfig.from_dict(doc)


def merge(base: Mapping[str, Any], overrides: Mapping[str, Any]) -> dict:
    """Recursive dict merge; ``overrides`` wins, ``None`` values are skipped."""
    out = dict(base)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, Mapping):
            base_value = out.get(key)
            out[key] = merge(base_value if isinstance(base_value, Mapping) else {}, value)
        else:
            out[key] = value
    return out
