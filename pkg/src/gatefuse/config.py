"""Declarative run configuration: JSON file in, validated dataclasses out.

Every field has a default; unknown keys are rejected loudly (exit code 2
territory) rather than silently ignored. Commands echo the fully resolved
configuration into their output directory so a run can be reproduced from
its artifacts alone.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .audio import FrontEnd
from .classifiers import (
    FAMILIES,
    ForestConfig,
    GnbConfig,
    LogRegConfig,
    SvmConfig,
)
from .errors import ConfigError
from .feature_selection import (
    POLICY_MEAN_ABS,
    POLICY_QUANTILE,
    POLICY_TOP_K,
    SelectionConfig,
)
from .pipeline import MODALITIES, STRATEGIES
from .synth import SynthSpec


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    workers: int = 1
    strategy: str = "pre-post-fs"
    modality: str = "both"
    classifier_family: str = "svm"
    gate_family: str = "svm"
    split_ratios: tuple = (0.7, 0.15, 0.15)
    front_end: FrontEnd = field(default_factory=FrontEnd)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    svm: SvmConfig = field(default_factory=SvmConfig)
    logreg: LogRegConfig = field(default_factory=LogRegConfig)
    gnb: GnbConfig = field(default_factory=GnbConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)

    def classifier_cfg(self, family: str):
        return {"svm": self.svm, "logreg": self.logreg, "gnb": self.gnb,
                "forest": self.forest}[family]

    def classifier_cfgs(self) -> dict:
        return {f: self.classifier_cfg(f) for f in FAMILIES}


_SECTIONS = {
    "front_end": FrontEnd,
    "selection": SelectionConfig,
    "svm": SvmConfig,
    "logreg": LogRegConfig,
    "gnb": GnbConfig,
    "forest": ForestConfig,
}

_TUPLE_FIELDS = {"split_ratios", "ratios"}


def _dataclass_from(cls, payload: dict, where: str):
    if not isinstance(payload, dict):
        raise ConfigError(f"section {where!r} must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(payload) - names)
    if unknown:
        raise ConfigError(f"unknown config key(s) under {where!r}: {unknown}")
    kwargs = {
        k: tuple(v) if k in _TUPLE_FIELDS and isinstance(v, list) else v
        for k, v in payload.items()
    }
    return cls(**kwargs)


def _validate(cfg: RunConfig) -> RunConfig:
    if cfg.strategy not in STRATEGIES:
        raise ConfigError(f"strategy must be one of {STRATEGIES}, got {cfg.strategy!r}")
    if cfg.modality not in MODALITIES:
        raise ConfigError(f"modality must be one of {MODALITIES}, got {cfg.modality!r}")
    for name in (cfg.classifier_family, cfg.gate_family):
        if name not in FAMILIES:
            raise ConfigError(f"classifier family must be one of {FAMILIES}, got {name!r}")
    if cfg.workers < 1:
        raise ConfigError(f"workers must be >= 1, got {cfg.workers}")
    if len(cfg.split_ratios) != 3:
        raise ConfigError(f"split_ratios needs 3 fractions, got {cfg.split_ratios!r}")
    if cfg.selection.policy not in (POLICY_MEAN_ABS, POLICY_QUANTILE, POLICY_TOP_K):
        raise ConfigError(f"unknown selection policy {cfg.selection.policy!r}")
    return cfg


def config_from_dict(payload: dict) -> RunConfig:
    if not isinstance(payload, dict):
        raise ConfigError("configuration root must be a JSON object")
    payload = dict(payload)
    kwargs = {}
    for key, cls in _SECTIONS.items():
        if key in payload:
            kwargs[key] = _dataclass_from(cls, payload.pop(key), key)
    scalar_names = {f.name for f in dataclasses.fields(RunConfig)} - set(_SECTIONS)
    unknown = sorted(set(payload) - scalar_names)
    if unknown:
        raise ConfigError(f"unknown config key(s): {unknown}")
    for k, v in payload.items():
        kwargs[k] = tuple(v) if k in _TUPLE_FIELDS and isinstance(v, list) else v
    try:
        cfg = RunConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return _validate(cfg)


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(payload)


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """Replace top-level scalar fields; None values mean 'not supplied'."""
    updates = {k: v for k, v in overrides.items() if v is not None}
    if not updates:
        return _validate(cfg)
    return _validate(dataclasses.replace(cfg, **updates))


def config_to_dict(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)


def synth_spec_from_dict(payload: dict) -> SynthSpec:
    spec = _dataclass_from(SynthSpec, payload, "synth")
    if isinstance(spec.ratios, list):
        spec = dataclasses.replace(spec, ratios=tuple(spec.ratios))
    return spec


def echo_config(payload: dict, out_dir: str | Path) -> None:
    """Drop the fully resolved configuration into an output directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.echo.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
