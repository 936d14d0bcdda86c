"""Pipeline configuration: JSON file with env-var interpolation.

The config digest is embedded in every artifact's provenance; stage
checkpoints cover only the config sections that stage actually consumes,
so flipping a reasoning toggle invalidates reasoning but not detection.
"""
from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path

from .description import DescriptionConfig
from .detection import DetectionConfig
from .errors import ConfigError
from .fusion import FusionConfig
from .jsonutil import digest_of, read_json
from .reasoning import ReasoningConfig

_ENV_REF = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")


def _interpolate(value):
    if isinstance(value, str):
        def repl(match):
            name = match.group(1)
            if name not in os.environ:
                raise ConfigError(f"config references undefined env var ${{{name}}}")
            return os.environ[name]
        return _ENV_REF.sub(repl, value)
    if isinstance(value, dict):
        return {k: _interpolate(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_interpolate(v) for v in value]
    return value


@dataclass
class PipelineConfig:
    scenes: list[Path]
    output_dir: Path
    backends: dict
    detection: DetectionConfig
    fusion: FusionConfig
    description: DescriptionConfig
    reasoning: ReasoningConfig
    eval: dict = field(default_factory=dict)
    cache_dir: Path | None = None
    concurrency: int = 4
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def scene_ids(self) -> list[str]:
        return [p.name for p in self.scenes]

    def scene_dir(self, scene_id: str) -> Path:
        for p in self.scenes:
            if p.name == scene_id:
                return p
        raise ConfigError(f"unknown scene id {scene_id!r}")

    def digest(self) -> str:
        """Digest of the semantic config: tunables and backend kinds, with
        volatile paths/hosts excluded so identical runs from different
        directories produce identical provenance."""
        view = {
            key: self.raw[key]
            for key in ("detection", "fusion", "description", "reasoning", "eval")
            if key in self.raw
        }
        view["concurrency"] = self.raw.get("concurrency", 4)
        backends = {}
        for role, block in self.raw.get("backends", {}).items():
            entry = {"kind": block.get("kind")}
            if "model" in block:
                entry["model"] = block["model"]
            backends[role] = entry
        view["backends"] = backends
        return digest_of(view)

    def stage_view(self, stage: str) -> dict:
        """The config slice whose changes invalidate this stage's checkpoint."""
        b = self.raw.get("backends", {})
        views = {
            "detect": {
                "detector": b.get("detector"),
                "llm": b.get("llm"),
                "detection": self.raw.get("detection"),
            },
            "fuse": {
                "fusion": self.raw.get("fusion"),
                "embeddings": b.get("embeddings"),
            },
            "describe": {
                "description": self.raw.get("description"),
                "vlm": b.get("vlm"),
                "llm": b.get("llm"),
            },
            "reason": {
                "reasoning": self.raw.get("reasoning"),
                "description": self.raw.get("description"),
                "vlm": b.get("vlm"),
                "llm": b.get("llm"),
            },
            "graph": {},
        }
        if stage not in views:
            raise ConfigError(f"unknown stage {stage!r}")
        return views[stage]


def _build_section(cls, block: dict, name: str):
    try:
        return cls(**block)
    except TypeError as exc:
        raise ConfigError(f"bad '{name}' config section: {exc}") from exc


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    try:
        raw = _interpolate(read_json(path))
    except ValueError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc

    scenes = [Path(p) for p in raw.get("scenes", [])]
    if not scenes:
        raise ConfigError("config must list at least one scene directory")
    for scene in scenes:
        if not scene.is_dir():
            raise ConfigError(f"scene directory {scene} does not exist")
    if "output_dir" not in raw:
        raise ConfigError("config must set output_dir")

    backends = raw.get("backends", {})
    for role in ("detector", "vlm", "llm"):
        if role not in backends:
            raise ConfigError(f"config must configure the {role!r} backend")
    for role, block in backends.items():
        if block.get("kind") in ("fixture", "replay"):
            root = Path(block.get("root", ""))
            if not root.is_dir():
                raise ConfigError(f"{role} backend root {root} does not exist")

    desc_block = dict(raw.get("description", {}))
    if "element_scales" in desc_block:
        desc_block["element_scales"] = tuple(float(s) for s in desc_block["element_scales"])
    description = _build_section(DescriptionConfig, desc_block, "description")
    reasoning = _build_section(
        ReasoningConfig, {**raw.get("reasoning", {}), "description": description}, "reasoning")

    cache_dir = Path(raw["cache_dir"]) if raw.get("cache_dir") else None
    return PipelineConfig(
        scenes=scenes,
        output_dir=Path(raw["output_dir"]),
        backends=backends,
        detection=_build_section(DetectionConfig, raw.get("detection", {}), "detection"),
        fusion=_build_section(FusionConfig, raw.get("fusion", {}), "fusion"),
        description=description,
        reasoning=reasoning,
        eval=raw.get("eval", {}),
        cache_dir=cache_dir,
        concurrency=int(raw.get("concurrency", 4)),
        raw=raw,
    )
