"""Run configuration: flat ``key = value`` files, environment overrides, CLI overrides."""
from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Mapping

from .corpus import SplitSpec
from .paths import ExtractionLimits, PathKind
from .tasks import CLONE_PRESETS, ClonePreset, TrainConfig

ENV_PREFIX = "MULTIREP_"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    representations: str = "ast,cfg,pdg"
    task: str = "file_level"
    # extraction
    ast_max_len: int = 8
    ast_max_width: int = 2
    max_ast: int = 200
    max_cfg: int = 10
    max_pdg: int = 100
    enumeration_cap: int = 10000
    workers: int = 0
    # splits and vocabulary
    train_fraction: float = 0.7
    test_fraction: float = 0.2
    validation_fraction: float = 0.1
    min_class_size: int = 10
    min_count: int = 2
    # model and training
    dim: int = 128
    dropout: float = 0.25
    lr: float = 0.001
    batch_size: int = 1024
    epochs: int = 50
    patience: int = 5
    dtype: str = "float64"
    seed: int = 0
    # clone detection
    clone_preset: str = "desk"
    clone_classes: int = 0
    clone_true: int = 0
    clone_false: int = 0
    theta: float = 0.4
    # benchmarking
    bench_reps: int = 3

    def __post_init__(self) -> None:
        kinds = self.kinds
        if PathKind.AST not in kinds:
            raise ConfigError("representations must include ast")
        if self.task not in ("file_level", "method_level"):
            raise ConfigError(f"task must be file_level or method_level, not {self.task!r}")
        if self.clone_preset not in CLONE_PRESETS:
            raise ConfigError(f"unknown clone preset {self.clone_preset!r}; choose from {sorted(CLONE_PRESETS)}")
        if self.dtype not in ("float64", "float32"):
            raise ConfigError("dtype must be float64 or float32")
        if self.bench_reps < 3:
            raise ConfigError("bench_reps must be at least 3")

    @property
    def kinds(self) -> tuple[PathKind, ...]:
        names = [p.strip().upper() for p in self.representations.split(",") if p.strip()]
        try:
            chosen = {PathKind(n) for n in names}
        except ValueError as exc:
            raise ConfigError(f"unknown representation in {self.representations!r}") from exc
        return tuple(k for k in (PathKind.AST, PathKind.CFG, PathKind.PDG) if k in chosen)

    @property
    def limits(self) -> ExtractionLimits:
        return ExtractionLimits(self.ast_max_len, self.ast_max_width, self.max_ast, self.max_cfg, self.max_pdg,
                                self.enumeration_cap, self.seed)

    @property
    def split(self) -> SplitSpec:
        return SplitSpec(self.train_fraction, self.test_fraction, self.validation_fraction, self.seed)

    @property
    def train(self) -> TrainConfig:
        return TrainConfig(self.kinds, self.task, self.dim, self.dropout, self.lr, self.batch_size, self.epochs,
                           self.patience, self.seed, self.dtype)

    @property
    def clones(self) -> ClonePreset:
        base = CLONE_PRESETS[self.clone_preset]
        return ClonePreset(self.clone_classes or base.n_classes, self.clone_true or base.n_true,
                           self.clone_false or base.n_false)

    def dumps(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)}\n" for f in fields(self))

    def with_overrides(self, values: Mapping[str, str]) -> "RunConfig":
        types = {f.name: f.type for f in fields(self)}
        changes = {}
        for key, raw in values.items():
            key = key.strip().lower()
            if key not in types:
                raise ConfigError(f"unknown configuration key {key!r}")
            kind = types[key]
            try:
                changes[key] = int(raw) if kind == "int" else float(raw) if kind == "float" else str(raw).strip()
            except ValueError:
                raise ConfigError(f"{key} expects {kind}, got {raw!r}") from None
        return replace(self, **changes)


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def env_overrides(environ: Mapping[str, str] = os.environ) -> dict[str, str]:
    return {k[len(ENV_PREFIX):].lower(): v for k, v in environ.items() if k.startswith(ENV_PREFIX)}


def resolve_config(path: Path | str | None = None, overrides: Mapping[str, str] = (),
                   environ: Mapping[str, str] = os.environ) -> RunConfig:
    """Defaults, then the config file, then ``MULTIREP_*`` variables, then explicit overrides."""
    config = RunConfig()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {p} not found")
        config = config.with_overrides(parse_config_text(p.read_text(encoding="utf-8"), str(p)))
    config = config.with_overrides(env_overrides(environ))
    return config.with_overrides(dict(overrides))
