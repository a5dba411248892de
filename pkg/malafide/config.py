"""
Run configuration.

A run is described by one YAML file whose sections map onto the dataclasses
that consume them. Values resolve with precedence flags > file > environment
> dataclass defaults; the environment supplies MALAFIDE_RUN_DIR,
MALAFIDE_SEED and MALAFIDE_LOG_LEVEL.
"""

import dataclasses
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import yaml

from malafide.artifacts import atomic_write_text
from malafide.attack import AttackConfig
from malafide.corpus import CorpusConfig
from malafide.detector import VARIANTS, TrainConfig
from malafide.dsp import DEFAULT_SAMPLE_RATE, check_filter_length
from malafide.errors import ConfigError, ValidationError
from malafide.evaluation import EvalConfig

logger = logging.getLogger(__name__)

DEFAULT_RUN_DIR = "runs/default"
DEFAULT_LENGTHS = (65, 129, 257, 513, 1025)
SECTIONS = {
    "corpus": CorpusConfig,
    "train": TrainConfig,
    "attack": AttackConfig,
    "eval": EvalConfig,
}


@dataclass(frozen=True)
class RunConfig:
    """
    Everything a pipeline run needs.

    Args:
        run_dir (Path): Directory all artifacts are written under.
        seed (int): Master seed; also the default training and attack seed.
        sample_rate (int): Corpus sample rate in Hz.
        variants (tuple[str, ...]): CM variants trained and attacked.
        lengths (tuple[int, ...]): Filter lengths swept per attack.
        log_level (str): Logging level name.
    """

    run_dir: Path = Path(DEFAULT_RUN_DIR)
    seed: int = 0
    sample_rate: int = DEFAULT_SAMPLE_RATE
    variants: tuple[str, ...] = ("a", "b")
    lengths: tuple[int, ...] = DEFAULT_LENGTHS
    log_level: str = "INFO"
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self):
        for variant in self.variants:
            if variant not in VARIANTS:
                raise ConfigError(f"unknown CM variant {variant!r}; choose from {sorted(VARIANTS)}")
        if not self.lengths:
            raise ConfigError("lengths must name at least one filter length")
        for length in self.lengths:
            check_filter_length(length)
        if self.sample_rate <= 0:
            raise ConfigError("sample_rate must be positive")

    def train_config(self, variant: str) -> TrainConfig:
        return dataclasses.replace(self.train, variant=variant)

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    return value


def _coerce(value: Any, default: Any, key: str) -> Any:
    """Cast a YAML value to the type of the field's default."""
    try:
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, Path):
            return Path(value)
        if isinstance(default, tuple):
            if isinstance(value, str):
                value = [v.strip() for v in value.split(",") if v.strip()]
            elif not isinstance(value, (list, tuple)):
                value = [value]
            items = list(value)
            if default and not isinstance(default[0], dict):
                items = [_coerce(v, default[0], key) for v in items]
            return tuple(items)
        if isinstance(default, str):
            return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"cannot read {key}={value!r} as {type(default).__name__}")
    return value


def _build(cls, values: dict, prefix: str = ""):
    defaults = cls()
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(prefix + k for k in unknown)}")
    kwargs = {
        k: _coerce(v, getattr(defaults, k), prefix + k) for k, v in values.items() if v is not None
    }
    try:
        return cls(**kwargs)
    except ValidationError as e:
        raise ConfigError(f"invalid {prefix.rstrip('.') or 'run'} config: {e}") from e


def parse_override(text: str) -> tuple[list[str], Any]:
    """Split "section.key=value" into its key path and a YAML-parsed value."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like key=value")
    key, raw = text.split("=", 1)
    path = [p for p in key.strip().split(".") if p]
    if not path:
        raise ConfigError(f"override {text!r} has no key")
    return path, yaml.safe_load(raw) if raw.strip() else None


def _environment_defaults() -> dict:
    env = {"run_dir": os.environ.get("MALAFIDE_RUN_DIR", DEFAULT_RUN_DIR)}
    if "MALAFIDE_SEED" in os.environ:
        env["seed"] = os.environ["MALAFIDE_SEED"]
    if "MALAFIDE_LOG_LEVEL" in os.environ:
        env["log_level"] = os.environ["MALAFIDE_LOG_LEVEL"]
    return env


def load_run_config(path: Path | None = None, overrides: Iterable[str] = ()) -> RunConfig:
    """
    Resolve a run configuration.

    Args:
        path (Path, optional): YAML run-config file.
        overrides (Iterable[str], optional): "key=value" or "section.key=value" strings, applied last.

    Returns:
        RunConfig: The resolved configuration. Training and attack seeds default to the run seed.

    Raises:
        ConfigError: On unreadable files, unknown keys or invalid values.
        FileNotFoundError: If `path` does not exist.
    """
    values: dict[str, Any] = _environment_defaults()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"File {path} does not exist.")
        try:
            loaded = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse {path}: {e}") from e
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path} must hold a mapping at top level")
        for key, value in loaded.items():
            if key in SECTIONS and isinstance(value, dict):
                values.setdefault(key, {}).update(value)
            else:
                values[key] = value

    for text in overrides:
        keys, value = parse_override(text)
        target = values
        for key in keys[:-1]:
            target = target.setdefault(key, {})
            if not isinstance(target, dict):
                raise ConfigError(f"override {text!r} descends into a scalar")
        target[keys[-1]] = value

    top = {k: v for k, v in values.items() if k not in SECTIONS}
    run = _build(RunConfig, top)
    sections = {}
    for name, cls in SECTIONS.items():
        section = dict(values.get(name) or {})
        if name == "train":
            section.setdefault("seed", run.seed)
        if name == "attack":
            section.setdefault("rng_seed", run.seed)
        sections[name] = _build(cls, section, f"{name}.")
    config = dataclasses.replace(run, **sections)
    logger.debug("resolved run config %s", config)
    return config


def dump_run_config(config: RunConfig, path: Path) -> Path:
    """Write the resolved configuration as YAML with sorted keys."""
    return atomic_write_text(path, yaml.safe_dump(config.to_dict(), sort_keys=True))
