"""Pipeline configuration: TOML in, validated dataclasses out, TOML provenance back."""
import dataclasses
import sys
from dataclasses import dataclass, field

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..gan import GanConfig
from ..seqgen import GenerationConfig
from .schema import atomic_open
from .synth import SyntheticWorldConfig

# every stage draws from its own stream so rerunning one stage never shifts another
STREAMS = {"world": 0, "corpus": 1, "lstm": 2, "gan": 3, "generation": 4, "eval": 5}


class ConfigError(ValueError):
    pass


@dataclass
class EmbedConfig:
    window: int = 5
    dim: int = 128
    negatives: int = 5
    epochs: int = 50
    lr: float = 0.025
    min_lr: float = 1e-4
    min_count: int = 1

    def validate(self):
        if self.window < 1 or self.dim < 1 or self.negatives < 1 or self.min_count < 1:
            raise ValueError("embed.window, embed.dim, embed.negatives and embed.min_count "
                             "must be positive")
        if self.epochs < 0 or self.lr <= 0 or self.min_lr < 0:
            raise ValueError("embed.epochs must be >= 0 and embed.lr > 0")
        return self


@dataclass
class LstmConfig:
    hidden_dim: int = 128
    epochs: int = 25
    lr: float = 1e-3
    clip_norm: float = 5.0
    shuffle_within_basket: bool = True

    def validate(self):
        if self.hidden_dim < 1 or self.epochs < 0 or self.lr <= 0 or self.clip_norm < 0:
            raise ValueError("lstm.hidden_dim must be positive, lstm.epochs >= 0, lstm.lr > 0")
        return self


@dataclass
class EvalConfig:
    min_support: float = 0.01
    max_length: int = 3
    top_k: list = field(default_factory=lambda: [10, 20, 50, 100])
    separability_seeds: int = 10

    def validate(self):
        if not 0 < self.min_support <= 1:
            raise ValueError("eval.min_support must lie in (0, 1]")
        if self.max_length < 1 or any(k < 1 for k in self.top_k) or self.separability_seeds < 1:
            raise ValueError("eval.max_length, eval.top_k and eval.separability_seeds "
                             "must be positive")
        return self


SECTIONS = {
    "world": SyntheticWorldConfig,
    "embed": EmbedConfig,
    "lstm": LstmConfig,
    "gan": GanConfig,
    "generation": GenerationConfig,
    "eval": EvalConfig,
}


@dataclass
class PipelineConfig:
    seed: int = 0
    workdir: str = "run"
    world: SyntheticWorldConfig = field(default_factory=SyntheticWorldConfig)
    embed: EmbedConfig = field(default_factory=EmbedConfig)
    lstm: LstmConfig = field(default_factory=LstmConfig)
    gan: GanConfig = field(default_factory=GanConfig)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def validate(self):
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        for name in SECTIONS:
            try:
                getattr(self, name).validate()
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        return self

    def to_dict(self):
        out = _drop_none(dataclasses.asdict(self))
        for name in SECTIONS:
            out[name].pop("seed", None)
        return out

    def section_seed(self, name):
        return stream_seed(self.seed, name)

    def world_config(self):
        return dataclasses.replace(self.world, seed=self.section_seed("world"))

    def generation_config(self):
        return dataclasses.replace(self.generation, seed=self.section_seed("generation"))

    def dump(self, path):
        with atomic_open(path, "wb") as fh:
            tomli_w.dump(self.to_dict(), fh)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        unknown = set(data) - {"seed", "workdir", *SECTIONS}
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        kwargs = {}
        for key in ("seed", "workdir"):
            if key in data:
                kwargs[key] = _coerce(data[key], getattr(cls, key), key)
        for name, section_cls in SECTIONS.items():
            table = data.get(name, {})
            if not isinstance(table, dict):
                raise ConfigError(f"[{name}] must be a table")
            kwargs[name] = _build_section(section_cls, table, name)
        return cls(**kwargs).validate()


def _drop_none(obj):
    if isinstance(obj, dict):
        return {k: _drop_none(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, (list, tuple)):
        return [_drop_none(v) for v in obj]
    return obj


def _coerce(value, default, label):
    """Check ``value`` against the type of the field's default."""
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, (list, tuple)):
        ok = isinstance(value, list)
        value = type(default)(value) if ok else value
    elif isinstance(default, str):
        ok = isinstance(value, str)
    else:
        ok = True
    if not ok:
        raise ConfigError(f"{label}: expected {type(default).__name__}, got {value!r}")
    return value


def _build_section(section_cls, table, name):
    fields = {f.name: f for f in dataclasses.fields(section_cls)}
    if "seed" in table:
        raise ConfigError(f"[{name}] seed: set the top-level seed; stage seeds derive from it")
    unknown = set(table) - set(fields)
    if unknown:
        raise ConfigError(f"[{name}] unknown key(s): {', '.join(sorted(unknown))}")
    defaults = section_cls()
    kwargs = {}
    for key, value in table.items():
        default = getattr(defaults, key)
        kwargs[key] = value if default is None else _coerce(value, default, f"{name}.{key}")
    return section_cls(**kwargs)


def load_config(path=None, overrides=None):
    """Read a TOML config (defaults when ``path`` is None) and apply dotted-key overrides."""
    data = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        *parents, leaf = dotted.split(".")
        node = data
        for p in parents:
            node = node.setdefault(p, {})
        node[leaf] = value
    return PipelineConfig.from_dict(data)


def stream_seed(root, name):
    """Integer seed of the named sub-stream of ``root``."""
    seq = np.random.SeedSequence(root, spawn_key=(STREAMS[name],))
    return int(seq.generate_state(1, np.uint64)[0] >> np.uint64(1))


def stream_rng(root, name):
    return np.random.default_rng(stream_seed(root, name))
