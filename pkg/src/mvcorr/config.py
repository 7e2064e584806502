"""Flat ``key=value`` experiment configuration.

One entry per line, ``#`` starts a comment. Keys carry a section prefix::

    method=dcclstm
    out=runs/dcclstm
    data.path=corpus.mvseq          # omit to generate from the synth.* settings
    data.train_speakers=0,1,2,3
    synth.utterance_count=128
    model.hidden_sizes=64
    train.epochs=10
    corr.r_x=1e-4
    eval.k_reconstruction=20

Values are typed from the target dataclass fields; tuples are comma
separated and ``none`` clears an optional value.
"""
import dataclasses
import types
import typing
from dataclasses import dataclass, field

from .corr import CorrConfig
from .data import SynthSpec
from .evaluation import EvalConfig
from .exceptions import ConfigError
from .pipeline import METHODS, ModelConfig
from .train import TrainConfig

SECTIONS = {
    "synth": SynthSpec,
    "model": ModelConfig,
    "train": TrainConfig,
    "corr": CorrConfig,
    "eval": EvalConfig,
}
DATA_KEYS = ("path", "train_speakers", "downstream_speakers")


@dataclass
class ExperimentConfig:
    method: str = "baseline"
    out: str = "."
    data_path: str | None = None
    train_speakers: tuple | None = None
    downstream_speakers: tuple | None = None
    synth: SynthSpec = field(default_factory=SynthSpec)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    corr: CorrConfig = field(default_factory=CorrConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)


def _parse_ints(key, text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(key, f"expected comma-separated integers, got {text!r}") from None


def _coerce(key, text, annotation):
    text = text.strip()
    options = typing.get_args(annotation) if isinstance(annotation, types.UnionType) else (annotation,)
    if type(None) in options and text.lower() == "none":
        return None
    kind = next(t for t in options if t is not type(None))
    try:
        if kind is bool:
            if text.lower() not in ("true", "false", "1", "0"):
                raise ValueError
            return text.lower() in ("true", "1")
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind is tuple:
            return _parse_ints(key, text)
        return text
    except ValueError:
        raise ConfigError(key, f"cannot parse {text!r} as {kind.__name__}") from None


def parse_lines(lines, source="<config>"):
    """Parse config text into an ordered ``{key: raw value}`` mapping."""
    entries = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{source}:{lineno}", f"expected key=value, got {raw.strip()!r}")
        entries[key.strip()] = value.strip()
    return entries


def read_config(path):
    try:
        with open(path) as fh:
            return parse_lines(fh, source=str(path))
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None


def build_config(entries):
    """Validate raw entries into an :class:`ExperimentConfig`; nothing runs before this succeeds."""
    top = {}
    sections = {name: {} for name in SECTIONS}
    for key, value in entries.items():
        if key in ("method", "out"):
            top[key] = value
            continue
        section, _, name = key.partition(".")
        if section == "data":
            if name not in DATA_KEYS:
                raise ConfigError(key, f"unknown key; data accepts {', '.join(DATA_KEYS)}")
            top[f"data_{name}" if name == "path" else name] = (
                value if name == "path" else _parse_ints(key, value))
            continue
        if section not in SECTIONS:
            raise ConfigError(key, "unknown key")
        hints = {f.name: f.type for f in dataclasses.fields(SECTIONS[section])}
        if name not in hints:
            raise ConfigError(key, f"unknown field of {section}")
        sections[section][name] = _coerce(key, value, hints[name])

    method = top.get("method", "baseline")
    if method not in METHODS:
        raise ConfigError("method", f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    top["method"] = method
    built = {}
    for section, cls in SECTIONS.items():
        try:
            built[section] = cls(**sections[section])
        except ConfigError as exc:
            raise ConfigError(f"{section}.{exc.key}", str(exc).split(": ", 1)[-1]) from None
        except (ValueError, TypeError) as exc:
            raise ConfigError(section, str(exc)) from None
    for name in ("train_speakers", "downstream_speakers"):
        if name in top and len(set(top[name])) != len(top[name]):
            raise ConfigError(f"data.{name}", "speaker ids repeat")
    if "train_speakers" in top and "downstream_speakers" in top:
        if set(top["train_speakers"]) & set(top["downstream_speakers"]):
            raise ConfigError("data.downstream_speakers", "overlaps data.train_speakers")
    return ExperimentConfig(**top, **built)


def load_experiment(config_path=None, overrides=(), seed=None, out=None):
    """Merge a config file, ``--set`` overrides, ``--seed`` and ``--out`` (later wins)."""
    entries = read_config(config_path) if config_path else {}
    for item in overrides:
        entries.update(parse_lines([item], source="--set"))
    if seed is not None:
        for section in ("synth", "train", "eval"):
            entries[f"{section}.seed"] = str(seed)
    if out is not None:
        entries["out"] = out
    return build_config(entries)
