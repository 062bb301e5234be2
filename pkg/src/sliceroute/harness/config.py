"""Experiment and generator configuration with a flat key=value file format.

Lines look like `train.batch_size=256`; the prefix groups related keys.
Blank lines and `#` comments are ignored.  Unknown keys and unparseable
values are errors, missing keys fall back to defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from ..datagen import TrafficConfig
from ..errors import ConfigError

MODEL_KINDS = ("P", "P_UP", "S", "S_UP")
SLICE_KINDS = ("S", "S_UP")
UPSAMPLED_KINDS = ("P_UP", "S_UP")


@dataclass
class ExperimentConfig:
    model_kind: str = "P"
    seed: int = 0
    train_data: str = ""
    test_data: str = ""
    slices: str = ""
    manifest: str = ""
    val_ratio: float = 0.9
    backbone_checkpoint: str = ""
    epochs: int = 10
    batch_size: int = 256
    lr: float = 0.001
    d: int = 128
    token_dim: int = 24
    lstm_hidden: int = 32
    device_dim: int = 8
    context_dim: int = 8
    intent_dim: int = 24
    skill_dim: int = 12
    feature_dim: int = 8
    hyp_dim: int = 32
    attention_method: str = "indicator_only"
    tau: float = 1.0
    max_hypotheses: int = 16
    loss_weight_base: float = 1.0
    loss_weight_indicator: float = 1.0
    loss_weight_expert: float = 1.0
    loss_weight_final: float = 1.0
    augment_sigma: float = 0.005
    sigma_is_variance: bool = False
    upsample_multiplier: float = 2.0
    freeze_backbone: bool = True
    reuse_shared_head: bool = False
    checkpoint_selection: str = "best"

    def validate(self) -> None:
        if self.model_kind not in MODEL_KINDS:
            raise ConfigError(f"model_kind must be one of {MODEL_KINDS}, got {self.model_kind!r}")
        if self.model_kind in SLICE_KINDS and not self.backbone_checkpoint:
            raise ConfigError(f"model_kind {self.model_kind} requires train.backbone_checkpoint")
        if self.epochs < 0:
            raise ConfigError("epochs must be nonnegative")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be positive")
        if not self.lr > 0:
            raise ConfigError("lr must be positive")
        if not 0.0 < self.val_ratio < 1.0:
            raise ConfigError("val_ratio must lie strictly between 0 and 1")
        if self.attention_method not in ("indicator_only", "indicator_plus_expert"):
            raise ConfigError(f"unknown attention_method {self.attention_method!r}")
        if not self.tau > 0:
            raise ConfigError("tau must be positive")
        if self.checkpoint_selection not in ("best", "final"):
            raise ConfigError(f"checkpoint_selection must be 'best' or 'final', got {self.checkpoint_selection!r}")
        if self.augment_sigma < 0:
            raise ConfigError("augment_sigma must be nonnegative")
        if self.upsample_multiplier < 1.0:
            raise ConfigError("upsample_multiplier must be >= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# key -> (attribute, kind); kind drives parsing and formatting
_EXPERIMENT_KEYS: dict[str, tuple[str, str]] = {
    "run.model_kind": ("model_kind", "str"),
    "run.seed": ("seed", "int"),
    "data.train": ("train_data", "str"),
    "data.test": ("test_data", "str"),
    "data.slices": ("slices", "str"),
    "data.manifest": ("manifest", "str"),
    "data.val_ratio": ("val_ratio", "float"),
    "model.d": ("d", "int"),
    "model.token_dim": ("token_dim", "int"),
    "model.lstm_hidden": ("lstm_hidden", "int"),
    "model.device_dim": ("device_dim", "int"),
    "model.context_dim": ("context_dim", "int"),
    "model.intent_dim": ("intent_dim", "int"),
    "model.skill_dim": ("skill_dim", "int"),
    "model.feature_dim": ("feature_dim", "int"),
    "model.hyp_dim": ("hyp_dim", "int"),
    "model.attention_method": ("attention_method", "str"),
    "model.tau": ("tau", "float"),
    "model.max_hypotheses": ("max_hypotheses", "int"),
    "model.reuse_shared_head": ("reuse_shared_head", "bool"),
    "train.epochs": ("epochs", "int"),
    "train.batch_size": ("batch_size", "int"),
    "train.lr": ("lr", "float"),
    "train.loss_weight_base": ("loss_weight_base", "float"),
    "train.loss_weight_indicator": ("loss_weight_indicator", "float"),
    "train.loss_weight_expert": ("loss_weight_expert", "float"),
    "train.loss_weight_final": ("loss_weight_final", "float"),
    "train.augment_sigma": ("augment_sigma", "float"),
    "train.sigma_is_variance": ("sigma_is_variance", "bool"),
    "train.upsample_multiplier": ("upsample_multiplier", "float"),
    "train.freeze_backbone": ("freeze_backbone", "bool"),
    "train.checkpoint_selection": ("checkpoint_selection", "str"),
    "train.backbone_checkpoint": ("backbone_checkpoint", "str"),
}

_TRAFFIC_KEYS: dict[str, tuple[str, str]] = {
    "gen.num_samples": ("num_samples", "int"),
    "gen.num_intents": ("num_intents", "int"),
    "gen.zipf_exponent": ("zipf_exponent", "float"),
    "gen.tail_intents": ("tail_intents", "str_tuple"),
    "gen.vocab_size": ("vocab_size", "int"),
    "gen.utterance_length_range": ("utterance_length_range", "range"),
    "gen.hypotheses_range": ("hypotheses_range", "range"),
    "gen.num_skills": ("num_skills", "int"),
    "gen.label_noise_rate": ("label_noise_rate", "float"),
    "gen.seed": ("seed", "int"),
    "gen.signature_size": ("signature_size", "int"),
    "gen.signature_strength": ("signature_strength", "float"),
    "gen.confusable_overlap": ("confusable_overlap", "float"),
    "gen.confusable_distractor_prob": ("confusable_distractor_prob", "float"),
    "gen.distractor_true_skill_prob": ("distractor_true_skill_prob", "float"),
    "gen.num_devices": ("num_devices", "int"),
    "gen.context_vocab": ("context_vocab", "int"),
    "gen.context_range": ("context_range", "range"),
    "gen.feature_vocab": ("feature_vocab", "int"),
    "gen.feature_range": ("feature_range", "range"),
    "gen.name": ("name", "str"),
}


def _parse_value(key: str, raw: str, kind: str):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind == "range":
            lo, hi = raw.split(":")
            return (int(lo), int(hi))
        if kind == "str_tuple":
            return tuple(part.strip() for part in raw.split(",") if part.strip())
        return raw
    except ValueError as exc:
        raise ConfigError(f"cannot parse {key}={raw!r} as {kind}") from exc


def _format_value(value, kind: str) -> str:
    if kind == "bool":
        return "true" if value else "false"
    if kind == "range":
        return f"{value[0]}:{value[1]}"
    if kind == "str_tuple":
        return ",".join(value)
    if kind == "float":
        return repr(float(value))
    return str(value)


def parse_kv_file(path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    entries: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key in entries:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key}")
        entries[key] = value
    return entries


def _config_from_entries(entries: dict[str, str], keys: dict[str, tuple[str, str]], cls, source):
    values = {}
    for key, raw in entries.items():
        if key not in keys:
            raise ConfigError(f"{source}: unknown config key {key!r}")
        attr, kind = keys[key]
        values[attr] = _parse_value(key, raw, kind)
    return cls(**values)


def _config_to_text(config, keys: dict[str, tuple[str, str]]) -> str:
    lines = []
    last_section = None
    for key, (attr, kind) in keys.items():
        section = key.split(".", 1)[0]
        if section != last_section:
            if last_section is not None:
                lines.append("")
            last_section = section
        lines.append(f"{key}={_format_value(getattr(config, attr), kind)}")
    return "\n".join(lines) + "\n"


def read_experiment_config(path) -> ExperimentConfig:
    return _config_from_entries(parse_kv_file(path), _EXPERIMENT_KEYS, ExperimentConfig, path)


def write_experiment_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(_config_to_text(config, _EXPERIMENT_KEYS), encoding="utf-8")


def read_traffic_config(path) -> TrafficConfig:
    return _config_from_entries(parse_kv_file(path), _TRAFFIC_KEYS, TrafficConfig, path)


def write_traffic_config(config: TrafficConfig, path) -> None:
    Path(path).write_text(_config_to_text(config, _TRAFFIC_KEYS), encoding="utf-8")
