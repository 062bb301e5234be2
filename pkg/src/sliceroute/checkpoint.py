"""Model checkpointing: named parameter arrays in an npz plus a JSON meta
record carrying the model configuration and a content hash.

The npz container itself embeds zip timestamps, so reproducibility is
checked through `parameter_hash` (exact bytes of every parameter) and the
meta record, not through the container bytes.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .backbone import Backbone, BackboneConfig
from .errors import ConfigError, StartupError
from .numerics.tensor import Tensor
from .slice_aware import AttentionConfig, AttentionMethod, LossWeights, SliceAwareModel

CHECKPOINT_VERSION = 1
_META_KEY = "__meta__"


def parameter_hash(arrays: dict[str, np.ndarray]) -> str:
    """Order-independent content hash over named parameter arrays."""
    digest = hashlib.sha256()
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype=np.float64)
        digest.update(name.encode())
        digest.update(repr(arr.shape).encode())
        digest.update(arr.tobytes())
    return digest.hexdigest()


def save_checkpoint(path, named_params: dict[str, Tensor], meta: dict) -> str:
    """Write parameters + meta to `path`; returns the parameter hash."""
    arrays = {name: np.asarray(t.values, dtype=np.float64) for name, t in named_params.items()}
    meta = dict(meta)
    meta["format_version"] = CHECKPOINT_VERSION
    meta["parameter_hash"] = parameter_hash(arrays)
    payload = {_META_KEY: np.array(json.dumps(meta, sort_keys=True))}
    payload.update(arrays)
    np.savez(path, **payload)
    return meta["parameter_hash"]


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    if not path.exists():
        raise StartupError(f"checkpoint not found: {path}")
    with np.load(path, allow_pickle=False) as data:
        if _META_KEY not in data:
            raise ConfigError(f"{path} is not a toolkit checkpoint (missing meta record)")
        meta = json.loads(str(data[_META_KEY][()]))
        arrays = {name: data[name] for name in data.files if name != _META_KEY}
    if meta.get("format_version") != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {meta.get('format_version')!r}")
    return arrays, meta


def _fill_parameters(named: dict[str, Tensor], arrays: dict[str, np.ndarray], path) -> None:
    missing = sorted(set(named) - set(arrays))
    extra = sorted(set(arrays) - set(named))
    if missing or extra:
        raise ConfigError(f"{path}: parameter names do not match model (missing {missing}, extra {extra})")
    for name, tensor in named.items():
        if tensor.values.shape != arrays[name].shape:
            raise ConfigError(
                f"{path}: parameter {name} has shape {arrays[name].shape}, expected {tensor.values.shape}"
            )
        tensor.values[...] = arrays[name]


def save_backbone(model: Backbone, path, extra_meta: dict | None = None) -> str:
    meta = {"kind": "backbone", "backbone_config": model.config.to_dict()}
    meta.update(extra_meta or {})
    return save_checkpoint(path, model.named_parameters(), meta)


def save_slice_aware(model: SliceAwareModel, path, extra_meta: dict | None = None) -> str:
    meta = {
        "kind": "slice_aware",
        "backbone_config": model.backbone.config.to_dict(),
        "k": model.k,
        "max_hypotheses": model.max_hypotheses,
        "attention_method": model.attention.method.value,
        "tau": model.attention.tau,
        "loss_weights": list(model.loss_weights.to_tuple()),
        "augment_sigma": model.augment_sigma,
        "sigma_is_variance": model.sigma_is_variance,
        "freeze_backbone": model.freeze_backbone,
        "reuse_shared_head": model.reuse_shared_head,
    }
    meta.update(extra_meta or {})
    return save_checkpoint(path, model.named_parameters(), meta)


def load_model(path):
    """Rebuild a Backbone or SliceAwareModel from a checkpoint file."""
    arrays, meta = load_checkpoint(path)
    config = BackboneConfig.from_dict(meta["backbone_config"])
    backbone = Backbone.create(config, seed=0)
    if meta["kind"] == "backbone":
        model = backbone
    elif meta["kind"] == "slice_aware":
        weights = meta["loss_weights"]
        model = SliceAwareModel.create(
            backbone,
            k=meta["k"],
            seed=0,
            attention=AttentionConfig(AttentionMethod(meta["attention_method"]), meta["tau"]),
            max_hypotheses=meta["max_hypotheses"],
            loss_weights=LossWeights(*weights),
            augment_sigma=meta["augment_sigma"],
            sigma_is_variance=meta["sigma_is_variance"],
            freeze_backbone=meta["freeze_backbone"],
            reuse_shared_head=meta["reuse_shared_head"],
        )
    else:
        raise ConfigError(f"{path}: unknown checkpoint kind {meta['kind']!r}")
    _fill_parameters(model.named_parameters(), arrays, path)
    return model, meta
