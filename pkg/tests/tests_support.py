"""Model factories shared across test modules."""

from __future__ import annotations

from conftest import make_sample, tiny_backbone_config

from sliceroute.backbone import Backbone
from sliceroute.slice_aware import AttentionConfig, AttentionMethod, SliceAwareModel
from sliceroute.slicing import SliceConfig


def tiny_slice_model(
    k: int = 3,
    d: int = 8,
    n: int = 4,
    seed: int = 0,
    attention: AttentionConfig | None = None,
    **model_kwargs,
):
    """A SliceAwareModel over a tiny backbone plus one n-hypothesis sample
    whose ground truth lands in slice 1."""
    config = tiny_backbone_config(d=d)
    backbone = Backbone.create(config, seed=seed)
    monitored = tuple(f"intent_{i:02d}" for i in range(1, k))
    slice_cfg = SliceConfig(monitored_intents=monitored)
    if attention is None:
        attention = AttentionConfig(AttentionMethod.INDICATOR_PLUS_EXPERT, tau=1.0)
    model = SliceAwareModel.create(backbone, k=k, seed=seed + 1, attention=attention, **model_kwargs)
    intents = [f"intent_{i % 6:02d}" for i in range(1, n + 1)]
    intents[0] = "intent_01" if k > 1 else "intent_00"
    sample = make_sample(
        intents=tuple(intents),
        g=0,
        tokens=(3, 9, 14, 2),
        skills=[i % 5 for i in range(n)],
        features=[(i % 12,) for i in range(n)],
    )
    return model, sample, slice_cfg
