"""Canonical experiment presets shared by scripts and the acceptance suite.

The long-tail corpus pins 40 intents under a Zipf(1.2) frequency curve with
the 20 intents at ranks 2..21 monitored, which spans all three training
volume bands (over 10k, 1k to 10k, below 1k samples) at 100k train queries.
Model hyperparameters are the library defaults; four-model comparisons use
indicator-only attention at temperature 1.0.
"""

from __future__ import annotations

import dataclasses

from ..datagen import TrafficConfig, intent_name
from .config import ExperimentConfig

MONITORED_TAIL_RANKS = range(1, 21)


def flagship_traffic(seed: int = 0, **overrides) -> TrafficConfig:
    """Long-tail corpus preset: 110k queries, 100k train / 10k test."""
    cfg = TrafficConfig(
        name="longtail",
        num_samples=110_000,
        num_intents=40,
        zipf_exponent=1.2,
        tail_intents=tuple(intent_name(i) for i in MONITORED_TAIL_RANKS),
        seed=seed,
    )
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def flagship_experiment(**overrides) -> ExperimentConfig:
    """Training recipe preset: Adam lr 0.001, 10 epochs, batch 256, d=128."""
    cfg = ExperimentConfig(attention_method="indicator_only", tau=1.0)
    return dataclasses.replace(cfg, **overrides) if overrides else cfg
