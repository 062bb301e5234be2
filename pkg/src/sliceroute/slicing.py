"""Intent-equality slice functions and per-slice dataset bookkeeping.

Each monitored intent defines one tail slice via exact, case-sensitive string
equality on the sample's labeled intent; everything else falls into the base
slice at index 0.  Membership labels are training/evaluation bookkeeping
only — they are never fed to a model as an input feature.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .samples import Sample

BASE_SLICE = 0


@dataclass(frozen=True)
class SliceConfig:
    """Ordered tail-intent list; slice i (i >= 1) matches monitored_intents[i-1].

    With `covering_base` the base slice marks every sample instead of only
    the unmatched ones, so labels are no longer one-hot.  The default keeps
    base membership as the complement of all tail slices.
    """

    monitored_intents: tuple[str, ...]
    covering_base: bool = False

    def __init__(self, monitored_intents, covering_base: bool = False):
        intents = tuple(monitored_intents)
        if len(set(intents)) != len(intents):
            raise ConfigError("monitored intents must be pairwise distinct")
        object.__setattr__(self, "monitored_intents", intents)
        object.__setattr__(self, "covering_base", covering_base)

    @property
    def k(self) -> int:
        return len(self.monitored_intents) + 1

    def slice_names(self) -> list[str]:
        return ["base"] + list(self.monitored_intents)

    def write(self, path: str | Path) -> None:
        Path(path).write_text("".join(f"{i}\n" for i in self.monitored_intents), encoding="utf-8")

    @classmethod
    def read(cls, path: str | Path, covering_base: bool = False) -> "SliceConfig":
        lines = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
        return cls([ln for ln in lines if ln], covering_base=covering_base)


def assign_slices(sample: Sample, config: SliceConfig) -> np.ndarray:
    """Weak-supervision membership vector for one sample.

    Entry i >= 1 is 1.0 iff the sample's labeled intent equals monitored
    intent i-1 (exact match); the base entry is the complement, so exactly
    one entry is set unless the covering-base variant is enabled.
    """
    labels = np.zeros(config.k)
    matched = False
    for i, intent in enumerate(config.monitored_intents, start=1):
        if sample.ground_truth_intent == intent:
            labels[i] = 1.0
            matched = True
    if config.covering_base or not matched:
        labels[BASE_SLICE] = 1.0
    return labels


def slice_index(sample: Sample, config: SliceConfig) -> int:
    """Index of the (single) tail slice the sample belongs to, or the base slice."""
    for i, intent in enumerate(config.monitored_intents, start=1):
        if sample.ground_truth_intent == intent:
            return i
    return BASE_SLICE


@dataclass
class SliceStats:
    counts: list[int]
    fractions: list[float]
    total: int
    empty_dataset: bool = field(default=False)


def slice_stats(dataset: list[Sample], config: SliceConfig) -> SliceStats:
    """Per-slice sample counts and traffic fractions over a dataset."""
    counts = [0] * config.k
    for sample in dataset:
        counts[slice_index(sample, config)] += 1
    total = len(dataset)
    if total == 0:
        return SliceStats(counts=counts, fractions=[0.0] * config.k, total=0, empty_dataset=True)
    return SliceStats(counts=counts, fractions=[c / total for c in counts], total=total)
