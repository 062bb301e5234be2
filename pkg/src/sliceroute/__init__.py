"""Slice-aware hypothesis routing at desk scale.

A hypothesis scorer for skill routing plus a slice-aware extension that
attaches per-slice indicators and expert representations on top of a frozen
backbone, a synthetic long-tail traffic generator to exercise it, and an
experiment harness for training, evaluation, and model comparison.
"""

from .backbone import Backbone, BackboneConfig, base_loss, predict_base, select_hypothesis
from .checkpoint import load_checkpoint, load_model, parameter_hash, save_checkpoint
from .datagen import TrafficConfig, generate, split, upsample
from .errors import (
    ConfigError,
    DimensionError,
    DomainError,
    GraphError,
    InputError,
    ParameterError,
    SliceRouteError,
    SplitError,
    StartupError,
    StateError,
    TrainingDiverged,
)
from .samples import Hypothesis, QuerySignals, Sample, read_dataset, write_dataset
from .slice_aware import (
    AttentionConfig,
    AttentionMethod,
    LossWeights,
    SliceAwareModel,
    attention_weights,
    augment_tail,
    expert_forward,
    expert_loss,
    expert_scores,
    indicator_forward,
    indicator_loss,
    predict_final,
    slice_representation,
    total_loss,
)
from .slicing import BASE_SLICE, SliceConfig, assign_slices, slice_stats

__version__ = "0.1.0"

__all__ = [
    "AttentionConfig",
    "AttentionMethod",
    "BASE_SLICE",
    "Backbone",
    "BackboneConfig",
    "ConfigError",
    "DimensionError",
    "DomainError",
    "GraphError",
    "Hypothesis",
    "InputError",
    "LossWeights",
    "ParameterError",
    "QuerySignals",
    "Sample",
    "SliceAwareModel",
    "SliceConfig",
    "SliceRouteError",
    "SplitError",
    "StartupError",
    "StateError",
    "TrafficConfig",
    "TrainingDiverged",
    "assign_slices",
    "attention_weights",
    "augment_tail",
    "base_loss",
    "expert_forward",
    "expert_loss",
    "expert_scores",
    "generate",
    "indicator_forward",
    "indicator_loss",
    "load_checkpoint",
    "load_model",
    "parameter_hash",
    "predict_base",
    "predict_final",
    "read_dataset",
    "save_checkpoint",
    "select_hypothesis",
    "slice_representation",
    "slice_stats",
    "split",
    "total_loss",
    "upsample",
    "write_dataset",
]
