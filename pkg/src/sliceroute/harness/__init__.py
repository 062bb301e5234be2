"""Experiment harness: configs, training, evaluation, comparison, sweep, CLI."""

from .comparison import ComparisonTable, compare, run_four_model_comparison, write_comparison
from .config import (
    ExperimentConfig,
    read_experiment_config,
    read_traffic_config,
    write_experiment_config,
    write_traffic_config,
)
from .evaluation import EvalReport, evaluate_model, ranking_auc, replication_accuracy
from .presets import flagship_experiment, flagship_traffic
from .sweep import SweepResult, run_attention_sweep
from .training import Trainer, build_model, train

__all__ = [
    "ComparisonTable",
    "EvalReport",
    "ExperimentConfig",
    "SweepResult",
    "Trainer",
    "build_model",
    "compare",
    "evaluate_model",
    "flagship_experiment",
    "flagship_traffic",
    "ranking_auc",
    "read_experiment_config",
    "read_traffic_config",
    "replication_accuracy",
    "run_attention_sweep",
    "run_four_model_comparison",
    "train",
    "write_comparison",
    "write_experiment_config",
    "write_traffic_config",
]
