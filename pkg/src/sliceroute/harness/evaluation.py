"""Replication-accuracy evaluation: overall, per slice, and per sample.

Replication accuracy is the fraction of queries where the model's selected
hypothesis equals the labeled one.  Slices with no test samples report an
undefined accuracy (JSON null), never zero, so macro averages stay honest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from ..backbone import Backbone
from ..checkpoint import load_model
from ..errors import ConfigError, StartupError
from ..numerics import tensor as T
from ..samples import Sample, dataset_hash, read_dataset
from ..slice_aware import SliceAwareModel, batched_slice_forward
from ..slicing import SliceConfig
from .training import _batch_plan, _Corpus

EVAL_REPORT_VERSION = 1


@dataclass
class SliceResult:
    slice_id: int
    name: str
    support: int
    correct: int

    @property
    def ra(self) -> float | None:
        return None if self.support == 0 else self.correct / self.support

    def to_dict(self) -> dict:
        return {
            "slice_id": self.slice_id,
            "name": self.name,
            "support": self.support,
            "correct": self.correct,
            "ra": self.ra,
        }


@dataclass
class EvalReport:
    run_id: str
    model_kind: str
    parameter_hash: str
    dataset_name: str
    dataset_sha256: str
    slice_names: list[str]
    total: int
    correct: int
    per_slice: list[SliceResult]
    per_sample: list[dict]
    indicator_auc: dict[str, float | None] | None = None
    train_slice_counts: list[int] | None = None
    deltas: dict | None = None

    @property
    def overall_ra(self) -> float:
        return self.correct / self.total

    def macro_tail_ra(self) -> float | None:
        values = [r.ra for r in self.per_slice[1:] if r.support > 0]
        if not values:
            return None
        return float(np.mean(values))

    def slice_by_name(self, name: str) -> SliceResult:
        for r in self.per_slice:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "format_version": EVAL_REPORT_VERSION,
            "kind": "eval_report",
            "run_id": self.run_id,
            "model_kind": self.model_kind,
            "parameter_hash": self.parameter_hash,
            "dataset": self.dataset_name,
            "dataset_sha256": self.dataset_sha256,
            "slice_names": self.slice_names,
            "overall": {"total": self.total, "correct": self.correct, "ra": self.overall_ra},
            "macro_tail_ra": self.macro_tail_ra(),
            "per_slice": [r.to_dict() for r in self.per_slice],
            "indicator_auc": self.indicator_auc,
            "train_slice_counts": self.train_slice_counts,
            "deltas": self.deltas,
            "per_sample": self.per_sample,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        if data.get("kind") != "eval_report" or data.get("format_version") != EVAL_REPORT_VERSION:
            raise ConfigError("not an evaluation report (wrong kind or format version)")
        per_slice = [
            SliceResult(slice_id=r["slice_id"], name=r["name"], support=r["support"], correct=r["correct"])
            for r in data["per_slice"]
        ]
        return cls(
            run_id=data["run_id"],
            model_kind=data["model_kind"],
            parameter_hash=data["parameter_hash"],
            dataset_name=data["dataset"],
            dataset_sha256=data["dataset_sha256"],
            slice_names=list(data["slice_names"]),
            total=data["overall"]["total"],
            correct=data["overall"]["correct"],
            per_slice=per_slice,
            per_sample=list(data["per_sample"]),
            indicator_auc=data.get("indicator_auc"),
            train_slice_counts=data.get("train_slice_counts"),
            deltas=data.get("deltas"),
        )

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n", encoding="utf-8")
        return path

    @classmethod
    def read(cls, path) -> "EvalReport":
        path = Path(path)
        if not path.exists():
            raise StartupError(f"evaluation report not found: {path}")
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")))


def ranking_auc(scores: np.ndarray, positives: np.ndarray) -> float | None:
    """Area under the ROC curve via the rank-sum identity; undefined when a
    class is absent."""
    pos = positives.astype(bool)
    npos = int(pos.sum())
    nneg = pos.size - npos
    if npos == 0 or nneg == 0:
        return None
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - npos * (npos + 1) / 2.0) / (npos * nneg))


def evaluate_model(
    model,
    samples: list[Sample],
    slice_cfg: SliceConfig,
    *,
    run_id: str = "",
    model_kind: str | None = None,
    parameter_hash: str = "",
    dataset_name: str = "",
    dataset_sha256: str = "",
    train_slice_counts: list[int] | None = None,
    batch_size: int = 256,
) -> EvalReport:
    """Score every sample, pick argmax hypotheses, and tally per-slice RA."""
    if not samples:
        raise ConfigError("evaluation needs a non-empty dataset")
    is_slice_model = isinstance(model, SliceAwareModel)
    backbone = model.backbone if is_slice_model else model
    if model_kind is None:
        model_kind = "S" if is_slice_model else "P"
    corpus = _Corpus.build(samples, backbone, slice_cfg)
    k = slice_cfg.k
    predicted = np.zeros(len(samples), dtype=np.intp)
    membership = np.zeros((len(samples), k)) if is_slice_model else None
    with T.no_grad():
        for chunk in _batch_plan(corpus, batch_size, rng=None):
            n = corpus.arrays[chunk[0]].n
            x = backbone.encode_arrays([corpus.arrays[i] for i in chunk])
            if is_slice_model:
                fwd = batched_slice_forward(model, x, chunk.size, n)
                scores = fwd.final_scores.values
                membership[chunk] = fwd.membership.values
            else:
                scores = backbone.predict_base(x).values.reshape(chunk.size, n)
            predicted[chunk] = np.argmax(scores, axis=1)

    slice_names = slice_cfg.slice_names()
    support = np.zeros(k, dtype=np.intp)
    correct_by_slice = np.zeros(k, dtype=np.intp)
    per_sample: list[dict] = []
    total_correct = 0
    for i, sample in enumerate(samples):
        hit = int(predicted[i]) == sample.ground_truth_index
        total_correct += hit
        active = np.nonzero(corpus.gammas[i])[0]
        support[active] += 1
        if hit:
            correct_by_slice[active] += 1
        per_sample.append(
            {
                "id": sample.id,
                "predicted": int(predicted[i]),
                "ground_truth": sample.ground_truth_index,
                "correct": bool(hit),
                "slices": [int(a) for a in active],
            }
        )
    per_slice = [
        SliceResult(slice_id=i, name=slice_names[i], support=int(support[i]), correct=int(correct_by_slice[i]))
        for i in range(k)
    ]
    indicator_auc = None
    if is_slice_model:
        indicator_auc = {
            slice_names[i]: ranking_auc(membership[:, i], corpus.gammas[:, i]) for i in range(1, k)
        }
    return EvalReport(
        run_id=run_id,
        model_kind=model_kind,
        parameter_hash=parameter_hash,
        dataset_name=dataset_name,
        dataset_sha256=dataset_sha256,
        slice_names=slice_names,
        total=len(samples),
        correct=int(total_correct),
        per_slice=per_slice,
        per_sample=per_sample,
        indicator_auc=indicator_auc,
        train_slice_counts=train_slice_counts,
    )


def replication_accuracy(checkpoint_path, dataset_path, slice_cfg: SliceConfig | str | Path, batch_size: int = 256) -> EvalReport:
    """Evaluate a checkpoint against a dataset file."""
    model, meta = load_model(checkpoint_path)
    if not isinstance(slice_cfg, SliceConfig):
        slice_path = Path(slice_cfg)
        if not slice_path.exists():
            raise StartupError(f"slice list not found: {slice_path}")
        slice_cfg = SliceConfig.read(slice_path)
    dataset_path = Path(dataset_path)
    if not dataset_path.exists():
        raise StartupError(f"evaluation dataset not found: {dataset_path}")
    samples = read_dataset(dataset_path)
    return evaluate_model(
        model,
        samples,
        slice_cfg,
        run_id=meta.get("run_id", ""),
        model_kind=meta.get("model_kind"),
        parameter_hash=meta.get("parameter_hash", ""),
        dataset_name=dataset_path.name,
        dataset_sha256=dataset_hash(dataset_path),
        train_slice_counts=meta.get("train_slice_counts_raw"),
        batch_size=batch_size,
    )
