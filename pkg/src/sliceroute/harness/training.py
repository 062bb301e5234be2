"""Deterministic training loops for the four model kinds.

P / P_UP train the backbone's scoring path alone (P_UP on tail-upsampled
data).  S / S_UP train the slice components on top of a loaded backbone
checkpoint (S_UP on upsampled data), with Gaussian tail augmentation of the
representations.  Batches group samples sharing one hypothesis count; batch
composition and order derive from the run seed.  With a frozen backbone the
per-sample representations are cached after the first pass, so later epochs
only run the slice layers.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..backbone import Backbone, BackboneConfig, SampleArrays
from ..checkpoint import load_model, save_backbone, save_slice_aware
from ..datagen import intent_name, split, upsample
from ..errors import ConfigError, StartupError, TrainingDiverged
from ..numerics import tensor as T
from ..numerics.optim import Adam
from ..numerics.tensor import Tensor
from ..samples import Sample, dataset_hash, read_dataset
from ..slice_aware import (
    AttentionConfig,
    AttentionMethod,
    LossWeights,
    SliceAwareModel,
    batched_slice_forward,
)
from ..slicing import SliceConfig, assign_slices, slice_stats
from .config import ExperimentConfig, SLICE_KINDS, UPSAMPLED_KINDS

TRAIN_REPORT_VERSION = 1


def run_identifier(config: ExperimentConfig, seed: int, train_hash: str) -> str:
    payload = json.dumps({"config": config.to_dict(), "seed": seed, "train": train_hash}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def backbone_config_from_manifest(manifest_path, exp: ExperimentConfig) -> BackboneConfig:
    manifest = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    gen = manifest["config"]
    return BackboneConfig(
        vocab_size=gen["vocab_size"],
        num_devices=gen["num_devices"],
        context_vocab=gen["context_vocab"],
        feature_vocab=gen["feature_vocab"],
        num_skills=gen["num_skills"],
        intents=tuple(intent_name(i) for i in range(gen["num_intents"])),
        token_dim=exp.token_dim,
        lstm_hidden=exp.lstm_hidden,
        device_dim=exp.device_dim,
        context_dim=exp.context_dim,
        intent_dim=exp.intent_dim,
        skill_dim=exp.skill_dim,
        feature_dim=exp.feature_dim,
        hyp_dim=exp.hyp_dim,
        d=exp.d,
    )


def backbone_config_from_samples(samples: list[Sample], exp: ExperimentConfig) -> BackboneConfig:
    """Fallback sizing when no generator manifest is available: vocabulary
    sizes are taken from the observed id ranges."""
    max_token = 0
    max_device = 0
    max_context = 0
    max_feature = 0
    max_skill = 0
    intents: set[str] = set()
    for s in samples:
        max_token = max(max_token, max(s.signals.utterance_tokens))
        max_device = max(max_device, s.signals.device_type)
        if s.signals.shared_context:
            max_context = max(max_context, max(s.signals.shared_context))
        for h in s.hypotheses:
            intents.add(h.intent)
            max_skill = max(max_skill, h.skill)
            if h.interpretation_features:
                max_feature = max(max_feature, max(h.interpretation_features))
    return BackboneConfig(
        vocab_size=max_token + 1,
        num_devices=max_device + 1,
        context_vocab=max_context + 1,
        feature_vocab=max_feature + 1,
        num_skills=max_skill + 1,
        intents=tuple(sorted(intents)),
        token_dim=exp.token_dim,
        lstm_hidden=exp.lstm_hidden,
        device_dim=exp.device_dim,
        context_dim=exp.context_dim,
        intent_dim=exp.intent_dim,
        skill_dim=exp.skill_dim,
        feature_dim=exp.feature_dim,
        hyp_dim=exp.hyp_dim,
        d=exp.d,
    )


@dataclass
class _Corpus:
    """Pre-indexed dataset: id arrays, slice labels, and n-grouped indices."""

    samples: list[Sample]
    arrays: list[SampleArrays]
    gammas: np.ndarray  # (N, k)
    groups: dict[int, np.ndarray]

    @classmethod
    def build(cls, samples: list[Sample], backbone: Backbone, slice_cfg: SliceConfig) -> "_Corpus":
        arrays = [backbone.index_sample(s) for s in samples]
        gammas = np.stack([assign_slices(s, slice_cfg) for s in samples]) if samples else np.zeros((0, slice_cfg.k))
        by_n: dict[int, list[int]] = {}
        for i, a in enumerate(arrays):
            by_n.setdefault(a.n, []).append(i)
        groups = {n: np.asarray(idx, dtype=np.intp) for n, idx in sorted(by_n.items())}
        return cls(samples=samples, arrays=arrays, gammas=gammas, groups=groups)

    def one_hot_targets(self, idx: np.ndarray, n: int) -> np.ndarray:
        targets = np.zeros((idx.size, n))
        targets[np.arange(idx.size), [self.arrays[i].g for i in idx]] = 1.0
        return targets


def grouped_expert_loss(
    model: SliceAwareModel,
    x: Tensor,
    gammas: np.ndarray,
    targets: np.ndarray,
    batch: int,
    n: int,
) -> Tensor | None:
    """Mean over samples of the slice-masked expert loss.

    Each slice present in the batch gets its own forward through its
    expert on just its members' rows; absent slices stay outside the
    graph entirely, so their experts' gradients remain bitwise zero.
    """
    total: Tensor | None = None
    offsets = np.arange(n)
    for i in range(model.k):
        members = np.nonzero(gammas[:, i] != 0)[0]
        if members.size == 0:
            continue
        rows = (members[:, None] * n + offsets).reshape(-1)
        r = T.linear(T.gather_rows(x, rows), model.experts.weights[i], model.experts.biases[i])
        scores = T.reshape(T.sigmoid(T.linear(r, model.shared_head.w, model.shared_head.b)), (members.size, n))
        term = T.bce_loss(scores, Tensor(targets[members]))
        term = T.scale(term, members.size / batch)
        total = term if total is None else T.add(total, term)
    return total


def _batch_plan(corpus: _Corpus, batch_size: int, rng: np.random.Generator | None) -> list[np.ndarray]:
    """Chunk each n-group into batches; seeded shuffle within and across
    groups when rng is given, deterministic order otherwise."""
    chunks: list[np.ndarray] = []
    for n in sorted(corpus.groups):
        idx = corpus.groups[n]
        if rng is not None:
            idx = idx[rng.permutation(idx.size)]
        chunks.extend(idx[start : start + batch_size] for start in range(0, idx.size, batch_size))
    if rng is not None and len(chunks) > 1:
        chunks = [chunks[j] for j in rng.permutation(len(chunks))]
    return chunks


class Trainer:
    """One training run: model, corpora, optimizer, and loss plumbing."""

    def __init__(
        self,
        exp: ExperimentConfig,
        model,
        slice_cfg: SliceConfig,
        train_samples: list[Sample],
        val_samples: list[Sample],
        seed: int,
    ):
        self.exp = exp
        self.model = model
        self.slice_cfg = slice_cfg
        self.is_slice_model = isinstance(model, SliceAwareModel)
        self.backbone = model.backbone if self.is_slice_model else model
        self.train_corpus = _Corpus.build(train_samples, self.backbone, slice_cfg)
        self.val_corpus = _Corpus.build(val_samples, self.backbone, slice_cfg)
        self.frozen = self.is_slice_model and model.freeze_backbone
        self._encode_cache: dict[int, np.ndarray] = {}
        root = np.random.SeedSequence(seed)
        batch_ss, augment_ss = root.spawn(2)
        self.batch_rng = np.random.Generator(np.random.PCG64(batch_ss))
        self.augment_rng = np.random.Generator(np.random.PCG64(augment_ss))
        params = list(model.trainable_parameters().values()) if self.is_slice_model else model.parameters()
        self.optimizer = Adam(params, lr=exp.lr)
        self.loss_weights = (
            model.loss_weights
            if self.is_slice_model
            else LossWeights(base=1.0, indicator=0.0, expert=0.0, final=0.0)
        )

    # -------------------------------------------------------------- encoding

    def _encode(self, corpus: _Corpus, idx: np.ndarray) -> Tensor:
        arrays = [corpus.arrays[i] for i in idx]
        if not self.frozen:
            return self.backbone.encode_arrays(arrays)
        missing = [i for i in idx if id(corpus.samples[i].signals) not in self._encode_cache]
        if missing:
            with T.no_grad():
                encoded = self.backbone.encode_arrays([corpus.arrays[i] for i in missing])
            n = corpus.arrays[missing[0]].n
            rows = encoded.values.astype(np.float32).reshape(len(missing), n, -1)
            for j, i in enumerate(missing):
                self._encode_cache[id(corpus.samples[i].signals)] = rows[j]
        stacked = np.concatenate(
            [self._encode_cache[id(corpus.samples[i].signals)] for i in idx], axis=0
        )
        return Tensor(stacked.astype(np.float64))

    # ---------------------------------------------------------------- losses

    def _batch_loss(self, corpus: _Corpus, idx: np.ndarray, training: bool) -> Tensor:
        n = corpus.arrays[idx[0]].n
        batch = idx.size
        targets = corpus.one_hot_targets(idx, n)
        if not self.is_slice_model:
            x = self._encode(corpus, idx)
            scores = T.reshape(self.backbone.predict_base(x), (batch, n))
            return T.bce_loss(scores, Tensor(targets))
        return self._slice_batch_loss(corpus, idx, batch, n, targets, training)

    def _slice_batch_loss(
        self,
        corpus: _Corpus,
        idx: np.ndarray,
        batch: int,
        n: int,
        targets: np.ndarray,
        training: bool,
    ) -> Tensor:
        model: SliceAwareModel = self.model
        lw = self.loss_weights
        gammas = corpus.gammas[idx]
        x = self._encode(corpus, idx)
        sigma = model.effective_augment_sigma
        if training and sigma > 0:
            tail = np.nonzero(gammas[:, 0] == 0)[0]
            if tail.size:
                noise = np.zeros((batch * n, model.d))
                rows = (tail[:, None] * n + np.arange(n)).reshape(-1)
                noise[rows] = self.augment_rng.normal(0.0, sigma, (rows.size, model.d))
                x = T.add(x, Tensor(noise))

        def weighted(term: Tensor, weight: float) -> Tensor:
            return term if weight == 1 else T.scale(term, weight)

        parts: list[Tensor] = []
        if lw.base != 0:
            if self.frozen:
                with T.no_grad():
                    zeta_base = T.bce_loss(T.reshape(self.backbone.predict_base(x), (batch, n)), Tensor(targets))
            else:
                zeta_base = T.bce_loss(T.reshape(self.backbone.predict_base(x), (batch, n)), Tensor(targets))
            parts.append(weighted(zeta_base, lw.base))
        forward = None
        if lw.final != 0:
            forward = batched_slice_forward(model, x, batch, n)
            membership = forward.membership
        elif lw.indicator != 0:
            pooled = T.mean_axis(T.reshape(x, (batch, n, model.d)), axis=1)
            membership = T.sigmoid(T.add(T.matmul(pooled, model.indicators.w), model.indicators.b))
        if lw.indicator != 0:
            zeta_ind = T.scale(T.bce_loss(membership, Tensor(gammas)), float(model.k))
            parts.append(weighted(zeta_ind, lw.indicator))
        if lw.expert != 0:
            zeta_exp = self._grouped_expert_loss(model, x, gammas, targets, batch, n)
            if zeta_exp is not None:
                parts.append(weighted(zeta_exp, lw.expert))
        if lw.final != 0:
            zeta_final = T.bce_loss(forward.final_scores, Tensor(targets))
            parts.append(weighted(zeta_final, lw.final))
        if not parts:
            return Tensor(0.0)
        total = parts[0]
        for p in parts[1:]:
            total = T.add(total, p)
        return total

    def _grouped_expert_loss(
        self,
        model: SliceAwareModel,
        x: Tensor,
        gammas: np.ndarray,
        targets: np.ndarray,
        batch: int,
        n: int,
    ) -> Tensor | None:
        return grouped_expert_loss(model, x, gammas, targets, batch, n)

    # ---------------------------------------------------------------- loops

    def run_epoch(self, epoch: int) -> float:
        total = 0.0
        count = 0
        for chunk in _batch_plan(self.train_corpus, self.exp.batch_size, self.batch_rng):
            self.optimizer.zero_grad()
            loss = self._batch_loss(self.train_corpus, chunk, training=True)
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingDiverged(f"non-finite training loss {value} at epoch {epoch}, batch {count}")
            T.backward(loss)
            self.optimizer.step()
            total += value * chunk.size
            count += 1
        return total / len(self.train_corpus.samples)

    def validation_loss(self) -> float:
        total = 0.0
        with T.no_grad():
            for chunk in _batch_plan(self.val_corpus, self.exp.batch_size, rng=None):
                loss = self._batch_loss(self.val_corpus, chunk, training=False)
                total += loss.item() * chunk.size
        return total / len(self.val_corpus.samples)


def _snapshot(model) -> dict[str, np.ndarray]:
    return {name: t.values.copy() for name, t in model.named_parameters().items()}


def _restore(model, snapshot: dict[str, np.ndarray]) -> None:
    for name, t in model.named_parameters().items():
        t.values[...] = snapshot[name]


def _require_file(path: str, what: str) -> Path:
    if not path:
        raise StartupError(f"no {what} configured")
    p = Path(path)
    if not p.exists():
        raise StartupError(f"{what} not found: {p}")
    return p


def build_model(exp: ExperimentConfig, slice_cfg: SliceConfig, train_samples: list[Sample], seed: int):
    """Construct the model named by exp.model_kind (loading the backbone
    checkpoint for slice kinds)."""
    init_seed = int(np.random.SeedSequence((seed, 0xA11CE)).generate_state(1)[0])
    if exp.model_kind in SLICE_KINDS:
        ckpt = _require_file(exp.backbone_checkpoint, "backbone checkpoint")
        backbone, meta = load_model(ckpt)
        if not isinstance(backbone, Backbone):
            raise ConfigError(f"{ckpt} is a {meta.get('kind')} checkpoint; slice training needs a backbone")
        return SliceAwareModel.create(
            backbone,
            k=slice_cfg.k,
            seed=init_seed,
            attention=AttentionConfig(AttentionMethod(exp.attention_method), exp.tau),
            max_hypotheses=exp.max_hypotheses,
            loss_weights=LossWeights(
                base=exp.loss_weight_base,
                indicator=exp.loss_weight_indicator,
                expert=exp.loss_weight_expert,
                final=exp.loss_weight_final,
            ),
            augment_sigma=exp.augment_sigma,
            sigma_is_variance=exp.sigma_is_variance,
            freeze_backbone=exp.freeze_backbone,
            reuse_shared_head=exp.reuse_shared_head,
        )
    if exp.manifest:
        config = backbone_config_from_manifest(_require_file(exp.manifest, "dataset manifest"), exp)
    else:
        config = backbone_config_from_samples(train_samples, exp)
    return Backbone.create(config, seed=init_seed)


def train(exp: ExperimentConfig, out_dir, seed: int | None = None) -> dict:
    """Run one training job; writes checkpoint.npz and train_report.json
    under out_dir and returns the report dict."""
    exp.validate()
    seed = exp.seed if seed is None else seed
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    train_path = _require_file(exp.train_data, "training dataset")
    slice_cfg = SliceConfig.read(_require_file(exp.slices, "slice list"))
    all_samples = read_dataset(train_path)
    train_hash = dataset_hash(train_path)
    train_samples, val_samples = split(all_samples, exp.val_ratio, seed)
    raw_counts = slice_stats(train_samples, slice_cfg).counts
    warnings: list[str] = []
    if exp.model_kind in UPSAMPLED_KINDS:
        train_samples, warnings = upsample(train_samples, slice_cfg, exp.upsample_multiplier, seed)
    effective_counts = slice_stats(train_samples, slice_cfg).counts

    model = build_model(exp, slice_cfg, train_samples, seed)
    trainer = Trainer(exp, model, slice_cfg, train_samples, val_samples, seed)

    epochs: list[dict] = []
    best: tuple[float, int, dict[str, np.ndarray]] | None = None
    for epoch in range(exp.epochs):
        train_loss = trainer.run_epoch(epoch)
        val_loss = trainer.validation_loss()
        epochs.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        if best is None or val_loss < best[0]:
            best = (val_loss, epoch, _snapshot(model))
    selected_epoch = None
    if best is not None:
        if exp.checkpoint_selection == "best":
            selected_epoch = best[1]
            _restore(model, best[2])
        else:
            selected_epoch = exp.epochs - 1

    run_id = run_identifier(exp, seed, train_hash)
    ckpt_path = out_dir / "checkpoint.npz"
    meta = {
        "run_id": run_id,
        "model_kind": exp.model_kind,
        "seed": seed,
        "selected_epoch": selected_epoch,
        "train_data_sha256": train_hash,
        "train_slice_counts_raw": raw_counts,
        "train_slice_counts_effective": effective_counts,
        "slice_names": slice_cfg.slice_names(),
        "experiment_config": exp.to_dict(),
    }
    if exp.model_kind in SLICE_KINDS:
        param_hash = save_slice_aware(model, ckpt_path, meta)
    else:
        param_hash = save_backbone(model, ckpt_path, meta)

    report = {
        "format_version": TRAIN_REPORT_VERSION,
        "kind": "train_report",
        "run_id": run_id,
        "model_kind": exp.model_kind,
        "seed": seed,
        "train_data": train_path.name,
        "train_data_sha256": train_hash,
        "val_ratio": exp.val_ratio,
        "train_size_raw": sum(raw_counts),
        "train_size_effective": sum(effective_counts),
        "val_size": len(val_samples),
        "train_slice_counts_raw": raw_counts,
        "train_slice_counts_effective": effective_counts,
        "slice_names": slice_cfg.slice_names(),
        "epochs_requested": exp.epochs,
        "epochs": epochs,
        "selected_epoch": selected_epoch,
        "checkpoint": ckpt_path.name,
        "parameter_hash": param_hash,
        "upsample_warnings": warnings,
        "config": exp.to_dict(),
    }
    (out_dir / "train_report.json").write_text(
        json.dumps(report, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    return report
