"""Baseline hypothesis-scoring router.

Encodes a query and its candidate hypotheses into one representation row per
hypothesis (token BiLSTM with attention pooling, fused with categorical
embeddings through a small FC stack), scores rows independently with a
linear predictive head, and trains against the one-hot ground-truth
hypothesis with binary cross entropy.  Scoring is strictly row-wise, so
permuting the hypothesis list permutes scores identically.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import InputError
from .numerics import tensor as T
from .numerics.recurrent import BiLstmParams, encode_sequence_batch
from .numerics.tensor import Tensor
from .samples import Sample

MASK_NEG = -1e9


@dataclass(frozen=True)
class BackboneConfig:
    vocab_size: int
    num_devices: int
    context_vocab: int
    feature_vocab: int
    num_skills: int
    intents: tuple[str, ...]
    token_dim: int = 24
    lstm_hidden: int = 32
    device_dim: int = 8
    context_dim: int = 8
    intent_dim: int = 24
    skill_dim: int = 12
    feature_dim: int = 8
    hyp_dim: int = 32
    d: int = 128

    @property
    def query_dim(self) -> int:
        return 2 * self.lstm_hidden + self.device_dim + self.context_dim

    def to_dict(self) -> dict:
        out = asdict(self)
        out["intents"] = list(self.intents)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "BackboneConfig":
        data = dict(data)
        data["intents"] = tuple(data["intents"])
        return cls(**data)


@dataclass
class SampleArrays:
    """Integer id views of one sample, validated against the vocabularies."""

    tokens: np.ndarray
    device: int
    context: np.ndarray
    hyp_intents: np.ndarray
    hyp_skills: np.ndarray
    hyp_features: list[np.ndarray]
    g: int
    n: int


def _embedding(rng: np.random.Generator, rows: int, dim: int) -> Tensor:
    return Tensor(rng.normal(0.0, 0.1, (rows, dim)), requires_grad=True)


def _linear_params(rng: np.random.Generator, fan_in: int, fan_out: int) -> tuple[Tensor, Tensor]:
    bound = 1.0 / np.sqrt(fan_in)
    w = Tensor(rng.uniform(-bound, bound, (fan_in, fan_out)), requires_grad=True)
    b = Tensor(np.zeros((1, fan_out)), requires_grad=True)
    return w, b


class Backbone:
    """Parameters plus forward passes of the baseline router."""

    def __init__(self, config: BackboneConfig, rng: np.random.Generator):
        self.config = config
        c = config
        self.intent_to_id = {name: i for i, name in enumerate(c.intents)}
        self.token_table = _embedding(rng, c.vocab_size, c.token_dim)
        self.device_table = _embedding(rng, c.num_devices, c.device_dim)
        self.context_table = _embedding(rng, c.context_vocab, c.context_dim)
        self.intent_table = _embedding(rng, len(c.intents), c.intent_dim)
        self.skill_table = _embedding(rng, c.num_skills, c.skill_dim)
        self.feature_table = _embedding(rng, c.feature_vocab, c.feature_dim)
        self.lstm = BiLstmParams.init(c.token_dim, c.lstm_hidden, rng)
        self.pool_vector = Tensor(rng.normal(0.0, 0.1, (2 * c.lstm_hidden, 1)), requires_grad=True)
        hyp_in = c.intent_dim + c.skill_dim + c.feature_dim
        self.hyp_proj_w, self.hyp_proj_b = _linear_params(rng, hyp_in, c.hyp_dim)
        self.fc1_w, self.fc1_b = _linear_params(rng, c.query_dim + c.hyp_dim, c.d)
        self.fc2_w, self.fc2_b = _linear_params(rng, c.d, c.d)
        self.head_w, self.head_b = _linear_params(rng, c.d, 1)

    @classmethod
    def create(cls, config: BackboneConfig, seed: int) -> "Backbone":
        return cls(config, np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed))))

    def named_parameters(self) -> dict[str, Tensor]:
        params = {
            "token_table": self.token_table,
            "device_table": self.device_table,
            "context_table": self.context_table,
            "intent_table": self.intent_table,
            "skill_table": self.skill_table,
            "feature_table": self.feature_table,
            "pool_vector": self.pool_vector,
            "hyp_proj.w": self.hyp_proj_w,
            "hyp_proj.b": self.hyp_proj_b,
            "fc1.w": self.fc1_w,
            "fc1.b": self.fc1_b,
            "fc2.w": self.fc2_w,
            "fc2.b": self.fc2_b,
            "head.w": self.head_w,
            "head.b": self.head_b,
        }
        params.update(self.lstm.tensors("lstm"))
        return params

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    # ----------------------------------------------------------------- input

    def index_sample(self, sample: Sample) -> SampleArrays:
        c = self.config
        tokens = np.asarray(sample.signals.utterance_tokens, dtype=np.intp)
        if tokens.size == 0:
            raise InputError(f"sample {sample.id}: empty utterance")
        if tokens.min() < 0 or tokens.max() >= c.vocab_size:
            raise InputError(f"sample {sample.id}: token id outside vocabulary of size {c.vocab_size}")
        if not (0 <= sample.signals.device_type < c.num_devices):
            raise InputError(f"sample {sample.id}: unknown device type {sample.signals.device_type}")
        context = np.asarray(sample.signals.shared_context, dtype=np.intp)
        if context.size and (context.min() < 0 or context.max() >= c.context_vocab):
            raise InputError(f"sample {sample.id}: context id outside vocabulary")
        intents = np.empty(len(sample.hypotheses), dtype=np.intp)
        skills = np.empty(len(sample.hypotheses), dtype=np.intp)
        features: list[np.ndarray] = []
        for j, hyp in enumerate(sample.hypotheses):
            hyp_intent = self.intent_to_id.get(hyp.intent)
            if hyp_intent is None:
                raise InputError(f"sample {sample.id}: unknown intent {hyp.intent!r}")
            if not (0 <= hyp.skill < c.num_skills):
                raise InputError(f"sample {sample.id}: unknown skill id {hyp.skill}")
            feats = np.asarray(hyp.interpretation_features, dtype=np.intp)
            if feats.size and (feats.min() < 0 or feats.max() >= c.feature_vocab):
                raise InputError(f"sample {sample.id}: interpretation feature id outside vocabulary")
            intents[j] = hyp_intent
            skills[j] = hyp.skill
            features.append(feats)
        return SampleArrays(
            tokens=tokens,
            device=sample.signals.device_type,
            context=context,
            hyp_intents=intents,
            hyp_skills=skills,
            hyp_features=features,
            g=sample.ground_truth_index,
            n=len(sample.hypotheses),
        )

    # --------------------------------------------------------------- forward

    def _masked_mean_embedding(self, table: Tensor, id_lists: Sequence[np.ndarray], dim: int) -> Tensor:
        """Mean embedding of variable-length id lists (empty lists give zeros)."""
        batch = len(id_lists)
        width = max((len(ids) for ids in id_lists), default=0)
        if width == 0:
            return Tensor(np.zeros((batch, dim)))
        ids = np.zeros((batch, width), dtype=np.intp)
        mask = np.zeros((batch, width))
        for i, row in enumerate(id_lists):
            ids[i, : len(row)] = row
            mask[i, : len(row)] = 1.0
        emb = T.reshape(T.gather_rows(table, ids.reshape(-1)), (batch, width, dim))
        summed = T.sum_axis(T.mul(emb, Tensor(mask[:, :, None])), axis=1)
        inv_count = 1.0 / np.maximum(mask.sum(axis=1, keepdims=True), 1.0)
        return T.mul(summed, Tensor(inv_count))

    def encode_query_batch(self, arrays: Sequence[SampleArrays]) -> Tensor:
        """Shared per-query encoding, one row per sample."""
        c = self.config
        batch = len(arrays)
        steps = max(a.tokens.size for a in arrays)
        ids = np.zeros((batch, steps), dtype=np.intp)
        mask = np.zeros((batch, steps))
        for i, a in enumerate(arrays):
            ids[i, : a.tokens.size] = a.tokens
            mask[i, : a.tokens.size] = 1.0
        token_emb = T.gather_rows(self.token_table, ids.reshape(-1))
        seq = encode_sequence_batch(token_emb, self.lstm, batch, steps, mask if not mask.all() else None)
        scores = T.reshape(T.matmul(seq, self.pool_vector), (batch, steps))
        if not mask.all():
            scores = T.add(scores, Tensor((1.0 - mask) * MASK_NEG))
        alpha = T.softmax_temp(scores, 1.0)
        pooled = T.sum_axis(
            T.mul(T.reshape(seq, (batch, steps, 2 * c.lstm_hidden)), T.reshape(alpha, (batch, steps, 1))),
            axis=1,
        )
        device_emb = T.gather_rows(self.device_table, np.array([a.device for a in arrays], dtype=np.intp))
        context_emb = self._masked_mean_embedding(self.context_table, [a.context for a in arrays], c.context_dim)
        return T.concat([pooled, device_emb, context_emb], axis=1)

    def encode_arrays(self, arrays: Sequence[SampleArrays]) -> Tensor:
        """Representation rows for a batch of samples sharing one hypothesis count."""
        counts = {a.n for a in arrays}
        if len(counts) != 1:
            raise InputError(f"encode batch must share one hypothesis count, got {sorted(counts)}")
        n = counts.pop()
        c = self.config
        batch = len(arrays)
        query = self.encode_query_batch(arrays)
        intent_ids = np.concatenate([a.hyp_intents for a in arrays])
        skill_ids = np.concatenate([a.hyp_skills for a in arrays])
        feature_lists = [feats for a in arrays for feats in a.hyp_features]
        hyp_raw = T.concat(
            [
                T.gather_rows(self.intent_table, intent_ids),
                T.gather_rows(self.skill_table, skill_ids),
                self._masked_mean_embedding(self.feature_table, feature_lists, c.feature_dim),
            ],
            axis=1,
        )
        hyp = T.tanh(T.linear(hyp_raw, self.hyp_proj_w, self.hyp_proj_b))
        query_rows = T.gather_rows(query, np.repeat(np.arange(batch), n))
        fused = T.concat([query_rows, hyp], axis=1)
        h1 = T.tanh(T.linear(fused, self.fc1_w, self.fc1_b))
        return T.tanh(T.linear(h1, self.fc2_w, self.fc2_b))

    def encode_batch(self, samples: Sequence[Sample]) -> Tensor:
        return self.encode_arrays([self.index_sample(s) for s in samples])

    def encode(self, sample: Sample) -> Tensor:
        """Representation rows (one per hypothesis) for a single sample."""
        return self.encode_batch([sample])

    def predict_base(self, x: Tensor) -> Tensor:
        """Row-wise sigmoid score for each representation row."""
        return T.reshape(T.sigmoid(T.linear(x, self.head_w, self.head_b)), (x.shape[0],))


def predict_base(x: Tensor, model: Backbone) -> Tensor:
    """Per-hypothesis routing scores from representation rows."""
    return model.predict_base(x)


def one_hot(n: int, g: int) -> np.ndarray:
    if not (0 <= g < n):
        raise IndexError(f"ground-truth index {g} out of range for {n} hypotheses")
    target = np.zeros(n)
    target[g] = 1.0
    return target


def base_loss(scores: Tensor, g: int) -> Tensor:
    """Binary cross entropy between the score vector and the one-hot target."""
    return T.bce_loss(scores, Tensor(one_hot(scores.shape[0], g)))


def select_hypothesis(scores) -> int:
    """Routing decision: argmax score, ties broken by lowest index."""
    values = scores.values if isinstance(scores, Tensor) else np.asarray(scores)
    return int(np.argmax(values))
