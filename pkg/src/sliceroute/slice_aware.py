"""Slice-aware extension of the hypothesis router.

Adds, on top of a (usually frozen) backbone: per-slice membership indicators,
per-slice expert transforms of the representation, a shared scoring head used
to train the experts, an attention mechanism that blends expert outputs into
one slice-aware representation, and a dedicated final routing head.  Four
loss terms (backbone, indicator, expert, final) combine with configurable
weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .backbone import Backbone, base_loss, one_hot
from .errors import DimensionError, ParameterError
from .numerics import tensor as T
from .numerics.tensor import Tensor
from .samples import Sample


class AttentionMethod(Enum):
    """How expert attention logits are formed before the temperature softmax."""

    INDICATOR_ONLY = "indicator_only"
    INDICATOR_PLUS_EXPERT = "indicator_plus_expert"


@dataclass
class IndicatorParams:
    """k slice-membership heads, stored column-stacked: w is (d, k), b is (1, k)."""

    w: Tensor
    b: Tensor

    @property
    def k(self) -> int:
        return self.w.shape[1]

    @property
    def d(self) -> int:
        return self.w.shape[0]


@dataclass
class ExpertParams:
    """k per-slice square maps of the representation; weights[i] is (d, d)."""

    weights: list[Tensor]
    biases: list[Tensor]

    @property
    def k(self) -> int:
        return len(self.weights)

    @property
    def d(self) -> int:
        return self.weights[0].shape[0]


@dataclass
class SharedHeadParams:
    """Single d -> 1 scoring head shared by every expert."""

    w: Tensor
    b: Tensor


@dataclass
class QTransformParams:
    """Linear map from a length-n expert score row to one scalar.

    Sized for max_hypotheses rows; shorter score rows use the leading n
    weights, so one parameter set serves all hypothesis counts in a corpus.
    """

    w: Tensor
    b: Tensor

    def row_weights(self, n: int) -> Tensor:
        if n > self.w.shape[0]:
            raise DimensionError(
                f"q_transform sized for {self.w.shape[0]} hypotheses, got {n}"
            )
        return T.gather_rows(self.w, np.arange(n, dtype=np.intp))


@dataclass
class AttentionConfig:
    method: AttentionMethod = AttentionMethod.INDICATOR_ONLY
    tau: float = 1.0
    q_transform: QTransformParams | None = None

    def __post_init__(self):
        if not self.tau > 0:
            raise ParameterError(f"attention temperature must be positive, got {self.tau}")


@dataclass(frozen=True)
class LossWeights:
    base: float = 1.0
    indicator: float = 1.0
    expert: float = 1.0
    final: float = 1.0

    def to_tuple(self) -> tuple[float, float, float, float]:
        return (self.base, self.indicator, self.expert, self.final)


def _as_label_array(gamma) -> np.ndarray:
    arr = gamma.values if isinstance(gamma, Tensor) else np.asarray(gamma, dtype=np.float64)
    return arr.reshape(-1)


# ---------------------------------------------------------------------------
# forward pieces
# ---------------------------------------------------------------------------


def indicator_forward(x: Tensor, ind: IndicatorParams) -> Tensor:
    """Membership likelihood per slice from the mean-pooled representation."""
    if x.shape[1] != ind.d:
        raise DimensionError(f"indicator width {ind.d} does not match representation width {x.shape[1]}")
    pooled = T.reshape(T.mean_axis(x, 0), (1, ind.d))
    return T.reshape(T.sigmoid(T.add(T.matmul(pooled, ind.w), ind.b)), (ind.k,))


def indicator_loss(P: Tensor, gamma) -> Tensor:
    """Sum over slices of BCE(P_i, gamma_i)."""
    labels = _as_label_array(gamma)
    if P.shape != labels.shape:
        raise DimensionError(f"indicator_loss: {P.shape} predictions vs {labels.shape} labels")
    k = labels.shape[0]
    mean = T.bce_loss(P, Tensor(labels))
    return mean if k == 1 else T.scale(mean, float(k))


def expert_forward(x: Tensor, experts: ExpertParams) -> list[Tensor]:
    """Per-slice representation r_i, one row-wise linear map per expert."""
    if x.shape[1] != experts.d:
        raise DimensionError(f"expert width {experts.d} does not match representation width {x.shape[1]}")
    return [T.linear(x, w, b) for w, b in zip(experts.weights, experts.biases)]


def expert_scores(R: list[Tensor], shared: SharedHeadParams) -> Tensor:
    """Stack the shared head's row-wise sigmoid scores: row i scores r_i."""
    rows = [T.reshape(T.sigmoid(T.linear(r, shared.w, shared.b)), (1, r.shape[0])) for r in R]
    return T.concat(rows, axis=0)


def expert_loss(Q: Tensor, gamma, g: int) -> Tensor:
    """Slice-masked expert training loss.

    Only slices with gamma_i != 0 contribute; absent slices are skipped
    outright, so their experts receive no gradient at all.
    """
    labels = _as_label_array(gamma)
    if labels.shape[0] != Q.shape[0]:
        raise DimensionError(f"expert_loss: {Q.shape[0]} score rows vs {labels.shape[0]} labels")
    n = Q.shape[1]
    target = Tensor(one_hot(n, g).reshape(1, n))
    total: Tensor | None = None
    for i, weight in enumerate(labels):
        if weight == 0:
            continue
        term = T.bce_loss(T.gather_rows(Q, np.array([i], dtype=np.intp)), target)
        if weight != 1:
            term = T.scale(term, float(weight))
        total = term if total is None else T.add(total, term)
    return total if total is not None else Tensor(0.0)


def attention_weights(P: Tensor, Q: Tensor, cfg: AttentionConfig) -> Tensor:
    """Expert blending weights from membership likelihoods (and optionally
    a transform of the expert scores)."""
    if cfg.method is AttentionMethod.INDICATOR_ONLY:
        logits = P
    else:
        if cfg.q_transform is None:
            raise ParameterError("INDICATOR_PLUS_EXPERT attention requires q_transform parameters")
        phi = T.abs_(T.add(T.matmul(Q, cfg.q_transform.row_weights(Q.shape[1])), cfg.q_transform.b))
        logits = T.add(P, T.reshape(phi, (P.shape[0],)))
    return T.softmax_temp(logits, cfg.tau)


def slice_representation(R: list[Tensor], a: Tensor) -> Tensor:
    """Convex combination of expert representations, per hypothesis row."""
    k = len(R)
    if a.shape != (k,):
        raise DimensionError(f"slice_representation: {k} experts vs weights of shape {a.shape}")
    n, d = R[0].shape
    stacked = T.reshape(T.concat(R, axis=0), (k, n, d))
    return T.sum_axis(T.mul(stacked, T.reshape(a, (k, 1, 1))), axis=0)


def augment_tail(x: Tensor, gamma, sigma: float, rng: np.random.Generator) -> Tensor:
    """Gaussian training-time jitter of tail-slice representations.

    Samples on the base slice (gamma_0 = 1) pass through untouched.
    """
    if sigma < 0:
        raise ParameterError(f"augmentation sigma must be nonnegative, got {sigma}")
    labels = _as_label_array(gamma)
    if labels[0] == 1 or sigma == 0:
        return x
    return T.add(x, Tensor(rng.normal(0.0, sigma, x.shape)))


# ---------------------------------------------------------------------------
# the assembled model
# ---------------------------------------------------------------------------


class SliceAwareModel:
    """Backbone plus slice components, with the combined training loss."""

    def __init__(
        self,
        backbone: Backbone,
        k: int,
        rng: np.random.Generator,
        attention: AttentionConfig | None = None,
        max_hypotheses: int = 16,
        loss_weights: LossWeights = LossWeights(),
        augment_sigma: float = 0.005,
        sigma_is_variance: bool = False,
        freeze_backbone: bool = True,
        reuse_shared_head: bool = False,
    ):
        if k < 1:
            raise ParameterError(f"need at least one slice, got k={k}")
        d = backbone.config.d
        self.backbone = backbone
        self.k = k
        self.d = d
        self.max_hypotheses = max_hypotheses
        self.loss_weights = loss_weights
        self.augment_sigma = augment_sigma
        self.sigma_is_variance = sigma_is_variance
        self.freeze_backbone = freeze_backbone
        self.reuse_shared_head = reuse_shared_head

        bound = 1.0 / math.sqrt(d)
        self.indicators = IndicatorParams(
            w=Tensor(rng.uniform(-bound, bound, (d, k)), requires_grad=True),
            b=Tensor(np.zeros((1, k)), requires_grad=True),
        )
        # experts start near the identity so the blended representation
        # initially resembles the backbone's own
        self.experts = ExpertParams(
            weights=[
                Tensor(np.eye(d) + rng.normal(0.0, 0.01, (d, d)), requires_grad=True)
                for _ in range(k)
            ],
            biases=[Tensor(np.zeros((1, d)), requires_grad=True) for _ in range(k)],
        )
        self.shared_head = SharedHeadParams(
            w=Tensor(rng.uniform(-bound, bound, (d, 1)), requires_grad=True),
            b=Tensor(np.zeros((1, 1)), requires_grad=True),
        )
        self.final_head = SharedHeadParams(
            w=Tensor(rng.uniform(-bound, bound, (d, 1)), requires_grad=True),
            b=Tensor(np.zeros((1, 1)), requires_grad=True),
        )
        q_transform = QTransformParams(
            w=Tensor(rng.uniform(-1.0 / math.sqrt(max_hypotheses), 1.0 / math.sqrt(max_hypotheses), (max_hypotheses, 1)), requires_grad=True),
            b=Tensor(np.zeros((1, 1)), requires_grad=True),
        )
        self.attention = attention or AttentionConfig()
        if self.attention.q_transform is None:
            self.attention.q_transform = q_transform

    @classmethod
    def create(cls, backbone: Backbone, k: int, seed: int, **kwargs) -> "SliceAwareModel":
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
        return cls(backbone, k, rng, **kwargs)

    @property
    def effective_augment_sigma(self) -> float:
        if self.sigma_is_variance:
            return math.sqrt(self.augment_sigma)
        return self.augment_sigma

    def slice_parameters(self) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {
            "indicator.w": self.indicators.w,
            "indicator.b": self.indicators.b,
        }
        for i in range(self.k):
            params[f"expert.{i}.w"] = self.experts.weights[i]
            params[f"expert.{i}.b"] = self.experts.biases[i]
        params["shared_head.w"] = self.shared_head.w
        params["shared_head.b"] = self.shared_head.b
        params["final_head.w"] = self.final_head.w
        params["final_head.b"] = self.final_head.b
        params["q_transform.w"] = self.attention.q_transform.w
        params["q_transform.b"] = self.attention.q_transform.b
        return params

    def named_parameters(self) -> dict[str, Tensor]:
        params = self.slice_parameters()
        params.update({f"backbone.{name}": t for name, t in self.backbone.named_parameters().items()})
        return params

    def trainable_parameters(self) -> dict[str, Tensor]:
        params = dict(self.slice_parameters())
        if not self.freeze_backbone:
            params.update({f"backbone.{name}": t for name, t in self.backbone.named_parameters().items()})
        return params

    # ----------------------------------------------------------------- paths

    def encode(self, sample: Sample) -> Tensor:
        if self.freeze_backbone:
            with T.no_grad():
                return self.backbone.encode(sample)
        return self.backbone.encode(sample)

    def predict_final_from_x(self, x: Tensor) -> Tensor:
        P = indicator_forward(x, self.indicators)
        R = expert_forward(x, self.experts)
        if self.attention.method is AttentionMethod.INDICATOR_PLUS_EXPERT:
            Q = expert_scores(R, self.shared_head)
        else:
            Q = Tensor(np.zeros((self.k, x.shape[0])))
        a = attention_weights(P, Q, self.attention)
        return predict_final(slice_representation(R, a), self)

    def routing_scores(self, sample: Sample) -> Tensor:
        """Scores used for routing decisions and replication accuracy."""
        with T.no_grad():
            return self.predict_final_from_x(self.backbone.encode(sample))


def predict_final(s: Tensor, model: SliceAwareModel) -> Tensor:
    """Routing score per hypothesis row from the slice-aware representation."""
    head = model.shared_head if model.reuse_shared_head else model.final_head
    return T.reshape(T.sigmoid(T.linear(s, head.w, head.b)), (s.shape[0],))


@dataclass
class SliceForward:
    """Intermediate tensors of the batched slice-layer forward pass."""

    membership: Tensor  # (batch, k)
    experts_stacked: Tensor  # (batch*n, k*d), expert i in columns [i*d, (i+1)*d)
    attention: Tensor  # (batch, k)
    final_scores: Tensor  # (batch, n)


def batched_slice_forward(model: SliceAwareModel, x: Tensor, batch: int, n: int) -> SliceForward:
    """Slice-layer forward for `batch` samples sharing hypothesis count n.

    x holds batch*n representation rows, sample-major.  Expert maps run as
    one stacked matmul; per-sample results equal the per-sample operations
    on each sample's n rows.
    """
    k, d = model.k, model.d
    pooled = T.mean_axis(T.reshape(x, (batch, n, d)), axis=1)
    P = T.sigmoid(T.add(T.matmul(pooled, model.indicators.w), model.indicators.b))
    w_stack = T.concat(model.experts.weights, axis=1)
    b_stack = T.concat(model.experts.biases, axis=1)
    R = T.linear(x, w_stack, b_stack)
    if model.attention.method is AttentionMethod.INDICATOR_PLUS_EXPERT:
        qt = model.attention.q_transform
        if qt is None:
            raise ParameterError("INDICATOR_PLUS_EXPERT attention requires q_transform parameters")
        scores = T.sigmoid(T.linear(T.reshape(R, (batch * n * k, d)), model.shared_head.w, model.shared_head.b))
        q_bnk = T.reshape(scores, (batch, n, k))
        phi = T.abs_(T.add(T.sum_axis(T.mul(q_bnk, T.reshape(qt.row_weights(n), (1, n, 1))), axis=1), qt.b))
        logits = T.add(P, phi)
    else:
        logits = P
    a = T.softmax_temp(logits, model.attention.tau)
    a_rows = T.reshape(T.gather_rows(a, np.repeat(np.arange(batch), n)), (batch * n, k, 1))
    s = T.sum_axis(T.mul(T.reshape(R, (batch * n, k, d)), a_rows), axis=1)
    head = model.shared_head if model.reuse_shared_head else model.final_head
    final = T.reshape(T.sigmoid(T.linear(s, head.w, head.b)), (batch, n))
    return SliceForward(membership=P, experts_stacked=R, attention=a, final_scores=final)


def total_loss(
    sample: Sample,
    model: SliceAwareModel,
    gamma,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Weighted sum of backbone, indicator, expert, and final losses.

    Terms with zero weight are skipped entirely (not just multiplied by
    zero), so isolating one term with the weights gives that term exactly.
    rng enables tail augmentation and should only be passed during training.
    """
    labels = _as_label_array(gamma)
    lw = model.loss_weights
    x = model.encode(sample)
    if rng is not None and model.effective_augment_sigma > 0:
        x = augment_tail(x, labels, model.effective_augment_sigma, rng)
    g = sample.ground_truth_index

    def weighted(term: Tensor, weight: float) -> Tensor:
        return term if weight == 1 else T.scale(term, weight)

    parts: list[Tensor] = []
    if lw.base != 0:
        if model.freeze_backbone:
            with T.no_grad():
                zeta_base = base_loss(model.backbone.predict_base(x), g)
        else:
            zeta_base = base_loss(model.backbone.predict_base(x), g)
        parts.append(weighted(zeta_base, lw.base))
    need_R = lw.expert != 0 or lw.final != 0
    P = indicator_forward(x, model.indicators) if (lw.indicator != 0 or lw.final != 0) else None
    if lw.indicator != 0:
        parts.append(weighted(indicator_loss(P, labels), lw.indicator))
    if need_R:
        R = expert_forward(x, model.experts)
    if lw.expert != 0:
        Q_for_loss = expert_scores(R, model.shared_head)
        parts.append(weighted(expert_loss(Q_for_loss, labels, g), lw.expert))
    if lw.final != 0:
        if model.attention.method is AttentionMethod.INDICATOR_PLUS_EXPERT:
            Q_att = Q_for_loss if lw.expert != 0 else expert_scores(R, model.shared_head)
        else:
            Q_att = Tensor(np.zeros((model.k, x.shape[0])))
        a = attention_weights(P, Q_att, model.attention)
        scores = predict_final(slice_representation(R, a), model)
        parts.append(weighted(base_loss(scores, g), lw.final))
    if not parts:
        return Tensor(0.0)
    total = parts[0]
    for p in parts[1:]:
        total = T.add(total, p)
    return total
