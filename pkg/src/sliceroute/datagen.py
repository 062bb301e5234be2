"""Synthetic long-tail routing traffic.

Intents follow a Zipf distribution; each intent owns a token signature so
queries are classifiable from tokens alone.  Monitored tail intents share
part of their signature with one high-traffic partner intent and frequently
receive that partner as a distractor hypothesis, which makes them the hard
cases a volume-driven model underserves while leaving enough token evidence
for specialized components to recover.

Also provides the seeded train/validation split and the duplication-based
tail upsampling baseline.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParameterError, SplitError
from .samples import Hypothesis, QuerySignals, Sample, dataset_hash, dumps_record, write_dataset
from .slicing import SliceConfig

MANIFEST_FORMAT_VERSION = 1


def intent_name(rank_index: int) -> str:
    """Inventory naming: intent_00 is the most frequent (Zipf rank 1)."""
    return f"intent_{rank_index:02d}"


@dataclass(frozen=True)
class TrafficConfig:
    num_samples: int = 1000
    num_intents: int = 40
    zipf_exponent: float = 1.2
    tail_intents: tuple[str, ...] = ()
    vocab_size: int = 600
    utterance_length_range: tuple[int, int] = (4, 9)
    hypotheses_range: tuple[int, int] = (2, 6)
    num_skills: int = 12
    label_noise_rate: float = 0.0
    seed: int = 0
    signature_size: int = 8
    signature_strength: float = 0.7
    confusable_overlap: float = 0.5
    confusable_distractor_prob: float = 0.9
    distractor_true_skill_prob: float = 0.8
    num_devices: int = 4
    context_vocab: int = 16
    context_range: tuple[int, int] = (1, 3)
    feature_vocab: int = 32
    feature_range: tuple[int, int] = (0, 3)
    name: str = "traffic"

    @property
    def intent_names(self) -> tuple[str, ...]:
        return tuple(intent_name(i) for i in range(self.num_intents))

    @property
    def common_pool_size(self) -> int:
        return self.vocab_size - self.num_intents * self.signature_size

    def validate(self) -> None:
        if self.num_samples < 1:
            raise ConfigError("num_samples must be positive")
        if self.num_intents < 2:
            raise ConfigError("need at least two intents")
        if self.zipf_exponent < 0 or not math.isfinite(self.zipf_exponent):
            raise ConfigError(f"zipf_exponent must be a finite nonnegative float, got {self.zipf_exponent}")
        if self.signature_size < 1 or self.common_pool_size < 1:
            raise ConfigError(
                f"vocab_size {self.vocab_size} cannot host {self.num_intents} signatures of {self.signature_size} tokens"
            )
        for label, rng_pair, low in (
            ("utterance_length_range", self.utterance_length_range, 1),
            ("hypotheses_range", self.hypotheses_range, 1),
            ("context_range", self.context_range, 0),
            ("feature_range", self.feature_range, 0),
        ):
            lo, hi = rng_pair
            if lo > hi or lo < low:
                raise ConfigError(f"{label} {rng_pair} is empty or below {low}")
        if self.hypotheses_range[1] > self.num_intents:
            raise ConfigError("hypotheses_range max exceeds the number of distinct intents")
        for label, value in (
            ("label_noise_rate", self.label_noise_rate),
            ("signature_strength", self.signature_strength),
            ("confusable_overlap", self.confusable_overlap),
            ("confusable_distractor_prob", self.confusable_distractor_prob),
            ("distractor_true_skill_prob", self.distractor_true_skill_prob),
        ):
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{label} must lie in [0, 1], got {value}")
        if self.num_skills < 1 or self.num_devices < 1 or self.context_vocab < 1 or self.feature_vocab < 1:
            raise ConfigError("vocabulary sizes must be positive")
        inventory = set(self.intent_names)
        unknown = [t for t in self.tail_intents if t not in inventory]
        if unknown:
            raise ConfigError(f"tail_intents not in the generated inventory: {unknown}")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["tail_intents"] = list(self.tail_intents)
        for key in ("utterance_length_range", "hypotheses_range", "context_range", "feature_range"):
            out[key] = list(out[key])
        return out


def zipf_probabilities(num_intents: int, exponent: float) -> np.ndarray:
    weights = np.arange(1, num_intents + 1, dtype=np.float64) ** (-exponent)
    return weights / weights.sum()


def skill_of(intent_idx: int, config: TrafficConfig) -> int:
    return intent_idx % config.num_skills


def partner_of(intent_idx: int, config: TrafficConfig) -> int | None:
    """High-traffic partner whose signature a monitored tail intent leans on."""
    if intent_idx < 3:
        return None
    if intent_name(intent_idx) not in config.tail_intents:
        return None
    return intent_idx % 3


def signature_tokens(intent_idx: int, config: TrafficConfig) -> np.ndarray:
    base = config.common_pool_size
    block = np.arange(base + intent_idx * config.signature_size, base + (intent_idx + 1) * config.signature_size)
    partner = partner_of(intent_idx, config)
    if partner is not None:
        overlap = int(round(config.signature_size * config.confusable_overlap))
        if overlap:
            partner_block = np.arange(
                base + partner * config.signature_size, base + (partner + 1) * config.signature_size
            )
            block = block.copy()
            block[:overlap] = partner_block[:overlap]
    return block


def _sample_rng(seed: int, index: int) -> np.random.Generator:
    # per-sample stream: output is independent of generation order or sharding
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, index))))


def _generate_sample(index: int, config: TrafficConfig, probs: np.ndarray, signatures: list[np.ndarray]) -> Sample:
    rng = _sample_rng(config.seed, index)
    intent_idx = int(rng.choice(config.num_intents, p=probs))
    length = int(rng.integers(config.utterance_length_range[0], config.utterance_length_range[1] + 1))
    sig = signatures[intent_idx]
    from_sig = rng.random(length) < config.signature_strength
    tokens = np.where(
        from_sig,
        rng.choice(sig, size=length),
        rng.integers(0, config.common_pool_size, size=length),
    )
    device = int(rng.integers(config.num_devices))
    ctx_count = int(rng.integers(config.context_range[0], config.context_range[1] + 1))
    context = rng.integers(0, config.context_vocab, size=ctx_count).tolist()

    n = int(rng.integers(config.hypotheses_range[0], config.hypotheses_range[1] + 1))
    distractor_intents: list[int] = []
    partner = partner_of(intent_idx, config)
    pool = [i for i in range(config.num_intents) if i != intent_idx]
    if n > 1:
        if partner is not None and rng.random() < config.confusable_distractor_prob:
            distractor_intents.append(partner)
            pool.remove(partner)
        remaining = n - 1 - len(distractor_intents)
        if remaining:
            distractor_intents.extend(
                int(i) for i in rng.choice(np.array(pool, dtype=np.intp), size=remaining, replace=False)
            )

    def features() -> list[int]:
        count = int(rng.integers(config.feature_range[0], config.feature_range[1] + 1))
        return rng.integers(0, config.feature_vocab, size=count).tolist()

    def distractor_skill(d_idx: int) -> int:
        if rng.random() < config.distractor_true_skill_prob:
            return skill_of(d_idx, config)
        return int(rng.integers(config.num_skills))

    hyps = [Hypothesis(intent_name(intent_idx), skill_of(intent_idx, config), features())]
    hyps.extend(Hypothesis(intent_name(d), distractor_skill(d), features()) for d in distractor_intents)
    order = rng.permutation(len(hyps))
    hyps = [hyps[j] for j in order]
    g = int(np.nonzero(order == 0)[0][0])

    if config.label_noise_rate > 0 and len(hyps) > 1 and rng.random() < config.label_noise_rate:
        others = [j for j in range(len(hyps)) if j != g]
        g = int(rng.choice(np.array(others, dtype=np.intp)))

    return Sample(
        id=f"q{index:07d}",
        signals=QuerySignals(utterance_tokens=[int(t) for t in tokens], device_type=device, shared_context=context),
        hypotheses=hyps,
        ground_truth_index=g,
        ground_truth_intent=hyps[g].intent,
    )


def generate(config: TrafficConfig, out_dir) -> tuple[Path, dict]:
    """Write `{name}.jsonl` and `{name}.manifest.json` under out_dir."""
    config.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    probs = zipf_probabilities(config.num_intents, config.zipf_exponent)
    signatures = [signature_tokens(i, config) for i in range(config.num_intents)]
    samples = [_generate_sample(i, config, probs, signatures) for i in range(config.num_samples)]
    dataset_path = out_dir / f"{config.name}.jsonl"
    write_dataset(dataset_path, samples)
    counts: dict[str, int] = {}
    for s in samples:
        counts[s.ground_truth_intent] = counts.get(s.ground_truth_intent, 0) + 1
    manifest = {
        "format_version": MANIFEST_FORMAT_VERSION,
        "kind": "traffic-manifest",
        "dataset": dataset_path.name,
        "sample_count": len(samples),
        "per_intent_counts": counts,
        "config": config.to_dict(),
        "seed": config.seed,
        "dataset_sha256": dataset_hash(dataset_path),
    }
    manifest_path = out_dir / f"{config.name}.manifest.json"
    manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return dataset_path, manifest


def split(samples: list[Sample], ratio: float, seed: int) -> tuple[list[Sample], list[Sample]]:
    """Seeded shuffle, then partition with `ratio` as the first part's share."""
    if not 0.0 < ratio < 1.0:
        raise SplitError(f"split ratio must lie strictly between 0 and 1, got {ratio}")
    count = len(samples)
    first = int(round(count * ratio))
    if first <= 0 or first >= count:
        raise SplitError(f"split of {count} samples at ratio {ratio} leaves an empty part")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, 0x5F11))))
    order = rng.permutation(count)
    return [samples[i] for i in order[:first]], [samples[i] for i in order[first:]]


def upsample(
    samples: list[Sample],
    slice_config: SliceConfig,
    target_multiplier: float,
    seed: int,
) -> tuple[list[Sample], list[str]]:
    """Duplicate monitored tail-slice samples until each monitored intent's
    count is multiplied by target_multiplier; base samples untouched.

    Duplicates share the source sample's signal/hypothesis objects and only
    get a fresh id.  Returns the reshuffled dataset plus warnings for any
    monitored intent absent from the input.
    """
    if not (math.isfinite(target_multiplier) and target_multiplier >= 1.0):
        raise ParameterError(f"upsample multiplier must be finite and >= 1, got {target_multiplier}")
    groups: dict[str, list[Sample]] = {intent: [] for intent in slice_config.monitored_intents}
    for s in samples:
        if s.ground_truth_intent in groups:
            groups[s.ground_truth_intent].append(s)
    warnings: list[str] = []
    duplicates: list[Sample] = []
    for intent in slice_config.monitored_intents:
        members = groups[intent]
        if not members:
            warnings.append(f"monitored intent {intent!r} has no samples; upsampling skipped")
            continue
        extra = int(round(len(members) * target_multiplier)) - len(members)
        for j in range(extra):
            src = members[j % len(members)]
            duplicates.append(dataclasses.replace(src, id=f"{src.id}~up{j}"))
    combined = list(samples) + duplicates
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, 0x0B5A))))
    order = rng.permutation(len(combined))
    return [combined[i] for i in order], warnings
