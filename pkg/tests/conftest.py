"""Shared fixtures: tiny model configurations and sample factories."""

from __future__ import annotations

import numpy as np
import pytest

from sliceroute.backbone import Backbone, BackboneConfig
from sliceroute.samples import Hypothesis, QuerySignals, Sample

TINY_INTENTS = tuple(f"intent_{i:02d}" for i in range(6))


def tiny_backbone_config(**overrides) -> BackboneConfig:
    base = dict(
        vocab_size=60,
        num_devices=3,
        context_vocab=8,
        feature_vocab=12,
        num_skills=5,
        intents=TINY_INTENTS,
        token_dim=6,
        lstm_hidden=5,
        device_dim=3,
        context_dim=3,
        intent_dim=6,
        skill_dim=4,
        feature_dim=3,
        hyp_dim=8,
        d=16,
    )
    base.update(overrides)
    return BackboneConfig(**base)


def make_sample(
    sample_id: str = "q0",
    tokens=(3, 9, 14),
    device: int = 1,
    context=(2, 5),
    intents=("intent_00", "intent_03", "intent_01"),
    g: int = 1,
    skills=None,
    features=None,
) -> Sample:
    skills = skills if skills is not None else [i % 5 for i in range(len(intents))]
    features = features if features is not None else [(i, i + 1) for i in range(len(intents))]
    hyps = [
        Hypothesis(intent=intents[i], skill=skills[i], interpretation_features=list(features[i]))
        for i in range(len(intents))
    ]
    return Sample(
        id=sample_id,
        signals=QuerySignals(utterance_tokens=list(tokens), device_type=device, shared_context=list(context)),
        hypotheses=hyps,
        ground_truth_index=g,
        ground_truth_intent=intents[g],
    )


def random_sample(rng: np.random.Generator, config: BackboneConfig, sample_id: str = "q0") -> Sample:
    n = int(rng.integers(1, 5))
    intents = list(rng.choice(config.intents, size=n, replace=False)) if n <= len(config.intents) else [
        str(rng.choice(config.intents)) for _ in range(n)
    ]
    return make_sample(
        sample_id=sample_id,
        tokens=tuple(int(t) for t in rng.integers(0, config.vocab_size, size=rng.integers(1, 7))),
        device=int(rng.integers(0, config.num_devices)),
        context=tuple(int(c) for c in rng.integers(0, config.context_vocab, size=rng.integers(1, 3))),
        intents=intents,
        g=int(rng.integers(0, n)),
        skills=[int(s) for s in rng.integers(0, config.num_skills, size=n)],
        features=[tuple(int(f) for f in rng.integers(0, config.feature_vocab, size=rng.integers(0, 3))) for _ in range(n)],
    )


@pytest.fixture(scope="session")
def tiny_config() -> BackboneConfig:
    return tiny_backbone_config()


@pytest.fixture(scope="session")
def tiny_backbone(tiny_config) -> Backbone:
    return Backbone.create(tiny_config, seed=7)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(0)
