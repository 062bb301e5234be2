"""Checkpoint round trips, content hashing, and failure modes."""

import json

import numpy as np
import pytest

import sliceroute.numerics.tensor as T
from sliceroute.backbone import Backbone
from sliceroute.checkpoint import (
    load_checkpoint,
    load_model,
    parameter_hash,
    save_backbone,
    save_checkpoint,
    save_slice_aware,
)
from sliceroute.errors import ConfigError, StartupError
from sliceroute.numerics.tensor import Tensor
from sliceroute.slice_aware import AttentionConfig, AttentionMethod, LossWeights, SliceAwareModel

from conftest import make_sample, tiny_backbone_config
from tests_support import tiny_slice_model


class TestParameterHash:
    def test_deterministic(self, rng):
        arrays = {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=5)}
        assert parameter_hash(arrays) == parameter_hash(dict(reversed(arrays.items())))

    def test_sensitive_to_values(self, rng):
        arrays = {"a": rng.normal(size=(3, 4))}
        bumped = {"a": arrays["a"].copy()}
        bumped["a"][0, 0] = np.nextafter(bumped["a"][0, 0], np.inf)
        assert parameter_hash(arrays) != parameter_hash(bumped)

    def test_sensitive_to_names_and_shapes(self, rng):
        flat = rng.normal(size=12)
        assert parameter_hash({"a": flat}) != parameter_hash({"b": flat})
        assert parameter_hash({"a": flat}) != parameter_hash({"a": flat.reshape(3, 4)})


class TestBackboneRoundTrip:
    def test_bitwise_round_trip(self, tmp_path, tiny_config):
        model = Backbone.create(tiny_config, seed=11)
        path = tmp_path / "backbone.npz"
        saved_hash = save_backbone(model, path, extra_meta={"run_id": "r1"})
        restored, meta = load_model(path)
        assert meta["run_id"] == "r1"
        assert meta["parameter_hash"] == saved_hash
        assert meta["kind"] == "backbone"
        for name, t in model.named_parameters().items():
            assert np.array_equal(t.values, restored.named_parameters()[name].values), name

    def test_restored_model_scores_identically(self, tmp_path, tiny_config):
        model = Backbone.create(tiny_config, seed=11)
        path = tmp_path / "backbone.npz"
        save_backbone(model, path)
        restored, _ = load_model(path)
        s = make_sample()
        with T.no_grad():
            a = model.predict_base(model.encode(s)).values
            b = restored.predict_base(restored.encode(s)).values
        assert np.array_equal(a, b)

    def test_save_load_save_hash_stable(self, tmp_path, tiny_config):
        model = Backbone.create(tiny_config, seed=2)
        first = save_backbone(model, tmp_path / "a.npz")
        restored, _ = load_model(tmp_path / "a.npz")
        second = save_backbone(restored, tmp_path / "b.npz")
        assert first == second


class TestSliceAwareRoundTrip:
    def test_round_trip_preserves_settings_and_values(self, tmp_path):
        model, sample, _ = tiny_slice_model(
            k=4, d=8, attention=AttentionConfig(AttentionMethod.INDICATOR_PLUS_EXPERT, tau=0.3),
            loss_weights=LossWeights(1.0, 0.5, 2.0, 1.0), augment_sigma=0.01,
            reuse_shared_head=True,
        )
        path = tmp_path / "slice.npz"
        save_slice_aware(model, path)
        restored, meta = load_model(path)
        assert isinstance(restored, SliceAwareModel)
        assert restored.k == 4
        assert restored.attention.method is AttentionMethod.INDICATOR_PLUS_EXPERT
        assert restored.attention.tau == 0.3
        assert restored.loss_weights == LossWeights(1.0, 0.5, 2.0, 1.0)
        assert restored.augment_sigma == 0.01
        assert restored.reuse_shared_head and restored.freeze_backbone
        with T.no_grad():
            a = model.routing_scores(sample).values
            b = restored.routing_scores(sample).values
        assert np.array_equal(a, b)

    def test_hash_covers_backbone_and_slice_parameters(self, tmp_path):
        model, _, _ = tiny_slice_model()
        base = save_slice_aware(model, tmp_path / "a.npz")
        model.indicators.w.values[0, 0] += 1e-12
        assert save_slice_aware(model, tmp_path / "b.npz") != base
        model.indicators.w.values[0, 0] -= 1e-12
        model.backbone.token_table.values[0, 0] += 1e-12
        assert save_slice_aware(model, tmp_path / "c.npz") != base


class TestFailureModes:
    def test_missing_file(self, tmp_path):
        with pytest.raises(StartupError):
            load_checkpoint(tmp_path / "nope.npz")

    def test_foreign_npz_rejected(self, tmp_path):
        path = tmp_path / "foreign.npz"
        np.savez(path, weights=np.zeros(3))
        with pytest.raises(ConfigError):
            load_checkpoint(path)

    def test_wrong_version_rejected(self, tmp_path):
        path = tmp_path / "versioned.npz"
        save_checkpoint(path, {"w": Tensor(np.zeros(2))}, {"kind": "backbone"})
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["__meta__"][()]))
            arrays = {n: data[n] for n in data.files if n != "__meta__"}
        meta["format_version"] = 999
        arrays["__meta__"] = np.array(json.dumps(meta))
        np.savez(path, **arrays)
        with pytest.raises(ConfigError):
            load_checkpoint(path)

    def test_unknown_kind_rejected(self, tmp_path, tiny_config):
        path = tmp_path / "odd.npz"
        model = Backbone.create(tiny_config, seed=0)
        save_checkpoint(path, model.named_parameters(), {"kind": "mystery", "backbone_config": tiny_config.to_dict()})
        with pytest.raises(ConfigError):
            load_model(path)

    def test_parameter_name_mismatch_rejected(self, tmp_path, tiny_config):
        path = tmp_path / "renamed.npz"
        model = Backbone.create(tiny_config, seed=0)
        params = model.named_parameters()
        params["bogus_name"] = params.pop("head.w")
        save_checkpoint(path, params, {"kind": "backbone", "backbone_config": tiny_config.to_dict()})
        with pytest.raises(ConfigError):
            load_model(path)
