"""Finite-difference verification of every differentiable operation and of
the full slice-aware loss on a small model."""

import numpy as np
import pytest
from _gradtools import check_grads

import sliceroute.numerics.tensor as T
from sliceroute.numerics.recurrent import BiLstmParams, recurrent_encode
from sliceroute.numerics.tensor import Tensor, parameter
from sliceroute.slice_aware import AttentionConfig, AttentionMethod, LossWeights, SliceAwareModel, total_loss
from sliceroute.slicing import SliceConfig, assign_slices
from tests_support import tiny_slice_model

pytestmark = pytest.mark.gradcheck


def _rand(rng, *shape):
    return parameter(rng.normal(size=shape))


class TestOpGradients:
    def test_matmul(self, rng):
        a, b = _rand(rng, 3, 4), _rand(rng, 4, 2)
        check_grads(lambda: T.sum_all(T.mul(T.matmul(a, b), T.matmul(a, b))), [a, b])

    def test_add_sub_mul(self, rng):
        a, b = _rand(rng, 2, 3), _rand(rng, 2, 3)
        check_grads(lambda: T.sum_all(T.mul(T.add(a, b), T.sub(a, b))), [a, b])

    def test_scale(self, rng):
        a = _rand(rng, 5)
        check_grads(lambda: T.sum_all(T.scale(T.mul(a, a), -2.5)), [a])

    def test_abs(self, rng):
        a = parameter(rng.normal(size=7) + np.sign(rng.normal(size=7)) * 0.5)
        check_grads(lambda: T.sum_all(T.mul(T.abs_(a), T.abs_(a))), [a])

    def test_sigmoid(self, rng):
        a = _rand(rng, 4, 3)
        check_grads(lambda: T.sum_all(T.sigmoid(a)), [a])

    def test_tanh(self, rng):
        a = _rand(rng, 4, 3)
        check_grads(lambda: T.sum_all(T.tanh(a)), [a])

    def test_softmax_temp(self, rng):
        a = _rand(rng, 6)
        w = Tensor(rng.normal(size=6))
        for tau in (1.0, 0.37, 3.0):
            check_grads(lambda: T.sum_all(T.mul(T.softmax_temp(a, tau), w)), [a])

    def test_bce_loss_pred_side(self, rng):
        logits = _rand(rng, 8)
        target = Tensor((rng.random(8) < 0.5).astype(float))
        check_grads(lambda: T.bce_loss(T.sigmoid(logits), target), [logits])

    def test_bce_loss_soft_target_side(self, rng):
        pred = Tensor(rng.uniform(0.2, 0.8, size=5))
        traw = _rand(rng, 5)
        check_grads(lambda: T.bce_loss(pred, T.sigmoid(traw)), [traw])

    def test_sum_mean_reductions(self, rng):
        a = _rand(rng, 3, 4)
        check_grads(lambda: T.mean_all(T.mul(a, a)), [a])
        check_grads(lambda: T.sum_all(T.mul(T.sum_axis(a, 0), T.sum_axis(a, 0))), [a])
        check_grads(lambda: T.sum_all(T.mul(T.mean_axis(a, 1), T.mean_axis(a, 1))), [a])

    def test_reshape_concat_gather_slice(self, rng):
        a, b = _rand(rng, 2, 6), _rand(rng, 3, 6)
        idx = np.array([0, 4, 2, 4])

        def build():
            cat = T.concat([a, b], axis=0)
            picked = T.gather_rows(cat, idx)
            cols = T.slice_cols(picked, 1, 4)
            return T.sum_all(T.mul(T.reshape(cols, (2, 6)), T.reshape(cols, (2, 6))))

        check_grads(build, [a, b])

    def test_linear(self, rng):
        x, w, b = _rand(rng, 4, 3), _rand(rng, 3, 2), _rand(rng, 1, 2)
        check_grads(lambda: T.sum_all(T.sigmoid(T.linear(x, w, b))), [x, w, b])

    def test_broadcast_add_grad(self, rng):
        x, row = _rand(rng, 4, 3), _rand(rng, 1, 3)
        check_grads(lambda: T.sum_all(T.sigmoid(T.add(x, row))), [x, row])


class TestRecurrentGradients:
    def test_three_step_sequence(self, rng):
        params = BiLstmParams.init(3, 2, rng)
        seq = _rand(rng, 3, 3)
        tensors = [seq] + list(params.tensors("lstm").values())
        check_grads(lambda: T.sum_all(recurrent_encode(seq, params)), tensors)


class TestFullModelGradient:
    def test_total_loss_k3_d8_n4(self):
        """Combined loss gradient on a k=3, d=8, n=4 toy model, tolerance 1e-3."""
        model, sample, slice_cfg = tiny_slice_model(k=3, d=8, n=4, seed=3)
        gamma = assign_slices(sample, slice_cfg)
        params = list(model.trainable_parameters().values())
        worst = check_grads(lambda: total_loss(sample, model, gamma), params, tol=1e-3)
        assert worst < 1e-3

    def test_total_loss_indicator_only_method(self):
        model, sample, slice_cfg = tiny_slice_model(
            k=3, d=8, n=4, seed=5, attention=AttentionConfig(AttentionMethod.INDICATOR_ONLY, tau=0.7)
        )
        gamma = assign_slices(sample, slice_cfg)
        params = list(model.trainable_parameters().values())
        check_grads(lambda: total_loss(sample, model, gamma), params, tol=1e-3)

    def test_total_loss_unfrozen_backbone_reaches_backbone(self):
        model, sample, slice_cfg = tiny_slice_model(k=2, d=8, n=3, seed=9, freeze_backbone=False)
        gamma = assign_slices(sample, slice_cfg)
        named = model.trainable_parameters()
        assert any(name.startswith("backbone.") for name in named)
        picked = [named["backbone.head.w"], named["backbone.fc2.w"], named["indicator.w"]]
        check_grads(lambda: total_loss(sample, model, gamma), picked, tol=1e-3)
