"""Adam optimizer contracts: bias-corrected first steps, state handling."""

import numpy as np
import pytest

import sliceroute.numerics.tensor as T
from sliceroute.errors import StateError
from sliceroute.numerics.optim import Adam
from sliceroute.numerics.tensor import parameter


def reference_adam(values, grads, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8, steps=1):
    """Straight transcription of the bias-corrected Adam update."""
    m = np.zeros_like(values)
    v = np.zeros_like(values)
    x = values.copy()
    for t in range(1, steps + 1):
        g = grads[t - 1]
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        x = x - lr * m_hat / (np.sqrt(v_hat) + eps)
    return x


class TestAdam:
    def test_first_step_magnitude_is_lr(self):
        p = parameter(np.array([1.0, -2.0, 3.0]))
        opt = Adam([p], lr=0.001)
        p.grad[:] = [0.5, -4.0, 0.01]
        opt.step()
        delta = np.abs(p.values - np.array([1.0, -2.0, 3.0]))
        # first bias-corrected step is lr * g/(|g| + eps'), i.e. almost exactly lr
        assert np.allclose(delta, 0.001, rtol=1e-4)

    def test_step_direction_opposes_gradient(self):
        p = parameter(np.zeros(2))
        opt = Adam([p], lr=0.01)
        p.grad[:] = [1.0, -1.0]
        opt.step()
        assert p.values[0] < 0 < p.values[1]

    def test_zero_gradient_leaves_parameters(self):
        values = np.array([1.5, -0.5])
        p = parameter(values.copy())
        Adam([p], lr=0.1).step()
        assert np.array_equal(p.values, values)

    def test_two_steps_match_reference(self):
        start = np.array([0.3, -1.2, 2.0])
        g1 = np.array([0.4, -0.1, 1.0])
        g2 = np.array([-0.2, 0.3, 0.5])
        p = parameter(start.copy())
        opt = Adam([p], lr=0.05)
        p.grad[:] = g1
        opt.step()
        p.zero_grad()
        p.grad[:] = g2
        opt.step()
        assert opt.t == 2
        expected = reference_adam(start, [g1, g2], lr=0.05, steps=2)
        assert np.allclose(p.values, expected, atol=1e-15)

    def test_second_identical_step_magnitude_near_lr(self):
        p = parameter(np.zeros(3))
        opt = Adam([p], lr=0.001)
        for _ in range(2):
            p.zero_grad()
            p.grad[:] = 0.7
            opt.step()
        assert opt.t == 2
        assert np.allclose(np.abs(p.values), 2 * 0.001, rtol=1e-3)

    def test_grads_untouched_by_step(self):
        p = parameter(np.zeros(3))
        opt = Adam([p], lr=0.001)
        p.grad[:] = 0.25
        opt.step()
        assert np.array_equal(p.grad, np.full(3, 0.25))

    def test_moment_shape_mismatch_raises(self):
        p = parameter(np.ones(3))
        opt = Adam([p], lr=0.001)
        p.grad[:] = 1.0
        opt.step()
        p.values = np.ones((2, 2))
        p.zero_grad()
        p.grad[:] = 1.0
        with pytest.raises(StateError):
            opt.step()

    def test_training_reduces_quadratic_loss(self):
        p = parameter(np.array([4.0, -3.0]))
        opt = Adam([p], lr=0.1)
        target = np.array([1.0, 1.0])
        for _ in range(400):
            p.zero_grad()
            diff = T.sub(p, T.Tensor(target))
            T.sum_all(T.mul(diff, diff)).backward()
            opt.step()
        assert np.allclose(p.values, target, atol=1e-2)
