"""Finite-difference gradient checking shared by unit and acceptance tests."""

from __future__ import annotations

import numpy as np

FD_STEP = 1e-5
REL_FLOOR = 1e-4


def numeric_grad(f, tensor, h: float = FD_STEP) -> np.ndarray:
    """Central finite differences of the scalar f() w.r.t. tensor.values.

    Perturbs values in place and restores them, so f must re-run the forward
    pass on each call.
    """
    flat = tensor.values.reshape(-1)
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        grad[i] = (fp - fm) / (2.0 * h)
    return grad.reshape(tensor.values.shape)


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray, floor: float = REL_FLOOR) -> float:
    """Worst per-element relative error, with tiny reference entries compared
    on an absolute scale of `floor` instead of blowing up the ratio."""
    denom = np.maximum(np.maximum(np.abs(numeric), np.abs(analytic)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def check_grads(build, params, h: float = FD_STEP, tol: float = 1e-4) -> float:
    """Assert analytic gradients of build() match finite differences.

    build() must construct the scalar loss from scratch (reading the current
    parameter values).  Returns the worst relative error across params.
    """
    for p in params:
        p.zero_grad()
    loss = build()
    loss.backward()
    worst = 0.0
    for p in params:
        ng = numeric_grad(lambda: build().item(), p, h)
        err = max_rel_err(p.grad, ng)
        worst = max(worst, err)
        assert err < tol, f"gradient mismatch (rel err {err:.3e} >= {tol:g}) on shape {p.shape}"
    return worst
