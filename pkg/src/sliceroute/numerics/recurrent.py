"""Single-layer bidirectional LSTM encoder built from tensor primitives.

The batched path processes padded sequences with a per-step keep mask so that
padding never leaks into the recurrent state: a masked step carries the
previous hidden and cell state through unchanged.  The single-sequence
`recurrent_encode` is the batched path with batch size one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InputError
from . import tensor as T
from .tensor import Tensor


@dataclass
class LstmCellParams:
    """Gate weights for one direction; gate order is input, forget, cell, output."""

    w_x: Tensor  # (input_dim, 4*hidden)
    w_h: Tensor  # (hidden, 4*hidden)
    b: Tensor  # (1, 4*hidden)

    @classmethod
    def init(cls, input_dim: int, hidden: int, rng: np.random.Generator) -> "LstmCellParams":
        bound = 1.0 / np.sqrt(hidden)
        return cls(
            w_x=Tensor(rng.uniform(-bound, bound, (input_dim, 4 * hidden)), requires_grad=True),
            w_h=Tensor(rng.uniform(-bound, bound, (hidden, 4 * hidden)), requires_grad=True),
            b=Tensor(np.zeros((1, 4 * hidden)), requires_grad=True),
        )

    def tensors(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.w_x": self.w_x, f"{prefix}.w_h": self.w_h, f"{prefix}.b": self.b}


@dataclass
class BiLstmParams:
    fw: LstmCellParams
    bw: LstmCellParams
    hidden: int

    @classmethod
    def init(cls, input_dim: int, hidden: int, rng: np.random.Generator) -> "BiLstmParams":
        return cls(
            fw=LstmCellParams.init(input_dim, hidden, rng),
            bw=LstmCellParams.init(input_dim, hidden, rng),
            hidden=hidden,
        )

    def tensors(self, prefix: str) -> dict[str, Tensor]:
        out = self.fw.tensors(f"{prefix}.fw")
        out.update(self.bw.tensors(f"{prefix}.bw"))
        return out


def _cell_step(gates: Tensor, c_prev: Tensor, hidden: int) -> tuple[Tensor, Tensor]:
    i = T.sigmoid(T.slice_cols(gates, 0, hidden))
    f = T.sigmoid(T.slice_cols(gates, hidden, 2 * hidden))
    z = T.tanh(T.slice_cols(gates, 2 * hidden, 3 * hidden))
    o = T.sigmoid(T.slice_cols(gates, 3 * hidden, 4 * hidden))
    c = T.add(T.mul(f, c_prev), T.mul(i, z))
    h = T.mul(o, T.tanh(c))
    return h, c


def _direction_pass(
    xproj: Tensor,
    cell: LstmCellParams,
    batch: int,
    steps: int,
    hidden: int,
    mask: np.ndarray | None,
    reverse: bool,
) -> list[Tensor]:
    """Run one direction over pre-projected inputs.

    xproj holds `x_t @ w_x + b` for all steps, laid out batch-major
    (row b*steps + t).  Returns the per-step hidden states in step order.
    """
    h = Tensor(np.zeros((batch, hidden)))
    c = Tensor(np.zeros((batch, hidden)))
    order = range(steps - 1, -1, -1) if reverse else range(steps)
    outputs: list[Tensor | None] = [None] * steps
    row_base = np.arange(batch) * steps
    for t in order:
        gates = T.add(T.gather_rows(xproj, row_base + t), T.matmul(h, cell.w_h))
        h_new, c_new = _cell_step(gates, c, hidden)
        if mask is None or bool(mask[:, t].all()):
            h, c = h_new, c_new
        else:
            keep = Tensor(mask[:, t : t + 1])
            drop = Tensor(1.0 - mask[:, t : t + 1])
            h = T.add(T.mul(keep, h_new), T.mul(drop, h))
            c = T.add(T.mul(keep, c_new), T.mul(drop, c))
        outputs[t] = h
    return outputs  # type: ignore[return-value]


def encode_sequence_batch(
    x: Tensor,
    params: BiLstmParams,
    batch: int,
    steps: int,
    mask: np.ndarray | None = None,
) -> Tensor:
    """Encode `batch` padded sequences of `steps` inputs each.

    x is (batch*steps, input_dim), batch-major.  mask, when given, is a
    (batch, steps) 0/1 float array marking real positions.  Returns
    (batch*steps, 2*hidden) with forward and backward states concatenated
    per step; padded rows hold the carried state and should be masked out by
    the consumer.
    """
    if steps < 1:
        raise InputError("encode_sequence_batch: need at least one step")
    hidden = params.hidden
    fw_proj = T.linear(x, params.fw.w_x, params.fw.b)
    bw_proj = T.linear(x, params.bw.w_x, params.bw.b)
    fw = _direction_pass(fw_proj, params.fw, batch, steps, hidden, mask, reverse=False)
    bw = _direction_pass(bw_proj, params.bw, batch, steps, hidden, mask, reverse=True)
    # per-step concat, stacked step-major, then reordered to batch-major rows
    stacked = T.concat([T.concat([fw[t], bw[t]], axis=1) for t in range(steps)], axis=0)
    perm = np.arange(steps * batch).reshape(steps, batch).T.reshape(-1)
    return T.gather_rows(stacked, perm)


def recurrent_encode(seq: Tensor, params: BiLstmParams) -> Tensor:
    """Encode one sequence of shape (steps, input_dim) to (steps, 2*hidden)."""
    if seq.values.ndim != 2 or seq.shape[0] < 1:
        raise InputError(f"recurrent_encode: need a non-empty (steps, input_dim) sequence, got shape {seq.shape}")
    return encode_sequence_batch(seq, params, batch=1, steps=seq.shape[0])
