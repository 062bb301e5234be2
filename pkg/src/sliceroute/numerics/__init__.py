"""Float64 reverse-mode autodiff core and optimizers."""

from .optim import Adam
from .recurrent import BiLstmParams, LstmCellParams, encode_sequence_batch, recurrent_encode
from .tensor import Tensor, constant, no_grad, parameter

__all__ = [
    "Adam",
    "BiLstmParams",
    "LstmCellParams",
    "Tensor",
    "constant",
    "encode_sequence_batch",
    "no_grad",
    "parameter",
    "recurrent_encode",
]
