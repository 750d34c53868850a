"""Single LSTM cell shared by the predictor and the classifier.

Weights are stacked as one (4H, in+H) matrix plus a (4H,) bias, gate
order [input, forget, candidate, output].  The forget-gate bias starts
at 1.0, the rest at 0.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .errors import ContractViolation
from .rng import Rng
from .tensor import Parameter, Tensor


def init_lstm(name: str, in_dim: int, hidden: int, rng: Rng) -> tuple[Parameter, Parameter]:
    sigma = 1.0 / np.sqrt(in_dim + hidden)
    w = Parameter(f"{name}_w", rng.normals((4 * hidden, in_dim + hidden), sigma=sigma))
    b = np.zeros(4 * hidden)
    b[hidden : 2 * hidden] = 1.0
    return w, Parameter(f"{name}_b", b)


def lstm_cell(x: Tensor, h: Tensor, c: Tensor, w: Tensor, b: Tensor) -> tuple[Tensor, Tensor]:
    """One step: returns (h', c') with the standard gate algebra."""
    hidden = h.data.shape[0]
    if c.data.shape != (hidden,):
        raise ContractViolation("lstm_cell: h and c dims differ")
    if w.data.shape != (4 * hidden, x.data.shape[0] + hidden) or b.data.shape != (4 * hidden,):
        raise ContractViolation(
            f"lstm_cell: weight dims {w.data.shape} do not fit input {x.data.shape} "
            f"and hidden {h.data.shape}"
        )
    z = T.affine(w, T.concat([x, h]), b)
    i = T.sigmoid(T.take(z, slice(0, hidden)))
    f = T.sigmoid(T.take(z, slice(hidden, 2 * hidden)))
    g = T.tanh(T.take(z, slice(2 * hidden, 3 * hidden)))
    o = T.sigmoid(T.take(z, slice(3 * hidden, 4 * hidden)))
    c_new = T.add(T.mul(f, c), T.mul(i, g))
    h_new = T.mul(o, T.tanh(c_new))
    return h_new, c_new


def lstm_cell_np(x: np.ndarray, h: np.ndarray, c: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Inference fast path with the same gate algebra as :func:`lstm_cell`."""
    hidden = h.shape[0]
    z = w @ np.concatenate([x, h]) + b
    i = _sig(z[:hidden])
    f = _sig(z[hidden : 2 * hidden])
    g = np.tanh(z[2 * hidden : 3 * hidden])
    o = _sig(z[3 * hidden :])
    c_new = f * c + i * g
    return o * np.tanh(c_new), c_new


def _sig(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out
