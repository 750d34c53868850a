"""Iterative scanpath predictor.

Training runs teacher-forced over encoded fixation-key sequences; each
step emits a softmax over the 257 dictionary keys and the loss is the
summed negative log-likelihood including the END step.  Inference
decodes greedily, feeding the argmax key back until END or a length
guard.  The first step sees only a projection of the image feature
vector; later steps see the projected feature concatenated with the
embedding of the previous key.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import tensor as T
from .errors import ContractViolation
from .lstm import init_lstm, lstm_cell, lstm_cell_np
from .rng import Rng
from .tensor import Parameter, Tensor
from .optim import AdamState, adam_step

N_KEYS = 257
END_KEY = 256


@dataclass(frozen=True)
class PredictorConfig:
    feat_dim: int
    embed_dim: int = 256
    hidden_dim: int = 512
    n_keys: int = N_KEYS

    @property
    def input_dim(self) -> int:
        return 2 * self.embed_dim


@dataclass(frozen=True)
class DecodeConfig:
    max_len: int = 64

    def __post_init__(self):
        if self.max_len < 1:
            raise ContractViolation(f"max_len must be >= 1, got {self.max_len}")


class PredictorParams:
    """Feature projection, key embedding, first-step projection, LSTM, output head."""

    def __init__(self, cfg: PredictorConfig, rng: Rng):
        c, e, h = cfg.feat_dim, cfg.embed_dim, cfg.hidden_dim
        self.cfg = cfg
        self.feat_w = Parameter("feat_w", rng.normals((e, c), sigma=1.0 / np.sqrt(c)))
        self.feat_b = Parameter("feat_b", np.zeros(e))
        self.start_w = Parameter("start_w", rng.normals((2 * e, c), sigma=1.0 / np.sqrt(c)))
        self.start_b = Parameter("start_b", np.zeros(2 * e))
        self.embed = Parameter("embed", rng.normals((cfg.n_keys, e), sigma=1.0 / np.sqrt(e)))
        self.lstm_w, self.lstm_b = init_lstm("lstm", 2 * e, h, rng)
        self.out_w = Parameter("out_w", rng.normals((cfg.n_keys, h), sigma=1.0 / np.sqrt(h)))
        self.out_b = Parameter("out_b", np.zeros(cfg.n_keys))

    def params(self) -> list[Parameter]:
        return [
            self.feat_w, self.feat_b, self.start_w, self.start_b,
            self.embed, self.lstm_w, self.lstm_b, self.out_w, self.out_b,
        ]


def _check_keys(keys: list[int], n_keys: int) -> None:
    end = n_keys - 1
    if len(keys) < 2:
        raise ContractViolation("encoded scanpath must hold >= 1 fixation key plus END")
    if keys[-1] != end:
        raise ContractViolation("encoded scanpath must end with the END key")
    for k in keys[:-1]:
        if k == end:
            raise ContractViolation("END key appears before the final position")
        if not 0 <= k < n_keys:
            raise ContractViolation(f"key {k} outside the dictionary")


def forward_teacher(p: PredictorParams, feat: np.ndarray | Tensor, keys: list[int]) -> list[Tensor]:
    """Teacher-forced distributions p_1..p_{T+1} over the dictionary keys."""
    _check_keys(keys, p.cfg.n_keys)
    f = feat if isinstance(feat, Tensor) else T.constant(feat)
    if f.data.shape != (p.cfg.feat_dim,):
        raise ContractViolation(f"feature dim {f.data.shape} != ({p.cfg.feat_dim},)")
    lw, lb = p.lstm_w.leaf(), p.lstm_b.leaf()
    ow, ob = p.out_w.leaf(), p.out_b.leaf()
    feat_proj = T.affine(p.feat_w.leaf(), f, p.feat_b.leaf())
    embed = p.embed.leaf()
    h = T.constant(np.zeros(p.cfg.hidden_dim))
    c = T.constant(np.zeros(p.cfg.hidden_dim))
    dists: list[Tensor] = []
    for t in range(len(keys)):
        if t == 0:
            x = T.affine(p.start_w.leaf(), f, p.start_b.leaf())
        else:
            x = T.concat([feat_proj, T.take(embed, keys[t - 1])])
        h, c = lstm_cell(x, h, c, lw, lb)
        dists.append(T.softmax_node(T.affine(ow, h, ob)))
    return dists


def nll_loss(dists: list[Tensor], keys: list[int]) -> Tensor:
    """-sum_t log p_t(key_t), END step included."""
    _check_keys(keys, dists[0].data.shape[0])
    if len(dists) != len(keys):
        raise ContractViolation(f"{len(dists)} distributions for {len(keys)} keys")
    picks = [T.log_clamped(T.take(d, k)) for d, k in zip(dists, keys)]
    return T.scale(T.add_many(picks), -1.0)


def decode_greedy(p: PredictorParams, feat: np.ndarray, cfg: DecodeConfig) -> list[int]:
    """Greedy argmax decode; returns keys, END-terminated or cut at max_len.

    Ties break toward the smallest key index.  Two calls with the same
    inputs return the same sequence.
    """
    feat = np.asarray(feat, dtype=np.float64)
    lw, lb = p.lstm_w.value, p.lstm_b.value
    feat_proj = p.feat_w.value @ feat + p.feat_b.value
    h = np.zeros(p.cfg.hidden_dim)
    c = np.zeros(p.cfg.hidden_dim)
    end = p.cfg.n_keys - 1
    keys: list[int] = []
    x = p.start_w.value @ feat + p.start_b.value
    for _ in range(cfg.max_len):
        h, c = lstm_cell_np(x, h, c, lw, lb)
        k = int(np.argmax(p.out_w.value @ h + p.out_b.value))
        keys.append(k)
        if k == end:
            break
        x = np.concatenate([feat_proj, p.embed.value[k]])
    return keys


def first_step_probs(p: PredictorParams, feat: np.ndarray) -> np.ndarray:
    """Distribution over keys at the feature-only first step."""
    feat = np.asarray(feat, dtype=np.float64)
    h = np.zeros(p.cfg.hidden_dim)
    c = np.zeros(p.cfg.hidden_dim)
    x = p.start_w.value @ feat + p.start_b.value
    h, _ = lstm_cell_np(x, h, c, p.lstm_w.value, p.lstm_b.value)
    logits = p.out_w.value @ h + p.out_b.value
    e = np.exp(logits - logits.max())
    return e / e.sum()


def step_probs_np(p: PredictorParams, feat: np.ndarray, keys: list[int]) -> np.ndarray:
    """Teacher-forced step distributions as a (T+1, n_keys) array (fast path)."""
    _check_keys(keys, p.cfg.n_keys)
    feat = np.asarray(feat, dtype=np.float64)
    feat_proj = p.feat_w.value @ feat + p.feat_b.value
    h = np.zeros(p.cfg.hidden_dim)
    c = np.zeros(p.cfg.hidden_dim)
    out = np.empty((len(keys), p.cfg.n_keys))
    for t in range(len(keys)):
        if t == 0:
            x = p.start_w.value @ feat + p.start_b.value
        else:
            x = np.concatenate([feat_proj, p.embed.value[keys[t - 1]]])
        h, c = lstm_cell_np(x, h, c, p.lstm_w.value, p.lstm_b.value)
        logits = p.out_w.value @ h + p.out_b.value
        e = np.exp(logits - logits.max())
        out[t] = e / e.sum()
    return out


@dataclass(frozen=True)
class PredictorTrainConfig:
    lr: float = 1e-5
    epochs: int = 200
    batch_size: int = 16
    max_steps: int | None = None


@dataclass
class TrainLog:
    epoch_losses: list[float] = field(default_factory=list)
    steps: int = 0


def next_key_accuracy(p: PredictorParams, samples: list[tuple[np.ndarray, list[int]]]) -> float:
    """Teacher-forced argmax accuracy over every step of every sample."""
    hit = total = 0
    for feat, keys in samples:
        probs = step_probs_np(p, feat, keys)
        hit += int(np.sum(np.argmax(probs, axis=1) == np.asarray(keys)))
        total += len(keys)
    return hit / total


def train_predictor(
    samples: list[tuple[np.ndarray, list[int]]],
    params: PredictorParams,
    cfg: PredictorTrainConfig,
    rng: Rng,
    stop: Callable[[int, PredictorParams], bool] | None = None,
) -> tuple[AdamState, TrainLog]:
    """Adam training over (feature, encoded-key-sequence) pairs.

    ``stop(epoch, params)`` may end training early (checked after each
    epoch).  Returns the optimizer state and the per-epoch loss log.
    """
    if not samples:
        raise ContractViolation("train_predictor needs a non-empty dataset")
    plist = params.params()
    state = AdamState(plist, lr=cfg.lr)
    log = TrainLog()
    order = list(range(len(samples)))
    for epoch in range(cfg.epochs):
        rng.shuffle(order)
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            losses = []
            for idx in batch:
                feat, keys = samples[idx]
                losses.append(nll_loss(forward_teacher(params, feat, keys), keys))
            batch_loss = T.scale(T.add_many(losses), 1.0 / len(losses)) if len(losses) > 1 else losses[0]
            T.reverse_grad(batch_loss, plist)
            adam_step(plist, state)
            total += float(sum(l.data for l in losses))
            log.steps += 1
            if cfg.max_steps is not None and log.steps >= cfg.max_steps:
                log.epoch_losses.append(total / (start + len(batch)))
                return state, log
        log.epoch_losses.append(total / len(order))
        if stop is not None and stop(epoch, params):
            break
    return state, log
