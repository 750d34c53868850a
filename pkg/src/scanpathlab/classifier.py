"""Scanpath-guided multi-label classifier.

One branch global-average-pools the feature map into a visual vector;
the other runs an LSTM over fixation-pooled feature vectors in scanpath
order and pools the hidden states with scaled dot-product attention
(last state attends over the earlier ones).  Both vectors are
concatenated and mapped to 14 per-class sigmoid probabilities.  Training
minimizes a class-reweighted cross-entropy in which uncertain labels
contribute exactly nothing, to the value or to the gradient.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import tensor as T
from .errors import ContractViolation
from .lstm import init_lstm, lstm_cell, lstm_cell_np, _sig
from .optim import AdamState, adam_step
from .rng import Rng
from .tensor import Parameter, Tensor

N_CLASSES = 14
UNCERTAIN = -1
PROB_EPS = 1e-12


def validate_labels(labels: np.ndarray) -> np.ndarray:
    """14-vector over {1, 0, -1}; -1 marks an uncertain label."""
    arr = np.asarray(labels)
    if arr.shape != (N_CLASSES,):
        raise ContractViolation(f"label vector must have {N_CLASSES} entries, got {arr.shape}")
    if not np.isin(arr, (0, 1, UNCERTAIN)).all():
        raise ContractViolation("labels must be 1 (present), 0 (absent) or -1 (uncertain)")
    return arr.astype(np.int64)


@dataclass(frozen=True)
class ClassifierConfig:
    feat_dim: int
    hidden_dim: int = 256
    n_classes: int = N_CLASSES
    attention: bool = True
    pool_grid: int = 16

    def __post_init__(self):
        if self.pool_grid not in (8, 16):
            raise ContractViolation(f"pool_grid must be 8 or 16, got {self.pool_grid}")


class ClassifierParams:
    def __init__(self, cfg: ClassifierConfig, rng: Rng):
        self.cfg = cfg
        c, h = cfg.feat_dim, cfg.hidden_dim
        self.ism_w, self.ism_b = init_lstm("ism", c, h, rng)
        self.head_w = Parameter("head_w", rng.normals((cfg.n_classes, c + h), sigma=1.0 / np.sqrt(c + h)))
        self.head_b = Parameter("head_b", np.zeros(cfg.n_classes))

    def params(self) -> list[Parameter]:
        return [self.ism_w, self.ism_b, self.head_w, self.head_b]


class VisualOnlyParams:
    """Scanpath-free baseline: affine head straight off the pooled features."""

    def __init__(self, feat_dim: int, rng: Rng, n_classes: int = N_CLASSES):
        self.feat_dim = feat_dim
        self.n_classes = n_classes
        self.head_w = Parameter("head_w", rng.normals((n_classes, feat_dim), sigma=1.0 / np.sqrt(feat_dim)))
        self.head_b = Parameter("head_b", np.zeros(n_classes))

    def params(self) -> list[Parameter]:
        return [self.head_w, self.head_b]


def ism_forward(thetas: list[Tensor], params: ClassifierParams) -> list[Tensor]:
    """Hidden states h_1..h_T of the LSTM over fixation features."""
    if not thetas:
        raise ContractViolation("ism_forward needs at least one fixation feature")
    hdim = params.cfg.hidden_dim
    w, b = params.ism_w.leaf(), params.ism_b.leaf()
    h = T.constant(np.zeros(hdim))
    c = T.constant(np.zeros(hdim))
    states = []
    for theta in thetas:
        h, c = lstm_cell(theta, h, c, w, b)
        states.append(h)
    return states


def attention_with_weights(states: list[Tensor], dim: int) -> tuple[Tensor, Tensor | None]:
    """Scaled dot-product pooling: h_T attends over h_1..h_{T-1}.

    Returns (pooled vector, attention weights); with a single state the
    memory is empty, the pooled vector is h_T itself and weights are None.
    """
    if not states:
        raise ContractViolation("attention needs at least one hidden state")
    if len(states) == 1:
        return states[0], None
    query, memory = states[-1], states[:-1]
    scores = T.scale(T.dot_each(query, memory), 1.0 / np.sqrt(dim))
    alpha = T.softmax_node(scores)
    return T.weighted_sum(memory, alpha), alpha


def attention(states: list[Tensor], dim: int) -> Tensor:
    return attention_with_weights(states, dim)[0]


def viewing_feature(thetas: list[Tensor], params: ClassifierParams) -> Tensor:
    """ISM plus pooling; with attention off the last hidden state is used."""
    states = ism_forward(thetas, params)
    if not params.cfg.attention:
        return states[-1]
    return attention(states, params.cfg.hidden_dim)


def classify(fv: Tensor, fa: Tensor, params: ClassifierParams) -> Tensor:
    """Per-class probabilities from the two branch vectors, in (0, 1)."""
    cfg = params.cfg
    if fv.data.shape != (cfg.feat_dim,) or fa.data.shape != (cfg.hidden_dim,):
        raise ContractViolation(
            f"classify: got {fv.data.shape} and {fa.data.shape}, expected "
            f"({cfg.feat_dim},) and ({cfg.hidden_dim},)"
        )
    scores = T.affine(params.head_w.leaf(), T.concat([fv, fa]), params.head_b.leaf())
    return T.clip(T.sigmoid(scores), PROB_EPS, 1.0 - PROB_EPS)


def forward_no_scanpath(fv: Tensor | np.ndarray, params: VisualOnlyParams) -> Tensor:
    f = fv if isinstance(fv, Tensor) else T.constant(fv)
    if f.data.shape != (params.feat_dim,):
        raise ContractViolation(f"visual feature dim {f.data.shape} != ({params.feat_dim},)")
    scores = T.affine(params.head_w.leaf(), f, params.head_b.leaf())
    return T.clip(T.sigmoid(scores), PROB_EPS, 1.0 - PROB_EPS)


def class_weights(label_table: np.ndarray) -> np.ndarray:
    """Positive-class weights n_neg / (n_pos + n_neg), clamped to [1e-3, 1-1e-3].

    Uncertain labels are excluded from the counts; a class with no
    certain labels at all gets 0.5 and a warning.
    """
    table = np.asarray(label_table)
    if table.ndim != 2 or table.shape[1] != N_CLASSES:
        raise ContractViolation(f"label table must be (N, {N_CLASSES})")
    w = np.empty(N_CLASSES)
    for d in range(N_CLASSES):
        col = table[:, d]
        n_pos = int(np.sum(col == 1))
        n_neg = int(np.sum(col == 0))
        if n_pos + n_neg == 0:
            warnings.warn(f"class {d}: no certain labels, weight defaults to 0.5")
            w[d] = 0.5
        else:
            w[d] = n_neg / (n_pos + n_neg)
    return np.clip(w, 1e-3, 1.0 - 1e-3)


def wce_loss(p_hat: Tensor, labels: np.ndarray, w_pos: np.ndarray) -> Tensor:
    """Uncertainty-masked, class-reweighted cross-entropy (scalar node).

    Present classes weigh w_pos, absent ones 1 - w_pos; uncertain classes
    get coefficient zero so they are invisible to value and gradient.
    """
    labels = validate_labels(labels)
    if p_hat.data.shape != (N_CLASSES,):
        raise ContractViolation(f"p_hat must have {N_CLASSES} entries")
    if np.any(p_hat.data <= 0.0) or np.any(p_hat.data >= 1.0):
        raise ContractViolation("predicted probabilities must lie strictly inside (0, 1)")
    w_pos = np.asarray(w_pos, dtype=np.float64)
    if w_pos.shape != (N_CLASSES,):
        raise ContractViolation(f"w_pos must have {N_CLASSES} entries")
    mask = (labels != UNCERTAIN).astype(np.float64)
    p = np.where(labels == 1, 1.0, 0.0)
    w_d = p * w_pos + (1.0 - p) * (1.0 - w_pos)
    coef_pos = mask * w_d * p
    coef_neg = mask * w_d * (1.0 - p)
    log_p = T.log_clamped(p_hat, PROB_EPS)
    log_q = T.log_clamped(T.sub(T.constant(np.ones(N_CLASSES)), p_hat), PROB_EPS)
    pos_term = T.dot(T.constant(coef_pos), log_p)
    neg_term = T.dot(T.constant(coef_neg), log_q)
    return T.scale(T.add(pos_term, neg_term), -1.0)


# ---------------------------------------------------------------------------
# inference fast paths (no graph)
# ---------------------------------------------------------------------------


def infer_probs(params: ClassifierParams, fv: np.ndarray, thetas: list[np.ndarray]) -> np.ndarray:
    cfg = params.cfg
    h = np.zeros(cfg.hidden_dim)
    c = np.zeros(cfg.hidden_dim)
    states = []
    for theta in thetas:
        h, c = lstm_cell_np(theta, h, c, params.ism_w.value, params.ism_b.value)
        states.append(h)
    if cfg.attention and len(states) > 1:
        memory = np.stack(states[:-1])
        scores = memory @ states[-1] / np.sqrt(cfg.hidden_dim)
        e = np.exp(scores - scores.max())
        fa = (e / e.sum()) @ memory
    else:
        fa = states[-1]
    logits = params.head_w.value @ np.concatenate([fv, fa]) + params.head_b.value
    return np.clip(_sig(logits), PROB_EPS, 1.0 - PROB_EPS)


def infer_probs_visual(params: VisualOnlyParams, fv: np.ndarray) -> np.ndarray:
    logits = params.head_w.value @ fv + params.head_b.value
    return np.clip(_sig(logits), PROB_EPS, 1.0 - PROB_EPS)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass
class ClassifierSample:
    """Everything one training example needs, features already pooled."""

    image_id: str
    fv: np.ndarray
    thetas: list[np.ndarray]
    labels: np.ndarray


@dataclass(frozen=True)
class ClassifierTrainConfig:
    lr: float = 1e-4
    epochs: int = 25
    batch_size: int = 16
    lr_decay: float = 0.2
    lr_period: int = 6
    max_steps: int | None = None


def lr_at_epoch(cfg: ClassifierTrainConfig, epoch: int) -> float:
    """Learning rate for a 1-indexed epoch (decayed every lr_period epochs)."""
    return cfg.lr * cfg.lr_decay ** ((epoch - 1) // cfg.lr_period)


@dataclass
class ClassifierTrainLog:
    epoch_losses: list[float] = field(default_factory=list)
    valid_scores: list[float] = field(default_factory=list)
    best_epoch: int = 0
    steps: int = 0


def _snapshot(plist: list[Parameter]) -> dict[str, np.ndarray]:
    return {p.name: p.value.copy() for p in plist}


def _restore(plist: list[Parameter], snap: dict[str, np.ndarray]) -> None:
    for p in plist:
        p.value[...] = snap[p.name]


def _sample_loss(model, sample: ClassifierSample, w_pos: np.ndarray, with_scanpath: bool) -> Tensor:
    if with_scanpath:
        fa = viewing_feature([T.constant(t) for t in sample.thetas], model)
        probs = classify(T.constant(sample.fv), fa, model)
    else:
        probs = forward_no_scanpath(sample.fv, model)
    return wce_loss(probs, sample.labels, w_pos)


def train_classifier(
    model: ClassifierParams | VisualOnlyParams,
    samples: list[ClassifierSample],
    cfg: ClassifierTrainConfig,
    rng: Rng,
    valid_metric: Callable[[ClassifierParams | VisualOnlyParams], float] | None = None,
    stop: Callable[[int], bool] | None = None,
) -> tuple[AdamState, ClassifierTrainLog]:
    """Adam training with the stepped learning-rate schedule.

    When ``valid_metric`` is given, the parameters of the best-scoring
    epoch are restored before returning (ties keep the earliest epoch).
    """
    if not samples:
        raise ContractViolation("train_classifier needs a non-empty dataset")
    with_scanpath = isinstance(model, ClassifierParams)
    w_pos = class_weights(np.stack([s.labels for s in samples]))
    plist = model.params()
    state = AdamState(plist, lr=cfg.lr)
    log = ClassifierTrainLog()
    best_score = -np.inf
    best_snap = None
    order = list(range(len(samples)))
    for epoch in range(1, cfg.epochs + 1):
        state.lr = lr_at_epoch(cfg, epoch)
        rng.shuffle(order)
        total = 0.0
        done = False
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            losses = [_sample_loss(model, samples[i], w_pos, with_scanpath) for i in batch]
            batch_loss = T.scale(T.add_many(losses), 1.0 / len(losses)) if len(losses) > 1 else losses[0]
            T.reverse_grad(batch_loss, plist)
            adam_step(plist, state)
            total += float(sum(l.data for l in losses))
            log.steps += 1
            if cfg.max_steps is not None and log.steps >= cfg.max_steps:
                done = True
                break
        seen = len(order) if not done else min(len(order), start + len(batch))
        log.epoch_losses.append(total / seen)
        if valid_metric is not None:
            score = valid_metric(model)
            log.valid_scores.append(score)
            if score > best_score:
                best_score = score
                best_snap = _snapshot(plist)
                log.best_epoch = epoch
        if done or (stop is not None and stop(epoch)):
            break
    if best_snap is not None:
        _restore(plist, best_snap)
    return state, log
