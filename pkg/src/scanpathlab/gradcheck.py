"""Gradient integrity suite: reverse-mode vs central finite differences.

Each check builds a fresh, reduced-size computation (seeded), runs the
finite-difference comparison over every coordinate of every parameter
and reports the worst relative error.  The CLI ``gradcheck`` command and
the acceptance tests both run this suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .classifier import (
    ClassifierConfig,
    ClassifierParams,
    classify,
    viewing_feature,
    wce_loss,
)
from .features import CnnConfig, CnnParams, extract_features, global_avg_pool, pool_at, upscale2x
from .lstm import init_lstm, lstm_cell
from .predictor import PredictorConfig, PredictorParams, forward_teacher, nll_loss
from .rng import Rng
from .tensor import Parameter, finite_diff_check

EPS = 1e-5
TOL = 1e-4


@dataclass(frozen=True)
class CheckResult:
    name: str
    seed: int
    max_rel_err: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.max_rel_err < self.tol


def check_lstm_cell(seed: int, tol: float = TOL) -> CheckResult:
    rng = Rng(seed)
    w, b = init_lstm("lstm", 3, 4, rng)
    x = Parameter("x", rng.normals(3))
    h = Parameter("h", rng.normals(4))
    c = Parameter("c", rng.normals(4))
    r1, r2 = rng.normals(4), rng.normals(4)

    def f(_):
        hn, cn = lstm_cell(x.leaf(), h.leaf(), c.leaf(), w.leaf(), b.leaf())
        return T.add(T.dot(T.constant(r1), hn), T.dot(T.constant(r2), cn))

    rep = finite_diff_check(f, [w, b, x, h, c], eps=EPS, tol=tol)
    return CheckResult("lstm_cell", seed, rep.worst.max_rel_err, tol)


def check_upscale2x(seed: int, tol: float = TOL) -> CheckResult:
    rng = Rng(seed)
    fmap = Parameter("fmap", rng.normals((2, 8, 8)))
    probe = rng.normals((2, 16, 16))

    def f(_):
        return T.sum_all(T.mul(upscale2x(fmap.leaf()), T.constant(probe)))

    rep = finite_diff_check(f, [fmap], eps=EPS, tol=tol)
    return CheckResult("upscale2x", seed, rep.worst.max_rel_err, tol)


def check_attention(seed: int, tol: float = TOL) -> CheckResult:
    rng = Rng(seed)
    cfg = ClassifierConfig(feat_dim=3, hidden_dim=4)
    cp = ClassifierParams(cfg, rng)
    thetas = [Parameter(f"theta{i}", rng.normals(3)) for i in range(4)]
    probe = rng.normals(4)

    def f(_):
        fa = viewing_feature([t.leaf() for t in thetas], cp)
        return T.dot(T.constant(probe), fa)

    rep = finite_diff_check(f, cp.params()[:2] + thetas, eps=EPS, tol=tol)
    return CheckResult("attention", seed, rep.worst.max_rel_err, tol)


def check_sequence_nll(seed: int, tol: float = TOL) -> CheckResult:
    rng = Rng(seed)
    cfg = PredictorConfig(feat_dim=4, embed_dim=3, hidden_dim=5, n_keys=9)
    pp = PredictorParams(cfg, rng)
    feat = Parameter("feat", rng.normals(4))
    keys = [rng.randrange(8) for _ in range(3)] + [8]

    def f(_):
        return nll_loss(forward_teacher(pp, feat.leaf(), keys), keys)

    rep = finite_diff_check(f, pp.params() + [feat], eps=EPS, tol=tol)
    return CheckResult("sequence_nll", seed, rep.worst.max_rel_err, tol)


def check_masked_wce(seed: int, tol: float = TOL) -> CheckResult:
    rng = Rng(seed)
    cfg = ClassifierConfig(feat_dim=3, hidden_dim=4)
    cp = ClassifierParams(cfg, rng)
    fv = Parameter("fv", rng.normals(3))
    fa = Parameter("fa", rng.normals(4))
    labels = np.array([rng.choice([0, 1, -1]) for _ in range(14)])
    if not np.isin(labels, (0, 1)).any():
        labels[0] = 1
    w_pos = np.array([rng.uniform(0.1, 0.9) for _ in range(14)])

    def f(_):
        return wce_loss(classify(fv.leaf(), fa.leaf(), cp), labels, w_pos)

    rep = finite_diff_check(f, [cp.head_w, cp.head_b, fv, fa], eps=EPS, tol=tol)
    return CheckResult("masked_wce", seed, rep.worst.max_rel_err, tol)


def _toy_cnn(rng: Rng) -> tuple[CnnParams, np.ndarray]:
    cfg = CnnConfig(channels=(2, 2, 3), image_size=64)
    cnn = CnnParams(cfg, rng)
    img = rng.normals((1, 64, 64), sigma=0.5)
    return cnn, img


def check_e2e_predictor(seed: int, tol: float = TOL) -> CheckResult:
    rng = Rng(seed)
    cnn, img = _toy_cnn(rng)
    cfg = PredictorConfig(feat_dim=3, embed_dim=3, hidden_dim=4, n_keys=6)
    pp = PredictorParams(cfg, rng)
    keys = [rng.randrange(5) for _ in range(3)] + [5]

    def f(_):
        _, pooled = extract_features(img, cnn)
        return nll_loss(forward_teacher(pp, pooled, keys), keys)

    rep = finite_diff_check(f, cnn.params() + pp.params(), eps=EPS, tol=tol)
    return CheckResult("e2e_predictor", seed, rep.worst.max_rel_err, tol)


def check_e2e_classifier(seed: int, tol: float = TOL) -> CheckResult:
    rng = Rng(seed)
    cnn, img = _toy_cnn(rng)
    ccfg = ClassifierConfig(feat_dim=3, hidden_dim=4)
    cp = ClassifierParams(ccfg, rng)
    keys = [rng.randrange(256) for _ in range(3)]
    labels = np.array([rng.choice([0, 1, -1]) for _ in range(14)])
    if not np.isin(labels, (0, 1)).any():
        labels[0] = 1
    w_pos = np.array([rng.uniform(0.1, 0.9) for _ in range(14)])

    def f(_):
        fmap, _ = extract_features(img, cnn)
        up = upscale2x(fmap)
        thetas = [pool_at(up, k) for k in keys]
        fa = viewing_feature(thetas, cp)
        return wce_loss(classify(global_avg_pool(fmap), fa, cp), labels, w_pos)

    rep = finite_diff_check(f, cnn.params() + cp.params(), eps=EPS, tol=tol)
    return CheckResult("e2e_classifier", seed, rep.worst.max_rel_err, tol)


ALL_CHECKS = (
    check_lstm_cell,
    check_upscale2x,
    check_attention,
    check_sequence_nll,
    check_masked_wce,
    check_e2e_predictor,
    check_e2e_classifier,
)


def run_suite(n_seeds: int = 20, tol: float = TOL, base_seed: int = 0) -> list[CheckResult]:
    results = []
    for check in ALL_CHECKS:
        for s in range(n_seeds):
            results.append(check(base_seed + s, tol))
    return results
