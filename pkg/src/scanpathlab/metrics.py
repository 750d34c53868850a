"""Scanpath similarity and classification quality measures.

ScanMatch aligns spatially binned fixation strings with Needleman-Wunsch
under a distance-based substitution score; MultiMatch aligns saccade
vectors with a minimum-cost dynamic program and reports vector, length,
direction and position sub-metrics (durations are not modeled anywhere
in this package).  AUROC follows the Mann-Whitney pairwise convention
with half credit for ties; AUPRC is the average-precision step sum over
a stable descending sort.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContractViolation, UndefinedMetricError
from .grid import Fixation, PatchDictionary, Scanpath, grid_diagonal_half
from .rng import Rng


@dataclass(frozen=True)
class ScanMatchConfig:
    """Substitution threshold (patch units) and gap penalty.

    The default threshold is half the patch-grid diagonal, so the
    substitution score (threshold - distance) / threshold is 1 for
    same-patch pairs and falls below 0 past half the grid.
    """

    threshold: float = grid_diagonal_half()
    gap: float = 0.0

    def __post_init__(self):
        if self.threshold <= 0:
            raise ContractViolation("scanmatch threshold must be positive")


@dataclass(frozen=True)
class MultiMatchResult:
    vector: float
    direction: float
    length: float
    position: float

    def as_dict(self) -> dict[str, float]:
        return {
            "mm_vector": self.vector,
            "mm_direction": self.direction,
            "mm_length": self.length,
            "mm_position": self.position,
        }


def needleman_wunsch(a, b, sub: Callable[[int, int], float], gap: float) -> float:
    """Optimal global alignment score.

    S[i][j] = max(S[i-1][j-1] + sub(a_i, b_j), S[i-1][j] + gap,
    S[i][j-1] + gap) with gap-multiple boundaries.  Empty sequences are
    allowed and score gap * len(other).
    """
    m, n = len(a), len(b)
    prev = np.arange(n + 1, dtype=np.float64) * gap
    for i in range(1, m + 1):
        cur = np.empty(n + 1)
        cur[0] = i * gap
        ai = a[i - 1]
        for j in range(1, n + 1):
            cur[j] = max(prev[j - 1] + sub(ai, b[j - 1]), prev[j] + gap, cur[j - 1] + gap)
        prev = cur
    return float(prev[n])


def _patch_distance(d: PatchDictionary, ka: int, kb: int) -> float:
    ra, ca = d.key_cell(ka)
    rb, cb = d.key_cell(kb)
    return math.hypot(ra - rb, ca - cb)


def scanmatch(a: Scanpath, b: Scanpath, d: PatchDictionary, cfg: ScanMatchConfig | None = None) -> float:
    """Alignment score of the binned fixation strings, normalized to <= 1.

    sub(i, j) = (threshold - patch-center distance) / threshold, so the
    maximum substitution score is 1; the alignment score is divided by
    the longer sequence length.  Symmetric, and exactly 1 for identical
    scanpaths.
    """
    cfg = cfg or ScanMatchConfig()
    if len(a) < 1 or len(b) < 1:
        raise ContractViolation("scanmatch needs non-empty scanpaths")
    ka = d.encode_scanpath(a)[:-1]
    kb = d.encode_scanpath(b)[:-1]
    tau = cfg.threshold

    def sub(i, j):
        return (tau - _patch_distance(d, i, j)) / tau

    return needleman_wunsch(ka, kb, sub, cfg.gap) / max(len(ka), len(kb))


# ---------------------------------------------------------------------------
# MultiMatch
# ---------------------------------------------------------------------------

_MM_NAMES = ("vector", "direction", "length", "position")


def _saccades(s: Scanpath) -> np.ndarray:
    pts = np.array([[f.x, f.y] for f in s.fixations])
    return pts[1:] - pts[:-1]


def _angle(u: np.ndarray, v: np.ndarray) -> float:
    if np.array_equal(u, v):
        return 0.0  # exact, so self-similarity is exactly 1
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return math.acos(min(1.0, max(-1.0, float(np.dot(u, v)) / (nu * nv))))


def _align_saccades(u: np.ndarray, v: np.ndarray, gap_cost: float) -> list[tuple[int, int]]:
    """Minimum-cost monotone matching of two saccade-vector sequences.

    Matching (i, j) costs |u_i - v_j|; skipping costs gap_cost per
    element.  Ties prefer the diagonal so identical sequences align
    element-wise.  If the optimum matches nothing (every pair worse than
    two gaps) the main diagonal is used as a fallback so the sub-metrics
    stay defined.
    """
    m, n = len(u), len(v)
    cost = np.empty((m + 1, n + 1))
    cost[0, :] = np.arange(n + 1) * gap_cost
    cost[:, 0] = np.arange(m + 1) * gap_cost
    dif = np.empty((m, n))
    for i in range(m):
        dif[i] = np.linalg.norm(u[i] - v, axis=1)
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            cost[i, j] = min(
                cost[i - 1, j - 1] + dif[i - 1, j - 1],
                cost[i - 1, j] + gap_cost,
                cost[i, j - 1] + gap_cost,
            )
    pairs = []
    i, j = m, n
    while i > 0 and j > 0:
        if cost[i, j] == cost[i - 1, j - 1] + dif[i - 1, j - 1]:
            pairs.append((i - 1, j - 1))
            i, j = i - 1, j - 1
        elif cost[i, j] == cost[i - 1, j] + gap_cost:
            i -= 1
        else:
            j -= 1
    pairs.reverse()
    if not pairs:
        pairs = [(k, k) for k in range(min(m, n))]
    return pairs


def multimatch(a: Scanpath, b: Scanpath, image_size: int = 256) -> MultiMatchResult:
    """Vector/direction/length/position similarity of two scanpaths.

    Saccade vectors are aligned by minimum-cost dynamic programming with
    gap cost diag/2 (diag = image diagonal); each sub-metric is
    1 - normalized mean difference over the aligned pairs.  All values
    lie in [0, 1]; identical scanpaths give exactly 1 everywhere.
    """
    short = [s for s, p in (("first", a), ("second", b)) if len(p) < 2]
    if short:
        raise UndefinedMetricError(
        f"multimatch sub-metrics {_MM_NAMES} need >= 2 fixations ({' and '.join(short)} scanpath too short)"
        )
    diag = image_size * math.sqrt(2.0)
    u, v = _saccades(a), _saccades(b)
    pairs = _align_saccades(u, v, gap_cost=diag / 2.0)
    vec_diff = np.mean([np.linalg.norm(u[i] - v[j]) for i, j in pairs])
    len_diff = np.mean([abs(np.linalg.norm(u[i]) - np.linalg.norm(v[j])) for i, j in pairs])
    dir_diff = np.mean([_angle(u[i], v[j]) for i, j in pairs])
    pos_diff = np.mean(
        [
            math.hypot(a.fixations[i].x - b.fixations[j].x, a.fixations[i].y - b.fixations[j].y)
            for i, j in pairs
        ]
    )
    return MultiMatchResult(
        vector=1.0 - vec_diff / (2.0 * diag),
        direction=1.0 - dir_diff / math.pi,
        length=1.0 - len_diff / diag,
        position=1.0 - pos_diff / diag,
    )


# ---------------------------------------------------------------------------
# classification measures
# ---------------------------------------------------------------------------


def _as_score_label(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.ndim != 1 or s.shape != y.shape:
        raise ContractViolation("scores and labels must be equal-length 1-D arrays")
    if not np.isin(y, (0, 1)).all():
        raise ContractViolation("labels must be binary")
    return s, y.astype(np.int64)


def auroc(scores, labels) -> float:
    """Mann-Whitney AUROC: P(score_pos > score_neg) with ties at 0.5."""
    s, y = _as_score_label(scores, labels)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("auroc needs at least one positive and one negative")
    order = np.argsort(s, kind="stable")
    ranks = np.empty(len(s), dtype=np.float64)
    sorted_scores = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0  # average 1-based rank
        i = j + 1
    pos_rank_sum = float(ranks[y == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auprc(scores, labels) -> float:
    """Average precision over a stable descending sort (ties keep input order)."""
    s, y = _as_score_label(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise UndefinedMetricError("auprc needs at least one positive")
    order = np.argsort(-s, kind="stable")
    tp = 0
    ap = 0.0
    for rank, idx in enumerate(order, start=1):
        if y[idx] == 1:
            tp += 1
            ap += (1.0 / n_pos) * (tp / rank)
    return ap


def macro_scores(
    score_matrix: np.ndarray, label_matrix: np.ndarray
) -> tuple[float, float, dict[int, tuple[float, float]], list[int]]:
    """Mean AUROC/AUPRC over classes with both labels present.

    Uncertain (-1) cells are dropped per class; classes left without a
    positive and a negative are skipped and reported.  Returns
    (macro auroc, macro auprc, per-class dict, skipped class indices).
    """
    scores = np.asarray(score_matrix, dtype=np.float64)
    labels = np.asarray(label_matrix)
    if scores.shape != labels.shape or scores.ndim != 2:
        raise ContractViolation("score and label matrices must have equal (N, C) shapes")
    per_class: dict[int, tuple[float, float]] = {}
    skipped: list[int] = []
    for d in range(scores.shape[1]):
        keep = labels[:, d] != -1
        y = labels[keep, d]
        if len(y) == 0 or y.min() == y.max():
            skipped.append(d)
            continue
        per_class[d] = (auroc(scores[keep, d], y), auprc(scores[keep, d], y))
    if not per_class:
        raise UndefinedMetricError("no class has both a positive and a negative label")
    aurocs = [v[0] for v in per_class.values()]
    auprcs = [v[1] for v in per_class.values()]
    return float(np.mean(aurocs)), float(np.mean(auprcs)), per_class, skipped


# ---------------------------------------------------------------------------
# evaluation protocols
# ---------------------------------------------------------------------------

MetricFn = Callable[[Scanpath, Scanpath], dict[str, float]]


def scanmatch_metric(d: PatchDictionary, cfg: ScanMatchConfig | None = None) -> MetricFn:
    def fn(a: Scanpath, b: Scanpath) -> dict[str, float]:
        return {"scanmatch": scanmatch(a, b, d, cfg)}

    return fn


def multimatch_metric(image_size: int = 256) -> MetricFn:
    def fn(a: Scanpath, b: Scanpath) -> dict[str, float]:
        try:
            return multimatch(a, b, image_size).as_dict()
        except UndefinedMetricError:
            return {}

    return fn


def combined_metric(d: PatchDictionary, cfg: ScanMatchConfig | None = None) -> MetricFn:
    sm = scanmatch_metric(d, cfg)
    mm = multimatch_metric(d.image_size)

    def fn(a: Scanpath, b: Scanpath) -> dict[str, float]:
        out = sm(a, b)
        out.update(mm(a, b))
        return out

    return fn


def _mean_of_dicts(dicts: list[dict[str, float]]) -> dict[str, float]:
    keys: dict[str, list[float]] = {}
    for dd in dicts:
        for k, val in dd.items():
            keys.setdefault(k, []).append(val)
    return {k: float(np.mean(vs)) for k, vs in keys.items()}


def score_vs_references(gen: Scanpath, references: list[Scanpath], metric: MetricFn) -> dict[str, float]:
    """Mean metric value of one generated scanpath against every reference."""
    if not references:
        raise ContractViolation("reference set must not be empty")
    return _mean_of_dicts([metric(gen, ref) for ref in references])


def set1_scores(
    generated: dict[str, Scanpath], references: dict[str, list[Scanpath]], metric: MetricFn
) -> tuple[dict[str, float], dict[str, dict[str, float]]]:
    """Average against all readers per image, then across images."""
    per_image = {}
    for image_id in sorted(generated):
        refs = references.get(image_id)
        if refs:
            per_image[image_id] = score_vs_references(generated[image_id], refs, metric)
    if not per_image:
        raise ContractViolation("no image has both a generated scanpath and references")
    return _mean_of_dicts(list(per_image.values())), per_image


def set2_scores(
    generated: dict[str, Scanpath],
    references: dict[str, list[Scanpath]],
    metric: MetricFn,
    rng: Rng,
) -> tuple[dict[str, float], dict[str, dict[str, float]]]:
    """One seeded-random reference per image; choice depends only on (seed, image)."""
    per_image = {}
    for image_id in sorted(generated):
        refs = references.get(image_id)
        if refs:
            pick = refs[rng.fork(image_id).randrange(len(refs))]
            per_image[image_id] = metric(generated[image_id], pick)
    if not per_image:
        raise ContractViolation("no image has both a generated scanpath and references")
    return _mean_of_dicts(list(per_image.values())), per_image


def radiologist_benchmark(
    references: dict[str, list[Scanpath]], metric: MetricFn
) -> tuple[dict[str, float], dict[str, dict[str, float]]]:
    """Leave-one-out inter-reader agreement on images with >= 2 readers."""
    per_image = {}
    for image_id in sorted(references):
        refs = references[image_id]
        if len(refs) < 2:
            continue
        rounds = []
        for i, probe in enumerate(refs):
            others = refs[:i] + refs[i + 1 :]
            rounds.append(score_vs_references(probe, others, metric))
        per_image[image_id] = _mean_of_dicts(rounds)
    if not per_image:
        raise ContractViolation("no image has two or more reference readers")
    return _mean_of_dicts(list(per_image.values())), per_image
