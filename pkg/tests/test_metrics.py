import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scanpathlab.errors import ContractViolation, UndefinedMetricError
from scanpathlab.grid import Fixation, PatchDictionary, Scanpath, random_scanpath
from scanpathlab.metrics import (
    MultiMatchResult,
    ScanMatchConfig,
    auprc,
    auroc,
    macro_scores,
    multimatch,
    needleman_wunsch,
    radiologist_benchmark,
    scanmatch,
    scanmatch_metric,
    score_vs_references,
    set1_scores,
    set2_scores,
)
from scanpathlab.rng import Rng

D = PatchDictionary()


def brute_force_alignment_max(a, b, sub, gap):
    """Independent oracle: enumerate every monotone matching explicitly."""
    m, n = len(a), len(b)
    best = -math.inf
    for k in range(min(m, n) + 1):
        for rows in itertools.combinations(range(m), k):
            for cols in itertools.combinations(range(n), k):
                score = gap * (m + n - 2 * k)
                score += sum(sub(a[i], b[j]) for i, j in zip(rows, cols))
                best = max(best, score)
    return best


# ---------------------------------------------------------------------------
# Needleman-Wunsch
# ---------------------------------------------------------------------------


def test_nw_identical_sequences_identity_sub():
    sub = lambda x, y: 1.0 if x == y else 0.0
    for L in (1, 3, 7):
        seq = list(range(L))
        assert needleman_wunsch(seq, seq, sub, gap=0.0) == L


def test_nw_empty_sequences():
    sub = lambda x, y: 1.0
    assert needleman_wunsch([], [1, 2, 3], sub, gap=0.0) == 0.0
    assert needleman_wunsch([], [1, 2, 3], sub, gap=-2.0) == -6.0
    assert needleman_wunsch([], [], sub, gap=-2.0) == 0.0


@settings(max_examples=300, deadline=None)
@given(
    st.lists(st.integers(0, 2), min_size=0, max_size=5),
    st.lists(st.integers(0, 2), min_size=0, max_size=5),
    st.integers(0, 10**6),
)
def test_nw_matches_brute_force_random_integer_scores(a, b, seed):
    rng = Rng(seed)
    table = np.array([[rng.randrange(9) - 3 for _ in range(3)] for _ in range(3)], dtype=float)
    gap = float(rng.randrange(5) - 2)
    sub = lambda x, y: table[x][y]
    assert needleman_wunsch(a, b, sub, gap) == brute_force_alignment_max(a, b, sub, gap)


# ---------------------------------------------------------------------------
# ScanMatch
# ---------------------------------------------------------------------------


def test_scanmatch_self_is_exactly_one():
    for seed in range(5):
        s = random_scanpath(D, 3 + seed, Rng(seed), "img")
        assert scanmatch(s, s, D) == 1.0


def test_scanmatch_symmetry_fuzz():
    rng = Rng(99)
    for _ in range(1000):
        a = random_scanpath(D, 1 + rng.randrange(8), rng, "a")
        b = random_scanpath(D, 1 + rng.randrange(8), rng, "b")
        assert scanmatch(a, b, D) == scanmatch(b, a, D)


def test_scanmatch_upper_bound():
    rng = Rng(7)
    for _ in range(200):
        a = random_scanpath(D, 1 + rng.randrange(6), rng, "a")
        b = random_scanpath(D, 1 + rng.randrange(6), rng, "b")
        assert scanmatch(a, b, D) <= 1.0 + 1e-12


def test_scanmatch_opposite_corner_rows():
    # two fixations each at patch 0 and patch 15: the substitution score is
    # (tau - 15)/tau = -0.414..., so the optimal alignment takes gaps only
    # and the normalized score is 0 (verified against the enumeration oracle)
    a = Scanpath("i", (D.patch_center(0), D.patch_center(0)))
    b = Scanpath("i", (D.patch_center(15), D.patch_center(15)))
    cfg = ScanMatchConfig()
    tau = cfg.threshold
    assert (tau - 15.0) / tau == pytest.approx(-0.41421356, abs=1e-7)
    sub = lambda i, j: (tau - math.hypot(i // 16 - j // 16, i % 16 - j % 16)) / tau
    oracle = brute_force_alignment_max([0, 0], [15, 15], sub, gap=cfg.gap) / 2.0
    got = scanmatch(a, b, D, cfg)
    assert got == oracle
    assert got == 0.0


def test_scanmatch_requires_nonempty():
    # empty scanpaths cannot even be constructed
    with pytest.raises(ContractViolation):
        Scanpath("b", ())


def test_scanmatch_gap_penalty_changes_score():
    a = random_scanpath(D, 3, Rng(1), "a")
    b = random_scanpath(D, 6, Rng(2), "b")
    s0 = scanmatch(a, b, D, ScanMatchConfig(gap=0.0))
    s1 = scanmatch(a, b, D, ScanMatchConfig(gap=-0.5))
    assert s1 <= s0


# ---------------------------------------------------------------------------
# MultiMatch
# ---------------------------------------------------------------------------


def test_multimatch_self_similarity_exact_ones():
    for seed in range(5):
        s = random_scanpath(D, 4 + seed, Rng(seed), "img")
        r = multimatch(s, s)
        assert (r.vector, r.direction, r.length, r.position) == (1.0, 1.0, 1.0, 1.0)


def test_multimatch_translation():
    rng = Rng(11)
    base = [(rng.uniform(20, 100), rng.uniform(20, 100)) for _ in range(5)]
    a = Scanpath("a", tuple(Fixation(x, y) for x, y in base))
    b = Scanpath("b", tuple(Fixation(x + 10, y + 10) for x, y in base))
    r = multimatch(a, b)
    assert r.vector == 1.0
    assert r.length == 1.0
    assert r.direction == 1.0
    assert r.position == pytest.approx(1.0 - math.hypot(10, 10) / (256 * math.sqrt(2)), abs=1e-12)
    assert r.position < 1.0


def test_multimatch_bounds_fuzz():
    rng = Rng(12)
    for _ in range(1000):
        a = random_scanpath(D, 2 + rng.randrange(7), rng, "a")
        b = random_scanpath(D, 2 + rng.randrange(7), rng, "b")
        r = multimatch(a, b)
        for v in (r.vector, r.direction, r.length, r.position):
            assert 0.0 <= v <= 1.0


def test_multimatch_short_scanpath_error_names_submetrics():
    a = Scanpath("a", (Fixation(1, 1),))
    b = random_scanpath(D, 4, Rng(0), "b")
    with pytest.raises(UndefinedMetricError, match="vector.*direction.*length.*position"):
        multimatch(a, b)


def test_multimatch_antiparallel_saccades():
    a = Scanpath("a", (Fixation(10, 10), Fixation(110, 10)))
    b = Scanpath("b", (Fixation(110, 10), Fixation(10, 10)))
    r = multimatch(a, b)
    assert r.direction == pytest.approx(0.0, abs=1e-12)  # angle pi
    assert r.length == 1.0


# ---------------------------------------------------------------------------
# AUROC / AUPRC
# ---------------------------------------------------------------------------


def pairwise_auroc_oracle(scores, labels):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    total = 0.0
    for sp in pos:
        for sn in neg:
            total += 1.0 if sp > sn else (0.5 if sp == sn else 0.0)
    return total / (len(pos) * len(neg))


def test_auroc_examples():
    assert auroc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert auroc([0.1, 0.2, 0.8, 0.9], [1, 1, 0, 0]) == 0.0
    assert auroc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75, abs=1e-12)


def test_auroc_single_class_rejected():
    with pytest.raises(UndefinedMetricError):
        auroc([0.1, 0.9], [1, 1])


def test_auroc_matches_pairwise_oracle_on_random_instances():
    for seed in range(100):
        rng = Rng(seed)
        n = 2 + rng.randrange(19)
        labels = [rng.randrange(2) for _ in range(n)]
        if len(set(labels)) < 2:
            labels[0], labels[1] = 0, 1
        scores = [round(rng.random(), 1) for _ in range(n)]  # coarse: forces ties
        assert auroc(scores, labels) == pytest.approx(
            pairwise_auroc_oracle(scores, labels), abs=1e-12
        )


def test_auroc_invariant_under_monotone_transforms():
    rng = Rng(5)
    scores = np.array([rng.uniform(-2, 2) for _ in range(40)])
    labels = np.array([rng.randrange(2) for _ in range(40)])
    labels[:2] = (0, 1)
    base = auroc(scores, labels)
    assert auroc(scores**3, labels) == pytest.approx(base, abs=1e-12)
    assert auroc(2.0 * scores + 7.0, labels) == pytest.approx(base, abs=1e-12)


def test_auprc_examples():
    assert auprc([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0
    assert auprc([0.5, 0.4, 0.3, 0.1], [0, 0, 0, 1]) == pytest.approx(0.25, abs=1e-12)
    assert auprc([0.9, 0.8, 0.7], [1, 0, 1]) == pytest.approx((1.0 + 2.0 / 3.0) / 2.0, abs=1e-12)


def test_auprc_no_positives_rejected():
    with pytest.raises(UndefinedMetricError):
        auprc([0.5, 0.4], [0, 0])


def test_macro_scores_skips_degenerate_classes():
    scores = np.array([[0.9, 0.5], [0.1, 0.5], [0.8, 0.5], [0.2, 0.5]])
    labels = np.array([[1, 0], [0, 0], [1, 0], [0, 0]])
    mac_auroc, mac_auprc, per_class, skipped = macro_scores(scores, labels)
    assert skipped == [1]
    assert per_class[0][0] == 1.0
    assert mac_auroc == 1.0


def test_macro_scores_drops_uncertain_cells():
    scores = np.array([[0.9], [0.8], [0.1]])
    labels = np.array([[1], [-1], [0]])
    mac_auroc, _, per_class, skipped = macro_scores(scores, labels)
    assert mac_auroc == 1.0
    assert skipped == []


# ---------------------------------------------------------------------------
# evaluation protocols
# ---------------------------------------------------------------------------


def _paths(n, seed, image_id="img"):
    rng = Rng(seed)
    return [random_scanpath(D, 4, rng, image_id) for _ in range(n)]


def test_single_reference_equals_raw_score():
    metric = scanmatch_metric(D)
    gen = _paths(1, 0)[0]
    ref = _paths(1, 1)[0]
    assert score_vs_references(gen, [ref], metric) == metric(gen, ref)


def test_two_identical_references_average_to_pairwise():
    metric = scanmatch_metric(D)
    gen = _paths(1, 2)[0]
    ref = _paths(1, 3)[0]
    out = score_vs_references(gen, [ref, ref], metric)
    assert out["scanmatch"] == pytest.approx(metric(gen, ref)["scanmatch"], abs=1e-15)


def test_empty_reference_set_rejected():
    with pytest.raises(ContractViolation):
        score_vs_references(_paths(1, 0)[0], [], scanmatch_metric(D))


def test_radiologist_benchmark_identical_readers():
    refs = {"img": [_paths(1, 5, "img")[0]] * 3}
    summary, per_image = radiologist_benchmark(refs, scanmatch_metric(D))
    assert summary["scanmatch"] == 1.0
    assert per_image["img"]["scanmatch"] == 1.0


def test_set1_mean_over_references_then_images():
    metric = scanmatch_metric(D)
    gen = {"a": _paths(1, 6, "a")[0], "b": _paths(1, 7, "b")[0]}
    refs = {"a": _paths(2, 8, "a"), "b": _paths(3, 9, "b")}
    summary, per_image = set1_scores(gen, refs, metric)
    expect_a = np.mean([metric(gen["a"], r)["scanmatch"] for r in refs["a"]])
    expect_b = np.mean([metric(gen["b"], r)["scanmatch"] for r in refs["b"]])
    assert per_image["a"]["scanmatch"] == pytest.approx(expect_a, abs=1e-12)
    assert summary["scanmatch"] == pytest.approx((expect_a + expect_b) / 2.0, abs=1e-12)


def test_set2_choice_is_seed_stable_per_image():
    metric = scanmatch_metric(D)
    gen = {"a": _paths(1, 10, "a")[0], "b": _paths(1, 11, "b")[0]}
    refs = {"a": _paths(3, 12, "a"), "b": _paths(3, 13, "b")}
    s1, p1 = set2_scores(gen, refs, metric, Rng(42))
    s2, p2 = set2_scores(gen, refs, metric, Rng(42))
    assert p1 == p2
    # reordering the reference dict must not change the per-image choice
    s3, p3 = set2_scores(gen, dict(reversed(list(refs.items()))), metric, Rng(42))
    assert p1 == p3
