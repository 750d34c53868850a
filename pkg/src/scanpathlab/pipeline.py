"""Experiment orchestration: the stages behind every CLI subcommand.

Each stage writes a self-describing artifact directory (config copy,
config hash, seed) and is deterministic given config + seed.  Stage
failures re-raise as PipelineError with the stage name attached.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from . import classifier as C
from . import features as F
from . import metrics as M
from . import predictor as P
from .checkpoint import (
    check_config_hash,
    load_checkpoint,
    restore_params,
    save_checkpoint,
)
from .config import config_hash, write_run_info
from .dataset import DatasetIndex, ingest
from .errors import ContractViolation, FormatError, PipelineError
from .grid import (
    PatchDictionary,
    Scanpath,
    load_scanpaths,
    mean_scanpath_length,
    random_scanpath,
    save_scanpaths,
)
from .rng import Rng
from .synth import SyntheticSpec, gen_synthetic
from .tensor_io import read_tensor


def _stage(name: str):
    def deco(fn):
        def wrapper(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except PipelineError:
                raise
            except Exception as exc:
                raise PipelineError(f"{name}: {exc}") from exc

        wrapper.__name__ = fn.__name__
        wrapper.__doc__ = fn.__doc__
        return wrapper

    return deco


def _fmt(v: float) -> str:
    return repr(float(v))


# ---------------------------------------------------------------------------
# dataset and feature plumbing
# ---------------------------------------------------------------------------


def load_dataset(cfg: dict) -> DatasetIndex:
    root = Path(cfg["data"]["dir"])
    if not root.is_dir():
        raise FormatError(f"data.dir {root} is not a directory")
    feature_dir = root / "features" if cfg["features"]["source"] == "files" else None
    splits = root / "splits.json"
    return ingest(
        root / "scanpaths.jsonl",
        root / "labels.csv",
        feature_dir,
        splits_file=splits if splits.is_file() else None,
    )


class FeatureProvider:
    """Per-image C x 8 x 8 maps from TNSR files or the seeded CNN stand-in."""

    def __init__(self, cfg: dict, index: DatasetIndex):
        self.cfg = cfg
        self.index = index
        self.channels = int(cfg["features"]["channels"])
        self._cache: dict[str, np.ndarray] = {}
        self._cnn = None
        if cfg["features"]["source"] == "cnn":
            ccfg = F.CnnConfig(
                channels=tuple(cfg["features"]["cnn_channels"]),
                image_size=int(cfg["features"]["image_size"]),
            )
            if ccfg.out_channels != self.channels:
                raise ContractViolation(
                    f"features.channels {self.channels} != last cnn channel {ccfg.out_channels}"
                )
            self._cnn = F.CnnParams(ccfg, Rng(int(cfg["seed"])).fork("cnn-init"))

    def feature_map(self, image_id: str) -> np.ndarray:
        if image_id in self._cache:
            return self._cache[image_id]
        item = self.index[image_id]
        if self._cnn is None:
            fmap = F.load_feature_file(item.feature_path, (self.channels, 8, 8))
        else:
            if item.image_path is None:
                img_path = Path(self.cfg["data"]["dir"]) / "images" / f"{image_id}.pgm"
            else:
                img_path = item.image_path
            raw = F.read_pgm(img_path)
            img, _ = F.preprocess_image(raw)
            fmap = F.extract_features(img, self._cnn)[0].data
        self._cache[image_id] = fmap
        return fmap

    def pooled(self, image_id: str) -> np.ndarray:
        return self.feature_map(image_id).mean(axis=(1, 2))

    def pooling_map(self, image_id: str, pool_grid: int) -> np.ndarray:
        fmap = self.feature_map(image_id)
        return F.upscale2x(fmap).data if pool_grid == 16 else fmap


# ---------------------------------------------------------------------------
# scanpath selection / generation for classifier training
# ---------------------------------------------------------------------------


def _one_recorded(item, seed: int) -> Scanpath:
    if not item.scanpaths:
        raise ContractViolation(f"image {item.image_id} has no recorded scanpath")
    if len(item.scanpaths) == 1:
        return item.scanpaths[0]
    pick = Rng(seed).fork(f"pick:{item.image_id}").randrange(len(item.scanpaths))
    return item.scanpaths[pick]


def _random_length(cfg: dict, index: DatasetIndex) -> int:
    n = int(cfg["random_baseline"]["length"])
    if n > 0:
        return n
    train_paths = [s for i in index.ids("train") for s in index[i].scanpaths]
    return mean_scanpath_length(train_paths)


def scanpaths_for_classifier(
    cfg: dict, index: DatasetIndex, generated: dict[str, Scanpath] | None
) -> dict[str, Scanpath]:
    """Exactly one scanpath per image, per classifier.scanpath_source."""
    source = cfg["classifier"]["scanpath_source"]
    seed = int(cfg["seed"])
    d = PatchDictionary()
    out: dict[str, Scanpath] = {}
    if source == "generated":
        if generated is None:
            raise ContractViolation("generated scanpaths required but not supplied")
        missing = [i for i in index.ids() if i not in generated]
        if missing:
            raise ContractViolation(f"no generated scanpath for {', '.join(missing[:5])}")
        out = dict(generated)
    elif source == "recorded":
        for image_id in index.ids():
            out[image_id] = _one_recorded(index[image_id], seed)
    else:  # random
        n = _random_length(cfg, index)
        base = Rng(seed)
        for image_id in index.ids():
            out[image_id] = random_scanpath(d, n, base.fork(f"rand:{image_id}"), image_id)
    return out


def build_classifier_samples(
    cfg: dict,
    index: DatasetIndex,
    provider: FeatureProvider,
    scanpaths: dict[str, Scanpath],
    split: str,
) -> list[C.ClassifierSample]:
    d = PatchDictionary()
    pool_grid = int(cfg["classifier"]["pool_grid"])
    samples = []
    for image_id in index.ids(split):
        item = index[image_id]
        pmap = provider.pooling_map(image_id, pool_grid)
        keys = d.encode_scanpath(scanpaths[image_id])[:-1]
        thetas = [F.pool_at(pmap, k, grid=pool_grid).data for k in keys]
        samples.append(
            C.ClassifierSample(image_id, provider.pooled(image_id), thetas, item.labels)
        )
    return samples


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------


@_stage("gen-synth")
def cmd_gen_synth(cfg: dict, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    synth_cfg = dict(cfg["synth"])
    synth_cfg["split_fracs"] = tuple(synth_cfg["split_fracs"])
    if synth_cfg.get("active_max") is not None:
        synth_cfg["active_max"] = int(synth_cfg["active_max"])
    spec = SyntheticSpec(**synth_cfg)
    gen_synthetic(spec, Rng(int(cfg["seed"])), out)
    write_run_info(out, cfg)
    return out


def _predictor_from_cfg(cfg: dict, rng: Rng) -> P.PredictorParams:
    pcfg = P.PredictorConfig(
        feat_dim=int(cfg["features"]["channels"]),
        embed_dim=int(cfg["predictor"]["embed_dim"]),
        hidden_dim=int(cfg["predictor"]["hidden_dim"]),
    )
    return P.PredictorParams(pcfg, rng)


@_stage("train-predictor")
def cmd_train_predictor(cfg: dict, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    index = load_dataset(cfg)
    provider = FeatureProvider(cfg, index)
    d = PatchDictionary()
    seed = int(cfg["seed"])
    samples = []
    for image_id in index.ids("train"):
        item = index[image_id]
        if not item.scanpaths:
            continue
        s = _one_recorded(item, seed)
        samples.append((provider.pooled(image_id), d.encode_scanpath(s)))
    if not samples:
        raise ContractViolation("no training scanpaths available")
    rng = Rng(seed).fork("train-predictor")
    params = _predictor_from_cfg(cfg, rng.fork("init"))
    tr = P.PredictorTrainConfig(
        lr=float(cfg["predictor"]["lr"]),
        epochs=int(cfg["predictor"]["epochs"]),
        batch_size=int(cfg["predictor"]["batch_size"]),
    )
    state, log = P.train_predictor(samples, params, tr, rng.fork("order"))
    write_run_info(out, cfg)
    save_checkpoint(
        out,
        params.params(),
        state,
        {
            "config_hash": config_hash(cfg),
            "seed": seed,
            "epoch": len(log.epoch_losses),
            "step": log.steps,
            "valid_metric": None,
            "model": "predictor",
        },
    )
    (out / "loss_log.json").write_text(
        json.dumps({"epoch_losses": log.epoch_losses}, sort_keys=True) + "\n"
    )
    return out


def load_predictor(cfg: dict, ckpt_dir: str | Path) -> P.PredictorParams:
    values, _, manifest = load_checkpoint(ckpt_dir)
    check_config_hash(manifest, config_hash(cfg), ckpt_dir)
    if manifest.get("model") != "predictor":
        raise FormatError(f"{ckpt_dir}: not a predictor checkpoint")
    params = _predictor_from_cfg(cfg, Rng(0))
    restore_params(params.params(), values)
    return params


def generate_scanpaths(
    cfg: dict, params: P.PredictorParams, provider: FeatureProvider, image_ids: list[str]
) -> dict[str, Scanpath]:
    """Greedy-decoded scanpath per image; an immediate END falls back to the
    most probable first patch so every image keeps one usable fixation."""
    d = PatchDictionary()
    dcfg = P.DecodeConfig(max_len=int(cfg["predictor"]["max_len"]))
    out = {}
    for image_id in image_ids:
        feat = provider.pooled(image_id)
        keys = P.decode_greedy(params, feat, dcfg)
        spatial = [k for k in keys if k != P.END_KEY]
        if not spatial:
            spatial = [int(np.argmax(P.first_step_probs(params, feat)[:-1]))]
        out[image_id] = d.scanpath_from_keys(spatial, image_id, reader_id="model")
    return out


@_stage("predict-scanpaths")
def cmd_predict_scanpaths(
    cfg: dict, ckpt_dir: str | Path, out_dir: str | Path, split: str | None = None
) -> Path:
    out = Path(out_dir)
    index = load_dataset(cfg)
    provider = FeatureProvider(cfg, index)
    params = load_predictor(cfg, ckpt_dir)
    ids = index.ids(split) if split else index.ids()
    generated = generate_scanpaths(cfg, params, provider, ids)
    out.mkdir(parents=True, exist_ok=True)
    write_run_info(out, cfg)
    path = out / "generated.jsonl"
    save_scanpaths(path, [generated[i] for i in sorted(generated)])
    return path


def _classifier_from_cfg(cfg: dict, rng: Rng) -> C.ClassifierParams:
    ccfg = C.ClassifierConfig(
        feat_dim=int(cfg["features"]["channels"]),
        hidden_dim=int(cfg["classifier"]["hidden_dim"]),
        attention=bool(cfg["classifier"]["attention"]),
        pool_grid=int(cfg["classifier"]["pool_grid"]),
    )
    return C.ClassifierParams(ccfg, rng)


@_stage("train-classifier")
def cmd_train_classifier(
    cfg: dict,
    out_dir: str | Path,
    generated_file: str | Path | None = None,
    variant: str = "with",
) -> Path:
    if variant not in ("with", "without"):
        raise ContractViolation("variant must be 'with' or 'without'")
    out = Path(out_dir)
    index = load_dataset(cfg)
    provider = FeatureProvider(cfg, index)
    seed = int(cfg["seed"])
    rng = Rng(seed).fork(f"train-classifier-{variant}")

    if variant == "with":
        generated = None
        if cfg["classifier"]["scanpath_source"] == "generated":
            if generated_file is None:
                raise ContractViolation("scanpath_source=generated needs a generated.jsonl")
            loaded = load_scanpaths(generated_file)
            generated = {s.image_id: s for s in loaded}
        chosen = scanpaths_for_classifier(cfg, index, generated)
        train = build_classifier_samples(cfg, index, provider, chosen, "train")
        valid = build_classifier_samples(cfg, index, provider, chosen, "valid")
        model = _classifier_from_cfg(cfg, rng.fork("init"))

        def valid_metric(m) -> float:
            mat = np.stack([C.infer_probs(m, s.fv, s.thetas) for s in valid])
            labs = np.stack([s.labels for s in valid])
            return M.macro_scores(mat, labs)[0]

    else:
        train = [
            C.ClassifierSample(i, provider.pooled(i), [], index[i].labels)
            for i in index.ids("train")
        ]
        valid = [
            C.ClassifierSample(i, provider.pooled(i), [], index[i].labels)
            for i in index.ids("valid")
        ]
        model = C.VisualOnlyParams(int(cfg["features"]["channels"]), rng.fork("init"))

        def valid_metric(m) -> float:
            mat = np.stack([C.infer_probs_visual(m, s.fv) for s in valid])
            labs = np.stack([s.labels for s in valid])
            return M.macro_scores(mat, labs)[0]

    tr = C.ClassifierTrainConfig(
        lr=float(cfg["classifier"]["lr"]),
        epochs=int(cfg["classifier"]["epochs"]),
        batch_size=int(cfg["classifier"]["batch_size"]),
        lr_decay=float(cfg["classifier"]["lr_decay"]),
        lr_period=int(cfg["classifier"]["lr_period"]),
    )
    metric = valid_metric if valid else None
    state, log = C.train_classifier(model, train, tr, rng.fork("order"), valid_metric=metric)
    write_run_info(out, cfg)
    save_checkpoint(
        out,
        model.params(),
        state,
        {
            "config_hash": config_hash(cfg),
            "seed": seed,
            "epoch": log.best_epoch if metric else len(log.epoch_losses),
            "step": log.steps,
            "valid_metric": (max(log.valid_scores) if log.valid_scores else None),
            "model": f"classifier_{variant}",
        },
    )
    (out / "loss_log.json").write_text(
        json.dumps(
            {"epoch_losses": log.epoch_losses, "valid_scores": log.valid_scores,
             "best_epoch": log.best_epoch},
            sort_keys=True,
        )
        + "\n"
    )
    return out


def load_classifier(cfg: dict, ckpt_dir: str | Path):
    """Returns (model, variant) for a classifier checkpoint."""
    values, _, manifest = load_checkpoint(ckpt_dir)
    check_config_hash(manifest, config_hash(cfg), ckpt_dir)
    model_tag = manifest.get("model", "")
    if model_tag == "classifier_with":
        model = _classifier_from_cfg(cfg, Rng(0))
    elif model_tag == "classifier_without":
        model = C.VisualOnlyParams(int(cfg["features"]["channels"]), Rng(0))
    else:
        raise FormatError(f"{ckpt_dir}: not a classifier checkpoint")
    restore_params(model.params(), values)
    return model, model_tag.removeprefix("classifier_")


@_stage("classify")
def cmd_classify(
    cfg: dict,
    ckpt_dir: str | Path,
    out_dir: str | Path,
    split: str = "test",
    generated_file: str | Path | None = None,
) -> Path:
    out = Path(out_dir)
    index = load_dataset(cfg)
    provider = FeatureProvider(cfg, index)
    model, variant = load_classifier(cfg, ckpt_dir)
    ids = index.ids(split)
    if variant == "with":
        generated = None
        if cfg["classifier"]["scanpath_source"] == "generated":
            if generated_file is None:
                raise ContractViolation("scanpath_source=generated needs a generated.jsonl")
            generated = {s.image_id: s for s in load_scanpaths(generated_file)}
        chosen = scanpaths_for_classifier(cfg, index, generated)
        samples = build_classifier_samples(cfg, index, provider, chosen, split)
        rows = {s.image_id: C.infer_probs(model, s.fv, s.thetas) for s in samples}
    else:
        rows = {i: C.infer_probs_visual(model, provider.pooled(i)) for i in ids}
    out.mkdir(parents=True, exist_ok=True)
    write_run_info(out, cfg)
    path = out / "scores.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id"] + [f"c{i + 1:02d}" for i in range(C.N_CLASSES)])
        for image_id in sorted(rows):
            writer.writerow([image_id] + [_fmt(v) for v in rows[image_id]])
    return path


def read_scores_csv(path: str | Path) -> dict[str, np.ndarray]:
    out = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "image_id" or len(header) != C.N_CLASSES + 1:
            raise FormatError(f"{path}: bad scores header")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != C.N_CLASSES + 1:
                raise FormatError(f"{path}:{lineno}: expected {C.N_CLASSES + 1} cells")
            out[row[0]] = np.array([float(v) for v in row[1:]])
    return out


@_stage("eval-classifier")
def cmd_eval_classifier(
    cfg: dict,
    with_scores: str | Path,
    without_scores: str | Path,
    out_dir: str | Path,
    split: str = "test",
) -> dict:
    """Side-by-side AUROC/AUPRC report with the % improvement column."""
    out = Path(out_dir)
    index = load_dataset(cfg)
    ids = index.ids(split)
    s_with = read_scores_csv(with_scores)
    s_without = read_scores_csv(without_scores)
    missing = [i for i in ids if i not in s_with or i not in s_without]
    if missing:
        raise ContractViolation(f"scores missing for {', '.join(missing[:5])}")
    labels = np.stack([index[i].labels for i in ids])
    mat_with = np.stack([s_with[i] for i in ids])
    mat_without = np.stack([s_without[i] for i in ids])
    au_b, ap_b, per_b, _ = M.macro_scores(mat_with, labels)
    au_a, ap_a, per_a, skipped = M.macro_scores(mat_without, labels)

    def imprnt(a, b):
        return 100.0 * abs(a - b) / a

    summary = {
        "split": split,
        "auroc": {"without_scanpath": au_a, "with_scanpath": au_b, "improvement_pct": imprnt(au_a, au_b)},
        "auprc": {"without_scanpath": ap_a, "with_scanpath": ap_b, "improvement_pct": imprnt(ap_a, ap_b)},
        "per_class": {
            f"c{d + 1:02d}": {
                "auroc_without": per_a[d][0],
                "auroc_with": per_b[d][0],
                "auprc_without": per_a[d][1],
                "auprc_with": per_b[d][1],
            }
            for d in sorted(per_a)
            if d in per_b
        },
        "skipped_classes": [f"c{d + 1:02d}" for d in skipped],
    }
    out.mkdir(parents=True, exist_ok=True)
    write_run_info(out, cfg)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    with open(out / "report.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "subset", "image_id", "value"])
        for metric, a, b in (("auroc", au_a, au_b), ("auprc", ap_a, ap_b)):
            writer.writerow([metric, f"{split}/without_scanpath", "", _fmt(a)])
            writer.writerow([metric, f"{split}/with_scanpath", "", _fmt(b)])
            writer.writerow([f"{metric}_improvement_pct", split, "", _fmt(imprnt(a, b))])
        for d in sorted(per_a):
            if d not in per_b:
                continue
            name = f"c{d + 1:02d}"
            writer.writerow(["auroc", f"{split}/without_scanpath/{name}", "", _fmt(per_a[d][0])])
            writer.writerow(["auroc", f"{split}/with_scanpath/{name}", "", _fmt(per_b[d][0])])
            writer.writerow(["auprc", f"{split}/without_scanpath/{name}", "", _fmt(per_a[d][1])])
            writer.writerow(["auprc", f"{split}/with_scanpath/{name}", "", _fmt(per_b[d][1])])
    return summary


@_stage("eval-scanpaths")
def cmd_eval_scanpaths(
    cfg: dict, generated_file: str | Path, out_dir: str | Path, split: str = "test"
) -> dict:
    """Set-1/Set-2 scanpath similarity for model, random and inter-reader rows."""
    out = Path(out_dir)
    index = load_dataset(cfg)
    d = PatchDictionary()
    sm_cfg = M.ScanMatchConfig(
        threshold=float(cfg["scanmatch"]["threshold"]), gap=float(cfg["scanmatch"]["gap"])
    )
    metric = M.combined_metric(d, sm_cfg)
    ids = [i for i in index.ids(split) if index[i].scanpaths]
    if not ids:
        raise ContractViolation(f"split {split!r} has no reference scanpaths")
    references = {i: index[i].scanpaths for i in ids}
    generated = {s.image_id: s for s in load_scanpaths(generated_file) if s.image_id in references}
    if not generated:
        raise ContractViolation("no generated scanpath matches the evaluated split")

    seed = int(cfg["seed"])
    n_rand = _random_length(cfg, index)
    base = Rng(seed)
    randoms = {i: random_scanpath(d, n_rand, base.fork(f"rand:{i}"), i) for i in ids}

    summary: dict = {"split": split, "set1": {}, "set2": {}}
    per_image_rows: list[tuple[str, str, str, float]] = []

    def add(setname: str, method: str, scores: dict, per_image: dict) -> None:
        summary[setname][method] = scores
        for image_id in sorted(per_image):
            for metric_name in sorted(per_image[image_id]):
                per_image_rows.append(
                    (metric_name, f"{setname}/{method}", image_id, per_image[image_id][metric_name])
                )

    multi = {i: refs for i, refs in references.items() if len(refs) >= 2}
    if multi:
        gen1 = {i: s for i, s in generated.items() if i in multi}
        rnd1 = {i: s for i, s in randoms.items() if i in multi}
        add("set1", "model", *M.set1_scores(gen1, multi, metric))
        add("set1", "random", *M.set1_scores(rnd1, multi, metric))
        add("set1", "radiologist", *M.radiologist_benchmark(multi, metric))
    rng_set2 = Rng(seed).fork("set2")
    add("set2", "model", *M.set2_scores(generated, references, metric, rng_set2))
    add("set2", "random", *M.set2_scores(randoms, references, metric, rng_set2))

    out.mkdir(parents=True, exist_ok=True)
    write_run_info(out, cfg)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    with open(out / "report.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "subset", "image_id", "value"])
        for setname in ("set1", "set2"):
            for method in sorted(summary[setname]):
                for metric_name in sorted(summary[setname][method]):
                    writer.writerow(
                        [metric_name, f"{setname}/{method}", "", _fmt(summary[setname][method][metric_name])]
                    )
        for metric_name, subset, image_id, value in per_image_rows:
            writer.writerow([metric_name, subset, image_id, _fmt(value)])
    return summary


@_stage("gradcheck")
def cmd_gradcheck(n_seeds: int = 20, tol: float = 1e-4) -> tuple[bool, list[str]]:
    from .gradcheck import run_suite

    results = run_suite(n_seeds=n_seeds, tol=tol)
    by_name: dict[str, list] = {}
    for r in results:
        by_name.setdefault(r.name, []).append(r)
    lines = []
    ok = True
    for name in sorted(by_name):
        worst = max(by_name[name], key=lambda r: r.max_rel_err)
        passed = all(r.ok for r in by_name[name])
        ok &= passed
        lines.append(
            f"{'PASS' if passed else 'FAIL'} {name}: worst rel err {worst.max_rel_err:.3e} "
            f"(seed {worst.seed}, tol {tol:g}, {len(by_name[name])} seeds)"
        )
    return ok, lines


@_stage("run-all")
def run_all(cfg: dict, out_dir: str | Path) -> dict:
    """Predictor training, scanpath generation, both classifiers, reports."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_run_info(out, cfg)
    pred_ckpt = cmd_train_predictor(cfg, out / "predictor")
    generated = cmd_predict_scanpaths(cfg, pred_ckpt, out / "scanpaths")
    with_ckpt = cmd_train_classifier(cfg, out / "classifier_with", generated, "with")
    without_ckpt = cmd_train_classifier(cfg, out / "classifier_without", None, "without")
    scores_with = cmd_classify(cfg, with_ckpt, out / "classify_with", "test", generated)
    scores_without = cmd_classify(cfg, without_ckpt, out / "classify_without", "test")
    table2 = cmd_eval_classifier(cfg, scores_with, scores_without, out / "eval_classifier")
    table1 = cmd_eval_scanpaths(cfg, generated, out / "eval_scanpaths")
    summary = {"classification": table2, "scanpaths": table1}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary
