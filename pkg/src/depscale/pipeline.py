"""Pipeline stages over an output directory.

Layout under ``out``::

    corpus/manifest.json          synthetic sessions (synth)
    labels.csv                    PHQ-8 labels and split per session (extract)
    features/<modality>.csv       one row per session (extract, encode)
    descriptors/<id>.csv          per-frame facial distance descriptors (extract)
    models/gmm.json               GMM over training descriptors (encode)
    models/<modality>_ensemble.json
    predictions/<modality>.csv    predicted totals (predict, fuse)
    reports/                      CV tables, evaluation reports (train, eval)
    meta/<stage>.json             parameters, seeds and format versions

Every stage is deterministic given its inputs and the root seed, so re-runs
produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .audio import audio_feature_vector
from .corpus.manifest import FORMAT_VERSION as MANIFEST_FORMAT_VERSION
from .corpus.manifest import load_manifest
from .corpus.parsing import (merge_channel_frames, parse_channel_file, parse_labels,
                             parse_landmark_file, parse_lld_file, parse_transcript)
from .corpus.synth import derive_seed, generate_corpus
from .corpus.tables import (TABLE_FORMAT_VERSION, NamedVector, format_float, format_meta,
                            parse_meta, read_feature_table, write_feature_table)
from .corpus.types import PHQ8_ITEMS, Phq8Labels
from .errors import MissingInputError, ParseError, ValidationError
from .fisher import GMM_FORMAT_VERSION, GmmModel, fisher_encode, fisher_names, gmm_fit
from .fusion import (FusionSpec, PredictionSet, evaluate, fuse, read_predictions,
                     weight_search, write_predictions, write_report)
from .models.ensemble import (ENSEMBLE_FORMAT_VERSION, EnsembleConfig, ItemEnsemble,
                              config_to_dict, predict_phq8_total, train_item_ensemble)
from .models.mlp import DEFAULT_LR
from .text import text_feature_vector
from .video import (REGION_NAMES, blink_features, channel_statistics, head_motion_features,
                    region_distance_series)

logger = logging.getLogger(__name__)

META_FORMAT_VERSION = 1
EXTRACTED_MODALITIES = ("head", "audio", "text", "stats", "blink")
ALL_MODALITIES = EXTRACTED_MODALITIES + ("fisher",)
DEFAULT_FUSION_MODALITIES = ("audio", "text", "head", "fisher")
DEFAULT_GRID = "c=-1:9:2;g=-9:1:2;k=rbf,linear"

FORMAT_VERSIONS = {
    "manifest": MANIFEST_FORMAT_VERSION,
    "table": TABLE_FORMAT_VERSION,
    "gmm": GMM_FORMAT_VERSION,
    "ensemble": ENSEMBLE_FORMAT_VERSION,
    "meta": META_FORMAT_VERSION,
}


@dataclass
class RunConfig:
    out: Path
    manifest: Path = None
    seed: int = 0
    jobs: int = 1
    k: int = 64
    subsample: int = 3
    fps: float = 30.0
    grid: str = DEFAULT_GRID
    fusion: str = None
    modalities: tuple = None
    sessions: int = 40
    duration: float = 60.0
    folds: int = 5
    weight_step: float = 0.1

    def __post_init__(self):
        self.out = Path(self.out)
        if self.manifest is not None:
            self.manifest = Path(self.manifest)
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")
        if self.jobs < 1:
            raise ValidationError("jobs must be >= 1")
        if self.k < 1:
            raise ValidationError("k must be >= 1")
        if self.subsample < 1:
            raise ValidationError("subsample must be >= 1")
        if not self.fps > 0:
            raise ValidationError("fps must be positive")
        if self.modalities is not None:
            mods = tuple(self.modalities)
            unknown = sorted(set(mods) - set(ALL_MODALITIES))
            if unknown:
                raise ValidationError(f"unknown modalities {unknown}; choose from {ALL_MODALITIES}")
            self.modalities = mods

    def seeds(self):
        tags = ("corpus", "blink", "gmm", "ensemble")
        return {"root": self.seed, **{t: derive_seed(self.seed, t) for t in tags}}

    def path(self, *parts):
        return self.out.joinpath(*parts)


def parse_grid(text):
    """``c=lo:hi[:step];g=...;k=rbf,linear[;scale=exp|raw]`` -> dict.

    Ranges are inclusive.  Values may also be comma lists (``c=1,3,9``).
    """
    grid = {"c": None, "g": None, "k": None, "scale": "exp"}
    for part in filter(None, (p.strip() for p in text.split(";"))):
        key, eq, value = part.partition("=")
        key = key.strip().lower()
        if not eq or key not in grid:
            raise ValidationError(f"bad grid component {part!r}")
        value = value.strip()
        if key == "scale":
            if value not in ("exp", "raw"):
                raise ValidationError("grid scale must be exp or raw")
            grid[key] = value
        elif key == "k":
            grid[key] = tuple(v.strip() for v in value.split(",") if v.strip())
        else:
            grid[key] = _parse_range(value, part)
    if grid["k"] is None:
        grid["k"] = ("rbf", "linear")
    for key, default in (("c", (0,)), ("g", (0,))):
        if grid[key] is None:
            grid[key] = default
    return grid


def _parse_range(value, part):
    try:
        if ":" in value:
            bits = [float(b) for b in value.split(":")]
            if len(bits) not in (2, 3):
                raise ValueError
            lo, hi = bits[:2]
            step = bits[2] if len(bits) == 3 else 1.0
            if step <= 0 or hi < lo:
                raise ValueError
            n = int(np.floor((hi - lo) / step + 1e-9)) + 1
            vals = [lo + i * step for i in range(n)]
        else:
            vals = [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"bad grid range {part!r}") from None
    if not vals:
        raise ValidationError(f"empty grid range {part!r}")
    return tuple(int(v) if float(v).is_integer() else v for v in vals)


def ensemble_config(cfg):
    grid = parse_grid(cfg.grid)
    return EnsembleConfig(kind="svm", c_exponents=grid["c"], gamma_exponents=grid["g"],
                          kernels=grid["k"], folds=cfg.folds,
                          seed=derive_seed(cfg.seed, "ensemble"),
                          exponent=grid["scale"] == "exp", jobs=cfg.jobs)


def write_meta(cfg, stage, params):
    doc = {
        "format_version": META_FORMAT_VERSION,
        "stage": stage,
        "package_version": __version__,
        "format_versions": FORMAT_VERSIONS,
        "seeds": cfg.seeds(),
        "params": params,
    }
    path = cfg.path("meta", f"{stage}.json")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _table_meta(cfg, stage, **extra):
    return {"stage": stage, "seed": cfg.seed, **extra}


# ---------------------------------------------------------------------------
# synth

def run_synth(cfg):
    manifest = generate_corpus(cfg.path("corpus"), n_sessions=cfg.sessions,
                               seed=cfg.seed, duration=cfg.duration)
    write_meta(cfg, "synth", {"sessions": cfg.sessions, "duration": cfg.duration,
                              "manifest": "corpus/manifest.json"})
    return manifest


# ---------------------------------------------------------------------------
# extract

def extract_session(session, fps=30.0, subsample=3, blink_seed=0):
    """All per-session features plus the (T, 10) facial distance descriptors."""
    frames = parse_landmark_file(session.landmarks)
    lld = parse_lld_file(session.lld)
    transcript = parse_transcript(session.transcript)
    channels = merge_channel_frames([parse_channel_file(p) for p in session.channels])
    features = {
        "head": head_motion_features(frames, fps=fps),
        "audio": audio_feature_vector(lld, transcript),
        "text": text_feature_vector(transcript, session.duration).values,
        "stats": channel_statistics(channels.names, channels.values),
        "blink": blink_features(frames, session.duration, seed=blink_seed).vector(),
    }
    descriptors = region_distance_series(frames, subsample=subsample).descriptors()
    return features, descriptors


def _extract_task(args):
    session, fps, subsample, seed = args
    return extract_session(session, fps, subsample, derive_seed(seed, f"blink:{session.session_id}"))


def resolve_manifest(cfg):
    if cfg.manifest is not None:
        return cfg.manifest
    default = cfg.path("corpus", "manifest.json")
    if default.is_file():
        return default
    raise MissingInputError(default, "manifest (pass --manifest or run synth first)")


def write_labels(path, sessions, meta):
    buf = io.StringIO()
    buf.write(format_meta(meta) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["session_id", "split"] + [f"PHQ8_{n}" for n in PHQ8_ITEMS] + ["PHQ8_Score"])
    for s in sessions:
        if s.labels is None:
            continue
        lab = parse_labels(s.labels)
        w.writerow([s.session_id, s.split.value] + list(lab.items) + [lab.total])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


@dataclass
class LabelTable:
    labels: dict  # session_id -> Phq8Labels
    splits: dict  # session_id -> split name

    def ids(self, split=None):
        return sorted(s for s in self.labels if split is None or self.splits[s] == split)


def read_labels(path):
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(path, "label table (run extract first)")
    body = [ln for ln in path.read_text(encoding="utf-8").splitlines()
            if ln.strip() and not ln.startswith("#")]
    rows = list(csv.reader(body))
    if not rows or rows[0][:2] != ["session_id", "split"]:
        raise ParseError("label table needs a session_id,split header", path)
    labels, splits = {}, {}
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != 11:
            raise ParseError("expected 11 columns", path, k)
        try:
            items = [int(v) for v in row[2:10]]
            total = int(row[10])
        except ValueError:
            raise ParseError("non-integer label", path, k) from None
        labels[row[0]] = Phq8Labels(items, total)
        splits[row[0]] = row[1]
    return LabelTable(labels, splits)


def write_descriptors(path, descriptors, meta):
    write_feature_table(path, [str(i) for i in range(descriptors.shape[0])],
                        [NamedVector(list(REGION_NAMES), row) for row in descriptors], meta)


def run_extract(cfg):
    manifest = resolve_manifest(cfg)
    sessions = load_manifest(manifest)
    tasks = [(s, cfg.fps, cfg.subsample, cfg.seed) for s in sessions]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_extract_task, tasks))
    else:
        results = [_extract_task(t) for t in tasks]
    ids = [s.session_id for s in sessions]
    meta = _table_meta(cfg, "extract", fps=cfg.fps, subsample=cfg.subsample)
    for modality in EXTRACTED_MODALITIES:
        write_feature_table(cfg.path("features", f"{modality}.csv"), ids,
                            [r[0][modality] for r in results], {**meta, "modality": modality})
    for sid, (_, desc) in zip(ids, results):
        write_descriptors(cfg.path("descriptors", f"{sid}.csv"), desc, meta)
    cfg.path("labels.csv").parent.mkdir(parents=True, exist_ok=True)
    write_labels(cfg.path("labels.csv"), sessions, meta)
    write_meta(cfg, "extract", {
        "manifest": _rel(manifest, cfg.out), "fps": cfg.fps, "subsample": cfg.subsample,
        "sessions": len(ids), "modalities": list(EXTRACTED_MODALITIES),
        "blink_seed_rule": "derive_seed(root, 'blink:<session_id>')",
    })
    return ids


def _rel(path, base):
    try:
        return Path(path).resolve().relative_to(Path(base).resolve()).as_posix()
    except ValueError:
        return str(path)


# ---------------------------------------------------------------------------
# encode

def read_descriptors(cfg, sid):
    return read_feature_table(cfg.path("descriptors", f"{sid}.csv")).matrix


def _encode_task(args):
    model_doc, path = args
    model = GmmModel.from_dict(model_doc)
    return fisher_encode(model, read_feature_table(path).matrix).values


def run_encode(cfg):
    labels = read_labels(cfg.path("labels.csv"))
    all_ids = sorted(labels.labels)
    train_ids = labels.ids("train")
    if not train_ids:
        raise ValidationError("no training sessions to fit the GMM on")
    pooled = np.vstack([read_descriptors(cfg, sid) for sid in train_ids])
    gmm_seed = derive_seed(cfg.seed, "gmm")
    model = gmm_fit(pooled, K=cfg.k, seed=gmm_seed)
    model.save(cfg.path("models", "gmm.json"),
               extra={"root_seed": cfg.seed, "train_sessions": len(train_ids),
                      "descriptors": list(REGION_NAMES)})
    doc = model.to_dict()
    tasks = [(doc, cfg.path("descriptors", f"{sid}.csv")) for sid in all_ids]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            fvs = list(pool.map(_encode_task, tasks))
    else:
        fvs = [_encode_task(t) for t in tasks]
    names = fisher_names(model.K, model.D)
    write_feature_table(cfg.path("features", "fisher.csv"), all_ids,
                        [NamedVector(names, v) for v in fvs],
                        _table_meta(cfg, "encode", k=cfg.k, gmm_seed=gmm_seed,
                                    modality="fisher"))
    write_meta(cfg, "encode", {"k": cfg.k, "gmm_seed": gmm_seed,
                               "train_descriptors": int(pooled.shape[0]),
                               "em_iterations": len(model.log_likelihoods) - 1,
                               "converged": model.converged,
                               "fisher": "mean+variance blocks, power and L2 normalized"})
    return model


# ---------------------------------------------------------------------------
# train / predict

def available_modalities(cfg):
    if cfg.modalities is not None:
        return cfg.modalities
    found = tuple(m for m in ALL_MODALITIES if cfg.path("features", f"{m}.csv").is_file())
    if not found:
        raise MissingInputError(cfg.path("features"), "feature tables (run extract first)")
    return found


def write_cv_table(path, ensemble, meta):
    buf = io.StringIO()
    buf.write(format_meta(meta) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["item", "kernel", "c", "g", "accuracy", "fold_accuracies"])
    for item, rows in zip(ensemble.item_names, ensemble.cv_tables):
        for kernel, c, g, acc, *folds in rows:
            w.writerow([item, kernel, c, g, format_float(acc),
                        " ".join(format_float(a) for a in folds)])
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def run_train(cfg):
    labels = read_labels(cfg.path("labels.csv"))
    train_ids = labels.ids("train")
    if len(train_ids) < 2:
        raise ValidationError("need at least 2 training sessions")
    config = ensemble_config(cfg)
    trained = {}
    for modality in available_modalities(cfg):
        table = read_feature_table(cfg.path("features", f"{modality}.csv")).subset(train_ids)
        ens = train_item_ensemble(table.matrix, [labels.labels[s] for s in train_ids], config)
        path = cfg.path("models", f"{modality}_ensemble.json")
        doc = ens.to_dict()
        doc.update({"modality": modality, "root_seed": cfg.seed, "feature_names": table.names,
                    "train_sessions": train_ids})
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")
        write_cv_table(cfg.path("reports", f"cv_{modality}.csv"), ens,
                       _table_meta(cfg, "train", modality=modality,
                                   ensemble_seed=config.seed))
        trained[modality] = ens
    cfg_doc = config_to_dict(config)
    cfg_doc.pop("jobs")
    write_meta(cfg, "train", {"modalities": list(trained), "ensemble": cfg_doc,
                              "grid": cfg.grid, "train_sessions": len(train_ids),
                              "mlp_default_learning_rates": DEFAULT_LR,
                              "multiclass": "one-vs-rest, ties to smaller label"})
    return trained


def load_ensemble(path):
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(path, "trained model (run train first)")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc), path) from None
    return ItemEnsemble.from_dict(doc), doc


def run_predict(cfg):
    out = {}
    modalities = cfg.modalities or tuple(
        m for m in ALL_MODALITIES if cfg.path("models", f"{m}_ensemble.json").is_file())
    if not modalities:
        raise MissingInputError(cfg.path("models"), "trained models (run train first)")
    for modality in modalities:
        ens, doc = load_ensemble(cfg.path("models", f"{modality}_ensemble.json"))
        table = read_feature_table(cfg.path("features", f"{modality}.csv"))
        if table.names != doc.get("feature_names", table.names):
            raise ValidationError(f"{modality}: feature columns differ from training")
        totals = predict_phq8_total(ens, table.matrix)
        pset = PredictionSet(modality, dict(zip(table.session_ids, totals.tolist())))
        write_predictions(cfg.path("predictions", f"{modality}.csv"), pset,
                          _table_meta(cfg, "predict"))
        out[modality] = pset
    write_meta(cfg, "predict", {"modalities": list(out)})
    return out


# ---------------------------------------------------------------------------
# fuse / eval

def default_fusion(cfg):
    mods = [m for m in DEFAULT_FUSION_MODALITIES
            if cfg.path("predictions", f"{m}.csv").is_file()]
    if not mods:
        raise MissingInputError(cfg.path("predictions"), "per-modality predictions")
    return FusionSpec.equal(mods)


def run_fuse(cfg):
    spec = FusionSpec.parse(cfg.fusion) if cfg.fusion else default_fusion(cfg)
    if spec.strategy == "max":
        mods = cfg.modalities or tuple(
            m for m in DEFAULT_FUSION_MODALITIES if cfg.path("predictions", f"{m}.csv").is_file())
    else:
        mods = tuple(spec.weights)
    sets = [read_predictions(cfg.path("predictions", f"{m}.csv"), m) for m in mods]
    fused = fuse(sets, spec)
    write_predictions(cfg.path("predictions", "fused.csv"), fused,
                      _table_meta(cfg, "fuse", fusion=spec.format().replace(";", ",")))
    write_meta(cfg, "fuse", {"strategy": spec.strategy, "weights": spec.weights,
                             "modalities": list(mods), "clip": [0, 24]})
    return fused


@dataclass
class EvalRow:
    name: str
    split: str
    n: int
    rmse: float
    mae: float


def _split_eval(pset, labels, ids):
    truth = {s: labels.labels[s] for s in ids}
    sub = PredictionSet(pset.modality, {s: pset.scores[s] for s in ids})
    return evaluate(sub, truth)


def run_eval(cfg, prediction_paths=None, truth_path=None):
    """Evaluate prediction files against labels, overall and per split.

    Predictions must cover exactly the labelled sessions.  A predict-the-mean
    baseline (training-split mean total) is reported alongside.
    """
    labels = read_labels(truth_path or cfg.path("labels.csv"))
    if prediction_paths:
        paths = [Path(p) for p in prediction_paths]
    else:
        paths = [cfg.path("predictions", f"{m}.csv") for m in ALL_MODALITIES + ("fused",)
                 if cfg.path("predictions", f"{m}.csv").is_file()]
        if not paths:
            raise MissingInputError(cfg.path("predictions"), "prediction files")
    sets = [read_predictions(p) for p in paths]
    train_ids = labels.ids("train")
    if not train_ids:
        raise ValidationError("no training sessions for the mean baseline")
    mean_total = float(np.mean([labels.labels[s].total for s in train_ids]))
    baseline = PredictionSet("baseline_mean", {s: mean_total for s in labels.labels})
    rows = []
    meta = _table_meta(cfg, "eval")
    splits = [None] + sorted(set(labels.splits.values()))
    for pset in sets + [baseline]:
        full = evaluate(pset, {s: lab for s, lab in labels.labels.items()})
        write_report(cfg.path("reports", f"eval_{pset.modality}.csv"), full,
                     {**meta, "modality": pset.modality})
        for split in splits:
            ids = labels.ids(split)
            if not ids:
                continue
            rep = _split_eval(pset, labels, ids)
            rows.append(EvalRow(pset.modality, split or "all", rep.n_sessions, rep.rmse, rep.mae))

    search = None
    fusable = [p for p in sets if p.modality in DEFAULT_FUSION_MODALITIES]
    tune_split = "dev" if labels.ids("dev") else "train"
    if len(fusable) >= 2 and not prediction_paths:
        ids = labels.ids(tune_split)
        subs = [PredictionSet(p.modality, {s: p.scores[s] for s in ids}) for p in fusable]
        truth = {s: labels.labels[s] for s in ids}
        search = weight_search(subs, truth, cfg.weight_step)
        best = evaluate(fuse(subs, search.best), truth)
        write_report(cfg.path("reports", "weight_search.csv"), best,
                     {**meta, "split": tune_split, "grid_step": cfg.weight_step},
                     weight_table=search.table, modalities=search.modalities)

    buf = io.StringIO()
    buf.write(format_meta({**meta, "baseline_mean": format_float(mean_total)}) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "split", "n", "rmse", "mae"])
    for r in rows:
        w.writerow([r.name, r.split, r.n, format_float(r.rmse), format_float(r.mae)])
    for r in rows:
        if r.split == "all":
            buf.write(f"{r.name}: RMSE={format_float(r.rmse)} MAE={format_float(r.mae)}\n")
    cfg.path("reports").mkdir(parents=True, exist_ok=True)
    cfg.path("reports", "eval_summary.csv").write_text(buf.getvalue(), encoding="utf-8")
    write_meta(cfg, "eval", {
        "predictions": [_rel(p, cfg.out) for p in paths],
        "baseline_mean": mean_total,
        "weight_search": None if search is None else {
            "split": tune_split, "grid_step": cfg.weight_step,
            "best": search.best.weights},
    })
    return rows


def read_eval_summary(path):
    """Rows of ``reports/eval_summary.csv`` as dicts keyed by (name, split)."""
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(path, "eval summary")
    lines = path.read_text(encoding="utf-8").splitlines()
    meta = parse_meta(lines[0]) if lines and lines[0].startswith("#") else {}
    body = [ln for ln in lines if ln and not ln.startswith("#") and "RMSE=" not in ln]
    out = {}
    for row in csv.DictReader(body):
        out[(row["name"], row["split"])] = {
            "n": int(row["n"]), "rmse": float(row["rmse"]), "mae": float(row["mae"])}
    return out, meta


def run_pipeline(cfg):
    if cfg.manifest is None:
        run_synth(cfg)
    run_extract(cfg)
    run_encode(cfg)
    run_train(cfg)
    run_predict(cfg)
    run_fuse(cfg)
    return run_eval(cfg)
