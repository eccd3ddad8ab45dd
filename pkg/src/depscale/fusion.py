"""Late fusion of per-modality PHQ-8 totals and RMSE/MAE evaluation."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus.tables import format_float, format_meta, parse_meta
from .errors import MissingInputError, ParseError, SessionMismatchError, ValidationError

TOTAL_MAX = 24.0
STRATEGIES = ("weighted_mean", "max")
WEIGHT_SUM_TOL = 1e-9
# RMSE values closer than this count as ties in weight_search
TIE_TOL = 1e-12


@dataclass
class PredictionSet:
    modality: str
    scores: dict  # session_id -> total

    def __post_init__(self):
        self.scores = {str(k): float(v) for k, v in self.scores.items()}
        for sid, v in self.scores.items():
            if not (0.0 <= v <= TOTAL_MAX):
                raise ValidationError(f"{self.modality}: session {sid} score {v} outside [0, 24]")

    @property
    def session_ids(self):
        return sorted(self.scores)

    def vector(self, session_ids):
        return np.array([self.scores[s] for s in session_ids])

    def __len__(self):
        return len(self.scores)


@dataclass
class FusionSpec:
    strategy: str = "weighted_mean"
    weights: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValidationError(f"fusion strategy must be one of {STRATEGIES}")
        self.weights = {str(k): float(v) for k, v in self.weights.items()}
        if self.strategy == "weighted_mean":
            if not self.weights:
                raise ValidationError("weighted_mean fusion needs weights")
            if any(w < 0 or not math.isfinite(w) for w in self.weights.values()):
                raise ValidationError("fusion weights must be finite and >= 0")
            total = sum(self.weights.values())
            if abs(total - 1.0) > WEIGHT_SUM_TOL:
                raise ValidationError(f"fusion weights sum to {total!r}, not 1")

    @classmethod
    def equal(cls, modalities):
        modalities = list(modalities)
        return cls("weighted_mean", {m: 1.0 / len(modalities) for m in modalities})

    @classmethod
    def parse(cls, text):
        """``max``, ``mean`` or ``weighted_mean:audio=0.5,text=0.5``."""
        text = text.strip()
        if text == "max":
            return cls("max")
        strategy, _, body = text.partition(":")
        if strategy not in ("weighted_mean", "mean"):
            raise ValidationError(f"unknown fusion spec {text!r}")
        weights = {}
        for part in filter(None, (p.strip() for p in body.split(","))):
            name, eq, value = part.partition("=")
            if not eq:
                raise ValidationError(f"fusion weight {part!r} is not name=value")
            try:
                weights[name.strip()] = float(value)
            except ValueError:
                raise ValidationError(f"fusion weight {part!r} is not numeric") from None
        return cls("weighted_mean", weights)

    def format(self):
        if self.strategy == "max":
            return "max"
        return "weighted_mean:" + ",".join(f"{k}={v!r}" for k, v in self.weights.items())


def common_sessions(sets):
    """Shared session ids; raises :class:`SessionMismatchError` if any differ."""
    first = set(sets[0].scores)
    for other in sets[1:]:
        ids = set(other.scores)
        if ids != first:
            raise SessionMismatchError(sorted(first - ids), sorted(ids - first))
    return sorted(first)


def fuse(predictions, spec, modality="fused"):
    """Combine prediction sets session by session; output clipped to [0, 24]."""
    predictions = list(predictions)
    if not predictions:
        raise ValidationError("nothing to fuse")
    ids = common_sessions(predictions)
    P = np.stack([p.vector(ids) for p in predictions])
    if spec.strategy == "max":
        out = P.max(axis=0)
    else:
        names = [p.modality for p in predictions]
        if sorted(names) != sorted(spec.weights):
            raise ValidationError(f"fusion weights cover {sorted(spec.weights)}, "
                                  f"predictions cover {sorted(names)}")
        w = np.array([spec.weights[n] for n in names])
        out = w @ P
    out = np.clip(out, 0.0, TOTAL_MAX)
    return PredictionSet(modality, dict(zip(ids, out.tolist())))


@dataclass
class EvalReport:
    rmse: float
    mae: float
    residuals: dict  # session_id -> prediction - truth
    n_sessions: int

    def __post_init__(self):
        # power-mean inequality; a tiny slack absorbs rounding
        if self.rmse + 1e-12 * max(1.0, self.mae) < self.mae:
            raise ArithmeticError(f"RMSE {self.rmse} < MAE {self.mae}")

    def summary(self):
        return f"RMSE={format_float(self.rmse)} MAE={format_float(self.mae)}"


def _truth_total(t):
    total = getattr(t, "total", t)
    return float(total)


def evaluate(predictions, truth, strict=True):
    """RMSE and MAE of predicted totals against true totals.

    ``truth`` maps session id to :class:`Phq8Labels` or a plain total.  With
    ``strict`` the two must cover the same sessions; otherwise only the
    intersection is scored.
    """
    truth = {str(k): _truth_total(v) for k, v in truth.items()}
    pred_ids, true_ids = set(predictions.scores), set(truth)
    if strict and pred_ids != true_ids:
        raise SessionMismatchError(sorted(pred_ids - true_ids), sorted(true_ids - pred_ids))
    ids = sorted(pred_ids & true_ids)
    if not ids:
        raise ValidationError("no sessions shared between predictions and truth")
    r = predictions.vector(ids) - np.array([truth[s] for s in ids])
    mae = float(np.mean(np.abs(r)))
    # scale by the largest residual so tiny residuals do not underflow when squared
    peak = float(np.max(np.abs(r)))
    rmse = peak * float(np.sqrt(np.mean((r / peak) ** 2))) if peak > 0 else 0.0
    return EvalReport(rmse, mae, dict(zip(ids, r.tolist())), len(ids))


def simplex_grid(n, grid_step):
    """All weight vectors of length ``n`` on the ``grid_step`` lattice summing to 1."""
    if not 0 < grid_step <= 1:
        raise ValidationError("grid_step must lie in (0, 1]")
    steps = round(1.0 / grid_step)
    if abs(steps * grid_step - 1.0) > 1e-9:
        raise ValidationError("1 / grid_step must be an integer")
    rows = []
    for combo in itertools.product(range(steps + 1), repeat=n - 1):
        rest = steps - sum(combo)
        if rest >= 0:
            rows.append(tuple(c / steps for c in combo) + (rest / steps,))
    return sorted(rows)


@dataclass
class WeightRow:
    weights: tuple
    rmse: float
    mae: float


@dataclass
class WeightSearchResult:
    best: FusionSpec
    best_row: WeightRow
    table: list
    modalities: tuple


def weight_search(predictions, truth, grid_step=0.1):
    """Exhaustive search over simplex weights for weighted-mean fusion.

    Best row: lowest RMSE; RMSEs within ``TIE_TOL`` tie and fall back to
    lowest MAE, then the lexicographically smallest weight vector.
    """
    predictions = list(predictions)
    if len(predictions) < 2:
        raise ValidationError("weight search needs at least two prediction sets")
    names = tuple(p.modality for p in predictions)
    if len(set(names)) != len(names):
        raise ValidationError("duplicate modality names")
    table = []
    for w in simplex_grid(len(predictions), grid_step):
        fused = fuse(predictions, FusionSpec("weighted_mean", dict(zip(names, w))))
        rep = evaluate(fused, truth)
        table.append(WeightRow(w, rep.rmse, rep.mae))
    best = table[0]
    for row in table[1:]:
        if row.rmse < best.rmse - TIE_TOL:
            best = row
        elif abs(row.rmse - best.rmse) <= TIE_TOL:
            if row.mae < best.mae - TIE_TOL or (
                    abs(row.mae - best.mae) <= TIE_TOL and row.weights < best.weights):
                best = row
    spec = FusionSpec("weighted_mean", dict(zip(names, best.weights)))
    return WeightSearchResult(spec, best, table, names)


# ---------------------------------------------------------------------------
# files

def write_predictions(path, pset, meta=None):
    buf = io.StringIO()
    buf.write(format_meta({"modality": pset.modality, **(meta or {})}) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["session_id", "score"])
    for sid in pset.session_ids:
        w.writerow([sid, format_float(pset.scores[sid])])
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_predictions(path, modality=None):
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(path, "prediction file")
    meta, body = {}, []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            meta.update(parse_meta(line))
        elif line.strip():
            body.append(line)
    rows = list(csv.reader(body))
    if not rows or [c.strip() for c in rows[0]] != ["session_id", "score"]:
        raise ParseError("prediction file needs a session_id,score header", path)
    scores = {}
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise ParseError("expected 2 columns", path, k)
        if row[0] in scores:
            raise ParseError(f"duplicate session {row[0]}", path, k)
        try:
            scores[row[0].strip()] = float(row[1])
        except ValueError:
            raise ParseError("non-numeric score", path, k) from None
    name = modality or meta.get("modality") or path.stem
    return PredictionSet(name, scores)


def format_report(report, meta=None, weight_table=None, modalities=None):
    """Metadata line, optional weight table, per-session residuals, summary."""
    buf = io.StringIO()
    buf.write(format_meta(meta) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    if weight_table is not None:
        w.writerow([f"weight_{m}" for m in modalities] + ["rmse", "mae"])
        for row in weight_table:
            w.writerow([format_float(x) for x in row.weights]
                       + [format_float(row.rmse), format_float(row.mae)])
        buf.write("\n")
    w.writerow(["session_id", "residual"])
    for sid in sorted(report.residuals):
        w.writerow([sid, format_float(report.residuals[sid])])
    buf.write(report.summary() + "\n")
    return buf.getvalue()


def write_report(path, report, meta=None, weight_table=None, modalities=None):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(format_report(report, meta, weight_table, modalities),
                          encoding="utf-8")
