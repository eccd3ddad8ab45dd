"""One classifier per PHQ-8 item; the predicted total is the sum of items."""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ..corpus.synth import derive_seed
from ..corpus.types import PHQ8_ITEMS
from ..errors import ValidationError
from .mlp import MlpConfig, MlpModel, mlp_predict, mlp_train
from .svm import (DEFAULT_C_EXPONENTS, DEFAULT_GAMMA_EXPONENTS, DEFAULT_KERNELS,
                  KKT_TOL, SvmModel, SvmWarning, grid_search_cv, svm_predict, svm_train)

ENSEMBLE_FORMAT_VERSION = 1
N_ITEMS = len(PHQ8_ITEMS)
MEMBER_KINDS = ("svm", "mlp")


@dataclass
class EnsembleConfig:
    kind: str = "svm"
    c_exponents: tuple = DEFAULT_C_EXPONENTS
    gamma_exponents: tuple = DEFAULT_GAMMA_EXPONENTS
    kernels: tuple = DEFAULT_KERNELS
    folds: int = 5
    seed: int = 0
    exponent: bool = True
    tol: float = KKT_TOL
    mlp: MlpConfig = None
    jobs: int = 1

    def __post_init__(self):
        if self.kind not in MEMBER_KINDS:
            raise ValidationError(f"ensemble kind must be one of {MEMBER_KINDS}")
        self.c_exponents = tuple(self.c_exponents)
        self.gamma_exponents = tuple(self.gamma_exponents)
        self.kernels = tuple(self.kernels)
        if self.kind == "mlp" and self.mlp is None:
            self.mlp = MlpConfig(head="classifier")
        if self.mlp is not None and self.mlp.head != "classifier":
            raise ValidationError("ensemble members need the classifier head")


@dataclass
class ItemEnsemble:
    members: list
    item_names: tuple = PHQ8_ITEMS
    cv_tables: list = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        if len(self.members) != N_ITEMS:
            raise ValidationError(f"an item ensemble needs exactly {N_ITEMS} members, "
                                  f"got {len(self.members)}")

    @property
    def kind(self):
        return "svm" if isinstance(self.members[0], SvmModel) else "mlp"

    def to_dict(self):
        return {
            "format_version": ENSEMBLE_FORMAT_VERSION,
            "kind": self.kind,
            "seed": self.seed,
            "items": list(self.item_names),
            "members": [m.to_dict() for m in self.members],
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format_version") != ENSEMBLE_FORMAT_VERSION:
            raise ValidationError(f"unsupported ensemble format_version {doc.get('format_version')!r}")
        load = SvmModel.from_dict if doc["kind"] == "svm" else MlpModel.from_dict
        return cls([load(m) for m in doc["members"]], tuple(doc["items"]),
                   seed=int(doc.get("seed", 0)))


def _item_matrix(labels):
    """(N, 8) integer item scores from Phq8Labels or raw 8-sequences."""
    rows = [getattr(lab, "items", lab) for lab in labels]
    Y = np.asarray(rows, dtype=int)
    if Y.ndim != 2 or Y.shape[1] != N_ITEMS:
        raise ValidationError(f"labels must provide {N_ITEMS} item scores per session")
    return Y


def _train_member(X, y, config, seed):
    """Returns (model, cv_table_rows)."""
    if config.kind == "mlp":
        if np.unique(y).size == 1:
            warnings.warn(f"constant item labels ({y[0]}); MLP member still trained", SvmWarning)
        return mlp_train(X, y, config.mlp, seed=seed), []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SvmWarning)
        if np.unique(y).size == 1:
            model = svm_train(X, y, seed=seed, tol=config.tol)
            return model, []
    folds = min(config.folds, X.shape[0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SvmWarning)
        result = grid_search_cv(X, y, config.c_exponents, config.gamma_exponents,
                                config.kernels, folds=folds, seed=seed,
                                exponent=config.exponent, tol=config.tol)
    C, kernel = result.best_params()
    model = svm_train(X, y, C=C, kernel=kernel, seed=seed, tol=config.tol)
    return model, [cell.as_row() for cell in result.table]


def _train_member_star(args):
    return _train_member(*args)


def train_item_ensemble(features, labels, config=None):
    """Train one grid-searched classifier per PHQ-8 item.

    Item ``i`` uses seed ``derive_seed(config.seed, "item<i>")`` so members
    are independent and may train in parallel (``config.jobs``).
    """
    config = config or EnsembleConfig()
    X = np.atleast_2d(np.asarray(features, dtype=float))
    Y = _item_matrix(labels)
    if X.shape[0] != Y.shape[0]:
        raise ValidationError("features and labels cover different session counts")
    if X.shape[0] < 2:
        raise ValidationError("need at least 2 labelled sessions")
    if not np.all(np.isfinite(X)):
        raise ValidationError("features contain non-finite values")
    tasks = [(X, Y[:, i], config, derive_seed(config.seed, f"item{i}")) for i in range(N_ITEMS)]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_train_member_star, tasks))
    else:
        results = [_train_member(*t) for t in tasks]
    return ItemEnsemble([r[0] for r in results], cv_tables=[r[1] for r in results],
                        seed=config.seed)


def predict_items(ensemble, features):
    """(N, 8) item predictions in 0..3.

    Members other than :class:`SvmModel` / :class:`MlpModel` are used through
    their ``predict(features)`` method.
    """
    cols = []
    for member in ensemble.members:
        if isinstance(member, SvmModel):
            cols.append(svm_predict(member, features))
        elif isinstance(member, MlpModel):
            cols.append(mlp_predict(member, features))
        else:
            cols.append(np.asarray(member.predict(features)))
    return np.stack(cols, axis=1).astype(int)


def phq8_total(items):
    """Sum of 8 item scores per row, each clipped to 0..3 first."""
    items = np.asarray(items)
    if items.shape[-1] != N_ITEMS:
        raise ValidationError(f"expected {N_ITEMS} item scores")
    return np.clip(items, 0, 3).astype(int).sum(axis=-1)


def predict_phq8_total(ensemble, features):
    """Predicted PHQ-8 total per session, in 0..24."""
    return phq8_total(predict_items(ensemble, features))


def config_to_dict(config):
    d = asdict(config)
    d["c_exponents"] = list(config.c_exponents)
    d["gamma_exponents"] = list(config.gamma_exponents)
    d["kernels"] = list(config.kernels)
    return d
