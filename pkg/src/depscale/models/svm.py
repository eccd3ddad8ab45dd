"""Kernel SVMs trained with SMO, one-vs-rest multiclass, and k-fold grid search."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericalError, ValidationError

logger = logging.getLogger(__name__)

KERNELS = ("linear", "rbf", "polynomial", "sigmoid")
KKT_TOL = 1e-3
_TAU = 1e-12


class SvmWarning(UserWarning):
    pass


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    gamma: float = 1.0
    degree: int = 3
    coef0: float = 0.0

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ValidationError(f"unknown kernel {self.kind!r}; choose from {KERNELS}")
        if self.kind != "linear" and not self.gamma > 0:
            raise ValidationError(f"{self.kind} kernel needs gamma > 0")

    def __call__(self, A, B):
        A = np.atleast_2d(A)
        B = np.atleast_2d(B)
        if self.kind == "rbf":
            return np.exp(-self.gamma * sq_distances(A, B))
        G = A @ B.T
        if self.kind == "linear":
            return G
        if self.kind == "polynomial":
            return (self.gamma * G + self.coef0) ** self.degree
        return np.tanh(self.gamma * G + self.coef0)

    def from_gram(self, G=None, D2=None):
        """Kernel values from a precomputed Gram or squared-distance matrix."""
        if self.kind == "rbf":
            return np.exp(-self.gamma * D2)
        if self.kind == "linear":
            return G
        if self.kind == "polynomial":
            return (self.gamma * G + self.coef0) ** self.degree
        return np.tanh(self.gamma * G + self.coef0)


def sq_distances(A, B):
    d = (A * A).sum(1)[:, None] - 2.0 * A @ B.T + (B * B).sum(1)[None, :]
    return np.maximum(d, 0.0)


@dataclass
class SmoResult:
    alpha: np.ndarray
    bias: float
    n_iter: int
    kkt_gap: float
    objective: list  # dual objective (to be maximised) after every update


def smo_solve(K, y, C, tol=KKT_TOL, max_iter=100_000):
    """Solve the binary soft-margin dual with SMO.

    ``i`` is the maximal violator and ``j`` the partner with the largest
    second-order objective gain, as in libsvm; iteration stops when
    the violation ``m(alpha) - M(alpha)`` drops below ``tol``.  The decision
    function is ``sum_i alpha_i y_i K(x_i, x) + bias``.
    """
    y = np.asarray(y, dtype=float)
    K = np.asarray(K, dtype=float)
    n = y.size
    Q = (y[:, None] * y[None, :]) * K
    QD = np.diag(Q).copy()
    A = -y[:, None] * Q  # column k: change of -y*G per unit change of alpha_k
    alpha = np.zeros(n)
    G = -np.ones(n)
    pos = y > 0
    score = -y * G
    # score restricted to the I_up / I_low sets, +-inf elsewhere; kept in step
    # with score so each iteration only patches the two updated entries
    up = np.where(pos, alpha < C, alpha > 0)
    low = np.where(pos, alpha > 0, alpha < C)
    m_vals = np.where(up, score, -np.inf)
    M_vals = np.where(low, score, np.inf)
    objective = [0.0]
    obj = 0.0
    gap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        i = int(np.argmax(m_vals))
        gap = m_vals[i] - M_vals.min()
        if gap < tol:
            it -= 1
            break
        # second-order choice of j: largest guaranteed objective gain
        b = m_vals[i] - M_vals
        cand = b > 0
        curv = np.maximum(QD[i] + QD - 2.0 * K[i], _TAU)
        gain = np.where(cand, b * b / curv, -np.inf)
        j = int(np.argmax(gain))
        ai, aj = alpha[i], alpha[j]
        Gi, Gj = -y[i] * score[i], -y[j] * score[j]
        if y[i] != y[j]:
            quad = max(QD[i] + QD[j] + 2.0 * Q[i, j], _TAU)
            delta = (-Gi - Gj) / quad
            diff = ai - aj
            new_i, new_j = ai + delta, aj + delta
            if diff > 0:
                if new_j < 0:
                    new_j, new_i = 0.0, diff
            elif new_i < 0:
                new_i, new_j = 0.0, -diff
            if diff > 0:
                if new_i > C:
                    new_i, new_j = C, C - diff
            elif new_j > C:
                new_j, new_i = C, C + diff
        else:
            quad = max(QD[i] + QD[j] - 2.0 * Q[i, j], _TAU)
            delta = (Gi - Gj) / quad
            total = ai + aj
            new_i, new_j = ai - delta, aj + delta
            if total > C:
                if new_i > C:
                    new_i, new_j = C, total - C
            elif new_j < 0:
                new_j, new_i = 0.0, total
            if total > C:
                if new_j > C:
                    new_j, new_i = C, total - C
            elif new_i < 0:
                new_i, new_j = 0.0, total
        d_i, d_j = new_i - ai, new_j - aj
        alpha[i], alpha[j] = new_i, new_j
        # exact change of -(1/2 a'Qa - e'a) for a two-coordinate step
        obj -= (Gi * d_i + Gj * d_j
                + 0.5 * (QD[i] * d_i * d_i + QD[j] * d_j * d_j) + Q[i, j] * d_i * d_j)
        objective.append(obj)
        inc = A[:, i] * d_i + A[:, j] * d_j
        score += inc
        m_vals += inc
        M_vals += inc
        for k in (i, j):
            a = alpha[k]
            if pos[k]:
                m_vals[k] = score[k] if a < C else -np.inf
                M_vals[k] = score[k] if a > 0 else np.inf
            else:
                m_vals[k] = score[k] if a > 0 else -np.inf
                M_vals[k] = score[k] if a < C else np.inf
    else:
        warnings.warn(f"SMO hit max_iter={max_iter} with KKT gap {gap:.3g}", SvmWarning)
    G = -y * score
    if not np.all(np.isfinite(G)):
        raise NumericalError("SMO gradient became non-finite")

    yG = y * G
    at_upper = alpha >= C
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        rho = float(yG[free].mean())
    else:
        ub_mask = (at_upper & ~pos) | (at_lower & pos)
        lb_mask = (at_upper & pos) | (at_lower & ~pos)
        ub = yG[ub_mask].min() if ub_mask.any() else np.inf
        lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2.0) if np.isfinite(ub + lb) else float(
            ub if np.isfinite(ub) else lb)
    return SmoResult(alpha, -rho, it, float(max(gap, 0.0)), objective)


@dataclass
class BinaryProblem:
    coef: np.ndarray  # alpha_i * y_i over the training rows
    bias: float
    kkt_gap: float
    n_iter: int


def fit_ovr(K, y, classes, C, tol=KKT_TOL):
    """One-vs-rest SMO problems over a precomputed training kernel matrix."""
    problems = []
    for c in classes:
        yb = np.where(y == c, 1.0, -1.0)
        res = smo_solve(K, yb, C, tol=tol)
        problems.append(BinaryProblem(res.alpha * yb, res.bias, res.kkt_gap, res.n_iter))
    return problems


def ovr_decision(K_cross, problems):
    coefs = np.stack([p.coef for p in problems], axis=1)
    bias = np.array([p.bias for p in problems])
    return K_cross @ coefs + bias


def decide_labels(decision, classes):
    """argmax over classes; ``classes`` ascending, so ties go to the smaller label."""
    return np.asarray(classes)[np.argmax(decision, axis=1)]


@dataclass
class SvmModel:
    kernel: KernelSpec
    C: float
    classes: np.ndarray
    support_vectors: np.ndarray      # standardized rows
    dual_coef: np.ndarray            # (n_sv, n_problems)
    bias: np.ndarray                 # (n_problems,)
    mean: np.ndarray
    scale: np.ndarray
    kkt_gaps: list = field(default_factory=list)
    seed: int = 0

    @property
    def n_features(self):
        return self.mean.size

    @property
    def constant(self):
        return self.classes.size == 1

    def standardize(self, X):
        return (X - self.mean) / self.scale

    def decision_function(self, X):
        X = _check_features(X, self.n_features)
        if self.constant:
            return np.zeros((X.shape[0], 1))
        Kx = self.kernel(self.standardize(X), self.support_vectors)
        return Kx @ self.dual_coef + self.bias

    def to_dict(self):
        return {
            "kind": "svm",
            "kernel": {"kind": self.kernel.kind, "gamma": self.kernel.gamma,
                       "degree": self.kernel.degree, "coef0": self.kernel.coef0},
            "C": self.C,
            "classes": self.classes.tolist(),
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "bias": self.bias.tolist(),
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "kkt_gaps": list(self.kkt_gaps),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        n_feat = len(d["mean"])
        return cls(
            kernel=KernelSpec(**d["kernel"]),
            C=float(d["C"]),
            classes=np.asarray(d["classes"]),
            support_vectors=np.asarray(d["support_vectors"], float).reshape(-1, n_feat),
            dual_coef=np.asarray(d["dual_coef"], float).reshape(-1, max(1, len(d["bias"]))),
            bias=np.asarray(d["bias"], float),
            mean=np.asarray(d["mean"], float),
            scale=np.asarray(d["scale"], float),
            kkt_gaps=list(d.get("kkt_gaps", [])),
            seed=int(d.get("seed", 0)),
        )


def _check_features(X, width=None):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not np.all(np.isfinite(X)):
        raise ValidationError("features contain non-finite values")
    if width is not None and X.shape[1] != width:
        raise ValidationError(f"feature width {X.shape[1]} != trained width {width}")
    return X


def standardization(X):
    mean = X.mean(0)
    scale = X.std(0)
    scale = np.where(scale > 0, scale, 1.0)
    return mean, scale


def svm_train(X, y, C=1.0, kernel=None, seed=0, standardize=True, tol=KKT_TOL):
    """Train a one-vs-rest SVM on integer labels.

    Features are standardized with training mean/std unless ``standardize``
    is false.  Single-class data gives a constant predictor (with a warning).
    ``seed`` is recorded only: SMO with maximal-violating-pair selection is
    deterministic.
    """
    kernel = kernel or KernelSpec()
    X = _check_features(X)
    y = np.asarray(y).astype(int).ravel()
    if X.shape[0] != y.size:
        raise ValidationError("X and y lengths differ")
    if X.shape[0] < 2:
        raise ValidationError("need at least 2 training samples")
    if not C > 0:
        raise ValidationError("C must be positive")
    if standardize:
        mean, scale = standardization(X)
    else:
        mean, scale = np.zeros(X.shape[1]), np.ones(X.shape[1])
    classes = np.unique(y)
    if classes.size == 1:
        warnings.warn(f"single-class training data; constant model predicting {classes[0]}",
                      SvmWarning)
        return SvmModel(kernel, C, classes, np.zeros((0, X.shape[1])), np.zeros((0, 1)),
                        np.zeros(1), mean, scale, [], seed)
    Xs = (X - mean) / scale
    problems = fit_ovr(kernel(Xs, Xs), y, classes, C, tol)
    coefs = np.stack([p.coef for p in problems], axis=1)
    sv = np.flatnonzero(np.any(coefs != 0, axis=1))
    return SvmModel(
        kernel=kernel,
        C=C,
        classes=classes,
        support_vectors=Xs[sv],
        dual_coef=coefs[sv],
        bias=np.array([p.bias for p in problems]),
        mean=mean,
        scale=scale,
        kkt_gaps=[p.kkt_gap for p in problems],
        seed=seed,
    )


def svm_predict(model, X):
    """Predicted labels; decision-value ties resolve to the smaller label."""
    X = _check_features(X, model.n_features)
    if model.constant:
        return np.full(X.shape[0], model.classes[0])
    return decide_labels(model.decision_function(X), model.classes)


# ---------------------------------------------------------------------------
# grid search

DEFAULT_C_EXPONENTS = tuple(range(-5, 16))
DEFAULT_GAMMA_EXPONENTS = tuple(range(-15, 4))
DEFAULT_KERNELS = ("rbf", "linear")


def stratified_folds(y, folds, seed):
    """Fold index per sample.  Falls back to plain shuffled folds (with a
    warning) when some class has fewer members than ``folds``."""
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    assign = np.empty(y.size, dtype=int)
    classes, counts = np.unique(y, return_counts=True)
    if counts.min() < folds:
        warnings.warn(
            f"class with {counts.min()} members < {folds} folds; using unstratified folds",
            SvmWarning,
        )
        order = rng.permutation(y.size)
        assign[order] = np.arange(y.size) % folds
        return assign
    offset = 0
    for c in classes:
        idx = rng.permutation(np.flatnonzero(y == c))
        assign[idx] = (np.arange(idx.size) + offset) % folds
        offset += idx.size
    return assign


@dataclass
class GridCell:
    kernel: str
    c_exp: float
    g_exp: object  # None for the linear kernel
    accuracy: float
    fold_accuracies: list

    def as_row(self):
        return [self.kernel, self.c_exp, "" if self.g_exp is None else self.g_exp,
                self.accuracy] + list(self.fold_accuracies)


@dataclass
class GridSearchResult:
    best: GridCell
    table: list
    exponent: bool = True

    def best_params(self):
        return cell_params(self.best, self.exponent)


def cell_params(cell, exponent=True):
    conv = (lambda v: 2.0 ** v) if exponent else float
    C = conv(cell.c_exp)
    gamma = 1.0 if cell.g_exp is None else conv(cell.g_exp)
    return C, KernelSpec(cell.kernel, gamma)


def grid_search_cv(X, y, c_exponents=DEFAULT_C_EXPONENTS,
                   gamma_exponents=DEFAULT_GAMMA_EXPONENTS, kernels=DEFAULT_KERNELS,
                   folds=5, seed=0, exponent=True, tol=KKT_TOL):
    """k-fold cross-validated accuracy over a (kernel, C, gamma) grid.

    Values are base-2 exponents unless ``exponent`` is false.  The linear
    kernel ignores gamma and gets one row per C.  Best cell: highest mean
    accuracy, then smaller C, then smaller gamma, then kernel order.
    """
    X = _check_features(X)
    y = np.asarray(y).astype(int).ravel()
    if folds < 2:
        raise ValidationError("folds must be >= 2")
    if X.shape[0] < folds:
        raise ValidationError(f"need at least {folds} samples for {folds}-fold CV")
    assign = stratified_folds(y, folds, seed)
    conv = (lambda v: 2.0 ** v) if exponent else float

    fold_data = []
    for f in range(folds):
        tr, te = assign != f, assign == f
        mean, scale = standardization(X[tr])
        A = (X[tr] - mean) / scale
        B = (X[te] - mean) / scale
        fold_data.append({
            "y_tr": y[tr], "y_te": y[te],
            "G": A @ A.T, "Gx": B @ A.T,
            "D2": sq_distances(A, A), "D2x": sq_distances(B, A),
        })

    table = []
    for kind in kernels:
        g_values = [None] if kind == "linear" else list(gamma_exponents)
        for c_exp in c_exponents:
            for g_exp in g_values:
                spec = KernelSpec(kind, 1.0 if g_exp is None else conv(g_exp))
                accs = []
                for fd in fold_data:
                    classes = np.unique(fd["y_tr"])
                    if classes.size == 1:
                        pred = np.full(fd["y_te"].size, classes[0])
                    else:
                        K = spec.from_gram(fd["G"], fd["D2"])
                        Kx = spec.from_gram(fd["Gx"], fd["D2x"])
                        problems = fit_ovr(K, fd["y_tr"], classes, conv(c_exp), tol)
                        pred = decide_labels(ovr_decision(Kx, problems), classes)
                    accs.append(float(np.mean(pred == fd["y_te"])))
                table.append(GridCell(kind, c_exp, g_exp, float(np.mean(accs)), accs))

    order = {k: i for i, k in enumerate(kernels)}
    best = min(table, key=lambda c: (-c.accuracy, c.c_exp,
                                     -np.inf if c.g_exp is None else c.g_exp,
                                     order[c.kernel]))
    return GridSearchResult(best, table, exponent)
