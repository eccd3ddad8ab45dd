"""k-means, diagonal-covariance GMM (EM) and Fisher-vector encoding.

The Fisher vector keeps the mean and variance gradient blocks only
(``2 * K * D`` values) and by default applies the signed square root and L2
normalisation of the "improved" Fisher vector.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .errors import MissingInputError, NumericalError, ParseError, ValidationError

logger = logging.getLogger(__name__)

GMM_FORMAT_VERSION = 1
DEFAULT_COMPONENTS = 64
VARIANCE_FLOOR_FRACTION = 1e-6
LOG_2PI = np.log(2.0 * np.pi)
_CHUNK = 4096


def _check_data(X, K):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValidationError("descriptors must be a 2-D (N, D) array")
    if not np.all(np.isfinite(X)):
        raise ValidationError("descriptors contain non-finite values")
    if K < 1:
        raise ValidationError("K must be >= 1")
    if X.shape[0] < K:
        raise ValidationError(f"need at least K={K} descriptors, got {X.shape[0]}")
    return X


def _sq_dists(X, C):
    d = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def kmeans_plus_plus(X, K, rng):
    """k-means++ seeding: next centre drawn with probability ~ D(x)^2."""
    n = X.shape[0]
    centres = np.empty((K, X.shape[1]))
    centres[0] = X[rng.integers(n)]
    d2 = ((X - centres[0]) ** 2).sum(1)
    for k in range(1, K):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centres[k] = X[idx]
        d2 = np.minimum(d2, ((X - centres[k]) ** 2).sum(1))
    return centres


@dataclass
class KMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    n_iter: int
    inertia: float


def kmeans(X, K, seed=0, max_iter=300):
    """Lloyd's algorithm from k-means++ seeds.

    Stops once assignments no longer change (or after ``max_iter`` rounds).
    A cluster that empties is re-seeded with the point lying farthest from
    its own centroid.
    """
    X = _check_data(X, K)
    rng = np.random.default_rng(seed)
    C = kmeans_plus_plus(X, K, rng)
    labels = np.full(X.shape[0], -1)
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d = _sq_dists(X, C)
        new = d.argmin(1)
        own = d[np.arange(X.shape[0]), new]
        counts = np.bincount(new, minlength=K)
        for k in np.flatnonzero(counts == 0):
            far = int(own.argmax())
            counts[new[far]] -= 1
            new[far] = k
            counts[k] = 1
            own[far] = -1.0
        if np.array_equal(new, labels):
            break
        labels = new
        for k in range(K):
            C[k] = X[labels == k].mean(0)
    inertia = float(((X - C[labels]) ** 2).sum())
    return KMeansResult(C, labels, n_iter, inertia)


@dataclass
class GmmModel:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    variance_floor: np.ndarray
    seed: int = 0
    log_likelihoods: list = field(default_factory=list)
    converged: bool = False

    @property
    def K(self):
        return self.means.shape[0]

    @property
    def D(self):
        return self.means.shape[1]

    def log_joint(self, X):
        """log(w_k N(x | mu_k, var_k)) for every row of ``X``: shape (N, K)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.D:
            raise ValidationError(f"descriptor width {X.shape[1]} != model D {self.D}")
        # expand (x - mu)^2 / var in coordinates centred on the component
        # means' centroid and scaled by their spread, keeping cancellation small
        centre = self.means.mean(0)
        scale = np.sqrt(self.variances.mean(0))
        Z = (X - centre) / scale
        M = (self.means - centre) / scale
        P = scale * scale / self.variances
        maha = (Z * Z) @ P.T - 2.0 * Z @ (M * P).T + (M * M * P).sum(1)[None]
        np.maximum(maha, 0.0, out=maha)
        log_norm = -0.5 * (self.D * LOG_2PI + np.log(self.variances).sum(1))
        return np.log(self.weights)[None] + log_norm[None] - 0.5 * maha

    def responsibilities(self, X):
        lj = self.log_joint(X)
        return np.exp(lj - logsumexp(lj, axis=1, keepdims=True))

    def log_likelihood(self, X):
        return float(logsumexp(self.log_joint(X), axis=1).sum())

    def sample(self, n, seed=0):
        rng = np.random.default_rng(seed)
        comp = rng.choice(self.K, size=n, p=self.weights)
        return self.means[comp] + rng.standard_normal((n, self.D)) * np.sqrt(self.variances[comp])

    def to_dict(self, extra=None):
        doc = {
            "format_version": GMM_FORMAT_VERSION,
            "covariance": "diagonal",
            "K": self.K,
            "D": self.D,
            "seed": self.seed,
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "variance_floor": self.variance_floor.tolist(),
            "log_likelihoods": [float(v) for v in self.log_likelihoods],
            "converged": self.converged,
            "fisher_blocks": ["mean", "variance"],
        }
        doc.update(extra or {})
        return doc

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format_version") != GMM_FORMAT_VERSION:
            raise ValidationError(f"unsupported GMM format_version {doc.get('format_version')!r}")
        model = cls(
            weights=np.asarray(doc["weights"], float),
            means=np.asarray(doc["means"], float),
            variances=np.asarray(doc["variances"], float),
            variance_floor=np.asarray(doc["variance_floor"], float),
            seed=int(doc.get("seed", 0)),
            log_likelihoods=list(doc.get("log_likelihoods", [])),
            converged=bool(doc.get("converged", False)),
        )
        if model.means.shape != (doc["K"], doc["D"]) or model.variances.shape != model.means.shape:
            raise ValidationError("GMM arrays do not match K x D")
        return model

    def save(self, path, extra=None):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(self.to_dict(extra), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.is_file():
            raise MissingInputError(path, "GMM model")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(str(exc), path) from None
        return cls.from_dict(doc)


def gmm_fit(X, K=DEFAULT_COMPONENTS, seed=0, max_iter=100, tol=1e-6):
    """Fit a diagonal-covariance GMM by EM, initialised from k-means.

    EM stops when the relative log-likelihood gain drops below ``tol`` or
    after ``max_iter`` iterations.  Variances are floored at 1e-6 times the
    per-dimension data variance.  ``model.log_likelihoods`` holds the total
    log-likelihood of every parameter set visited.
    """
    X = _check_data(X, K)
    N, D = X.shape
    data_var = X.var(axis=0)
    floor = np.maximum(VARIANCE_FLOOR_FRACTION * data_var, np.finfo(float).tiny)

    km = kmeans(X, K, seed=seed)
    counts = np.bincount(km.labels, minlength=K).astype(float)
    means = km.centroids.copy()
    variances = np.empty((K, D))
    for k in range(K):
        variances[k] = X[km.labels == k].var(axis=0)
    model = GmmModel(counts / N, means, np.maximum(variances, floor), floor, seed=seed)

    history = []
    prev = None
    for it in range(max_iter + 1):
        lj = model.log_joint(X)
        lse = logsumexp(lj, axis=1, keepdims=True)
        ll = float(lse.sum())
        if not np.isfinite(ll):
            raise NumericalError(f"log-likelihood became {ll} at EM iteration {it}")
        history.append(ll)
        if prev is not None and ll - prev < tol * abs(prev):
            model.converged = True
            break
        if it == max_iter:
            break
        prev = ll

        resp = np.exp(lj - lse)
        nk = resp.sum(0)
        alive = nk > 10 * np.finfo(float).eps * N
        w = np.where(alive, nk, 10 * np.finfo(float).eps * N)
        new_means = model.means.copy()
        new_vars = model.variances.copy()
        safe = np.where(alive, nk, 1.0)
        mu = (resp.T @ X) / safe[:, None]
        var = np.empty_like(mu)
        for k in range(K):
            diff = X - mu[k]
            var[k] = (resp[:, k] @ (diff * diff)) / safe[k]
        new_means[alive] = mu[alive]
        new_vars[alive] = np.maximum(var[alive], floor)
        model = GmmModel(w / w.sum(), new_means, new_vars, floor, seed=seed)

    model.log_likelihoods = history
    if not model.converged:
        logger.debug("EM stopped at max_iter=%d without reaching tol", max_iter)
    return model


def posteriors(model, x):
    """Responsibilities of each component for a single descriptor ``x``."""
    x = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise ValidationError("descriptor contains non-finite values")
    return model.responsibilities(x[None])[0]


@dataclass
class FisherVector:
    values: np.ndarray
    power_normalized: bool
    l2_normalized: bool

    def __len__(self):
        return self.values.size


def fisher_encode(model, X, power_norm=True, l2_norm=True):
    """Encode T descriptors as a ``2*K*D`` Fisher vector.

    Mean block:      1/(T sqrt(w_k))  * sum_t g_tk (x_t - mu_k) / sigma_k
    Variance block:  1/(T sqrt(2 w_k)) * sum_t g_tk ((x_t - mu_k)^2 / sigma_k^2 - 1)
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    T = X.shape[0]
    if T == 0 or X.size == 0:
        raise ValidationError("cannot encode an empty descriptor set")
    if not np.all(np.isfinite(X)):
        raise ValidationError("descriptors contain non-finite values")
    sigma = np.sqrt(model.variances)
    acc_mu = np.zeros_like(model.means)
    acc_var = np.zeros_like(model.means)
    for start in range(0, T, _CHUNK):
        chunk = X[start:start + _CHUNK]
        gamma = model.responsibilities(chunk)
        z = (chunk[:, None, :] - model.means[None]) / sigma[None]
        acc_mu += np.einsum("tk,tkd->kd", gamma, z)
        acc_var += np.einsum("tk,tkd->kd", gamma, z * z - 1.0)
    w = model.weights[:, None]
    g_mu = acc_mu / (T * np.sqrt(w))
    g_var = acc_var / (T * np.sqrt(2 * w))
    fv = np.concatenate([g_mu.ravel(), g_var.ravel()])
    if power_norm:
        fv = np.sign(fv) * np.sqrt(np.abs(fv))
    if l2_norm:
        norm = np.linalg.norm(fv)
        if norm > 0:
            fv = fv / norm
    return FisherVector(fv, power_norm, l2_norm)


def fisher_names(K, D):
    return ([f"fv_mu_{k}_{d}" for k in range(K) for d in range(D)]
            + [f"fv_var_{k}_{d}" for k in range(K) for d in range(D)])
