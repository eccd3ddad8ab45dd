"""Small feed-forward networks in numpy with hand-written backprop.

Two heads: ``regression`` (8 outputs, one per PHQ-8 item, squared error) and
``classifier`` (4-way softmax for a single item, cross-entropy).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import NumericalError, ValidationError
from .svm import standardization

HEADS = ("regression", "classifier")
OPTIMIZERS = ("adam", "sgd")
ACTIVATIONS = ("relu", "tanh")
N_CLASSES = 4
ITEM_MAX = 3

DEFAULT_LR = {"adam": 1e-3, "sgd": 1e-2}


@dataclass
class MlpConfig:
    """Architecture and training settings.

    ``hidden`` lists hidden widths; the network has ``len(hidden) + 1`` weight
    layers.  ``dropout`` gives one rate per hidden layer: 0 disables it,
    otherwise it must lie in [0.2, 0.5].
    """

    hidden: tuple = (256, 128, 64, 32, 16)
    dropout: tuple = (0.5, 0.4, 0.3, 0.2, 0.2)
    activation: str = "relu"
    head: str = "regression"
    n_outputs: int = 8
    optimizer: str = "adam"
    learning_rate: float = None
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    momentum: float = 0.0
    epochs: int = 200
    batch_size: int = 16

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        self.dropout = tuple(float(d) for d in self.dropout)
        if len(self.dropout) != len(self.hidden):
            raise ValidationError("need one dropout rate per hidden layer")
        for d in self.dropout:
            if d != 0.0 and not 0.2 <= d <= 0.5:
                raise ValidationError(f"dropout rate {d} outside [0.2, 0.5]")
        if self.head not in HEADS:
            raise ValidationError(f"head must be one of {HEADS}")
        if self.optimizer not in OPTIMIZERS:
            raise ValidationError(f"optimizer must be one of {OPTIMIZERS}")
        if self.activation not in ACTIVATIONS:
            raise ValidationError(f"activation must be one of {ACTIVATIONS}")
        if self.head == "classifier":
            self.n_outputs = N_CLASSES
        if self.learning_rate is None:
            self.learning_rate = DEFAULT_LR[self.optimizer]
        if self.epochs < 1 or self.batch_size < 1:
            raise ValidationError("epochs and batch_size must be >= 1")


@dataclass
class MlpModel:
    config: MlpConfig
    weights: list
    biases: list
    mean: np.ndarray
    scale: np.ndarray
    seed: int = 0
    losses: list = field(default_factory=list)

    @property
    def n_features(self):
        return self.weights[0].shape[0]

    def to_dict(self):
        return {
            "kind": "mlp",
            "config": asdict(self.config),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "seed": self.seed,
            "losses": [float(v) for v in self.losses],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            config=MlpConfig(**d["config"]),
            weights=[np.asarray(w, float) for w in d["weights"]],
            biases=[np.asarray(b, float) for b in d["biases"]],
            mean=np.asarray(d["mean"], float),
            scale=np.asarray(d["scale"], float),
            seed=int(d.get("seed", 0)),
            losses=list(d.get("losses", [])),
        )


def init_network(n_in, config, rng):
    sizes = [n_in, *config.hidden, config.n_outputs]
    weights, biases = [], []
    for a, b in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (a + b))
        weights.append(rng.uniform(-limit, limit, (a, b)))
        biases.append(np.zeros(b))
    return weights, biases


def _act(z, kind):
    return np.maximum(z, 0.0) if kind == "relu" else np.tanh(z)


def _act_grad(z, a, kind):
    return (z > 0).astype(float) if kind == "relu" else 1.0 - a * a


def _log_softmax(z):
    z = z - z.max(1, keepdims=True)
    return z - np.log(np.exp(z).sum(1, keepdims=True))


def forward(weights, biases, X, activation="relu", masks=None):
    """Return (output, cache).  ``masks`` are inverted-dropout multipliers."""
    a = X
    cache = []
    n_hidden = len(weights) - 1
    for layer in range(n_hidden):
        z = a @ weights[layer] + biases[layer]
        h = _act(z, activation)
        out = h if masks is None else h * masks[layer]
        cache.append((a, z, h))
        a = out
    cache.append((a, None, None))
    return a @ weights[-1] + biases[-1], cache


def loss_and_gradients(weights, biases, X, targets, head="regression",
                       activation="relu", masks=None):
    """Mean loss over the batch and its gradients w.r.t. all parameters.

    Regression loss is the mean over samples of the summed squared error;
    classifier loss is mean cross-entropy on integer targets.
    """
    out, cache = forward(weights, biases, X, activation, masks)
    n = X.shape[0]
    if head == "regression":
        err = out - targets
        loss = 0.5 * float((err * err).sum()) / n
        delta = err / n
    else:
        logp = _log_softmax(out)
        t = np.asarray(targets, dtype=int)
        loss = -float(logp[np.arange(n), t].sum()) / n
        delta = np.exp(logp)
        delta[np.arange(n), t] -= 1.0
        delta /= n
    gw = [None] * len(weights)
    gb = [None] * len(weights)
    for layer in range(len(weights) - 1, -1, -1):
        a_in = cache[layer][0]
        gw[layer] = a_in.T @ delta
        gb[layer] = delta.sum(0)
        if layer == 0:
            break
        _, z, h = cache[layer - 1]
        d_out = delta @ weights[layer].T
        if masks is not None:
            d_out = d_out * masks[layer - 1]
        delta = d_out * _act_grad(z, h, activation)
    return loss, gw, gb


def _dropout_masks(rng, n, config):
    masks = []
    for width, rate in zip(config.hidden, config.dropout):
        if rate == 0.0:
            masks.append(np.ones((n, width)))
        else:
            masks.append((rng.random((n, width)) >= rate) / (1.0 - rate))
    return masks


def mlp_train(X, targets, config=None, seed=0):
    """Mini-batch training; dropout masks and shuffling come from ``seed``.

    ``targets`` is (N, n_outputs) for the regression head and integer item
    scores 0..3 for the classifier head.
    """
    config = config or MlpConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not np.all(np.isfinite(X)):
        raise ValidationError("features contain non-finite values")
    targets = np.asarray(targets)
    if config.head == "regression":
        targets = np.atleast_2d(targets.astype(float))
        if targets.shape != (X.shape[0], config.n_outputs):
            raise ValidationError(f"targets must be ({X.shape[0]}, {config.n_outputs})")
    else:
        targets = targets.astype(int).ravel()
        if targets.size != X.shape[0] or targets.min() < 0 or targets.max() >= N_CLASSES:
            raise ValidationError("classifier targets must be item scores 0..3")

    rng = np.random.default_rng(seed)
    mean, scale = standardization(X)
    Xs = (X - mean) / scale
    weights, biases = init_network(X.shape[1], config, rng)
    params = weights + biases
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    step = 0
    losses = []
    n = X.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            masks = _dropout_masks(rng, idx.size, config)
            with np.errstate(over="ignore", invalid="ignore"):
                loss, gw, gb = loss_and_gradients(weights, biases, Xs[idx], targets[idx],
                                                  config.head, config.activation, masks)
            if not np.isfinite(loss):
                raise NumericalError(
                    f"non-finite loss {loss} at epoch {epoch}, batch starting {start}; "
                    f"lr={config.learning_rate}, optimizer={config.optimizer}"
                )
            total += loss * idx.size
            step += 1
            for k, (p, g) in enumerate(zip(params, gw + gb)):
                if config.optimizer == "adam":
                    m1[k] = config.beta1 * m1[k] + (1 - config.beta1) * g
                    m2[k] = config.beta2 * m2[k] + (1 - config.beta2) * g * g
                    mhat = m1[k] / (1 - config.beta1 ** step)
                    vhat = m2[k] / (1 - config.beta2 ** step)
                    p -= config.learning_rate * mhat / (np.sqrt(vhat) + config.epsilon)
                else:
                    m1[k] = config.momentum * m1[k] + g
                    p -= config.learning_rate * m1[k]
        losses.append(total / n)
    return MlpModel(config, weights, biases, mean, scale, seed, losses)


def mlp_raw(model, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n_features:
        raise ValidationError(f"feature width {X.shape[1]} != trained width {model.n_features}")
    out, _ = forward(model.weights, model.biases, (X - model.mean) / model.scale,
                     model.config.activation)
    return out


def round_items(raw):
    """Round regression outputs to the nearest integer and clip to 0..3."""
    return np.clip(np.rint(np.asarray(raw, dtype=float)), 0, ITEM_MAX).astype(int)


def mlp_predict(model, X):
    """Item scores: rounded/clipped (N, 8) for regression, (N,) for classifier."""
    out = mlp_raw(model, X)
    if model.config.head == "regression":
        return round_items(out)
    return np.argmax(out, axis=1)
