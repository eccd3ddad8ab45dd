"""Independent reference implementations used by the tests.

Written with the standard library only (math, statistics, loops) so they
share no code path with the numpy implementations under test.
"""

import math
import statistics
from collections import Counter


def stat_oracle(xs):
    """Every supported statistic of a list of floats, by direct formula."""
    xs = [float(v) for v in xs]
    n = len(xs)
    mean = math.fsum(xs) / n
    dev = [v - mean for v in xs]
    m2 = math.fsum(d * d for d in dev) / n
    m3 = math.fsum(d ** 3 for d in dev) / n
    m4 = math.fsum(d ** 4 for d in dev) / n
    var = math.fsum(d * d for d in dev) / (n - 1) if n > 1 else 0.0
    constant = max(xs) == min(xs)
    counts = Counter(round(v, 4) for v in xs)
    top = max(counts.values())
    q = statistics.quantiles(xs, n=4, method="inclusive") if n > 1 else [xs[0]] * 3
    rms = math.sqrt(math.fsum(v * v for v in xs) / n)
    return {
        "min": min(xs),
        "max": max(xs),
        "mean": mean,
        "mode": min(v for v, c in counts.items() if c == top),
        "median": statistics.median(xs),
        "range": max(xs) - min(xs),
        "meandev": math.fsum(abs(d) for d in dev) / n,
        "var": var,
        "std": math.sqrt(var),
        "skew": 0.0 if constant or m2 ** 1.5 == 0 else m3 / m2 ** 1.5,
        "kurt": 0.0 if constant or m2 ** 2 == 0 else m4 / m2 ** 2,
        "p2rms": max(abs(v) for v in xs) / rms if rms > 0 else 0.0,
        "rms": rms,
        "iqr": q[2] - q[0],
    }


def dct2_ortho(xs):
    """Orthonormal DCT-II by the defining double sum."""
    n = len(xs)
    out = []
    for k in range(n):
        s = math.fsum(x * math.cos(math.pi * k * (2 * i + 1) / (2 * n)) for i, x in enumerate(xs))
        scale = math.sqrt(1.0 / n) if k == 0 else math.sqrt(2.0 / n)
        out.append(scale * s)
    return out


def dct3_ortho(cs):
    """Inverse of :func:`dct2_ortho` (orthonormal DCT-III)."""
    n = len(cs)
    out = []
    for i in range(n):
        s = cs[0] * math.sqrt(1.0 / n)
        s += math.fsum(cs[k] * math.sqrt(2.0 / n) * math.cos(math.pi * k * (2 * i + 1) / (2 * n))
                       for k in range(1, n))
        out.append(s)
    return out


def shoelace(points):
    s = 0.0
    for (x1, y1), (x2, y2) in zip(points, points[1:] + points[:1]):
        s += x1 * y2 - x2 * y1
    return abs(s) / 2.0


def diag_gauss_logpdf(x, mean, var):
    return -0.5 * sum(math.log(2 * math.pi * v) + (xi - m) ** 2 / v
                      for xi, m, v in zip(x, mean, var))


def fisher_vector_loop(weights, means, variances, X):
    """Unnormalized mean/variance Fisher vector by explicit loops."""
    K, D, T = len(weights), len(means[0]), len(X)
    g_mu = [[0.0] * D for _ in range(K)]
    g_var = [[0.0] * D for _ in range(K)]
    for x in X:
        logs = [math.log(weights[k]) + diag_gauss_logpdf(x, means[k], variances[k]) for k in range(K)]
        top = max(logs)
        z = sum(math.exp(v - top) for v in logs)
        post = [math.exp(v - top) / z for v in logs]
        for k in range(K):
            for d in range(D):
                u = (x[d] - means[k][d]) / math.sqrt(variances[k][d])
                g_mu[k][d] += post[k] * u
                g_var[k][d] += post[k] * (u * u - 1.0)
    out = []
    for k in range(K):
        out += [g / (T * math.sqrt(weights[k])) for g in g_mu[k]]
    for k in range(K):
        out += [g / (T * math.sqrt(2 * weights[k])) for g in g_var[k]]
    return out


def mlp_gradient_error(loss_and_gradients, weights, biases, X, targets, head,
                       activation="tanh", h=1e-6):
    """Max relative error between analytic and central-difference gradients.

    Every weight and bias entry is perturbed in turn.  Relative error is
    ``|a - n| / max(|a| + |n|, 1e-8)``.
    """
    _, gw, gb = loss_and_gradients(weights, biases, X, targets, head, activation)
    worst = 0.0
    for params, grads in ((weights, gw), (biases, gb)):
        for p, g in zip(params, grads):
            flat, gflat = p.reshape(-1), g.reshape(-1)
            for i in range(flat.size):
                keep = flat[i]
                flat[i] = keep + h
                up = loss_and_gradients(weights, biases, X, targets, head, activation)[0]
                flat[i] = keep - h
                down = loss_and_gradients(weights, biases, X, targets, head, activation)[0]
                flat[i] = keep
                num = (up - down) / (2 * h)
                worst = max(worst, abs(gflat[i] - num) / max(abs(gflat[i]) + abs(num), 1e-8))
    return worst
