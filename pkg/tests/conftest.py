import numpy as np

from noisestab import CorrelationMatrix


def random_correlation(rng, k, mix=0.35):
    """Random strictly PD correlation matrix (entries of any sign)."""
    a = rng.standard_normal((k, k + 3))
    c = a @ a.T
    d = 1.0 / np.sqrt(np.diag(c))
    c = c * np.outer(d, d)
    c = (1.0 - mix) * c + mix * np.eye(k)
    np.fill_diagonal(c, 1.0)
    return CorrelationMatrix(c)


def random_nonneg_correlation(rng, k, mix=0.4):
    """Random strictly PD correlation with strictly positive entries."""
    w = rng.uniform(0.05, 1.0, (k, k + 2))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    c = (1.0 - mix) * (w @ w.T) + mix * np.eye(k)
    np.fill_diagonal(c, 1.0)
    return CorrelationMatrix(c)


def random_interior_x(rng, k, lo=0.15, hi=0.85, min_gap=0.12):
    """Interior coordinates whose quantiles stay well separated, so the
    limit-sorted QMC ordering is stable under small finite-difference
    stencils."""
    while True:
        x = np.sort(rng.uniform(lo, hi, k))
        if k == 1 or np.min(np.diff(x)) >= min_gap:
            return rng.permutation(x)
