"""Exact O(n^2) t-SNE for desk-scale embedding visualization.

Follows the reference formulation: per-point bandwidths found by binary
search to match the target perplexity, symmetrized affinities, Student-t
low-dimensional kernel, gradient descent with early exaggeration and
momentum. Deterministic under the seed.
"""

from __future__ import annotations

import numpy as np

_EPS = 1e-12


def _conditional_probs(d2_row: np.ndarray, beta: float) -> tuple[np.ndarray, float]:
    p = np.exp(-d2_row * beta)
    s = p.sum()
    if s <= 0:
        p = np.ones_like(p) / p.size
        return p, 0.0
    p /= s
    # Shannon entropy in nats.
    h = float(-(p * np.log(p + _EPS)).sum())
    return p, h


def _search_betas(d2: np.ndarray, perplexity: float, tol: float = 1e-5) -> np.ndarray:
    n = d2.shape[0]
    target = np.log(perplexity)
    p = np.zeros((n, n))
    for i in range(n):
        row = np.delete(d2[i], i)
        beta, lo, hi = 1.0, 0.0, np.inf
        for _ in range(64):
            _, h = _conditional_probs(row, beta)
            if abs(h - target) < tol:
                break
            if h > target:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else (beta + hi) / 2.0
            else:
                hi = beta
                beta = (beta + lo) / 2.0
        probs, _ = _conditional_probs(row, beta)
        p[i, np.arange(n) != i] = probs
    return p


def tsne(
    x: np.ndarray,
    perplexity: float = 30.0,
    n_iter: int = 1000,
    seed: int = 0,
    learning_rate: float | None = None,
) -> np.ndarray:
    """Project rows of x to 2-D. Returns an (n, 2) array.

    learning_rate defaults to max(n/12, 50), which keeps small point sets from
    diverging under the gain schedule.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n < 4:
        raise ValueError(f"need at least 4 points, got {n}")
    perplexity = min(perplexity, (n - 1) / 3.0)
    if learning_rate is None:
        learning_rate = max(n / 12.0, 50.0)

    sq = (x**2).sum(axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * x @ x.T, 0.0)
    p_cond = _search_betas(d2, perplexity)
    p = (p_cond + p_cond.T) / (2.0 * n)
    p = np.maximum(p, _EPS)

    rng = np.random.default_rng(seed)
    y = rng.normal(scale=1e-4, size=(n, 2))
    update = np.zeros_like(y)
    gains = np.ones_like(y)
    exaggeration = 4.0
    for it in range(n_iter):
        py = p * exaggeration if it < 100 else p
        yd2 = ((y[:, None, :] - y[None, :, :]) ** 2).sum(axis=2)
        num = 1.0 / (1.0 + yd2)
        np.fill_diagonal(num, 0.0)
        q = np.maximum(num / num.sum(), _EPS)
        w = (py - q) * num
        grad = 4.0 * ((np.diag(w.sum(axis=1)) - w) @ y)
        momentum = 0.5 if it < 250 else 0.8
        gains = np.where(np.sign(grad) != np.sign(update), gains + 0.2, gains * 0.8)
        gains = np.maximum(gains, 0.01)
        update = momentum * update - learning_rate * gains * grad
        y = y + update
        y = y - y.mean(axis=0)
    return y
