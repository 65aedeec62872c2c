"""Differentiable Spearman correlation through pairwise-sigmoid soft ranks.

``soft_rank(s)_i = 1/2 + sum_j sigmoid(beta * (s_i - s_j))`` approaches the
1-based ascending rank of ``s_i`` as ``beta`` grows.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit
from scipy.stats import rankdata

_EPS = 1e-12


def soft_rank(scores: np.ndarray, sharpness: float = 10.0) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    return 0.5 + expit(sharpness * (s[:, None] - s[None, :])).sum(axis=1)


def _pearson_and_grad(r: np.ndarray, t: np.ndarray) -> tuple[float, np.ndarray]:
    rc = r - r.mean()
    tc = t - t.mean()
    nr = np.sqrt(rc @ rc) + _EPS
    nt = np.sqrt(tc @ tc) + _EPS
    rho = float(rc @ tc / (nr * nt))
    grad = tc / (nr * nt) - rho * rc / (nr * nr)
    return rho, grad - grad.mean()


def soft_spearman(
    scores: np.ndarray, targets: np.ndarray, sharpness: float = 10.0
) -> tuple[float, np.ndarray]:
    """Soft Spearman correlation of ``scores`` against the ranks of ``targets``.

    Returns the correlation and its gradient with respect to ``scores``.
    """
    s = np.asarray(scores, dtype=np.float64)
    t = rankdata(np.asarray(targets, dtype=np.float64))
    sig = expit(sharpness * (s[:, None] - s[None, :]))
    r = 0.5 + sig.sum(axis=1)
    rho, g = _pearson_and_grad(r, t)
    # d r_i / d s_k = P_ik (k == i summed) - P_ik, with P symmetric
    pair = sharpness * sig * (1.0 - sig)
    grad = g * pair.sum(axis=1) - pair @ g
    return rho, grad


def group_loss(
    scores: np.ndarray,
    targets: np.ndarray,
    spearman_weight: float = 1.0,
    sharpness: float = 10.0,
) -> tuple[float, np.ndarray]:
    """``MSE + weight * (1 - soft Spearman)`` for one sample's candidates, with gradient.

    The ranking term is skipped when the group has fewer than two distinct targets.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    n = len(s)
    diff = s - y
    loss = float(diff @ diff / n)
    grad = 2.0 * diff / n
    if spearman_weight and n > 1 and np.unique(y).size > 1:
        rho, g = soft_spearman(s, y, sharpness)
        loss += spearman_weight * (1.0 - rho)
        grad = grad - spearman_weight * g
    return loss, grad
