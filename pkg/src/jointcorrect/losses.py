"""Cross-entropy, symmetric-KL agreement and the joint two-network loss.

The joint loss of one example is

    joint = (1 - lam) * (CE(p1, y) + CE(p2, y)) + lam * (KL(p1||p2) + KL(p2||p1))

Every probability is floored at ``PROB_FLOOR`` before a logarithm is taken.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backbone import PROB_FLOOR
from .errors import ConfigError, DimensionError, EmptySelectionError


@dataclass
class PerExampleLosses:
    sup: np.ndarray
    agr: np.ndarray
    joint: np.ndarray
    lambda_used: float


def _floored(p):
    return np.maximum(np.asarray(p, dtype=np.float64), PROB_FLOOR)


def cross_entropy(p, y: int) -> float:
    p = np.asarray(p, dtype=np.float64)
    if not 0 <= y < p.shape[-1]:
        raise IndexError(f"label {y} out of range for {p.shape[-1]} classes")
    return float(-np.log(max(p[y], PROB_FLOOR)))


def kl_div(p, q) -> float:
    p, q = np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise DimensionError(f"distributions differ in length: {p.shape} vs {q.shape}")
    pf, qf = _floored(p), _floored(q)
    # The floor can leave a value a few ulps below zero; clamp it.
    return max(float(np.sum(pf * (np.log(pf) - np.log(qf)))), 0.0)


def agreement_loss(p1, p2) -> float:
    p1, p2 = np.asarray(p1, dtype=np.float64), np.asarray(p2, dtype=np.float64)
    if p1.shape != p2.shape:
        raise DimensionError(f"distributions differ in length: {p1.shape} vs {p2.shape}")
    a, b = _floored(p1), _floored(p2)
    # sum_c (a_c - b_c)(log a_c - log b_c) is symmetric term by term and
    # every term is non-negative.
    return float(np.sum((a - b) * (np.log(a) - np.log(b))))


def _check_batch(p1, p2, y):
    p1 = np.asarray(p1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    y = np.asarray(y)
    if p1.ndim != 2 or p1.shape != p2.shape:
        raise DimensionError(f"probability batches differ: {p1.shape} vs {p2.shape}")
    if y.shape != (p1.shape[0],):
        raise DimensionError(f"labels of shape {y.shape} for a batch of {p1.shape[0]}")
    if y.size and (y.min() < 0 or y.max() >= p1.shape[1]):
        raise IndexError(f"labels must lie in [0, {p1.shape[1]})")
    return p1, p2, y.astype(np.int64)


def _check_lambda(lam):
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"lambda must lie in [0, 1], got {lam}")


def supervised_losses(p1, p2, y) -> np.ndarray:
    """Per-example CE(p1, y) + CE(p2, y)."""
    p1, p2, y = _check_batch(p1, p2, y)
    rows = np.arange(y.size)
    return -np.log(_floored(p1[rows, y])) - np.log(_floored(p2[rows, y]))


def agreement_losses(p1, p2) -> np.ndarray:
    a, b = _floored(p1), _floored(p2)
    return np.sum((a - b) * (np.log(a) - np.log(b)), axis=1)


def joint_losses(p1, p2, y, lam: float) -> PerExampleLosses:
    _check_lambda(lam)
    sup = supervised_losses(p1, p2, y)
    agr = agreement_losses(p1, p2)
    joint = (1.0 - lam) * sup + lam * agr
    return PerExampleLosses(sup=sup, agr=agr, joint=joint, lambda_used=float(lam))


def mean_joint_loss(p1, p2, y, lam, selection_mask) -> float:
    mask = np.asarray(selection_mask, dtype=bool)
    if not mask.any():
        raise EmptySelectionError("no examples selected")
    return float(joint_losses(p1, p2, y, lam).joint[mask].mean())


def joint_loss_grad(p1, p2, y, lam, selection_mask):
    """Logit gradients of the mean joint loss over the selected rows.

    ``p1`` and ``p2`` must be the softmax outputs of the two networks.
    Returns ``(dlogits1, dlogits2)``; deselected rows are zero.
    """
    _check_lambda(lam)
    p1, p2, y = _check_batch(p1, p2, y)
    mask = np.asarray(selection_mask, dtype=bool)
    if mask.shape != y.shape:
        raise DimensionError(f"mask of shape {mask.shape} for a batch of {y.size}")
    n_sel = int(mask.sum())
    if n_sel == 0:
        raise EmptySelectionError("no examples selected")

    onehot = np.zeros_like(p1)
    onehot[np.arange(y.size), y] = 1.0
    log_ratio = np.log(_floored(p1)) - np.log(_floored(p2))
    kl12 = np.sum(p1 * log_ratio, axis=1, keepdims=True)
    kl21 = np.sum(-p2 * log_ratio, axis=1, keepdims=True)
    # Softmax Jacobian applied to d/dp of sum_c (p1 - p2)(log p1 - log p2).
    dagr1 = p1 * log_ratio + p1 - p2 - p1 * kl12
    dagr2 = -p2 * log_ratio + p2 - p1 - p2 * kl21

    d1 = (1.0 - lam) * (p1 - onehot) + lam * dagr1
    d2 = (1.0 - lam) * (p2 - onehot) + lam * dagr2
    scale = mask[:, None] / n_sel
    return d1 * scale, d2 * scale


def ce_grad(p, y, selection_mask=None):
    """Logit gradient of the mean cross-entropy of a single network."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    mask = np.ones(y.size, dtype=bool) if selection_mask is None else np.asarray(selection_mask, bool)
    n_sel = int(mask.sum())
    if n_sel == 0:
        raise EmptySelectionError("no examples selected")
    g = p.copy()
    g[np.arange(y.size), y] -= 1.0
    return g * (mask[:, None] / n_sel)
