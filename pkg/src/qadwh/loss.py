"""Weighted triplet ranking loss, multilabel softmax loss, and their gradients.

The triplet loss compares relaxed (sigmoid) codes under a weighted squared
Euclidean distance whose per-bit weights come from the anchor's class row:

    J_R = max(0, margin + d_w(a, p) - d_w(a, n)),
    d_w(a, b) = sum_k w_k^2 (h_a[k] - h_b[k])^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NoLabelError, NumericError
from .model import softmax


@dataclass(frozen=True)
class Triplet:
    anchor_idx: int
    positive_idx: int
    negative_idx: int


@dataclass(frozen=True)
class LossConfig:
    margin: float = 1.0

    def __post_init__(self):
        if not self.margin > 0:
            raise ValueError(f"margin must be positive, got {self.margin}")


@dataclass
class TripletGradients:
    d_anchor: np.ndarray
    d_positive: np.ndarray
    d_negative: np.ndarray
    d_weights: np.ndarray  # (c, q)


def _vectors(*arrays):
    out = [np.asarray(a, dtype=np.float64) for a in arrays]
    size = out[0].shape
    for a in out:
        if a.ndim != 1 or a.shape != size:
            raise DimensionError(f"shape mismatch: {[x.shape for x in out]}")
    return out


def weighted_sq_euclidean(w_row, h_a, h_b) -> float:
    w_row, h_a, h_b = _vectors(w_row, h_a, h_b)
    return float(np.sum(w_row**2 * (h_a - h_b) ** 2))


def _hinge(cfg, w_row, h_a, h_p, h_n):
    return cfg.margin + weighted_sq_euclidean(w_row, h_a, h_p) - weighted_sq_euclidean(w_row, h_a, h_n)


def triplet_loss(cfg: LossConfig, w_row, h_anchor, h_pos, h_neg) -> float:
    return max(0.0, _hinge(cfg, w_row, h_anchor, h_pos, h_neg))


def triplet_grads(cfg: LossConfig, w_row, h_anchor, h_pos, h_neg, anchor_label) -> TripletGradients:
    """Gradients of one triplet's loss.

    ``d_weights`` is the gradient with respect to the full class-weight
    matrix: the anchor's fused row is an average over its positive labels,
    so each of those rows receives an equal share.
    """
    w, a, p, n = _vectors(w_row, h_anchor, h_pos, h_neg)
    label = np.asarray(anchor_label, dtype=np.float64)
    if label.ndim != 1:
        raise DimensionError("anchor label must be a vector")
    count = label.sum()
    if count == 0:
        raise NoLabelError("anchor label has no positive entry")
    zero = np.zeros_like(w)
    if _hinge(cfg, w, a, p, n) <= 0:
        return TripletGradients(zero, zero.copy(), zero.copy(), np.zeros((label.size, w.size)))
    w2 = w**2
    d_w_row = 2.0 * w * ((a - p) ** 2 - (a - n) ** 2)
    return TripletGradients(
        d_anchor=2.0 * w2 * (n - p),
        d_positive=2.0 * w2 * (p - a),
        d_negative=2.0 * w2 * (a - n),
        d_weights=np.outer(label / count, d_w_row),
    )


def _check_label(label, c):
    label = np.asarray(label, dtype=np.float64)
    if label.shape[-1] != c:
        raise DimensionError(f"label length {label.shape[-1]} vs {c} logits")
    if np.any(label.sum(axis=-1) == 0):
        raise NoLabelError("label has no positive entry")
    return label


def log_softmax(z):
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax_xent_loss(logits, label) -> float:
    """Negative summed log-probability of every positive label."""
    logits = np.asarray(logits, dtype=np.float64)
    label = _check_label(label, logits.shape[-1])
    return float(-np.sum(label * log_softmax(logits)))


def softmax_grad(f_x, logits, label) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of :func:`softmax_xent_loss` w.r.t. classifier weight and bias.

    With a single positive label, column ``j`` is ``-f_x * (y_j - p_j)``;
    with several, the probability term is scaled by the label count.
    """
    f_x = np.asarray(f_x, dtype=np.float64)
    logits = np.asarray(logits, dtype=np.float64)
    if f_x.ndim != 1 or logits.ndim != 1:
        raise DimensionError("expected vectors")
    label = _check_label(label, logits.size)
    d_logits = label.sum() * softmax(logits) - label
    return np.outer(f_x, d_logits), d_logits


def _value(out):
    return out[0] if isinstance(out, tuple) else out


def finite_diff_check(loss_fn, x0, step: float = 1e-6, grad=None) -> float:
    """Largest relative gap between an analytic gradient and central differences.

    ``loss_fn`` maps a flat parameter vector to ``(loss, gradient)``, or to
    a bare loss when ``grad`` supplies the analytic gradient at ``x0``. Per
    coordinate the error is ``|g - fd| / max(1e-12, |g| + |fd|)``.
    """
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    x0 = np.array(x0, dtype=np.result_type(x0, np.float64))
    out = loss_fn(x0)
    if grad is None:
        if not isinstance(out, tuple):
            raise ValueError("loss_fn returned no gradient and none was given")
        grad = out[1]
    if not np.isfinite(_value(out)):
        raise NumericError("loss is not finite at the base point")
    analytic = np.asarray(grad, dtype=np.float64)
    if analytic.shape != x0.shape:
        raise DimensionError(f"gradient shape {analytic.shape} vs parameters {x0.shape}")
    worst = 0.0
    x = x0.copy()
    for i in range(x0.size):
        x[i] = x0[i] + step
        up = _value(loss_fn(x))
        x[i] = x0[i] - step
        down = _value(loss_fn(x))
        x[i] = x0[i]
        if not (np.isfinite(up) and np.isfinite(down)):
            raise NumericError(f"loss is not finite near coordinate {i}")
        numeric = float((up - down) / (2 * x0.dtype.type(step)))
        err = abs(analytic[i] - numeric) / max(1e-12, abs(analytic[i]) + abs(numeric))
        worst = max(worst, err)
    return worst
