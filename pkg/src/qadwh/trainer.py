"""Joint training of the hash stream and the classification stream.

Each step samples a mini-batch of triplets, evaluates

    mean(J_R over triplets) + loss_balance * mean(J_C over the batch images)

where the batch images are the anchors, positives and negatives of every
triplet (duplicates included), back-propagates through both heads and the
feature stack, and takes one SGD step. Class weights get no weight decay
and are clipped at zero after every update.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import DimensionError, DivergenceError, SamplingError
from .loss import Triplet, log_softmax
from .model import Dataset, ModelParams, feature_activations, sigmoid, softmax

log = logging.getLogger(__name__)

MAX_RESAMPLES = 100


@dataclass
class TrainConfig:
    batch_size: int = 64
    initial_lr: float = 0.001
    lr_drop_factor: float = 10.0
    lr_drop_every: int = 2000
    weight_decay: float = 0.0005
    max_steps: int = 5000
    margin: float = 1.0
    loss_balance: float = 1.0
    seed: int = 0
    convergence_window: int = 500
    convergence_tolerance: float = 1e-6
    freeze_class_weights: bool = False

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")
        for name in ("initial_lr", "lr_drop_factor", "lr_drop_every", "margin"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("weight_decay", "loss_balance", "convergence_window", "convergence_tolerance"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class TrainReport:
    triplet_loss: list[float] = field(default_factory=list)
    class_loss: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    active_fraction: list[float] = field(default_factory=list)
    steps: int = 0
    converged: bool = False

    def combined(self, loss_balance: float) -> np.ndarray:
        return np.asarray(self.triplet_loss) + loss_balance * np.asarray(self.class_loss)


@dataclass
class BatchResult:
    triplet_loss: float
    class_loss: float
    active_fraction: float
    grads: ModelParams | None

    def total(self, loss_balance: float) -> float:
        return self.triplet_loss + loss_balance * self.class_loss


class TripletSampler:
    """Uniform triplet sampler over a labelled dataset.

    Anchors are uniform over items; the positive is uniform over other items
    sharing a label with the anchor and the negative uniform over items
    sharing none. Anchors without both are redrawn.
    """

    def __init__(self, dataset: Dataset):
        labels = dataset.labels.astype(np.int32)
        self._share = (labels @ labels.T) > 0
        np.fill_diagonal(self._share, False)
        self._pos_count = self._share.sum(axis=1)
        self._neg_count = dataset.num_items - 1 - self._pos_count
        self._valid = (self._pos_count > 0) & (self._neg_count > 0)
        if not self._valid.any():
            raise SamplingError("no item has both a positive and a negative")
        self._lists: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self.n = dataset.num_items

    def _candidates(self, a):
        hit = self._lists.get(a)
        if hit is None:
            row = self._share[a]
            neg = ~row
            neg[a] = False
            hit = (np.flatnonzero(row), np.flatnonzero(neg))
            self._lists[a] = hit
        return hit

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Triplet]:
        out = []
        for _ in range(batch_size):
            for _ in range(MAX_RESAMPLES):
                a = int(rng.integers(self.n))
                if self._valid[a]:
                    break
            else:
                raise SamplingError(f"no valid anchor after {MAX_RESAMPLES} draws")
            pos, neg = self._candidates(a)
            out.append(Triplet(a, int(pos[rng.integers(pos.size)]), int(neg[rng.integers(neg.size)])))
        return out


def sample_triplets(dataset: Dataset, batch_size: int, rng: np.random.Generator) -> list[Triplet]:
    return TripletSampler(dataset).sample(batch_size, rng)


def learning_rate(step: int, cfg: TrainConfig) -> float:
    return cfg.initial_lr / cfg.lr_drop_factor ** (step // cfg.lr_drop_every)


def _triplet_arrays(triplets):
    idx = np.array([(t.anchor_idx, t.positive_idx, t.negative_idx) for t in triplets], dtype=np.int64)
    if idx.size == 0:
        raise ValueError("empty triplet batch")
    return idx


def evaluate_batch(params: ModelParams, dataset: Dataset, triplets, cfg: TrainConfig, grad: bool = True) -> BatchResult:
    """Losses of one batch and, optionally, gradients for every parameter."""
    if dataset.feature_dim != params.input_dim or dataset.num_classes != params.num_classes:
        raise DimensionError(
            f"dataset (d={dataset.feature_dim}, c={dataset.num_classes}) does not match "
            f"model (d={params.input_dim}, c={params.num_classes})"
        )
    idx = _triplet_arrays(triplets)
    t = idx.shape[0]
    items = idx.T.ravel()  # anchors, then positives, then negatives
    x = dataset.features[items]
    y = dataset.labels[items].astype(np.float64)

    acts = feature_activations(params, x)
    f = acts[-1]
    h = sigmoid(f @ params.hash_weight + params.hash_bias)
    logits = f @ params.classifier_weight + params.classifier_bias

    h_a, h_p, h_n = h[:t], h[t:2 * t], h[2 * t:]
    y_a = y[:t]
    n_labels = y_a.sum(axis=1, keepdims=True)
    w = (y_a @ params.class_weights) / n_labels
    w2 = w**2
    diff_p = (h_a - h_p) ** 2
    diff_n = (h_a - h_n) ** 2
    hinge = cfg.margin + np.sum(w2 * diff_p, axis=1) - np.sum(w2 * diff_n, axis=1)
    active = hinge > 0
    j_r = float(np.where(active, hinge, 0.0).mean())
    j_c = float(-np.sum(y * log_softmax(logits)) / (3 * t))
    result = BatchResult(j_r, j_c, float(active.mean()), None)
    if not grad:
        return result

    g = params.zeros_like()
    act = active[:, None] / t
    d_h = np.concatenate([
        2.0 * w2 * (h_n - h_p) * act,
        2.0 * w2 * (h_p - h_a) * act,
        2.0 * w2 * (h_a - h_n) * act,
    ])
    if not cfg.freeze_class_weights:
        d_w = 2.0 * w * (diff_p - diff_n) * act
        g.class_weights[...] = (y_a / n_labels).T @ d_w

    d_pre = d_h * h * (1.0 - h)
    g.hash_weight[...] = f.T @ d_pre
    g.hash_bias[...] = d_pre.sum(axis=0)

    d_logits = (cfg.loss_balance / (3 * t)) * (y.sum(axis=1, keepdims=True) * softmax(logits) - y)
    g.classifier_weight[...] = f.T @ d_logits
    g.classifier_bias[...] = d_logits.sum(axis=0)

    d_a = d_pre @ params.hash_weight.T + d_logits @ params.classifier_weight.T
    last = len(params.feature_layers) - 1
    for i in range(last, -1, -1):
        w_i, _ = params.feature_layers[i]
        if i != last:
            d_a = d_a * (1.0 - acts[i + 1] ** 2)
        gw, gb = g.feature_layers[i]
        gw[...] = acts[i].T @ d_a
        gb[...] = d_a.sum(axis=0)
        d_a = d_a @ w_i.T
    result.grads = g
    return result


def backward_full(params: ModelParams, dataset: Dataset, triplets, cfg: TrainConfig) -> ModelParams:
    """Gradients of the combined batch loss w.r.t. every parameter."""
    return evaluate_batch(params, dataset, triplets, cfg).grads


def sgd_step(params: ModelParams, grads: ModelParams, step: int, cfg: TrainConfig) -> ModelParams:
    """One decayed SGD update; class weights are projected onto >= 0."""
    lr = learning_rate(step, cfg)
    named = {}
    for (name, p), (_, g) in zip(params.arrays(), grads.arrays()):
        if name == "class_weights":
            if cfg.freeze_class_weights:
                new = p.copy()
            else:
                new = np.maximum(p - lr * g, 0.0)
        else:
            new = p - lr * (g + cfg.weight_decay * p)
        if not np.all(np.isfinite(new)):
            raise DivergenceError(step, f"parameter {name} is not finite")
        named[name] = new
    return ModelParams.from_arrays(named)


def train(params: ModelParams, dataset: Dataset, cfg: TrainConfig, callback=None) -> tuple[ModelParams, TrainReport]:
    """Run mini-batch SGD until ``max_steps`` or convergence.

    ``callback(step, params, batch_result)`` is invoked after every update.
    The run is fully determined by ``cfg.seed``.
    """
    report = TrainReport()
    if cfg.max_steps == 0:
        return params, report
    if dataset.feature_dim != params.input_dim or dataset.num_classes != params.num_classes:
        raise DimensionError("dataset does not match model dimensions")
    rng = np.random.default_rng(cfg.seed)
    sampler = TripletSampler(dataset)
    window = cfg.convergence_window
    combined = []
    for step in range(cfg.max_steps):
        batch = sampler.sample(cfg.batch_size, rng)
        res = evaluate_batch(params, dataset, batch, cfg)
        if not (np.isfinite(res.triplet_loss) and np.isfinite(res.class_loss)):
            raise DivergenceError(step, "loss is not finite")
        params = sgd_step(params, res.grads, step, cfg)
        report.triplet_loss.append(res.triplet_loss)
        report.class_loss.append(res.class_loss)
        report.lr.append(learning_rate(step, cfg))
        report.active_fraction.append(res.active_fraction)
        report.steps = step + 1
        combined.append(res.total(cfg.loss_balance))
        if callback is not None:
            callback(step, params, res)
        if window and len(combined) >= 2 * window:
            recent = np.mean(combined[-window:])
            before = np.mean(combined[-2 * window:-window])
            if abs(recent - before) < cfg.convergence_tolerance:
                report.converged = True
                log.info("converged at step %d", step)
                break
    return params, report
