"""Network parameters and forward passes.

The network is a small feed-forward feature stack followed by two heads
reading the same features: a sigmoid hash layer (``q`` outputs) and a
softmax classifier (``c`` outputs). A nonnegative ``c x q`` matrix of
class-wise bit weights sits beside the hash layer.

Every forward function accepts either a single vector or a batch with
items along the first axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NoLabelError


@dataclass
class ModelParams:
    """All trainable parameters.

    ``feature_layers`` holds ``(weight, bias)`` pairs with weight shaped
    ``(fan_in, fan_out)``. Hidden layers use tanh; the last layer is linear.
    An empty list makes the feature map the identity.
    """

    feature_layers: list[tuple[np.ndarray, np.ndarray]]
    hash_weight: np.ndarray  # (d_f, q)
    hash_bias: np.ndarray  # (q,)
    class_weights: np.ndarray  # (c, q), >= 0
    classifier_weight: np.ndarray  # (d_f, c)
    classifier_bias: np.ndarray  # (c,)
    input_dim: int = field(init=False)

    def __post_init__(self):
        if self.feature_layers:
            self.input_dim = self.feature_layers[0][0].shape[0]
        else:
            self.input_dim = self.hash_weight.shape[0]
        self.validate()

    @property
    def code_length(self) -> int:
        return self.hash_weight.shape[1]

    @property
    def num_classes(self) -> int:
        return self.class_weights.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.hash_weight.shape[0]

    def validate(self):
        width = self.input_dim
        for i, (w, b) in enumerate(self.feature_layers):
            if w.ndim != 2 or w.shape[0] != width or b.shape != (w.shape[1],):
                raise DimensionError(f"feature layer {i} has shape {w.shape}/{b.shape}, expected input {width}")
            width = w.shape[1]
        q, c = self.hash_weight.shape[1], self.class_weights.shape[0]
        if width == 0 or q == 0 or c == 0:
            raise DimensionError("zero-sized dimension")
        if self.hash_weight.shape != (width, q) or self.hash_bias.shape != (q,):
            raise DimensionError(f"hash layer shape {self.hash_weight.shape}, expected ({width}, {q})")
        if self.class_weights.shape != (c, q):
            raise DimensionError(f"class weights shape {self.class_weights.shape}, expected ({c}, {q})")
        if self.classifier_weight.shape != (width, c) or self.classifier_bias.shape != (c,):
            raise DimensionError(f"classifier shape {self.classifier_weight.shape}, expected ({width}, {c})")

    def arrays(self) -> list[tuple[str, np.ndarray]]:
        """Named views of every parameter array, in a fixed order."""
        out = []
        for i, (w, b) in enumerate(self.feature_layers):
            out.append((f"feature.{i}.weight", w))
            out.append((f"feature.{i}.bias", b))
        out += [
            ("hash.weight", self.hash_weight),
            ("hash.bias", self.hash_bias),
            ("class_weights", self.class_weights),
            ("classifier.weight", self.classifier_weight),
            ("classifier.bias", self.classifier_bias),
        ]
        return out

    @classmethod
    def from_arrays(cls, named: dict[str, np.ndarray]) -> "ModelParams":
        layers = []
        i = 0
        while f"feature.{i}.weight" in named:
            layers.append((named[f"feature.{i}.weight"], named[f"feature.{i}.bias"]))
            i += 1
        return cls(
            layers,
            named["hash.weight"],
            named["hash.bias"],
            named["class_weights"],
            named["classifier.weight"],
            named["classifier.bias"],
        )

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for _, a in self.arrays()])

    def unflatten(self, flat: np.ndarray) -> "ModelParams":
        """Build a new instance with this one's shapes, filled from ``flat``."""
        named = {}
        pos = 0
        for name, a in self.arrays():
            named[name] = np.array(flat[pos:pos + a.size], dtype=np.float64).reshape(a.shape)
            pos += a.size
        if pos != flat.size:
            raise DimensionError(f"flat vector has {flat.size} entries, expected {pos}")
        return ModelParams.from_arrays(named)

    def copy(self) -> "ModelParams":
        return ModelParams.from_arrays({k: v.copy() for k, v in self.arrays()})

    def zeros_like(self) -> "ModelParams":
        return ModelParams.from_arrays({k: np.zeros_like(v) for k, v in self.arrays()})


@dataclass
class Dataset:
    """Feature vectors with multi-hot labels."""

    features: np.ndarray  # (n, d)
    labels: np.ndarray  # (n, c), 0/1

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int8)
        if self.features.ndim != 2 or self.labels.ndim != 2:
            raise DimensionError("features and labels must be 2-D")
        if self.features.shape[0] != self.labels.shape[0]:
            raise DimensionError(f"{self.features.shape[0]} feature rows vs {self.labels.shape[0]} label rows")
        if not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be 0/1")
        empty = np.flatnonzero(self.labels.sum(axis=1) == 0)
        if empty.size:
            raise NoLabelError(f"item {empty[0]} has no positive label")

    @property
    def num_items(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return self.labels.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx])


def init_params(dims, q: int, c: int, seed: int) -> ModelParams:
    """Random initialization; class weights start at all ones.

    ``dims`` lists the feature stack widths from input to feature output,
    so ``[d]`` gives an identity feature map and ``[d, 32, 16]`` gives two
    affine layers. Weights are drawn from N(0, 1/fan_in), biases are zero.
    """
    dims = [int(v) for v in dims]
    if not dims or min(dims) < 1:
        raise DimensionError(f"invalid layer sizes {dims}")
    if q < 1:
        raise DimensionError("code length must be >= 1")
    if c < 2:
        raise DimensionError("need at least 2 classes")
    rng = np.random.default_rng(seed)

    def affine(fan_in, fan_out):
        return rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out)), np.zeros(fan_out)

    layers = [affine(a, b) for a, b in zip(dims[:-1], dims[1:])]
    d_f = dims[-1]
    hash_w, hash_b = affine(d_f, q)
    cls_w, cls_b = affine(d_f, c)
    return ModelParams(layers, hash_w, hash_b, np.ones((c, q)), cls_w, cls_b)


def _check_last(x, size, what):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != size:
        raise DimensionError(f"{what}: expected last dimension {size}, got shape {x.shape}")
    return x


def feature_activations(params: ModelParams, x) -> list[np.ndarray]:
    """Inputs followed by the output of every feature layer."""
    a = _check_last(x, params.input_dim, "input")
    acts = [a]
    last = len(params.feature_layers) - 1
    for i, (w, b) in enumerate(params.feature_layers):
        a = a @ w + b
        if i != last:
            a = np.tanh(a)
        acts.append(a)
    return acts


def forward_features(params: ModelParams, x) -> np.ndarray:
    return feature_activations(params, x)[-1]


def sigmoid(z):
    # exp of a nonpositive argument only; avoids overflow warnings
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def hash_logits(params: ModelParams, f_x) -> np.ndarray:
    f_x = _check_last(f_x, params.feature_dim, "features")
    return f_x @ params.hash_weight + params.hash_bias


def forward_hash(params: ModelParams, f_x) -> np.ndarray:
    return sigmoid(hash_logits(params, f_x))


def binarize(h) -> np.ndarray:
    """Threshold activations at 0.5; a tie maps to bit 1."""
    return (np.asarray(h) >= 0.5).astype(np.uint8)


def class_logits(params: ModelParams, f_x) -> np.ndarray:
    f_x = _check_last(f_x, params.feature_dim, "features")
    return f_x @ params.classifier_weight + params.classifier_bias


def softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def forward_class_probs(params: ModelParams, f_x) -> np.ndarray:
    return softmax(class_logits(params, f_x))


def class_weight_row(params_or_weights, label) -> np.ndarray:
    """Average of the class-weight rows picked out by a multi-hot label.

    Accepts either a :class:`ModelParams` or a bare ``(c, q)`` matrix. A
    batch of labels returns one fused row per label.
    """
    weights = getattr(params_or_weights, "class_weights", params_or_weights)
    label = np.asarray(label, dtype=np.float64)
    if label.shape[-1] != weights.shape[0]:
        raise DimensionError(f"label length {label.shape[-1]} vs {weights.shape[0]} classes")
    counts = label.sum(axis=-1, keepdims=True)
    if np.any(counts == 0):
        raise NoLabelError("label has no positive entry")
    return (label @ weights) / counts
