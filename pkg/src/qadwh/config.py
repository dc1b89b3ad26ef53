"""Plain-text run configuration.

One ``section.key = value`` per line; ``#`` starts a comment. Unknown keys
and malformed values are rejected before any work starts.
"""

from __future__ import annotations

from pathlib import Path

from .errors import ParseError
from .trainer import TrainConfig


def _int_list(text):
    text = str(text).strip()
    return [int(v) for v in text.split(",")] if text else []


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _mode(text):
    v = str(text).strip().replace("_", "-")
    if v not in ("exact", "two-phase"):
        raise ValueError(f"mode must be exact or two-phase, got {text!r}")
    return v


SCHEMA = {
    "data.n": (int, 2000),
    "data.num_queries": (int, 200),
    "data.d": (int, 16),
    "data.c": (int, 4),
    "data.multi_label_prob": (float, 0.0),
    "data.noise_sigma": (float, 1.0),
    "data.seed": (int, 0),
    "model.hidden": (_int_list, [32, 16]),
    "model.code_length": (int, 12),
    "train.batch_size": (int, 64),
    "train.initial_lr": (float, 0.001),
    "train.lr_drop_factor": (float, 10.0),
    "train.lr_drop_every": (int, 2000),
    "train.weight_decay": (float, 0.0005),
    "train.max_steps": (int, 3000),
    "train.margin": (float, 1.0),
    "train.loss_balance": (float, 1.0),
    "train.seed": (int, 0),
    "train.convergence_window": (int, 500),
    "train.convergence_tolerance": (float, 1e-6),
    "train.freeze_class_weights": (_bool, False),
    "retrieval.mode": (_mode, "exact"),
    "retrieval.radius": (int, 2),
    "retrieval.k": (int, 0),
    "eval.truncation": (int, 0),
    "eval.ks": (_int_list, [1, 5, 10, 20, 50, 100, 200, 500, 1000]),
    "eval.radius": (int, 2),
}


class RunConfig:
    """Validated key/value settings with defaults for every known key."""

    def __init__(self, values: dict | None = None):
        self.values = {k: default for k, (_, default) in SCHEMA.items()}
        for key, value in (values or {}).items():
            self.set(key, value)

    def set(self, key, value, where=None):
        if key not in SCHEMA:
            raise ParseError(f"unknown config key {key!r}", *(where or (None, None)))
        conv = SCHEMA[key][0]
        try:
            self.values[key] = conv(value) if isinstance(value, str) else value
        except (TypeError, ValueError) as exc:
            raise ParseError(f"bad value for {key}: {exc}", *(where or (None, None))) from None

    def __getitem__(self, key):
        return self.values[key]

    def train_config(self) -> TrainConfig:
        kwargs = {k.split(".", 1)[1]: v for k, v in self.values.items() if k.startswith("train.")}
        try:
            return TrainConfig(**kwargs)
        except ValueError as exc:
            raise ParseError(f"invalid training config: {exc}") from None

    def validate(self):
        self.train_config()
        for key in ("data.n", "data.d", "data.c", "model.code_length"):
            if self[key] < 1:
                raise ParseError(f"{key} must be positive")
        if self["model.code_length"] > 65535:
            raise ParseError("model.code_length must fit in 16 bits")
        if any(h < 1 for h in self["model.hidden"]):
            raise ParseError("model.hidden widths must be positive")
        for key in ("retrieval.radius", "retrieval.k", "eval.truncation", "eval.radius", "data.num_queries"):
            if self[key] < 0:
                raise ParseError(f"{key} must be nonnegative")
        if any(k < 1 for k in self["eval.ks"]):
            raise ParseError("eval.ks entries must be >= 1")
        return self

    def to_dict(self) -> dict:
        return dict(self.values)


def parse_config(text: str, path=None) -> RunConfig:
    cfg = RunConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError(f"expected 'section.key = value', got {raw!r}", path, lineno)
        cfg.set(key.strip(), value.strip(), (path, lineno))
    return cfg.validate()


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig().validate()
    return parse_config(Path(path).read_text(), path)
