"""End-to-end chains: train, encode, rank, evaluate, and the ablation variants.

Variants
--------
qadwh
    Full method: learned class weights fused per query.
dwh
    The trained model with every class row replaced by the column mean, so
    all queries share one weight vector. Codes are unchanged.
unweighted
    Trained with class weights frozen at one; ranking reduces to Hamming.
lsh
    Random signed projections of the raw features, no training.

Every variant is expressed as a :class:`ModelParams`, so encoding and
ranking are shared.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .evaluation import DEFAULT_KS, EvalReport, RelevanceJudge, evaluate
from .index import BitCodeSet, RankedList, encode, pack_codes, retrieve
from .model import Dataset, ModelParams, init_params
from .trainer import TrainConfig, TrainReport, train

VARIANTS = ("qadwh", "dwh", "unweighted", "lsh")


def fixed_weights(params: ModelParams) -> ModelParams:
    """Copy of ``params`` with every class-weight row set to the column mean.

    The classifier is zeroed as well. Its output no longer matters once the
    rows agree, and a constant class distribution makes the fused weights
    bit-identical across queries instead of equal only up to rounding.
    """
    out = params.copy()
    out.class_weights[...] = params.class_weights.mean(axis=0)
    out.classifier_weight[...] = 0.0
    out.classifier_bias[...] = 0.0
    return out


def lsh_params(d: int, q: int, c: int, seed: int) -> ModelParams:
    """Random-hyperplane hashing as a network with no feature layers.

    sigmoid(z) >= 0.5 exactly when z >= 0, so the codes are the signs of
    random projections. Class weights are all ones and the classifier is
    zero, which makes every query weight vector all ones.
    """
    rng = np.random.default_rng(seed)
    return ModelParams(
        [],
        rng.normal(size=(d, q)),
        np.zeros(q),
        np.ones((c, q)),
        np.zeros((d, c)),
        np.zeros(c),
    )


def encode_dataset(params: ModelParams, ds: Dataset) -> BitCodeSet:
    return BitCodeSet(pack_codes(encode(params, ds.features)), params.code_length)


def rank_queries(params, queries: Dataset, codes: BitCodeSet, mode="exact", radius=2, k=None, backend=None) -> list[RankedList]:
    return [retrieve(params, x, codes, mode, radius, k, backend) for x in queries.features]


def evaluate_queries(params, queries: Dataset, database: Dataset, codes: BitCodeSet, rankings, truncation=None, ks=DEFAULT_KS, radius=2, mode="exact") -> EvalReport:
    return evaluate(
        rankings,
        queries.labels,
        RelevanceJudge(database.labels),
        codes=codes,
        query_codes=encode(params, queries.features),
        truncation=truncation,
        ks=ks,
        radius=radius,
        mode=mode,
    )


@dataclass
class VariantResult:
    variant: str
    params: ModelParams
    train_report: TrainReport | None
    codes: BitCodeSet
    rankings: list[RankedList]
    report: EvalReport


def train_variant(variant: str, database: Dataset, dims, q: int, cfg: TrainConfig, callback=None, trained=None):
    """Parameters for ``variant``; ``trained`` reuses a QaDWH model for dwh."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {', '.join(VARIANTS)}")
    c = database.num_classes
    if variant == "lsh":
        return lsh_params(database.feature_dim, q, c, cfg.seed), None
    if variant == "dwh" and trained is not None:
        return fixed_weights(trained), None
    if variant == "unweighted":
        cfg = replace(cfg, freeze_class_weights=True)
    params = init_params([database.feature_dim, *dims], q, c, cfg.seed)
    params, report = train(params, database, cfg, callback)
    if variant == "dwh":
        params = fixed_weights(params)
    return params, report


def run_variant(
    variant: str,
    database: Dataset,
    queries: Dataset,
    dims,
    q: int,
    cfg: TrainConfig,
    mode="exact",
    radius=2,
    truncation=None,
    ks=DEFAULT_KS,
    callback=None,
    trained=None,
) -> VariantResult:
    params, report = train_variant(variant, database, dims, q, cfg, callback, trained)
    codes = encode_dataset(params, database)
    rankings = rank_queries(params, queries, codes, mode, radius)
    ev = evaluate_queries(params, queries, database, codes, rankings, truncation, ks, radius, mode)
    ev.metadata["variant"] = variant
    return VariantResult(variant, params, report, codes, rankings, ev)
