"""Retrieval-quality metrics.

An item is relevant to a query when their label sets intersect. Average
precision uses the bounded form

    AP = (1/R) * sum_k (R_k / k) * rel_k

where ``R_k`` counts relevant items among the top ``k`` and ``R`` is either
the number of relevant items in the database or, for truncated rankings,
optionally the number retrieved within the cutoff.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from . import scan
from .errors import DimensionError, EmptyInputError, RangeError
from .index import BitCodeSet, RankedList, query_words

DEFAULT_KS = (1, 5, 10, 20, 50, 100, 200, 500, 1000)
RECALL_LEVELS = tuple(round(0.1 * i, 1) for i in range(1, 11))


class Score(NamedTuple):
    value: float
    empty: bool = False


class PRCurve(NamedTuple):
    points: list[tuple[float, float]]
    empty: bool = False


class RelevanceJudge:
    """Relevance of database items to a query by shared labels."""

    def __init__(self, db_labels):
        self.db_labels = np.asarray(db_labels, dtype=np.int32)
        if self.db_labels.ndim != 2:
            raise DimensionError("database labels must be 2-D")

    @property
    def num_items(self) -> int:
        return self.db_labels.shape[0]

    def relevant(self, query_label) -> np.ndarray:
        query_label = np.asarray(query_label, dtype=np.int32)
        if query_label.shape != (self.db_labels.shape[1],):
            raise DimensionError(f"query label shape {query_label.shape} vs {self.db_labels.shape[1]} classes")
        return (self.db_labels @ query_label) > 0


def _indices(ranked):
    return ranked.indices if isinstance(ranked, RankedList) else np.asarray(ranked, dtype=np.int64)


def average_precision(ranked, judge: RelevanceJudge, query_label, truncation=None, normalize="database") -> Score:
    """AP of one ranking.

    ``normalize`` picks ``R``: ``"database"`` counts every relevant item,
    ``"retrieved"`` only those inside the truncated prefix. Returns 0 with
    ``empty=True`` when ``R`` is zero.
    """
    if normalize not in ("database", "retrieved"):
        raise ValueError(f"unknown normalization {normalize!r}")
    idx = _indices(ranked)
    if idx.size == 0:
        raise EmptyInputError("ranking is empty")
    mask = judge.relevant(query_label)
    rel = mask[idx]
    if truncation is not None:
        if truncation < 1:
            raise RangeError("truncation must be >= 1")
        rel = rel[:truncation]
    total = int(rel.sum()) if normalize == "retrieved" else int(mask.sum())
    if total == 0:
        return Score(0.0, True)
    hits = np.cumsum(rel)
    ranks = np.arange(1, rel.size + 1)
    # correctly rounded sum, so the value does not depend on summation order
    return Score(math.fsum((hits / ranks)[rel]) / total)


def mean_average_precision(query_labels, rankings, judge: RelevanceJudge, truncation=None, normalize="database") -> float:
    query_labels = list(query_labels)
    rankings = list(rankings)
    if not query_labels:
        raise EmptyInputError("no queries")
    if len(rankings) != len(query_labels):
        raise DimensionError(f"{len(rankings)} rankings for {len(query_labels)} queries")
    aps = [average_precision(r, judge, y, truncation, normalize).value for r, y in zip(rankings, query_labels)]
    return math.fsum(aps) / len(aps)


def precision_at_k(ranked, judge: RelevanceJudge, query_label, ks) -> list[tuple[int, float]]:
    idx = _indices(ranked)
    rel = judge.relevant(query_label)[idx]
    hits = np.cumsum(rel)
    out = []
    for k in ks:
        if not 1 <= k <= idx.size:
            raise RangeError(f"k={k} outside [1, {idx.size}]")
        out.append((int(k), float(hits[k - 1] / k)))
    return out


def precision_within_radius(codes: BitCodeSet, query_code, judge: RelevanceJudge, query_label, radius: int = 2) -> Score:
    """Precision among database items within a Hamming radius (hash lookup)."""
    if not 0 <= radius <= codes.code_length:
        raise RangeError(f"radius {radius} outside [0, {codes.code_length}]")
    hits = scan.within_radius(codes.words, query_words(query_code, codes.code_length), radius)
    if hits.size == 0:
        return Score(0.0, True)
    return Score(float(judge.relevant(query_label)[hits].mean()))


def pr_curve(ranked, judge: RelevanceJudge, query_label) -> PRCurve:
    """One (recall, precision) point at each rank holding a relevant item."""
    idx = _indices(ranked)
    if idx.size != judge.num_items:
        raise ValueError(f"ranking covers {idx.size} of {judge.num_items} items")
    rel = judge.relevant(query_label)[idx]
    total = int(rel.sum())
    if total == 0:
        return PRCurve([], True)
    ranks = np.flatnonzero(rel) + 1
    hits = np.arange(1, total + 1)
    return PRCurve([(float(r / total), float(r / k)) for r, k in zip(hits, ranks)])


def precision_at_recall(curve: PRCurve, levels=RECALL_LEVELS) -> list[float]:
    """Precision at the first point reaching each recall level."""
    recalls = np.array([r for r, _ in curve.points])
    precisions = np.array([p for _, p in curve.points])
    out = []
    for level in levels:
        # small slack so e.g. 3/10 counts as reaching 0.3
        pos = np.searchsorted(recalls, level - 1e-12)
        out.append(float(precisions[pos]))
    return out


@dataclass
class EvalReport:
    map: float
    precision_at_k: list[tuple[int, float]]
    precision_within_radius2: float
    pr_curve: list[tuple[float, float]]
    metadata: dict = field(default_factory=dict)

    def to_text(self) -> str:
        data = asdict(self)
        data["precision_at_k"] = [list(p) for p in self.precision_at_k]
        data["pr_curve"] = [list(p) for p in self.pr_curve]
        return json.dumps(data, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "EvalReport":
        data = json.loads(text)
        data["precision_at_k"] = [(int(k), float(p)) for k, p in data["precision_at_k"]]
        data["pr_curve"] = [(float(r), float(p)) for r, p in data["pr_curve"]]
        return cls(**data)


def evaluate(
    rankings,
    query_labels,
    judge: RelevanceJudge,
    codes: BitCodeSet | None = None,
    query_codes=None,
    truncation=None,
    normalize=None,
    ks=DEFAULT_KS,
    radius: int = 2,
    mode: str = "exact",
) -> EvalReport:
    """Aggregate every metric over a query set.

    ``normalize`` defaults to ``"retrieved"`` for truncated MAP and
    ``"database"`` otherwise. Radius precision needs ``codes`` and
    ``query_codes``; it is reported as 0 without them.
    """
    rankings = list(rankings)
    query_labels = np.asarray(query_labels)
    if len(rankings) == 0:
        raise EmptyInputError("no queries")
    if normalize is None:
        normalize = "database" if truncation is None else "retrieved"
    n = judge.num_items
    ks = [k for k in ks if k <= n] or [n]
    mean_ap = mean_average_precision(query_labels, rankings, judge, truncation, normalize)
    no_relevant = sum(int(judge.relevant(y).sum() == 0) for y in query_labels)

    pk = np.mean([[p for _, p in precision_at_k(r, judge, y, ks)] for r, y in zip(rankings, query_labels)], axis=0)

    curves = [pr_curve(r, judge, y) for r, y in zip(rankings, query_labels)]
    usable = [precision_at_recall(c) for c in curves if not c.empty]
    pr = np.mean(usable, axis=0) if usable else np.zeros(len(RECALL_LEVELS))

    radius_scores = []
    if codes is not None and query_codes is not None:
        radius_scores = [
            precision_within_radius(codes, qc, judge, y, radius) for qc, y in zip(query_codes, query_labels)
        ]
    return EvalReport(
        map=mean_ap,
        precision_at_k=[(int(k), float(p)) for k, p in zip(ks, pk)],
        precision_within_radius2=float(np.mean([s.value for s in radius_scores])) if radius_scores else 0.0,
        pr_curve=[(float(r), float(p)) for r, p in zip(RECALL_LEVELS, pr)],
        metadata={
            "code_length": codes.code_length if codes is not None else None,
            "num_items": n,
            "num_queries": len(rankings),
            "mode": mode,
            "map_truncation": truncation,
            "map_normalization": normalize,
            "radius": radius,
            "empty_radius_buckets": sum(s.empty for s in radius_scores),
            "queries_without_relevant": no_relevant,
        },
    )
