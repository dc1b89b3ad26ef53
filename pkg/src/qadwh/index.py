"""Bit-packed code storage and (weighted) Hamming ranking.

Codes are ``q``-bit vectors with bit ``k`` stored in byte ``k // 8`` at
position ``k % 8``, least significant first. For scanning, each code is
also held as little-endian 64-bit words so that XOR + popcount runs one
machine word at a time.

Weighted Hamming distance between a query and an item is
``sum_k w[k]**2 * (a_k xor b_k)``, with per-query weights fused from the
class-weight matrix by the query's predicted class probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import scan
from .errors import DimensionError, RangeError
from .model import (
    ModelParams,
    binarize,
    forward_class_probs,
    forward_features,
    forward_hash,
)


class BitCodeSet:
    """Immutable set of ``n`` packed ``q``-bit codes."""

    def __init__(self, packed: np.ndarray, code_length: int):
        packed = np.ascontiguousarray(packed, dtype=np.uint8)
        nbytes = (code_length + 7) // 8
        if code_length < 1 or packed.ndim != 2 or packed.shape[1] != nbytes:
            raise DimensionError(f"packed codes of shape {packed.shape} do not hold {code_length}-bit codes")
        spare = nbytes * 8 - code_length
        if spare and np.any(packed[:, -1] >> (8 - spare)):
            raise ValueError("padding bits beyond the code length must be zero")
        self.packed = packed
        self.code_length = code_length
        self.words = _to_words(packed)
        self.packed.flags.writeable = False
        self.words.flags.writeable = False

    @property
    def num_items(self) -> int:
        return self.packed.shape[0]

    def __len__(self):
        return self.num_items

    def unpack(self) -> np.ndarray:
        return unpack_codes(self.packed, self.code_length)

    def unpack_row(self, i: int) -> np.ndarray:
        self._check(i)
        return unpack_codes(self.packed[i:i + 1], self.code_length)[0]

    def _check(self, i):
        if not 0 <= i < self.num_items:
            raise RangeError(f"item {i} out of range for {self.num_items} codes")

    def __eq__(self, other):
        return (
            isinstance(other, BitCodeSet)
            and self.code_length == other.code_length
            and np.array_equal(self.packed, other.packed)
        )


def pack_codes(bits) -> np.ndarray:
    bits = np.asarray(bits)
    if bits.ndim != 2:
        raise DimensionError("codes must be a 2-D array of bits")
    return np.packbits(bits.astype(np.uint8) & 1, axis=1, bitorder="little")


def unpack_codes(packed: np.ndarray, code_length: int) -> np.ndarray:
    return np.unpackbits(packed, axis=1, count=code_length, bitorder="little")


def _to_words(packed: np.ndarray) -> np.ndarray:
    n, nbytes = packed.shape
    nwords = (nbytes + 7) // 8
    buf = np.zeros((n, nwords * 8), dtype=np.uint8)
    buf[:, :nbytes] = packed
    return buf.view("<u8").astype(np.uint64)


def query_words(code, code_length: int) -> np.ndarray:
    code = np.asarray(code)
    if code.shape != (code_length,):
        raise DimensionError(f"query code has shape {code.shape}, expected ({code_length},)")
    return _to_words(pack_codes(code[None, :]))[0]


def build_index(codes) -> BitCodeSet:
    """Pack a list (or 2-D array) of equal-length bit vectors."""
    rows = [np.asarray(c).ravel() for c in codes]
    if not rows:
        raise DimensionError("no codes given")
    q = rows[0].size
    if any(r.size != q for r in rows):
        raise DimensionError("codes have mixed lengths")
    return BitCodeSet(pack_codes(np.stack(rows)), q)


def hamming_distance(codes: BitCodeSet, i: int, j: int) -> int:
    codes._check(i)
    codes._check(j)
    return int(np.bitwise_count(codes.words[i] ^ codes.words[j]).sum())


def query_weights(class_weights, probs) -> np.ndarray:
    """Per-query bit weights: class rows mixed by predicted class probabilities."""
    class_weights = np.asarray(class_weights, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    if class_weights.ndim != 2 or probs.shape[-1] != class_weights.shape[0]:
        raise DimensionError(f"probabilities of shape {probs.shape} vs class weights {class_weights.shape}")
    return probs @ class_weights


def weighted_hamming(w_q, code_a, code_b) -> float:
    w_q = np.asarray(w_q, dtype=np.float64)
    a = np.asarray(code_a).astype(bool)
    b = np.asarray(code_b).astype(bool)
    if not (w_q.shape == a.shape == b.shape) or w_q.ndim != 1:
        raise DimensionError(f"shape mismatch {w_q.shape}, {a.shape}, {b.shape}")
    acc = 0.0
    for k in np.flatnonzero(a ^ b):
        acc += w_q[k] * w_q[k]
    return acc


@dataclass
class RankedList:
    """Items ordered by ascending distance, ties broken by ascending index."""

    indices: np.ndarray
    distances: np.ndarray
    key: str = "weighted_hamming"
    tie_break: str = "index"

    def __len__(self):
        return self.indices.size

    def __iter__(self):
        return iter(zip(self.indices.tolist(), self.distances.tolist()))


def _order(items: np.ndarray, dist: np.ndarray, k: int | None) -> tuple[np.ndarray, np.ndarray]:
    # items arrive in ascending index order; a stable sort on distance keeps that as tie-break
    if k is not None and k < dist.size:
        cutoff = np.partition(dist, k - 1)[k - 1]
        keep = np.flatnonzero(dist <= cutoff)
        items, dist = items[keep], dist[keep]
    order = np.argsort(dist, kind="stable")
    if k is not None:
        order = order[:k]
    return items[order], dist[order]


def _weight_squares(w_q, q):
    w_q = np.asarray(w_q, dtype=np.float64)
    if w_q.shape != (q,):
        raise DimensionError(f"weights of shape {w_q.shape}, expected ({q},)")
    return w_q * w_q


def rank_hamming(codes: BitCodeSet, query_code, k: int | None = None, backend=None) -> RankedList:
    """Plain Hamming ranking, the unweighted baseline."""
    dist = scan.hamming(codes.words, query_words(query_code, codes.code_length), backend)
    idx, dist = _order(np.arange(codes.num_items), dist, k)
    return RankedList(idx, dist.astype(np.float64), key="hamming")


def rank_exact(codes: BitCodeSet, query_code, w_q, k: int | None = None, backend=None) -> RankedList:
    """Rank every item by weighted Hamming distance to the query."""
    w2 = _weight_squares(w_q, codes.code_length)
    dist = scan.weighted(codes.words, query_words(query_code, codes.code_length), w2, backend=backend)
    idx, dist = _order(np.arange(codes.num_items), dist, k)
    return RankedList(idx, dist)


def rank_two_phase(codes: BitCodeSet, query_code, w_q, radius: int, k: int, backend=None) -> RankedList:
    """Hamming-radius filter followed by weighted re-ranking of the survivors.

    The radius grows by one until at least ``k`` items qualify (or it
    reaches ``q``). Items outside the final radius are never returned, so
    for ``radius < q`` this can differ from :func:`rank_exact`.
    """
    q = codes.code_length
    if not 0 <= radius <= q:
        raise RangeError(f"radius {radius} outside [0, {q}]")
    if k < 1:
        raise RangeError("k must be >= 1")
    w2 = _weight_squares(w_q, q)
    qw = query_words(query_code, q)
    k = min(k, codes.num_items)
    cand = scan.within_radius(codes.words, qw, radius, backend)
    if cand.size < k:
        ham = scan.hamming(codes.words, qw, backend)
        counts = np.cumsum(np.bincount(ham, minlength=q + 1))
        radius = max(radius, int(np.searchsorted(counts, k)))
        cand = np.flatnonzero(ham <= radius)
    dist = scan.weighted(codes.words, qw, w2, rows=cand, backend=backend)
    idx, dist = _order(cand, dist, k)
    return RankedList(idx, dist)


def encode(params: ModelParams, features) -> np.ndarray:
    """Binary codes (one row per item) for a batch of feature vectors."""
    return binarize(forward_hash(params, forward_features(params, features)))


def retrieve(
    params: ModelParams,
    query_features,
    codes: BitCodeSet,
    mode: str = "exact",
    radius: int = 2,
    k: int | None = None,
    backend=None,
) -> RankedList:
    """Encode one query, fuse its bit weights, and rank the database."""
    if params.code_length != codes.code_length:
        raise DimensionError(f"model produces {params.code_length}-bit codes, index holds {codes.code_length}")
    f = forward_features(params, query_features)
    code = binarize(forward_hash(params, f))
    w_q = query_weights(params.class_weights, forward_class_probs(params, f))
    if mode == "exact":
        return rank_exact(codes, code, w_q, k, backend)
    if mode in ("two_phase", "two-phase"):
        return rank_two_phase(codes, code, w_q, radius, k if k is not None else codes.num_items, backend)
    raise ValueError(f"unknown ranking mode {mode!r}")
