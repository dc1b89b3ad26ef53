"""Numpy versions of the scan kernels, used when the extension is not built.

Signatures mirror ``_cscan``: results are written into ``out``.
"""

import numpy as np

_CHUNK = 1 << 16


def hamming_scan(db, query, out):
    for s in range(0, db.shape[0], _CHUNK):
        block = np.bitwise_count(db[s:s + _CHUNK] ^ query)
        out[s:s + _CHUNK] = block.sum(axis=1, dtype=np.int32)


def _weighted_block(block, query, w2, out):
    bits = np.unpackbits((block ^ query).view(np.uint8), axis=1, bitorder="little")
    acc = np.zeros(block.shape[0])
    # one bit at a time, in order, to reproduce a sequential per-bit sum
    for k in range(min(w2.size, bits.shape[1])):
        acc += w2[k] * bits[:, k]
    out[...] = acc


def weighted_scan(db, query, w2, out):
    for s in range(0, db.shape[0], _CHUNK):
        _weighted_block(db[s:s + _CHUNK], query, w2, out[s:s + _CHUNK])


def weighted_scan_rows(db, query, w2, rows, out):
    for s in range(0, rows.shape[0], _CHUNK):
        _weighted_block(db[rows[s:s + _CHUNK]], query, w2, out[s:s + _CHUNK])


def radius_filter(db, query, radius, out):
    dist = np.empty(db.shape[0], dtype=np.int32)
    hamming_scan(db, query, dist)
    hits = np.flatnonzero(dist <= radius)
    out[:hits.size] = hits
    return hits.size
