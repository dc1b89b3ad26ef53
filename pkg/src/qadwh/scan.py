"""Scan kernel dispatch.

The compiled extension is used when it imports; otherwise the numpy
versions take over. Both produce identical results, including the
floating-point summation order of weighted distances.
"""

import numpy as np

from . import _pyscan

try:
    from . import _cscan
except ImportError:  # extension not built
    _cscan = None

BACKENDS = {"python": _pyscan}
if _cscan is not None:
    BACKENDS["cython"] = _cscan

BACKEND = "cython" if _cscan is not None else "python"


def get_backend(name=None):
    """Kernel module by name; ``None`` selects the default."""
    name = name or BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"scan backend {name!r} unavailable; have {sorted(BACKENDS)}") from None


def hamming(words, query, backend=None):
    out = np.empty(words.shape[0], dtype=np.int32)
    get_backend(backend).hamming_scan(words, query, out)
    return out


def weighted(words, query, w2, rows=None, backend=None):
    impl = get_backend(backend)
    w2 = np.ascontiguousarray(w2, dtype=np.float64)
    if rows is None:
        out = np.empty(words.shape[0])
        impl.weighted_scan(words, query, w2, out)
    else:
        rows = np.ascontiguousarray(rows, dtype=np.int64)
        out = np.empty(rows.shape[0])
        impl.weighted_scan_rows(words, query, w2, rows, out)
    return out


def within_radius(words, query, radius, backend=None):
    out = np.empty(words.shape[0], dtype=np.int64)
    count = get_backend(backend).radius_filter(words, query, int(radius), out)
    return out[:count]
