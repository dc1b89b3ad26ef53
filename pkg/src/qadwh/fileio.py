"""On-disk formats.

dataset (TSV)
    header ``n<TAB>d<TAB>c``; then one line per item with ``d`` floats and a
    final field of ``;``-separated 0-based class indices.
codes (binary)
    ``b"QDWH"``, version byte, ``q`` as uint16 LE, ``n`` as uint64 LE, then
    ``n`` records of ``ceil(q/8)`` bytes, bit ``k`` at byte ``k//8``, LSB first.
checkpoint (text)
    ``key value`` header lines, then one ``array <name> <dims...>`` block
    per parameter with one line of decimal values per row.
rankings (TSV)
    ``query_idx<TAB>rank<TAB>item_idx<TAB>distance``, ranks starting at 1.

All writers go through a temp file in the target directory and rename it
into place, so a failed command never leaves a partial artifact.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import DimensionError, ParseError
from .index import BitCodeSet, RankedList
from .model import Dataset, ModelParams

CODES_MAGIC = b"QDWH"
CODES_VERSION = 1
CODES_HEADER = struct.Struct("<4sBHQ")
CHECKPOINT_VERSION = 1


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def atomic_write(path, data) -> None:
    path = Path(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    return "%.17g" % x


# -- datasets ---------------------------------------------------------------


def format_dataset(ds: Dataset) -> str:
    lines = [f"{ds.num_items}\t{ds.feature_dim}\t{ds.num_classes}"]
    for x, y in zip(ds.features, ds.labels):
        fields = [_fmt(v) for v in x]
        fields.append(";".join(str(j) for j in np.flatnonzero(y)))
        lines.append("\t".join(fields))
    return "\n".join(lines) + "\n"


def write_dataset(ds: Dataset, path) -> None:
    atomic_write(path, format_dataset(ds))


def parse_dataset(text: str, path=None) -> Dataset:
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty file", path, 1)
    head = lines[0].split("\t")
    try:
        n, d, c = (int(v) for v in head)
    except ValueError:
        raise ParseError(f"malformed header {lines[0]!r}, expected n<TAB>d<TAB>c", path, 1) from None
    if n < 0 or d < 1 or c < 1:
        raise ParseError(f"invalid sizes n={n} d={d} c={c}", path, 1)
    body = lines[1:]
    if len(body) != n:
        raise ParseError(f"header declares {n} items, found {len(body)} lines", path, len(lines))
    features = np.empty((n, d))
    labels = np.zeros((n, c), dtype=np.int8)
    for i, line in enumerate(body):
        lineno = i + 2
        fields = line.split("\t")
        if len(fields) != d + 1:
            raise ParseError(f"expected {d + 1} fields, got {len(fields)}", path, lineno)
        try:
            features[i] = [float(v) for v in fields[:d]]
        except ValueError:
            raise ParseError("non-numeric feature value", path, lineno) from None
        if not np.all(np.isfinite(features[i])):
            raise ParseError("non-finite feature value", path, lineno)
        if fields[d] == "":
            raise ParseError("empty label field", path, lineno)
        for tok in fields[d].split(";"):
            try:
                j = int(tok)
            except ValueError:
                raise ParseError(f"bad class index {tok!r}", path, lineno) from None
            if not 0 <= j < c:
                raise ParseError(f"class index {j} out of range [0, {c})", path, lineno)
            labels[i, j] = 1
    return Dataset(features, labels)


def read_dataset(path) -> Dataset:
    return parse_dataset(Path(path).read_text(), path)


# -- codes ------------------------------------------------------------------


def codes_to_bytes(codes: BitCodeSet) -> bytes:
    head = CODES_HEADER.pack(CODES_MAGIC, CODES_VERSION, codes.code_length, codes.num_items)
    return head + codes.packed.tobytes()


def codes_from_bytes(data: bytes, path=None) -> BitCodeSet:
    if len(data) < CODES_HEADER.size:
        raise ParseError("truncated header", path)
    magic, version, q, n = CODES_HEADER.unpack_from(data)
    if magic != CODES_MAGIC:
        raise ParseError(f"bad magic {magic!r}", path)
    if version != CODES_VERSION:
        raise ParseError(f"unsupported codes version {version}", path)
    if q < 1:
        raise ParseError("code length must be >= 1", path)
    nbytes = (q + 7) // 8
    expected = CODES_HEADER.size + n * nbytes
    if len(data) != expected:
        raise ParseError(f"file is {len(data)} bytes, expected {expected} for n={n}, q={q}", path)
    packed = np.frombuffer(data, dtype=np.uint8, offset=CODES_HEADER.size).reshape(n, nbytes)
    try:
        return BitCodeSet(packed.copy(), q)
    except ValueError as exc:
        raise ParseError(str(exc), path) from None


def write_codes(codes: BitCodeSet, path) -> None:
    atomic_write(path, codes_to_bytes(codes))


def read_codes(path) -> BitCodeSet:
    return codes_from_bytes(Path(path).read_bytes(), path)


# -- checkpoints ------------------------------------------------------------


def format_checkpoint(params: ModelParams, step: int = 0, config: dict | None = None) -> str:
    lines = [
        "qadwh-checkpoint",
        f"version {CHECKPOINT_VERSION}",
        f"step {int(step)}",
        f"config {json.dumps(config or {}, sort_keys=True)}",
    ]
    for name, a in params.arrays():
        lines.append(f"array {name} " + " ".join(str(s) for s in a.shape))
        rows = a.reshape(1, -1) if a.ndim == 1 else a
        lines.extend(" ".join(repr(float(v)) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def parse_checkpoint(text: str, path=None) -> tuple[ModelParams, int, dict]:
    lines = text.splitlines()
    if not lines or lines[0] != "qadwh-checkpoint":
        raise ParseError("not a checkpoint file", path, 1)
    header = {}
    pos = 1
    while pos < len(lines) and not lines[pos].startswith("array "):
        key, _, value = lines[pos].partition(" ")
        header[key] = value
        pos += 1
    try:
        version = int(header["version"])
        step = int(header["step"])
        config = json.loads(header.get("config", "{}"))
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad checkpoint header: {exc}", path) from None
    if version != CHECKPOINT_VERSION:
        raise ParseError(f"unsupported checkpoint version {version}", path)
    named = {}
    while pos < len(lines):
        parts = lines[pos].split()
        if len(parts) < 3 or parts[0] != "array":
            raise ParseError(f"expected array header, got {lines[pos]!r}", path, pos + 1)
        name = parts[1]
        shape = tuple(int(s) for s in parts[2:])
        nrows = shape[0] if len(shape) == 2 else 1
        block = lines[pos + 1:pos + 1 + nrows]
        if len(block) != nrows:
            raise ParseError(f"array {name} truncated", path, pos + 1)
        try:
            values = [float(v) for row in block for v in row.split()]
        except ValueError:
            raise ParseError(f"non-numeric value in array {name}", path, pos + 1) from None
        if len(values) != int(np.prod(shape)):
            raise ParseError(f"array {name} has {len(values)} values, expected shape {shape}", path, pos + 1)
        named[name] = np.array(values, dtype=np.float64).reshape(shape)
        pos += 1 + nrows
    try:
        params = ModelParams.from_arrays(named)
    except (KeyError, DimensionError) as exc:
        raise ParseError(f"inconsistent checkpoint: {exc}", path) from None
    return params, step, config


def write_checkpoint(params: ModelParams, path, step: int = 0, config: dict | None = None) -> None:
    atomic_write(path, format_checkpoint(params, step, config))


def read_checkpoint(path) -> tuple[ModelParams, int, dict]:
    return parse_checkpoint(Path(path).read_text(), path)


# -- rankings and logs ------------------------------------------------------


def format_rankings(rankings) -> str:
    out = []
    for qi, ranked in enumerate(rankings):
        for rank, (item, dist) in enumerate(ranked, start=1):
            out.append(f"{qi}\t{rank}\t{item}\t{dist!r}")
    return "\n".join(out) + ("\n" if out else "")


def write_rankings(rankings, path) -> None:
    atomic_write(path, format_rankings(rankings))


def read_rankings(path) -> dict[int, RankedList]:
    per_query: dict[int, list[tuple[int, int, float]]] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        fields = line.split("\t")
        if len(fields) != 4:
            raise ParseError(f"expected 4 fields, got {len(fields)}", path, lineno)
        try:
            qi, rank, item, dist = int(fields[0]), int(fields[1]), int(fields[2]), float(fields[3])
        except ValueError:
            raise ParseError("malformed ranking line", path, lineno) from None
        per_query.setdefault(qi, []).append((rank, item, dist))
    out = {}
    for qi, rows in per_query.items():
        rows.sort()
        if [r for r, _, _ in rows] != list(range(1, len(rows) + 1)):
            raise ParseError(f"query {qi} has non-contiguous ranks", path)
        out[qi] = RankedList(
            np.array([i for _, i, _ in rows], dtype=np.int64),
            np.array([d for _, _, d in rows], dtype=np.float64),
        )
    return out


def format_loss_log(report) -> str:
    lines = ["step\tJ_R\tJ_C\tlr"]
    for step, (jr, jc, lr) in enumerate(zip(report.triplet_loss, report.class_loss, report.lr)):
        lines.append(f"{step}\t{jr!r}\t{jc!r}\t{lr!r}")
    return "\n".join(lines) + "\n"
