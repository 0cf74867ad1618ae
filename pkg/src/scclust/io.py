"""Dataset ingest and run artifact serialization.

Datasets come as CSV (header row, optional trailing ``label`` column) or
the little-endian ``SCCV`` binary layout::

    b"SCCV" | u32 N | u32 D | N*D f64 | [u8 flag | N u32 labels]

Artifacts are text files whose first line (or first comment) carries the
config digest of the run that produced them.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import struct
from pathlib import Path

import numpy as np

from .core import Dataset, Dendrogram, Partition

MAGIC = b"SCCV"


class InputError(ValueError):
    """Malformed or inconsistent input file."""


# --------------------------------------------------------------------------
# config digest


def config_digest(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def assignment_digest(assignment) -> str:
    a = np.ascontiguousarray(np.asarray(assignment, dtype="<i8"))
    return hashlib.sha256(a.tobytes()).hexdigest()[:16]


def _write(path, text: str | bytes):
    if path is None:
        return
    mode = "wb" if isinstance(text, bytes) else "w"
    with open(path, mode, **({} if mode == "wb" else {"newline": ""})) as fh:
        fh.write(text)


# --------------------------------------------------------------------------
# datasets


def read_csv_dataset(path) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and not r[0].startswith("#")]
    if not rows:
        raise InputError(f"{path}: empty CSV (a header row is required)")
    header = [h.strip() for h in rows[0]]
    try:
        [float(h) for h in header]
    except ValueError:
        pass
    else:
        raise InputError(f"{path}: first row looks numeric; a header row is required")
    has_label = header[-1].lower() == "label"
    body = rows[1:]
    if not body:
        raise InputError(f"{path}: no data rows")
    width = len(header)
    for lineno, r in enumerate(body, start=2):
        if len(r) != width:
            raise InputError(f"{path}:{lineno}: expected {width} fields, got {len(r)}")
    try:
        values = np.array(body, dtype=np.float64)
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric value ({exc})") from None
    labels = None
    if has_label:
        labels = values[:, -1]
        values = values[:, :-1]
        if not np.all(labels == np.round(labels)):
            raise InputError(f"{path}: label column must hold integers")
        labels = labels.astype(np.int64)
    if values.shape[1] == 0:
        raise InputError(f"{path}: no feature columns")
    if not np.all(np.isfinite(values)):
        raise InputError(f"{path}: non-finite feature value")
    return Dataset(values, labels)


def write_csv_dataset(d: Dataset, path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = [f"x{j}" for j in range(d.dim)]
    if d.labels is not None:
        header.append("label")
    w.writerow(header)
    for i in range(d.n):
        row = [repr(float(v)) for v in d.points[i]]
        if d.labels is not None:
            row.append(int(d.labels[i]))
        w.writerow(row)
    text = buf.getvalue()
    _write(path, text)
    return text


def encode_binary_dataset(d: Dataset) -> bytes:
    parts = [MAGIC, struct.pack("<II", d.n, d.dim),
             np.ascontiguousarray(d.points, dtype="<f8").tobytes()]
    if d.labels is not None:
        if np.any(d.labels < 0) or np.any(d.labels > 0xFFFFFFFF):
            raise ValueError("binary labels must fit in u32")
        parts.append(b"\x01")
        parts.append(np.asarray(d.labels, dtype="<u4").tobytes())
    return b"".join(parts)


def write_binary_dataset(d: Dataset, path=None) -> bytes:
    blob = encode_binary_dataset(d)
    _write(path, blob)
    return blob


def decode_binary_dataset(blob: bytes, name="<bytes>") -> Dataset:
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise InputError(f"{name}: missing SCCV header")
    n, dim = struct.unpack_from("<II", blob, 4)
    off = 12
    size = n * dim * 8
    if len(blob) < off + size:
        raise InputError(f"{name}: truncated point block")
    points = np.frombuffer(blob, dtype="<f8", count=n * dim, offset=off).reshape(n, dim)
    off += size
    labels = None
    if len(blob) > off:
        flag = blob[off]
        off += 1
        if flag:
            if len(blob) != off + 4 * n:
                raise InputError(f"{name}: label block has the wrong length")
            labels = np.frombuffer(blob, dtype="<u4", count=n, offset=off).astype(np.int64)
        elif len(blob) != off:
            raise InputError(f"{name}: trailing bytes after label flag")
    if not np.all(np.isfinite(points)):
        raise InputError(f"{name}: non-finite feature value")
    return Dataset(points.astype(np.float64), labels)


def read_dataset(path) -> Dataset:
    """Read a CSV or SCCV binary dataset, chosen by the leading bytes."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        if blob[:4] == MAGIC:
            return decode_binary_dataset(blob, str(path))
        return read_csv_dataset(path)
    except InputError:
        raise
    except (ValueError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from None


def write_dataset(d: Dataset, path, fmt: str | None = None):
    fmt = fmt or ("bin" if str(path).endswith((".bin", ".sccv")) else "csv")
    if fmt == "bin":
        return write_binary_dataset(d, path)
    if fmt == "csv":
        return write_csv_dataset(d, path)
    raise ValueError(f"unknown dataset format {fmt!r}")


# --------------------------------------------------------------------------
# JSON lines artifacts


def _meta_line(meta: dict | None) -> list[str]:
    return [] if meta is None else [json.dumps({"_meta": meta}, sort_keys=True)]


def _records(path_or_text):
    p = Path(str(path_or_text))
    try:
        text = p.read_text() if "\n" not in str(path_or_text) and p.exists() else str(path_or_text)
    except OSError as exc:
        raise InputError(f"cannot read {path_or_text}: {exc.strerror}") from None
    meta, out = None, []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InputError(f"line {lineno}: {exc.msg}") from None
        if "_meta" in rec:
            meta = rec["_meta"]
            continue
        out.append(rec)
    return meta, out


def dendrogram_to_jsonl(t: Dendrogram, path=None, meta: dict | None = None) -> str:
    order, lo, hi = t.leaf_ranges()
    lines = _meta_line(meta)
    for node in range(t.n_nodes):
        lines.append(json.dumps({
            "id": node,
            "parent": int(t.parent[node]) if t.parent[node] >= 0 else None,
            "children": list(t.children(node)),
            "leaves": np.sort(order[lo[node]:hi[node]]).tolist(),
            "round": int(t.merge_round[node]),
            "threshold": float(t.merge_threshold[node]),
        }))
    text = "\n".join(lines) + "\n"
    _write(path, text)
    return text


def read_dendrogram_jsonl(path_or_text) -> Dendrogram:
    _, recs = _records(path_or_text)
    recs.sort(key=lambda r: r["id"])
    if [r["id"] for r in recs] != list(range(len(recs))):
        raise InputError("dendrogram node ids must be 0..M-1")
    n_leaves = sum(1 for r in recs if not r["children"])
    internal = recs[n_leaves:]
    if any(not r["children"] for r in internal):
        raise InputError("leaf nodes must come before internal nodes")
    try:
        return Dendrogram(n_leaves, [r["children"] for r in internal],
                          [r["round"] for r in internal], [r["threshold"] for r in internal])
    except ValueError as exc:
        raise InputError(str(exc)) from None


def rounds_to_jsonl(partitions, path=None, meta: dict | None = None) -> str:
    lines = _meta_line(meta)
    for i, p in enumerate(partitions):
        p = getattr(p, "partition", p)
        lines.append(json.dumps({
            "round_index": p.round_index if p.round_index is not None else i,
            "threshold": None if p.threshold is None else float(p.threshold),
            "num_clusters": p.num_clusters,
            "assignment_digest": assignment_digest(p.assignment),
        }))
    text = "\n".join(lines) + "\n"
    _write(path, text)
    return text


# --------------------------------------------------------------------------
# CSV artifacts


def assignment_to_csv(p, path=None, digest: str | None = None, ids=None) -> str:
    assignment = p.assignment if isinstance(p, Partition) else np.asarray(p)
    ids = range(len(assignment)) if ids is None else ids
    buf = io.StringIO()
    if digest is not None:
        buf.write(f"# config_digest={digest}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "cluster"])
    for i, c in zip(ids, assignment):
        w.writerow([i, int(c)])
    text = buf.getvalue()
    _write(path, text)
    return text


def read_assignment_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """``(ids, cluster)`` from an assignment CSV (``cluster`` or ``label`` column)."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    if len(rows) < 2:
        raise InputError(f"{path}: no assignment rows")
    header = [h.strip().lower() for h in rows[0]]
    col = next((header.index(c) for c in ("cluster", "label") if c in header), None)
    if col is None or "id" not in header:
        raise InputError(f"{path}: need an id column and a cluster or label column")
    idc = header.index("id")
    try:
        ids = np.array([int(r[idc]) for r in rows[1:]], dtype=np.int64)
        vals = np.array([int(r[col]) for r in rows[1:]], dtype=np.int64)
    except (ValueError, IndexError):
        raise InputError(f"{path}: ids and clusters must be integers") from None
    return ids, vals


def write_json(obj, path=None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    _write(path, text)
    return text
