"""Tensor file formats.

Binary ``.tns``: magic ``TNS1``, u32 little-endian order d, then d u64
little-endian dimensions, then the entries as IEEE-754 f64 little-endian in
row-major (C) order. Read/write round-trips are bit-exact.

Long-format CSV: a header naming the modes plus a ``value`` column, then one
row per entry with 1-based integer indices. Suited to tensors exported from
longitudinal data sources.
"""

import csv
import os
import struct
import tempfile

import numpy as np

__all__ = ["read_tns", "write_tns", "read_long_csv", "write_long_csv", "atomic_write"]

_MAGIC = b"TNS1"


def atomic_write(path, write_body, mode="wb"):
    """Write a file via temp-then-rename so partial output never lands."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode) as fh:
            write_body(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_tns(path, t):
    t = np.ascontiguousarray(np.asarray(t, dtype="<f8"))
    if t.ndim < 2:
        raise ValueError("tensors of order < 2 are not supported")

    def body(fh):
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", t.ndim))
        fh.write(struct.pack(f"<{t.ndim}Q", *t.shape))
        fh.write(t.tobytes(order="C"))

    atomic_write(path, body)


def read_tns(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {_MAGIC!r}")
        raw = fh.read(4)
        if len(raw) != 4:
            raise ValueError(f"{path}: truncated header")
        (d,) = struct.unpack("<I", raw)
        if d < 2:
            raise ValueError(f"{path}: order {d} < 2")
        raw = fh.read(8 * d)
        if len(raw) != 8 * d:
            raise ValueError(f"{path}: truncated dimension list")
        shape = struct.unpack(f"<{d}Q", raw)
        n = int(np.prod(shape))
        data = np.frombuffer(fh.read(8 * n), dtype="<f8")
        if data.size != n:
            raise ValueError(f"{path}: expected {n} entries, found {data.size}")
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after payload")
    return data.reshape(shape).astype(float)


def write_long_csv(path, t, mode_names=None):
    """One row per entry: 1-based indices for each mode, then the value
    (printed with enough digits to round-trip float64)."""
    t = np.asarray(t, dtype=float)
    names = list(mode_names) if mode_names else [f"mode{k}" for k in range(1, t.ndim + 1)]
    if len(names) != t.ndim:
        raise ValueError(f"expected {t.ndim} mode names, got {len(names)}")

    def body(fh):
        writer = csv.writer(fh)
        writer.writerow(names + ["value"])
        for idx in np.ndindex(*t.shape):
            writer.writerow([i + 1 for i in idx] + [repr(float(t[idx]))])

    atomic_write(path, body, mode="w")


def read_long_csv(path):
    """Parse a long-format CSV into ``(tensor, mode_names)``.

    Dimensions are inferred from the largest index seen per mode; every entry
    must appear exactly once.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if len(header) < 3 or header[-1].strip().lower() != "value":
            raise ValueError(f"{path}: header must name >= 2 modes plus a trailing 'value'")
        names = [h.strip() for h in header[:-1]]
        d = len(names)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise ValueError(f"{path}:{lineno}: expected {d + 1} fields, got {len(row)}")
            try:
                idx = tuple(int(v) for v in row[:-1])
                val = float(row[-1])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if any(i < 1 for i in idx):
                raise ValueError(f"{path}:{lineno}: indices are 1-based")
            rows.append((idx, val))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    shape = tuple(max(idx[k] for idx, _ in rows) for k in range(d))
    t = np.full(shape, np.nan)
    for idx, val in rows:
        pos = tuple(i - 1 for i in idx)
        if not np.isnan(t[pos]):
            raise ValueError(f"{path}: duplicate entry at {idx}")
        t[pos] = val
    if np.isnan(t).any():
        missing = int(np.isnan(t).sum())
        raise ValueError(f"{path}: {missing} entries missing for shape {shape}")
    return t, names
