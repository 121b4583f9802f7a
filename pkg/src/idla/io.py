"""Cluster snapshots (CSV with ``#`` headers) and PGM rendering."""
from __future__ import annotations

import hashlib
import io as _io
import os
from dataclasses import dataclass, fields

import numpy as np

from .aggregation import Cluster, InvariantViolation, normalize_starts

FORMAT_VERSION = 1
MAGIC = "# idla-snapshot"


class ParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass
class SnapshotHeader:
    kernel: str
    p: str
    seed: int | None
    particles: int
    starts: str
    bounding_radius: int
    format_version: int = FORMAT_VERSION


def starts_digest(starts) -> str:
    """Short SHA-256 digest of a start multiset, independent of its ordering."""
    text = ";".join(f"{s.x},{s.y},{c}" for s, c in normalize_starts(starts))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def make_header(cluster: Cluster, spec, seed, starts) -> SnapshotHeader:
    return SnapshotHeader(
        kernel=spec.family.value,
        p=str(spec.p),
        seed=seed,
        particles=cluster.size,
        starts=starts_digest(starts),
        bounding_radius=cluster.radius,
    )


def _snapshot_text(cluster: Cluster, header: SnapshotHeader) -> str:
    out = [MAGIC]
    for f in fields(SnapshotHeader):
        value = getattr(header, f.name)
        out.append(f"# {f.name}={'' if value is None else value}")
    top = cluster.max_norm
    out.append("# layer_counts=" + ",".join(str(int(v)) for v in cluster.layer_counts[: top + 1]))
    xs, ys, ps = cluster.order_arrays()
    out.extend(f"{x},{y},{p}" for x, y, p in zip(xs.tolist(), ys.tolist(), ps.tolist()))
    return "\n".join(out) + "\n"


def write_snapshot(cluster: Cluster, header: SnapshotHeader, sink) -> int:
    """Write ``cluster`` as header lines then ``x,y,order`` rows in settlement order.

    ``order`` is the index of the particle that occupied the site.  ``sink``
    is a path or a text/binary file object; returns the number of bytes
    written.
    """
    data = _snapshot_text(cluster, header).encode("ascii")
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "wb") as fh:
            fh.write(data)
    elif isinstance(sink, _io.TextIOBase):
        sink.write(data.decode("ascii"))
    else:
        sink.write(data)
    return len(data)


def _lines(source):
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="ascii") as fh:
            return fh.read().splitlines()
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("ascii")
    return data.splitlines()


_INT_FIELDS = {"particles", "bounding_radius", "format_version", "seed"}


def read_snapshot(source) -> tuple[Cluster, SnapshotHeader]:
    """Inverse of :func:`write_snapshot`; revalidates the cluster bookkeeping."""
    lines = _lines(source)
    if not lines or lines[0].strip() != MAGIC:
        raise ParseError(1, "missing snapshot magic line")
    meta: dict[str, str] = {}
    rows: list[tuple[int, int, int]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition("=")
            if not sep:
                raise ParseError(lineno, f"malformed header line {line!r}")
            meta[key.strip()] = value.strip()
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ParseError(lineno, f"expected x,y,order, got {line!r}")
        try:
            rows.append((int(parts[0]), int(parts[1]), int(parts[2])))
        except ValueError:
            raise ParseError(lineno, f"non-integer field in {line!r}") from None
    values = {}
    for f in fields(SnapshotHeader):
        raw = meta.get(f.name)
        if raw is None:
            raise ParseError(1, f"header field {f.name!r} missing")
        if f.name in _INT_FIELDS:
            values[f.name] = None if raw == "" and f.name == "seed" else int(raw)
        else:
            values[f.name] = raw
    header = SnapshotHeader(**values)
    if header.format_version != FORMAT_VERSION:
        raise ParseError(1, f"unsupported format version {header.format_version}")
    cluster = Cluster(header.bounding_radius)
    if rows:
        data = np.array(rows, dtype=np.int64)
        cluster.add_many(data[:, 0], data[:, 1], data[:, 2])
    if "layer_counts" in meta:
        declared = [int(v) for v in meta["layer_counts"].split(",") if v]
        actual = cluster.layer_counts[: cluster.max_norm + 1].tolist()
        if declared != actual:
            raise InvariantViolation("declared layer counts disagree with the sites")
    cluster.check_invariants()
    return cluster, header


def render_pgm(cluster: Cluster, style: str = "occupancy") -> bytes:
    """Binary PGM (P5), one pixel per site of the smallest centred square holding the cluster.

    Rows run from the largest ``y`` down, columns from the smallest ``x``.
    ``occupancy`` paints occupied sites 255; ``order`` ramps from 255 for the
    first settled site down to 1 for the last.  Empty sites are 0.
    """
    xs, ys, _ = cluster.order_arrays()
    M = int(max(np.abs(xs).max(initial=0), np.abs(ys).max(initial=0)))
    side = 2 * M + 1
    img = np.zeros((side, side), dtype=np.uint8)
    rows = M - ys
    cols = xs + M
    if style == "occupancy":
        img[rows, cols] = 255
    elif style == "order":
        n = len(xs)
        rank = np.arange(n, dtype=np.int64)
        img[rows, cols] = (255 - (254 * rank) // max(n - 1, 1)).astype(np.uint8)
    else:
        raise ValueError("style must be 'occupancy' or 'order'")
    return f"P5\n{side} {side}\n255\n".encode("ascii") + img.tobytes()
