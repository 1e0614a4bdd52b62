"""Line-oriented certificate records.

A record looks like::

    dslab-cert v1 block
    input-hash eb54f5f7891c6ccda9e471e48a6e77ce0fbec988
    input f scaled:inv_bits:1/8
    input eps 1/4
    mass 1733/1680
    ...
    end

Rationals are written ``num/den``.  The input hash is the git blob SHA-1 of
the canonical ``input`` lines, so two runs with the same inputs carry the
same hash.  Files are append-only: writing adds a record to the end, and the
whole file is replaced atomically.
"""

from __future__ import annotations

import hashlib
import os
import sys
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .errors import RecordFormatError
from .torus import format_rational, parse_rational

# exact harmonic-type sums easily pass the default 4300-digit conversion limit
sys.set_int_max_str_digits(0)

MAGIC = "dslab-cert"
VERSION = "v1"
ELIDE_THRESHOLD = 20_000


def fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, (tuple, list)):
        return " ".join(fmt(v) for v in value)
    return str(value)


def to_bool(text: str) -> bool:
    if text not in ("true", "false"):
        raise RecordFormatError(f"expected true/false, got {text!r}")
    return text == "true"


def to_frac(text: str) -> Fraction | None:
    return None if text == "none" else parse_rational(text)


def to_ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split())


def git_blob_sha1(data: bytes) -> str:
    h = hashlib.sha1()
    h.update(b"blob %d\0" % len(data))
    h.update(data)
    return h.hexdigest()


@dataclass
class Record:
    kind: str
    inputs: list[tuple[str, str]] = field(default_factory=list)
    fields: list[tuple[str, str]] = field(default_factory=list)

    def add_input(self, key: str, value) -> Record:
        self.inputs.append((key, fmt(value)))
        return self

    def add(self, key: str, value) -> Record:
        if " " in key or not key:
            raise RecordFormatError(f"bad key {key!r}")
        self.fields.append((key, fmt(value)))
        return self

    def extend(self, prefix: str, other: Record) -> Record:
        """Embed another record's fields under ``prefix.``."""
        for k, v in other.fields:
            self.fields.append((f"{prefix}.{k}", v))
        return self

    def sub(self, prefix: str) -> Record:
        p = prefix + "."
        return Record(self.kind, list(self.inputs), [(k[len(p):], v) for k, v in self.fields if k.startswith(p)])

    def input_text(self) -> str:
        return "".join(f"{k} {v}\n" for k, v in self.inputs)

    @property
    def input_hash(self) -> str:
        return git_blob_sha1(self.input_text().encode())

    def get(self, key: str, default=None) -> str:
        for k, v in self.fields:
            if k == key:
                return v
        if default is not None:
            return default
        raise RecordFormatError(f"record {self.kind} has no field {key!r}")

    def getall(self, key: str) -> list[str]:
        return [v for k, v in self.fields if k == key]

    def input(self, key: str, default=None) -> str | None:
        for k, v in self.inputs:
            if k == key:
                return v
        return default

    def to_text(self) -> str:
        lines = [f"{MAGIC} {VERSION} {self.kind}", f"input-hash {self.input_hash}"]
        lines += [f"input {k} {v}" for k, v in self.inputs]
        lines += [f"{k} {v}" for k, v in self.fields]
        lines.append("end")
        return "\n".join(lines) + "\n"


def parse_records(text: str) -> list[Record]:
    out: list[Record] = []
    cur: Record | None = None
    stated_hash = None
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if cur is None:
            parts = line.split()
            if len(parts) != 3 or parts[0] != MAGIC:
                raise RecordFormatError(f"line {n}: expected a record header")
            if parts[1] != VERSION:
                raise RecordFormatError(f"line {n}: unsupported version {parts[1]}")
            cur = Record(parts[2])
            stated_hash = None
            continue
        if line == "end":
            if stated_hash is not None and stated_hash != cur.input_hash:
                raise RecordFormatError(f"line {n}: input hash mismatch")
            out.append(cur)
            cur = None
            continue
        key, _, value = line.partition(" ")
        if key == "input-hash":
            stated_hash = value
        elif key == "input":
            k, _, v = value.partition(" ")
            cur.inputs.append((k, v))
        else:
            cur.fields.append((key, value))
    if cur is not None:
        raise RecordFormatError("truncated record (missing 'end')")
    return out


def read_records(path: str) -> list[Record]:
    with open(path, encoding="utf-8") as fh:
        return parse_records(fh.read())


def read_last(path: str, kind: str | None = None) -> Record:
    recs = [r for r in read_records(path) if kind is None or r.kind == kind]
    if not recs:
        raise RecordFormatError(f"{path} holds no {kind or ''} record".replace("  ", " "))
    return recs[-1]


def append_record(path: str, record: Record) -> None:
    """Append ``record`` to ``path`` by atomically replacing the file."""
    old = ""
    if os.path.exists(path):
        with open(path, encoding="utf-8") as fh:
            old = fh.read()
        if old and not old.endswith("\n"):
            old += "\n"
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".dslab-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(old + record.to_text())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_records(path: str, records: Iterable[Record]) -> None:
    for r in records:
        append_record(path, r)
