"""Named feature vectors and the one-row-per-session CSV tables they live in.

Every table starts with a ``#`` comment line carrying ``key=value`` metadata
(format version, seeds, ...) followed by a normal CSV header.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import MissingInputError, ParseError, ValidationError

TABLE_FORMAT_VERSION = 1


@dataclass
class NamedVector:
    names: list
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if len(self.names) != self.values.size:
            raise ValidationError(
                f"{len(self.names)} names for {self.values.size} values"
            )

    def __len__(self):
        return self.values.size

    def as_dict(self):
        return dict(zip(self.names, self.values.tolist()))

    @classmethod
    def from_mapping(cls, mapping, prefix=""):
        return cls([prefix + k for k in mapping], np.fromiter(mapping.values(), float))

    @classmethod
    def concat(cls, parts):
        names = [n for p in parts for n in p.names]
        values = np.concatenate([p.values for p in parts]) if parts else np.zeros(0)
        return cls(names, values)


def format_float(v):
    return repr(float(v))


def format_meta(meta):
    items = {"format_version": TABLE_FORMAT_VERSION, **(meta or {})}
    return "# " + "; ".join(f"{k}={items[k]}" for k in sorted(items))


def parse_meta(line):
    out = {}
    body = line.lstrip("#").strip()
    for part in body.split(";"):
        if "=" in part:
            k, v = part.split("=", 1)
            out[k.strip()] = v.strip()
    return out


@dataclass
class FeatureTable:
    session_ids: list
    names: list
    matrix: np.ndarray
    meta: dict

    def row(self, session_id):
        return self.matrix[self.session_ids.index(session_id)]

    def subset(self, session_ids):
        index = {s: i for i, s in enumerate(self.session_ids)}
        missing = [s for s in session_ids if s not in index]
        if missing:
            raise ValidationError(f"sessions missing from feature table: {missing}")
        rows = [index[s] for s in session_ids]
        return FeatureTable(list(session_ids), self.names, self.matrix[rows], self.meta)


def write_feature_table(path, session_ids, vectors, meta=None):
    """Write one :class:`NamedVector` per session; all must share names."""
    if not vectors:
        raise ValidationError("no feature vectors to write")
    names = vectors[0].names
    for sid, v in zip(session_ids, vectors):
        if v.names != names:
            raise ValidationError(f"session {sid}: feature names differ from first row")
    buf = io.StringIO()
    buf.write(format_meta(meta) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["session_id"] + list(names))
    for sid, v in zip(session_ids, vectors):
        writer.writerow([sid] + [format_float(x) for x in v.values])
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_feature_table(path):
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(path, "feature table")
    meta = {}
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            meta.update(parse_meta(line))
        elif line.strip():
            body.append(line)
    reader = list(csv.reader(body))
    if not reader or reader[0][0] != "session_id":
        raise ParseError("feature table lacks a session_id header", path)
    names = reader[0][1:]
    ids = []
    for k, fields in enumerate(reader[1:], start=2):
        if len(fields) != len(names) + 1:
            raise ParseError(f"expected {len(names) + 1} columns", path, k)
        ids.append(fields[0])
        try:
            rows.append([float(x) for x in fields[1:]])
        except ValueError:
            raise ParseError("non-numeric feature value", path, k) from None
    matrix = np.array(rows, dtype=float).reshape(len(ids), len(names))
    return FeatureTable(ids, names, matrix, meta)
