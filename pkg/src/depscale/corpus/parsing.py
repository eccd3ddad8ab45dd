"""Readers for the challenge-style per-session files.

All readers are strict: a malformed row raises :class:`ParseError` carrying the
1-based line number.  Headers are optional unless noted.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import MissingInputError, ParseError, ValidationError
from .types import (
    N_LANDMARKS,
    PHQ8_ITEMS,
    LandmarkFrame,
    LldFrameSeries,
    Phq8Labels,
    Speaker,
    TranscriptEntry,
)

LANDMARK_META_COLUMNS = 4  # frame, timestamp, confidence, success
LANDMARK_COLUMNS = LANDMARK_META_COLUMNS + 2 * N_LANDMARKS

# Column layout of the challenge's headerless COVAREP files.
COVAREP_CHANNELS = (
    ["F0", "VUV", "NAQ", "QOQ", "H1H2", "PSP", "MDQ", "peakSlope", "Rd",
     "Rd_conf", "creak"]
    + [f"MCEP_{i}" for i in range(25)]
    + [f"HMPDM_{i}" for i in range(25)]
    + [f"HMPDD_{i}" for i in range(13)]
)

_TIME_COLUMNS = {"frametime", "frame_time", "timestamp", "time"}


def _read_lines(path):
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = [(i + 1, line.rstrip("\r\n")) for i, line in enumerate(fh)]
    return [(n, line) for n, line in lines if line.strip()]


def _is_number(token):
    try:
        float(token)
    except ValueError:
        return False
    return True


def _numeric_rows(rows, path, width=None):
    """Convert ``[(lineno, [str, ...]), ...]`` into a float matrix."""
    for lineno, fields in rows:
        if width is not None and len(fields) != width:
            raise ParseError(
                f"expected {width} columns, found {len(fields)}", path, lineno
            )
    try:
        return np.array([fields for _, fields in rows], dtype=float)
    except ValueError:
        for lineno, fields in rows:
            for col, token in enumerate(fields):
                if not _is_number(token):
                    raise ParseError(
                        f"non-numeric value {token!r} in column {col + 1}",
                        path,
                        lineno,
                    ) from None
        raise


def _split_csv(lines):
    return [(n, [tok.strip() for tok in line.split(",")]) for n, line in lines]


def parse_landmark_file(path):
    """Read a per-frame 2-D landmark CSV into :class:`LandmarkFrame` objects.

    Rows are ``frame, timestamp, confidence, success, x1..x68, y1..y68``.
    Rows with ``success == 0`` become invalid frames.
    """
    lines = _read_lines(path)
    rows = _split_csv(lines)
    if rows and not _is_number(rows[0][1][0]):
        rows = rows[1:]
    if not rows:
        raise ParseError("landmark file has no data rows", path)
    data = _numeric_rows(rows, path, LANDMARK_COLUMNS)

    stamps = data[:, 1]
    bad = np.flatnonzero(np.diff(stamps) <= 0)
    if bad.size:
        raise ParseError("timestamps are not strictly increasing", path, rows[bad[0] + 1][0])

    frames = []
    xs = data[:, LANDMARK_META_COLUMNS:LANDMARK_META_COLUMNS + N_LANDMARKS]
    ys = data[:, LANDMARK_META_COLUMNS + N_LANDMARKS:]
    for i, row in enumerate(data):
        frames.append(LandmarkFrame(
            frame_index=int(row[0]),
            timestamp=float(row[1]),
            confidence=float(row[2]),
            valid=bool(row[3] != 0),
            points=np.column_stack([xs[i], ys[i]]),
        ))
    return frames


def parse_transcript(path):
    """Read a transcript (tab- or comma-separated, detected per file).

    Rows are ``start_time, stop_time, speaker, utterance``; a leading header
    row is skipped.  Tokens are whitespace-split and kept verbatim.
    """
    lines = _read_lines(path)
    if not lines:
        raise ParseError("transcript is empty", path)
    sep = "\t" if "\t" in lines[0][1] else ","
    entries = []
    for k, (lineno, line) in enumerate(lines):
        fields = line.split(sep, 3)
        if k == 0 and not _is_number(fields[0].strip()):
            continue
        if len(fields) < 3:
            raise ParseError("expected start, stop, speaker[, text]", path, lineno)
        try:
            start = float(fields[0])
            stop = float(fields[1])
        except ValueError:
            raise ParseError("unparseable time value", path, lineno) from None
        if not stop > start:
            raise ParseError(f"stop_time {stop} <= start_time {start}", path, lineno)
        text = fields[3] if len(fields) > 3 else ""
        entries.append(TranscriptEntry(
            start_time=start,
            stop_time=stop,
            speaker=Speaker.from_label(fields[2]),
            tokens=tuple(text.split()),
        ))
    return sorted(entries, key=lambda e: e.start_time)


def parse_lld_file(path, frame_period=None):
    """Read a low-level-descriptor CSV.

    A one-line header names the channels; without one, 74-column files get the
    COVAREP channel names and anything else ``ch0..chN``.  A leading time
    column (``frameTime``/``timestamp``/``time``) is split off and, when
    ``frame_period`` is not given, used to infer it.  A ``VUV`` channel feeds
    the voiced flag.
    """
    rows = _split_csv(_read_lines(path))
    if not rows:
        raise ParseError("LLD file is empty", path)
    header = None
    header_line = rows[0][0]
    if not all(_is_number(tok) for tok in rows[0][1]):
        header = rows[0][1]
        rows = rows[1:]
    if not rows:
        raise ParseError("LLD file has no data rows", path)
    width = len(header) if header is not None else len(rows[0][1])
    data = _numeric_rows(rows, path, width)

    times = None
    if header is None:
        names = list(COVAREP_CHANNELS) if width == len(COVAREP_CHANNELS) else [
            f"ch{i}" for i in range(width)
        ]
    else:
        names = list(header)
        if names[0].lower() in _TIME_COLUMNS:
            times = data[:, 0]
            data = data[:, 1:]
            names = names[1:]
    if len(set(names)) != len(names):
        raise ParseError("duplicate channel names in header", path, header_line)

    if frame_period is None:
        frame_period = 0.010
        if times is not None and times.size > 1:
            frame_period = round(float(np.median(np.diff(times))), 9)

    voiced = None
    lowered = [n.lower() for n in names]
    if "vuv" in lowered:
        voiced = data[:, lowered.index("vuv")] > 0.5
    return LldFrameSeries(names, data, frame_period=frame_period, voiced=voiced)


_TOTAL_KEYS = {"phq8_score", "phq8_total", "total", "score"}
_BINARY_KEYS = {"phq8_binary", "binary"}


def _item_key(name):
    key = name.strip().lower()
    key = re.sub(r"^phq_?8_", "", key)
    return key


def parse_labels(path):
    """Read a single-session PHQ-8 labels CSV.

    Headerless rows are ``8 items [, total [, binary]]``.  With a header, item
    columns are matched by name (``PHQ8_NoInterest`` or ``NoInterest``).
    """
    rows = _split_csv(_read_lines(path))
    if not rows:
        raise ParseError("labels file is empty", path)
    header = None
    if not all(_is_number(tok) for tok in rows[0][1]):
        header = rows[0][1]
        rows = rows[1:]
    if len(rows) != 1:
        raise ParseError(f"expected exactly one label row, found {len(rows)}", path)
    lineno, fields = rows[0]

    if header is None:
        if len(fields) not in (8, 9, 10):
            raise ParseError(f"expected 8-10 columns, found {len(fields)}", path, lineno)
        values = _numeric_rows(rows, path)[0]
        items = values[:8]
        total = values[8] if len(fields) > 8 else None
        binary = values[9] if len(fields) > 9 else None
    else:
        if len(fields) != len(header):
            raise ParseError(
                f"expected {len(header)} columns, found {len(fields)}", path, lineno
            )
        record = {}
        for name, token in zip(header, fields):
            record[name.strip().lower()] = token
        items = []
        for item in PHQ8_ITEMS:
            matches = [tok for name, tok in zip(header, fields)
                       if _item_key(name) == item.lower()]
            if not matches:
                raise ParseError(f"missing PHQ-8 item column {item}", path)
            items.append(matches[0])
        total = next((record[k] for k in _TOTAL_KEYS if k in record), None)
        binary = next((record[k] for k in _BINARY_KEYS if k in record), None)
        try:
            items = [float(v) for v in items]
            total = None if total is None else float(total)
            binary = None if binary is None else float(binary)
        except ValueError:
            raise ParseError("non-numeric label value", path, lineno) from None

    if any(v != int(v) for v in items):
        raise ParseError("PHQ-8 items must be integers", path, lineno)
    try:
        return Phq8Labels(
            items=tuple(int(v) for v in items),
            total=None if total is None else int(total),
            binary=None if binary is None else bool(binary),
        )
    except ValidationError as exc:
        raise ParseError(str(exc), path, lineno) from None


@dataclass
class ChannelFrames:
    """Per-frame AU / gaze / pose channels, valid frames only."""

    names: list
    values: np.ndarray
    timestamps: np.ndarray


def parse_channel_file(path):
    """Read an AU/gaze/pose CSV: ``frame, timestamp, confidence, success, ...``.

    The header is required since it names the channels.  Rows whose success
    flag is 0 are dropped.
    """
    rows = _split_csv(_read_lines(path))
    if not rows or all(_is_number(tok) for tok in rows[0][1]):
        raise ParseError("channel file needs a header row", path)
    header = rows[0][1]
    if len(header) <= LANDMARK_META_COLUMNS:
        raise ParseError("channel file has no data channels", path, rows[0][0])
    rows = rows[1:]
    if not rows:
        raise ParseError("channel file has no data rows", path)
    data = _numeric_rows(rows, path, len(header))
    keep = data[:, 3] != 0
    return ChannelFrames(
        names=list(header[LANDMARK_META_COLUMNS:]),
        values=data[keep, LANDMARK_META_COLUMNS:],
        timestamps=data[keep, 1],
    )


def merge_channel_frames(parts):
    """Concatenate channel sets from several files over their common frames."""
    if len(parts) == 1:
        return parts[0]
    common = parts[0].timestamps
    for part in parts[1:]:
        common = np.intersect1d(common, part.timestamps)
    names, blocks = [], []
    for part in parts:
        idx = np.searchsorted(part.timestamps, common)
        names.extend(part.names)
        blocks.append(part.values[idx])
    return ChannelFrames(names, np.hstack(blocks), common)
