"""Session manifests: a JSON document listing sessions, their files and splits."""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import MissingInputError, ParseError, ValidationError
from .types import SessionManifest, Split

FORMAT_VERSION = 1

_FILE_KEYS = ("landmarks", "channels", "lld", "transcript")


def _resolve(base, value):
    p = Path(value)
    return p if p.is_absolute() else base / p


def load_manifest(path, check_files=True):
    """Load a manifest and resolve its (manifest-relative) paths.

    ``channels`` may be a single path or a list of paths (separate AU, gaze and
    pose files as shipped by the challenge).
    """
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(path, "manifest")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}", path, exc.lineno) from None
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ValidationError(
            f"{path}: unsupported manifest format_version {version!r}"
        )
    base = path.parent
    sessions = []
    seen = set()
    for k, entry in enumerate(doc.get("sessions", [])):
        try:
            sid = str(entry["session_id"])
            files = entry["files"]
            paths = {key: files[key] for key in _FILE_KEYS}
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"{path}: session #{k} lacks field {exc}") from None
        if sid in seen:
            raise ValidationError(f"{path}: duplicate session_id {sid}")
        seen.add(sid)
        channels = paths["channels"]
        if isinstance(channels, (list, tuple)):
            channels = tuple(_resolve(base, c) for c in channels)
        else:
            channels = (_resolve(base, channels),)
        labels = files.get("labels")
        try:
            split = Split(entry.get("split", "train"))
        except ValueError:
            raise ValidationError(
                f"{path}: session {sid} has unknown split {entry.get('split')!r}"
            ) from None
        manifest = SessionManifest(
            session_id=sid,
            duration=float(entry["duration"]),
            landmarks=_resolve(base, paths["landmarks"]),
            channels=channels,
            lld=_resolve(base, paths["lld"]),
            transcript=_resolve(base, paths["transcript"]),
            labels=None if labels is None else _resolve(base, labels),
            split=split,
        )
        if check_files:
            for p in manifest.all_paths():
                if not p.is_file():
                    raise MissingInputError(p, f"file for session {sid}")
        sessions.append(manifest)
    if not sessions:
        raise ValidationError(f"{path}: manifest lists no sessions")
    return sessions


def dump_manifest(sessions, path):
    """Write sessions to ``path`` with paths relative to its directory."""
    path = Path(path)
    base = path.parent.resolve()

    def rel(p):
        p = Path(p).resolve()
        try:
            return p.relative_to(base).as_posix()
        except ValueError:
            return str(p)

    entries = []
    for s in sessions:
        files = {
            "landmarks": rel(s.landmarks),
            "channels": [rel(c) for c in s.channels] if len(s.channels) > 1
            else rel(s.channels[0]),
            "lld": rel(s.lld),
            "transcript": rel(s.transcript),
        }
        if s.labels is not None:
            files["labels"] = rel(s.labels)
        entries.append({
            "session_id": s.session_id,
            "duration": s.duration,
            "split": s.split.value,
            "files": files,
        })
    doc = {"format_version": FORMAT_VERSION, "sessions": entries}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
