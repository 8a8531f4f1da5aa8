"""Bit-exact persistence: frame sequences, databases, logs, reports.

Frame sequences are a small binary format (little-endian header + raw f32
payload) with a JSON sidecar carrying provenance; training databases are a
directory of one sequence file per class plus a manifest. All complete-file
writes go through a temp file and rename so a crash never leaves a readable
but wrong file; session logs are the exception, appended line by line while
a session runs.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    ClassFileMissing,
    ManifestMissing,
    ShapeInconsistent,
    ShapeMismatch,
    TruncatedPayload,
    VersionUnsupported,
)
from .frames import Frame
from .training import MotionClass, TrainingDatabase

__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "write_sequence",
    "read_sequence",
    "save_database",
    "load_database",
    "SessionLogWriter",
    "read_log",
    "write_json",
    "read_json",
    "write_text",
    "format_float",
    "write_trials_csv",
    "write_summary_csv",
    "write_fitts_csv",
]

MAGIC = b"SMGF"
FORMAT_VERSION = 1
_DTYPE_F32 = 1
_HEADER = struct.Struct("<4sHIIQdB")  # magic, version, width, height, count, tick rate, dtype


def _atomic_write_bytes(path, data: bytes):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_text(path, text: str):
    _atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path, obj):
    write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def write_sequence(path, frames, tick_rate_hz: float, meta: dict | None = None):
    """Write frames plus a JSON sidecar; read_sequence round-trips bit-exactly."""
    frames = list(frames)
    if not frames:
        raise ValueError("refusing to write an empty sequence")
    h, w = frames[0].shape
    for f in frames:
        if f.shape != (h, w):
            raise ShapeMismatch("all frames in a sequence must share one shape")
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, w, h, len(frames),
                          float(tick_rate_hz), _DTYPE_F32)
    payload = np.stack([f.pixels for f in frames]).astype("<f4").tobytes()
    _atomic_write_bytes(path, header + payload)
    sidecar = dict(meta or {})
    sidecar.update({
        "width": w, "height": h, "frame_count": len(frames),
        "tick_rate_hz": float(tick_rate_hz),
        "indices": [f.index for f in frames],
        "timestamps": [f.timestamp for f in frames],
    })
    write_json(_sidecar_path(path), sidecar)


def read_sequence(path):
    """Returns (frames, tick_rate_hz, sidecar dict)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size or raw[:4] != MAGIC:
        raise BadMagic(f"{path}: not a frame sequence file")
    magic, version, w, h, count, tick_rate, dtype = _HEADER.unpack_from(raw)
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"{path}: format version {version}")
    if dtype != _DTYPE_F32:
        raise VersionUnsupported(f"{path}: unknown dtype code {dtype}")
    expected = _HEADER.size + count * w * h * 4
    if len(raw) < expected:
        raise TruncatedPayload(expected, len(raw))
    sidecar_file = _sidecar_path(path)
    sidecar = read_json(sidecar_file) if sidecar_file.exists() else {}
    if sidecar:
        if (sidecar.get("width", w), sidecar.get("height", h)) != (w, h):
            raise ShapeInconsistent(
                f"{path}: sidecar says {sidecar.get('width')}x{sidecar.get('height')}, "
                f"header says {w}x{h}")
    pixels = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size,
                           count=count * w * h).astype(np.float64)
    pixels = pixels.reshape(count, h, w)
    indices = sidecar.get("indices") or list(range(count))
    stamps = sidecar.get("timestamps") or [i / tick_rate for i in indices]
    frames = [Frame(width=w, height=h, pixels=pixels[k],
                    index=indices[k], timestamp=stamps[k])
              for k in range(count)]
    return frames, tick_rate, sidecar


def save_database(db: TrainingDatabase, directory):
    """Manifest plus one sequence file per class (rest reference included)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {}
    for c in db.classes:
        entries = db.entries_for(c.id)
        if not entries:
            continue
        fname = f"{c.id}.smgf"
        write_sequence(directory / fname, entries, tick_rate_hz=0.0,
                       meta={"class_id": c.id})
        files[c.id] = fname
    if db.rest_reference is not None:
        write_sequence(directory / "rest_reference.smgf", [db.rest_reference],
                       tick_rate_hz=0.0, meta={"role": "rest_reference"})
    manifest = {
        "classes": [{"id": c.id, "display_name": c.display_name, "is_rest": c.is_rest}
                    for c in db.classes],
        "files": files,
        "rest_reference": "rest_reference.smgf" if db.rest_reference is not None else None,
        "provenance": db.provenance,
    }
    write_json(directory / "manifest.json", manifest)


def load_database(directory) -> TrainingDatabase:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise ManifestMissing(f"no manifest.json in {directory}")
    manifest = read_json(manifest_path)
    classes = tuple(MotionClass(c["id"], c["display_name"], c["is_rest"])
                    for c in manifest["classes"])
    entries = {}
    for cid, fname in manifest["files"].items():
        fpath = directory / fname
        if not fpath.exists():
            raise ClassFileMissing(cid)
        frames, _, _ = read_sequence(fpath)
        entries[cid] = tuple(frames)
    rest_reference = None
    if manifest.get("rest_reference"):
        ref_path = directory / manifest["rest_reference"]
        if not ref_path.exists():
            raise ClassFileMissing("rest_reference")
        rest_reference = read_sequence(ref_path)[0][0]
    return TrainingDatabase(classes=classes, entries=entries,
                            rest_reference=rest_reference,
                            provenance=manifest.get("provenance", {}))


class SessionLogWriter:
    """Append-only JSONL event log; one compact object per line."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", encoding="utf-8")

    def append(self, event: dict):
        self._fh.write(json.dumps(event, separators=(",", ":")) + "\n")

    def flush(self):
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_log(path) -> list[dict]:
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                events.append(json.loads(line))
    return events


def format_float(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def write_trials_csv(path, metrics):
    """Per-trial rows of the task session (one row per scheduled target)."""
    lines = ["trial,target,acquired,movement_time_s,position_error_pct,stability_error_pct"]
    for i, t in enumerate(metrics.trials):
        lines.append(",".join([
            str(i), format_float(t.target), str(int(t.acquired)),
            format_float(t.movement_time), format_float(t.position_error),
            format_float(t.stability_error),
        ]))
    write_text(path, "\n".join(lines) + "\n")


def write_summary_csv(path, rows):
    """Per-motion aggregate table: motion x {position, stability, completion}."""
    lines = ["motion,position_error_pct,abs_position_error_pct,"
             "stability_error_pct,completion_rate_pct,mean_movement_time_s"]
    for motion_id, m in rows:
        lines.append(",".join([
            motion_id,
            format_float(m.mean_position_error),
            format_float(m.mean_abs_position_error),
            format_float(m.mean_stability_error),
            format_float(m.completion_rate),
            format_float(m.mean_movement_time),
        ]))
    write_text(path, "\n".join(lines) + "\n")


def write_fitts_csv(path, result):
    """Per-acquired-trial difficulty/movement-time points."""
    lines = ["difficulty_bits,movement_time_s"]
    for p in result.points:
        lines.append(f"{format_float(p.difficulty)},{format_float(p.movement_time)}")
    write_text(path, "\n".join(lines) + "\n")
