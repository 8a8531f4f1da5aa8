"""Training-database construction from metronome-paced motion sessions.

A session is one motion performed for a fixed number of repetitions, each
repetition cycling through four metronome phases: transition to the motion
end-state, hold, transition back to rest, hold at rest. The distance-from-
rest signal is flat while the user holds, so holds are located as plateaus
inside the scheduled hold phases; the frames under each plateau are averaged
into one representative image and stored under the motion (or rest) label.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DegenerateFrame,
    EmptyStream,
    PlateauNotFound,
    ShapeMismatch,
)
from .frames import Frame, average_frames, distance_from_rest

__all__ = [
    "MotionClass",
    "REST",
    "DEFAULT_MOTIONS",
    "MetronomeSchedule",
    "PlateauParams",
    "Plateau",
    "TrainingDatabase",
    "extract_rest_reference",
    "detect_plateaus",
    "build_database",
]


@dataclass(frozen=True)
class MotionClass:
    id: str
    display_name: str
    is_rest: bool = False


REST = MotionClass("rest", "rest", is_rest=True)

DEFAULT_MOTIONS = (
    MotionClass("PG", "power grasp"),
    MotionClass("WP", "wrist pronation"),
    MotionClass("Po", "point"),
    MotionClass("KG", "key grasp"),
    MotionClass("Tr", "tripod"),
)


PHASE_KINDS = ("to_motion", "hold_motion", "to_rest", "hold_rest")


@dataclass(frozen=True)
class MetronomeSchedule:
    """Per-repetition phase timing: every phase lasts beats_per_phase beats."""

    beat_period: float = 1.0
    beats_per_phase: int = 3
    repetitions: int = 5

    def __post_init__(self):
        if self.beat_period <= 0 or self.beats_per_phase < 1 or self.repetitions < 1:
            raise ValueError("metronome schedule fields must be positive")

    @property
    def phase_duration(self) -> float:
        return self.beat_period * self.beats_per_phase

    @property
    def duration(self) -> float:
        return self.phase_duration * 4 * self.repetitions

    def phases(self):
        """Contiguous (kind, repetition, t_start, t_end) tuples covering the session."""
        out = []
        t = 0.0
        for rep in range(self.repetitions):
            for kind in PHASE_KINDS:
                out.append((kind, rep, t, t + self.phase_duration))
                t += self.phase_duration
        return out

    def frame_count(self, tick_rate: float) -> int:
        return int(round(self.duration * tick_rate))

    def phase_at(self, time_s: float):
        """(kind, repetition) active at a session-relative time."""
        n_phases = 4 * self.repetitions
        idx = min(int((time_s + 1e-9) / self.phase_duration), n_phases - 1)
        return PHASE_KINDS[idx % 4], idx // 4

    def to_dict(self) -> dict:
        return {"beat_period": self.beat_period,
                "beats_per_phase": self.beats_per_phase,
                "repetitions": self.repetitions}


@dataclass(frozen=True)
class PlateauParams:
    """Hold-segment acceptance knobs (config, not constants)."""

    min_length_s: float = 0.5
    flatness_tolerance: float = 0.05

    def to_dict(self) -> dict:
        return {"min_length_s": self.min_length_s,
                "flatness_tolerance": self.flatness_tolerance}


@dataclass(frozen=True)
class Plateau:
    start_index: int
    end_index: int  # inclusive
    level: float
    label: str

    def __post_init__(self):
        if self.start_index > self.end_index:
            raise ValueError("plateau start after end")


@dataclass(frozen=True)
class TrainingDatabase:
    """Labeled representative frames per motion class, plus the rest anchor.

    Immutable; build_database returns extended copies, so previously stored
    entries are never touched.
    """

    classes: tuple[MotionClass, ...]
    entries: dict = field(default_factory=dict)  # class id -> tuple[Frame, ...]
    rest_reference: Frame | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        ids = [c.id for c in self.classes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate class ids")
        if sum(c.is_rest for c in self.classes) != 1:
            raise ValueError("exactly one rest class required")

    @property
    def rest_class(self) -> MotionClass:
        return next(c for c in self.classes if c.is_rest)

    @property
    def motion_classes(self) -> tuple[MotionClass, ...]:
        return tuple(c for c in self.classes if not c.is_rest)

    def class_by_id(self, class_id: str) -> MotionClass:
        for c in self.classes:
            if c.id == class_id:
                return c
        raise KeyError(class_id)

    def entries_for(self, class_id: str) -> tuple[Frame, ...]:
        return self.entries.get(class_id, ())

    def entry_shape(self) -> tuple[int, int] | None:
        for frames in self.entries.values():
            if frames:
                return frames[0].shape
        if self.rest_reference is not None:
            return self.rest_reference.shape
        return None

    def is_complete(self) -> bool:
        return all(len(self.entries.get(c.id, ())) > 0 for c in self.classes)


def extract_rest_reference(stream) -> Frame:
    """First frame of a motion sequence, labeled rest."""
    stream = list(stream)
    if not stream:
        raise EmptyStream("cannot extract rest reference from an empty stream")
    first = stream[0]
    if float(np.ptp(first.pixels)) == 0.0:
        raise DegenerateFrame("first frame is constant; re-record the session")
    return first


def _longest_flat_run(signal: np.ndarray, start: int, stop: int, tol: float, min_len: int):
    """Longest [i, j) window inside [start, stop) with peak-to-peak <= tol.

    Sliding two-pointer scan with monotonic deques for the running max/min.
    Returns (i, j) or None if no window reaches min_len.
    """
    best = None
    maxq: deque = deque()  # decreasing values
    minq: deque = deque()  # increasing values
    left = start
    for right in range(start, stop):
        v = signal[right]
        while maxq and signal[maxq[-1]] <= v:
            maxq.pop()
        maxq.append(right)
        while minq and signal[minq[-1]] >= v:
            minq.pop()
        minq.append(right)
        while signal[maxq[0]] - signal[minq[0]] > tol:
            left += 1
            if maxq[0] < left:
                maxq.popleft()
            if minq[0] < left:
                minq.popleft()
        width = right - left + 1
        if width >= min_len and (best is None or width > best[1] - best[0]):
            best = (left, right + 1)
    return best


def detect_plateaus(signal, schedule: MetronomeSchedule, params: PlateauParams,
                    motion_label: str = "motion", rest_label: str = "rest",
                    skip_missing: bool = False, index_offset: int = 0):
    """Locate one motion-hold and one rest-hold plateau per repetition.

    The signal is the distance-from-rest series for the whole session, one
    value per frame; the tick rate is inferred from its length against the
    schedule duration. Within each scheduled hold phase the longest segment
    whose peak-to-peak range stays within flatness_tolerance is accepted,
    provided it spans at least min_length_s. Raises PlateauNotFound naming
    the failing repetition unless skip_missing salvages the rest. Plateau
    indices are signal positions shifted by index_offset (pass the stream's
    first frame index to get absolute frame indices).
    """
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1 or len(signal) == 0:
        raise ValueError("signal must be a nonempty 1-D series")
    tick_rate = len(signal) / schedule.duration
    min_len = max(1, int(round(params.min_length_s * tick_rate)))
    plateaus = []
    for kind, rep, t0, t1 in schedule.phases():
        if kind not in ("hold_motion", "hold_rest"):
            continue
        start = int(np.ceil(t0 * tick_rate - 1e-9))
        stop = min(len(signal), int(np.ceil(t1 * tick_rate - 1e-9)))
        run = _longest_flat_run(signal, start, stop, params.flatness_tolerance, min_len)
        if run is None:
            if skip_missing:
                continue
            raise PlateauNotFound(rep, kind)
        i, j = run
        label = motion_label if kind == "hold_motion" else rest_label
        plateaus.append(Plateau(start_index=i + index_offset,
                                end_index=j - 1 + index_offset,
                                level=float(signal[i:j].mean()), label=label))
    return plateaus


def _validate_stream(stream):
    if not stream:
        raise EmptyStream("empty training stream")
    shape = stream[0].shape
    base = stream[0].index
    for k, f in enumerate(stream):
        if f.shape != shape:
            raise ShapeMismatch(f"frame {k} shape {f.shape} != {shape}")
        if f.index != base + k:
            raise ValueError("stream indices must increase by exactly 1")


def build_database(stream, schedule: MetronomeSchedule, motion: MotionClass,
                   existing: TrainingDatabase | None = None,
                   params: PlateauParams = PlateauParams(),
                   session_id: str | None = None) -> TrainingDatabase:
    """Fold one motion session into a training database.

    Motion-hold plateaus land under the motion's id, rest-hold plateaus under
    the rest class; the averaged frames come from exactly the plateau's frame
    range. The anchor for the session's activity signal is the session's own
    first frame; the database keeps the first session's as rest_reference.
    """
    stream = list(stream)
    _validate_stream(stream)
    if motion.is_rest:
        raise ValueError("train motion sessions, not rest sessions")

    if existing is None:
        db = TrainingDatabase(classes=(motion, REST))
    else:
        db = existing
        shape = db.entry_shape()
        if shape is not None and stream[0].shape != shape:
            raise ShapeMismatch(f"stream shape {stream[0].shape} != database shape {shape}")
        if motion.id not in [c.id for c in db.classes]:
            db = replace(db, classes=db.classes + (motion,))

    session_rest = extract_rest_reference(stream)
    signal = np.array([distance_from_rest(f, session_rest) for f in stream])
    rest_id = db.rest_class.id
    offset = stream[0].index
    plateaus = detect_plateaus(signal, schedule, params,
                               motion_label=motion.id, rest_label=rest_id,
                               index_offset=offset)

    entries = {cid: tuple(fr) for cid, fr in db.entries.items()}
    for p in plateaus:
        rep = average_frames(stream[p.start_index - offset:p.end_index - offset + 1])
        entries[p.label] = entries.get(p.label, ()) + (rep,)

    sessions = list(db.provenance.get("sessions", []))
    sessions.append({
        "session_id": session_id or f"session-{len(sessions)}",
        "motion": motion.id,
        "frames": len(stream),
        "schedule": schedule.to_dict(),
        "params": params.to_dict(),
    })
    return TrainingDatabase(
        classes=db.classes,
        entries=entries,
        rest_reference=db.rest_reference if db.rest_reference is not None else session_rest,
        provenance={"sessions": sessions},
    )
