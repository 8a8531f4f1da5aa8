"""1-nearest-neighbor motion classification and leave-one-out validation.

The classifier ranks every training entry by correlation to the query frame
and returns the winning entry's class. Rest participation is a query-time
flag so the same database reports both with-rest and without-rest accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ClassListMismatch, EmptyDatabase, EmptyInput, InsufficientEntries, ShapeMismatch
from .frames import Frame, correlation
from .training import TrainingDatabase

__all__ = ["Prediction", "ConfusionMatrix", "nn_classify", "loocv", "aggregate_confusion"]


@dataclass(frozen=True)
class Prediction:
    class_id: str
    nearest_similarity: float
    runner_up_margin: float  # best minus second-best class similarity; inf if unopposed


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes, columns predicted, in the given class order."""

    classes: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        n = len(self.classes)
        if counts.shape != (n, n):
            raise ValueError(f"counts shape {counts.shape} != ({n}, {n})")
        if (counts < 0).any():
            raise ValueError("negative confusion counts")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        """Percent of validation samples on the diagonal."""
        return 100.0 * float(np.trace(self.counts)) / self.total

    def to_csv(self) -> str:
        lines = ["class," + ",".join(self.classes)]
        for cid, row in zip(self.classes, self.counts):
            lines.append(cid + "," + ",".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"


def _eligible_classes(db: TrainingDatabase, include_rest: bool):
    return [c for c in db.classes if include_rest or not c.is_rest]


def _candidates(db: TrainingDatabase, include_rest: bool):
    """(class_id, entry_index, frame) for every eligible entry, in db order."""
    out = []
    for c in _eligible_classes(db, include_rest):
        for i, f in enumerate(db.entries_for(c.id)):
            out.append((c.id, i, f))
    return out


def _best_match(query: Frame, candidates) -> Prediction:
    # tie-break: highest similarity, then lexicographically lowest class id,
    # then lowest entry index -- deterministic across runs
    best_per_class: dict[str, float] = {}
    best_key = None
    for cid, idx, entry in candidates:
        sim = correlation(query, entry)
        if cid not in best_per_class or sim > best_per_class[cid]:
            best_per_class[cid] = sim
        key = (-sim, cid, idx)
        if best_key is None or key < best_key:
            best_key = key
    best_sim, best_cid = -best_key[0], best_key[1]
    others = [s for cid, s in best_per_class.items() if cid != best_cid]
    margin = best_sim - max(others) if others else math.inf
    return Prediction(class_id=best_cid, nearest_similarity=best_sim,
                      runner_up_margin=margin)


def nn_classify(f: Frame, db: TrainingDatabase, include_rest: bool) -> Prediction:
    """Class of the single most-correlated training entry among eligible ones."""
    candidates = _candidates(db, include_rest)
    if not candidates:
        raise EmptyDatabase("no eligible training entries")
    shape = candidates[0][2].shape
    if f.shape != shape:
        raise ShapeMismatch(f"query shape {f.shape} != database shape {shape}")
    return _best_match(f, candidates)


def loocv(db: TrainingDatabase, include_rest: bool):
    """Leave-one-out cross-validation over eligible entries.

    Each entry is classified against the database minus itself. Returns
    (accuracy percent, confusion matrix); deterministic for a fixed database.
    """
    classes = _eligible_classes(db, include_rest)
    for c in classes:
        if len(db.entries_for(c.id)) < 2:
            raise InsufficientEntries(c.id)
    candidates = _candidates(db, include_rest)
    class_ids = [c.id for c in classes]
    index = {cid: k for k, cid in enumerate(class_ids)}
    counts = np.zeros((len(class_ids), len(class_ids)), dtype=np.int64)
    for held_out in candidates:
        cid, _, query = held_out
        rest = [c for c in candidates if c is not held_out]
        pred = _best_match(query, rest)
        counts[index[cid], index[pred.class_id]] += 1
    matrix = ConfusionMatrix(classes=tuple(class_ids), counts=counts)
    return matrix.accuracy(), matrix


def aggregate_confusion(matrices) -> ConfusionMatrix:
    """Element-wise sum of confusion matrices over one class list.

    Raw counts are summed, so sources with more validation samples weigh
    proportionally more.
    """
    matrices = list(matrices)
    if not matrices:
        raise EmptyInput("nothing to aggregate")
    classes = matrices[0].classes
    for m in matrices[1:]:
        if m.classes != classes:
            raise ClassListMismatch(f"{m.classes} != {classes}")
    total = np.zeros_like(matrices[0].counts)
    for m in matrices:
        total = total + m.counts
    return ConfusionMatrix(classes=classes, counts=total)
