"""Dynamic-bound proportional control.

Per tick, the mean correlation of the incoming frame to the selected
motion's training entries is normalized into a [0, 1] completion signal by a
pair of adaptive bounds. An excursion past a bound pulls that bound halfway
out to meet it; an in-range sample relaxes the nearer bound slowly toward
the signal. Underestimated bounds therefore correct within a tick or two,
while overestimated bounds recover only at the slow relaxation rate.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import (
    BoundCollapse,
    DegenerateCalibration,
    EmptyClass,
    ShapeMismatch,
    Uninitialized,
)
from .frames import Frame, correlation
from .training import MotionClass, TrainingDatabase

__all__ = ["MIN_BOUND_GAP", "BoundState", "ControlSample",
           "mean_motion_correlation", "calibrate", "update"]

# division guard: below this gap the normalization is meaningless and the
# engine must recalibrate
MIN_BOUND_GAP = 1e-3


@dataclass(frozen=True)
class BoundState:
    """Adaptive lower/upper correlation bounds plus relaxation weights."""

    lower: float = 0.0
    upper: float = 1.0
    relax_keep: float = 0.99
    relax_pull: float = 0.01
    initialized: bool = False

    def __post_init__(self):
        if not (0.0 < self.relax_keep < 1.0 and 0.0 < self.relax_pull < 1.0):
            raise ValueError("relaxation weights must lie in (0, 1)")
        if abs(self.relax_keep + self.relax_pull - 1.0) > 1e-12:
            raise ValueError("relaxation weights must sum to 1")
        if self.initialized and not self.lower < self.upper:
            raise ValueError("initialized bounds require lower < upper")


@dataclass(frozen=True)
class ControlSample:
    """One tick of the control signal: c in, bounds after update, p out."""

    tick: int
    c: float
    lower: float
    upper: float
    p: float
    motion: str

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("control sample requires lower < upper")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("control signal outside [0, 1]")


def mean_motion_correlation(f: Frame, db: TrainingDatabase, motion: MotionClass) -> float:
    """Mean correlation of the frame to all entries of the selected motion."""
    entries = db.entries_for(motion.id)
    if not entries:
        raise EmptyClass(f"motion {motion.id!r} has no training entries")
    if f.shape != entries[0].shape:
        raise ShapeMismatch(f"frame shape {f.shape} != database shape {entries[0].shape}")
    return sum(correlation(f, e) for e in entries) / len(entries)


def calibrate(samples, relax_keep: float = 0.99, relax_pull: float = 0.01,
              min_range: float = 0.05) -> BoundState:
    """Initialize bounds from a guided rest -> completion -> rest cycle.

    The cycle's extremes are the expected correlations at rest and at the
    motion end-state: lower = min, upper = max. A spread below min_range is
    rejected as flat: sensor noise alone must not pass for dynamic range.
    """
    samples = [float(s) for s in samples]
    if len(samples) < 2 or max(samples) - min(samples) < max(min_range, MIN_BOUND_GAP):
        raise DegenerateCalibration(
            "calibration cycle produced no usable dynamic range")
    return BoundState(lower=min(samples), upper=max(samples),
                      relax_keep=relax_keep, relax_pull=relax_pull,
                      initialized=True)


def update(state: BoundState, c: float) -> tuple[BoundState, float]:
    """One bound update followed by normalization; exactly one bound moves.

    Outward: c below the lower bound drops it to the midpoint of the two;
    symmetrically for the upper bound. In range: the bound nearer to c is
    relaxed toward it by the (relax_keep, relax_pull) weighted sum. The
    control signal normalizes c inside the updated bounds, clamped to [0, 1].
    """
    if not state.initialized:
        raise Uninitialized("calibrate before updating bounds")
    l, u = state.lower, state.upper
    if c < l:
        l = (c + l) / 2.0
    elif c > u:
        u = (c + u) / 2.0
    elif abs(l - c) < abs(u - c):
        l = state.relax_keep * l + state.relax_pull * c
    else:
        u = state.relax_keep * u + state.relax_pull * c
    if u - l < MIN_BOUND_GAP:
        raise BoundCollapse(f"bound gap {u - l:.2e} below {MIN_BOUND_GAP:.0e}")
    p = (c - l) / (u - l)
    p = min(1.0, max(0.0, p))
    return replace(state, lower=l, upper=u), p
