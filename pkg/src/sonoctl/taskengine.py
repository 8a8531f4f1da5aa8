"""Target-holding task protocol and outcome metrics.

Targets are drawn without replacement from equidistant quantized levels and
held for a fixed time. Two hold variants exist: the pilot protocol starts
the hold clock when the cursor first enters the target's quantization band
(with a timeout), the extended protocol runs the hold clock from target
presentation and scores acquisition by whether the band was ever entered.
Position/stability errors are evaluated from first band entry until the
hold expires; movement times feed the difficulty-vs-time regression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptyRecords, InsufficientData, InvalidConfig

__all__ = [
    "HOLD_ON_ENTRY",
    "HOLD_ON_PRESENTATION",
    "TaskConfig",
    "TargetSchedule",
    "TrialRecord",
    "FittsPoint",
    "FittsResult",
    "SessionMetrics",
    "quantization_bound",
    "band_halfwidth",
    "generate_schedule",
    "TrialRunner",
    "score_trial",
    "compute_metrics",
    "index_of_difficulty",
    "fitts_points",
    "fit_fitts",
    "fitts_analysis",
]

HOLD_ON_ENTRY = "on_entry"
HOLD_ON_PRESENTATION = "on_presentation"


def quantization_bound(n_positions: int) -> float:
    """Half-width of the target acceptance band, in percent of range."""
    if n_positions < 2:
        raise InvalidConfig("need at least two target positions")
    return 100.0 / (2.0 * (n_positions - 1))


def band_halfwidth(n_positions: int) -> float:
    """Same band as quantization_bound, as a fraction of range."""
    return quantization_bound(n_positions) / 100.0


@dataclass(frozen=True)
class TaskConfig:
    n_positions: int = 11
    hold_time_s: float = 10.0
    timeout_s: float | None = None
    trials_per_level: int = 3
    hold_mode: str = HOLD_ON_PRESENTATION
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_positions < 2:
            raise InvalidConfig("n_positions must be >= 2")
        if self.hold_time_s <= 0:
            raise InvalidConfig("hold_time_s must be > 0")
        if self.trials_per_level < 1:
            raise InvalidConfig("trials_per_level must be >= 1")
        if self.hold_mode not in (HOLD_ON_ENTRY, HOLD_ON_PRESENTATION):
            raise InvalidConfig(f"unknown hold_mode {self.hold_mode!r}")
        if self.hold_mode == HOLD_ON_ENTRY and self.timeout_s is None:
            raise InvalidConfig("on_entry hold mode requires timeout_s")
        if self.timeout_s is not None and self.timeout_s <= 0:
            raise InvalidConfig("timeout_s must be > 0")

    @property
    def band(self) -> float:
        return band_halfwidth(self.n_positions)

    def levels(self) -> list[float]:
        n = self.n_positions
        return [i / (n - 1) for i in range(n)]

    def to_dict(self) -> dict:
        return {"n_positions": self.n_positions, "hold_time_s": self.hold_time_s,
                "timeout_s": self.timeout_s, "trials_per_level": self.trials_per_level,
                "hold_mode": self.hold_mode, "rng_seed": self.rng_seed}


@dataclass(frozen=True)
class TargetSchedule:
    targets: tuple[float, ...]

    def __len__(self):
        return len(self.targets)


def generate_schedule(cfg: TaskConfig) -> TargetSchedule:
    """trials_per_level seeded without-replacement passes over the levels.

    Consecutive duplicates can only occur where one pass ends and the next
    begins; within a pass every level appears exactly once.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    levels = np.array(cfg.levels())
    targets = []
    for _ in range(cfg.trials_per_level):
        targets.extend(float(v) for v in rng.permutation(levels))
    return TargetSchedule(targets=tuple(targets))


@dataclass(frozen=True)
class TrialRecord:
    target: float
    presented_at: float
    first_entry_at: float | None
    trace: tuple  # (time, p) pairs, presentation tick through trial end
    acquired: bool
    movement_time: float | None
    position_error: float | None = None   # percent, filled by compute_metrics
    stability_error: float | None = None  # percent, filled by compute_metrics

    def entry_index(self) -> int | None:
        if self.first_entry_at is None:
            return None
        for i, (t, _) in enumerate(self.trace):
            if t >= self.first_entry_at:
                return i
        return None


class TrialRunner:
    """Sequential trial state machine over a (time, p) tick stream.

    Trial boundaries are tick-count exact: a hold of hold_time_s at rate
    tick_rate spans round(hold_time_s * tick_rate) ticks, the first of which
    is the presentation (or band-entry) tick.
    """

    def __init__(self, schedule: TargetSchedule, cfg: TaskConfig, tick_rate: float):
        self.schedule = schedule
        self.cfg = cfg
        self.tick_rate = tick_rate
        self._hold_ticks = max(1, int(round(cfg.hold_time_s * tick_rate)))
        self._timeout_ticks = (max(1, int(round(cfg.timeout_s * tick_rate)))
                               if cfg.timeout_s is not None else None)
        self._trial_index = 0
        self._trace: list = []
        self._presented_at: float | None = None
        self._entry_at: float | None = None
        self._entry_tick: int | None = None
        self.records: list[TrialRecord] = []

    @property
    def done(self) -> bool:
        return self._trial_index >= len(self.schedule.targets)

    @property
    def trial_index(self) -> int:
        return self._trial_index

    @property
    def current_target(self) -> float | None:
        if self.done:
            return None
        return self.schedule.targets[self._trial_index]

    def time_remaining(self, now: float) -> float | None:
        """Seconds until the current hold (or timeout window) expires."""
        if self.done or self._presented_at is None:
            return None
        dt = 1.0 / self.tick_rate
        if self.cfg.hold_mode == HOLD_ON_PRESENTATION:
            return self._presented_at + self._hold_ticks * dt - now
        if self._entry_at is not None:
            return self._entry_at + self._hold_ticks * dt - now
        return self._presented_at + self._timeout_ticks * dt - now

    def step(self, time: float, p: float) -> TrialRecord | None:
        """Feed one cursor tick; returns the trial record when a trial ends."""
        if self.done:
            return None
        target = self.schedule.targets[self._trial_index]
        if self._presented_at is None:
            self._presented_at = time
        self._trace.append((time, p))
        in_band = abs(p - target) <= self.cfg.band
        if self._entry_at is None and in_band:
            self._entry_at = time
            self._entry_tick = len(self._trace) - 1

        if self.cfg.hold_mode == HOLD_ON_PRESENTATION:
            if len(self._trace) >= self._hold_ticks:
                return self._close()
        else:
            if self._entry_tick is not None:
                if len(self._trace) - self._entry_tick >= self._hold_ticks:
                    return self._close()
            elif len(self._trace) >= self._timeout_ticks:
                return self._close()
        return None

    def _close(self) -> TrialRecord:
        acquired = self._entry_at is not None
        record = TrialRecord(
            target=self.schedule.targets[self._trial_index],
            presented_at=self._presented_at,
            first_entry_at=self._entry_at,
            trace=tuple(self._trace),
            acquired=acquired,
            movement_time=(self._entry_at - self._presented_at) if acquired else None,
        )
        self.records.append(record)
        self._trial_index += 1
        self._trace = []
        self._presented_at = None
        self._entry_at = None
        self._entry_tick = None
        return record


def score_trial(record: TrialRecord) -> TrialRecord:
    """Position/stability errors over the post-entry hold window, percent."""
    if not record.acquired:
        return record
    idx = record.entry_index()
    window = np.array([p for _, p in record.trace[idx:]])
    err = (window - record.target) * 100.0
    return replace(record,
                   position_error=float(np.mean(err)),
                   stability_error=float(np.std(err)))


@dataclass(frozen=True)
class SessionMetrics:
    trials: tuple
    completion_rate: float            # percent acquired
    mean_position_error: float | None       # signed, over acquired trials
    mean_abs_position_error: float | None
    mean_stability_error: float | None
    mean_movement_time: float | None

    def to_dict(self) -> dict:
        return {
            "completion_rate": self.completion_rate,
            "mean_position_error": self.mean_position_error,
            "mean_abs_position_error": self.mean_abs_position_error,
            "mean_stability_error": self.mean_stability_error,
            "mean_movement_time": self.mean_movement_time,
            "trials": [
                {"target": t.target, "acquired": t.acquired,
                 "movement_time": t.movement_time,
                 "position_error": t.position_error,
                 "stability_error": t.stability_error}
                for t in self.trials
            ],
        }


def compute_metrics(records, cfg: TaskConfig) -> SessionMetrics:
    """Aggregate per-trial errors; unacquired trials carry no error values."""
    records = list(records)
    if not records:
        raise EmptyRecords("no trials to score")
    trials = tuple(score_trial(r) for r in records)
    acquired = [t for t in trials if t.acquired]
    mean = lambda vals: float(np.mean(vals)) if vals else None
    return SessionMetrics(
        trials=trials,
        completion_rate=100.0 * len(acquired) / len(trials),
        mean_position_error=mean([t.position_error for t in acquired]),
        mean_abs_position_error=mean([abs(t.position_error) for t in acquired]),
        mean_stability_error=mean([t.stability_error for t in acquired]),
        mean_movement_time=mean([t.movement_time for t in acquired]),
    )


@dataclass(frozen=True)
class FittsPoint:
    distance: float       # between subsequent targets, fraction of range
    band: float           # quantization half-width, fraction of range
    difficulty: float     # bits
    movement_time: float  # seconds


def index_of_difficulty(distance: float, band: float) -> float:
    """log2(D / (2|Q|) + 1) bits."""
    return math.log2(distance / (2.0 * abs(band)) + 1.0)


@dataclass(frozen=True)
class FittsResult:
    points: tuple
    binned: tuple         # (difficulty, mean movement time) per distinct ID
    slope: float
    intercept: float
    r_squared: float
    throughput: float | None  # 1/slope bits/s; undefined when slope == 0

    def to_dict(self) -> dict:
        return {
            "slope": self.slope, "intercept": self.intercept,
            "r_squared": self.r_squared, "throughput": self.throughput,
            "points": [{"distance": p.distance, "band": p.band,
                        "difficulty": p.difficulty, "movement_time": p.movement_time}
                       for p in self.points],
            "binned": [{"difficulty": d, "mean_movement_time": mt}
                       for d, mt in self.binned],
        }


def fitts_points(records, cfg: TaskConfig) -> list:
    """Difficulty/movement-time points for one task block.

    Target distance is measured between subsequent scheduled targets (the
    first from the rest position 0); only acquired trials contribute points.
    """
    q = cfg.band
    points = []
    prev = 0.0
    for r in records:
        d = abs(r.target - prev)
        prev = r.target
        if not r.acquired:
            continue
        points.append(FittsPoint(distance=d, band=q,
                                 difficulty=index_of_difficulty(d, q),
                                 movement_time=r.movement_time))
    return points


def fit_fitts(points) -> FittsResult:
    """Binned least-squares fit of movement time against difficulty.

    Mean movement time per distinct difficulty value is regressed against
    difficulty; throughput is the inverse regression slope.
    """
    points = list(points)
    bins: dict[float, list[float]] = {}
    for p in points:
        bins.setdefault(p.difficulty, []).append(p.movement_time)
    if len(bins) < 2:
        raise InsufficientData("need >= 2 acquired trials with distinct difficulty")
    binned = tuple(sorted((d, float(np.mean(mts))) for d, mts in bins.items()))
    x = np.array([d for d, _ in binned])
    y = np.array([mt for _, mt in binned])
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    sxy = float(((x - xm) * (y - ym)).sum())
    syy = float(((y - ym) ** 2).sum())
    slope = sxy / sxx
    intercept = float(ym - slope * xm)
    ss_res = float(((y - (intercept + slope * x)) ** 2).sum())
    r_squared = 1.0 - ss_res / syy if syy > 0.0 else float("nan")
    throughput = 1.0 / slope if slope != 0.0 else None
    return FittsResult(points=tuple(points), binned=binned, slope=slope,
                       intercept=intercept, r_squared=r_squared,
                       throughput=throughput)


def fitts_analysis(records, cfg: TaskConfig) -> FittsResult:
    """Points plus fit for a single task block."""
    return fit_fitts(fitts_points(records, cfg))
