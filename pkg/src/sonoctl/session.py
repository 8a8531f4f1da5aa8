"""Session orchestration: training, calibration, task, one tick at a time.

The engine is a synchronous state machine clocked purely by activation
inputs: each step() renders one frame from the incoming activation value,
runs it through the active phase's pipeline, appends every event to the
session log, and returns the tick payload. Wall clocks never enter, so a
replayed activation timeline reproduces the log byte for byte.
"""

from __future__ import annotations

import numpy as np

from .classify import loocv
from .config import ROLE_PHANTOM, ROLE_SUBJECT, ROLE_TRAINING, SessionConfig, derive_seed
from .errors import (
    BoundCollapse,
    DegenerateCalibration,
    DegenerateFrame,
    EmptyRecords,
    EngineError,
    InsufficientData,
    InsufficientEntries,
    PlateauNotFound,
    ProtocolViolation,
)
from .frames import distance_from_rest
from .propctl import ControlSample, calibrate, mean_motion_correlation, update
from .synthsim import (
    CursorFollower,
    Phantom,
    PhantomConfig,
    draw_rest_mixes,
    metronome_setpoints,
    draw_rep_peaks,
)
from .taskengine import (
    TrialRunner,
    compute_metrics,
    fit_fitts,
    fitts_analysis,
    fitts_points,
    generate_schedule,
    score_trial,
)
from .training import REST, build_database

__all__ = ["SessionEngine", "run_scripted_session", "replay_metrics"]

TICK_FIELDS = ("t", "time", "phase", "a", "activity", "c", "l", "u", "p",
               "motion", "rep", "target", "band_q", "trial", "time_remaining")


class SessionEngine:
    """One live session; strictly sequential; one instance per client."""

    def __init__(self, config: SessionConfig, log=None):
        self.config = config
        self.log = log
        motions = config.motion_classes()
        self.phantom = Phantom(PhantomConfig(
            motions=motions + (REST,),
            width=config.image.width, height=config.image.height,
            noise_sigma=config.image.noise_sigma,
            rest_jitter=config.image.jitter(),
            seed=derive_seed(config.seed, ROLE_PHANTOM)))
        self.task_cfg = config.seeded_task()
        self.state = "configured"
        self.t = 0
        self.db = None
        self.selected = None
        self.bounds = None
        self.runner = None
        self.metrics = None
        self.fitts = None
        self.loocv_include = None
        self.loocv_exclude = None
        self.task_block = 0
        self.completed: list[dict] = []  # one entry per finished task block
        self.study_completion = None
        self.study_fitts = None
        self._block_cfg = None
        self._motions = {m.id: m for m in motions}
        self._program: list[str] = []
        self._current_motion: str | None = None
        self._rest_mixes: dict[str, list[float]] = {}
        self._recording: list = []
        self._cal_samples: list[float] = []
        self.last_sample: ControlSample | None = None
        self._log({"type": "config", "config": config.to_dict()})

    # -- plumbing ---------------------------------------------------------

    def _log(self, event: dict):
        if self.log is not None:
            self.log.append(event)

    def _event(self, events: list, payload: dict):
        events.append(payload)
        self._log(payload)

    def _state_event(self, events: list, **extra):
        self._event(events, {"type": "session_state", "state": self.state, **extra})

    @property
    def tick_rate(self) -> float:
        return self.config.tick_rate_hz

    def now(self) -> float:
        return self.t / self.tick_rate

    def _tick(self, **kw) -> dict:
        payload = {"type": "tick"}
        payload.update({k: None for k in TICK_FIELDS})
        payload["t"] = self.t
        payload["time"] = self.now()
        payload.update(kw)
        return payload

    # -- client commands --------------------------------------------------

    def start_training(self) -> list[dict]:
        if self.state != "configured":
            raise ProtocolViolation(f"cannot start training from {self.state!r}")
        rng = np.random.default_rng(derive_seed(self.config.seed, ROLE_TRAINING))
        for mid in self.config.motions:
            self._rest_mixes[mid] = draw_rest_mixes(
                rng, self.config.metronome.repetitions, self.phantom.rest_jitter)
        self._program = list(self.config.motions)
        self._current_motion = self._program.pop(0)
        self._recording = []
        self.state = "training"
        events: list[dict] = []
        self._state_event(events, motion=self._current_motion,
                          motions_remaining=len(self._program))
        return events

    def select_motion(self, motion_id: str) -> list[dict]:
        # allowed again after a finished block: the extended protocol runs
        # one task block per motion over the same trained database
        if self.state not in ("trained", "calibrated", "done"):
            raise ProtocolViolation(f"cannot select motion from {self.state!r}")
        if motion_id not in self._motions:
            raise ProtocolViolation(f"unknown motion {motion_id!r}")
        if self._motions[motion_id].is_rest:
            raise ProtocolViolation("cannot drive proportional control with rest")
        self.selected = self._motions[motion_id]
        self.bounds = None
        self.state = "trained"
        events: list[dict] = []
        self._state_event(events, selected=motion_id)
        return events

    def start_calibration(self) -> list[dict]:
        if self.state not in ("trained", "calibrated") or self.selected is None:
            raise ProtocolViolation("training and motion selection must precede calibration")
        self._cal_samples = []
        self.state = "calibrating"
        events: list[dict] = []
        self._state_event(events, motion=self.selected.id,
                          duration_s=self.config.calibration_s)
        return events

    def start_task(self) -> list[dict]:
        if self.state != "calibrated":
            raise ProtocolViolation("calibration must precede the task")
        from dataclasses import replace
        self._block_cfg = replace(
            self.task_cfg, rng_seed=derive_seed(self.task_cfg.rng_seed, self.task_block))
        schedule = generate_schedule(self._block_cfg)
        self.runner = TrialRunner(schedule, self._block_cfg, self.tick_rate)
        self.state = "task"
        events: list[dict] = []
        self._state_event(events, trials=len(schedule.targets), block=self.task_block,
                          band_q=self._block_cfg.band, hold_mode=self._block_cfg.hold_mode)
        return events

    def abort(self) -> list[dict]:
        events: list[dict] = []
        trial = self.runner.trial_index if self.runner is not None else None
        self.state = "aborted"
        self._event(events, {"type": "abort", "trial": trial})
        return events

    # -- the tick ----------------------------------------------------------

    def step(self, a: float) -> tuple[dict, list[dict]]:
        """Process one activation input; returns (tick payload, events)."""
        a = min(1.0, max(0.0, float(a)))
        events: list[dict] = []
        if self.state == "training":
            tick = self._step_training(a, events)
        elif self.state == "calibrating":
            tick = self._step_calibration(a, events)
        elif self.state == "task":
            tick = self._step_task(a, events)
        else:
            tick = self._tick(phase=self.state, a=a)
        self._log(tick)
        self.t += 1
        return tick, events

    def _step_training(self, a: float, events: list) -> dict:
        mid = self._current_motion
        schedule = self.config.metronome
        session_tick = len(self._recording)
        kind, rep = schedule.phase_at(session_tick / self.tick_rate)
        frame = self.phantom.render_frame(
            mid, a, tick=self.t, rest_mix=self._rest_mixes[mid][rep],
            timestamp=self.now())
        self._recording.append(frame)
        try:
            activity = (0.0 if session_tick == 0
                        else distance_from_rest(frame, self._recording[0]))
        except DegenerateFrame:
            activity = None
        tick = self._tick(phase="training", a=a, motion=mid, rep=rep,
                          activity=activity)
        if len(self._recording) >= schedule.frame_count(self.tick_rate):
            self._finish_training_session(events)
        return tick

    def _finish_training_session(self, events: list):
        mid = self._current_motion
        try:
            self.db = build_database(self._recording, self.config.metronome,
                                     self._motions[mid], existing=self.db,
                                     params=self.config.plateau,
                                     session_id=f"{self.config.session_id}/{mid}")
        except PlateauNotFound as e:
            # the repetition is unusable; re-record this motion's session
            self._recording = []
            self._event(events, {"type": "error", "error": "PlateauNotFound",
                                 "message": str(e), "motion": mid})
            return
        self._event(events, {"type": "training_session", "motion": mid,
                             "entries": len(self.db.entries_for(mid))})
        self._recording = []
        if self._program:
            self._current_motion = self._program.pop(0)
            self._state_event(events, motion=self._current_motion,
                              motions_remaining=len(self._program))
        else:
            self._current_motion = None
            self.state = "trained"
            try:
                self.loocv_include = loocv(self.db, include_rest=True)[0]
                self.loocv_exclude = loocv(self.db, include_rest=False)[0]
            except InsufficientEntries:
                self.loocv_include = self.loocv_exclude = None
            self._state_event(events, loocv_include_rest=self.loocv_include,
                              loocv_exclude_rest=self.loocv_exclude)

    def _step_calibration(self, a: float, events: list) -> dict:
        frame = self.phantom.render_frame(self.selected.id, a, tick=self.t,
                                          timestamp=self.now())
        try:
            c = mean_motion_correlation(frame, self.db, self.selected)
            self._cal_samples.append(c)
        except DegenerateFrame:
            c = None
        n_cal = int(round(self.config.calibration_s * self.tick_rate))
        tick = self._tick(phase="calibrating", a=a, c=c, motion=self.selected.id,
                          time_remaining=(n_cal - len(self._cal_samples)) / self.tick_rate)
        if len(self._cal_samples) >= n_cal:
            try:
                self.bounds = calibrate(self._cal_samples)
                self.state = "calibrated"
                self._event(events, {"type": "calibration",
                                     "lower": self.bounds.lower,
                                     "upper": self.bounds.upper})
                self._state_event(events)
            except DegenerateCalibration as e:
                self.state = "trained"
                self._event(events, {"type": "error", "error": "DegenerateCalibration",
                                     "message": str(e)})
                self._state_event(events)
        return tick

    def _step_task(self, a: float, events: list) -> dict:
        frame = self.phantom.render_frame(self.selected.id, a, tick=self.t,
                                          timestamp=self.now())
        try:
            c = mean_motion_correlation(frame, self.db, self.selected)
            try:
                self.bounds, p = update(self.bounds, c)
            except BoundCollapse as e:
                self.bounds = None
                self.state = "trained"
                self._event(events, {"type": "error", "error": "BoundCollapse",
                                     "message": str(e)})
                self._state_event(events)
                return self._tick(phase=self.state, a=a)
        except DegenerateFrame:
            # unusable frame: hold the previous sample, bounds untouched
            if self.last_sample is None:
                return self._tick(phase="task", a=a)
            c, p = self.last_sample.c, self.last_sample.p
        sample = ControlSample(tick=self.t, c=c, lower=self.bounds.lower,
                               upper=self.bounds.upper, p=p,
                               motion=self.selected.id)
        self.last_sample = sample
        trial = self.runner.trial_index
        target = self.runner.current_target
        record = self.runner.step(self.now(), sample.p)
        remaining = 0.0 if record is not None else self.runner.time_remaining(self.now())
        tick = self._tick(phase="task", a=a, c=sample.c, l=sample.lower,
                          u=sample.upper, p=sample.p, motion=sample.motion,
                          target=target, band_q=self._block_cfg.band, trial=trial,
                          time_remaining=remaining)
        if record is not None:
            scored = score_trial(record)
            self._event(events, {
                "type": "trial_result", "trial": trial, "target": record.target,
                "acquired": record.acquired, "movement_time": record.movement_time,
                "position_error": scored.position_error,
                "stability_error": scored.stability_error,
            })
        if self.runner.done:
            self._finish_task(events)
        return tick

    def _finish_task(self, events: list):
        self.metrics = compute_metrics(self.runner.records, self._block_cfg)
        try:
            self.fitts = fitts_analysis(self.runner.records, self._block_cfg)
        except InsufficientData:
            self.fitts = None
        self.completed.append({
            "motion": self.selected.id,
            "cfg": self._block_cfg,
            "records": tuple(self.runner.records),
            "metrics": self.metrics,
            "fitts": self.fitts,
        })
        self.task_block += 1
        self.state = "done"
        self._event(events, {
            "type": "session_metrics",
            "motion": self.selected.id,
            "block": self.task_block - 1,
            "metrics": self.metrics.to_dict(),
            "fitts": self.fitts.to_dict() if self.fitts is not None else None,
        })
        self._state_event(events)

    def finish_study(self):
        """Aggregate all finished task blocks into the pooled study view.

        Returns (completion percent, pooled FittsResult or None) and logs a
        study_summary event.
        """
        if not self.completed:
            raise EmptyRecords("no finished task blocks")
        all_records = [r for block in self.completed for r in block["records"]]
        acquired = sum(1 for r in all_records if r.acquired)
        completion = 100.0 * acquired / len(all_records)
        points = [p for block in self.completed
                  for p in fitts_points(block["records"], block["cfg"])]
        try:
            pooled = fit_fitts(points)
        except InsufficientData:
            pooled = None
        self._log({
            "type": "study_summary",
            "blocks": [b["motion"] for b in self.completed],
            "completion_rate": completion,
            "fitts": pooled.to_dict() if pooled is not None else None,
        })
        self.study_completion = completion
        self.study_fitts = pooled
        return completion, pooled


def run_scripted_session(config: SessionConfig, log=None) -> SessionEngine:
    """Headless end-to-end study driven by the scripted subject.

    Runs the full extended protocol: one training program over all motions,
    then one calibration + task block per task motion (all configured
    motions unless config.task_motion pins a single one), then the pooled
    study summary.
    """
    engine = SessionEngine(config, log=log)
    subject = config.subject.scripted(derive_seed(config.seed, ROLE_SUBJECT))
    subject_rng = np.random.default_rng(derive_seed(config.seed, ROLE_SUBJECT))
    rate = config.tick_rate_hz

    engine.start_training()
    for _ in config.motions:
        peaks = draw_rep_peaks(subject_rng, config.metronome.repetitions,
                               config.subject.peak_min, config.subject.peak_max)
        setpoints = metronome_setpoints(config.metronome, rate, peaks)
        tracker = subject.tracker(rate)
        for sp in setpoints:
            engine.step(tracker.step(sp))
    if engine.state != "trained":
        raise EngineError(f"training did not complete (state {engine.state!r})")

    n_cal = int(round(config.calibration_s * rate))
    half = n_cal // 2
    cal_targets = [min(k / half, 1.0) if k < half
                   else max((n_cal - 1 - k) / (n_cal - half), 0.0)
                   for k in range(n_cal)]
    task_motions = ([config.task_motion] if config.task_motion is not None
                    else list(config.motions))
    ticks_per_trial = int(round(config.task.hold_time_s * rate)
                          + (config.task.timeout_s or 0.0) * rate + 1)
    for motion in task_motions:
        engine.select_motion(motion)
        engine.start_calibration()
        tracker = subject.tracker(rate)
        for tgt in cal_targets:
            engine.step(tracker.step(tgt))
        if engine.state != "calibrated":
            raise EngineError(f"calibration failed for motion {motion!r}")
        engine.start_task()
        follower = CursorFollower(subject, rate)
        guard = 0
        limit = 10 * len(engine.runner.schedule.targets) * ticks_per_trial
        while engine.state == "task" and guard < limit:
            cursor = 0.0 if engine.last_sample is None else engine.last_sample.p
            a = follower.step(engine.runner.current_target, cursor)
            engine.step(a)
            guard += 1
        if engine.state != "done":
            raise EngineError(f"task block for {motion!r} did not finish")
    engine.finish_study()
    return engine


def replay_metrics(events):
    """Recompute all task metrics from a persisted session log.

    Groups the logged task-phase cursor ticks into blocks (a new block
    starts when the motion changes or the trial counter restarts) and feeds
    each through a fresh trial state machine; bit-identical to the live
    computation because tick times and cursor values round-trip JSON
    exactly. Returns (config, blocks, completion, pooled fitts) where each
    block is a dict with motion, metrics and fitts.
    """
    from dataclasses import replace

    config_event = next((e for e in events if e.get("type") == "config"), None)
    if config_event is None:
        raise EngineError("log has no config event")
    config = SessionConfig.from_dict(config_event["config"])
    task_cfg = config.seeded_task()
    aborted = False
    groups: list[dict] = []
    current = None
    for e in events:
        if e.get("type") == "abort":
            aborted = True
            break
        if e.get("type") != "tick" or e.get("phase") != "task" or e.get("p") is None:
            continue
        if (current is None or e.get("motion") != current["motion"]
                or (current["ticks"] and e.get("trial", 0) < current["ticks"][-1][2])):
            current = {"motion": e.get("motion"), "ticks": []}
            groups.append(current)
        current["ticks"].append((e["time"], e["p"], e.get("trial", 0)))

    blocks = []
    all_records = []
    points = []
    for index, group in enumerate(groups):
        block_cfg = replace(task_cfg, rng_seed=derive_seed(task_cfg.rng_seed, index))
        runner = TrialRunner(generate_schedule(block_cfg), block_cfg, config.tick_rate_hz)
        for time, p, _ in group["ticks"]:
            runner.step(time, p)
        if not runner.records:
            continue
        metrics = compute_metrics(runner.records, block_cfg)
        try:
            fitts = fitts_analysis(runner.records, block_cfg)
        except InsufficientData:
            fitts = None
        blocks.append({"motion": group["motion"], "cfg": block_cfg,
                       "records": tuple(runner.records),
                       "metrics": metrics, "fitts": fitts})
        all_records.extend(runner.records)
        points.extend(fitts_points(runner.records, block_cfg))
    if not blocks:
        raise EmptyRecords("log contains no completed trials")
    completion = 100.0 * sum(1 for r in all_records if r.acquired) / len(all_records)
    try:
        pooled = fit_fitts(points)
    except InsufficientData:
        pooled = None
    return config, blocks, completion, pooled
