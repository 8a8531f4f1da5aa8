"""Seeded synthetic image source and scripted subject.

The phantom stands in for live transducer imagery: each motion class gets a
smooth random intensity field as its end-state template, frames are linear
blends between the rest field and a motion field plus per-tick noise. Linear
blending keeps correlation-vs-activation analytically monotone, so every
pipeline stage can be exercised and checked without hardware.

The scripted subject is a first-order lag tracker with reaction delay and
tremor, used for headless end-to-end runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import InvalidConfig, UnknownMotion
from .frames import Frame, as_storage_grid, correlation
from .training import MotionClass

__all__ = [
    "RestJitter",
    "PhantomConfig",
    "Phantom",
    "ScriptedSubject",
    "SubjectTracker",
    "CursorFollower",
    "scripted_track",
    "metronome_setpoints",
    "draw_rep_peaks",
    "draw_rest_mixes",
    "record_training_session",
]

_TEMPLATE_KEY = 0
_NOISE_KEY = 1


@dataclass(frozen=True)
class RestJitter:
    """Per-hold postural drift of the rest state toward a motion end-state.

    Models the relaxed posture varying between holds; drift magnitudes are
    drawn per rest hold in [0, mix_max] by the training driver. toward=None
    drifts toward the first motion in the set.
    """

    mix_max: float = 0.6
    toward: str | None = None

    def to_dict(self) -> dict:
        return {"mix_max": self.mix_max, "toward": self.toward}


@dataclass(frozen=True)
class PhantomConfig:
    motions: tuple[MotionClass, ...]
    width: int = 64
    height: int = 64
    noise_sigma: float = 0.02
    rest_jitter: RestJitter | None = None
    seed: int = 0

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise InvalidConfig("phantom needs at least 2x2 pixels")
        if self.noise_sigma < 0:
            raise InvalidConfig("noise_sigma must be >= 0")
        if sum(m.is_rest for m in self.motions) != 1:
            raise InvalidConfig("phantom needs exactly one rest class")
        if len(self.motions) < 2:
            raise InvalidConfig("phantom needs at least one motion besides rest")


def _smooth_field(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    field = rng.standard_normal((height, width))
    field = gaussian_filter(field, sigma=max(2.0, min(height, width) / 10), mode="wrap")
    lo, hi = field.min(), field.max()
    return as_storage_grid(0.15 + 0.7 * (field - lo) / (hi - lo))


class Phantom:
    """Deterministic frame source over a fixed template set."""

    def __init__(self, config: PhantomConfig):
        self.config = config
        self.templates: dict[str, np.ndarray] = {}
        for k, m in enumerate(config.motions):
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=config.seed, spawn_key=(_TEMPLATE_KEY, k)))
            self.templates[m.id] = _smooth_field(rng, config.height, config.width)
        self._check_templates()
        self.rest_id = next(m.id for m in config.motions if m.is_rest)
        jitter = config.rest_jitter
        if jitter is not None and jitter.toward is None:
            toward = next(m.id for m in config.motions if not m.is_rest)
            jitter = RestJitter(mix_max=jitter.mix_max, toward=toward)
        self.rest_jitter = jitter

    def _check_templates(self):
        ids = list(self.templates)
        for i, a in enumerate(ids):
            ta = Frame.from_pixels(self.templates[a])
            for b in ids[i + 1:]:
                r = correlation(ta, Frame.from_pixels(self.templates[b]))
                if r >= 0.9:
                    raise InvalidConfig(
                        f"templates {a}/{b} too similar (r={r:.3f}); change the seed")

    def template(self, motion_id: str) -> Frame:
        if motion_id not in self.templates:
            raise UnknownMotion(motion_id)
        return Frame.from_pixels(self.templates[motion_id])

    def render_frame(self, motion_id: str, activation: float, tick: int,
                     rest_mix: float = 0.0, timestamp: float = 0.0) -> Frame:
        """Blend rest and motion templates at the given activation, plus noise.

        Bit-deterministic for a fixed (seed, tick); rest_mix drifts the rest
        end of the blend toward the jitter target (training-time postural
        variation).
        """
        if motion_id not in self.templates:
            raise UnknownMotion(motion_id)
        if not 0.0 <= activation <= 1.0:
            raise ValueError("activation outside [0, 1]")
        rest = self.templates[self.rest_id]
        if rest_mix > 0.0:
            if self.rest_jitter is None:
                raise InvalidConfig("rest_mix requires rest_jitter to be configured")
            alt = self.templates[self.rest_jitter.toward]
            rest = (1.0 - rest_mix) * rest + rest_mix * alt
        px = (1.0 - activation) * rest + activation * self.templates[motion_id]
        if self.config.noise_sigma > 0.0:
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=self.config.seed,
                                       spawn_key=(_NOISE_KEY, tick)))
            px = px + rng.normal(0.0, self.config.noise_sigma, px.shape)
        px = as_storage_grid(np.clip(px, 0.0, 1.0))
        return Frame(width=self.config.width, height=self.config.height,
                     pixels=px, index=tick, timestamp=timestamp)


@dataclass(frozen=True)
class ScriptedSubject:
    """First-order lag tracker standing in for a human operator.

    max_rate_per_s caps activation slew (muscles have bounded speed); 0
    disables the cap.
    """

    reaction_delay_s: float = 0.25
    time_constant_s: float = 0.4
    tremor_sigma: float = 0.01
    max_rate_per_s: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if min(self.reaction_delay_s, self.time_constant_s, self.tremor_sigma,
               self.max_rate_per_s) < 0:
            raise InvalidConfig("subject parameters must be >= 0")

    def tracker(self, tick_rate: float, initial: float = 0.0) -> "SubjectTracker":
        return SubjectTracker(self, tick_rate, initial)

    def to_dict(self) -> dict:
        return {"reaction_delay_s": self.reaction_delay_s,
                "time_constant_s": self.time_constant_s,
                "tremor_sigma": self.tremor_sigma,
                "seed": self.seed}


class SubjectTracker:
    """Stateful per-tick tracker: delayed target, exponential approach, tremor."""

    def __init__(self, subject: ScriptedSubject, tick_rate: float, initial: float = 0.0):
        self.subject = subject
        dt = 1.0 / tick_rate
        tau = subject.time_constant_s
        self._alpha = 1.0 if tau == 0.0 else 1.0 - math.exp(-dt / tau)
        self._slew = subject.max_rate_per_s * dt if subject.max_rate_per_s > 0 else None
        n_delay = int(round(subject.reaction_delay_s * tick_rate))
        self._delay_line = [initial] * n_delay
        self._y = initial
        self._rng = np.random.default_rng(
            np.random.SeedSequence(entropy=subject.seed, spawn_key=(0,)))

    def _advance(self, delta: float) -> float:
        if self._slew is not None:
            delta = min(self._slew, max(-self._slew, delta))
        self._y = min(1.0, max(0.0, self._y + delta))
        a = self._y
        if self.subject.tremor_sigma > 0.0:
            a += self._rng.normal(0.0, self.subject.tremor_sigma)
        return min(1.0, max(0.0, a))

    def step(self, target: float) -> float:
        """Advance one tick toward the (delayed) target; returns activation."""
        self._delay_line.append(float(target))
        seen = self._delay_line.pop(0)
        return self._advance(self._alpha * (seen - self._y))


def scripted_track(subject: ScriptedSubject, targets, tick_rate: float,
                   initial: float = 0.0) -> np.ndarray:
    """Activation series for a per-tick target series (deterministic by seed)."""
    tracker = subject.tracker(tick_rate, initial)
    return np.array([tracker.step(t) for t in targets])


class CursorFollower:
    """Closed-loop stand-in for a human steering the on-screen cursor.

    The activation-to-cursor map is nonlinear, drifts as the bounds adapt,
    and is unknown to the subject, so open-loop tracking cannot hit tight
    bands. The follower sees the cursor a reaction time late and compensates
    the way a human does: an efference copy of its own in-flight commands
    predicts where the cursor is about to be, a running estimate of the
    cursor-per-activation gain (learned from observed motion) scales the
    corrections, and inside the hold deadband it stops correcting.
    """

    DEADBAND = 0.015  # predicted error below which the subject holds still
    DAMPING = 0.6     # fraction of the predicted error corrected per step

    def __init__(self, subject: ScriptedSubject, tick_rate: float, initial: float = 0.0):
        self.subject = subject
        dt = 1.0 / tick_rate
        self._slew = subject.max_rate_per_s * dt if subject.max_rate_per_s > 0 else 1.0
        self._n_delay = max(1, int(round(subject.reaction_delay_s * tick_rate)))
        self._cursor_view = [float(initial)] * self._n_delay  # delayed display
        self._y_hist = [float(initial)] * self._n_delay       # efference copy
        self._prev_view: tuple[float, float] | None = None
        self._y = initial
        self._gain_est = 2.0  # cursor units per activation unit
        self._rng = np.random.default_rng(
            np.random.SeedSequence(entropy=subject.seed, spawn_key=(1,)))

    def _learn_gain(self, cur_d: float, y_d: float):
        if self._prev_view is not None:
            prev_cur, prev_y = self._prev_view
            dy = y_d - prev_y
            dc = cur_d - prev_cur
            if abs(dy) > 5e-3 and dc * dy > 0:
                obs = dc / dy
                self._gain_est = min(200.0, max(0.5,
                                                0.7 * self._gain_est + 0.3 * obs))
        self._prev_view = (cur_d, y_d)

    def step(self, target: float, cursor: float) -> float:
        """One tick of cursor pursuit; returns the activation to perform."""
        self._cursor_view.append(float(cursor))
        cur_d = self._cursor_view.pop(0)
        self._y_hist.append(self._y)
        y_d = self._y_hist.pop(0)
        self._learn_gain(cur_d, y_d)
        # predicted current cursor: delayed view + effect of commands issued since
        cur_pred = cur_d + self._gain_est * (self._y - y_d)
        err = float(target) - cur_pred
        if abs(err) > self.DEADBAND:
            # slew cap makes large corrections ballistic; high learned gain
            # makes fine corrections proportionally small
            delta = min(self._slew, max(-self._slew,
                                        self.DAMPING * err / self._gain_est))
        else:
            delta = 0.0
        self._y = min(1.0, max(0.0, self._y + delta))
        a = self._y
        if self.subject.tremor_sigma > 0.0:
            a += self._rng.normal(0.0, self.subject.tremor_sigma)
        return min(1.0, max(0.0, a))


def metronome_setpoints(schedule, tick_rate: float, peaks=None) -> np.ndarray:
    """Per-tick nominal activation the metronome asks for during training.

    Transition phases ramp linearly between rest and the repetition's peak;
    hold phases sit at the peak (or at 0 for rest holds). Sessions therefore
    start at rest. peaks defaults to full completion every repetition.
    """
    n = schedule.frame_count(tick_rate)
    if peaks is None:
        peaks = [1.0] * schedule.repetitions
    dur = schedule.phase_duration
    out = np.zeros(n)
    for k in range(n):
        t = k / tick_rate
        kind, rep = schedule.phase_at(t)
        frac = (t % dur) / dur
        if kind == "to_motion":
            out[k] = frac * peaks[rep]
        elif kind == "hold_motion":
            out[k] = peaks[rep]
        elif kind == "to_rest":
            out[k] = (1.0 - frac) * peaks[rep]
    return out


def draw_rep_peaks(rng: np.random.Generator, repetitions: int,
                   lo: float = 0.85, hi: float = 1.0) -> list[float]:
    """Per-repetition end-state completion: humans never hit the exact same
    end state twice, so scripted sessions vary it too."""
    return [float(v) for v in rng.uniform(lo, hi, size=repetitions)]


def draw_rest_mixes(rng: np.random.Generator, repetitions: int,
                    jitter: RestJitter | None) -> list[float]:
    """Per-repetition rest posture drift magnitudes (0 when jitter is off)."""
    if jitter is None:
        return [0.0] * repetitions
    return [float(v) for v in rng.uniform(0.0, jitter.mix_max, size=repetitions)]


def record_training_session(phantom: Phantom, motion_id: str, schedule,
                            tick_rate: float, activation, rest_mixes=None,
                            start_tick: int = 0) -> list[Frame]:
    """Render the frame stream for one training session.

    activation is the per-tick series (scripted or replayed); rest_mixes is
    one drift magnitude per repetition, applied to every frame of that
    repetition so holds stay flat while postures differ across holds.
    """
    n = schedule.frame_count(tick_rate)
    if len(activation) != n:
        raise ValueError(f"activation length {len(activation)} != session frames {n}")
    if rest_mixes is None:
        rest_mixes = [0.0] * schedule.repetitions
    frames = []
    for k in range(n):
        _, rep = schedule.phase_at(k / tick_rate)
        frames.append(phantom.render_frame(
            motion_id, float(activation[k]), start_tick + k,
            rest_mix=rest_mixes[rep], timestamp=(start_tick + k) / tick_rate))
    return frames
