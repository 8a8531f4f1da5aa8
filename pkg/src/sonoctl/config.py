"""Session configuration: one seeded, JSON-serializable dataclass tree.

Every randomized behavior in a session (phantom noise, target order, subject
tremor, training variation) draws from a seed derived from the single master
seed, so a config value pins the whole run.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import InvalidConfig
from .synthsim import RestJitter, ScriptedSubject
from .taskengine import TaskConfig
from .training import DEFAULT_MOTIONS, MetronomeSchedule, MotionClass, PlateauParams

__all__ = ["ImageSource", "SubjectSettings", "SessionConfig", "derive_seed"]

# spawn keys for per-role child seeds
ROLE_PHANTOM = 0
ROLE_TASK = 1
ROLE_SUBJECT = 2
ROLE_TRAINING = 3


def derive_seed(master: int, role: int) -> int:
    seq = np.random.SeedSequence(entropy=master, spawn_key=(role,))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class ImageSource:
    """Synthetic image-stream parameters (the hardware stand-in)."""

    width: int = 64
    height: int = 64
    noise_sigma: float = 0.02
    rest_jitter_mix: float = 0.0   # 0 disables training-time postural drift
    rest_jitter_toward: str | None = None
    decimation: int = 1            # ingest-time pixel subsampling factor

    def __post_init__(self):
        if self.decimation < 1:
            raise InvalidConfig("decimation must be >= 1")
        if not 0.0 <= self.rest_jitter_mix <= 1.0:
            raise InvalidConfig("rest_jitter_mix must lie in [0, 1]")

    def jitter(self) -> RestJitter | None:
        if self.rest_jitter_mix <= 0.0:
            return None
        return RestJitter(mix_max=self.rest_jitter_mix, toward=self.rest_jitter_toward)


@dataclass(frozen=True)
class SubjectSettings:
    reaction_delay_s: float = 0.2
    time_constant_s: float = 0.45
    tremor_sigma: float = 0.004
    max_rate_per_s: float = 0.6
    peak_min: float = 0.85   # per-repetition training end-state variation
    peak_max: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.peak_min <= self.peak_max <= 1.0:
            raise InvalidConfig("need 0 < peak_min <= peak_max <= 1")

    def scripted(self, seed: int) -> ScriptedSubject:
        return ScriptedSubject(reaction_delay_s=self.reaction_delay_s,
                               time_constant_s=self.time_constant_s,
                               tremor_sigma=self.tremor_sigma,
                               max_rate_per_s=self.max_rate_per_s, seed=seed)


@dataclass(frozen=True)
class SessionConfig:
    session_id: str = "session"
    seed: int = 0
    tick_rate_hz: float = 30.0
    motions: tuple[str, ...] = tuple(m.id for m in DEFAULT_MOTIONS)
    image: ImageSource = field(default_factory=ImageSource)
    metronome: MetronomeSchedule = field(default_factory=MetronomeSchedule)
    plateau: PlateauParams = field(default_factory=PlateauParams)
    task: TaskConfig = field(default_factory=TaskConfig)
    subject: SubjectSettings = field(default_factory=SubjectSettings)
    calibration_s: float = 6.0
    task_motion: str | None = None  # default: first configured motion

    def __post_init__(self):
        if self.tick_rate_hz <= 0:
            raise InvalidConfig("tick_rate_hz must be > 0")
        if not self.motions:
            raise InvalidConfig("at least one motion required")
        if len(set(self.motions)) != len(self.motions):
            raise InvalidConfig("duplicate motion ids")
        if "rest" in self.motions:
            raise InvalidConfig("rest is implicit, not a trainable motion")
        if self.calibration_s <= 0:
            raise InvalidConfig("calibration_s must be > 0")
        if self.task_motion is not None and self.task_motion not in self.motions:
            raise InvalidConfig(f"task_motion {self.task_motion!r} not in motions")

    def motion_classes(self) -> tuple[MotionClass, ...]:
        known = {m.id: m for m in DEFAULT_MOTIONS}
        return tuple(known.get(mid, MotionClass(mid, mid)) for mid in self.motions)

    def seeded_task(self) -> TaskConfig:
        return replace(self.task, rng_seed=derive_seed(self.seed, ROLE_TASK))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["motions"] = list(self.motions)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SessionConfig":
        d = dict(d)
        if "motions" in d:
            d["motions"] = tuple(d["motions"])
        for key, sub in (("image", ImageSource), ("metronome", MetronomeSchedule),
                         ("plateau", PlateauParams), ("task", TaskConfig),
                         ("subject", SubjectSettings)):
            if key in d and isinstance(d[key], dict):
                try:
                    d[key] = sub(**d[key])
                except TypeError as e:
                    raise InvalidConfig(f"bad {key} section: {e}") from e
        try:
            return cls(**d)
        except TypeError as e:
            raise InvalidConfig(str(e)) from e
