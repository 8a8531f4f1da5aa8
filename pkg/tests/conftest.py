"""Shared fixtures: a small phantom and a fully trained database."""

import numpy as np
import pytest

from sonoctl.synthsim import (
    Phantom,
    PhantomConfig,
    RestJitter,
    ScriptedSubject,
    draw_rep_peaks,
    draw_rest_mixes,
    metronome_setpoints,
    record_training_session,
    scripted_track,
)
from sonoctl.training import (
    DEFAULT_MOTIONS,
    REST,
    MetronomeSchedule,
    PlateauParams,
    build_database,
)

TICK_RATE = 30.0


def make_phantom(seed=0, noise_sigma=0.02, jitter=None, motions=DEFAULT_MOTIONS):
    cfg = PhantomConfig(motions=motions + (REST,), width=48, height=48,
                        noise_sigma=noise_sigma, rest_jitter=jitter, seed=seed)
    return Phantom(cfg)


def train_full_database(phantom, schedule=None, params=None, subject=None,
                        seed=123, vary_peaks=True):
    """Run the scripted training program over every motion of the phantom."""
    schedule = schedule or MetronomeSchedule(beat_period=1.0, beats_per_phase=3, repetitions=5)
    params = params or PlateauParams()
    subject = subject or ScriptedSubject(reaction_delay_s=0.2, time_constant_s=0.3,
                                         tremor_sigma=0.004, seed=seed)
    rng = np.random.default_rng(seed)
    db = None
    tick = 0
    motions = [m for m in phantom.config.motions if not m.is_rest]
    for m in motions:
        peaks = draw_rep_peaks(rng, schedule.repetitions) if vary_peaks else None
        mixes = draw_rest_mixes(rng, schedule.repetitions, phantom.rest_jitter)
        setpoints = metronome_setpoints(schedule, TICK_RATE, peaks)
        activation = scripted_track(subject, setpoints, TICK_RATE)
        stream = record_training_session(phantom, m.id, schedule, TICK_RATE,
                                         activation, mixes, start_tick=tick)
        db = build_database(stream, schedule, m, existing=db, params=params)
        tick += len(stream)
    return db


@pytest.fixture(scope="session")
def phantom():
    return make_phantom(seed=0)


@pytest.fixture(scope="session")
def jitter_phantom():
    return make_phantom(seed=0, jitter=RestJitter(mix_max=0.95))


@pytest.fixture(scope="session")
def trained_db(phantom):
    return train_full_database(phantom)


@pytest.fixture(scope="session")
def jittered_db(jitter_phantom):
    return train_full_database(jitter_phantom)
