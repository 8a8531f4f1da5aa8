import pytest

from sonoctl.config import (
    ROLE_PHANTOM,
    ROLE_TASK,
    SessionConfig,
    SubjectSettings,
    derive_seed,
)
from sonoctl.errors import InvalidConfig


class TestRoundTrip:
    def test_dict_round_trip(self):
        cfg = SessionConfig(seed=9, motions=("PG", "Tr"), task_motion="Tr")
        again = SessionConfig.from_dict(cfg.to_dict())
        assert again == cfg

    def test_partial_dict_uses_defaults(self):
        cfg = SessionConfig.from_dict({"seed": 4})
        assert cfg.seed == 4
        assert cfg.tick_rate_hz == 30.0
        assert cfg.task.n_positions == 11

    def test_bad_section_reported(self):
        with pytest.raises(InvalidConfig):
            SessionConfig.from_dict({"task": {"n_positions": 11, "bogus": 1}})


class TestValidation:
    def test_rejects_rest_motion(self):
        with pytest.raises(InvalidConfig):
            SessionConfig(motions=("PG", "rest"))

    def test_rejects_duplicate_motions(self):
        with pytest.raises(InvalidConfig):
            SessionConfig(motions=("PG", "PG"))

    def test_rejects_unknown_task_motion(self):
        with pytest.raises(InvalidConfig):
            SessionConfig(motions=("PG",), task_motion="WP")

    def test_rejects_bad_tick_rate(self):
        with pytest.raises(InvalidConfig):
            SessionConfig(tick_rate_hz=0.0)

    def test_subject_peaks_validated(self):
        with pytest.raises(InvalidConfig):
            SubjectSettings(peak_min=0.9, peak_max=0.8)


class TestSeedDerivation:
    def test_deterministic(self):
        assert derive_seed(42, ROLE_TASK) == derive_seed(42, ROLE_TASK)

    def test_roles_separate(self):
        assert derive_seed(42, ROLE_TASK) != derive_seed(42, ROLE_PHANTOM)

    def test_masters_separate(self):
        assert derive_seed(1, ROLE_TASK) != derive_seed(2, ROLE_TASK)

    def test_seeded_task_pins_schedule_seed(self):
        cfg = SessionConfig(seed=5)
        assert cfg.seeded_task().rng_seed == derive_seed(5, ROLE_TASK)
