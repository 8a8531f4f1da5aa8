"""Engine exception hierarchy.

Every recoverable failure mode has its own class so callers (and the CLI /
wire service) can react per condition instead of parsing messages.
"""


class EngineError(Exception):
    """Base class for all engine-level failures."""


# frame-level
class DimensionMismatch(EngineError):
    """Two frames with different width/height were combined."""


class DegenerateFrame(EngineError):
    """A frame with zero pixel variance; correlation is undefined on it."""


class EmptyInput(EngineError):
    """An operation over a collection received nothing."""


class EmptyStream(EmptyInput):
    """A frame stream with no frames."""


# training
class PlateauNotFound(EngineError):
    """No flat hold segment inside a scheduled hold phase."""

    def __init__(self, repetition, phase, message=None):
        self.repetition = repetition
        self.phase = phase
        super().__init__(message or f"no plateau in repetition {repetition} ({phase} hold)")


class ShapeMismatch(EngineError):
    """Frame shape differs from what the database/stream was built with."""


# classification
class EmptyDatabase(EngineError):
    """No eligible training entries to classify against."""


class InsufficientEntries(EngineError):
    """A class has too few entries for leave-one-out validation."""

    def __init__(self, class_id, message=None):
        self.class_id = class_id
        super().__init__(message or f"class {class_id!r} needs >= 2 entries for LOOCV")


class ClassListMismatch(EngineError):
    """Confusion matrices over different class lists cannot be aggregated."""


class EmptyClass(EngineError):
    """The selected motion has no training entries."""


# proportional control
class DegenerateCalibration(EngineError):
    """Calibration cycle produced no usable dynamic range."""


class Uninitialized(EngineError):
    """Bound update requested before calibration."""


class BoundCollapse(EngineError):
    """Bound gap fell below the minimum; recalibration required."""


# task / config
class InvalidConfig(EngineError):
    """Configuration violates a structural constraint."""


class InsufficientData(EngineError):
    """Not enough acquired trials for the requested analysis."""


class EmptyRecords(EngineError):
    """Metrics requested over an empty trial list."""


# synthetic source
class UnknownMotion(EngineError):
    """Motion id not present in the phantom/template set."""


# storage
class StorageError(EngineError):
    """Base class for persistence failures."""


class BadMagic(StorageError):
    """File does not start with the expected magic bytes."""


class VersionUnsupported(StorageError):
    """File format version unknown to this reader."""


class TruncatedPayload(StorageError):
    """Payload shorter than the header promises."""

    def __init__(self, expected, actual, message=None):
        self.expected = expected
        self.actual = actual
        super().__init__(message or f"payload truncated at byte {actual} (expected {expected})")


class ShapeInconsistent(StorageError):
    """Header and sidecar disagree about frame geometry."""


class ManifestMissing(StorageError):
    """Database directory has no manifest."""


class ClassFileMissing(StorageError):
    """Manifest names a class whose sequence file is absent."""

    def __init__(self, class_id, message=None):
        self.class_id = class_id
        super().__init__(message or f"sequence file for class {class_id!r} missing")


# wire service
class ProtocolViolation(EngineError):
    """Client message out of order or malformed for the current state."""
