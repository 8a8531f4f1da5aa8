"""Image frames and the correlation similarity metric.

A frame is a 2-D grayscale intensity image with intensities in [0, 1],
plus the tick index and timestamp it was acquired at. Everything downstream
(training, classification, proportional control) compares frames with the
Pearson correlation coefficient of their flattened pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFrame, DimensionMismatch, EmptyInput

__all__ = [
    "Frame",
    "correlation",
    "distance_from_rest",
    "average_frames",
    "decimate",
    "as_storage_grid",
]


def as_storage_grid(pixels: np.ndarray) -> np.ndarray:
    """Round float64 pixels onto the float32 grid used by the file format.

    Frames produced by the pipeline (synthetic renders, hold averages) pass
    through this so that a save/load cycle reproduces the exact values the
    correlation metric saw in memory.
    """
    return np.asarray(pixels, dtype=np.float32).astype(np.float64)


@dataclass(frozen=True)
class Frame:
    """One grayscale image with acquisition metadata.

    pixels is a read-only (height, width) float64 array in [0, 1],
    row-major. index is the tick number within a stream; timestamp is
    seconds since session start.
    """

    width: int
    height: int
    pixels: np.ndarray = field(repr=False)
    index: int = 0
    timestamp: float = 0.0

    def __post_init__(self):
        arr = np.array(self.pixels, dtype=np.float64)
        if arr.shape != (self.height, self.width):
            raise DimensionMismatch(
                f"pixels shape {arr.shape} != (height={self.height}, width={self.width})"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("frame contains non-finite intensities")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("frame intensities outside [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def from_pixels(cls, pixels, index: int = 0, timestamp: float = 0.0) -> "Frame":
        arr = np.asarray(pixels, dtype=np.float64)
        return cls(width=arr.shape[1], height=arr.shape[0], pixels=arr,
                   index=index, timestamp=timestamp)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def flat(self) -> np.ndarray:
        return self.pixels.ravel()


def _check_shapes(a: Frame, b: Frame):
    if a.shape != b.shape:
        raise DimensionMismatch(f"frame shapes differ: {a.shape} vs {b.shape}")


def correlation(a: Frame, b: Frame) -> float:
    """Pearson correlation coefficient of two frames' flattened pixels.

    Symmetric in its arguments bit-for-bit, clamped to [-1, 1]. Raises
    DegenerateFrame on constant images, where the coefficient is undefined;
    callers in the live loop skip that tick instead of propagating a bogus
    similarity.
    """
    _check_shapes(a, b)
    da = a.flat() - a.flat().mean()
    db = b.flat() - b.flat().mean()
    va = float(np.dot(da, da))
    vb = float(np.dot(db, db))
    if va == 0.0 or vb == 0.0:
        raise DegenerateFrame("constant frame has no defined correlation")
    r = float(np.dot(da, db)) / (math.sqrt(va) * math.sqrt(vb))
    return min(1.0, max(-1.0, r))


def distance_from_rest(f: Frame, rest: Frame) -> float:
    """1 - correlation to the rest image, in [0, 2].

    This is the activity signal shown to the user during training: far-from-
    rest frames appear as peaks, frames similar to rest as valleys.
    """
    return 1.0 - correlation(f, rest)


def average_frames(frames) -> Frame:
    """Per-pixel arithmetic mean of same-shape frames.

    index/timestamp come from the middle input frame. The mean is computed
    in float64 and rounded to the storage grid so representative frames
    survive persistence bit-exactly.
    """
    frames = list(frames)
    if not frames:
        raise EmptyInput("average_frames needs at least one frame")
    first = frames[0]
    for f in frames[1:]:
        _check_shapes(first, f)
    stack = np.stack([f.pixels for f in frames])
    mean = as_storage_grid(stack.mean(axis=0))
    mid = frames[len(frames) // 2]
    return Frame(width=first.width, height=first.height, pixels=mean,
                 index=mid.index, timestamp=mid.timestamp)


def decimate(f: Frame, factor: int) -> Frame:
    """Keep every factor-th pixel along both axes (ingest-time reduction)."""
    if factor < 1:
        raise ValueError("decimation factor must be >= 1")
    if factor == 1:
        return f
    sub = f.pixels[::factor, ::factor]
    return Frame(width=sub.shape[1], height=sub.shape[0], pixels=sub,
                 index=f.index, timestamp=f.timestamp)
