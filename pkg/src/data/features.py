"""
Frame Features for RecNet

Equally spaced frame sampling with zero padding up to the frame budget,
and the binary per-video feature file format:

    magic "RECF" | version u32 | m u32 | d u32 | m*d float32, all little-endian

Values are widened to float64 on load.
"""

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from src.data.errors import DataError
from src.utils.atomic_io import atomic_write_bytes

logger = logging.getLogger(__name__)

DEFAULT_FRAME_BUDGET = 28

FEATURE_MAGIC = b"RECF"
FEATURE_VERSION = 1
_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True, eq=False)
class FrameFeatureSequence:
    """
    A video's sampled features, padded to the frame budget.

    Attributes:
        features: (budget, d) matrix; rows at and beyond true_length are zero
        true_length: Number of real rows
        mask: (budget,) booleans, True on real rows
    """

    features: np.ndarray
    true_length: int
    mask: np.ndarray

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)

        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
            raise DataError(f"Frame features must be a non-empty matrix, got shape {features.shape}")
        if mask.shape != (features.shape[0],):
            raise DataError(f"Frame mask shape {mask.shape} does not match {features.shape[0]} rows")
        if not 1 <= self.true_length <= features.shape[0]:
            raise DataError(f"true_length {self.true_length} outside [1, {features.shape[0]}]")
        if mask.sum() != self.true_length or not mask[:self.true_length].all():
            raise DataError("Frame mask must mark exactly the first true_length rows")
        if np.any(features[self.true_length:] != 0.0):
            raise DataError("Padded frame rows must be zero")
        if not np.all(np.isfinite(features)):
            raise DataError("Frame features contain non-finite values")

        object.__setattr__(self, "features", features)
        object.__setattr__(self, "mask", mask)

    @property
    def budget(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def sample_indices(k: int, budget: int) -> np.ndarray:
    """round(j*(k-1)/(budget-1)) for j = 0..budget-1, halves rounded up."""
    if budget == 1:
        return np.zeros(1, dtype=np.int64)
    j = np.arange(budget, dtype=np.int64)
    return (2 * j * (k - 1) + (budget - 1)) // (2 * (budget - 1))


def sample_frames(raw: np.ndarray, budget: int = DEFAULT_FRAME_BUDGET) -> FrameFeatureSequence:
    """
    Select equally spaced frames, or keep all frames and zero-pad.

    Args:
        raw: (k, d) matrix of per-frame features
        budget: Number of frame slots

    Returns:
        FrameFeatureSequence with exactly `budget` rows

    Raises:
        DataError: If the video has no frames or no feature dimensions
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2:
        raise DataError(f"Raw features must be a (k, d) matrix, got shape {raw.shape}")
    if budget < 1:
        raise DataError(f"Frame budget must be at least 1, got {budget}")

    k, d = raw.shape
    if k == 0:
        raise DataError("Video has no frames")
    if d == 0:
        raise DataError("Frame features have zero dimensions")

    if k >= budget:
        selected = raw[sample_indices(k, budget)]
        return FrameFeatureSequence(features=selected.copy(), true_length=budget, mask=np.ones(budget, dtype=bool))

    features = np.zeros((budget, d))
    features[:k] = raw
    mask = np.zeros(budget, dtype=bool)
    mask[:k] = True
    return FrameFeatureSequence(features=features, true_length=k, mask=mask)


def write_feature_file(path: Union[str, Path], raw: np.ndarray) -> Path:
    """Write a (m, d) matrix as a RECF file (values stored as float32)."""
    raw = np.asarray(raw)
    if raw.ndim != 2:
        raise DataError(f"Feature matrix must be 2-D, got shape {raw.shape}")

    m, d = raw.shape
    payload = _HEADER.pack(FEATURE_MAGIC, FEATURE_VERSION, m, d) + raw.astype("<f4").tobytes(order="C")
    return atomic_write_bytes(path, payload)


def read_feature_file(path: Union[str, Path]) -> np.ndarray:
    """
    Read a RECF file.

    Returns:
        (m, d) float64 matrix

    Raises:
        DataError: On a bad magic, unknown version or wrong payload size
    """
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise DataError(f"Cannot read feature file {path}: {e}") from e

    if len(blob) < _HEADER.size:
        raise DataError(f"Feature file {path} is shorter than its header")

    magic, version, m, d = _HEADER.unpack_from(blob)
    if magic != FEATURE_MAGIC:
        raise DataError(f"Feature file {path} has bad magic {magic!r}")
    if version != FEATURE_VERSION:
        raise DataError(f"Feature file {path} has unsupported version {version}")

    expected = _HEADER.size + 4 * m * d
    if len(blob) != expected:
        raise DataError(f"Feature file {path} holds {len(blob)} bytes, expected {expected} for {m}x{d}")

    values = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size, count=m * d)
    return values.astype(np.float64).reshape(m, d)
