"""
Batching for RecNet

Groups (video, caption) pairs into padded arrays. Decoder inputs are the
caption without its EOS, targets the caption without its BOS; both are
right-padded with PAD and the loss mask is False on the padding.
"""

import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from src.data.dataset import CaptionDataset, VideoEntry
from src.data.features import FrameFeatureSequence
from src.data.vocabulary import PAD, TokenSequence

logger = logging.getLogger(__name__)

# Seed stream tag separating shuffles from parameter initialization
SHUFFLE_STREAM = 3


@dataclass(frozen=True, eq=False)
class FrameBatch:
    """
    Frame features of several videos.

    Attributes:
        features: (B, budget, d)
        mask: (B, budget) booleans
        true_lengths: (B,)
    """

    features: np.ndarray
    mask: np.ndarray
    true_lengths: np.ndarray

    @property
    def size(self) -> int:
        return self.features.shape[0]

    @property
    def budget(self) -> int:
        return self.features.shape[1]

    @property
    def dim(self) -> int:
        return self.features.shape[2]

    @classmethod
    def from_sequences(cls, sequences: Sequence[FrameFeatureSequence]) -> "FrameBatch":
        return cls(
            features=np.stack([s.features for s in sequences]),
            mask=np.stack([s.mask for s in sequences]),
            true_lengths=np.array([s.true_length for s in sequences], dtype=np.int64)
        )


@dataclass(frozen=True, eq=False)
class CaptionBatch:
    """
    Padded teacher-forcing batch.

    Attributes:
        video_ids: Video of each row
        frames: Frame features of each row
        inputs: (B, L) previous-token ids, starting with BOS
        targets: (B, L) next-token ids, ending with EOS
        loss_mask: (B, L) True on real target positions
    """

    video_ids: Tuple[str, ...]
    frames: FrameBatch
    inputs: np.ndarray
    targets: np.ndarray
    loss_mask: np.ndarray

    @property
    def size(self) -> int:
        return len(self.video_ids)

    @property
    def lengths(self) -> np.ndarray:
        return self.loss_mask.sum(axis=1)


def collate(pairs: Sequence[Tuple[VideoEntry, TokenSequence]]) -> CaptionBatch:
    """Pad a list of (video, caption) pairs into one batch."""
    if not pairs:
        raise ValueError("Cannot collate an empty batch")

    steps = max(len(caption) - 1 for _, caption in pairs)
    inputs = np.full((len(pairs), steps), PAD, dtype=np.int64)
    targets = np.full((len(pairs), steps), PAD, dtype=np.int64)
    loss_mask = np.zeros((len(pairs), steps), dtype=bool)

    for row, (_, caption) in enumerate(pairs):
        ids = caption.ids
        length = len(ids) - 1
        inputs[row, :length] = ids[:-1]
        targets[row, :length] = ids[1:]
        loss_mask[row, :length] = True

    return CaptionBatch(
        video_ids=tuple(entry.video_id for entry, _ in pairs),
        frames=FrameBatch.from_sequences([entry.frames for entry, _ in pairs]),
        inputs=inputs,
        targets=targets,
        loss_mask=loss_mask
    )


def epoch_order(count: int, shuffle_seed: Optional[int], epoch: int = 0) -> np.ndarray:
    """Pair order of an epoch; depends only on (seed, epoch)."""
    if shuffle_seed is None:
        return np.arange(count)
    rng = np.random.default_rng([shuffle_seed, SHUFFLE_STREAM, epoch])
    return rng.permutation(count)


def batch(
    dataset: CaptionDataset,
    batch_size: int,
    shuffle_seed: Optional[int] = None,
    epoch: int = 0
) -> Iterator[CaptionBatch]:
    """
    Iterate over padded batches of every (video, caption) pair.

    Args:
        dataset: Split to iterate
        batch_size: Pairs per batch; the last batch may be smaller
        shuffle_seed: None keeps dataset order
        epoch: Epoch number mixed into the shuffle

    Yields:
        CaptionBatch
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be at least 1, got {batch_size}")

    pairs: List[Tuple[VideoEntry, TokenSequence]] = dataset.pairs()
    order = epoch_order(len(pairs), shuffle_seed, epoch)

    for start in range(0, len(pairs), batch_size):
        chunk = [pairs[i] for i in order[start:start + batch_size]]
        yield collate(chunk)
