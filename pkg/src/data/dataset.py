"""
Caption Datasets for RecNet

A split is a list of videos, each with its sampled frame features and one
or more encoded captions. A bundle groups the train, validation and test
splits with the vocabulary they were encoded with.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.data.errors import DataError
from src.data.features import FrameFeatureSequence, sample_frames
from src.data.tokenizer import MAX_CAPTION_TOKENS, tokenize
from src.data.vocabulary import TokenSequence, Vocabulary, build_vocabulary

logger = logging.getLogger(__name__)


class Split(Enum):
    """Dataset split labels."""
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


@dataclass(frozen=True, eq=False)
class VideoEntry:
    """
    One video with its captions.

    Attributes:
        video_id: Identifier unique within a split
        frames: Sampled and padded features
        captions: Encoded captions, at least one
        sentences: The raw caption strings the captions were encoded from
    """

    video_id: str
    frames: FrameFeatureSequence
    captions: Tuple[TokenSequence, ...]
    sentences: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "captions", tuple(self.captions))
        object.__setattr__(self, "sentences", tuple(self.sentences))
        if not self.captions:
            raise DataError(f"Video {self.video_id} has no captions")
        if self.sentences and len(self.sentences) != len(self.captions):
            raise DataError(f"Video {self.video_id}: {len(self.sentences)} sentences for {len(self.captions)} captions")


@dataclass(frozen=True, eq=False)
class CaptionDataset:
    """
    The videos of one split.

    Attributes:
        split: Split label
        entries: Videos in a fixed order
        vocabulary: Vocabulary the captions are encoded with
    """

    split: Split
    entries: Tuple[VideoEntry, ...]
    vocabulary: Vocabulary
    _index: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)

        index: Dict[str, int] = {}
        for position, entry in enumerate(entries):
            if entry.video_id in index:
                raise DataError(f"Duplicate video id {entry.video_id!r} in {self.split.value} split")
            index[entry.video_id] = position

            for caption in entry.captions:
                if max(caption.ids) >= self.vocabulary.size:
                    raise DataError(f"Video {entry.video_id}: caption id outside vocabulary of size {self.vocabulary.size}")

        dims = {entry.frames.dim for entry in entries}
        budgets = {entry.frames.budget for entry in entries}
        if len(dims) > 1:
            raise DataError(f"Feature dimension varies across the {self.split.value} split: {sorted(dims)}")
        if len(budgets) > 1:
            raise DataError(f"Frame budget varies across the {self.split.value} split: {sorted(budgets)}")

        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[VideoEntry]:
        return iter(self.entries)

    def __getitem__(self, video_id: str) -> VideoEntry:
        try:
            return self.entries[self._index[video_id]]
        except KeyError as e:
            raise DataError(f"No video {video_id!r} in {self.split.value} split") from e

    @property
    def video_ids(self) -> List[str]:
        return [entry.video_id for entry in self.entries]

    @property
    def feature_dim(self) -> Optional[int]:
        return self.entries[0].frames.dim if self.entries else None

    @property
    def frame_budget(self) -> Optional[int]:
        return self.entries[0].frames.budget if self.entries else None

    def pairs(self) -> List[Tuple[VideoEntry, TokenSequence]]:
        """Every (video, caption) training pair, videos in order then captions in order."""
        return [(entry, caption) for entry in self.entries for caption in entry.captions]

    def references(self) -> Dict[str, List[List[str]]]:
        """Tokenized reference captions per video, for scoring."""
        refs = {}
        for entry in self.entries:
            if entry.sentences:
                refs[entry.video_id] = [tokenize(sentence) for sentence in entry.sentences]
            else:
                refs[entry.video_id] = [self.vocabulary.decode(caption) for caption in entry.captions]
        return refs

    def with_split(self, split: Split) -> "CaptionDataset":
        return CaptionDataset(split=split, entries=self.entries, vocabulary=self.vocabulary)


@dataclass(frozen=True, eq=False)
class DatasetBundle:
    """Train, validation and test splits sharing one vocabulary."""

    train: CaptionDataset
    validation: CaptionDataset
    test: CaptionDataset

    def __post_init__(self):
        for dataset in (self.validation, self.test):
            if dataset.vocabulary != self.train.vocabulary:
                raise DataError(f"{dataset.split.value} split uses a different vocabulary than train")

        dims = {d.feature_dim for d in (self.train, self.validation, self.test) if len(d)}
        if len(dims) > 1:
            raise DataError(f"Feature dimension differs between splits: {sorted(dims)}")

    @property
    def vocabulary(self) -> Vocabulary:
        return self.train.vocabulary

    @property
    def feature_dim(self) -> Optional[int]:
        return self.train.feature_dim


def encode_videos(
    raw_features: Mapping[str, np.ndarray],
    sentences: Mapping[str, Sequence[str]],
    video_ids: Sequence[str],
    vocabulary: Vocabulary,
    split: Split,
    frame_budget: int,
    max_caption_len: int = MAX_CAPTION_TOKENS
) -> CaptionDataset:
    """
    Sample frames and encode captions for the given videos.

    Raises:
        DataError: If a video lacks features or captions
    """
    entries = []
    for video_id in video_ids:
        if video_id not in raw_features:
            raise DataError(f"No features for video {video_id!r}")
        if not sentences.get(video_id):
            raise DataError(f"No captions for video {video_id!r}")

        texts = tuple(sentences[video_id])
        captions = tuple(vocabulary.encode(tokenize(text, max_caption_len)) for text in texts)
        entries.append(VideoEntry(
            video_id=video_id,
            frames=sample_frames(raw_features[video_id], frame_budget),
            captions=captions,
            sentences=texts
        ))

    return CaptionDataset(split=split, entries=tuple(entries), vocabulary=vocabulary)


def build_bundle(
    raw_features: Mapping[str, np.ndarray],
    sentences: Mapping[str, Sequence[str]],
    splits: Mapping[Split, Sequence[str]],
    frame_budget: int,
    vocabulary: Optional[Vocabulary] = None,
    min_count: int = 1,
    max_caption_len: int = MAX_CAPTION_TOKENS
) -> DatasetBundle:
    """
    Build the three splits; without a vocabulary one is built from the
    training captions.
    """
    if vocabulary is None:
        corpus = [
            tokenize(text, max_caption_len)
            for video_id in splits[Split.TRAIN]
            for text in sentences.get(video_id, ())
        ]
        vocabulary = build_vocabulary(corpus, min_count=min_count)

    datasets = {
        split: encode_videos(raw_features, sentences, splits.get(split, ()), vocabulary, split, frame_budget, max_caption_len)
        for split in Split
    }

    bundle = DatasetBundle(train=datasets[Split.TRAIN], validation=datasets[Split.VALIDATION], test=datasets[Split.TEST])
    logger.info(
        f"Dataset: {len(bundle.train)} train, {len(bundle.validation)} validation, "
        f"{len(bundle.test)} test videos; vocabulary {vocabulary.size}"
    )
    return bundle
