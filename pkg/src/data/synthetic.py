"""
Synthetic Video Captioning Data for RecNet

Each synthetic video shows three concepts in sequence: a subject, an
action and a place. Every concept owns a prototype feature vector; a
video's frames are the prototype of the concept on screen plus Gaussian
noise, and its captions name the three concepts through a small grammar.
Captions are therefore recoverable from the features.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.data.dataset import CaptionDataset, DatasetBundle, Split, build_bundle
from src.data.errors import DataError
from src.data.features import DEFAULT_FRAME_BUDGET

logger = logging.getLogger(__name__)

SUBJECTS = ("man", "woman", "dog", "cat", "child", "bird", "horse", "chef")
ACTIONS = ("running", "cooking", "singing", "dancing", "swimming", "jumping", "playing", "eating")
PLACES = ("kitchen", "park", "street", "field", "room", "garden", "pool", "stage")

# sentence -> determiner before subject, determiner before place
TEMPLATES = (
    ("a", "the"),
    ("the", "a"),
    ("a", "a"),
    ("the", "the"),
)


@dataclass(frozen=True)
class SyntheticConfig:
    """
    Shape of a synthetic dataset.

    Attributes:
        videos: Training videos
        concepts: Concepts per role (subject, action, place)
        dim: Feature dimension
        frames: Raw frames per video
        noise: Standard deviation of the per-frame Gaussian noise
        captions_per_video: Captions per video, from distinct templates
        held_out_videos: Extra videos for each of validation and test;
            0 reuses the training videos for both
        frame_budget: Frame slots after sampling
    """

    videos: int = 16
    concepts: int = 4
    dim: int = 10
    frames: int = 8
    noise: float = 0.1
    captions_per_video: int = 1
    held_out_videos: int = 0
    frame_budget: int = DEFAULT_FRAME_BUDGET

    def __post_init__(self):
        if self.videos < 1:
            raise DataError(f"videos must be at least 1, got {self.videos}")
        if not 1 <= self.concepts <= len(SUBJECTS):
            raise DataError(f"concepts must lie in [1, {len(SUBJECTS)}], got {self.concepts}")
        if self.dim < 1:
            raise DataError(f"dim must be at least 1, got {self.dim}")
        if self.frames < 3:
            raise DataError(f"frames must be at least 3 (one per role), got {self.frames}")
        if self.noise < 0.0:
            raise DataError(f"noise must be nonnegative, got {self.noise}")
        if not 1 <= self.captions_per_video <= len(TEMPLATES):
            raise DataError(f"captions_per_video must lie in [1, {len(TEMPLATES)}], got {self.captions_per_video}")
        if self.held_out_videos < 0:
            raise DataError(f"held_out_videos must be nonnegative, got {self.held_out_videos}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SyntheticConfig":
        return cls(**data)


@dataclass(frozen=True, eq=False)
class SyntheticCorpus:
    """Raw synthetic material before sampling and encoding."""

    raw_features: Dict[str, np.ndarray]
    sentences: Dict[str, List[str]]
    splits: Dict[Split, List[str]]
    concepts: Dict[str, Tuple[int, int, int]]


def caption_for(subject: int, action: int, place: int, template: int = 0) -> str:
    subject_det, place_det = TEMPLATES[template]
    return f"{subject_det} {SUBJECTS[subject]} is {ACTIONS[action]} in {place_det} {PLACES[place]}"


def generate_synthetic_corpus(seed: int, config: Optional[SyntheticConfig] = None) -> SyntheticCorpus:
    """
    Draw prototypes, concept triples and noisy frames from one seeded stream.

    Frames are rounded through float32 so the corpus matches what the
    feature files store.
    """
    config = config or SyntheticConfig()
    rng = np.random.default_rng(seed)

    prototypes = rng.standard_normal((3, config.concepts, config.dim))
    total = config.videos + 2 * config.held_out_videos
    triples = rng.integers(0, config.concepts, size=(total, 3))

    # Frames split into thirds: subject, then action, then place
    roles = (np.arange(config.frames) * 3) // config.frames

    raw_features: Dict[str, np.ndarray] = {}
    sentences: Dict[str, List[str]] = {}
    concepts: Dict[str, Tuple[int, int, int]] = {}
    width = max(4, len(str(total - 1)))

    for index in range(total):
        video_id = f"video{index:0{width}d}"
        triple = tuple(int(c) for c in triples[index])
        clean = np.stack([prototypes[role, triple[role]] for role in roles])
        noise = config.noise * rng.standard_normal((config.frames, config.dim))
        raw_features[video_id] = (clean + noise).astype(np.float32).astype(np.float64)
        sentences[video_id] = [caption_for(*triple, template) for template in range(config.captions_per_video)]
        concepts[video_id] = triple

    ids = list(raw_features)
    train_ids = ids[:config.videos]
    if config.held_out_videos:
        validation_ids = ids[config.videos:config.videos + config.held_out_videos]
        test_ids = ids[config.videos + config.held_out_videos:]
    else:
        validation_ids = list(train_ids)
        test_ids = list(train_ids)

    logger.info(
        f"Generated synthetic corpus: seed={seed}, {total} videos, {config.concepts} concepts per role, "
        f"dim={config.dim}, noise={config.noise}"
    )
    return SyntheticCorpus(
        raw_features=raw_features,
        sentences=sentences,
        splits={Split.TRAIN: train_ids, Split.VALIDATION: validation_ids, Split.TEST: test_ids},
        concepts=concepts
    )


def generate_synthetic_bundle(seed: int, config: Optional[SyntheticConfig] = None, min_count: int = 1) -> DatasetBundle:
    """All three splits of a synthetic dataset, vocabulary built from train."""
    config = config or SyntheticConfig()
    corpus = generate_synthetic_corpus(seed, config)
    return build_bundle(
        corpus.raw_features,
        corpus.sentences,
        corpus.splits,
        frame_budget=config.frame_budget,
        min_count=min_count
    )


def generate_synthetic_dataset(seed: int, config: Optional[SyntheticConfig] = None) -> CaptionDataset:
    """The training split of a synthetic dataset."""
    return generate_synthetic_bundle(seed, config).train
