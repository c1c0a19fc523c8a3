"""
Data Pipeline for RecNet

This module turns captions and frame features into training batches:
- Tokenization and vocabulary construction
- Equally spaced frame sampling and the RECF feature file format
- Caption datasets, splits and dataset directories
- Synthetic, feature-recoverable captioning data
- Padded teacher-forcing batches

Usage:
    from src.data import SyntheticConfig, generate_synthetic_bundle, batch

    bundle = generate_synthetic_bundle(seed=7, config=SyntheticConfig(frame_budget=6))
    for caption_batch in batch(bundle.train, batch_size=8, shuffle_seed=7, epoch=1):
        ...
"""

from src.data.errors import DataError
from src.data.tokenizer import tokenize
from src.data.vocabulary import BOS, EOS, PAD, UNK, TokenSequence, Vocabulary, build_vocabulary
from src.data.features import FrameFeatureSequence, read_feature_file, sample_frames, write_feature_file
from src.data.dataset import CaptionDataset, DatasetBundle, Split, VideoEntry
from src.data.synthetic import SyntheticConfig, generate_synthetic_bundle, generate_synthetic_dataset
from src.data.batching import CaptionBatch, FrameBatch, batch

__all__ = [
    "DataError",
    "tokenize",
    "PAD",
    "BOS",
    "EOS",
    "UNK",
    "TokenSequence",
    "Vocabulary",
    "build_vocabulary",
    "FrameFeatureSequence",
    "sample_frames",
    "read_feature_file",
    "write_feature_file",
    "CaptionDataset",
    "DatasetBundle",
    "Split",
    "VideoEntry",
    "SyntheticConfig",
    "generate_synthetic_bundle",
    "generate_synthetic_dataset",
    "CaptionBatch",
    "FrameBatch",
    "batch",
]
