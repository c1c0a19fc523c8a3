"""
Unit tests for datasets, batching and the synthetic data generator.
"""

import numpy as np
import pytest

from src.data.batching import batch, collate, epoch_order
from src.data.dataset import CaptionDataset, Split, VideoEntry, build_bundle
from src.data.errors import DataError
from src.data.features import sample_frames
from src.data.synthetic import (
    SyntheticConfig,
    caption_for,
    generate_synthetic_bundle,
    generate_synthetic_corpus,
    generate_synthetic_dataset,
)
from src.data.vocabulary import BOS, EOS, PAD, build_vocabulary


@pytest.fixture
def raw_material():
    """Three videos with one or two captions each."""
    raw = {f"v{i}": np.full((4, 2), float(i + 1)) for i in range(3)}
    sentences = {
        "v0": ["a man runs", "a man is running fast"],
        "v1": ["a dog"],
        "v2": ["the cat sleeps"],
    }
    splits = {Split.TRAIN: ["v0", "v1"], Split.VALIDATION: ["v2"], Split.TEST: ["v2"]}
    return raw, sentences, splits


class TestCaptionDataset:
    """Test dataset construction and invariants."""

    def test_build_bundle_uses_training_vocabulary(self, raw_material):
        """Test that words seen only outside train map to UNK."""
        bundle = build_bundle(*raw_material, frame_budget=3)

        assert "cat" not in bundle.vocabulary
        assert bundle.validation["v2"].captions[0].words.count(3) == 3
        assert bundle.feature_dim == 2
        assert bundle.train.frame_budget == 3

    def test_pairs_cover_every_caption(self, raw_material):
        """Test that each caption is one training pair, in video order."""
        bundle = build_bundle(*raw_material, frame_budget=3)

        pairs = bundle.train.pairs()

        assert [entry.video_id for entry, _ in pairs] == ["v0", "v0", "v1"]

    def test_references_are_tokenized_sentences(self, raw_material):
        """Test that references come from the raw sentences."""
        bundle = build_bundle(*raw_material, frame_budget=3)

        assert bundle.validation.references() == {"v2": [["the", "cat", "sleeps"]]}

    def test_duplicate_video_ids_raise(self, raw_material):
        """Test that a split cannot list a video twice."""
        raw, sentences, splits = raw_material
        splits[Split.TRAIN] = ["v0", "v0"]

        with pytest.raises(DataError, match="Duplicate video id"):
            build_bundle(raw, sentences, splits, frame_budget=3)

    def test_missing_features_raise(self, raw_material):
        """Test that every listed video needs features."""
        raw, sentences, splits = raw_material
        del raw["v1"]

        with pytest.raises(DataError, match="No features"):
            build_bundle(raw, sentences, splits, frame_budget=3)

    def test_video_without_captions_raises(self):
        """Test that a video entry needs at least one caption."""
        with pytest.raises(DataError, match="no captions"):
            VideoEntry(video_id="v", frames=sample_frames(np.ones((2, 2)), 2), captions=())

    def test_unknown_video_lookup_raises(self, raw_material):
        """Test that indexing an absent id raises DataError."""
        bundle = build_bundle(*raw_material, frame_budget=3)

        with pytest.raises(DataError, match="No video"):
            bundle.train["missing"]

    def test_mixed_feature_dims_raise(self):
        """Test that a split must have one feature dimension."""
        vocabulary = build_vocabulary([["a"]])
        caption = vocabulary.encode(["a"])
        entries = (
            VideoEntry("x", sample_frames(np.ones((2, 2)), 2), (caption,)),
            VideoEntry("y", sample_frames(np.ones((2, 3)), 2), (caption,)),
        )

        with pytest.raises(DataError, match="Feature dimension varies"):
            CaptionDataset(split=Split.TRAIN, entries=entries, vocabulary=vocabulary)


class TestBatching:
    """Test padding and ordering of training batches."""

    def test_collate_pads_inputs_and_targets(self, raw_material):
        """Test teacher-forcing inputs, targets and the loss mask."""
        bundle = build_bundle(*raw_material, frame_budget=3)
        pairs = bundle.train.pairs()

        batch_ = collate([pairs[2], pairs[1]])

        short, long_ = pairs[2][1].ids, pairs[1][1].ids
        assert batch_.inputs.shape == (2, len(long_) - 1)
        assert batch_.inputs[0].tolist() == list(short[:-1]) + [PAD] * (len(long_) - len(short))
        assert batch_.targets[0, len(short) - 2] == EOS
        assert batch_.inputs[:, 0].tolist() == [BOS, BOS]
        assert batch_.loss_mask.sum(axis=1).tolist() == [len(short) - 1, len(long_) - 1]
        assert batch_.frames.features.shape == (2, 3, 2)
        assert batch_.video_ids == ("v1", "v0")

    def test_collate_empty_raises(self):
        """Test that a batch needs at least one pair."""
        with pytest.raises(ValueError, match="empty batch"):
            collate([])

    def test_batch_without_seed_keeps_order(self, raw_material):
        """Test that batches follow dataset order when unshuffled."""
        bundle = build_bundle(*raw_material, frame_budget=3)

        batches = list(batch(bundle.train, batch_size=2))

        assert [b.size for b in batches] == [2, 1]
        assert batches[0].video_ids == ("v0", "v0")

    def test_epoch_order_depends_only_on_seed_and_epoch(self):
        """Test that shuffles are reproducible and vary by epoch."""
        first = epoch_order(50, shuffle_seed=4, epoch=1)

        np.testing.assert_array_equal(first, epoch_order(50, shuffle_seed=4, epoch=1))
        assert sorted(first.tolist()) == list(range(50))
        assert not np.array_equal(first, epoch_order(50, shuffle_seed=4, epoch=2))

    def test_invalid_batch_size_raises(self, raw_material):
        """Test that batch_size must be positive."""
        bundle = build_bundle(*raw_material, frame_budget=3)

        with pytest.raises(ValueError, match="batch_size"):
            next(batch(bundle.train, batch_size=0))


class TestSyntheticData:
    """Test the synthetic corpus generator."""

    def test_same_seed_gives_identical_data(self):
        """Test that generation is a pure function of the seed."""
        first = generate_synthetic_corpus(7)
        second = generate_synthetic_corpus(7)

        assert first.sentences == second.sentences
        for video_id in first.raw_features:
            np.testing.assert_array_equal(first.raw_features[video_id], second.raw_features[video_id])

    def test_different_seeds_differ(self):
        """Test that another seed changes the features."""
        first = generate_synthetic_corpus(7)
        second = generate_synthetic_corpus(8)

        assert not np.array_equal(first.raw_features["video0000"], second.raw_features["video0000"])

    def test_default_shape(self):
        """Test the default corpus: 16 videos of 8x10 frames."""
        corpus = generate_synthetic_corpus(7)

        assert len(corpus.raw_features) == 16
        assert corpus.raw_features["video0015"].shape == (8, 10)
        assert corpus.splits[Split.VALIDATION] == corpus.splits[Split.TRAIN]

    def test_captions_name_the_concepts(self):
        """Test that each caption describes the video's concept triple."""
        corpus = generate_synthetic_corpus(3, SyntheticConfig(videos=5, captions_per_video=2))

        for video_id, triple in corpus.concepts.items():
            assert corpus.sentences[video_id] == [caption_for(*triple, 0), caption_for(*triple, 1)]

    def test_caption_template(self):
        """Test the caption grammar."""
        assert caption_for(0, 1, 2, template=1) == "the man is cooking in a street"

    def test_held_out_videos_form_separate_splits(self):
        """Test that held-out videos are disjoint from training."""
        corpus = generate_synthetic_corpus(1, SyntheticConfig(videos=4, held_out_videos=2))

        assert len(corpus.splits[Split.VALIDATION]) == 2
        assert not set(corpus.splits[Split.TEST]) & set(corpus.splits[Split.TRAIN])

    def test_features_are_float32_representable(self):
        """Test that features survive storage as float32 unchanged."""
        matrix = generate_synthetic_corpus(7).raw_features["video0000"]

        np.testing.assert_array_equal(matrix, matrix.astype(np.float32).astype(np.float64))

    @pytest.mark.parametrize("field,value", [("videos", 0), ("concepts", 9), ("frames", 2), ("noise", -1.0)])
    def test_invalid_config_raises(self, field, value):
        """Test that out-of-range settings are rejected."""
        with pytest.raises(DataError, match=field):
            SyntheticConfig(**{field: value})

    def test_bundle_and_dataset(self):
        """Test the bundle and training-split helpers."""
        config = SyntheticConfig(videos=6, frame_budget=5)

        bundle = generate_synthetic_bundle(2, config)
        dataset = generate_synthetic_dataset(2, config)

        assert bundle.train.video_ids == dataset.video_ids
        assert dataset.frame_budget == 5
        assert bundle.vocabulary.size > 4
