"""
Unit tests for checkpoint files.
"""

import json
import struct

import numpy as np
import pytest

from src.model.params import DecoderParams, ReconstructorParams, Variant
from src.numeric.optim import AdaDeltaState
from src.training.checkpoint import (
    CHECKPOINT_MAGIC,
    CheckpointError,
    EpochRecord,
    ModelCheckpoint,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    parameter_digest,
    save_checkpoint,
)


def make_checkpoint(dims, vocabulary, variant=Variant.GLOBAL, seed=2):
    decoder = DecoderParams.init(dims, seed=seed)
    reconstructor = ReconstructorParams.init(variant, dims, seed=seed) if variant is not Variant.NONE else None
    named = dict(decoder.named())
    if reconstructor is not None:
        named.update(reconstructor.named())
    optimizer = AdaDeltaState.zeros_like(named)
    rng = np.random.default_rng(seed)
    for name in optimizer.square_grad:
        optimizer.square_grad[name][...] = rng.uniform(0.0, 1.0, size=optimizer.square_grad[name].shape)
    return ModelCheckpoint(
        decoder=decoder,
        reconstructor=reconstructor,
        optimizer=optimizer,
        dims=dims,
        vocabulary=vocabulary,
        epoch=3,
        stage="stage2" if reconstructor is not None else "stage1",
        history=[
            EpochRecord(epoch=1, nll=2.5, rec_loss=0.7, val_cider=0.1, decoder_digest="a"),
            EpochRecord(epoch=2, nll=2.0, rec_loss=0.6, val_cider=0.3, decoder_digest="b"),
            EpochRecord(epoch=3, nll=1.9, rec_loss=0.5, val_cider=0.2, decoder_digest="c"),
        ],
        best_epoch=2,
        best_cider=0.3,
        config={"seed": seed, "variant": variant.value}
    )


class TestCheckpointFiles:
    """Test writing and reading checkpoints."""

    @pytest.fixture
    def checkpoint(self, small_model_dims, small_bundle):
        return make_checkpoint(small_model_dims, small_bundle.vocabulary)

    @pytest.mark.parametrize("variant", [Variant.NONE, Variant.GLOBAL, Variant.LOCAL])
    def test_save_then_load_is_bit_exact(self, tmp_path, small_model_dims, small_bundle, variant):
        """Test that every array and all metadata survive a save and load."""
        checkpoint = make_checkpoint(small_model_dims, small_bundle.vocabulary, variant)

        loaded = load_checkpoint(save_checkpoint(checkpoint, tmp_path / "model.recn"))

        assert loaded.equals(checkpoint)
        assert loaded.variant is variant
        assert loaded.history == checkpoint.history
        assert loaded.vocabulary.words == checkpoint.vocabulary.words

    def test_header(self, checkpoint):
        """Test the magic, version and metadata length prefix."""
        data = encode_checkpoint(checkpoint)

        magic, version, meta_length = struct.unpack_from("<4sIQ", data)
        metadata = json.loads(data[16:16 + meta_length])

        assert magic == CHECKPOINT_MAGIC
        assert version == 1
        assert metadata["variant"] == "global"
        assert metadata["best_epoch"] == 2

    def test_encoding_is_deterministic(self, checkpoint):
        """Test that equal checkpoints encode to equal bytes."""
        assert encode_checkpoint(checkpoint) == encode_checkpoint(checkpoint)

    def test_truncated_file_is_corrupt(self, checkpoint):
        """Test that a cut-off payload is detected."""
        data = encode_checkpoint(checkpoint)

        with pytest.raises(CheckpointError, match="corrupt checkpoint"):
            decode_checkpoint(data[:-8])

    def test_short_file_is_corrupt(self):
        """Test that data shorter than the header is detected."""
        with pytest.raises(CheckpointError, match="shorter than the header"):
            decode_checkpoint(b"RECN")

    def test_flipped_payload_byte_fails_checksum(self, checkpoint):
        """Test that a damaged payload fails the checksum."""
        data = bytearray(encode_checkpoint(checkpoint))
        data[-1] ^= 0xFF

        with pytest.raises(CheckpointError, match="checksum mismatch"):
            decode_checkpoint(bytes(data))

    def test_bad_magic(self, checkpoint):
        """Test that other file types are rejected."""
        data = b"XXXX" + encode_checkpoint(checkpoint)[4:]

        with pytest.raises(CheckpointError, match="bad magic"):
            decode_checkpoint(data)

    def test_other_version_is_rejected(self, checkpoint):
        """Test that a different format version is reported as unsupported."""
        data = bytearray(encode_checkpoint(checkpoint))
        struct.pack_into("<I", data, 4, 2)

        with pytest.raises(CheckpointError, match="unsupported checkpoint version 2"):
            decode_checkpoint(bytes(data))

    def test_missing_file(self, tmp_path):
        """Test that a missing file raises CheckpointError."""
        with pytest.raises(CheckpointError, match="Cannot read checkpoint"):
            load_checkpoint(tmp_path / "absent.recn")

    def test_no_temporary_files_left(self, tmp_path, checkpoint):
        """Test that saving leaves only the checkpoint behind."""
        save_checkpoint(checkpoint, tmp_path / "best.recn")
        save_checkpoint(checkpoint, tmp_path / "best.recn")

        assert [p.name for p in tmp_path.iterdir()] == ["best.recn"]


class TestCheckpointEquality:
    """Test checkpoint comparison and parameter digests."""

    def test_changed_array_differs(self, small_model_dims, small_bundle):
        """Test that one changed weight breaks equality."""
        checkpoint = make_checkpoint(small_model_dims, small_bundle.vocabulary)
        other = make_checkpoint(small_model_dims, small_bundle.vocabulary)
        other.decoder.embedding[4, 0] += 1e-12

        assert not checkpoint.equals(other)

    def test_changed_history_differs(self, small_model_dims, small_bundle):
        """Test that metadata takes part in equality."""
        checkpoint = make_checkpoint(small_model_dims, small_bundle.vocabulary)
        other = make_checkpoint(small_model_dims, small_bundle.vocabulary)
        other.history[0] = EpochRecord(epoch=1, nll=2.5, rec_loss=0.7, val_cider=0.11)

        assert not checkpoint.equals(other)

    def test_digest_tracks_decoder_values(self, small_model_dims):
        """Test that the digest changes with any decoder value."""
        params = DecoderParams.init(small_model_dims, seed=1)
        same = DecoderParams.init(small_model_dims, seed=1)
        changed = DecoderParams.init(small_model_dims, seed=1)
        changed.out_bias[0] = 0.5

        assert parameter_digest(params) == parameter_digest(same)
        assert parameter_digest(params) != parameter_digest(changed)

    def test_epoch_record_round_trip(self):
        """Test that old records without a digest still load."""
        record = EpochRecord.from_dict({"epoch": 2, "nll": 1.0, "rec_loss": 0.0, "val_cider": 0.5})

        assert record.decoder_digest == ""
        assert EpochRecord.from_dict(record.to_dict()) == record
