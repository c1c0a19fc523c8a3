"""
Integration tests: reproducible, resumable training runs.
"""

from dataclasses import replace

from src.model.params import Variant
from src.training.checkpoint import load_checkpoint
from src.training.trainer import BEST_CHECKPOINT, LAST_CHECKPOINT, STAGE1, STAGE2, TRAIN_LOG, RecNetTrainer


def digests(checkpoint):
    return [record.decoder_digest for record in checkpoint.history]


class TestDeterminism:
    """Test that equal seeds and configs give equal runs."""

    def test_repeated_runs_are_bitwise_identical(self, fast_config, small_model_dims, small_bundle, tmp_path):
        """Test identical training logs and checkpoints for two runs."""
        for name in ("a", "b"):
            RecNetTrainer(fast_config, small_model_dims, run_dir=tmp_path / name).train_stage1(small_bundle)

        first, second = tmp_path / "a" / STAGE1, tmp_path / "b" / STAGE1
        assert (first / TRAIN_LOG).read_bytes() == (second / TRAIN_LOG).read_bytes()
        assert load_checkpoint(first / BEST_CHECKPOINT).equals(load_checkpoint(second / BEST_CHECKPOINT))
        assert (first / LAST_CHECKPOINT).read_bytes() == (second / LAST_CHECKPOINT).read_bytes()

    def test_stage2_is_deterministic(self, fast_config, small_model_dims, small_bundle):
        """Test that two local-variant stage-2 runs replay exactly."""
        config = replace(fast_config, variant=Variant.LOCAL, lam=0.1, max_epochs=2)
        trainer = RecNetTrainer(config, small_model_dims)
        stage1 = trainer.train_stage1(small_bundle)

        first = trainer.train_stage2(stage1, small_bundle)
        second = RecNetTrainer(config, small_model_dims).train_stage2(stage1, small_bundle)

        assert first.history == second.history
        assert first.reconstructor.equals(second.reconstructor)


class TestResume:
    """Test continuing an interrupted phase."""

    def test_resumed_run_matches_straight_run(self, fast_config, small_model_dims, small_bundle, tmp_path):
        """Test that 3 + 3 resumed epochs replay 6 straight epochs bit for bit."""
        six = replace(fast_config, max_epochs=6)
        straight = RecNetTrainer(six, small_model_dims, run_dir=tmp_path / "straight").train_stage1(small_bundle)

        RecNetTrainer(fast_config, small_model_dims, run_dir=tmp_path / "resumed").train_stage1(small_bundle)
        resumed = RecNetTrainer(six, small_model_dims, run_dir=tmp_path / "resumed").train_stage1(
            small_bundle, resume=True
        )

        assert digests(resumed) == digests(straight)
        assert resumed.history == straight.history
        assert resumed.decoder.equals(straight.decoder)
        assert (tmp_path / "resumed" / STAGE1 / TRAIN_LOG).read_bytes() == \
            (tmp_path / "straight" / STAGE1 / TRAIN_LOG).read_bytes()

    def test_resume_without_checkpoint_starts_fresh(self, fast_config, small_model_dims, small_bundle, tmp_path):
        """Test that resuming an empty run directory trains from epoch 1."""
        result = RecNetTrainer(fast_config, small_model_dims, run_dir=tmp_path).train_stage1(small_bundle, resume=True)

        assert [record.epoch for record in result.history] == [1, 2, 3]

    def test_finished_phase_resumes_to_same_result(self, fast_config, small_model_dims, small_bundle, tmp_path):
        """Test that resuming a completed phase runs no further epochs."""
        trainer = RecNetTrainer(fast_config, small_model_dims, run_dir=tmp_path)
        first = trainer.train_stage1(small_bundle)

        again = trainer.train_stage1(small_bundle, resume=True)

        assert again.history == first.history
        assert again.decoder.equals(first.decoder)


class TestZeroLambda:
    """Test that a reconstructor weighted by zero leaves the decoder untouched."""

    def test_stage2_with_zero_lambda_equals_stage1_continuation(self, fast_config, small_model_dims, small_bundle):
        """Test identical decoder trajectories for lambda 0 and plain continued training."""
        stage1 = RecNetTrainer(fast_config, small_model_dims).train_stage1(small_bundle)
        ten = replace(fast_config, max_epochs=10)

        continued = RecNetTrainer(ten, small_model_dims).train_stage1(small_bundle, warm_start=stage1)
        joint = RecNetTrainer(replace(ten, variant=Variant.GLOBAL, lam=0.0), small_model_dims).train_stage2(
            stage1, small_bundle
        )

        assert joint.stage == STAGE2
        assert digests(joint) == digests(continued)
        assert [r.nll for r in joint.history] == [r.nll for r in continued.history]
        assert [r.val_cider for r in joint.history] == [r.val_cider for r in continued.history]
        assert all(record.rec_loss > 0.0 for record in joint.history)
