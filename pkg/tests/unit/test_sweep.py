"""
Unit tests for the lambda sweep.
"""

from dataclasses import replace

import pytest

from src.model.params import Variant
from src.training.sweep import (
    SweepRow,
    format_sweep_csv,
    lambda_sweep,
    point_dir,
    run_sweep_point,
    write_sweep_csv,
)
from src.training.trainer import RecNetTrainer, TrainingError


def fake_row(checkpoint, bundle, config, lam, seed, run_dir=None):
    return SweepRow(lam=lam, seed=seed, variant=config.variant, bleu4=0.1, rougeL=0.2, cider=lam, nll=1.0, rec_loss=0.5)


@pytest.fixture
def sweep_config(fast_config):
    return replace(fast_config, variant=Variant.GLOBAL, lam=0.2, max_epochs=1)


@pytest.fixture
def stage1(sweep_config, small_model_dims, small_bundle):
    return RecNetTrainer(sweep_config, small_model_dims).initial_checkpoint(small_bundle.vocabulary)


class TestLambdaSweep:
    """Test sweeping reconstruction weights and seeds."""

    def test_rows_sorted_by_lambda_then_seed(self, stage1, small_bundle, sweep_config, mocker):
        """Test that every point runs and rows come back ordered."""
        run_point = mocker.patch("src.training.sweep.run_sweep_point", side_effect=fake_row)

        rows = lambda_sweep(stage1, small_bundle, sweep_config, lambdas=[0.4, 0.0, 0.1], seeds=[2, 1])

        assert run_point.call_count == 6
        assert [(row.lam, row.seed) for row in rows] == [
            (0.0, 1), (0.0, 2), (0.1, 1), (0.1, 2), (0.4, 1), (0.4, 2),
        ]

    @pytest.mark.parametrize("lambdas,seeds,message", [
        ([], [0], "at least one lambda"),
        ([0.1], [], "at least one seed"),
        ([0.1, -0.5], [0], "nonnegative"),
    ])
    def test_invalid_arguments(self, stage1, small_bundle, sweep_config, lambdas, seeds, message):
        """Test that empty or negative sweeps are rejected."""
        with pytest.raises(ValueError, match=message):
            lambda_sweep(stage1, small_bundle, sweep_config, lambdas=lambdas, seeds=seeds)

    def test_none_variant_is_rejected(self, stage1, small_bundle, fast_config):
        """Test that a sweep needs a reconstructor."""
        with pytest.raises(TrainingError, match="reconstructor variant"):
            lambda_sweep(stage1, small_bundle, fast_config, lambdas=[0.1], seeds=[0])

    def test_single_point(self, stage1, small_bundle, sweep_config, tmp_path):
        """Test one real stage-2 run scored on the test split."""
        row = run_sweep_point(stage1, small_bundle, sweep_config, lam=0.1, seed=3, run_dir=tmp_path)

        assert row.lam == 0.1
        assert row.seed == 3
        assert row.variant is Variant.GLOBAL
        assert row.rec_loss > 0.0
        assert 0.0 <= row.bleu4 <= 1.0
        assert (point_dir(tmp_path, 0.1, 3) / "stage2" / "best.recn").is_file()


class TestSweepCsv:
    """Test the sweep table."""

    def test_format(self):
        """Test the header and float formatting."""
        rows = [SweepRow(lam=0.1, seed=1, variant=Variant.LOCAL, bleu4=0.25, rougeL=0.5, cider=0.75, nll=1.5, rec_loss=0.125)]

        text = format_sweep_csv(rows)

        assert text.splitlines() == [
            "lambda,seed,variant,bleu4,rougeL,cider,nll,rec_loss",
            "0.1,1,local,0.25,0.5,0.75,1.5,0.125",
        ]

    def test_write(self, tmp_path, sweep_config):
        """Test that the written file holds the formatted table."""
        rows = [fake_row(None, None, sweep_config, 0.2, 0)]

        path = write_sweep_csv(rows, tmp_path / "out" / "sweep.csv")

        assert path.read_text() == format_sweep_csv(rows)

    def test_point_dir(self, tmp_path):
        """Test per-point directory names."""
        assert point_dir(tmp_path, 0.2, 5) == tmp_path / "lambda_0.2_seed_5"
        assert point_dir(None, 0.2, 5) is None