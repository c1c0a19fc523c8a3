"""
Unit tests for training metrics.
"""

import pytest
from prometheus_client import CollectorRegistry

from src.monitoring.metrics import TrainingMetrics


class TestTrainingMetrics:
    """Test suite for TrainingMetrics."""

    @pytest.fixture
    def metrics(self):
        """Create a TrainingMetrics instance with its own registry."""
        return TrainingMetrics()

    def test_init_with_custom_registry(self):
        """Test registering into a given registry."""
        registry = CollectorRegistry()

        metrics = TrainingMetrics(registry=registry)

        assert metrics.registry is registry

    def test_instances_do_not_collide(self):
        """Test that two instances can coexist in one process."""
        first, second = TrainingMetrics(), TrainingMetrics()
        first.record_batch("stage1", 2.0)

        assert second.value("recnet_batches_total", "stage1") is None

    def test_record_batch(self, metrics):
        """Test step counting and the last gradient norm."""
        metrics.record_batch("stage1", 3.5)
        metrics.record_batch("stage1", 1.25)

        assert metrics.value("recnet_batches_total", "stage1") == 2.0
        assert metrics.value("recnet_gradient_norm", "stage1") == 1.25

    def test_record_epoch(self, metrics):
        """Test the per-epoch gauges and histogram."""
        metrics.record_epoch("stage2", nll=2.5, rec_loss=0.75, val_cider=0.4, best_cider=0.5, duration_seconds=0.2)

        assert metrics.value("recnet_epochs_total", "stage2") == 1.0
        assert metrics.value("recnet_train_nll", "stage2") == 2.5
        assert metrics.value("recnet_reconstruction_loss", "stage2") == 0.75
        assert metrics.value("recnet_validation_cider", "stage2") == 0.4
        assert metrics.value("recnet_best_validation_cider", "stage2") == 0.5
        assert metrics.value("recnet_epoch_duration_seconds_count", "stage2") == 1.0

    def test_stages_are_labelled_separately(self, metrics):
        """Test that stage labels keep separate series."""
        metrics.record_batch("stage1", 1.0)

        assert metrics.value("recnet_batches_total", "stage2") is None

    def test_write_text_file(self, metrics, tmp_path):
        """Test the Prometheus text export."""
        metrics.record_epoch("stage1", nll=1.0, rec_loss=0.0, val_cider=0.3, best_cider=0.3, duration_seconds=1.0)

        path = metrics.write(tmp_path / "run" / "metrics.prom")

        text = path.read_text()
        assert 'recnet_validation_cider{stage="stage1"} 0.3' in text
        assert text == metrics.render()
