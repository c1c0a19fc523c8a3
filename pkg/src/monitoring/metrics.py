"""
Prometheus Metrics for RecNet Training

Counters, gauges and a histogram describing a training run. Each
TrainingMetrics instance owns its registry, so runs in one process (a
sweep, a test session) never collide on metric names. Nothing is served
over HTTP; the registry is written to a text file after every epoch.
"""

import logging
from pathlib import Path
from typing import Optional, Union

from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, generate_latest, write_to_textfile

logger = logging.getLogger(__name__)

EPOCH_DURATION_BUCKETS = [0.01, 0.05, 0.1, 0.5, 1, 5, 10, 30, 60, 300]


class TrainingMetrics:
    """Prometheus metrics for a training run, labelled by stage."""

    def __init__(self, registry: Optional[CollectorRegistry] = None):
        """
        Initialize training metrics.

        Args:
            registry: Registry to register into; a fresh one by default
        """
        self.registry = registry if registry is not None else CollectorRegistry()

        self.epochs_total = Counter(
            'recnet_epochs_total',
            'Total training epochs completed',
            ['stage'],
            registry=self.registry
        )

        self.batches_total = Counter(
            'recnet_batches_total',
            'Total optimizer steps taken',
            ['stage'],
            registry=self.registry
        )

        self.train_nll = Gauge(
            'recnet_train_nll',
            'Mean caption negative log-likelihood of the last epoch',
            ['stage'],
            registry=self.registry
        )

        self.reconstruction_loss = Gauge(
            'recnet_reconstruction_loss',
            'Mean reconstruction loss of the last epoch',
            ['stage'],
            registry=self.registry
        )

        self.validation_cider = Gauge(
            'recnet_validation_cider',
            'Validation CIDEr-D of the last epoch',
            ['stage'],
            registry=self.registry
        )

        self.best_validation_cider = Gauge(
            'recnet_best_validation_cider',
            'Best validation CIDEr-D so far',
            ['stage'],
            registry=self.registry
        )

        self.gradient_norm = Gauge(
            'recnet_gradient_norm',
            'Global gradient norm of the last optimizer step, before clipping',
            ['stage'],
            registry=self.registry
        )

        self.epoch_duration_seconds = Histogram(
            'recnet_epoch_duration_seconds',
            'Duration of training epochs in seconds',
            ['stage'],
            buckets=EPOCH_DURATION_BUCKETS,
            registry=self.registry
        )

        logger.debug("TrainingMetrics initialized")

    def record_batch(self, stage: str, gradient_norm: float) -> None:
        """Record one optimizer step."""
        self.batches_total.labels(stage=stage).inc()
        self.gradient_norm.labels(stage=stage).set(gradient_norm)

    def record_epoch(
        self,
        stage: str,
        nll: float,
        rec_loss: float,
        val_cider: float,
        best_cider: float,
        duration_seconds: float
    ) -> None:
        """
        Record a finished epoch.

        Args:
            stage: Training stage label ("stage1", "stage2")
            nll: Mean training NLL
            rec_loss: Mean reconstruction loss (0 without a reconstructor)
            val_cider: Validation CIDEr-D of this epoch
            best_cider: Best validation CIDEr-D so far
            duration_seconds: Wall time of the epoch
        """
        self.epochs_total.labels(stage=stage).inc()
        self.train_nll.labels(stage=stage).set(nll)
        self.reconstruction_loss.labels(stage=stage).set(rec_loss)
        self.validation_cider.labels(stage=stage).set(val_cider)
        self.best_validation_cider.labels(stage=stage).set(best_cider)
        self.epoch_duration_seconds.labels(stage=stage).observe(duration_seconds)

        logger.debug(
            f"Recorded epoch metrics for {stage}: nll={nll:.6f}, rec_loss={rec_loss:.6f}, "
            f"val_cider={val_cider:.4f}, duration={duration_seconds:.3f}s"
        )

    def value(self, name: str, stage: str) -> Optional[float]:
        """Current sample value of a metric for a stage, or None if unset."""
        return self.registry.get_sample_value(name, {"stage": stage})

    def write(self, path: Union[str, Path]) -> Path:
        """Write the registry in the Prometheus text format."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_to_textfile(str(path), self.registry)
        return path

    def render(self) -> str:
        return generate_latest(self.registry).decode("utf-8")
