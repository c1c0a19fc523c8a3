"""
Monitoring Module for RecNet

This module provides observability for training runs:
- Prometheus counters, gauges and histograms per training stage
- Text-file export of the registry (no HTTP server)

Usage:
    from src.monitoring import TrainingMetrics

    metrics = TrainingMetrics()
    metrics.record_epoch("stage1", nll=2.31, rec_loss=0.0, val_cider=0.42,
                         best_cider=0.42, duration_seconds=1.7)
    metrics.write("runs/demo/stage1/metrics.prom")
"""

from src.monitoring.metrics import TrainingMetrics

__all__ = [
    "TrainingMetrics",
]
