"""
Training for RecNet

This module trains and persists models:
- Run configuration files and profiles
- Two-stage training with CIDEr-based early stopping
- Versioned, checksummed checkpoint files
- The lambda sweep

Usage:
    from src.training import RecNetTrainer, load_run_config

    training, model = load_run_config("configs/profiles/desk.conf")
    trainer = RecNetTrainer(training, model.dims(bundle.vocabulary.size, bundle.feature_dim))
    best = trainer.train_stage1(bundle)
"""

from src.training.config import ArchitectureConfig, ConfigError, TrainingConfig, load_run_config
from src.training.checkpoint import (
    CheckpointError,
    EpochRecord,
    ModelCheckpoint,
    load_checkpoint,
    save_checkpoint,
)
from src.training.trainer import RecNetTrainer, TrainingError, train_stage1, train_stage2
from src.training.sweep import SweepRow, lambda_sweep, write_sweep_csv

__all__ = [
    "ArchitectureConfig",
    "ConfigError",
    "TrainingConfig",
    "load_run_config",
    "CheckpointError",
    "EpochRecord",
    "ModelCheckpoint",
    "load_checkpoint",
    "save_checkpoint",
    "RecNetTrainer",
    "TrainingError",
    "train_stage1",
    "train_stage2",
    "SweepRow",
    "lambda_sweep",
    "write_sweep_csv",
]
