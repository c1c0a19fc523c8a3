"""
Lambda Sweep for RecNet

Independent stage-2 runs from one shared stage-1 checkpoint, one per
(lambda, seed) point, scored on the test split. Points share nothing but
the immutable checkpoint and dataset, so they may run in worker
processes; rows are sorted by (lambda, seed) before the CSV is written.
"""

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

from src.data.dataset import DatasetBundle
from src.evaluation.metrics import EvaluationError, score_corpus
from src.model.params import Variant
from src.training.checkpoint import ModelCheckpoint
from src.training.config import TrainingConfig
from src.training.trainer import RecNetTrainer, TrainingError
from src.utils.atomic_io import atomic_write_text
from src.utils.run_context import RunContext

logger = logging.getLogger(__name__)

SWEEP_HEADER = ("lambda", "seed", "variant", "bleu4", "rougeL", "cider", "nll", "rec_loss")
DEFAULT_LAMBDAS = (0.0, 0.1, 0.2, 0.4, 0.8)


@dataclass(frozen=True)
class SweepRow:
    lam: float
    seed: int
    variant: Variant
    bleu4: float
    rougeL: float
    cider: float
    nll: float
    rec_loss: float

    def to_csv_row(self) -> List[str]:
        return [
            repr(self.lam),
            str(self.seed),
            self.variant.value,
            repr(self.bleu4),
            repr(self.rougeL),
            repr(self.cider),
            repr(self.nll),
            repr(self.rec_loss),
        ]


def point_dir(run_dir: Optional[Union[str, Path]], lam: float, seed: int) -> Optional[Path]:
    if run_dir is None:
        return None
    return Path(run_dir) / f"lambda_{lam!r}_seed_{seed}"


def run_sweep_point(
    checkpoint: ModelCheckpoint,
    bundle: DatasetBundle,
    config: TrainingConfig,
    lam: float,
    seed: int,
    run_dir: Optional[Union[str, Path]] = None
) -> SweepRow:
    """
    Stage-2 training at one (lambda, seed) and its test-split scores.

    Raises:
        TrainingError: If training fails or the test split cannot be scored
    """
    point_config = replace(config, lam=lam, seed=seed)
    with RunContext(f"sweep-{lam!r}-{seed}"):
        trainer = RecNetTrainer(point_config, checkpoint.dims, point_dir(run_dir, lam, seed))
        result = trainer.train_stage2(checkpoint, bundle)
        try:
            report = score_corpus(trainer.split_corpus(result.decoder, bundle.test))
        except EvaluationError as e:
            raise TrainingError(f"Cannot score sweep point lambda={lam}, seed={seed}: {e}") from e

        best = next(record for record in result.history if record.epoch == result.best_epoch)
        logger.info(f"Sweep point lambda={lam} seed={seed}: CIDEr {report.cider:.4f}, BLEU-4 {report.bleu4:.4f}")

    return SweepRow(
        lam=lam,
        seed=seed,
        variant=point_config.variant,
        bleu4=report.bleu4,
        rougeL=report.rougeL,
        cider=report.cider,
        nll=best.nll,
        rec_loss=best.rec_loss
    )


def _run_point(args: Tuple) -> SweepRow:
    return run_sweep_point(*args)


def lambda_sweep(
    checkpoint: ModelCheckpoint,
    bundle: DatasetBundle,
    config: TrainingConfig,
    lambdas: Sequence[float],
    seeds: Sequence[int],
    workers: int = 1,
    run_dir: Optional[Union[str, Path]] = None
) -> List[SweepRow]:
    """
    Run every (lambda, seed) point.

    Args:
        checkpoint: Shared stage-1 checkpoint
        bundle: Dataset splits
        config: Base configuration; its variant selects the reconstructor
        lambdas: Reconstruction weights, at least one
        seeds: Seeds of the stage-2 runs, at least one
        workers: Worker processes; 1 runs the points in this process
        run_dir: Parent directory of the per-point run directories

    Returns:
        Rows sorted by (lambda, seed)

    Raises:
        ValueError: If lambdas or seeds are empty or a lambda is negative
        TrainingError: If the variant is none
    """
    lambdas = [float(lam) for lam in lambdas]
    seeds = [int(seed) for seed in seeds]
    if not lambdas:
        raise ValueError("A lambda sweep needs at least one lambda value")
    if not seeds:
        raise ValueError("A lambda sweep needs at least one seed")
    if any(lam < 0.0 for lam in lambdas):
        raise ValueError(f"lambda values must be nonnegative, got {lambdas}")
    if config.variant is Variant.NONE:
        raise TrainingError("A lambda sweep needs a reconstructor variant (global or local)")

    points = [(checkpoint, bundle, config, lam, seed, run_dir) for lam in lambdas for seed in seeds]
    logger.info(f"Sweeping {len(lambdas)} lambda value(s) x {len(seeds)} seed(s) with {workers} worker(s)")

    if workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(points))) as pool:
            rows = list(pool.map(_run_point, points))
    else:
        rows = [_run_point(point) for point in points]

    return sorted(rows, key=lambda row: (row.lam, row.seed))


def format_sweep_csv(rows: Sequence[SweepRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for row in rows:
        writer.writerow(row.to_csv_row())
    return buffer.getvalue()


def write_sweep_csv(rows: Sequence[SweepRow], path: Union[str, Path]) -> Path:
    path = atomic_write_text(path, format_sweep_csv(rows))
    logger.info(f"Wrote {len(rows)} sweep row(s) to {path}")
    return path
