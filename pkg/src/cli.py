"""
RecNet Command-Line Interface

Sub-commands:
    synth      write a synthetic dataset directory
    train      run stage 1, stage 2 or both from a config file
    caption    caption feature files with a checkpoint
    eval       score candidate captions against references
    sweep      stage-2 runs over lambda values and seeds
    gradcheck  compare analytic and finite-difference gradients

Usage:
    recnet synth --seed 7 --out data/synth
    recnet train --config run.conf --stage both
    recnet train --config run.conf --stage 1 --resume
    recnet caption --checkpoint runs/demo/stage2/best.recn --features data/synth/features --beam 5
    recnet eval --candidates captions.jsonl --references data/synth/captions.jsonl
    recnet sweep --config run.conf --lambdas 0 0.1 0.2 --seeds 1 2 3
    recnet gradcheck --variant local --seed 0

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 check failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence, TextIO, Tuple

from src.data.errors import DataError
from src.data.features import sample_frames
from src.data.io import (
    FEATURES_DIR,
    candidate_records,
    load_dataset_dir,
    read_feature_dir,
    write_candidates_file,
    write_dataset_dir,
)
from src.data.synthetic import SyntheticConfig, generate_synthetic_corpus
from src.evaluation.metrics import EvaluationError, evaluate
from src.model.params import Variant
from src.model.recnet import GRADCHECK_TOLERANCE, gradcheck_recnet
from src.numeric.tensor import DimensionError
from src.training.checkpoint import CheckpointError, ModelCheckpoint, load_checkpoint
from src.training.config import ArchitectureConfig, ConfigError, TrainingConfig, load_run_config
from src.training.sweep import format_sweep_csv, lambda_sweep, write_sweep_csv
from src.training.trainer import BEST_CHECKPOINT, STAGE1, RecNetTrainer, TrainingError, decode_captions
from src.utils.atomic_io import atomic_write_json
from src.utils.logging_config import configure_logging
from src.utils.run_context import RunContext

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CHECK_FAILED = 3

SWEEP_FILE = "sweep.csv"


class UsageError(Exception):
    """Raised for invalid command-line usage"""
    pass


class _ArgumentParser(argparse.ArgumentParser):
    """ArgumentParser reporting usage errors as exceptions instead of exiting with status 2."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _nonnegative_float(text: str) -> float:
    value = float(text)
    if value < 0.0:
        raise argparse.ArgumentTypeError(f"must be nonnegative, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="recnet",
        description="Video captioning with an encoder-decoder-reconstructor",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Verbose logging")
    parser.add_argument("--json-logs", action="store_true", help="Structured JSON log records on stderr")

    subparsers = parser.add_subparsers(dest="command", help="Command to execute")

    synth_parser = subparsers.add_parser("synth", help="Write a synthetic dataset")
    synth_parser.add_argument("--seed", type=int, default=7, help="Generator seed")
    synth_parser.add_argument("--out", required=True, help="Output directory")
    synth_parser.add_argument("--videos", type=_positive_int, default=16, help="Training videos")
    synth_parser.add_argument("--concepts", type=_positive_int, default=4, help="Concepts per role")
    synth_parser.add_argument("--dim", type=_positive_int, default=10, help="Feature dimension")
    synth_parser.add_argument("--frames", type=_positive_int, default=8, help="Raw frames per video")
    synth_parser.add_argument("--noise", type=_nonnegative_float, default=0.1, help="Frame noise standard deviation")
    synth_parser.add_argument("--captions-per-video", type=_positive_int, default=1, help="Captions per video")
    synth_parser.add_argument("--held-out", type=int, default=0, help="Extra videos for validation and for test")

    train_parser = subparsers.add_parser("train", help="Train a model")
    train_parser.add_argument("--config", required=True, help="Run config file")
    train_parser.add_argument("--stage", choices=["1", "2", "both"], default="both", help="Stage(s) to run")
    train_parser.add_argument("--resume", action="store_true", help="Continue interrupted phases")

    caption_parser = subparsers.add_parser("caption", help="Caption videos")
    caption_parser.add_argument("--checkpoint", required=True, help="Checkpoint file")
    caption_parser.add_argument("--features", required=True, help="Directory of .recf files, or a dataset directory")
    caption_parser.add_argument("--beam", type=_positive_int, default=5, help="Beam width (1 = greedy)")
    caption_parser.add_argument("--out", help="Captions file; stdout when omitted")

    eval_parser = subparsers.add_parser("eval", help="Score captions")
    eval_parser.add_argument("--candidates", required=True, help="Candidate captions (JSON lines)")
    eval_parser.add_argument("--references", required=True, help="Reference captions (JSON lines)")
    eval_parser.add_argument("--out", help="Also write the report to this file")

    sweep_parser = subparsers.add_parser("sweep", help="Sweep the reconstruction weight")
    sweep_parser.add_argument("--config", required=True, help="Run config file")
    sweep_parser.add_argument("--lambdas", type=_nonnegative_float, nargs="+", required=True, help="Lambda values")
    sweep_parser.add_argument("--seeds", type=int, nargs="+", default=[0], help="Stage-2 seeds")
    sweep_parser.add_argument("--out", help="CSV path; <run_dir>/sweep.csv when omitted")

    gradcheck_parser = subparsers.add_parser("gradcheck", help="Check gradients by finite differences")
    gradcheck_parser.add_argument("--variant", choices=[v.value for v in Variant], default="none")
    gradcheck_parser.add_argument("--seed", type=int, default=0)

    return parser


# Commands

def cmd_synth(args: argparse.Namespace, out: TextIO) -> int:
    config = SyntheticConfig(
        videos=args.videos,
        concepts=args.concepts,
        dim=args.dim,
        frames=args.frames,
        noise=args.noise,
        captions_per_video=args.captions_per_video,
        held_out_videos=args.held_out
    )
    corpus = generate_synthetic_corpus(args.seed, config)
    metadata = {"seed": args.seed, "synthetic": config.to_dict()}
    manifest = write_dataset_dir(args.out, corpus.raw_features, corpus.sentences, corpus.splits, metadata=metadata)
    print(str(manifest), file=out)
    return EXIT_OK


def _load_config(path: str) -> Tuple[TrainingConfig, ArchitectureConfig]:
    training, model = load_run_config(path)
    if training.data_dir is None:
        raise ConfigError(f"{path}: data_dir is not set")
    if training.run_dir is None:
        raise ConfigError(f"{path}: run_dir is not set")
    return training, model


def _load_bundle(training: TrainingConfig, model: ArchitectureConfig, checkpoint: Optional[ModelCheckpoint] = None):
    return load_dataset_dir(
        training.data_dir,
        frame_budget=model.frame_budget,
        min_count=training.min_count,
        max_caption_len=training.max_caption_len,
        vocabulary=checkpoint.vocabulary if checkpoint is not None else None,
        expected_dim=model.feature_dim
    )


def _stage1_checkpoint_path(training: TrainingConfig) -> Path:
    return Path(training.run_dir) / STAGE1 / BEST_CHECKPOINT


def cmd_train(args: argparse.Namespace, out: TextIO) -> int:
    training, model = _load_config(args.config)
    run_dir = Path(training.run_dir)

    stage1 = None
    if args.stage == "2":
        stage1 = load_checkpoint(_stage1_checkpoint_path(training))
    bundle = _load_bundle(training, model, stage1)
    trainer = RecNetTrainer(training, model.dims(bundle.vocabulary.size, bundle.feature_dim), run_dir)

    if args.stage in ("1", "both"):
        stage1 = trainer.train_stage1(bundle, resume=args.resume)
        print(str(run_dir / STAGE1 / BEST_CHECKPOINT), file=out)

    if args.stage in ("2", "both"):
        if training.variant is Variant.NONE:
            raise ConfigError("Stage 2 needs variant global or local")
        result = trainer.train_stage2(stage1, bundle, resume=args.resume)
        print(str(run_dir / result.stage / BEST_CHECKPOINT), file=out)

    return EXIT_OK


def _feature_directory(path: Path) -> Path:
    nested = path / FEATURES_DIR
    return nested if nested.is_dir() else path


def cmd_caption(args: argparse.Namespace, out: TextIO) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    raw = read_feature_dir(_feature_directory(Path(args.features)))

    dims = checkpoint.dims
    frames = {}
    for video_id, matrix in raw.items():
        if matrix.shape[1] != dims.feature_dim:
            raise DataError(
                f"Video {video_id} has feature dimension {matrix.shape[1]}, checkpoint expects {dims.feature_dim}"
            )
        frames[video_id] = sample_frames(matrix, dims.frame_budget)

    config = TrainingConfig.from_dict({**checkpoint.config, "variant": "none", "lam": None})
    words = decode_captions(
        checkpoint.decoder,
        frames,
        checkpoint.vocabulary,
        args.beam,
        config.max_caption_len,
        config.length_normalize,
        dims.context_mode
    )
    captions = {video_id: " ".join(tokens) for video_id, tokens in words.items()}

    if args.out:
        write_candidates_file(args.out, captions)
        logger.info(f"Wrote {len(captions)} captions to {args.out}")
    else:
        for record in candidate_records(captions):
            print(json.dumps(record, ensure_ascii=False), file=out)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, out: TextIO) -> int:
    report = evaluate(args.candidates, args.references)
    if args.out:
        atomic_write_json(args.out, report.to_dict())
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True), file=out)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, out: TextIO) -> int:
    training, model = _load_config(args.config)
    run_dir = Path(training.run_dir)

    stage1_path = _stage1_checkpoint_path(training)
    if stage1_path.is_file():
        stage1 = load_checkpoint(stage1_path)
        bundle = _load_bundle(training, model, stage1)
        logger.info(f"Sweeping from stage-1 checkpoint {stage1_path}")
    else:
        bundle = _load_bundle(training, model)
        trainer = RecNetTrainer(training, model.dims(bundle.vocabulary.size, bundle.feature_dim), run_dir)
        logger.info(f"No {stage1_path}; training stage 1 first")
        stage1 = trainer.train_stage1(bundle)

    rows = lambda_sweep(
        stage1,
        bundle,
        training,
        lambdas=args.lambdas,
        seeds=args.seeds,
        workers=training.workers,
        run_dir=run_dir / "sweep"
    )
    write_sweep_csv(rows, args.out or run_dir / SWEEP_FILE)
    out.write(format_sweep_csv(rows))
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace, out: TextIO) -> int:
    variant = Variant(args.variant)
    errors = gradcheck_recnet(variant, seed=args.seed)
    worst = max(errors.values())
    passed = worst < GRADCHECK_TOLERANCE

    result = {
        "variant": variant.value,
        "seed": args.seed,
        "max_relative_error": worst,
        "tolerance": GRADCHECK_TOLERANCE,
        "passed": passed,
        "errors": dict(sorted(errors.items())),
    }
    print(json.dumps(result, indent=2), file=out)
    if not passed:
        logger.error(f"Gradient check failed: max relative error {worst:.3e} >= {GRADCHECK_TOLERANCE}")
        return EXIT_CHECK_FAILED
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "caption": cmd_caption,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "gradcheck": cmd_gradcheck,
}


def main(argv: Optional[Sequence[str]] = None, out: Optional[TextIO] = None) -> int:
    """
    CLI entry point.

    Args:
        argv: Arguments without the program name; sys.argv[1:] by default
        out: Stream for command results; stdout by default

    Returns:
        Process exit code
    """
    out = out if out is not None else sys.stdout
    parser = build_parser()

    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE

    configure_logging(verbose=args.verbose, json_logs=args.json_logs)

    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_USAGE

    with RunContext():
        try:
            return COMMANDS[args.command](args, out)
        except ConfigError as e:
            logger.error(f"Config error: {e}", exc_info=args.verbose)
            return EXIT_USAGE
        except (DataError, CheckpointError, EvaluationError, TrainingError, DimensionError, OSError, ValueError) as e:
            logger.error(f"Error: {e}", exc_info=args.verbose)
            return EXIT_DATA
