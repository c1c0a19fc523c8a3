"""
Two-Stage Trainer for RecNet

Stage 1 trains the encoder-decoder on caption NLL. Stage 2 adds a fresh
reconstructor and minimizes NLL + lambda * reconstruction loss over both
parameter groups. Every phase runs AdaDelta over shuffled mini-batches,
decodes the validation split with beam search after each epoch and keeps
the parameters of the best validation CIDEr-D, stopping once `patience`
epochs pass without a strict improvement.

With a run directory, each phase writes under <run_dir>/<stage>/:

    last.recn          state after the latest epoch (used by resume)
    best.recn          best-CIDEr checkpoint
    train_log.csv      epoch,nll,rec_loss,val_cider
    metrics.prom       Prometheus text export
    test_metrics.json  test-split report of the best checkpoint
"""

import csv
import io
import logging
import math
import time
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple, Union

from src.data.batching import CaptionBatch, batch
from src.data.dataset import CaptionDataset, DatasetBundle
from src.data.features import FrameFeatureSequence
from src.data.vocabulary import PAD, Vocabulary
from src.evaluation.metrics import CorpusEntry, EvaluationError, MetricReport, cider, score_corpus
from src.model.beam import beam_search, greedy_decode
from src.model.params import ContextMode, DecoderParams, ModelDims, ReconstructorParams, Variant
from src.model.recnet import recnet_loss
from src.monitoring.metrics import TrainingMetrics
from src.numeric.optim import AdaDeltaState, adadelta_update, clip_by_global_norm
from src.numeric.tensor import GradientError, GradientTape, backward
from src.training.checkpoint import (
    CheckpointError,
    EpochRecord,
    ModelCheckpoint,
    load_checkpoint,
    parameter_digest,
    save_checkpoint,
)
from src.training.config import TrainingConfig
from src.utils.atomic_io import atomic_write_json, atomic_write_text

logger = logging.getLogger(__name__)

STAGE1 = "stage1"
STAGE2 = "stage2"

LAST_CHECKPOINT = "last.recn"
BEST_CHECKPOINT = "best.recn"
TRAIN_LOG = "train_log.csv"
METRICS_FILE = "metrics.prom"
TEST_REPORT = "test_metrics.json"
LOG_HEADER = ("epoch", "nll", "rec_loss", "val_cider")


class TrainingError(Exception):
    """Raised when training cannot start or diverges"""
    pass


def decode_captions(
    decoder: DecoderParams,
    frames: Mapping[str, FrameFeatureSequence],
    vocabulary: Vocabulary,
    beam_size: int,
    max_words: int,
    length_normalize: bool = False,
    mode: ContextMode = ContextMode.ATTENTION
) -> Dict[str, List[str]]:
    """
    Caption every video; beam size 1 decodes greedily.

    Returns:
        Video id to caption words, markers stripped
    """
    decoder = decoder.numpy()
    captions: Dict[str, List[str]] = {}
    for video_id, features in frames.items():
        if beam_size == 1:
            sequence = greedy_decode(features, decoder, max_len=max_words, mode=mode)
        else:
            sequence = beam_search(features, decoder, beam_size, max_words, length_normalize, mode)
        captions[video_id] = vocabulary.decode(sequence)
    return captions


def _last_strict_improvement(history: List[EpochRecord]) -> int:
    best: Optional[float] = None
    epoch = 0
    for record in history:
        if best is None or record.val_cider > best:
            best = record.val_cider
            epoch = record.epoch
    return epoch


class RecNetTrainer:
    """
    Runs training phases for one model configuration.

    Usage:
        trainer = RecNetTrainer(config, dims, run_dir="runs/demo")
        stage1 = trainer.train_stage1(bundle)
        stage2 = trainer.train_stage2(stage1, bundle)
    """

    def __init__(
        self,
        config: TrainingConfig,
        dims: ModelDims,
        run_dir: Optional[Union[str, Path]] = None,
        metrics: Optional[TrainingMetrics] = None
    ):
        self.config = config
        self.dims = dims
        self.run_dir = Path(run_dir) if run_dir is not None else None
        self.metrics = metrics if metrics is not None else TrainingMetrics()

    # Model and data checks

    def _check_bundle(self, bundle: DatasetBundle) -> None:
        if len(bundle.train) == 0:
            raise TrainingError("The train split is empty")
        if len(bundle.validation) < 2:
            raise TrainingError(
                f"The validation split has {len(bundle.validation)} video(s); CIDEr needs at least 2"
            )
        if bundle.feature_dim != self.dims.feature_dim:
            raise TrainingError(f"Dataset features have dimension {bundle.feature_dim}, model expects {self.dims.feature_dim}")
        if bundle.vocabulary.size != self.dims.vocab_size:
            raise TrainingError(f"Vocabulary has {bundle.vocabulary.size} ids, model expects {self.dims.vocab_size}")
        if bundle.train.frame_budget != self.dims.frame_budget:
            raise TrainingError(f"Dataset frame budget {bundle.train.frame_budget} differs from the model's {self.dims.frame_budget}")

    def initial_checkpoint(self, vocabulary: Vocabulary) -> ModelCheckpoint:
        """Freshly initialized encoder-decoder with zero optimizer state."""
        decoder = DecoderParams.init(self.dims, self.config.seed, self.config.init_scale)
        optimizer = AdaDeltaState.zeros_like(decoder.named(), rho=self.config.rho, eps=self.config.eps)
        return ModelCheckpoint(
            decoder=decoder,
            reconstructor=None,
            optimizer=optimizer,
            dims=self.dims,
            vocabulary=vocabulary,
            stage=STAGE1,
            config=self.config.to_dict()
        )

    # Optimization

    def train_step(
        self,
        state: ModelCheckpoint,
        caption_batch: CaptionBatch,
        lam: float
    ) -> Tuple[DecoderParams, Optional[ReconstructorParams], AdaDeltaState, float, float, float]:
        """
        One AdaDelta step on a batch.

        Returns:
            Tuple of (decoder, reconstructor, optimizer state, batch NLL,
            batch reconstruction loss, gradient norm before clipping)

        Raises:
            TrainingError: If the loss or its gradient is not finite
        """
        variant = state.variant
        tape = GradientTape()
        decoder = state.decoder.watch(tape)
        reconstructor = state.reconstructor.watch(tape) if state.reconstructor is not None else None

        losses = recnet_loss(caption_batch, decoder, reconstructor, variant, lam, self.dims.context_mode)
        try:
            grads = backward(tape, losses.total)
        except GradientError as e:
            raise TrainingError(f"{state.stage}: {e}") from e

        embedding_grad = grads["decoder.embedding"].copy()
        embedding_grad[PAD] = 0.0
        grads["decoder.embedding"] = embedding_grad

        grads, norm = clip_by_global_norm(grads, self.config.clip_norm)
        if not math.isfinite(norm):
            raise TrainingError(f"{state.stage}: gradient norm is not finite")

        params = state.decoder.numpy().named()
        if state.reconstructor is not None:
            params.update(state.reconstructor.numpy().named())
        new_params, optimizer = adadelta_update(params, grads, state.optimizer)

        new_decoder = DecoderParams.from_named(new_params)
        new_reconstructor = None
        if state.reconstructor is not None:
            new_reconstructor = ReconstructorParams.from_named(variant, new_params)

        rec_value = losses.reconstruction.item() if losses.reconstruction is not None else 0.0
        return new_decoder, new_reconstructor, optimizer, losses.nll.item(), rec_value, norm

    def train_epoch(
        self,
        state: ModelCheckpoint,
        dataset: CaptionDataset,
        epoch: int,
        lam: float
    ) -> Tuple[ModelCheckpoint, float, float]:
        """
        One pass over the shuffled training pairs.

        Returns:
            Tuple of (state after the epoch, sample-weighted mean NLL,
            sample-weighted mean reconstruction loss)
        """
        nll_terms: List[float] = []
        rec_terms: List[float] = []
        samples = 0

        for caption_batch in batch(dataset, self.config.batch_size, shuffle_seed=self.config.seed, epoch=epoch):
            decoder, reconstructor, optimizer, nll, rec, norm = self.train_step(state, caption_batch, lam)
            state = replace(state, decoder=decoder, reconstructor=reconstructor, optimizer=optimizer)
            nll_terms.append(nll * caption_batch.size)
            rec_terms.append(rec * caption_batch.size)
            samples += caption_batch.size
            self.metrics.record_batch(state.stage, norm)
            logger.debug(f"{state.stage} epoch {epoch}: batch of {caption_batch.size}, nll={nll:.6f}, rec={rec:.6f}")

        return state, math.fsum(nll_terms) / samples, math.fsum(rec_terms) / samples

    # Evaluation

    def caption_split(self, decoder: DecoderParams, dataset: CaptionDataset) -> Dict[str, List[str]]:
        frames = {entry.video_id: entry.frames for entry in dataset}
        return decode_captions(
            decoder,
            frames,
            dataset.vocabulary,
            self.config.beam_size,
            self.config.max_caption_len,
            self.config.length_normalize,
            self.dims.context_mode
        )

    def split_corpus(self, decoder: DecoderParams, dataset: CaptionDataset) -> Dict[str, CorpusEntry]:
        """Caption a split and pair each caption with the video's references."""
        captions = self.caption_split(decoder, dataset)
        references = dataset.references()
        return {
            video_id: CorpusEntry(candidate=tuple(words), references=tuple(map(tuple, references[video_id])))
            for video_id, words in captions.items()
        }

    def validate(self, decoder: DecoderParams, dataset: CaptionDataset) -> float:
        """Validation CIDEr-D of beam-decoded captions."""
        return cider(self.split_corpus(decoder, dataset))

    def test_report(self, decoder: DecoderParams, dataset: CaptionDataset) -> Optional[MetricReport]:
        """Metric report on a split; None when the split cannot be scored."""
        try:
            return score_corpus(self.split_corpus(decoder, dataset))
        except EvaluationError as e:
            logger.warning(f"Skipping test report: {e}")
            return None

    # Phases

    def _stage_dir(self, stage: str) -> Optional[Path]:
        return self.run_dir / stage if self.run_dir is not None else None

    def _write_log(self, stage_dir: Path, history: List[EpochRecord]) -> None:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(LOG_HEADER)
        for record in history:
            writer.writerow([record.epoch, repr(record.nll), repr(record.rec_loss), repr(record.val_cider)])
        atomic_write_text(stage_dir / TRAIN_LOG, buffer.getvalue())

    def _resume_state(self, stage: str, start: ModelCheckpoint) -> Tuple[ModelCheckpoint, ModelCheckpoint]:
        stage_dir = self._stage_dir(stage)
        if stage_dir is None:
            raise TrainingError("Resuming needs a run directory")

        last_path = stage_dir / LAST_CHECKPOINT
        if not last_path.is_file():
            logger.info(f"No {last_path} to resume from; starting {stage} from epoch 1")
            return start, start

        try:
            last = load_checkpoint(last_path)
            best = load_checkpoint(stage_dir / BEST_CHECKPOINT)
        except CheckpointError as e:
            raise TrainingError(f"Cannot resume {stage}: {e}") from e

        if last.stage != stage or last.variant is not start.variant:
            raise TrainingError(f"{last_path} belongs to {last.stage}/{last.variant.value}, not {stage}/{start.variant.value}")
        logger.info(f"Resuming {stage} after epoch {last.epoch} (best epoch {last.best_epoch})")
        return last, best

    def run_phase(
        self,
        stage: str,
        start: ModelCheckpoint,
        bundle: DatasetBundle,
        lam: float,
        resume: bool = False
    ) -> ModelCheckpoint:
        """
        Train from `start` until early stopping or max_epochs.

        Returns:
            The best-CIDEr checkpoint, carrying the full phase history
        """
        self._check_bundle(bundle)
        stage_dir = self._stage_dir(stage)
        state, best = self._resume_state(stage, start) if resume else (start, start)
        last_improvement = _last_strict_improvement(state.history)

        log_extra = {"stage": stage, "variant": state.variant.value}
        logger.info(
            f"Starting {stage}: variant={state.variant.value}, lambda={lam}, "
            f"{len(bundle.train.pairs())} training pairs, patience {self.config.patience}",
            extra=log_extra
        )

        for epoch in range(state.epoch + 1, self.config.max_epochs + 1):
            if state.history and epoch - last_improvement > self.config.patience:
                break

            started = time.perf_counter()
            state, nll, rec_loss = self.train_epoch(state, bundle.train, epoch, lam)
            if not math.isfinite(nll) or not math.isfinite(rec_loss):
                raise TrainingError(f"{stage} epoch {epoch}: training loss diverged (nll={nll}, rec={rec_loss})")

            val_cider = self.validate(state.decoder, bundle.validation)
            record = EpochRecord(
                epoch=epoch,
                nll=nll,
                rec_loss=rec_loss,
                val_cider=val_cider,
                decoder_digest=parameter_digest(state.decoder)
            )
            history = state.history + [record]

            best_cider = state.best_cider
            best_epoch = state.best_epoch
            improved = best_cider is None or val_cider > best_cider
            if best_cider is None or val_cider >= best_cider:
                best_cider, best_epoch = val_cider, epoch
            if improved:
                last_improvement = epoch

            state = replace(state, epoch=epoch, history=history, best_epoch=best_epoch, best_cider=best_cider)
            if best_epoch == epoch:
                best = state

            duration = time.perf_counter() - started
            self.metrics.record_epoch(stage, nll, rec_loss, val_cider, best_cider, duration)
            logger.info(
                f"{stage} epoch {epoch}: nll={nll:.6f} rec_loss={rec_loss:.6f} "
                f"val_cider={val_cider:.4f} best={best_cider:.4f}@{best_epoch}",
                extra={**log_extra, "epoch": epoch, "duration_seconds": duration}
            )

            if stage_dir is not None:
                save_checkpoint(state, stage_dir / LAST_CHECKPOINT)
                if best is state:
                    save_checkpoint(best, stage_dir / BEST_CHECKPOINT)
                self._write_log(stage_dir, history)
                self.metrics.write(stage_dir / METRICS_FILE)

            if epoch - last_improvement >= self.config.patience:
                logger.info(
                    f"{stage}: no CIDEr improvement for {self.config.patience} epochs, stopping at epoch {epoch}",
                    extra=log_extra
                )
                break

        if not state.history:
            raise TrainingError(f"{stage} ran no epochs (max_epochs={self.config.max_epochs})")

        result = replace(best, history=list(state.history))
        if stage_dir is not None:
            save_checkpoint(result, stage_dir / BEST_CHECKPOINT)
            report = self.test_report(result.decoder, bundle.test) if len(bundle.test) else None
            if report is not None:
                atomic_write_json(stage_dir / TEST_REPORT, report.to_dict())
                logger.info(
                    f"{stage} test: BLEU-4 {report.bleu4:.4f}, ROUGE-L {report.rougeL:.4f}, CIDEr {report.cider:.4f}",
                    extra=log_extra
                )

        logger.info(f"Finished {stage}: best epoch {result.best_epoch}, CIDEr {result.best_cider:.4f}", extra=log_extra)
        return result

    def train_stage1(
        self,
        bundle: DatasetBundle,
        warm_start: Optional[ModelCheckpoint] = None,
        resume: bool = False
    ) -> ModelCheckpoint:
        """
        Encoder-decoder training on caption NLL.

        Args:
            bundle: Dataset splits
            warm_start: Continue from this checkpoint's encoder-decoder and
                optimizer state instead of a fresh initialization
            resume: Continue an interrupted phase from <run_dir>/stage1/last.recn
        """
        if warm_start is None:
            start = self.initial_checkpoint(bundle.vocabulary)
        else:
            start = ModelCheckpoint(
                decoder=warm_start.decoder.numpy(),
                reconstructor=None,
                optimizer=warm_start.optimizer.subset(warm_start.decoder.named()),
                dims=warm_start.dims,
                vocabulary=warm_start.vocabulary,
                stage=STAGE1,
                config=self.config.to_dict()
            )
        start.decoder.validate(self.dims)
        return self.run_phase(STAGE1, start, bundle, lam=0.0, resume=resume)

    def train_stage2(self, checkpoint: ModelCheckpoint, bundle: DatasetBundle, resume: bool = False) -> ModelCheckpoint:
        """
        Joint training of the encoder-decoder and a fresh reconstructor.

        The reconstructor gets fresh optimizer accumulators; the
        encoder-decoder keeps those of the checkpoint.

        Raises:
            TrainingError: If the configured variant is none
        """
        variant = self.config.variant
        if variant is Variant.NONE:
            raise TrainingError("Stage 2 needs a reconstructor variant (global or local)")

        reconstructor = ReconstructorParams.init(variant, self.dims, self.config.seed, self.config.init_scale)
        optimizer = checkpoint.optimizer.subset(checkpoint.decoder.named()).merged(
            AdaDeltaState.zeros_like(reconstructor.named(), rho=checkpoint.optimizer.rho, eps=checkpoint.optimizer.eps)
        )
        start = ModelCheckpoint(
            decoder=checkpoint.decoder.numpy(),
            reconstructor=reconstructor,
            optimizer=optimizer,
            dims=checkpoint.dims,
            vocabulary=checkpoint.vocabulary,
            stage=STAGE2,
            config=self.config.to_dict()
        )
        start.decoder.validate(self.dims)
        return self.run_phase(STAGE2, start, bundle, lam=self.config.effective_lambda, resume=resume)


def train_stage1(
    bundle: DatasetBundle,
    config: TrainingConfig,
    dims: ModelDims,
    run_dir: Optional[Union[str, Path]] = None,
    warm_start: Optional[ModelCheckpoint] = None,
    resume: bool = False
) -> ModelCheckpoint:
    """Stage-1 training with a one-off trainer; see RecNetTrainer.train_stage1."""
    return RecNetTrainer(config, dims, run_dir).train_stage1(bundle, warm_start=warm_start, resume=resume)


def train_stage2(
    checkpoint: ModelCheckpoint,
    bundle: DatasetBundle,
    config: TrainingConfig,
    run_dir: Optional[Union[str, Path]] = None,
    resume: bool = False
) -> ModelCheckpoint:
    """Stage-2 training with a one-off trainer; see RecNetTrainer.train_stage2."""
    return RecNetTrainer(config, checkpoint.dims, run_dir).train_stage2(checkpoint, bundle, resume=resume)
