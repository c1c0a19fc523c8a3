"""
Joint RecNet Objective

Caption negative log-likelihood plus lambda times the reconstruction
loss, averaged over the samples of a batch.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Mapping, Optional

import numpy as np

from src.data.batching import CaptionBatch, collate
from src.data.dataset import VideoEntry
from src.data.features import sample_frames
from src.data.vocabulary import RESERVED_TOKENS, TokenSequence
from src.model.decoder import DecoderTrace, batch_nll
from src.model.params import ContextMode, DecoderParams, ModelDims, ReconstructorParams, Variant
from src.model.reconstructor import ReconstructionTrace, reconstruction_loss
from src.numeric import ops
from src.numeric.gradcheck import gradient_errors
from src.numeric.tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LossBreakdown:
    """
    Terms of the batch objective.

    Attributes:
        total: Objective the optimizer minimizes
        nll: Batch-mean caption NLL
        reconstruction: Batch-mean reconstruction loss; None without a reconstructor
        decoder_trace: Teacher-forced decoder record
        reconstruction_trace: Reconstructor record
    """

    total: Tensor
    nll: Tensor
    reconstruction: Optional[Tensor]
    decoder_trace: DecoderTrace
    reconstruction_trace: Optional[ReconstructionTrace] = None


def recnet_loss(
    batch: CaptionBatch,
    decoder: DecoderParams,
    reconstructor: Optional[ReconstructorParams],
    variant: Variant,
    lam: float,
    mode: ContextMode = ContextMode.ATTENTION
) -> LossBreakdown:
    """
    Batch objective: mean NLL + lam * mean reconstruction loss.

    With lam == 0 the reconstruction loss is still computed and reported,
    but the total is the bare NLL node, so its gradients are exactly those
    of the encoder-decoder alone.

    Raises:
        ValueError: If lam is negative or a reconstructor variant lacks parameters
    """
    if lam < 0.0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")

    nll, trace = batch_nll(batch, decoder, mode)

    if variant is Variant.NONE:
        return LossBreakdown(total=nll, nll=nll, reconstruction=None, decoder_trace=trace)

    if reconstructor is None:
        raise ValueError(f"Variant '{variant.value}' needs reconstructor parameters")

    rec_loss, rec_trace = reconstruction_loss(variant, batch.frames, trace, reconstructor)
    total = nll if lam == 0.0 else ops.add(nll, ops.mul(rec_loss, lam))

    return LossBreakdown(
        total=total,
        nll=nll,
        reconstruction=rec_loss,
        decoder_trace=trace,
        reconstruction_trace=rec_trace
    )


# Gradient self-check on a small random model

GRADCHECK_DIMS = ModelDims(
    vocab_size=20,
    embed_size=8,
    hidden_size=16,
    feature_dim=10,
    attention_size=8,
    frame_budget=6
)
GRADCHECK_CAPTION_WORDS = (5, 3)
GRADCHECK_RAW_FRAMES = (9, 4)
GRADCHECK_TOLERANCE = 1e-4
GRADCHECK_INIT_SCALE = 0.5
GRADCHECK_LAMBDA = {Variant.NONE: 0.0, Variant.GLOBAL: 0.2, Variant.LOCAL: 0.1}


def gradcheck_batch(seed: int, dims: ModelDims = GRADCHECK_DIMS) -> CaptionBatch:
    """
    Two random videos and captions of unequal length, so both the frame
    mask and the caption mask have padded positions.
    """
    rng = np.random.default_rng([seed, 0])
    pairs = []
    for index, (frames, words) in enumerate(zip(GRADCHECK_RAW_FRAMES, GRADCHECK_CAPTION_WORDS)):
        raw = rng.standard_normal((frames, dims.feature_dim))
        caption = TokenSequence.from_words(rng.integers(len(RESERVED_TOKENS), dims.vocab_size, size=words).tolist())
        entry = VideoEntry(video_id=f"check{index}", frames=sample_frames(raw, dims.frame_budget), captions=(caption,))
        pairs.append((entry, caption))
    return collate(pairs)


def gradcheck_recnet(variant: Variant, seed: int = 0, dims: ModelDims = GRADCHECK_DIMS) -> Dict[str, float]:
    """
    Largest entrywise relative error of every parameter array's gradient of
    the full batch objective against central differences.

    Returns:
        Parameter name to relative error
    """
    caption_batch = gradcheck_batch(seed, dims)
    lam = GRADCHECK_LAMBDA[variant]

    params = dict(DecoderParams.init(dims, seed, GRADCHECK_INIT_SCALE).named())
    if variant is not Variant.NONE:
        params.update(ReconstructorParams.init(variant, dims, seed, GRADCHECK_INIT_SCALE).named())

    def loss_fn(values: Mapping[str, Tensor]) -> Tensor:
        decoder = DecoderParams.from_named(values)
        reconstructor = ReconstructorParams.from_named(variant, values) if variant is not Variant.NONE else None
        return recnet_loss(caption_batch, decoder, reconstructor, variant, lam, dims.context_mode).total

    errors = gradient_errors(loss_fn, params)
    logger.info(f"Gradient check ({variant.value}): max relative error {max(errors.values()):.3e}")
    return errors
