"""
Attention Decoder for RecNet

Temporal attention over frame features feeding an LSTM that emits one
word per step. All functions work on batches: features (B, m, d), hidden
states (B, H). Step t attends with the previous hidden state, runs the
LSTM on [embedding(previous word), context] and projects the new hidden
state to vocabulary logits.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from src.data.batching import CaptionBatch, FrameBatch
from src.data.features import FrameFeatureSequence
from src.data.vocabulary import TokenSequence
from src.model.params import ContextMode, DecoderParams
from src.numeric import ops
from src.numeric.lstm import LSTMState, lstm_step
from src.numeric.tensor import DimensionError, Tensor, as_tensor

logger = logging.getLogger(__name__)

Frames = Union[FrameBatch, FrameFeatureSequence]


@dataclass(frozen=True, eq=False)
class EncodedFrames:
    """
    Frame features prepared for decoding.

    Attributes:
        features: (B, m, d) constant tensor
        mask: (B, m) booleans
        projected: att_feature applied to every frame, (B, m, A); attention mode only
        pooled: Masked mean of the features, (B, d); mean-pool mode only
        mode: Context mode the frames were prepared for
    """

    features: Tensor
    mask: np.ndarray
    projected: Optional[Tensor]
    pooled: Optional[Tensor]
    mode: ContextMode

    @property
    def size(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True, eq=False)
class DecoderTrace:
    """
    Teacher-forced decoding record.

    Attributes:
        hidden: Decoder hidden states H, (B, n, H)
        contexts: Visual contexts c_t, (B, n, d)
        attention: Attention weights, (B, n, m)
        logits: Per-step vocabulary logits, (B, n, V)
        step_mask: (B, n) True on real caption steps
        sample_losses: Per-sample negative log-likelihood, (B,)
    """

    hidden: Tensor
    contexts: Tensor
    attention: np.ndarray
    logits: Tensor
    step_mask: np.ndarray
    sample_losses: Tensor

    @property
    def steps(self) -> int:
        return self.hidden.shape[1]


def _as_batch(frames: Frames) -> FrameBatch:
    if isinstance(frames, FrameFeatureSequence):
        return FrameBatch.from_sequences([frames])
    return frames


def encode_frames(
    frames: Frames,
    params: DecoderParams,
    mode: ContextMode = ContextMode.ATTENTION
) -> EncodedFrames:
    """
    Wrap frame features as constants and precompute what every step reuses.

    Raises:
        DimensionError: If the feature dimension does not match the parameters
        ValueError: If a video has no unmasked frame
    """
    frames = _as_batch(frames)
    feature_dim = np.shape(as_tensor(params.att_feature).data)[1]
    if frames.dim != feature_dim:
        raise DimensionError(f"Frame features have dimension {frames.dim}, model expects {feature_dim}")
    if not np.all(frames.mask.any(axis=1)):
        raise ValueError("empty support: a video has every frame masked")

    features = Tensor(frames.features)
    projected = pooled = None
    if mode is ContextMode.ATTENTION:
        projected = ops.linear(features, params.att_feature)
    else:
        pooled = ops.masked_mean(features, frames.mask)

    return EncodedFrames(features=features, mask=frames.mask, projected=projected, pooled=pooled, mode=mode)


def attend(prev_hidden: Tensor, encoded: EncodedFrames, params: DecoderParams) -> Tuple[Tensor, Tensor]:
    """
    Batched temporal attention.

    Returns:
        Tuple of (contexts (B, d), weights (B, m))
    """
    if encoded.mode is ContextMode.MEAN_POOL:
        # Uniform weights over the real frames; the context is the same at every step
        batch = prev_hidden.shape[0]
        weights = encoded.mask / encoded.mask.sum(axis=1, keepdims=True)
        weights = np.broadcast_to(weights, (batch, weights.shape[1]))
        pooled = encoded.pooled
        if pooled.shape[0] != batch:
            pooled = ops.mul(pooled, np.ones((batch, 1)))
        return pooled, Tensor(np.array(weights, dtype=np.float64))

    query = ops.linear(prev_hidden, params.att_hidden)
    batch, width = query.shape
    hidden_term = ops.reshape(query, (batch, 1, width))
    activation = ops.tanh(ops.add(ops.add(hidden_term, encoded.projected), params.att_bias))
    scores = ops.sum(ops.mul(activation, params.att_vector), axis=-1)
    weights = ops.softmax(scores, mask=encoded.mask)

    frames = weights.shape[1]
    weighted = ops.mul(ops.reshape(weights, (batch, frames, 1)), encoded.features)
    return ops.sum(weighted, axis=1), weights


def attention_context(
    prev_hidden: Union[Tensor, np.ndarray],
    features: FrameFeatureSequence,
    params: DecoderParams
) -> Tuple[Tensor, np.ndarray]:
    """
    Attention for a single video.

    Args:
        prev_hidden: Previous decoder hidden state, (H,)
        features: The video's frames
        params: Decoder parameters

    Returns:
        Tuple of (context c_t of shape (d,), weights alpha of shape (m,))
    """
    encoded = encode_frames(features, params)
    hidden = ops.reshape(as_tensor(prev_hidden), (1, -1))
    context, weights = attend(hidden, encoded, params)
    return ops.reshape(context, (-1,)), weights.data[0]


def decode_step(
    prev_tokens: Union[np.ndarray, int],
    state: LSTMState,
    encoded: EncodedFrames,
    params: DecoderParams
) -> Tuple[Tensor, LSTMState, Tensor, Tensor]:
    """
    One decoding step for a batch.

    Args:
        prev_tokens: Previous word ids, (B,)
        state: Decoder state after the previous word, (B, H)
        encoded: Prepared frames; a single video broadcasts over the batch
        params: Decoder parameters

    Returns:
        Tuple of (logits (B, V), new state, context (B, d), attention (B, m))

    Raises:
        DimensionError: If a token id is outside the vocabulary
    """
    prev_tokens = np.atleast_1d(np.asarray(prev_tokens, dtype=np.int64))
    context, weights = attend(state.hidden, encoded, params)
    embedded = ops.embedding(params.embedding, prev_tokens)
    new_state = lstm_step([embedded, context], state, params.lstm_weight, params.lstm_bias)
    logits = ops.linear(new_state.hidden, params.out_weight, params.out_bias)
    return logits, new_state, context, weights


def initial_state(params: DecoderParams, batch_size: int) -> LSTMState:
    hidden_size = np.shape(as_tensor(params.att_hidden).data)[1]
    return LSTMState.zeros(hidden_size, batch_size)


def teacher_forced(
    frames: Frames,
    inputs: np.ndarray,
    targets: np.ndarray,
    loss_mask: np.ndarray,
    params: DecoderParams,
    mode: ContextMode = ContextMode.ATTENTION
) -> DecoderTrace:
    """
    Run the decoder over ground-truth previous words.

    Args:
        frames: B videos
        inputs: (B, n) previous-word ids, BOS first
        targets: (B, n) next-word ids, EOS last
        loss_mask: (B, n) True on real steps
        params: Decoder parameters
        mode: Context mode

    Returns:
        DecoderTrace whose sample_losses are -sum_t log P(target_t | ...)
    """
    encoded = encode_frames(frames, params, mode)
    inputs = np.asarray(inputs, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.int64)
    loss_mask = np.asarray(loss_mask, dtype=bool)

    if inputs.shape != targets.shape or inputs.shape != loss_mask.shape or inputs.shape[0] != encoded.size:
        raise DimensionError(
            f"inputs {inputs.shape}, targets {targets.shape}, loss mask {loss_mask.shape} "
            f"do not match a batch of {encoded.size} videos"
        )

    state = initial_state(params, encoded.size)
    hidden: List[Tensor] = []
    contexts: List[Tensor] = []
    attention: List[Tensor] = []
    logits: List[Tensor] = []

    for step in range(inputs.shape[1]):
        step_logits, state, context, weights = decode_step(inputs[:, step], state, encoded, params)
        hidden.append(state.hidden)
        contexts.append(context)
        attention.append(weights)
        logits.append(step_logits)

    all_logits = ops.stack(logits, axis=1)
    log_probs = ops.pick(ops.log_softmax(all_logits), targets)
    sample_losses = ops.neg(ops.sum(ops.mul(log_probs, loss_mask.astype(np.float64)), axis=1))

    return DecoderTrace(
        hidden=ops.stack(hidden, axis=1),
        contexts=ops.stack(contexts, axis=1),
        attention=np.stack([w.data for w in attention], axis=1),
        logits=all_logits,
        step_mask=loss_mask,
        sample_losses=sample_losses
    )


def batch_nll(batch: CaptionBatch, params: DecoderParams, mode: ContextMode = ContextMode.ATTENTION) -> Tuple[Tensor, DecoderTrace]:
    """Mean over the batch of per-sample caption NLL, and the trace."""
    trace = teacher_forced(batch.frames, batch.inputs, batch.targets, batch.loss_mask, params, mode)
    return ops.mean(trace.sample_losses), trace


def teacher_forced_nll(
    features: FrameFeatureSequence,
    caption: TokenSequence,
    params: DecoderParams,
    mode: ContextMode = ContextMode.ATTENTION
) -> Tuple[Tensor, DecoderTrace]:
    """
    Caption NLL for a single video: -sum_i log P(s_i | s_<i, V).

    Returns:
        Tuple of (scalar loss, trace with a batch of one)
    """
    ids = np.asarray(caption.ids, dtype=np.int64)
    inputs, targets = ids[None, :-1], ids[None, 1:]
    trace = teacher_forced(features, inputs, targets, np.ones_like(inputs, dtype=bool), params, mode)
    return ops.reshape(trace.sample_losses, ()), trace


def token_accuracy(trace: DecoderTrace, targets: np.ndarray) -> Tuple[int, int]:
    """Correct argmax predictions and real steps of a teacher-forced trace."""
    predicted = trace.logits.data.argmax(axis=-1)
    correct = int(((predicted == np.asarray(targets)) & trace.step_mask).sum())
    return correct, int(trace.step_mask.sum())
