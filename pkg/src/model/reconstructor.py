"""
Reconstructor for RecNet

Reproduces the video's frame features from the decoder's hidden states H.

The global variant runs one LSTM step per decoder step on
[h_t, mean(H)] and is scored by the Euclidean distance between the mean
reconstructed state and the mean frame feature. The local variant runs
one step per frame slot on an attention-weighted sum of H and is scored
by the mean per-frame Euclidean distance over the real frames.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from src.data.batching import FrameBatch
from src.data.features import FrameFeatureSequence
from src.model.decoder import DecoderTrace
from src.model.params import ReconstructorParams, Variant
from src.numeric import ops
from src.numeric.lstm import LSTMState, lstm_step
from src.numeric.tensor import DimensionError, Tensor, as_tensor

logger = logging.getLogger(__name__)

DISTANCE_EPS = 1e-12

Frames = Union[FrameBatch, FrameFeatureSequence]


@dataclass(frozen=True, eq=False)
class ReconstructionTrace:
    """
    Reconstructor record.

    Attributes:
        variant: Which reconstructor produced it
        states: Reconstructed states Z, (B, T, d); T = n (global) or frame budget (local)
        step_mask: (B, T) True on the steps that count
        summary: Mean of the decoder hidden states, (B, H); global only
        attention: Weights over decoder steps, (B, T, n); local only
        contexts: Attended decoder states mu_t, (B, T, H); local only
    """

    variant: Variant
    states: Tensor
    step_mask: np.ndarray
    summary: Optional[Tensor] = None
    attention: Optional[np.ndarray] = None
    contexts: Optional[Tensor] = None

    @property
    def steps(self) -> int:
        return self.states.shape[1]


def _as_batch(frames: Frames) -> FrameBatch:
    if isinstance(frames, FrameFeatureSequence):
        return FrameBatch.from_sequences([frames])
    return frames


def mean_pool(vectors: Union[Tensor, Sequence[Tensor]], mask: Optional[np.ndarray] = None) -> Tensor:
    """
    Mean of the unmasked vectors.

    Args:
        vectors: A list of (..., d) tensors, or one (..., n, d) tensor
        mask: (..., n) booleans; None keeps every vector

    Raises:
        ValueError: If no vector is unmasked
    """
    if not isinstance(vectors, Tensor):
        vectors = list(vectors)
        if not vectors:
            raise ValueError("mean of an empty set of vectors")
        vectors = ops.stack(vectors, axis=-2)
    return ops.masked_mean(vectors, mask)


def euclidean_distance(a: Tensor, b: Union[Tensor, np.ndarray]) -> Tensor:
    """sqrt(sum((a - b)^2) + 1e-12) over the last axis."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1] != b.shape[-1]:
        raise DimensionError(f"Distance between vectors of size {a.shape[-1]} and {b.shape[-1]}")
    delta = ops.sub(a, b)
    return ops.sqrt(ops.add(ops.sum(ops.square(delta), axis=-1), DISTANCE_EPS))


def _check_hidden(trace: DecoderTrace, params: ReconstructorParams, inputs: int) -> Tuple[int, int, int]:
    batch, steps, hidden_size = trace.hidden.shape
    if steps < 1:
        raise DimensionError("Decoder trace has no hidden states")
    weights = as_tensor(params.lstm_weight)
    feature_dim = weights.shape[0] // 4
    if weights.shape[1] != inputs * hidden_size + feature_dim:
        raise DimensionError(
            f"reconstructor lstm_weight {weights.shape} does not fit decoder hidden size {hidden_size}"
        )
    return batch, steps, feature_dim


def reconstruct_global(trace: DecoderTrace, params: ReconstructorParams) -> ReconstructionTrace:
    """
    Global reconstruction: step t consumes [h_t, mean(H)] and z_{t-1}.

    mean(H) is computed once over the real decoder steps and reused at
    every step; the initial state is zero.
    """
    batch, steps, feature_dim = _check_hidden(trace, params, inputs=2)

    summary = mean_pool(trace.hidden, trace.step_mask)
    state = LSTMState.zeros(feature_dim, batch)
    states: List[Tensor] = []

    for step in range(steps):
        h_t = trace.hidden[:, step, :]
        state = lstm_step([h_t, summary], state, params.lstm_weight, params.lstm_bias)
        states.append(state.hidden)

    return ReconstructionTrace(
        variant=Variant.GLOBAL,
        states=ops.stack(states, axis=1),
        step_mask=trace.step_mask,
        summary=summary
    )


def reconstruct_local(trace: DecoderTrace, frame_budget: int, params: ReconstructorParams) -> ReconstructionTrace:
    """
    Local reconstruction: frame_budget steps, each attending over the
    decoder hidden states with z_{t-1} as the query and consuming the
    attended state mu_t and z_{t-1}.
    """
    if frame_budget < 1:
        raise DimensionError(f"frame_budget must be at least 1, got {frame_budget}")
    batch, steps, feature_dim = _check_hidden(trace, params, inputs=1)

    hidden = trace.hidden
    projected = ops.linear(hidden, params.att_hidden)
    width = projected.shape[2]

    state = LSTMState.zeros(feature_dim, batch)
    states: List[Tensor] = []
    weights: List[np.ndarray] = []
    contexts: List[Tensor] = []

    for _ in range(frame_budget):
        query = ops.reshape(ops.linear(state.hidden, params.att_state), (batch, 1, width))
        activation = ops.tanh(ops.add(ops.add(query, projected), params.att_bias))
        scores = ops.sum(ops.mul(activation, params.att_vector), axis=-1)
        beta = ops.softmax(scores, mask=trace.step_mask)
        mu = ops.sum(ops.mul(ops.reshape(beta, (batch, steps, 1)), hidden), axis=1)

        state = lstm_step(mu, state, params.lstm_weight, params.lstm_bias)
        states.append(state.hidden)
        weights.append(beta.data)
        contexts.append(mu)

    return ReconstructionTrace(
        variant=Variant.LOCAL,
        states=ops.stack(states, axis=1),
        step_mask=np.ones((batch, frame_budget), dtype=bool),
        attention=np.stack(weights, axis=1),
        contexts=ops.stack(contexts, axis=1)
    )


def global_loss(features: Frames, rec: ReconstructionTrace, reduce: bool = True) -> Tensor:
    """
    Distance between the mean frame feature and the mean reconstructed state.

    Returns:
        Batch mean (reduce=True) or per-video losses (B,)
    """
    frames = _as_batch(features)
    if frames.dim != rec.states.shape[2]:
        raise DimensionError(f"Feature dimension {frames.dim} differs from reconstructed {rec.states.shape[2]}")

    video_summary = ops.masked_mean(Tensor(frames.features), frames.mask)
    caption_summary = mean_pool(rec.states, rec.step_mask)
    per_video = euclidean_distance(caption_summary, video_summary)
    return ops.mean(per_video) if reduce else per_video


def local_loss(features: Frames, rec: ReconstructionTrace, reduce: bool = True) -> Tensor:
    """
    Mean over each video's real frames of the per-frame distance between
    z_j and v_j; padded frame slots do not count.

    Returns:
        Batch mean (reduce=True) or per-video losses (B,)
    """
    frames = _as_batch(features)
    if rec.states.shape[1] != frames.budget:
        raise DimensionError(f"Reconstruction has {rec.states.shape[1]} states for {frames.budget} frame slots")
    if frames.dim != rec.states.shape[2]:
        raise DimensionError(f"Feature dimension {frames.dim} differs from reconstructed {rec.states.shape[2]}")

    distances = euclidean_distance(rec.states, frames.features)
    weights = frames.mask.astype(np.float64)
    per_video = ops.div(ops.sum(ops.mul(distances, weights), axis=1), frames.true_lengths.astype(np.float64))
    return ops.mean(per_video) if reduce else per_video


def reconstruction_loss(
    variant: Variant,
    features: Frames,
    trace: DecoderTrace,
    params: ReconstructorParams
) -> Tuple[Tensor, ReconstructionTrace]:
    """Run the chosen reconstructor and score it; returns (batch-mean loss, trace)."""
    frames = _as_batch(features)
    if variant is Variant.GLOBAL:
        rec = reconstruct_global(trace, params)
        return global_loss(frames, rec), rec
    if variant is Variant.LOCAL:
        rec = reconstruct_local(trace, frames.budget, params)
        return local_loss(frames, rec), rec
    raise ValueError("Variant 'none' has no reconstruction loss")
