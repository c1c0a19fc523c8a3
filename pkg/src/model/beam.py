"""
Beam Search for RecNet

Inference-time decoding over constant tensors. Every live hypothesis is
one row of a decoder batch. At each step all expansions of all live
hypotheses compete for the beam slots; expansions ending in EOS leave
the beam as finished hypotheses. Expansions still open after max_len
tokens leave it as unfinished hypotheses and compete with the rest.
"""

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from src.data.features import FrameFeatureSequence
from src.data.vocabulary import BOS, EOS, PAD, TokenSequence
from src.model.decoder import decode_step, encode_frames, initial_state
from src.model.params import ContextMode, DecoderParams
from src.numeric import ops
from src.numeric.lstm import LSTMState
from src.numeric.tensor import Tensor

logger = logging.getLogger(__name__)

DEFAULT_BEAM_SIZE = 5
DEFAULT_MAX_LEN = 30


@dataclass(frozen=True)
class Hypothesis:
    """
    A decoded word sequence.

    Attributes:
        tokens: Generated ids, EOS last when finished
        score: Sum of token log-probabilities
        finished: Whether the hypothesis ended in EOS rather than at max_len
    """

    tokens: Tuple[int, ...]
    score: float
    finished: bool = False

    def ranking_score(self, length_normalize: bool) -> float:
        if length_normalize:
            return self.score / max(len(self.tokens), 1)
        return self.score

    def to_sequence(self) -> TokenSequence:
        words = self.tokens[:-1] if self.tokens and self.tokens[-1] == EOS else self.tokens
        return TokenSequence.from_words(words)


def _select_rows(state: LSTMState, rows: np.ndarray) -> LSTMState:
    return LSTMState(memory=Tensor(state.memory.data[rows]), hidden=Tensor(state.hidden.data[rows]))


def search(
    features: FrameFeatureSequence,
    params: DecoderParams,
    beam: int = DEFAULT_BEAM_SIZE,
    max_len: int = DEFAULT_MAX_LEN,
    length_normalize: bool = False,
    mode: ContextMode = ContextMode.ATTENTION
) -> List[Hypothesis]:
    """
    Beam search returning every ended hypothesis, best first.

    Args:
        features: The video's frames
        params: Decoder parameters (arrays or tensors)
        beam: Beam width, >= 1
        max_len: Most tokens generated per hypothesis, EOS included
        length_normalize: Rank finished hypotheses by mean token log-probability
        mode: Context mode of the decoder

    Returns:
        Hypotheses closed by EOS or cut at max_len, ordered by ranking score,
        ties to lower token ids
    """
    if beam < 1:
        raise ValueError(f"beam must be at least 1, got {beam}")
    if max_len < 1:
        raise ValueError(f"max_len must be at least 1, got {max_len}")

    params = params.numpy()
    encoded = encode_frames(features, params, mode)

    live_tokens: List[Tuple[int, ...]] = [()]
    live_scores = np.zeros(1)
    state = initial_state(params, 1)
    finished: List[Hypothesis] = []

    for step in range(max_len):
        prev = np.array([tokens[-1] if tokens else BOS for tokens in live_tokens], dtype=np.int64)
        logits, new_state, _, _ = decode_step(prev, state, encoded, params)
        log_probs = ops.log_softmax(logits).data.copy()

        log_probs[:, PAD] = -np.inf
        log_probs[:, BOS] = -np.inf
        last = step == max_len - 1

        totals = (live_scores[:, None] + log_probs).reshape(-1)
        vocab = log_probs.shape[1]
        order = np.argsort(-totals, kind="stable")
        order = order[np.isfinite(totals[order])][:beam]

        rows, next_tokens, next_scores = [], [], []
        for flat in order:
            row, token = divmod(int(flat), vocab)
            tokens = live_tokens[row] + (token,)
            if token == EOS:
                finished.append(Hypothesis(tokens=tokens, score=float(totals[flat]), finished=True))
            elif last:
                finished.append(Hypothesis(tokens=tokens, score=float(totals[flat]), finished=False))
            else:
                rows.append(row)
                next_tokens.append(tokens)
                next_scores.append(totals[flat])

        if not rows:
            break

        live_tokens = next_tokens
        live_scores = np.array(next_scores)
        state = _select_rows(new_state, np.array(rows))

        # Log-probabilities are <= 0, so live hypotheses can only lose score
        if not length_normalize and finished and max(h.score for h in finished) >= live_scores.max():
            break

    finished.sort(key=lambda h: (-h.ranking_score(length_normalize), h.tokens))
    logger.debug(f"Beam search (width {beam}) finished {len(finished)} hypotheses")
    return finished


def beam_search(
    features: FrameFeatureSequence,
    params: DecoderParams,
    beam: int = DEFAULT_BEAM_SIZE,
    max_len: int = DEFAULT_MAX_LEN,
    length_normalize: bool = False,
    mode: ContextMode = ContextMode.ATTENTION
) -> TokenSequence:
    """The best hypothesis as a BOS/EOS-delimited sequence."""
    hypotheses = search(features, params, beam, max_len, length_normalize, mode)
    return hypotheses[0].to_sequence()


def greedy_decode(
    features: FrameFeatureSequence,
    params: DecoderParams,
    max_len: int = DEFAULT_MAX_LEN,
    mode: ContextMode = ContextMode.ATTENTION
) -> TokenSequence:
    """Argmax decoding up to max_len tokens; PAD and BOS are never emitted."""
    params = params.numpy()
    encoded = encode_frames(features, params, mode)
    state = initial_state(params, 1)
    prev = BOS
    words: List[int] = []

    for _ in range(max_len):
        logits, state, _, _ = decode_step(np.array([prev]), state, encoded, params)
        scores = ops.log_softmax(logits).data[0].copy()
        scores[PAD] = -np.inf
        scores[BOS] = -np.inf
        token = int(np.argmax(scores))
        if token == EOS:
            break
        words.append(token)
        prev = token

    return TokenSequence.from_words(words)

