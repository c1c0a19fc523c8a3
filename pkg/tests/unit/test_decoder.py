"""
Unit tests for the attention decoder and beam search.
"""

import itertools
import math
from dataclasses import replace

import numpy as np
import pytest

from src.data.batching import collate
from src.data.dataset import VideoEntry
from src.data.features import sample_frames
from src.data.vocabulary import BOS, EOS, UNK, TokenSequence
from src.model.beam import Hypothesis, beam_search, greedy_decode, search
from src.model.decoder import (
    attention_context,
    batch_nll,
    decode_step,
    encode_frames,
    initial_state,
    teacher_forced,
    teacher_forced_nll,
    token_accuracy,
)
from src.model.params import ContextMode, DecoderParams, ModelDims
from src.numeric import ops
from src.numeric.tensor import DimensionError
from tests import oracles


def random_decoder(dims: ModelDims, seed: int, scale: float = 0.6) -> DecoderParams:
    """Decoder with every array, biases included, drawn uniformly."""
    rng = np.random.default_rng(seed)
    return DecoderParams(**{
        name: rng.uniform(-scale, scale, size=shape) for name, shape in DecoderParams.shapes(dims).items()
    })


def sequence_log_prob(features, params, tokens):
    """Sum of log P(token | prefix) under the library decoder, one step at a time."""
    encoded = encode_frames(features, params)
    state = initial_state(params, 1)
    prev, total = BOS, 0.0
    for token in tokens:
        logits, state, _, _ = decode_step(np.array([prev]), state, encoded, params)
        total += float(ops.log_softmax(logits).data[0, token])
        prev = token
    return total


@pytest.fixture
def padded_video(rng, small_dims):
    """Three real frames in a budget of five."""
    return sample_frames(rng.standard_normal((3, small_dims.feature_dim)), small_dims.frame_budget)


class TestAttention:
    """Test the temporal attention of the decoder."""

    def test_matches_oracle(self, small_dims, padded_video, rng):
        """Test weights and context against the straight-line implementation."""
        params = random_decoder(small_dims, seed=1)
        hidden = rng.standard_normal(small_dims.hidden_size)

        context, weights = attention_context(hidden, padded_video, params)

        named = params.named()
        alpha, expected = oracles.additive_attention(
            list(hidden), padded_video.features, list(padded_video.mask),
            named["decoder.att_hidden"], named["decoder.att_feature"],
            named["decoder.att_vector"], named["decoder.att_bias"]
        )
        np.testing.assert_allclose(weights, alpha, atol=1e-12)
        np.testing.assert_allclose(context.data, expected, atol=1e-12)

    def test_padded_frames_get_zero_weight(self, small_dims, padded_video, rng):
        """Test that attention ignores padded frame slots."""
        params = random_decoder(small_dims, seed=2)

        _, weights = attention_context(rng.standard_normal(small_dims.hidden_size), padded_video, params)

        assert weights[3] == 0.0
        assert weights[4] == 0.0
        assert weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_mean_pool_context_is_mean_of_real_frames(self, small_dims, padded_video):
        """Test that mean-pool mode ignores the hidden state."""
        params = random_decoder(small_dims, seed=3)
        encoded = encode_frames(padded_video, params, ContextMode.MEAN_POOL)
        state = initial_state(params, 1)

        _, _, context, weights = decode_step(np.array([BOS]), state, encoded, params)

        np.testing.assert_allclose(context.data[0], padded_video.features[:3].mean(axis=0), atol=1e-12)
        np.testing.assert_allclose(weights.data[0], [1 / 3, 1 / 3, 1 / 3, 0.0, 0.0])

    def test_wrong_feature_dimension_raises(self, small_dims, rng):
        """Test that features of another width are rejected."""
        params = random_decoder(small_dims, seed=1)
        video = sample_frames(rng.standard_normal((4, small_dims.feature_dim + 1)), small_dims.frame_budget)

        with pytest.raises(DimensionError, match="model expects"):
            encode_frames(video, params)


class TestTeacherForcing:
    """Test the teacher-forced caption likelihood."""

    def test_nll_matches_probability_chain(self, small_dims, padded_video):
        """Test NLL against -log of the product of step probabilities."""
        params = random_decoder(small_dims, seed=4)
        caption = TokenSequence.from_words([4, 6, 5, 3])

        loss, trace = teacher_forced_nll(padded_video, caption, params)

        expected = oracles.sequence_nll(list(caption.ids), padded_video.features, list(padded_video.mask), params.named())
        assert loss.item() == pytest.approx(expected, rel=1e-10)
        assert trace.hidden.shape == (1, caption.n - 1, small_dims.hidden_size)
        assert trace.attention.shape == (1, caption.n - 1, small_dims.frame_budget)

    def test_hidden_states_match_oracle(self, small_dims, padded_video):
        """Test every decoder hidden state against the oracle recurrence."""
        params = random_decoder(small_dims, seed=5)
        caption = TokenSequence.from_words([5, 4])
        named = params.named()

        _, trace = teacher_forced_nll(padded_video, caption, params)

        h = m = [0.0] * small_dims.hidden_size
        for step, prev in enumerate(caption.ids[:-1]):
            _, h, m, _, alpha = oracles.decoder_step(
                prev, h, m, padded_video.features, list(padded_video.mask), named
            )
            np.testing.assert_allclose(trace.hidden.data[0, step], h, atol=1e-12)
            np.testing.assert_allclose(trace.attention[0, step], alpha, atol=1e-12)

    def test_batch_losses_equal_single_video_losses(self, small_dims, rng):
        """Test that padding in a batch does not change any sample's loss."""
        params = random_decoder(small_dims, seed=6)
        entries = []
        for index, (frames, words) in enumerate([(2, [4]), (7, [5, 6, 4, 3]), (4, [6, 6])]):
            video = sample_frames(rng.standard_normal((frames, small_dims.feature_dim)), small_dims.frame_budget)
            caption = TokenSequence.from_words(words)
            entries.append((VideoEntry(f"v{index}", video, (caption,)), caption))

        mean_loss, trace = batch_nll(collate(entries), params)

        singles = [teacher_forced_nll(entry.frames, caption, params)[0].item() for entry, caption in entries]
        np.testing.assert_allclose(trace.sample_losses.data, singles, rtol=1e-12)
        assert mean_loss.item() == pytest.approx(np.mean(singles), rel=1e-12)

    def test_token_accuracy_counts_real_steps(self, small_dims, padded_video):
        """Test that accuracy compares argmax predictions on real steps only."""
        params = random_decoder(small_dims, seed=7)
        caption = TokenSequence.from_words([4, 5])
        _, trace = teacher_forced_nll(padded_video, caption, params)
        predicted = trace.logits.data.argmax(axis=-1)

        correct, total = token_accuracy(trace, predicted)

        assert (correct, total) == (3, 3)

    @pytest.mark.parametrize("vocab_size", [4, 7])
    def test_zero_parameters_give_uniform_nll(self, small_dims, padded_video, vocab_size):
        """Test that all-zero parameters cost ln V per predicted token."""
        params = DecoderParams.zeros(replace(small_dims, vocab_size=vocab_size))
        caption = TokenSequence.from_words([UNK, UNK])

        loss, _ = teacher_forced_nll(padded_video, caption, params)

        # BOS UNK UNK EOS predicts three tokens
        assert loss.item() == pytest.approx(3.0 * math.log(vocab_size), rel=1e-12)

    def test_vocabulary_must_hold_reserved_ids(self, small_dims):
        """Test that fewer than four ids is a dimension error."""
        with pytest.raises(DimensionError, match="cover the 4 reserved"):
            replace(small_dims, vocab_size=3)

    def test_mismatched_targets_raise(self, small_dims, padded_video):
        """Test that inputs and targets must share a shape."""
        params = random_decoder(small_dims, seed=1)

        with pytest.raises(DimensionError, match="do not match"):
            teacher_forced(padded_video, np.ones((1, 3)), np.ones((1, 4)), np.ones((1, 3), dtype=bool), params)


class TestBeamSearch:
    """Test beam search and greedy decoding."""

    @pytest.fixture
    def tiny_vocab_dims(self):
        """Five ids: the four reserved tokens and one word."""
        return ModelDims(vocab_size=5, embed_size=3, hidden_size=4, feature_dim=3, attention_size=2, frame_budget=4)

    def test_wide_beam_finds_exhaustive_optimum(self, tiny_vocab_dims):
        """Test that an unpruned beam returns the best of all closed and length-capped captions."""
        max_len = 4
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            params = random_decoder(tiny_vocab_dims, seed=seed, scale=1.5)
            video = sample_frames(rng.standard_normal((5, 3)), 4)

            candidates = []
            for length in range(max_len):
                for words in itertools.product((3, 4), repeat=length):
                    tokens = tuple(words) + (EOS,)
                    candidates.append((-sequence_log_prob(video, params, tokens), tokens))
            for tokens in itertools.product((3, 4), repeat=max_len):
                candidates.append((-sequence_log_prob(video, params, tokens), tokens))
            best_score, best_tokens = min(candidates)

            hypotheses = search(video, params, beam=5 ** max_len, max_len=max_len)

            assert hypotheses[0].tokens == best_tokens
            assert hypotheses[0].score == pytest.approx(-best_score, abs=1e-9)

    def test_beam_of_one_equals_greedy(self, small_dims):
        """Test that a width-one beam makes the greedy choices."""
        for seed in range(20):
            rng = np.random.default_rng(200 + seed)
            params = random_decoder(small_dims, seed=seed, scale=1.5)
            video = sample_frames(rng.standard_normal((6, small_dims.feature_dim)), small_dims.frame_budget)

            assert beam_search(video, params, beam=1, max_len=6) == greedy_decode(video, params, max_len=6)

    def test_hypotheses_end_at_eos_or_max_len(self, small_dims, padded_video):
        """Test that every hypothesis is closed by EOS or holds exactly max_len words."""
        params = random_decoder(small_dims, seed=8, scale=1.5)

        for hypothesis in search(padded_video, params, beam=3, max_len=5):
            assert len(hypothesis.tokens) <= 5
            assert BOS not in hypothesis.tokens
            if hypothesis.finished:
                assert hypothesis.tokens[-1] == EOS
            else:
                assert len(hypothesis.tokens) == 5
                assert EOS not in hypothesis.tokens

    def test_unlikely_eos_gives_length_capped_caption(self, tiny_vocab_dims, rng):
        """Test that a caption reaching max_len without EOS is returned with all its words."""
        zero = DecoderParams.zeros(tiny_vocab_dims)
        out_bias = np.zeros(tiny_vocab_dims.vocab_size)
        out_bias[EOS] = -50.0
        params = replace(zero, out_bias=out_bias)
        video = sample_frames(rng.standard_normal((4, 3)), 4)

        best = search(video, params, beam=2, max_len=3)[0]

        assert not best.finished
        assert best.score == pytest.approx(-3 * np.log(4.0), abs=1e-9)
        assert beam_search(video, params, beam=2, max_len=3).words == (3, 3, 3)
        assert greedy_decode(video, params, max_len=3).words == (3, 3, 3)

    def test_max_len_one_holds_at_most_one_word(self, small_dims, padded_video):
        """Test that a single slot holds either EOS or one word."""
        params = random_decoder(small_dims, seed=9)

        assert len(beam_search(padded_video, params, beam=3, max_len=1).words) <= 1
        assert len(greedy_decode(padded_video, params, max_len=1).words) <= 1

    def test_hypotheses_are_ranked(self, small_dims, padded_video):
        """Test ranking by total and by length-normalized score."""
        params = random_decoder(small_dims, seed=10, scale=1.5)

        for normalize in (False, True):
            hypotheses = search(padded_video, params, beam=4, max_len=6, length_normalize=normalize)
            ranks = [h.ranking_score(normalize) for h in hypotheses]
            assert ranks == sorted(ranks, reverse=True)

    def test_decoding_is_deterministic(self, small_dims, padded_video):
        """Test that repeated searches return the same caption."""
        params = random_decoder(small_dims, seed=11, scale=1.5)

        assert beam_search(padded_video, params, beam=5) == beam_search(padded_video, params, beam=5)

    def test_invalid_beam_raises(self, small_dims, padded_video):
        """Test that the beam width must be positive."""
        with pytest.raises(ValueError, match="beam"):
            search(padded_video, random_decoder(small_dims, seed=1), beam=0)

    def test_hypothesis_to_sequence(self):
        """Test that the trailing EOS is added once for closed and length-capped hypotheses."""
        assert Hypothesis(tokens=(4, 5, EOS), score=-1.0, finished=True).to_sequence().ids == (BOS, 4, 5, EOS)
        assert Hypothesis(tokens=(4, 5), score=-1.0, finished=False).to_sequence().ids == (BOS, 4, 5, EOS)
