"""
Caption Metrics for RecNet

Corpus-level BLEU-4, ROUGE-L and CIDEr-D over tokenized captions.

A corpus maps each video id to one candidate and one or more references.
Sums go through math.fsum, so scores do not depend on the order of the
videos or of the references within a video.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Mapping, Sequence, Tuple, Union

from src.data.errors import DataError
from src.data.io import read_caption_file, read_candidates_file
from src.data.tokenizer import tokenize

logger = logging.getLogger(__name__)

MAX_NGRAM = 4
ROUGE_BETA = 1.2
CIDER_SIGMA = 6.0
CIDER_SCALE = 10.0

Tokens = Tuple[str, ...]


class EvaluationError(Exception):
    """Raised when a corpus cannot be scored"""
    pass


@dataclass(frozen=True)
class CorpusEntry:
    """
    One scored video.

    Attributes:
        candidate: Generated caption tokens (may be empty)
        references: Ground-truth token lists, at least one
    """

    candidate: Tokens
    references: Tuple[Tokens, ...]

    def __post_init__(self):
        object.__setattr__(self, "candidate", tuple(self.candidate))
        object.__setattr__(self, "references", tuple(tuple(ref) for ref in self.references))
        if not self.references:
            raise EvaluationError("Every corpus entry needs at least one reference")


EvaluationCorpus = Mapping[str, CorpusEntry]


@dataclass(frozen=True)
class MetricReport:
    bleu4: float
    rougeL: float
    cider: float
    per_video_cider: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        return {
            "bleu4": self.bleu4,
            "rougeL": self.rougeL,
            "cider": self.cider,
            "per_video_cider": dict(sorted(self.per_video_cider.items())),
        }


def ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    """Counts of the n-grams of exactly length n."""
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _require_entries(corpus: EvaluationCorpus) -> None:
    if not corpus:
        raise EvaluationError("empty corpus")


# BLEU

def _closest_length(candidate_length: int, references: Sequence[Tokens]) -> int:
    # Ties go to the shorter reference
    return min((abs(len(ref) - candidate_length), len(ref)) for ref in references)[1]


def bleu4(corpus: EvaluationCorpus) -> float:
    """
    Corpus-level BLEU with n = 1..4, uniform weights and no smoothing.

    Clipped n-gram matches and candidate n-gram totals are summed over the
    corpus before the precisions are formed. Any zero precision makes the
    score 0.0.

    Raises:
        EvaluationError: If the corpus is empty
    """
    _require_entries(corpus)

    matches = [0] * MAX_NGRAM
    totals = [0] * MAX_NGRAM
    candidate_length = 0
    reference_length = 0

    for entry in corpus.values():
        candidate_length += len(entry.candidate)
        reference_length += _closest_length(len(entry.candidate), entry.references)

        for n in range(1, MAX_NGRAM + 1):
            counts = ngram_counts(entry.candidate, n)
            max_ref = Counter()
            for ref in entry.references:
                max_ref |= ngram_counts(ref, n)
            matches[n - 1] += sum(min(count, max_ref[gram]) for gram, count in counts.items())
            totals[n - 1] += sum(counts.values())

    if any(total == 0 for total in totals) or any(match == 0 for match in matches):
        return 0.0

    log_precision = math.fsum(math.log(m / t) for m, t in zip(matches, totals)) / MAX_NGRAM
    if candidate_length > reference_length:
        brevity = 0.0
    else:
        brevity = 1.0 - reference_length / candidate_length

    return math.exp(log_precision + brevity)


# ROUGE-L

def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Longest common subsequence length by dynamic programming."""
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for token in a:
        current = [0]
        for j, other in enumerate(b, start=1):
            current.append(previous[j - 1] + 1 if token == other else max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def rouge_l_sentence(candidate: Sequence[str], reference: Sequence[str], beta: float = ROUGE_BETA) -> float:
    lcs = lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    precision = lcs / len(candidate)
    recall = lcs / len(reference)
    return ((1.0 + beta ** 2) * precision * recall) / (recall + beta ** 2 * precision)


def rouge_l(corpus: EvaluationCorpus) -> float:
    """
    Mean over videos of the best LCS F-measure (beta = 1.2) over references.

    Raises:
        EvaluationError: If the corpus is empty
    """
    _require_entries(corpus)
    scores = [
        max(rouge_l_sentence(entry.candidate, ref) for ref in entry.references)
        for entry in corpus.values()
    ]
    return math.fsum(scores) / len(scores)


# CIDEr-D

def _document_frequency(corpus: EvaluationCorpus) -> Counter:
    frequency: Counter = Counter()
    for entry in corpus.values():
        seen = set()
        for ref in entry.references:
            for n in range(1, MAX_NGRAM + 1):
                seen.update(ngram_counts(ref, n))
        frequency.update(seen)
    return frequency


class _CiderScorer:
    """TF-IDF n-gram vectors with idf = log(N / (1 + df)) over the reference sets."""

    def __init__(self, corpus: EvaluationCorpus):
        if len(corpus) < 2:
            raise EvaluationError(f"IDF undefined for a corpus of {len(corpus)} video(s); need at least 2")
        self.log_videos = math.log(float(len(corpus)))
        self.frequency = _document_frequency(corpus)

    def idf(self, gram: Tokens) -> float:
        return self.log_videos - math.log(1.0 + self.frequency[gram])

    def norm(self, counts: Counter) -> float:
        return math.sqrt(math.fsum((count * self.idf(gram)) ** 2 for gram, count in counts.items()))

    def similarity(self, candidate: Tokens, reference: Tokens, n: int) -> float:
        hyp = ngram_counts(candidate, n)
        ref = ngram_counts(reference, n)
        hyp_norm, ref_norm = self.norm(hyp), self.norm(ref)
        if hyp_norm == 0.0 or ref_norm == 0.0:
            return 0.0

        # Candidate counts are clipped to the reference counts
        overlap = math.fsum(
            min(count, ref[gram]) * ref[gram] * self.idf(gram) ** 2
            for gram, count in hyp.items() if gram in ref
        )
        delta = float(len(candidate) - len(reference))
        penalty = math.exp(-(delta ** 2) / (2.0 * CIDER_SIGMA ** 2))
        return overlap / (hyp_norm * ref_norm) * penalty

    def score(self, entry: CorpusEntry) -> float:
        per_n = [
            math.fsum(self.similarity(entry.candidate, ref, n) for ref in entry.references) / len(entry.references)
            for n in range(1, MAX_NGRAM + 1)
        ]
        return CIDER_SCALE * math.fsum(per_n) / MAX_NGRAM


def cider_per_video(corpus: EvaluationCorpus) -> Dict[str, float]:
    """
    CIDEr-D of every video.

    Raises:
        EvaluationError: If the corpus has fewer than 2 videos ("IDF undefined")
    """
    scorer = _CiderScorer(corpus)
    return {video_id: scorer.score(entry) for video_id, entry in corpus.items()}


def cider(corpus: EvaluationCorpus) -> float:
    """Corpus CIDEr-D: the mean of the per-video scores."""
    scores = cider_per_video(corpus)
    return math.fsum(scores.values()) / len(scores)


def score_corpus(corpus: EvaluationCorpus) -> MetricReport:
    per_video = cider_per_video(corpus)
    return MetricReport(
        bleu4=bleu4(corpus),
        rougeL=rouge_l(corpus),
        cider=math.fsum(per_video.values()) / len(per_video),
        per_video_cider=per_video
    )


# Files

def candidate_tokens(caption: str) -> Tokens:
    """Tokenize a generated caption; an empty caption scores as no words."""
    try:
        return tuple(tokenize(caption))
    except DataError:
        return ()


def build_corpus(candidates: Mapping[str, str], references: Mapping[str, Sequence[str]]) -> Dict[str, CorpusEntry]:
    """
    Pair candidate captions with reference captions by video id.

    Raises:
        EvaluationError: If the id sets differ; the message lists the missing ids
    """
    missing_candidates = sorted(set(references) - set(candidates))
    missing_references = sorted(set(candidates) - set(references))
    if missing_candidates or missing_references:
        parts = []
        if missing_candidates:
            parts.append(f"missing candidates for {', '.join(missing_candidates)}")
        if missing_references:
            parts.append(f"missing references for {', '.join(missing_references)}")
        raise EvaluationError("Video ids do not match: " + "; ".join(parts))

    corpus: Dict[str, CorpusEntry] = {}
    for video_id, caption in candidates.items():
        try:
            refs = tuple(tuple(tokenize(text)) for text in references[video_id])
        except DataError as e:
            raise EvaluationError(f"Reference of {video_id!r}: {e}") from e
        corpus[video_id] = CorpusEntry(candidate=candidate_tokens(caption), references=refs)
    return corpus


def evaluate(candidates_path: Union[str, Path], references_path: Union[str, Path]) -> MetricReport:
    """
    Score a candidates file against a references file.

    Args:
        candidates_path: JSON-lines {"video_id", "caption"}
        references_path: JSON-lines {"video_id", "captions"}

    Returns:
        MetricReport over the aligned corpus

    Raises:
        EvaluationError: On id mismatch or an unscorable corpus
        DataError: If a file cannot be parsed
    """
    candidates = read_candidates_file(candidates_path)
    references = read_caption_file(references_path)
    corpus = build_corpus(candidates, references)

    report = score_corpus(corpus)
    logger.info(
        f"Evaluated {len(corpus)} videos: BLEU-4 {report.bleu4:.4f}, "
        f"ROUGE-L {report.rougeL:.4f}, CIDEr {report.cider:.4f}"
    )
    return report
