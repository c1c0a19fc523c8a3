"""
Caption Evaluation for RecNet

This module scores generated captions against reference captions:
- Corpus-level BLEU-4 with closest-reference brevity penalty
- ROUGE-L (LCS F-measure, beta 1.2)
- CIDEr-D with per-video scores

Usage:
    from src.evaluation import evaluate

    report = evaluate("captions.jsonl", "data/captions.jsonl")
    print(report.to_dict())
"""

from src.evaluation.metrics import (
    CorpusEntry,
    EvaluationError,
    MetricReport,
    bleu4,
    build_corpus,
    cider,
    cider_per_video,
    evaluate,
    rouge_l,
    score_corpus,
)

__all__ = [
    "CorpusEntry",
    "EvaluationError",
    "MetricReport",
    "bleu4",
    "build_corpus",
    "cider",
    "cider_per_video",
    "evaluate",
    "rouge_l",
    "score_corpus",
]
