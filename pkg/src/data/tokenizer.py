"""
Caption Tokenizer for RecNet

Removes ASCII punctuation, lowercases and splits on whitespace. The same
tokenizer serves training captions, candidate captions and references.
"""

import logging
import string
from typing import List

from src.data.errors import DataError

logger = logging.getLogger(__name__)

MAX_CAPTION_TOKENS = 30

_PUNCTUATION = str.maketrans("", "", string.punctuation)


def tokenize(sentence: str, max_tokens: int = MAX_CAPTION_TOKENS) -> List[str]:
    """
    Split a caption into lowercase word tokens.

    Args:
        sentence: Raw caption text
        max_tokens: Longer captions are truncated to this many tokens

    Returns:
        List of tokens

    Raises:
        DataError: If nothing remains after cleaning ("empty caption")
    """
    tokens = sentence.translate(_PUNCTUATION).lower().split()

    if not tokens:
        raise DataError(f"empty caption: {sentence!r}")

    if len(tokens) > max_tokens:
        logger.debug(f"Truncating caption of {len(tokens)} tokens to {max_tokens}")
        tokens = tokens[:max_tokens]

    return tokens


def detokenize(tokens: List[str]) -> str:
    return " ".join(tokens)
