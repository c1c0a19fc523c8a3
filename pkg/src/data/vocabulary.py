"""
Vocabulary and Token Sequences for RecNet

Word/id maps with four reserved ids (PAD, BOS, EOS, UNK) ahead of the
corpus words, which are ordered by descending frequency and then
lexicographically.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

from src.data.errors import DataError
from src.data.tokenizer import MAX_CAPTION_TOKENS
from src.utils.atomic_io import atomic_write_text

logger = logging.getLogger(__name__)

PAD = 0
BOS = 1
EOS = 2
UNK = 3
RESERVED_TOKENS = ("<pad>", "<bos>", "<eos>", "<unk>")


@dataclass(frozen=True)
class TokenSequence:
    """
    A caption as vocabulary ids: BOS, the words, then exactly one EOS.
    """

    ids: Tuple[int, ...]

    def __post_init__(self):
        ids = tuple(int(i) for i in self.ids)
        object.__setattr__(self, "ids", ids)

        if len(ids) < 2 or ids[0] != BOS or ids[-1] != EOS:
            raise DataError(f"Token sequence must start with BOS and end with EOS: {ids}")
        if EOS in ids[1:-1] or BOS in ids[1:]:
            raise DataError(f"Token sequence has markers inside the caption: {ids}")
        if PAD in ids:
            raise DataError(f"Token sequence contains PAD: {ids}")
        if len(ids) - 2 > MAX_CAPTION_TOKENS:
            raise DataError(f"Token sequence longer than {MAX_CAPTION_TOKENS} words: {len(ids) - 2}")

    @classmethod
    def from_words(cls, word_ids: Sequence[int]) -> "TokenSequence":
        return cls((BOS, *word_ids, EOS))

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def words(self) -> Tuple[int, ...]:
        """Word ids without the markers."""
        return self.ids[1:-1]

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class Vocabulary:
    """
    Mutually inverse word/id maps.

    Attributes:
        words: Corpus words in id order; word i gets id i + 4
    """

    words: Tuple[str, ...]
    _word_to_id: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        words = tuple(self.words)
        object.__setattr__(self, "words", words)

        if len(set(words)) != len(words):
            duplicates = sorted(word for word, count in Counter(words).items() if count > 1)
            raise DataError(f"Duplicate vocabulary words: {duplicates}")

        clashes = sorted(set(words) & set(RESERVED_TOKENS))
        if clashes:
            raise DataError(f"Vocabulary words clash with reserved tokens: {clashes}")

        mapping = {token: index for index, token in enumerate(RESERVED_TOKENS)}
        mapping.update({word: index + len(RESERVED_TOKENS) for index, word in enumerate(words)})
        object.__setattr__(self, "_word_to_id", mapping)

    @property
    def size(self) -> int:
        return len(RESERVED_TOKENS) + len(self.words)

    def __len__(self) -> int:
        return self.size

    def __contains__(self, word: str) -> bool:
        return word in self._word_to_id and word not in RESERVED_TOKENS

    def word_to_id(self, word: str) -> int:
        return self._word_to_id.get(word, UNK)

    def id_to_word(self, token_id: int) -> str:
        if not 0 <= token_id < self.size:
            raise DataError(f"Token id {token_id} out of range for vocabulary of size {self.size}")
        if token_id < len(RESERVED_TOKENS):
            return RESERVED_TOKENS[token_id]
        return self.words[token_id - len(RESERVED_TOKENS)]

    def encode(self, tokens: Sequence[str]) -> TokenSequence:
        """Map tokens to a BOS/EOS-delimited sequence; unknown words become UNK."""
        return TokenSequence.from_words([self.word_to_id(token) for token in tokens])

    def decode(self, sequence: Union[TokenSequence, Sequence[int]]) -> List[str]:
        """
        Map ids back to words, dropping PAD and BOS and stopping at the first EOS.
        """
        ids = sequence.ids if isinstance(sequence, TokenSequence) else sequence
        tokens = []
        for token_id in ids:
            token_id = int(token_id)
            if token_id == EOS:
                break
            if token_id in (PAD, BOS):
                continue
            tokens.append(self.id_to_word(token_id))
        return tokens

    def save(self, path: Union[str, Path]) -> None:
        """Write one word per line; the line index plus 4 is the id."""
        atomic_write_text(path, "".join(f"{word}\n" for word in self.words))
        logger.info(f"Wrote vocabulary of {self.size} ids to {path}")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Vocabulary":
        path = Path(path)
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except OSError as e:
            raise DataError(f"Cannot read vocabulary file {path}: {e}") from e

        for number, line in enumerate(lines, start=1):
            if not line or line != line.strip() or len(line.split()) != 1:
                raise DataError(f"{path}:{number}: vocabulary lines must hold exactly one word")

        return cls(tuple(lines))


def build_vocabulary(corpus: Iterable[Sequence[str]], min_count: int = 1) -> Vocabulary:
    """
    Build a vocabulary from tokenized captions.

    Args:
        corpus: Token lists
        min_count: Minimum frequency for a word to get its own id

    Returns:
        Vocabulary with words ordered by descending frequency, ties broken
        lexicographically

    Raises:
        DataError: If the corpus holds no tokens
        ValueError: If min_count < 1
    """
    if min_count < 1:
        raise ValueError(f"min_count must be at least 1, got {min_count}")

    counts = Counter(token for tokens in corpus for token in tokens)
    if not counts:
        raise DataError("empty corpus: cannot build a vocabulary")

    kept = sorted(
        (word for word, count in counts.items() if count >= min_count),
        key=lambda word: (-counts[word], word)
    )

    logger.info(f"Built vocabulary: {len(kept)} of {len(counts)} distinct words kept (min_count={min_count})")
    return Vocabulary(tuple(kept))
