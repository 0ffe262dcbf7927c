"""Dish-name tokenization and the subword machinery behind the vectorizer.

Dish names are short, noisy strings ("Cheeseburger XL", "Кола 0,5").  They are
normalized into lowercase tokens, split into boundary-marked character n-grams,
and the n-grams are hashed into a fixed bucket space so unseen names still map
to trained rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = [
    "NgramConfig",
    "Vocab",
    "normalize",
    "ngrams",
    "hash_ngram",
]

_FNV_OFFSET = 2166136261
_FNV_PRIME = 16777619
_U32 = 0xFFFFFFFF


def normalize(text: str) -> list[str]:
    """Lowercase, replace punctuation with spaces, split on whitespace.

    Works on any script (alphanumeric test is Unicode-aware); digits are kept
    as tokens because sizes like "0,5" carry meaning on menus.  Returns a
    possibly-empty token list.
    """
    lowered = text.lower()
    cleaned = "".join(ch if ch.isalnum() else " " for ch in lowered)
    return cleaned.split()


def ngrams(word: str, config: "NgramConfig") -> list[str]:
    """All character n-grams of ``<word>`` for n in [n_min, n_max].

    The word is wrapped in '<' and '>' boundary markers before extraction.
    Grams are emitted shortest length first, left to right within a length,
    counted over Unicode scalar values; duplicates are kept.
    """
    if not word:
        raise ValueError("ngrams requires a non-empty word")
    decorated = f"<{word}>"
    out: list[str] = []
    for n in range(config.n_min, config.n_max + 1):
        for i in range(len(decorated) - n + 1):
            out.append(decorated[i : i + n])
    return out


def hash_ngram(gram: str, buckets: int) -> int:
    """Bucket index of a gram: 32-bit FNV-1a over its UTF-8 bytes, mod buckets.

    FNV-1a is simple and bit-exact across platforms, which keeps serialized
    models portable.
    """
    if buckets < 1:
        raise ValueError("buckets must be >= 1")
    h = _FNV_OFFSET
    for byte in gram.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & _U32
    return h % buckets


@dataclass(frozen=True)
class NgramConfig:
    """N-gram extraction parameters; defaults follow the small-menu setting."""

    n_min: int = 3
    n_max: int = 6
    buckets: int = 1 << 16

    def __post_init__(self) -> None:
        if self.n_min < 1:
            raise ValueError("n_min must be >= 1")
        if self.n_max < self.n_min:
            raise ValueError("n_max must be >= n_min")
        if self.buckets < 1:
            raise ValueError("buckets must be >= 1")


@dataclass(frozen=True)
class Vocab:
    """Word table built from a token corpus.

    Indices are contiguous 0..len-1, assigned by descending corpus count with
    lexicographic tie-break, so rebuilding from the same corpus is
    reproducible.  Words below ``min_count`` are dropped.
    """

    words: dict[str, int]
    counts: dict[str, int]
    min_count: int = 1
    _index_to_word: tuple[str, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        ordered = sorted(self.words, key=self.words.__getitem__)
        if [self.words[w] for w in ordered] != list(range(len(ordered))):
            raise ValueError("vocab indices must be contiguous from 0")
        object.__setattr__(self, "_index_to_word", tuple(ordered))

    @classmethod
    def build(cls, sentences: list[list[str]], min_count: int = 1) -> "Vocab":
        counts: dict[str, int] = {}
        for sentence in sentences:
            for token in sentence:
                counts[token] = counts.get(token, 0) + 1
        kept = {w: c for w, c in counts.items() if c >= min_count}
        ranked = sorted(kept, key=lambda w: (-kept[w], w))
        return cls(
            words={w: i for i, w in enumerate(ranked)},
            counts=kept,
            min_count=min_count,
        )

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.words

    def index(self, word: str) -> int:
        return self.words[word]

    def word(self, index: int) -> str:
        return self._index_to_word[index]
