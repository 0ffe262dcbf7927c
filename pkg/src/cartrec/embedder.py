"""The cart vectorizer: skip-gram with negative sampling over
orders-as-sentences, with subword-composed word vectors.

A word's representation is the mean of its own vocabulary row and all of its
hashed character-n-gram bucket rows, so unseen dish names still land near
their lexical neighbours.  Training is plain SGD on the negative-sampling
objective, gradients written out by hand; updates are applied one sentence
batch at a time, which keeps the maths identical to per-pair descent at the
start of each batch while letting numpy do the heavy lifting.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import OrderLog
from .text import NgramConfig, Vocab, hash_ngram, ngrams, normalize

__all__ = [
    "TrainConfig",
    "EmbeddingModel",
    "EmptyCorpus",
    "EmptyCart",
    "build_corpus",
    "train_embedder",
    "word_vector",
    "name_vector",
    "cart_vector",
    "cart_token_multiset",
    "cosine",
    "pair_loss",
    "pair_gradients",
    "save_embeddings",
    "load_embeddings",
]

_MAGIC = b"FTVE"
_FORMAT_VERSION = 1
_LR_FLOOR = 1e-4  # fraction of the initial rate kept at the end of decay


class EmptyCorpus(ValueError):
    """Training needs at least one sentence with two usable tokens."""


class EmptyCart(ValueError):
    """Cart vectorization needs at least one token."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    learning_rate: float = 0.05
    window_size: int = 5
    negatives: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.negatives < 1:
            raise ValueError("negatives must be >= 1")
        if self.window_size < 1:
            raise ValueError("window_size must be >= 1")


@dataclass(frozen=True, eq=False)
class EmbeddingModel:
    """Trained vectorizer: vocabulary rows followed by n-gram bucket rows."""

    dim: int
    vocab: Vocab
    ngram_config: NgramConfig
    input_matrix: np.ndarray  # (len(vocab) + buckets, dim) float32
    trained_at: datetime | None = None
    corpus_window: tuple[datetime, datetime] | None = None
    loss_curve: tuple[float, ...] = ()
    # per-token vector memo; the matrix is immutable once the model exists,
    # and a dict read/write is GIL-atomic, so concurrent readers are safe
    _token_cache: dict = field(default_factory=dict, repr=False)

    def subword_rows(self, token: str) -> np.ndarray:
        """Matrix row indices composing a token: own row (if in vocab) plus
        one bucket row per n-gram, duplicates kept."""
        rows: list[int] = []
        if token in self.vocab:
            rows.append(self.vocab.index(token))
        offset = len(self.vocab)
        buckets = self.ngram_config.buckets
        rows.extend(offset + hash_ngram(g, buckets) for g in ngrams(token, self.ngram_config))
        return np.asarray(rows, dtype=np.int64)

    def token_vector(self, token: str) -> np.ndarray:
        """Mean of the token's subword rows, memoized per model."""
        vec = self._token_cache.get(token)
        if vec is None:
            vec = self.input_matrix[self.subword_rows(token)].mean(axis=0)
            self._token_cache[token] = vec
        return vec


def build_corpus(log: OrderLog, expand_qty: bool = True) -> list[list[str]]:
    """One token sentence per order.

    Lines are iterated in dish-id order (orders are sets, so any fixed order
    works and sorting is reproducible); each line contributes its normalized
    name tokens, repeated qty times unless ``expand_qty`` is off.
    """
    sentences: list[list[str]] = []
    for order in log.orders:
        tokens: list[str] = []
        for line in sorted(order.lines, key=lambda ln: ln.dish_id):
            tokens.extend(normalize(line.name) * (line.qty if expand_qty else 1))
        sentences.append(tokens)
    return sentences


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


def pair_loss(
    input_matrix: np.ndarray,
    output_matrix: np.ndarray,
    center_rows: Sequence[int],
    context_idx: int,
    negative_idxs: Sequence[int],
) -> float:
    """Negative-sampling objective for one (center, context, negatives) step.

    The center is represented by the mean of its subword rows; the loss is
    -log sigma(u_ctx . h) - sum_neg log sigma(-u_neg . h).
    """
    rows = np.asarray(center_rows, dtype=np.int64)
    h = input_matrix[rows].mean(axis=0)
    idx = np.concatenate(([context_idx], np.asarray(negative_idxs, dtype=np.int64)))
    logits = output_matrix[idx] @ h
    sign = np.ones(len(idx))
    sign[1:] = -1.0
    # -log sigma(s * l) = log(1 + exp(-s * l)), computed stably
    return float(np.logaddexp(0.0, -sign * logits).sum())


def pair_gradients(
    input_matrix: np.ndarray,
    output_matrix: np.ndarray,
    center_rows: Sequence[int],
    context_idx: int,
    negative_idxs: Sequence[int],
) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss plus analytic gradients of pair_loss w.r.t. both matrices.

    Gradients come back as dense zero-filled matrices; rows listed twice in
    center_rows (duplicate n-grams) accumulate twice, matching the mean
    composition.
    """
    rows = np.asarray(center_rows, dtype=np.int64)
    h = input_matrix[rows].mean(axis=0)
    idx = np.concatenate(([context_idx], np.asarray(negative_idxs, dtype=np.int64)))
    out = output_matrix[idx]
    logits = out @ h
    labels = np.zeros(len(idx))
    labels[0] = 1.0
    sign = np.where(labels == 1.0, 1.0, -1.0)
    loss = float(np.logaddexp(0.0, -sign * logits).sum())

    g = _sigmoid(logits) - labels
    grad_out = np.zeros_like(output_matrix)
    np.add.at(grad_out, idx, g[:, None] * h[None, :])
    gh = g @ out
    grad_in = np.zeros_like(input_matrix)
    np.add.at(grad_in, rows, np.tile(gh / len(rows), (len(rows), 1)))
    return loss, grad_in, grad_out


def _apply_sentence_batch(
    input_matrix: np.ndarray,
    output_matrix: np.ndarray,
    rows_by_word: list[np.ndarray],
    centers: np.ndarray,
    contexts: np.ndarray,
    negatives: np.ndarray,
    lr: float,
) -> float:
    """One mini-batch SGD step over a sentence's pairs; returns summed loss.

    All gradients are evaluated at the incoming parameters and applied
    together, so the step equals the sum of per-pair gradients.  Negatives
    that collide with their pair's positive context are skipped.
    """
    uniq, inv = np.unique(centers, return_inverse=True)
    reps = np.stack([input_matrix[rows_by_word[w]].mean(axis=0) for w in uniq])
    h = reps[inv]  # (P, dim)

    out_idx = np.concatenate([contexts[:, None], negatives], axis=1)  # (P, 1+neg)
    out = output_matrix[out_idx]  # (P, 1+neg, dim)
    logits = np.einsum("pd,pnd->pn", h, out)

    labels = np.zeros_like(logits)
    labels[:, 0] = 1.0
    mask = np.ones(logits.shape, dtype=bool)
    mask[:, 1:] = negatives != contexts[:, None]

    sign = np.where(labels == 1.0, 1.0, -1.0)
    loss = float((np.logaddexp(0.0, -sign * logits) * mask).sum())

    g = (_sigmoid(logits) - labels) * mask * lr
    np.subtract.at(
        output_matrix,
        out_idx.ravel(),
        (g[:, :, None] * h[:, None, :]).reshape(-1, input_matrix.shape[1]),
    )
    gh = np.einsum("pn,pnd->pd", g, out)
    acc = np.zeros_like(reps)
    np.add.at(acc, inv, gh)
    for u, w in enumerate(uniq):
        rows = rows_by_word[w]
        np.subtract.at(input_matrix, rows, acc[u] / len(rows))
    return loss


def train_embedder(
    corpus: list[list[str]],
    ngram_config: NgramConfig | None = None,
    train_config: TrainConfig | None = None,
    dim: int = 100,
    min_count: int = 1,
) -> EmbeddingModel:
    """Train the subword skip-gram vectorizer on token sentences.

    For every in-window (center, context) pair one positive and ``negatives``
    negative updates are performed, negatives drawn from the unigram
    distribution raised to 3/4.  The learning rate decays linearly to (nearly)
    zero over all scheduled pairs.  Single-threaded and deterministic for a
    fixed seed.
    """
    if dim < 2:
        raise ValueError("dim must be >= 2")
    cfg = train_config or TrainConfig()
    ncfg = ngram_config or NgramConfig()
    vocab = Vocab.build(corpus, min_count=min_count)

    sentences: list[np.ndarray] = []
    for sentence in corpus:
        idxs = [vocab.index(t) for t in sentence if t in vocab]
        if len(idxs) >= 2:
            sentences.append(np.asarray(idxs, dtype=np.int64))
    if not sentences:
        raise EmptyCorpus("no sentence has two or more usable tokens")

    n_words = len(vocab)
    n_rows = n_words + ncfg.buckets
    rng = np.random.default_rng(cfg.seed)
    input_matrix = ((rng.random((n_rows, dim)) - 0.5) / dim).astype(np.float32)
    output_matrix = np.zeros((n_words, dim), dtype=np.float32)

    probe = EmbeddingModel(dim=dim, vocab=vocab, ngram_config=ncfg, input_matrix=input_matrix)
    rows_by_word = [probe.subword_rows(vocab.word(i)) for i in range(n_words)]

    counts = np.array([vocab.counts[vocab.word(i)] for i in range(n_words)], dtype=np.float64)
    noise = counts**0.75
    noise_cdf = np.cumsum(noise)
    noise_cdf /= noise_cdf[-1]

    # (centers, contexts) per sentence are fixed across epochs; cache them
    pair_cache: list[tuple[np.ndarray, np.ndarray]] = []
    total_pairs = 0
    for sent in sentences:
        centers: list[int] = []
        contexts: list[int] = []
        length = len(sent)
        for i in range(length):
            lo = max(0, i - cfg.window_size)
            hi = min(length, i + cfg.window_size + 1)
            for j in range(lo, hi):
                if j != i:
                    centers.append(sent[i])
                    contexts.append(sent[j])
        pair_cache.append(
            (np.asarray(centers, dtype=np.int64), np.asarray(contexts, dtype=np.int64))
        )
        total_pairs += len(centers)

    schedule_total = cfg.epochs * total_pairs
    done = 0
    losses: list[float] = []
    for _epoch in range(cfg.epochs):
        epoch_loss = 0.0
        for (centers, contexts) in pair_cache:
            n_pairs = len(centers)
            if n_pairs == 0:
                continue
            lr = cfg.learning_rate * max(1.0 - done / schedule_total, _LR_FLOOR)
            negs = np.searchsorted(
                noise_cdf, rng.random((n_pairs, cfg.negatives))
            ).astype(np.int64)
            epoch_loss += _apply_sentence_batch(
                input_matrix, output_matrix, rows_by_word, centers, contexts, negs, lr
            )
            done += n_pairs
        losses.append(epoch_loss / total_pairs)

    return EmbeddingModel(
        dim=dim,
        vocab=vocab,
        ngram_config=ncfg,
        input_matrix=input_matrix,
        loss_curve=tuple(losses),
    )


def word_vector(model: EmbeddingModel, word: str) -> np.ndarray:
    """Vector for a single word: mean of its subword rows.

    Out-of-vocabulary words fall back to the mean of their n-gram bucket rows
    alone; this never fails for a word that normalizes to one token.
    """
    tokens = normalize(word)
    if not tokens:
        raise ValueError("word empty after normalization")
    if len(tokens) > 1:
        raise ValueError(f"{word!r} normalizes to several tokens; use name_vector")
    return model.token_vector(tokens[0])


def name_vector(model: EmbeddingModel, name: str) -> np.ndarray:
    """Vector for a (possibly multi-word) dish name: mean over its tokens."""
    tokens = normalize(name)
    if not tokens:
        raise ValueError("name empty after normalization")
    return np.mean([model.token_vector(t) for t in tokens], axis=0)


def cart_token_multiset(cart: Sequence[tuple[str, int]]) -> list[str]:
    """Canonical token multiset of a cart: sorted, with counts reduced by
    their gcd.

    Sorting makes the float mean invariant under line permutation and the
    gcd reduction makes it invariant under uniform quantity scaling, both
    bit-exactly (the mean is mathematically unchanged either way).
    """
    counts: dict[str, int] = {}
    for name, qty in cart:
        if qty < 1:
            raise ValueError(f"cart qty must be >= 1, got {qty} for {name!r}")
        for token in normalize(name):
            counts[token] = counts.get(token, 0) + qty
    if not counts:
        raise EmptyCart("cart has no usable tokens")
    divisor = math.gcd(*counts.values())
    tokens: list[str] = []
    for token in sorted(counts):
        tokens.extend([token] * (counts[token] // divisor))
    return tokens


def cart_vector(model: EmbeddingModel, cart: Sequence[tuple[str, int]]) -> np.ndarray:
    """Vector for a cart: mean of word vectors over the token multiset,
    each dish's tokens counted qty times."""
    tokens = cart_token_multiset(cart)
    return np.mean([model.token_vector(t) for t in tokens], axis=0)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def save_embeddings(model: EmbeddingModel, path: str | Path) -> None:
    """Write the model in the little-endian FTVE binary layout."""
    vocab = model.vocab
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(
            struct.pack(
                "<IIIIII",
                _FORMAT_VERSION,
                model.dim,
                len(vocab),
                model.ngram_config.buckets,
                model.ngram_config.n_min,
                model.ngram_config.n_max,
            )
        )
        for i in range(len(vocab)):
            word = vocab.word(i)
            encoded = word.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<Q", vocab.counts[word]))
        matrix = np.ascontiguousarray(model.input_matrix, dtype="<f4")
        expected = (len(vocab) + model.ngram_config.buckets, model.dim)
        if matrix.shape != expected:
            raise ValueError(f"matrix shape {matrix.shape} != expected {expected}")
        fh.write(matrix.tobytes())


def load_embeddings(path: str | Path) -> EmbeddingModel:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not an embeddings file")
        version, dim, vocab_size, buckets, n_min, n_max = struct.unpack(
            "<IIIIII", fh.read(24)
        )
        if version != _FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported format version {version}")
        words: dict[str, int] = {}
        counts: dict[str, int] = {}
        for i in range(vocab_size):
            (length,) = struct.unpack("<I", fh.read(4))
            word = fh.read(length).decode("utf-8")
            (count,) = struct.unpack("<Q", fh.read(8))
            words[word] = i
            counts[word] = count
        vocab = Vocab(words=words, counts=counts)
        n_rows = vocab_size + buckets
        data = fh.read(n_rows * dim * 4)
        matrix = np.frombuffer(data, dtype="<f4").reshape(n_rows, dim).copy()
    return EmbeddingModel(
        dim=dim,
        vocab=vocab,
        ngram_config=NgramConfig(n_min=n_min, n_max=n_max, buckets=buckets),
        input_matrix=matrix,
    )


def with_metadata(
    model: EmbeddingModel,
    trained_at: datetime | None,
    corpus_window: tuple[datetime, datetime] | None,
) -> EmbeddingModel:
    return replace(model, trained_at=trained_at, corpus_window=corpus_window)
