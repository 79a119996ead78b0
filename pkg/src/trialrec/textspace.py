"""The textual latent space: subword skip-gram word vectors, sentence
embedding by averaged token vectors, and cosine similarity.

A token's vector is the mean of its word vector and its hashed character
n-gram vectors, so unseen words still embed through their n-grams.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _sgns, vecio


class TextSpaceError(Exception):
    pass


_TOKEN_RE = re.compile(r"[0-9a-z]+")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_FNV_MASK = (1 << 64) - 1


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def fnv1a(data: str) -> int:
    h = _FNV_OFFSET
    for byte in data.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _FNV_MASK
    return h


def char_ngrams(token: str, nmin: int, nmax: int) -> list[str]:
    """Boundary-marked character n-grams, e.g. ``<asthma>`` yields ``<as`` ..."""
    decorated = f"<{token}>"
    out = []
    for n in range(nmin, nmax + 1):
        for i in range(len(decorated) - n + 1):
            out.append(decorated[i : i + n])
    return out


@dataclass
class TextSpaceParams:
    dim: int = 100
    ngram_min: int = 3
    ngram_max: int = 6
    buckets: int = 2**18
    window: int = 5
    negatives: int = 5
    epochs: int = 12
    lr: float = 0.025
    min_count: int = 1
    seed: int = 0
    subsample: float = 1e-3
    batch_pairs: int = 4096

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


class TextSpace:
    """Immutable after training; safe for concurrent readers."""

    def __init__(
        self,
        params: TextSpaceParams,
        vocab: dict[str, int],
        word_vectors: np.ndarray,
        ngram_rows: dict[int, int],
        ngram_vectors: np.ndarray,
        training_loss: list[float] | None = None,
    ) -> None:
        self.params = params
        self.dim = params.dim
        self.vocab = vocab
        self.word_vectors = word_vectors
        # hashed-bucket table, stored densely for the buckets actually seen
        self.ngram_rows = ngram_rows
        self.ngram_vectors = ngram_vectors
        self.training_loss = training_loss or []

    def _token_rows(self, token: str) -> tuple[int | None, list[int]]:
        word_row = self.vocab.get(token)
        rows = []
        for gram in char_ngrams(token, self.params.ngram_min, self.params.ngram_max):
            row = self.ngram_rows.get(fnv1a(gram) % self.params.buckets)
            if row is not None:
                rows.append(row)
        return word_row, rows

    def token_vector(self, token: str) -> np.ndarray | None:
        """Mean of the word vector and its n-gram vectors; n-grams alone for
        out-of-vocabulary tokens; None if nothing is known about the token."""
        word_row, ngram_idx = self._token_rows(token)
        parts = []
        if word_row is not None:
            parts.append(self.word_vectors[word_row])
        if ngram_idx:
            parts.append(self.ngram_vectors[ngram_idx].sum(axis=0))
        if not parts:
            return None
        n = (1 if word_row is not None else 0) + len(ngram_idx)
        return (np.add.reduce(parts).astype(np.float64)) / n

    def embed(self, text: str) -> np.ndarray:
        """Sentence vector: mean of L2-normalized token vectors, re-normalized.
        Untokenizable text maps to the zero vector."""
        acc = np.zeros(self.dim, dtype=np.float64)
        n = 0
        for token in tokenize(text):
            vec = self.token_vector(token)
            if vec is None:
                continue
            norm = np.linalg.norm(vec)
            if norm == 0:
                continue
            acc += vec / norm
            n += 1
        if n == 0:
            return np.zeros(self.dim, dtype=np.float32)
        acc /= n
        norm = np.linalg.norm(acc)
        if norm == 0:
            return np.zeros(self.dim, dtype=np.float32)
        return (acc / norm).astype(np.float32)

    def save(self, path: str | Path) -> None:
        ids = list(self.vocab)
        matrix = [self.word_vectors[self.vocab[t]] for t in ids]
        bucket_items = sorted(self.ngram_rows.items())
        ids += [f"ng:{bucket}" for bucket, _ in bucket_items]
        matrix += [self.ngram_vectors[row] for _, row in bucket_items]
        vecio.write_vectors(
            path,
            "text",
            ids,
            np.asarray(matrix, dtype=np.float32) if matrix else np.zeros((0, self.dim), np.float32),
            extra_header={"params": self.params.to_dict()},
        )

    @classmethod
    def load(cls, path: str | Path) -> "TextSpace":
        header, ids, matrix = vecio.read_vectors(path)
        if header.get("kind") != "text":
            raise TextSpaceError(f"{path}: not a text vector store")
        params = TextSpaceParams(**header["params"])
        vocab: dict[str, int] = {}
        ngram_rows: dict[int, int] = {}
        word_rows, ngram_mat = [], []
        for i, name in enumerate(ids):
            if name.startswith("ng:"):
                ngram_rows[int(name[3:])] = len(ngram_mat)
                ngram_mat.append(matrix[i])
            else:
                vocab[name] = len(word_rows)
                word_rows.append(matrix[i])
        return cls(
            params,
            vocab,
            np.asarray(word_rows, dtype=np.float32).reshape(len(word_rows), params.dim),
            ngram_rows,
            np.asarray(ngram_mat, dtype=np.float32).reshape(len(ngram_mat), params.dim),
        )


def train_text_space(corpus: list[str], params: TextSpaceParams | None = None) -> TextSpace:
    """Train the textual latent space on raw strings (one entity text each)."""
    params = params or TextSpaceParams()
    if params.dim < 2:
        raise TextSpaceError("dim must be >= 2")
    tokenized = [tokenize(text) for text in corpus]
    counts: dict[str, int] = {}
    for tokens in tokenized:
        for token in tokens:
            counts[token] = counts.get(token, 0) + 1
    kept = sorted(
        (t for t, c in counts.items() if c >= params.min_count),
        key=lambda t: (-counts[t], t),
    )
    if not kept:
        raise TextSpaceError("empty corpus: nothing to train on")
    vocab = {t: i for i, t in enumerate(kept)}

    # dense rows for every n-gram bucket observed in the vocabulary
    ngram_rows: dict[int, int] = {}
    comp_rows: list[int] = []
    offsets = [0]
    n_words = len(vocab)
    for token in kept:
        comp_rows.append(vocab[token])
        for gram in char_ngrams(token, params.ngram_min, params.ngram_max):
            bucket = fnv1a(gram) % params.buckets
            row = ngram_rows.setdefault(bucket, len(ngram_rows))
            comp_rows.append(n_words + row)
        offsets.append(len(comp_rows))

    sequences = [
        np.asarray([vocab[t] for t in tokens if t in vocab], dtype=np.int64)
        for tokens in tokenized
    ]
    sequences = [s for s in sequences if len(s) > 0]
    token_counts = np.asarray([counts[t] for t in kept], dtype=np.float64)

    try:
        w_in, _w_out, losses = _sgns.train_sgns(
            sequences,
            n_tokens=n_words,
            counts=token_counts,
            dim=params.dim,
            window=params.window,
            negatives=params.negatives,
            epochs=params.epochs,
            lr=params.lr,
            seed=params.seed,
            subsample=params.subsample,
            composition=(np.asarray(comp_rows, dtype=np.int64), np.asarray(offsets, dtype=np.int64)),
            n_input_rows=n_words + len(ngram_rows),
            batch_pairs=params.batch_pairs,
        )
    except _sgns.SgnsError as exc:
        raise TextSpaceError(str(exc)) from exc
    if not np.isfinite(w_in).all():
        raise TextSpaceError("training produced non-finite vectors")
    space = TextSpace(
        params,
        vocab,
        w_in[:n_words],
        ngram_rows,
        w_in[n_words:],
        training_loss=losses,
    )
    # remove the corpus-wide common direction so cosine reflects content
    # rather than the anisotropy skip-gram training leaves at this scale
    mean_vec = np.zeros(params.dim, dtype=np.float64)
    for token in vocab:
        mean_vec += space.token_vector(token)
    mean_vec /= max(len(vocab), 1)
    space.word_vectors = space.word_vectors - mean_vec.astype(np.float32)
    space.ngram_vectors = space.ngram_vectors - mean_vec.astype(np.float32)
    return space


def embed_sentence(space: TextSpace, text: str) -> np.ndarray:
    return space.embed(text)


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine in [-1, 1]; zero if either vector is zero."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))
