"""Reading, subsetting and centering pretrained dense word vectors.

Two line-oriented text formats are supported:

* ``glove``: one ``word v1 ... vd`` record per line.
* ``word2vec``: the same records preceded by an ``N d`` header line.

Fields are separated by any run of spaces or tabs. The first field is the
token and may contain any non-whitespace characters; case is preserved.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from splift.errors import BoundsError, ContractError, ParseError

FORMATS = ("glove", "word2vec")


class Vocabulary:
    """Ordered list of distinct tokens with a token -> row lookup."""

    __slots__ = ("_words", "_index")

    def __init__(self, words: Iterable[str]):
        words = tuple(words)
        index = {}
        for i, w in enumerate(words):
            if w in index:
                raise ContractError(f"duplicate word {w!r} in vocabulary")
            index[w] = i
        self._words = words
        self._index = index

    @property
    def words(self) -> tuple:
        return self._words

    @property
    def index(self) -> Mapping[str, int]:
        return self._index

    def __len__(self):
        return len(self._words)

    def __iter__(self):
        return iter(self._words)

    def __contains__(self, word):
        return word in self._index

    def __getitem__(self, i):
        return self._words[i]

    def __eq__(self, other):
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self._words == other._words

    def __hash__(self):
        return hash(self._words)

    def __repr__(self):
        return f"Vocabulary(n={len(self)})"

    def get(self, word, default=None):
        return self._index.get(word, default)


def _column_tolerance(matrix):
    return 1e-9 * (float(np.max(np.abs(matrix))) + 1.0) if matrix.size else 1e-9


@dataclass(frozen=True, eq=False)
class DenseEmbedding:
    """An ``N x d`` float64 matrix of word vectors plus its vocabulary.

    The matrix is stored read-only; derived embeddings are new objects.
    """

    vocab: Vocabulary
    matrix: np.ndarray
    centered: bool = False

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64, copy=True)
        if m.ndim != 2 or m.shape[1] < 1:
            raise ContractError(f"embedding matrix must be N x d with d >= 1, got shape {m.shape}")
        if m.shape[0] != len(self.vocab):
            raise ContractError(
                f"vocabulary has {len(self.vocab)} words but matrix has {m.shape[0]} rows"
            )
        if not np.all(np.isfinite(m)):
            raise ContractError("embedding contains non-finite values")
        if self.centered and m.shape[0]:
            means = np.abs(m.mean(axis=0))
            if np.any(means > _column_tolerance(m)):
                raise ContractError("embedding flagged as centered but column means are not zero")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n_words(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self):
        return self.n_words


def _split(line):
    return line.split()


def parse_embedding_text(stream: TextIO | Iterable[str], format: str = "glove") -> DenseEmbedding:
    """Parse a glove or word2vec text stream into an uncentered embedding.

    Row order follows the file. The dimension is taken from the first data
    line; any later line with a different number of values is rejected.

    Raises
    ------
    ParseError
        On ragged rows, non-numeric or non-finite values, duplicate tokens,
        or a word2vec header that disagrees with the body.
    """
    if format not in FORMATS:
        raise ContractError(f"unknown embedding format {format!r}; expected one of {FORMATS}")

    header = None
    words: list[str] = []
    rows: list[list[float]] = []
    seen: dict[str, int] = {}
    dim = None

    for lineno, raw in enumerate(stream, start=1):
        fields = _split(raw)
        if not fields:
            continue
        if format == "word2vec" and header is None:
            if len(fields) != 2:
                raise ParseError("word2vec header must be 'N d'", lineno)
            try:
                header = (int(fields[0]), int(fields[1]))
            except ValueError:
                raise ParseError(f"word2vec header is not two integers: {raw.strip()!r}", lineno)
            if header[0] < 0 or header[1] < 1:
                raise ParseError(f"invalid word2vec header {header}", lineno)
            continue

        word, values = fields[0], fields[1:]
        if dim is None:
            if not values:
                raise ParseError(f"word {word!r} has no vector values", lineno)
            dim = len(values)
        elif len(values) != dim:
            raise ParseError(
                f"ragged row: word {word!r} has {len(values)} values, expected {dim}", lineno
            )
        try:
            row = [float(v) for v in values]
        except ValueError as exc:
            raise ParseError(f"non-numeric value for word {word!r}: {exc}", lineno)
        if not all(math.isfinite(v) for v in row):
            raise ParseError(f"non-finite value for word {word!r}", lineno)
        if word in seen:
            raise ParseError(f"duplicate word {word!r} (first seen on line {seen[word]})", lineno)
        seen[word] = lineno
        words.append(word)
        rows.append(row)

    if format == "word2vec":
        if header is None:
            raise ParseError("missing word2vec header", 1)
        n, d = header
        if n != len(words):
            raise ParseError(f"word2vec header declares {n} words but body has {len(words)}")
        if words and d != dim:
            raise ParseError(f"word2vec header declares dimension {d} but body has {dim}")
    if not words:
        raise ParseError("no word vectors found")

    matrix = np.array(rows, dtype=np.float64)
    return DenseEmbedding(Vocabulary(words), matrix, centered=False)


def read_embedding(path: str | os.PathLike, format: str = "glove") -> DenseEmbedding:
    with open(path, encoding="utf-8") as fh:
        return parse_embedding_text(fh, format)


def write_embedding_text(emb: DenseEmbedding, stream: TextIO, format: str = "glove") -> None:
    """Write ``emb`` with 17 significant digits so a re-parse is bit-identical."""
    if format not in FORMATS:
        raise ContractError(f"unknown embedding format {format!r}")
    if format == "word2vec":
        stream.write(f"{emb.n_words} {emb.dim}\n")
    for word, row in zip(emb.vocab, emb.matrix):
        stream.write(word + " " + " ".join(format_float(v) for v in row) + "\n")


def format_float(v: float) -> str:
    return f"{v:.17g}"


def embedding_to_text(emb: DenseEmbedding, format: str = "glove") -> str:
    buf = io.StringIO()
    write_embedding_text(emb, buf, format)
    return buf.getvalue()


def take_top_rows(emb: DenseEmbedding, n: int) -> DenseEmbedding:
    """Keep the first ``n`` rows.

    Released vector files are sorted by descending corpus frequency, so the
    prefix is the ``n`` most frequent words.
    """
    if n < 1 or n > emb.n_words:
        raise BoundsError(f"cannot take {n} rows from an embedding of {emb.n_words} words")
    if n == emb.n_words:
        return emb
    vocab = Vocabulary(emb.vocab.words[:n])
    sub = emb.matrix[:n]
    # a prefix of a centered matrix is not centered in general
    return DenseEmbedding(vocab, sub, centered=False)


def zero_center(emb: DenseEmbedding) -> DenseEmbedding:
    """Subtract the per-column mean from every row."""
    m = emb.matrix
    centered = m - m.mean(axis=0, keepdims=True)
    return DenseEmbedding(emb.vocab, centered, centered=True)
