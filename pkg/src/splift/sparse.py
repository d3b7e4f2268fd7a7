"""Binary lifting matrix, sparse count vectors and bag-of-words encoding."""

from __future__ import annotations

import os
import re
from typing import Iterable, Sequence, TextIO

import numpy as np

from splift.embedding_io import Vocabulary
from splift.errors import BoundsError, ContractError, ParseError

_EDGE_PUNCT = re.compile(r"^[\W_]+|[\W_]+$")
_HEADER = re.compile(r"^#splift v1 N=(\d+) d=(\d+) k=(\d+)$")


class SparseCountVector:
    """Non-negative integer vector stored as sorted ``(index, count)`` pairs.

    Word rows of a lifting matrix are the special case with all counts 1;
    sentence vectors are sums of word rows.
    """

    __slots__ = ("dimension", "indices", "counts")

    def __init__(self, dimension: int, indices=(), counts=None, *, _trusted=False):
        idx = np.asarray(indices, dtype=np.int64).reshape(-1)
        if counts is None:
            cnt = np.ones(idx.shape, dtype=np.int64)
        else:
            cnt = np.asarray(counts, dtype=np.int64).reshape(-1)
        if not _trusted:
            if cnt.shape != idx.shape:
                raise ContractError("indices and counts differ in length")
            if idx.size:
                if np.any(np.diff(idx) <= 0):
                    raise ContractError("indices must be strictly ascending")
                if idx[0] < 0 or idx[-1] >= dimension:
                    raise BoundsError(f"index out of range for dimension {dimension}")
                if np.any(cnt < 1):
                    raise ContractError("counts must be positive")
        self.dimension = int(dimension)
        self.indices = idx
        self.counts = cnt

    @classmethod
    def from_dense(cls, dense) -> "SparseCountVector":
        dense = np.asarray(dense)
        idx = np.flatnonzero(dense)
        return cls(dense.shape[0], idx, dense[idx])

    @property
    def entries(self) -> list:
        return list(zip(self.indices.tolist(), self.counts.tolist()))

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dimension, dtype=np.int64)
        out[self.indices] = self.counts
        return out

    def __add__(self, other: "SparseCountVector") -> "SparseCountVector":
        _same_dimension(self, other)
        idx = np.concatenate([self.indices, other.indices])
        cnt = np.concatenate([self.counts, other.counts])
        return _accumulate(self.dimension, idx, cnt)

    def __eq__(self, other):
        if not isinstance(other, SparseCountVector):
            return NotImplemented
        return (
            self.dimension == other.dimension
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.counts, other.counts)
        )

    def __repr__(self):
        return f"SparseCountVector(dimension={self.dimension}, entries={self.entries})"


def _accumulate(dimension, idx, cnt):
    if idx.size == 0:
        return SparseCountVector(dimension, _trusted=True)
    uniq, inv = np.unique(idx, return_inverse=True)
    summed = np.bincount(inv, weights=cnt, minlength=uniq.size).astype(np.int64)
    return SparseCountVector(dimension, uniq, summed, _trusted=True)


def _same_dimension(a, b):
    if a.dimension != b.dimension:
        raise ContractError(f"dimension mismatch: {a.dimension} vs {b.dimension}")


class LiftingMatrix:
    """Binary ``N x d'`` matrix stored row-wise as sorted active dimensions.

    Internally a CSR pair ``(indptr, indices)``. ``hash_length`` is the
    average number of active dimensions per row; the total number of stored
    indices is exactly ``n_words * hash_length``.
    """

    __slots__ = ("n_words", "dimension", "hash_length", "indptr", "indices")

    def __init__(self, n_words, dimension, hash_length, indptr, indices, *, check=True):
        self.n_words = int(n_words)
        self.dimension = int(dimension)
        self.hash_length = int(hash_length)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        if check:
            self._validate()

    def _validate(self):
        if self.indptr.shape != (self.n_words + 1,) or self.indptr[0] != 0:
            raise ContractError("malformed row pointer array")
        if np.any(np.diff(self.indptr) < 0):
            raise ContractError("row pointers must be non-decreasing")
        if self.indptr[-1] != self.indices.size:
            raise ContractError("row pointers do not cover the index array")
        if self.indices.size != self.n_words * self.hash_length:
            raise ContractError(
                f"lifting matrix holds {self.indices.size} ones, expected N*k = "
                f"{self.n_words * self.hash_length}"
            )
        if self.indices.size:
            if self.indices.min() < 0 or self.indices.max() >= self.dimension:
                raise ContractError("active dimension out of range")
            step = np.diff(self.indices)
            # row boundaries are the only places where indices may go down
            inner = np.ones(step.size, dtype=bool)
            bounds = self.indptr[1:-1] - 1
            bounds = bounds[(bounds >= 0) & (bounds < step.size)]
            inner[bounds] = False
            if np.any(step[inner] <= 0):
                raise ContractError("row index lists must be strictly ascending")

    @classmethod
    def from_rows(cls, rows: Sequence[Iterable[int]], dimension: int, hash_length: int | None = None):
        lists = [np.asarray(sorted(r), dtype=np.int64) for r in rows]
        sizes = np.array([len(r) for r in lists], dtype=np.int64)
        indptr = np.concatenate([[0], np.cumsum(sizes)])
        indices = np.concatenate(lists) if lists else np.zeros(0, dtype=np.int64)
        n = len(lists)
        if hash_length is None:
            if n == 0 or indices.size % n:
                raise ContractError("total active count is not a multiple of the number of rows")
            hash_length = indices.size // n
        return cls(n, dimension, hash_length, indptr, indices)

    def row(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    @property
    def rows(self) -> list:
        return [self.row(i).tolist() for i in range(self.n_words)]

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def row_sizes(self) -> np.ndarray:
        return np.diff(self.indptr)

    def empty_rows(self) -> int:
        return int(np.count_nonzero(self.row_sizes() == 0))

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n_words, self.dimension), dtype=np.int8)
        rows = np.repeat(np.arange(self.n_words), self.row_sizes())
        out[rows, self.indices] = 1
        return out

    def to_csr(self):
        from scipy import sparse

        data = np.ones(self.indices.size, dtype=np.int64)
        return sparse.csr_matrix((data, self.indices, self.indptr), shape=(self.n_words, self.dimension))

    def __eq__(self, other):
        if not isinstance(other, LiftingMatrix):
            return NotImplemented
        return (
            self.n_words == other.n_words
            and self.dimension == other.dimension
            and self.hash_length == other.hash_length
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )

    def __repr__(self):
        return f"LiftingMatrix(N={self.n_words}, d={self.dimension}, k={self.hash_length})"


def binarize(y: np.ndarray, k: int) -> LiftingMatrix:
    """Set the ``N*k`` globally largest entries of ``y`` to one.

    Everything strictly above the selection threshold is kept; among entries
    equal to the threshold the ones with the smallest flat index ``i*d' + j``
    fill the remaining slots. Rows may end up with more or fewer than ``k``
    ones, including none.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2:
        raise ContractError("y must be a 2-d matrix")
    n, dp = y.shape
    if int(k) != k or k < 1:
        raise ContractError("hash length k must be a positive integer")
    if k > dp:
        raise ContractError(f"hash length {k} exceeds the lifted dimension {dp}")
    if not np.all(np.isfinite(y)):
        raise ContractError("y must be finite")
    if np.any(y < 0):
        raise ContractError("y must be element-wise non-negative")

    flat = y.ravel()
    m = n * k
    total = flat.size
    if m == total:
        selected = np.arange(total)
    else:
        threshold = np.partition(flat, total - m)[total - m]
        above = np.flatnonzero(flat > threshold)
        ties = np.flatnonzero(flat == threshold)[: m - above.size]
        selected = np.sort(np.concatenate([above, ties]))
    rows, cols = np.divmod(selected, dp)
    counts = np.bincount(rows, minlength=n)
    indptr = np.concatenate([[0], np.cumsum(counts)])
    # selected is ascending in flat order, hence row-major with ascending columns
    return LiftingMatrix(n, dp, k, indptr, cols, check=False)


def word_vector(z: LiftingMatrix, word_index: int) -> SparseCountVector:
    if not 0 <= word_index < z.n_words:
        raise BoundsError(f"word index {word_index} out of range [0, {z.n_words})")
    idx = z.row(word_index)
    return SparseCountVector(z.dimension, idx, np.ones(idx.size, dtype=np.int64), _trusted=True)


def normalize_token(token: str) -> str:
    """Lowercase and strip leading/trailing non-alphanumeric characters."""
    return _EDGE_PUNCT.sub("", token.lower())


def encode_sentence(tokens: Iterable[str], z: LiftingMatrix, vocab: Vocabulary) -> SparseCountVector:
    """Sum the lifted rows of all in-vocabulary tokens.

    Tokens are normalized first; unknown or empty tokens are skipped and
    repeated words accumulate.
    """
    if len(vocab) != z.n_words:
        raise ContractError("vocabulary size does not match the lifting matrix")
    rows = []
    for tok in tokens:
        i = vocab.get(normalize_token(tok))
        if i is not None:
            rows.append(i)
    if not rows:
        return SparseCountVector(z.dimension, _trusted=True)
    rows = np.asarray(rows)
    starts, stops = z.indptr[rows], z.indptr[rows + 1]
    lengths = stops - starts
    if lengths.sum() == 0:
        return SparseCountVector(z.dimension, _trusted=True)
    offsets = np.repeat(starts - np.cumsum(lengths) + lengths, lengths)
    gathered = z.indices[offsets + np.arange(lengths.sum())]
    uniq, cnt = np.unique(gathered, return_counts=True)
    return SparseCountVector(z.dimension, uniq, cnt.astype(np.int64), _trusted=True)


def inner_product(a: SparseCountVector, b: SparseCountVector) -> int:
    _same_dimension(a, b)
    _, ia, ib = np.intersect1d(a.indices, b.indices, assume_unique=True, return_indices=True)
    return int(np.dot(a.counts[ia], b.counts[ib]))


def euclidean_distance_sq(a: SparseCountVector, b: SparseCountVector) -> int:
    """Squared Euclidean distance over the union of supports."""
    _same_dimension(a, b)
    shared = inner_product(a, b)
    return int(np.dot(a.counts, a.counts) + np.dot(b.counts, b.counts) - 2 * shared)


# -- text formats -----------------------------------------------------------


def write_lifting(stream: TextIO, z: LiftingMatrix, vocab: Vocabulary) -> None:
    """Write the ``#splift v1`` text format: header, then ``word idx...`` per row."""
    if len(vocab) != z.n_words:
        raise ContractError("vocabulary size does not match the lifting matrix")
    stream.write(f"#splift v1 N={z.n_words} d={z.dimension} k={z.hash_length}\n")
    for i, word in enumerate(vocab):
        row = z.row(i)
        if row.size:
            stream.write(word + " " + " ".join(map(str, row.tolist())) + "\n")
        else:
            stream.write(word + "\n")


def read_lifting(stream: TextIO | str | os.PathLike):
    """Parse the ``#splift v1`` format. Returns ``(LiftingMatrix, Vocabulary)``."""
    if isinstance(stream, (str, os.PathLike)):
        with open(stream, encoding="utf-8") as fh:
            return read_lifting(fh)
    header = stream.readline().rstrip("\n")
    m = _HEADER.match(header)
    if not m:
        raise ParseError(f"bad lifting header {header!r}", 1)
    n, dp, k = (int(g) for g in m.groups())
    words, rows = [], []
    for lineno, line in enumerate(stream, start=2):
        fields = line.split()
        if not fields:
            raise ParseError("empty line in lifting file", lineno)
        try:
            idx = [int(f) for f in fields[1:]]
        except ValueError:
            raise ParseError(f"non-integer index for word {fields[0]!r}", lineno)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ParseError(f"indices for {fields[0]!r} are not strictly ascending", lineno)
        if idx and (idx[0] < 0 or idx[-1] >= dp):
            raise ParseError(f"index out of range for {fields[0]!r}", lineno)
        words.append(fields[0])
        rows.append(idx)
    if len(words) != n:
        raise ParseError(f"header declares N={n} but file has {len(words)} rows")
    try:
        vocab = Vocabulary(words)
        z = LiftingMatrix.from_rows(rows, dp, k)
    except ContractError as exc:
        raise ParseError(str(exc))
    return z, vocab


def svmlight_line(label: str, vec: SparseCountVector) -> str:
    """``<label> <idx+1>:<count> ...`` with 1-based indices."""
    parts = [str(label)]
    parts.extend(f"{i + 1}:{c}" for i, c in zip(vec.indices.tolist(), vec.counts.tolist()))
    return " ".join(parts)


def write_svmlight(stream: TextIO, labels: Sequence[str], vectors: Sequence[SparseCountVector]) -> None:
    if len(labels) != len(vectors):
        raise ContractError("labels and vectors differ in length")
    for label, vec in zip(labels, vectors):
        if any(ch.isspace() for ch in str(label)):
            raise ContractError(f"label {label!r} contains whitespace")
        stream.write(svmlight_line(label, vec) + "\n")
