"""Nearest-neighbour evaluation of lifted sentence vectors.

Covers the desk-scale evaluation protocol: labelled sentence files, k-NN
classification with stratified k-fold cross validation, per-dimension word
listings, nearest-word queries and query timing.
"""

from __future__ import annotations

import logging
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from splift.embedding_io import Vocabulary
from splift.errors import BoundsError, ContractError, NotFoundError, ParseError, ValidationError
from splift.sparse import LiftingMatrix, SparseCountVector, encode_sentence, normalize_token

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    sentences: list
    labels: list
    name: str = "dataset"

    def __post_init__(self):
        if len(self.sentences) != len(self.labels):
            raise ValidationError("sentences and labels differ in length")
        if len(self.sentences) < 2:
            raise ValidationError("a dataset needs at least two sentences")
        if len(set(self.labels)) < 2:
            raise ValidationError(f"dataset {self.name!r} has fewer than two classes")

    def __len__(self):
        return len(self.labels)

    @property
    def classes(self) -> list:
        return sorted(set(self.labels))


@dataclass
class CvResult:
    fold_accuracies: list
    mean_accuracy: float
    per_fold_query_seconds: list
    stratified: bool = True
    fold_sizes: list = field(default_factory=list)


@dataclass
class TimingResult:
    mean_seconds: float
    std_seconds: float
    repetitions: int
    n_queries: int


def tokenize(text: str) -> list:
    """Whitespace split followed by token normalization; empty tokens dropped."""
    out = []
    for raw in text.split():
        tok = normalize_token(raw)
        if tok:
            out.append(tok)
    return out


def load_dataset(stream: TextIO | Iterable[str], name: str = "dataset") -> LabeledDataset:
    """Read ``<label>\\t<sentence text>`` lines; blank lines are skipped."""
    sentences, labels = [], []
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        if "\t" not in line:
            raise ParseError("expected '<label>\\t<sentence>'", lineno)
        label, text = line.split("\t", 1)
        label = label.strip()
        if not label:
            raise ParseError("empty label", lineno)
        labels.append(label)
        sentences.append(tokenize(text))
    return LabeledDataset(sentences, labels, name)


# -- nearest-neighbour indexes ----------------------------------------------


class SparseKnnIndex:
    """Training sentence vectors laid out column-wise for fast sparse scans.

    A query touches only the posting lists of its own active dimensions, so
    its cost scales with the number of shared nonzeros, not with ``d'``.
    """

    def __init__(self, vectors: Sequence[SparseCountVector], labels: Sequence[str]):
        if len(vectors) == 0:
            raise ContractError("empty training set")
        if len(vectors) != len(labels):
            raise ContractError("vectors and labels differ in length")
        dim = vectors[0].dimension
        if any(v.dimension != dim for v in vectors):
            raise ContractError("training vectors differ in dimension")
        self.dimension = dim
        self.labels = list(labels)
        n = len(vectors)
        sizes = np.array([v.nnz for v in vectors], dtype=np.int64)
        rows = np.repeat(np.arange(n, dtype=np.int64), sizes)
        idx = np.concatenate([v.indices for v in vectors]) if sizes.sum() else np.zeros(0, np.int64)
        cnt = np.concatenate([v.counts for v in vectors]) if sizes.sum() else np.zeros(0, np.int64)
        order = np.lexsort((rows, idx))
        self._col_rows = rows[order]
        self._col_vals = cnt[order].astype(np.float64)
        self._col_ptr = np.concatenate([[0], np.cumsum(np.bincount(idx, minlength=dim))])
        self._sqnorms = np.array([float(np.dot(v.counts, v.counts)) for v in vectors])

    def __len__(self):
        return len(self.labels)

    def distances(self, query: SparseCountVector) -> np.ndarray:
        """Squared Euclidean distance from ``query`` to every training vector."""
        if query.dimension != self.dimension:
            raise ContractError(f"dimension mismatch: {query.dimension} vs {self.dimension}")
        starts = self._col_ptr[query.indices]
        lengths = self._col_ptr[query.indices + 1] - starts
        total = int(lengths.sum())
        qn = float(np.dot(query.counts, query.counts))
        if total == 0:
            return self._sqnorms + qn
        pos = np.repeat(starts - np.cumsum(lengths) + lengths, lengths) + np.arange(total)
        weights = self._col_vals[pos] * np.repeat(query.counts, lengths)
        dots = np.bincount(self._col_rows[pos], weights=weights, minlength=len(self.labels))
        return self._sqnorms + qn - 2.0 * dots


class DenseKnnIndex:
    """Brute-force Euclidean scan over dense real-valued sentence vectors."""

    def __init__(self, matrix: np.ndarray, labels: Sequence[str]):
        m = np.ascontiguousarray(matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] == 0:
            raise ContractError("empty training set")
        if m.shape[0] != len(labels):
            raise ContractError("vectors and labels differ in length")
        self.matrix = m
        self.labels = list(labels)
        self._sqnorms = np.einsum("ij,ij->i", m, m)

    def __len__(self):
        return len(self.labels)

    def distances(self, query) -> np.ndarray:
        q = np.asarray(query, dtype=np.float64)
        return self._sqnorms + float(q @ q) - 2.0 * (self.matrix @ q)


def _as_index(train):
    if isinstance(train, (SparseKnnIndex, DenseKnnIndex)):
        return train
    vectors, labels = train
    return SparseKnnIndex(vectors, labels)


def _vote(labels, order, dist):
    """Majority label; ties go to the label seen closest, then lexicographic."""
    counts = Counter()
    nearest = {}
    for j in order:
        lab = labels[j]
        counts[lab] += 1
        nearest.setdefault(lab, dist[j])
    best = max(counts.values())
    tied = [lab for lab, c in counts.items() if c == best]
    return min(tied, key=lambda lab: (nearest[lab], lab))


def neighbors(index, query, k_neighbors: int):
    """Positions of the ``k_neighbors`` closest training vectors, and all distances.

    Positions are ordered by distance, equal distances by training position.
    """
    dist = index.distances(query)
    if k_neighbors == 1:
        return np.array([int(np.argmin(dist))]), dist
    if k_neighbors < len(dist):
        cut = np.partition(dist, k_neighbors - 1)[k_neighbors - 1]
        cand = np.flatnonzero(dist <= cut)
    else:
        cand = np.arange(len(dist))
    order = cand[np.argsort(dist[cand], kind="stable")][:k_neighbors]
    return order, dist


def knn_classify(train, query, k_neighbors: int = 1) -> str:
    """Majority vote of the ``k_neighbors`` nearest training vectors.

    ``train`` is a prepared index or a ``(vectors, labels)`` pair.
    """
    index = _as_index(train)
    if len(index) == 0:
        raise ContractError("empty training set")
    if not 1 <= k_neighbors <= len(index):
        raise ContractError(f"k_neighbors must lie in [1, {len(index)}]")
    if k_neighbors == 1:
        return index.labels[int(np.argmin(index.distances(query)))]
    order, dist = neighbors(index, query, k_neighbors)
    return _vote(index.labels, order, dist)


# -- cross validation -------------------------------------------------------


def make_folds(labels: Sequence[str], folds: int, seed: int = 0):
    """Split positions into ``folds`` test sets.

    Members of each class are shuffled and dealt round-robin, continuing the
    fold cursor from one class to the next, so every fold holds each class
    within one sample of its proportional share and fold sizes differ by at
    most one. If some class has fewer members than ``folds`` the split falls
    back to a plain shuffled partition.

    Returns ``(list of index arrays, stratified flag)``.
    """
    n = len(labels)
    if folds < 2:
        raise ContractError("need at least two folds")
    if n < folds:
        raise ContractError(f"{n} samples cannot fill {folds} folds")
    rng = np.random.default_rng(seed)
    labels = np.asarray(labels, dtype=object)
    classes = sorted(set(labels.tolist()))
    members = {c: np.flatnonzero(labels == c) for c in classes}
    if min(len(m) for m in members.values()) < folds:
        perm = rng.permutation(n)
        return [np.sort(part) for part in np.array_split(perm, folds)], False
    buckets = [[] for _ in range(folds)]
    cursor = 0
    for c in classes:
        for pos in rng.permutation(members[c]):
            buckets[cursor].append(int(pos))
            cursor = (cursor + 1) % folds
    return [np.array(sorted(b), dtype=np.int64) for b in buckets], True


def cross_validate(
    dataset: LabeledDataset,
    z: LiftingMatrix,
    vocab: Vocabulary,
    folds: int = 10,
    k_neighbors: int = 1,
    seed: int = 0,
) -> CvResult:
    """k-NN accuracy under stratified ``folds``-fold cross validation."""
    if len(dataset) < folds:
        raise ContractError(f"dataset of {len(dataset)} sentences is smaller than {folds} folds")
    vectors = [encode_sentence(s, z, vocab) for s in dataset.sentences]
    parts, stratified = make_folds(dataset.labels, folds, seed)
    if not stratified:
        log.warning("a class has fewer than %d members; using unstratified folds", folds)
    labels = dataset.labels
    accs, secs, sizes = [], [], []
    everything = np.arange(len(dataset))
    for test in parts:
        mask = np.ones(len(dataset), dtype=bool)
        mask[test] = False
        train_pos = everything[mask]
        index = SparseKnnIndex([vectors[i] for i in train_pos], [labels[i] for i in train_pos])
        k = min(k_neighbors, len(index))
        t0 = time.perf_counter()
        correct = sum(knn_classify(index, vectors[i], k) == labels[i] for i in test)
        secs.append(time.perf_counter() - t0)
        accs.append(correct / len(test))
        sizes.append(len(test))
    return CvResult(accs, float(np.mean(accs)), secs, stratified, sizes)


# -- inspection -------------------------------------------------------------


def dimension_report(z: LiftingMatrix, vocab: Vocabulary, dim: int) -> list:
    """Words whose lifted row has ``dim`` active, in vocabulary order."""
    if not 0 <= dim < z.dimension:
        raise BoundsError(f"dimension {dim} out of range [0, {z.dimension})")
    hits = np.flatnonzero(z.indices == dim)
    rows = np.searchsorted(z.indptr, hits, side="right") - 1
    return [vocab[int(r)] for r in rows]


def nearest_words(z: LiftingMatrix, vocab: Vocabulary, word: str, top: int = 10) -> list:
    """Words sharing the most active dimensions with ``word``.

    Returns ``(word, inner product)`` pairs by descending inner product, ties
    in vocabulary order, excluding the query itself.
    """
    i = vocab.get(word)
    if i is None:
        raise NotFoundError(f"word {word!r} is not in the vocabulary")
    mask = np.zeros(z.dimension, dtype=np.int64)
    mask[z.row(i)] = 1
    owner = np.repeat(np.arange(z.n_words), z.row_sizes())
    scores = np.bincount(owner, weights=mask[z.indices], minlength=z.n_words).astype(np.int64)
    order = np.lexsort((np.arange(z.n_words), -scores))
    order = order[order != i][:top]
    return [(vocab[int(j)], int(scores[j])) for j in order]


def time_queries(index, queries: Sequence, k_neighbors: int = 1, repetitions: int = 3) -> TimingResult:
    """Wall-clock seconds per 1-NN (or k-NN) query, mean and std over repetitions.

    ``queries`` must already be encoded; encoding cost is not included.
    """
    if len(queries) == 0 or len(index) == 0:
        raise ContractError("timing needs at least one query and one training vector")
    repetitions = max(int(repetitions), 3)
    k = min(k_neighbors, len(index))
    per_query = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        for q in queries:
            knn_classify(index, q, k)
        per_query.append((time.perf_counter() - t0) / len(queries))
    return TimingResult(float(np.mean(per_query)), float(np.std(per_query)), repetitions, len(queries))
