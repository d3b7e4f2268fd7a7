import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from splift import (
    BoundsError,
    ContractError,
    LiftingMatrix,
    ParseError,
    SparseCountVector,
    Vocabulary,
    binarize,
    encode_sentence,
    euclidean_distance_sq,
    inner_product,
    normalize_token,
    read_lifting,
    word_vector,
    write_lifting,
    write_svmlight,
)

from oracles import dense_vector, topk_by_sort

small_y = arrays(
    np.float64,
    st.tuples(st.integers(1, 8), st.integers(1, 8)),
    elements=st.sampled_from([0.0, 0.5, 1.0, 2.0, 3.25]),
)


class TestBinarize:
    def test_two_largest_of_four(self):
        z = binarize(np.array([[3.0, 1.0], [2.0, 0.0]]), 1)
        assert z.rows == [[0], [0]]

    def test_all_ties_take_earliest_flat_indices(self):
        z = binarize(np.ones((2, 2)), 1)
        assert z.rows == [[0, 1], []]
        assert z.empty_rows() == 1

    def test_full_scale_cardinality(self):
        # 50,000 words, d' = 1,000, k = 20 -> one million ones, 20 per row on average
        rng = np.random.default_rng(0)
        y = rng.random((50_000, 1_000))
        z = binarize(y, 20)
        assert z.nnz == 1_000_000
        assert z.row_sizes().mean() == 20.0

    def test_k_larger_than_dimension(self):
        with pytest.raises(ContractError):
            binarize(np.ones((3, 2)), 3)

    def test_negative_or_nonfinite_rejected(self):
        with pytest.raises(ContractError):
            binarize(np.array([[-1.0, 1.0]]), 1)
        with pytest.raises(ContractError):
            binarize(np.array([[np.inf, 1.0]]), 1)

    def test_k_equals_dimension_selects_everything(self):
        z = binarize(np.zeros((3, 2)), 2)
        assert z.rows == [[0, 1]] * 3

    @settings(max_examples=200, deadline=None)
    @given(small_y, st.integers(1, 8))
    def test_matches_full_sort_oracle(self, y, k):
        if k > y.shape[1]:
            return
        z = binarize(y, k)
        dp = y.shape[1]
        got = {i * dp + j for i, row in enumerate(z.rows) for j in row}
        assert got == topk_by_sort(y, k)
        assert z.nnz == y.shape[0] * k

    @settings(max_examples=100, deadline=None)
    @given(small_y, st.integers(1, 8))
    def test_dominance(self, y, k):
        if k > y.shape[1]:
            return
        mask = binarize(y, k).to_dense().astype(bool)
        if mask.all():
            return
        assert y[mask].min() >= y[~mask].max()

    def test_deterministic(self):
        y = np.random.default_rng(1).integers(0, 3, size=(30, 10)).astype(float)
        assert binarize(y, 3) == binarize(y, 3)


class TestLiftingMatrix:
    def test_cardinality_enforced(self):
        with pytest.raises(ContractError):
            LiftingMatrix.from_rows([[0, 1], [2]], 4, hash_length=2)

    def test_ascending_enforced(self):
        with pytest.raises(ContractError):
            LiftingMatrix(2, 4, 1, [0, 2, 2], [3, 1])

    def test_range_enforced(self):
        with pytest.raises(ContractError):
            LiftingMatrix.from_rows([[4]], 4)

    def test_text_round_trip(self):
        z = LiftingMatrix.from_rows([[1, 5], [], [0, 2, 3, 7]], 8, hash_length=2)
        vocab = Vocabulary(["alpha", "beta", "gamma"])
        buf = io.StringIO()
        write_lifting(buf, z, vocab)
        text = buf.getvalue()
        assert text == "#splift v1 N=3 d=8 k=2\nalpha 1 5\nbeta\ngamma 0 2 3 7\n"
        z2, v2 = read_lifting(io.StringIO(text))
        assert z2 == z and v2 == vocab

    @pytest.mark.parametrize(
        "text",
        [
            "#splift v2 N=1 d=2 k=1\na 0\n",
            "#splift v1 N=2 d=2 k=1\na 0\n",
            "#splift v1 N=1 d=2 k=1\na 2\n",
            "#splift v1 N=1 d=4 k=2\na 3 1\n",
            "#splift v1 N=1 d=4 k=2\na 1\n",
            "#splift v1 N=2 d=4 k=1\na 1\na 2\n",
        ],
    )
    def test_bad_files(self, text):
        with pytest.raises(ParseError):
            read_lifting(io.StringIO(text))


class TestWordVector:
    def setup_method(self):
        self.z = LiftingMatrix.from_rows([[2, 7], [], [0, 3, 5, 9]], 10, hash_length=2)

    def test_row(self):
        assert word_vector(self.z, 0).entries == [(2, 1), (7, 1)]

    def test_empty_row(self):
        assert word_vector(self.z, 1).entries == []

    def test_bounds(self):
        with pytest.raises(BoundsError):
            word_vector(self.z, 3)
        with pytest.raises(BoundsError):
            word_vector(self.z, -1)

    def test_reassemble(self):
        rows = [[i for i, _ in word_vector(self.z, w).entries] for w in range(self.z.n_words)]
        assert LiftingMatrix.from_rows(rows, 10, 2) == self.z


class TestEncode:
    def setup_method(self):
        self.vocab = Vocabulary(["good", "movie", "bad", "New"])
        self.z = LiftingMatrix.from_rows([[1, 5], [5, 8], [0, 2], [3, 4]], 10, hash_length=2)

    def test_empty(self):
        v = encode_sentence([], self.z, self.vocab)
        assert v.entries == [] and v.dimension == 10

    def test_single_word(self):
        assert encode_sentence(["good"], self.z, self.vocab) == word_vector(self.z, 0)

    def test_shared_dimension_accumulates(self):
        v = encode_sentence(["good", "movie"], self.z, self.vocab)
        assert v.entries == [(1, 1), (5, 2), (8, 1)]

    def test_repeats_and_oov(self):
        v = encode_sentence(["good", "unknown", "good"], self.z, self.vocab)
        assert v.entries == [(1, 2), (5, 2)]

    def test_normalization(self):
        v = encode_sentence(["GOOD!", "(movie)", "..."], self.z, self.vocab)
        assert v == encode_sentence(["good", "movie"], self.z, self.vocab)

    def test_uppercase_vocab_entries_unreachable(self):
        # lookup happens after lowercasing; vocabulary case is preserved as parsed
        assert encode_sentence(["New"], self.z, self.vocab).entries == []

    @settings(max_examples=200, deadline=None)
    @given(
        st.lists(st.sampled_from(["good", "movie", "bad", "xyz", "Good.", ""]), max_size=12),
        st.lists(st.sampled_from(["good", "movie", "bad", "xyz", "Good.", ""]), max_size=12),
    )
    def test_linearity(self, s1, s2):
        joint = encode_sentence(s1 + s2, self.z, self.vocab)
        parts = encode_sentence(s1, self.z, self.vocab) + encode_sentence(s2, self.z, self.vocab)
        assert joint == parts


@pytest.mark.parametrize(
    "raw, expected",
    [("Hello", "hello"), ("'quoted'", "quoted"), ("don't", "don't"), ("--", ""), ("_x_", "x"), ("Über!", "über")],
)
def test_normalize_token(raw, expected):
    assert normalize_token(raw) == expected


class TestProducts:
    def test_disjoint(self):
        a = SparseCountVector(10, [1, 3])
        b = SparseCountVector(10, [2, 4, 6])
        assert inner_product(a, b) == 0
        assert euclidean_distance_sq(a, b) == 5

    def test_self(self):
        a = SparseCountVector(10, [1, 3, 9])
        assert inner_product(a, a) == 3
        assert euclidean_distance_sq(a, a) == 0

    def test_dimension_mismatch(self):
        with pytest.raises(ContractError):
            inner_product(SparseCountVector(3), SparseCountVector(4))
        with pytest.raises(ContractError):
            euclidean_distance_sq(SparseCountVector(3), SparseCountVector(4))

    def test_invalid_vectors(self):
        with pytest.raises(ContractError):
            SparseCountVector(5, [2, 1])
        with pytest.raises(BoundsError):
            SparseCountVector(5, [5])
        with pytest.raises(ContractError):
            SparseCountVector(5, [1], [0])

    @settings(max_examples=200, deadline=None)
    @given(
        arrays(np.int64, 12, elements=st.integers(0, 4)),
        arrays(np.int64, 12, elements=st.integers(0, 4)),
    )
    def test_dense_oracle_and_identities(self, da, db):
        a, b = SparseCountVector.from_dense(da), SparseCountVector.from_dense(db)
        assert np.array_equal(dense_vector(a), da)
        assert inner_product(a, b) == int(da @ db)
        assert euclidean_distance_sq(a, b) == int(((da - db) ** 2).sum())
        assert inner_product(a, a) == int((a.counts**2).sum())
        assert euclidean_distance_sq(a, b) == inner_product(a, a) + inner_product(b, b) - 2 * inner_product(a, b)


def test_svmlight_export():
    buf = io.StringIO()
    vecs = [SparseCountVector(10, [0, 4], [2, 1]), SparseCountVector(10)]
    write_svmlight(buf, ["pos", "neg"], vecs)
    assert buf.getvalue() == "pos 1:2 5:1\nneg\n"
    with pytest.raises(ContractError):
        write_svmlight(io.StringIO(), ["a b"], vecs[:1])
