"""Sparse binary lifting of dense word embeddings.

Dense word vectors are lifted into a wider, highly sparse, binary space by a
symmetric non-negative factorization of their Gram matrix, and sentences are
encoded as bag-of-words sums of the lifted rows.
"""

from splift.errors import (
    BoundsError,
    ContractError,
    NotFoundError,
    NumericalError,
    ParseError,
    SpliftError,
    ValidationError,
)
from splift.embedding_io import (
    DenseEmbedding,
    Vocabulary,
    parse_embedding_text,
    read_embedding,
    take_top_rows,
    write_embedding_text,
    zero_center,
)
from splift.nls import NlsConfig, NlsProblem, nls_objective, projected_gradient, solve_nls
from splift.symlift import (
    AlphaSchedule,
    FactorPair,
    TrainConfig,
    TrainReport,
    gram_error,
    initialize_factors,
    read_checkpoint,
    relaxed_objective,
    train,
    write_checkpoint,
)
from splift.sparse import (
    LiftingMatrix,
    SparseCountVector,
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
from splift.evaluation import (
    CvResult,
    DenseKnnIndex,
    LabeledDataset,
    SparseKnnIndex,
    cross_validate,
    dimension_report,
    knn_classify,
    load_dataset,
    nearest_words,
    time_queries,
)

__version__ = "0.1.0"
