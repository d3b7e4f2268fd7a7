"""Command-line entry point: ``splift <subcommand> [flags]``.

Subcommands
-----------
lift      train the non-negative factor from a dense embedding file
binarize  turn a factor checkpoint into a lifting-matrix text file
encode    encode sentences (or a labelled dataset) as sparse count vectors
neighbors list the words sharing the most active dimensions with a word
eval      k-NN cross validation on a labelled dataset
inspect   list the words active in one dimension, or summarize the matrix

Exit codes: 0 success, 1 usage or validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys
import time

from splift import __version__
from splift.embedding_io import Vocabulary, read_embedding, take_top_rows, zero_center
from splift.errors import NumericalError, SpliftError
from splift.evaluation import cross_validate, dimension_report, load_dataset, nearest_words, tokenize
from splift.nls import NlsConfig
from splift.sparse import binarize, encode_sentence, read_lifting, svmlight_line, write_lifting
from splift.symlift import AlphaSchedule, TrainConfig, read_checkpoint, train, write_checkpoint

log = logging.getLogger("splift")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _threads(value):
    if value is None:
        value = os.environ.get("SPLIFT_THREADS", "0")
    try:
        n = int(value)
    except ValueError:
        raise SpliftError(f"invalid thread count {value!r}")
    if n < 0:
        raise SpliftError("thread count must be >= 0")
    return n


@contextlib.contextmanager
def _thread_limit(n):
    if n <= 0:
        yield
        return
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=n):
        yield


def _write_manifest(path, command, params, inputs, outputs, seconds):
    manifest = {
        "tool": "splift",
        "version": __version__,
        "subcommand": command,
        "parameters": params,
        "inputs": inputs,
        "outputs": outputs,
        "wall_clock_seconds": round(seconds, 6),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def vocab_path(factor_path):
    return f"{factor_path}.vocab"


def manifest_path(out_path):
    return f"{out_path}.manifest.json"


def _read_vocab(path):
    with open(path, encoding="utf-8") as fh:
        return Vocabulary(line.rstrip("\n") for line in fh if line.strip())


# -- subcommands ------------------------------------------------------------


def cmd_lift(args):
    t0 = time.perf_counter()
    emb = read_embedding(args.input, args.format)
    if args.top_words is not None:
        emb = take_top_rows(emb, args.top_words)
    emb = zero_center(emb)
    schedule = AlphaSchedule(
        initial=args.alpha_init,
        growth_factor=args.alpha_growth,
        closeness_threshold=args.closeness,
        max_alpha=args.max_alpha,
    )
    config = TrainConfig(
        lifted_dimension=args.dim,
        outer_tolerance=args.tol,
        max_outer_iterations=args.max_iter,
        seed=args.seed,
        nls=NlsConfig(max_iterations=args.nls_max_iter, tolerance=args.nls_tol),
    )
    factors, report = train(emb, schedule, config)
    write_checkpoint(args.out, factors, report.final_alpha, report.iterations_used)
    with open(vocab_path(args.out), "w", encoding="utf-8") as fh:
        fh.writelines(w + "\n" for w in emb.vocab)
    params = {
        "format": args.format,
        "top_words": args.top_words,
        "n_words": emb.n_words,
        "input_dimension": emb.dim,
        "lifted_dimension": args.dim,
        "alpha_init": args.alpha_init,
        "alpha_growth": args.alpha_growth,
        "max_alpha": args.max_alpha,
        "closeness": args.closeness,
        "tol": args.tol,
        "max_iter": args.max_iter,
        "nls_max_iter": args.nls_max_iter,
        "nls_tol": args.nls_tol,
        "seed": args.seed,
        "threads": args.threads,
    }
    results = {
        "converged": report.converged,
        "final_alpha": report.final_alpha,
        "final_closeness": report.final_closeness,
        "relative_gram_error": report.relative_gram_error,
        "iterations_used": report.iterations_used,
    }
    params["results"] = results
    _write_manifest(
        manifest_path(args.out),
        "lift",
        params,
        {"input": args.input},
        {"factors": args.out, "vocab": vocab_path(args.out)},
        time.perf_counter() - t0,
    )
    print("key\tvalue")
    for key, value in results.items():
        print(f"{key}\t{value}")
    if not report.converged:
        log.warning("factors did not reach the closeness threshold")
    return EXIT_OK


def cmd_binarize(args):
    t0 = time.perf_counter()
    ckpt = read_checkpoint(args.factors)
    vocab = _read_vocab(args.vocab or vocab_path(args.factors))
    z = binarize(ckpt.factors.h, args.k)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        write_lifting(fh, z, vocab)
    _write_manifest(
        manifest_path(args.out),
        "binarize",
        {"k": args.k, "n_words": z.n_words, "lifted_dimension": z.dimension},
        {"factors": args.factors, "vocab": args.vocab or vocab_path(args.factors)},
        {"lifting": args.out},
        time.perf_counter() - t0,
    )
    print("n_words\tdimension\tk\tnonzeros\tempty_rows")
    print(f"{z.n_words}\t{z.dimension}\t{z.hash_length}\t{z.nnz}\t{z.empty_rows()}")
    return EXIT_OK


def cmd_encode(args):
    z, vocab = read_lifting(args.lifting)
    if args.dataset:
        with open(args.dataset, encoding="utf-8") as fh:
            ds = load_dataset(fh, name=os.path.basename(args.dataset))
        labels, sentences = ds.labels, ds.sentences
    else:
        with open(args.sentences, encoding="utf-8") as fh:
            sentences = [tokenize(line) for line in fh]
        labels = ["0"] * len(sentences)
    vectors = [encode_sentence(s, z, vocab) for s in sentences]
    print("sentence\tnnz\tentries")
    for i, v in enumerate(vectors):
        entries = " ".join(f"{j}:{c}" for j, c in v.entries)
        print(f"{i}\t{v.nnz}\t{entries}")
    if args.svmlight:
        with open(args.svmlight, "w", encoding="utf-8", newline="\n") as fh:
            for lab, v in zip(labels, vectors):
                fh.write(svmlight_line(lab, v) + "\n")
    return EXIT_OK


def cmd_neighbors(args):
    z, vocab = read_lifting(args.lifting)
    print("word\tinner_product")
    for word, score in nearest_words(z, vocab, args.word, args.top):
        print(f"{word}\t{score}")
    return EXIT_OK


def cmd_eval(args):
    z, vocab = read_lifting(args.lifting)
    with open(args.dataset, encoding="utf-8") as fh:
        ds = load_dataset(fh, name=os.path.basename(args.dataset))
    res = cross_validate(ds, z, vocab, folds=args.folds, k_neighbors=args.knn, seed=args.seed)
    print("fold\tsize\taccuracy\tquery_seconds")
    for i, (size, acc, secs) in enumerate(zip(res.fold_sizes, res.fold_accuracies, res.per_fold_query_seconds)):
        print(f"{i}\t{size}\t{acc:.6f}\t{secs:.6f}")
    print(f"mean\t{sum(res.fold_sizes)}\t{res.mean_accuracy:.6f}\t{sum(res.per_fold_query_seconds):.6f}")
    if not res.stratified:
        print("# warning: a class has fewer members than folds; folds are not stratified", file=sys.stderr)
    return EXIT_OK


def cmd_inspect(args):
    z, vocab = read_lifting(args.lifting)
    if args.dim is None:
        sizes = z.row_sizes()
        print("n_words\tdimension\tk\tnonzeros\tempty_rows\tmax_row")
        print(f"{z.n_words}\t{z.dimension}\t{z.hash_length}\t{z.nnz}\t{z.empty_rows()}\t{int(sizes.max(initial=0))}")
        return EXIT_OK
    print("word")
    for word in dimension_report(z, vocab, args.dim):
        print(word)
    return EXIT_OK


# -- argument parsing -------------------------------------------------------


def build_parser():
    p = _Parser(prog="splift", description="Sparse binary lifting of dense word vectors.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    p.add_argument("--threads", type=int, default=None, help="cap on BLAS threads (0 = auto; env SPLIFT_THREADS)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("lift", help="train the non-negative factor")
    s.add_argument("--input", required=True)
    s.add_argument("--format", choices=("glove", "word2vec"), default="glove")
    s.add_argument("--dim", type=int, default=1000, help="lifted dimension d'")
    s.add_argument("--out", required=True, help="factor checkpoint path")
    s.add_argument("--top-words", type=int, default=None)
    s.add_argument("--alpha-init", type=float, default=1.0)
    s.add_argument("--alpha-growth", type=float, default=10.0)
    s.add_argument("--max-alpha", type=float, default=1e8)
    s.add_argument("--closeness", type=float, default=1e-2)
    s.add_argument("--tol", type=float, default=1e-5)
    s.add_argument("--max-iter", type=int, default=300)
    s.add_argument("--nls-tol", type=float, default=1e-4)
    s.add_argument("--nls-max-iter", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_lift)

    s = sub.add_parser("binarize", help="keep the N*k largest factor entries")
    s.add_argument("--factors", required=True)
    s.add_argument("--k", type=int, default=20)
    s.add_argument("--out", required=True)
    s.add_argument("--vocab", default=None, help="word list (default: <factors>.vocab)")
    s.set_defaults(func=cmd_binarize)

    s = sub.add_parser("encode", help="bag-of-words sentence vectors")
    s.add_argument("--lifting", required=True)
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--sentences", help="one raw sentence per line")
    src.add_argument("--dataset", help="labelled '<label>\\t<text>' file")
    s.add_argument("--svmlight", default=None, help="also write SVMlight-style features here")
    s.set_defaults(func=cmd_encode)

    s = sub.add_parser("neighbors", help="words sharing active dimensions")
    s.add_argument("--lifting", required=True)
    s.add_argument("--word", required=True)
    s.add_argument("--top", type=int, default=10)
    s.set_defaults(func=cmd_neighbors)

    s = sub.add_parser("eval", help="k-NN cross validation")
    s.add_argument("--lifting", required=True)
    s.add_argument("--dataset", required=True)
    s.add_argument("--folds", type=int, default=10)
    s.add_argument("--knn", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("inspect", help="words active in a dimension")
    s.add_argument("--lifting", required=True)
    s.add_argument("--dim", type=int, default=None)
    s.set_defaults(func=cmd_inspect)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        args.threads = _threads(args.threads)
        with _thread_limit(args.threads):
            return args.func(args)
    except NumericalError as exc:
        print(f"splift: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (SpliftError, OSError, ValueError) as exc:
        print(f"splift {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
