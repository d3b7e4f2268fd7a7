"""Penalized symmetric NMF of the word Gram matrix.

Finds ``W, H >= 0`` (``N x d'``) minimizing

    ||X X^T - W H^T||_F^2 + alpha ||W - H||_F^2

by alternating ``W <- H`` with a non-negative least squares update of ``H``,
raising ``alpha`` until the two factors agree. ``X X^T`` is never formed;
every product is routed through ``X`` (``N x d``), so memory stays
``O(N (d + d'))``.
"""

from __future__ import annotations

import logging
import math
import os
import struct
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from splift.embedding_io import DenseEmbedding
from splift.errors import ContractError, NumericalError, ParseError
from splift.nls import NlsConfig, NlsProblem, solve_nls

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"SPLIFTCKPT\x00v1\x00\x00\x00"
_INIT_SAMPLE_ROWS = 1000
_MONOTONE_SLACK = 1e-10


@dataclass(frozen=True, eq=False)
class FactorPair:
    w: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        h = np.asarray(self.h, dtype=np.float64)
        if w.ndim != 2 or w.shape != h.shape:
            raise ContractError(f"factor shapes differ: {w.shape} vs {h.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(h))):
            raise ContractError("factors must be finite")
        if np.any(w < 0) or np.any(h < 0):
            raise ContractError("factors must be element-wise non-negative")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "h", h)

    @property
    def shape(self):
        return self.h.shape

    def closeness(self) -> float:
        """``||W - H||_F / ||H||_F`` (0 when both factors vanish)."""
        diff = float(np.linalg.norm(self.w - self.h))
        norm = float(np.linalg.norm(self.h))
        if norm == 0.0:
            return 0.0 if diff == 0.0 else math.inf
        return diff / norm


@dataclass(frozen=True)
class AlphaSchedule:
    initial: float = 1.0
    growth_factor: float = 10.0
    closeness_threshold: float = 1e-2
    max_alpha: float = 1e8

    def __post_init__(self):
        if not self.initial > 0 or not self.max_alpha > 0:
            raise ContractError("alpha values must be positive")
        if self.initial > self.max_alpha:
            raise ContractError("initial alpha exceeds max_alpha")
        if not self.growth_factor > 1:
            raise ContractError("growth_factor must exceed 1")
        if not self.closeness_threshold > 0:
            raise ContractError("closeness_threshold must be positive")


@dataclass(frozen=True)
class TrainConfig:
    lifted_dimension: int = 1000
    outer_tolerance: float = 1e-5
    max_outer_iterations: int = 300
    seed: int = 0
    nls: NlsConfig = field(default_factory=NlsConfig)

    def __post_init__(self):
        if int(self.lifted_dimension) != self.lifted_dimension or self.lifted_dimension < 1:
            raise ContractError("lifted_dimension must be a positive integer")
        if not self.outer_tolerance > 0:
            raise ContractError("outer_tolerance must be positive")
        if self.max_outer_iterations < 1:
            raise ContractError("max_outer_iterations must be positive")
        if self.seed < 0:
            raise ContractError("seed must be non-negative")


@dataclass
class TrainReport:
    objective_trace: list  # (outer iteration, alpha, objective after H-update)
    final_closeness: float
    relative_gram_error: float
    iterations_used: int
    final_alpha: float
    converged: bool
    # objective right after each W <- H copy, aligned with objective_trace
    copy_objectives: list = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class Checkpoint:
    factors: FactorPair
    alpha: float
    iteration: int


def _matrix(emb):
    if isinstance(emb, DenseEmbedding):
        return emb.matrix
    x = np.asarray(emb, dtype=np.float64)
    if x.ndim != 2:
        raise ContractError("X must be a 2-d matrix")
    return x


def _check_shapes(x, factors):
    if factors.w.shape[0] != x.shape[0]:
        raise ContractError(
            f"factors have {factors.w.shape[0]} rows but the embedding has {x.shape[0]}"
        )


def initialize_factors(emb: DenseEmbedding, config: TrainConfig) -> FactorPair:
    """Uniform random start ``W = H = H0`` scaled to the Gram magnitude.

    Entries are drawn from ``U[0, s]`` with ``s = 2 sqrt(c / d')``, where ``c``
    is the mean positive part of the off-diagonal Gram entries over a row
    sample of at most 1000 words. This makes ``E[(H0 H0^T)_ij] = c``.
    """
    x = _matrix(emb)
    n = x.shape[0]
    dp = int(config.lifted_dimension)
    if dp < 1:
        raise ContractError("lifted dimension must be at least 1")
    rng = np.random.default_rng(config.seed)
    if n > _INIT_SAMPLE_ROWS:
        rows = np.sort(rng.choice(n, size=_INIT_SAMPLE_ROWS, replace=False))
        sample = x[rows]
    else:
        sample = x
    g = sample @ sample.T
    m = g.shape[0]
    if m > 1:
        off = g[~np.eye(m, dtype=bool)]
        c = float(np.mean(np.maximum(off, 0.0)))
    else:
        c = 0.0
    if c <= 0.0:
        c = float(np.mean(np.diag(g))) if m else 0.0
    if not math.isfinite(c):
        raise NumericalError("Gram matrix magnitude is not finite; rescale the embedding")
    s = 2.0 * math.sqrt(c / dp) if c > 0.0 else 1.0
    h0 = rng.uniform(0.0, s, size=(n, dp))
    return FactorPair(h0, h0.copy())


def relaxed_objective(emb, factors: FactorPair, alpha: float) -> float:
    """``||XX^T - WH^T||_F^2 + alpha ||W - H||_F^2`` via ``d x d'`` products.

    Uses ``||XX^T||^2 = ||X^T X||^2``, ``tr(XX^T H W^T) = <X^T W, X^T H>`` and
    ``||WH^T||^2 = <W^T W, H^T H>``.
    """
    x = _matrix(emb)
    _check_shapes(x, factors)
    w, h = factors.w, factors.h
    xtx = x.T @ x
    xtw = x.T @ w
    xth = xtw if h is w else x.T @ h
    wtw = w.T @ w
    hth = wtw if h is w else h.T @ h
    value = np.vdot(xtx, xtx) - 2.0 * np.vdot(xtw, xth) + np.vdot(wtw, hth)
    if alpha:
        value += alpha * float(np.vdot(w - h, w - h))
    return float(value)


def gram_error(emb, factors: FactorPair) -> float:
    """``||XX^T - HH^T||_F / ||XX^T||_F`` without an ``N x N`` buffer.

    With ``A = [X, H]`` and ``S = diag(I_d, -I_d')``, ``XX^T - HH^T = A S A^T``.
    A thin QR ``A = QR`` gives ``||A S A^T||_F = ||R S R^T||_F``, which avoids
    the cancellation of the expanded trace form near an exact factorization.
    """
    x = _matrix(emb)
    _check_shapes(x, factors)
    h = factors.h
    xtx = x.T @ x
    base = float(np.linalg.norm(xtx))
    if base == 0.0:
        raise ContractError("embedding Gram matrix is zero; relative error undefined")
    a = np.hstack([x, h])
    r = np.linalg.qr(a, mode="r")
    sign = np.concatenate([np.ones(x.shape[1]), -np.ones(h.shape[1])])
    core = (r * sign) @ r.T
    return float(np.linalg.norm(core)) / base


def train(
    emb,
    schedule: AlphaSchedule | None = None,
    config: TrainConfig | None = None,
    *,
    resume: Checkpoint | None = None,
    on_segment_end: Callable[[Checkpoint], None] | None = None,
):
    """Run the alternating NLS iteration with an escalating penalty.

    For each penalty value the loop repeats ``W <- H`` followed by an NLS
    update of ``H`` until the relative change of the objective drops below
    ``config.outer_tolerance`` (or ``max_outer_iterations`` is spent). If the
    factors then still differ by more than ``closeness_threshold`` in relative
    Frobenius norm, ``alpha`` is multiplied by ``growth_factor`` and the loop
    continues from the current ``H``.

    Parameters
    ----------
    emb : DenseEmbedding or ndarray
        The word matrix ``X``. Centered input is expected for word vectors;
        this is not enforced.
    resume : Checkpoint, optional
        Continue from a saved state instead of a fresh initialization.
    on_segment_end : callable, optional
        Called with the state that would start the next penalty segment;
        resuming from it reproduces the remaining run exactly.

    Returns
    -------
    (FactorPair, TrainReport)
        ``H`` is the factor to use as the lifted representation.

    Raises
    ------
    NumericalError
        If the objective becomes non-finite or an ``H``-update increases it.
    """
    schedule = schedule or AlphaSchedule()
    config = config or TrainConfig()
    x = _matrix(emb)
    n = x.shape[0]
    if n < 2:
        raise ContractError("training needs at least two words")
    if not np.all(np.isfinite(x)):
        raise ContractError("embedding contains non-finite values")

    if resume is None:
        h = initialize_factors(x, config).h
        alpha = schedule.initial
        it = 0
    else:
        _check_shapes(x, resume.factors)
        if resume.factors.shape[1] != config.lifted_dimension:
            raise ContractError("checkpoint dimension differs from the configured one")
        h = resume.factors.h.copy()
        alpha = float(resume.alpha)
        it = int(resume.iteration)

    xtx = x.T @ x
    scale = float(np.vdot(xtx, xtx))
    trace = []
    copies = []
    w = h
    converged = False
    while True:
        prev = None
        for _ in range(config.max_outer_iterations):
            w = h
            start = relaxed_objective(x, FactorPair(w, w), alpha)
            problem = NlsProblem.from_factors(x, w, alpha)
            h = solve_nls(problem, w, config.nls)
            f = relaxed_objective(x, FactorPair(w, h), alpha)
            trace.append((it, alpha, f))
            copies.append(start)
            it += 1
            if not math.isfinite(f):
                raise NumericalError("objective is not finite", iteration=it, trace=trace)
            if f > start + _MONOTONE_SLACK * max(scale, 1.0):
                raise NumericalError(
                    f"H-update increased the objective from {start!r} to {f!r}",
                    iteration=it,
                    trace=trace,
                )
            if prev is not None and abs(prev - f) <= config.outer_tolerance * max(abs(prev), 1e-300):
                break
            prev = f

        closeness = FactorPair(w, h).closeness()
        log.info("alpha=%g iterations=%d objective=%.6g closeness=%.3g", alpha, it, f, closeness)
        if closeness <= schedule.closeness_threshold:
            converged = True
            break
        if alpha >= schedule.max_alpha:
            log.warning("alpha reached its cap %g with closeness %.3g", alpha, closeness)
            break
        alpha = min(alpha * schedule.growth_factor, schedule.max_alpha)
        if on_segment_end is not None:
            on_segment_end(Checkpoint(FactorPair(h, h), alpha, it))

    factors = FactorPair(w, h)
    report = TrainReport(
        objective_trace=trace,
        final_closeness=closeness,
        relative_gram_error=gram_error(x, factors),
        iterations_used=len(trace),
        final_alpha=alpha,
        converged=converged,
        copy_objectives=copies,
    )
    return factors, report


def write_checkpoint(path: str | os.PathLike, factors: FactorPair, alpha: float, iteration: int) -> None:
    """Binary dump: magic, N and d' (uint64), W and H row-major float64, alpha, iteration.

    All fields little-endian.
    """
    n, dp = factors.shape
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<QQ", n, dp))
        fh.write(np.ascontiguousarray(factors.w, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(factors.h, dtype="<f8").tobytes())
        fh.write(struct.pack("<dQ", float(alpha), int(iteration)))


def read_checkpoint(path: str | os.PathLike) -> Checkpoint:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:16] != CHECKPOINT_MAGIC:
        raise ParseError(f"{os.fspath(path)} is not a factor checkpoint (bad magic)")
    if len(data) < 32:
        raise ParseError("truncated checkpoint header")
    n, dp = struct.unpack_from("<QQ", data, 16)
    body = 8 * n * dp
    expected = 32 + 2 * body + 16
    if len(data) != expected:
        raise ParseError(f"checkpoint size {len(data)} does not match header ({expected} bytes expected)")
    w = np.frombuffer(data, dtype="<f8", count=n * dp, offset=32).reshape(n, dp).astype(np.float64)
    h = np.frombuffer(data, dtype="<f8", count=n * dp, offset=32 + body).reshape(n, dp).astype(np.float64)
    alpha, iteration = struct.unpack_from("<dQ", data, 32 + 2 * body)
    return Checkpoint(FactorPair(w, h), alpha, iteration)
