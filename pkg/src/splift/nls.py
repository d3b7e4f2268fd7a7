"""Projected-gradient solver for multi-row non-negative least squares.

The sub-problem solved here is

    min_{C >= 0}  1/2 <C G, C>_F - <C, R>_F

which is the normal-equation form of a stacked least squares system
``|| [W; sqrt(a) I] C^T - [T; sqrt(a) V^T] ||_F^2`` with ``G = W^T W + a I``
and ``R = T^T W + a V`` (up to a factor of two and an additive constant).
Only ``G`` (``d' x d'``) and ``R`` (``N x d'``) are ever needed.

Each iteration is a projected gradient step with Armijo backtracking along
the projection arc (C.-J. Lin, "Projected gradient methods for non-negative
matrix factorization", Neural Computation 19, 2007). The first trial step is
the Barzilai-Borwein step of the previously accepted move, which keeps the
objective monotone while converging far faster than a fixed restart step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from splift.errors import ContractError, NumericalError

log = logging.getLogger(__name__)

_MAX_SEARCH_TRIALS = 60


@dataclass(frozen=True)
class NlsConfig:
    max_iterations: int = 200
    tolerance: float = 1e-4
    step_shrink: float = 0.5
    sufficient_decrease: float = 0.01

    def __post_init__(self):
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ContractError("max_iterations must be a positive integer")
        if not self.tolerance > 0:
            raise ContractError("tolerance must be positive")
        if not 0 < self.step_shrink < 1:
            raise ContractError("step_shrink must lie in (0, 1)")
        if not 0 < self.sufficient_decrease < 1:
            raise ContractError("sufficient_decrease must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class NlsProblem:
    """Quadratic data ``(G, R)`` of one NLS sub-problem.

    ``gram`` must be symmetric with a strictly positive diagonal.
    """

    gram: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gram, dtype=np.float64)
        r = np.asarray(self.rhs, dtype=np.float64)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ContractError(f"gram must be square, got shape {g.shape}")
        if r.ndim != 2 or r.shape[1] != g.shape[0]:
            raise ContractError(f"rhs shape {r.shape} incompatible with gram shape {g.shape}")
        scale = float(np.max(np.abs(g))) if g.size else 0.0
        if g.size and float(np.max(np.abs(g - g.T))) > 1e-10 * max(scale, 1e-300):
            raise ContractError("gram matrix is not symmetric")
        if g.size and not np.all(np.diag(g) > 0):
            raise ContractError("gram matrix must have a strictly positive diagonal")
        object.__setattr__(self, "gram", g)
        object.__setattr__(self, "rhs", r)

    @classmethod
    def from_factors(cls, x: np.ndarray, w: np.ndarray, alpha: float) -> "NlsProblem":
        """Build the H-update problem for a fixed ``W`` and penalty ``alpha``.

        ``G = W^T W + alpha I`` and ``R = X (X^T W) + alpha W``; the product
        ``X X^T`` is never formed.
        """
        if alpha <= 0:
            raise ContractError("alpha must be positive")
        gram = w.T @ w
        gram = 0.5 * (gram + gram.T)
        gram[np.diag_indices_from(gram)] += alpha
        rhs = x @ (x.T @ w)
        rhs += alpha * w
        return cls(gram, rhs)

    @property
    def shape(self):
        return self.rhs.shape


def _check_candidate(problem, candidate):
    c = np.asarray(candidate, dtype=np.float64)
    if c.shape != problem.rhs.shape:
        raise ContractError(f"candidate shape {c.shape} does not match problem shape {problem.rhs.shape}")
    return c


def nls_objective(problem: NlsProblem, candidate: np.ndarray) -> float:
    """``1/2 <C G, C> - <C, R>``, the sub-problem objective up to a constant."""
    c = _check_candidate(problem, candidate)
    return float(0.5 * np.vdot(c @ problem.gram, c) - np.vdot(c, problem.rhs))


def gradient(problem: NlsProblem, candidate: np.ndarray) -> np.ndarray:
    c = _check_candidate(problem, candidate)
    return c @ problem.gram - problem.rhs


def _project_gradient(c, g):
    return np.where(c > 0, g, np.minimum(g, 0.0))


def projected_gradient(problem: NlsProblem, candidate: np.ndarray) -> np.ndarray:
    """Gradient restricted to feasible directions.

    Free entries keep the full gradient; entries sitting on the bound keep only
    the negative part. All zeros certifies a KKT point.
    """
    c = _check_candidate(problem, candidate)
    if np.any(c < 0):
        raise ContractError("candidate must be element-wise non-negative")
    return _project_gradient(c, c @ problem.gram - problem.rhs)


@dataclass
class NlsInfo:
    iterations: int
    initial_pg_norm: float
    final_pg_norm: float
    objective: float
    converged: bool


def solve_nls(
    problem: NlsProblem,
    initial: np.ndarray,
    config: NlsConfig | None = None,
    *,
    return_info: bool = False,
):
    """Minimize the NLS objective over the non-negative orthant.

    Parameters
    ----------
    problem : NlsProblem
    initial : ndarray, shape (N, d')
        Non-negative starting point. Not modified.
    config : NlsConfig, optional
    return_info : bool
        Also return an :class:`NlsInfo` with iteration statistics.

    Returns
    -------
    ndarray
        Non-negative solution whose objective is no larger than that of
        ``initial``. Iteration stops once the projected gradient norm falls
        below ``tolerance`` times its initial value.
    """
    config = config or NlsConfig()
    c = _check_candidate(problem, initial).copy()
    if np.any(c < 0) or not np.all(np.isfinite(c)):
        raise ContractError("initial point must be finite and element-wise non-negative")

    gram, rhs = problem.gram, problem.rhs
    grad = c @ gram - rhs
    f = float(0.5 * np.vdot(grad - rhs, c))
    pg_norm0 = float(np.linalg.norm(_project_gradient(c, grad)))
    pg_norm = pg_norm0
    stop = config.tolerance * pg_norm0
    sigma = config.sufficient_decrease
    shrink = config.step_shrink

    step = 1.0 / max(float(np.max(np.diag(gram))), 1e-300) if gram.size else 1.0
    it = 0
    converged = pg_norm0 == 0.0
    while not converged and it < config.max_iterations:
        it += 1
        accepted = None
        trial_step = step
        for _ in range(_MAX_SEARCH_TRIALS):
            cand = np.maximum(c - trial_step * grad, 0.0)
            d = cand - c
            dg = d @ gram
            lin = float(np.vdot(grad, d))
            change = lin + 0.5 * float(np.vdot(dg, d))
            if lin <= 0.0 and change <= sigma * lin:
                accepted = (cand, d, dg, change)
                break
            trial_step *= shrink

        if accepted is None or not np.any(accepted[1]):
            # no feasible descent at representable step sizes
            log.debug("nls line search stalled at iteration %d", it)
            break
        c, d, dg, change = accepted
        grad = grad + dg
        f_new = f + change
        if not np.isfinite(f_new) or not np.all(np.isfinite(grad)):
            raise NumericalError("non-finite value in NLS iteration", iteration=it)
        if change > 0:
            raise NumericalError("NLS objective increased", iteration=it)
        f = f_new
        pg_norm = float(np.linalg.norm(_project_gradient(c, grad)))
        converged = pg_norm <= stop
        # next trial: Barzilai-Borwein step from the accepted move d and its gradient change dG
        curvature = float(np.vdot(d, dg))
        step = float(np.vdot(d, d)) / curvature if curvature > 0 else trial_step

    if return_info:
        info = NlsInfo(it, pg_norm0, pg_norm, nls_objective(problem, c), bool(converged))
        return c, info
    return c
