import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splift import ContractError, NlsConfig, NlsProblem, nls_objective, projected_gradient, solve_nls
from splift.nls import gradient

from oracles import enumerate_nls, stacked_nls_objective

STRICT = NlsConfig(max_iterations=5000, tolerance=1e-10)


def random_problem(rng, n, dp, alpha=None):
    a = rng.random((rng.integers(1, 6), dp))
    alpha = rng.uniform(0.05, 2.0) if alpha is None else alpha
    gram = a.T @ a + alpha * np.eye(dp)
    rhs = rng.normal(size=(n, dp)) * 2
    return NlsProblem(gram, rhs)


class TestProblem:
    def test_asymmetric_gram_rejected(self):
        with pytest.raises(ContractError):
            NlsProblem([[1.0, 0.5], [0.0, 1.0]], [[1.0, 1.0]])

    def test_nonpositive_diagonal_rejected(self):
        with pytest.raises(ContractError):
            NlsProblem([[0.0, 0.0], [0.0, 1.0]], [[1.0, 1.0]])

    def test_shape_mismatch(self):
        with pytest.raises(ContractError):
            NlsProblem(np.eye(2), np.ones((1, 3)))

    def test_from_factors_normal_equations(self):
        rng = np.random.default_rng(0)
        x, w = rng.normal(size=(6, 3)), rng.random((6, 4))
        p = NlsProblem.from_factors(x, w, 0.7)
        np.testing.assert_allclose(p.gram, w.T @ w + 0.7 * np.eye(4), rtol=1e-13)
        np.testing.assert_allclose(p.rhs, (x @ x.T) @ w + 0.7 * w, rtol=1e-12)


class TestObjective:
    def test_zero_candidate(self):
        p = NlsProblem(np.eye(2), [[3.0, -1.0]])
        assert nls_objective(p, np.zeros((1, 2))) == 0.0

    def test_hand_arithmetic(self):
        p = NlsProblem(np.eye(2), [[1.0, 1.0]])
        assert nls_objective(p, [[1.0, 1.0]]) == -1.0

    def test_matches_stacked_form(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            x, w = rng.normal(size=(5, 2)), rng.random((5, 3))
            alpha = rng.uniform(0.1, 3.0)
            c = rng.random((5, 3))
            p = NlsProblem.from_factors(x, w, alpha)
            ref = stacked_nls_objective(x, w, alpha, c)
            assert nls_objective(p, c) == pytest.approx(ref, rel=1e-10, abs=1e-10)

    def test_shape_contract(self):
        with pytest.raises(ContractError):
            nls_objective(NlsProblem(np.eye(2), np.ones((1, 2))), np.ones((2, 2)))


class TestProjectedGradient:
    def test_interior_equals_gradient(self):
        rng = np.random.default_rng(2)
        p = random_problem(rng, 3, 4)
        c = rng.random((3, 4)) + 0.1
        np.testing.assert_array_equal(projected_gradient(p, c), gradient(p, c))

    def test_origin_kkt(self):
        p = NlsProblem(np.eye(3), -np.abs(np.random.default_rng(3).normal(size=(2, 3))))
        assert not np.any(projected_gradient(p, np.zeros((2, 3))))

    def test_finite_differences(self):
        rng = np.random.default_rng(4)
        h = 1e-6
        for _ in range(10):
            p = random_problem(rng, 3, 4)
            c = rng.random((3, 4))
            c[rng.random((3, 4)) < 0.3] = 0.0
            fd = np.empty_like(c)
            for idx in np.ndindex(*c.shape):
                e = np.zeros_like(c)
                e[idx] = h
                fd[idx] = (nls_objective(p, c + e) - nls_objective(p, c - e)) / (2 * h)
            expected = np.where(c > 0, fd, np.minimum(fd, 0.0))
            got = projected_gradient(p, c)
            assert np.linalg.norm(got - expected) <= 1e-5 * max(np.linalg.norm(expected), 1.0)

    def test_negative_candidate_rejected(self):
        with pytest.raises(ContractError):
            projected_gradient(NlsProblem(np.eye(1), [[1.0]]), [[-1.0]])


class TestSolve:
    def test_identity_projection(self):
        p = NlsProblem(np.eye(2), [[1.0, -2.0]])
        np.testing.assert_allclose(solve_nls(p, np.ones((1, 2)), STRICT), [[1.0, 0.0]], atol=1e-9)

    def test_feasible_unconstrained_optimum(self):
        r = np.array([[0.5, 2.0, 3.0], [1.0, 0.0, 4.0]])
        out = solve_nls(NlsProblem(np.eye(3), r), np.zeros_like(r), STRICT)
        np.testing.assert_allclose(out, r, atol=1e-9)

    def test_one_by_three_matches_enumeration(self):
        rng = np.random.default_rng(5)
        p = random_problem(rng, 1, 3)
        best, _ = enumerate_nls(p.gram, p.rhs)
        out = solve_nls(p, rng.random((1, 3)), STRICT)
        assert nls_objective(p, out) == pytest.approx(best, abs=1e-6)

    def test_default_config_close_to_optimum(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            p = random_problem(rng, 3, 4)
            best, _ = enumerate_nls(p.gram, p.rhs)
            out = solve_nls(p, rng.random((3, 4)))
            assert nls_objective(p, out) - best <= 1e-4 * max(1.0, abs(best))

    def test_kkt_certificate(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            p = random_problem(rng, 3, 4)
            out = solve_nls(p, rng.random((3, 4)), STRICT)
            g = gradient(p, out)
            scale = max(1.0, np.max(np.abs(p.rhs)))
            assert np.all(np.abs(g[out > 0]) <= 1e-4 * scale)
            assert np.all(g[out == 0] >= -1e-4 * scale)

    def test_initial_not_modified(self):
        rng = np.random.default_rng(8)
        p = random_problem(rng, 2, 3)
        init = rng.random((2, 3))
        keep = init.copy()
        solve_nls(p, init)
        np.testing.assert_array_equal(init, keep)

    def test_deterministic(self):
        rng = np.random.default_rng(9)
        p = random_problem(rng, 4, 4)
        init = rng.random((4, 4))
        assert solve_nls(p, init).tobytes() == solve_nls(p, init).tobytes()

    def test_already_optimal_returns_immediately(self):
        p = NlsProblem(np.eye(2), [[1.0, 2.0]])
        out, info = solve_nls(p, [[1.0, 2.0]], return_info=True)
        assert info.iterations == 0 and info.converged
        np.testing.assert_array_equal(out, [[1.0, 2.0]])

    def test_negative_initial_rejected(self):
        with pytest.raises(ContractError):
            solve_nls(NlsProblem(np.eye(1), [[1.0]]), [[-0.5]])

    def test_config_ranges(self):
        with pytest.raises(ContractError):
            NlsConfig(step_shrink=1.0)
        with pytest.raises(ContractError):
            NlsConfig(tolerance=0.0)
        with pytest.raises(ContractError):
            NlsConfig(max_iterations=0)


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    n=st.integers(1, 3),
    dp=st.integers(1, 4),
)
def test_oracle_equivalence_and_invariants(seed, n, dp):
    rng = np.random.default_rng(seed)
    p = random_problem(rng, n, dp)
    init = rng.random((n, dp))
    out = solve_nls(p, init, STRICT)
    best, _ = enumerate_nls(p.gram, p.rhs)
    assert np.all(out >= 0)
    assert nls_objective(p, out) <= nls_objective(p, init) + 1e-12
    assert nls_objective(p, out) == pytest.approx(best, abs=1e-6)


def test_monotone_per_iteration():
    # truncating after i iterations must give a non-increasing objective sequence
    rng = np.random.default_rng(10)
    p = random_problem(rng, 5, 4, alpha=0.01)
    init = rng.random((5, 4))
    values = [nls_objective(p, solve_nls(p, init, NlsConfig(max_iterations=i, tolerance=1e-12))) for i in range(1, 25)]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))
