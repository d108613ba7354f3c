import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spacevar import (
    ConvergenceError,
    GramSystem,
    PredictorMask,
    ValidationError,
    build_gram,
    full_mask,
    kkt_residual,
    lambda_grid,
    lambda_max,
    lasso_cd,
    lasso_path,
)
from spacevar.errors import (
    DegeneratePredictorError,
    EmptyMaskError,
    InsufficientDataError,
    PreprocessingRequiredError,
)
from spacevar.regression import lagged_design, objective_value
from spacevar.var_model import TimeSeriesPanel

from conftest import make_panel
from oracles import brute_force_lasso, random_gram_problem


def system_from(gram, gamma, n=10) -> GramSystem:
    gram = np.asarray(gram, dtype=float)
    gamma = np.asarray(gamma, dtype=float).reshape(-1, 1)
    p = gram.shape[0]
    return GramSystem(gram, gamma, n, tuple((j, 1) for j in range(p)), 1, p)


class TestBuildGram:
    def test_hand_computed_scalar_series(self, panel_123):
        g = build_gram(panel_123, 1)
        assert g.n_effective == 2
        assert g.gram == pytest.approx(np.array([[2.5]]))
        assert g.xty == pytest.approx(np.array([[4.0]]))

    def test_zero_panel(self):
        g = build_gram(make_panel(np.zeros((5, 2))), 2)
        assert np.all(g.gram == 0) and np.all(g.xty == 0)

    def test_gram_is_exactly_symmetric(self):
        rng = np.random.default_rng(0)
        g = build_gram(make_panel(rng.standard_normal((30, 3))), 2)
        assert np.array_equal(g.gram, g.gram.T)

    def test_predictor_index_is_lag_major(self):
        g = build_gram(make_panel(np.zeros((9, 3))), 2)
        assert g.predictor_index[:3] == ((0, 1), (1, 1), (2, 1))
        assert g.predictor_index[3:] == ((0, 2), (1, 2), (2, 2))

    def test_missing_values_rejected(self):
        panel = TimeSeriesPanel(
            np.array([[1.0], [np.nan], [3.0]]), ("a",)
        )
        with pytest.raises(PreprocessingRequiredError):
            build_gram(panel, 1)

    def test_too_short_rejected(self, panel_123):
        with pytest.raises(InsufficientDataError):
            build_gram(panel_123, 3)

    def test_lagged_design_alignment(self):
        values = np.arange(12.0).reshape(6, 2)
        X, Y = lagged_design(values, 2)
        assert np.array_equal(Y, values[2:])
        assert np.array_equal(X[:, :2], values[1:5])
        assert np.array_equal(X[:, 2:], values[0:4])


class TestLambdaMax:
    def test_full_mask(self):
        s = system_from(np.eye(2), [1.0, -0.2])
        assert lambda_max(s, 0, full_mask(2)) == pytest.approx(2.0)

    def test_masked(self):
        s = system_from(np.eye(2), [1.0, -0.2])
        mask = PredictorMask(np.array([False, True]))
        assert lambda_max(s, 0, mask) == pytest.approx(0.4)

    def test_zero_gamma_any_lambda_kills_solution(self):
        s = system_from(np.eye(2), [0.0, 0.0])
        assert lambda_max(s, 0, full_mask(2)) == 0.0
        sol = lasso_cd(s, 0, full_mask(2), 0.5)
        assert np.all(sol.beta == 0)

    def test_empty_mask_rejected(self):
        s = system_from(np.eye(2), [1.0, -0.2])
        with pytest.raises(EmptyMaskError):
            lambda_max(s, 0, PredictorMask(np.array([False, False])))


class TestLassoCd:
    def test_lambda_at_max_gives_zero(self):
        rng = np.random.default_rng(1)
        gram, gamma, n = random_gram_problem(rng, 4)
        s = system_from(gram, gamma, n)
        lam = lambda_max(s, 0, full_mask(4))
        sol = lasso_cd(s, 0, full_mask(4), lam * 1.000001)
        assert np.all(sol.beta == 0.0)

    def test_orthonormal_soft_threshold(self):
        s = system_from(np.eye(2), [1.0, 0.2])
        sol = lasso_cd(s, 0, full_mask(2), 0.5)
        assert sol.beta == pytest.approx(np.array([0.75, 0.0]))

    def test_lambda_zero_matches_linear_solve(self):
        rng = np.random.default_rng(2)
        gram, gamma, n = random_gram_problem(rng, 5)
        s = system_from(gram, gamma, n)
        sol = lasso_cd(s, 0, full_mask(5), 0.0, tol=1e-10)
        assert sol.beta == pytest.approx(np.linalg.solve(gram, gamma), abs=1e-9)
        assert sol.kkt_residual <= 1e-9

    def test_masked_coordinates_exactly_zero(self):
        rng = np.random.default_rng(3)
        gram, gamma, n = random_gram_problem(rng, 6)
        s = system_from(gram, gamma, n)
        mask = PredictorMask(np.array([True, False, True, False, True, False]))
        sol = lasso_cd(s, 0, mask, 0.05)
        assert np.all(sol.beta[~mask.allowed] == 0.0)

    def test_degenerate_predictor_with_signal_rejected(self):
        gram = np.diag([1.0, 0.0])
        s = system_from(gram, [0.5, 0.3])
        with pytest.raises(DegeneratePredictorError):
            lasso_cd(s, 0, full_mask(2), 0.1)

    def test_degenerate_predictor_without_signal_dropped(self):
        gram = np.diag([1.0, 0.0])
        s = system_from(gram, [0.5, 0.0])
        with pytest.warns(UserWarning, match="zero-variance"):
            sol = lasso_cd(s, 0, full_mask(2), 0.1)
        assert sol.beta[1] == 0.0

    def test_non_convergence_carries_last_iterate(self):
        rng = np.random.default_rng(4)
        gram, gamma, n = random_gram_problem(rng, 6)
        s = system_from(gram, gamma, n)
        with pytest.raises(ConvergenceError) as err:
            lasso_cd(s, 0, full_mask(6), 0.01, tol=1e-14, max_iter=1)
        assert err.value.last_iterate is not None
        assert err.value.last_iterate.shape == (6,)

    def test_brute_force_small_problems(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            p = int(rng.integers(1, 7))
            gram, gamma, n = random_gram_problem(rng, p)
            s = system_from(gram, gamma, n)
            lam = float(rng.uniform(0.02, 1.0))
            sol = lasso_cd(s, 0, full_mask(p), lam, tol=1e-10)
            best_obj, _ = brute_force_lasso(gram, gamma, lam)
            assert sol.objective == pytest.approx(best_obj, abs=1e-6)
            assert sol.kkt_residual <= 1e-6

    def test_objective_monotone_over_sweeps(self):
        rng = np.random.default_rng(6)
        gram, gamma, n = random_gram_problem(rng, 8)
        s = system_from(gram, gamma, n)
        lam = 0.1
        objectives = []
        for sweeps in range(1, 8):
            try:
                sol = lasso_cd(s, 0, full_mask(8), lam, tol=1e-16, max_iter=sweeps)
                beta = sol.beta
            except ConvergenceError as err:
                beta = err.last_iterate
            objectives.append(objective_value(s, 0, beta, lam))
        assert all(b <= a + 1e-12 for a, b in zip(objectives, objectives[1:]))

    def test_masking_equivalence_against_reduced_system(self):
        rng = np.random.default_rng(7)
        n, p = 40, 6
        X = rng.standard_normal((n, p))
        y = rng.standard_normal(n)
        keep = np.array([True, False, True, True, False, True])
        lam = 0.15
        s_full = system_from(X.T @ X / n, X.T @ y / n, n)
        sol_masked = lasso_cd(s_full, 0, PredictorMask(keep), lam, tol=1e-10)
        Xr = X[:, keep]
        s_red = system_from(Xr.T @ Xr / n, Xr.T @ y / n, n)
        sol_red = lasso_cd(s_red, 0, full_mask(int(keep.sum())), lam, tol=1e-10)
        assert sol_masked.beta[keep] == pytest.approx(sol_red.beta, abs=1e-9)

    @given(st.integers(0, 2**32 - 1), st.floats(0.1, 10.0))
    @settings(max_examples=20, deadline=None)
    def test_scaling_invariance(self, seed, c):
        rng = np.random.default_rng(seed)
        gram, gamma, n = random_gram_problem(rng, 4)
        lam = 0.2
        s1 = system_from(gram, gamma, n)
        s2 = system_from(c * gram, c * gamma, n)
        b1 = lasso_cd(s1, 0, full_mask(4), lam, tol=1e-10).beta
        b2 = lasso_cd(s2, 0, full_mask(4), c * lam, tol=1e-10).beta
        assert b1 == pytest.approx(b2, abs=1e-6)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_warm_start_does_not_change_solution(self, seed):
        rng = np.random.default_rng(seed)
        gram, gamma, n = random_gram_problem(rng, 5)
        s = system_from(gram, gamma, n)
        lam = 0.1
        cold = lasso_cd(s, 0, full_mask(5), lam, tol=1e-10)
        warm = lasso_cd(
            s, 0, full_mask(5), lam, tol=1e-10,
            warm_start=rng.standard_normal(5),
        )
        assert cold.beta == pytest.approx(warm.beta, abs=1e-6)


class TestKktResidual:
    def test_zero_beta_large_lambda(self):
        s = system_from(np.eye(2), [0.4, -0.1])
        lam = 2 * 0.4 + 0.1
        assert kkt_residual(s, 0, np.zeros(2), lam, full_mask(2)) == 0.0

    def test_linear_solve_at_lambda_zero(self):
        rng = np.random.default_rng(8)
        gram, gamma, n = random_gram_problem(rng, 5)
        s = system_from(gram, gamma, n)
        beta = np.linalg.solve(gram, gamma)
        assert kkt_residual(s, 0, beta, 0.0, full_mask(5)) <= 1e-9

    def test_nonzero_beta_outside_mask_rejected(self):
        s = system_from(np.eye(2), [0.4, -0.1])
        mask = PredictorMask(np.array([True, False]))
        with pytest.raises(ValidationError):
            kkt_residual(s, 0, np.array([0.0, 1.0]), 0.1, mask)


class TestLambdaGrid:
    def test_geometric_span(self):
        grid = lambda_grid(2.0, 50, 0.01)
        assert grid.size == 50
        assert grid[0] == pytest.approx(2.0)
        assert grid[-1] == pytest.approx(0.02)
        ratios = grid[1:] / grid[:-1]
        assert np.allclose(ratios, ratios[0])

    def test_zero_max(self):
        assert np.array_equal(lambda_grid(0.0), np.zeros(1))

    def test_path_matches_single_fits(self):
        rng = np.random.default_rng(9)
        gram, gamma, n = random_gram_problem(rng, 5)
        s = system_from(gram, gamma, n)
        grid = lambda_grid(lambda_max(s, 0, full_mask(5)), 8, 0.1)
        path = lasso_path(s, 0, full_mask(5), grid, tol=1e-10)
        for li, lam in enumerate(grid):
            single = lasso_cd(s, 0, full_mask(5), float(lam), tol=1e-10)
            assert path[li] == pytest.approx(single.beta, abs=1e-7)
