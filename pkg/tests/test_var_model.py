import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spacevar import (
    NoiseSpec,
    StabilityError,
    TimeSeriesPanel,
    TransitionStack,
    ValidationError,
    VarProcess,
    companion_spectral_radius,
    forecast,
    read_panel_csv,
    simulate,
    stationary_covariance,
    write_panel_csv,
)
from spacevar.errors import InsufficientDataError, ShapeError

from conftest import make_panel


class TestPanel:
    def test_rejects_duplicate_ids(self):
        with pytest.raises(ValidationError):
            TimeSeriesPanel(np.zeros((3, 2)), ("a", "a"))

    def test_rejects_mask_shape_mismatch(self):
        with pytest.raises(ShapeError):
            TimeSeriesPanel(np.zeros((3, 2)), ("a", "b"), np.zeros((2, 2), bool))

    def test_effective_obs(self):
        panel = make_panel(np.zeros((10, 2)))
        assert panel.effective_obs(3) == 7

    def test_values_read_only(self):
        panel = make_panel(np.zeros((3, 1)))
        with pytest.raises(ValueError):
            panel.values[0, 0] = 1.0


class TestCompanionRadius:
    def test_zero_stack_is_nilpotent(self):
        stack = TransitionStack((np.zeros((3, 3)), np.zeros((3, 3))))
        assert companion_spectral_radius(stack) == 0.0

    def test_scalar_lag_one(self):
        assert companion_spectral_radius(
            TransitionStack((np.array([[0.95]]),))
        ) == pytest.approx(0.95)

    def test_scalar_lag_two_matches_root_oracle(self):
        # largest root of z^2 - 0.5 z - 0.3 via the quadratic formula
        expected = (0.5 + np.sqrt(0.25 + 1.2)) / 2.0
        stack = TransitionStack((np.array([[0.5]]), np.array([[0.3]])))
        assert companion_spectral_radius(stack) == pytest.approx(expected, abs=1e-12)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            TransitionStack((np.zeros((2, 2)), np.zeros((3, 3))))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        k, L = 4, 2
        mats = tuple(0.3 * rng.standard_normal((k, k)) for _ in range(L))
        perm = rng.permutation(k)
        permuted = tuple(A[np.ix_(perm, perm)] for A in mats)
        assert companion_spectral_radius(
            TransitionStack(mats)
        ) == pytest.approx(
            companion_spectral_radius(TransitionStack(permuted)), abs=1e-10
        )


class TestSimulate:
    def test_zero_dynamics_gives_standard_normal(self):
        proc = VarProcess(TransitionStack((np.zeros((3, 3)),)), NoiseSpec([1, 1, 1]))
        panel = simulate(proc, 10_000, seed=1)
        assert np.all(np.abs(panel.values.mean(axis=0)) < 4 / np.sqrt(10_000))

    def test_ar1_variance_matches_closed_form(self, ar1_process):
        panel = simulate(ar1_process, 50_000, seed=2)
        assert panel.values.var() == pytest.approx(4.0 / 3.0, rel=0.05)

    def test_determinism(self, ar1_process):
        a = simulate(ar1_process, 100, seed=7)
        b = simulate(ar1_process, 100, seed=7)
        assert np.array_equal(a.values, b.values)

    def test_unstable_rejected_without_override(self):
        proc = VarProcess(TransitionStack((np.array([[1.01]]),)), NoiseSpec([1.0]))
        with pytest.raises(StabilityError):
            simulate(proc, 10, seed=0)
        panel = simulate(proc, 10, burn_in=0, seed=0, allow_unstable=True)
        assert panel.n_obs == 10

    def test_near_unit_root_warns(self):
        proc = VarProcess(TransitionStack((np.array([[0.995]]),)), NoiseSpec([1.0]))
        with pytest.warns(UserWarning, match="near the unit root"):
            simulate(proc, 10, seed=0)


class TestStationaryCovariance:
    def test_no_dynamics_returns_noise_diagonal(self):
        proc = VarProcess(
            TransitionStack((np.zeros((2, 2)),)), NoiseSpec([2.0, 3.0])
        )
        assert np.allclose(stationary_covariance(proc), np.diag([2.0, 3.0]))

    def test_ar1_closed_form(self, ar1_process):
        V = stationary_covariance(ar1_process, tol=1e-14)
        assert V[0, 0] == pytest.approx(4.0 / 3.0, abs=1e-10)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=15, deadline=None)
    def test_symmetric_positive_definite(self, seed):
        rng = np.random.default_rng(seed)
        k, L = 3, 2
        mats = [rng.standard_normal((k, k)) for _ in range(L)]
        stack = TransitionStack(tuple(mats))
        radius = companion_spectral_radius(stack)
        stack = stack.scaled(0.6 / radius) if radius > 0 else stack
        proc = VarProcess(stack, NoiseSpec(rng.uniform(0.5, 2.0, k)))
        V = stationary_covariance(proc)
        assert np.allclose(V, V.T)
        assert np.all(np.linalg.eigvalsh(V) > 0)

    def test_long_run_empirical_match(self):
        rng = np.random.default_rng(5)
        A = np.array([[0.5, 0.2], [0.2, 0.4]])
        proc = VarProcess(TransitionStack((A,)), NoiseSpec([1.0, 1.0]))
        panel = simulate(proc, 60_000, seed=11)
        emp = np.cov(panel.values.T, bias=True)
        theo = stationary_covariance(proc)
        assert np.all(np.abs(emp - theo) <= 0.05 * np.abs(theo))


class TestForecast:
    def test_zero_stack_forecasts_zero(self):
        stack = TransitionStack((np.zeros((2, 2)),))
        panel = make_panel(np.ones((5, 2)))
        assert np.array_equal(forecast(panel, stack, 3), np.zeros((3, 2)))

    def test_hand_computed_one_step(self, small_var2):
        panel = make_panel(np.array([[0.0, 0.0], [1.0, 1.0]]))
        pred = forecast(panel, small_var2.transition, 1)
        assert pred == pytest.approx(np.array([[0.5, 0.3]]))

    def test_linearity(self):
        rng = np.random.default_rng(3)
        stack = TransitionStack((0.4 * rng.standard_normal((3, 3)),))
        X = rng.standard_normal((6, 3))
        Y = rng.standard_normal((6, 3))
        a, b = 1.7, -0.4
        lhs = forecast(make_panel(a * X + b * Y), stack, 4)
        rhs = a * forecast(make_panel(X), stack, 4) + b * forecast(
            make_panel(Y), stack, 4
        )
        assert np.allclose(lhs, rhs)

    def test_recursion_consistency(self, small_var2):
        rng = np.random.default_rng(4)
        values = rng.standard_normal((8, 2))
        panel = make_panel(values)
        one = forecast(panel, small_var2.transition, 1)
        extended = make_panel(np.vstack([values, one]))
        assert np.allclose(
            forecast(extended, small_var2.transition, 1),
            forecast(panel, small_var2.transition, 2)[-1:],
        )

    def test_short_history_rejected(self, small_var2):
        stack = TransitionStack((small_var2.transition.matrices[0],) * 3)
        with pytest.raises(InsufficientDataError):
            forecast(make_panel(np.ones((2, 2))), stack, 1)


class TestPanelCsv:
    def test_round_trip_with_missing(self, tmp_path):
        values = np.array([[1.0, 2.0], [np.nan, 4.0], [5.0, np.nan]])
        panel = TimeSeriesPanel(values, ("a", "b"))
        path = tmp_path / "panel.csv"
        write_panel_csv(panel, path)
        back = read_panel_csv(path)
        assert back.series_ids == ("a", "b")
        assert back.has_missing()
        obs = ~np.isnan(values)
        assert np.array_equal(back.values[obs], values[obs])
        assert np.array_equal(np.isnan(back.values), ~obs)

    def test_reads_empty_field_as_missing(self, tmp_path):
        path = tmp_path / "panel.csv"
        path.write_text("t,a,b\n0,1.0,\n1,NA,2.0\n")
        panel = read_panel_csv(path)
        assert panel.missing_mask is not None
        assert panel.missing_mask.sum() == 2

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "panel.csv"
        path.write_text("time,a\n0,1.0\n")
        with pytest.raises(ValidationError):
            read_panel_csv(path)
