import numpy as np
import pytest

from errors import DimensionError, Singular
from instances import LOGD_OVER_ALPHA2
from noise import SymGeomParams
from regression import (
    estimate_huber,
    estimate_least_squares,
    estimate_oracle_inlier_ls,
    gaussian_design_experiment,
    hardness_experiment,
    run_estimator,
    simulate_observation,
)


@pytest.fixture
def design(rng):
    return rng.standard_normal((300, 4))


class TestSimulation:
    """Test suite for simulated observations."""

    def test_inliers_and_noise(self, design):
        spec = SymGeomParams(lam=0.5, alpha=0.3, sigma=2.0)
        beta = np.arange(4.0)
        obs = simulate_observation(design, beta, spec, seed=3)
        np.testing.assert_allclose(obs.y - design @ beta, obs.noise)
        np.testing.assert_array_equal(obs.inliers, np.abs(obs.noise) <= 2.0)

    def test_deterministic(self, design):
        spec = SymGeomParams(lam=0.5, alpha=0.3)
        a = simulate_observation(design, np.zeros(4), spec, seed=8)
        b = simulate_observation(design, np.zeros(4), spec, seed=8)
        np.testing.assert_array_equal(a.y, b.y)

    def test_beta_length(self, design):
        with pytest.raises(DimensionError):
            simulate_observation(design, np.zeros(3), SymGeomParams(lam=0.5, alpha=0.3), 0)


class TestEstimators:
    """Test suite for the three estimators."""

    def test_exact_data(self, design):
        beta = np.array([1.0, -2.0, 0.5, 3.0])
        y = design @ beta
        np.testing.assert_allclose(estimate_least_squares(design, y), beta, atol=1e-10)
        fit = estimate_huber(design, y)
        assert fit.converged
        np.testing.assert_allclose(fit.estimate, beta, atol=1e-8)

    def test_huber_resists_outliers(self, design):
        beta = np.array([1.0, -2.0, 0.5, 3.0])
        y = design @ beta
        y[:30] += 1000.0
        ls_error = np.linalg.norm(estimate_least_squares(design, y) - beta)
        fit = estimate_huber(design, y, tuning=0.5)
        assert np.linalg.norm(fit.estimate - beta) < 0.1 * ls_error

    def test_huber_iteration_cap(self, design, caplog):
        y = design @ np.ones(4)
        y[::7] += 50.0
        fit = estimate_huber(design, y, max_iters=1, tol=0.0)
        assert not fit.converged
        assert fit.iterations == 1
        assert "without converging" in caplog.text

    def test_huber_tuning(self, design):
        with pytest.raises(ValueError):
            estimate_huber(design, np.zeros(300), tuning=0.0)

    def test_oracle_uses_inliers(self, design):
        beta = np.ones(4)
        y = design @ beta
        mask = np.zeros(300, dtype=bool)
        mask[:100] = True
        y[~mask] += 10.0
        np.testing.assert_allclose(estimate_oracle_inlier_ls(design, y, mask), beta, atol=1e-10)
        np.testing.assert_allclose(
            estimate_oracle_inlier_ls(design, y, np.arange(100)), beta, atol=1e-10
        )

    def test_oracle_too_few_rows(self, design):
        with pytest.raises(Singular):
            estimate_oracle_inlier_ls(design, np.zeros(300), [0, 1])

    def test_rank_deficient_design(self, design):
        X = np.column_stack([design, design[:, 0]])
        with pytest.raises(Singular):
            estimate_least_squares(X, np.zeros(300))

    def test_unknown_estimator(self, design):
        obs = simulate_observation(design, np.zeros(4), SymGeomParams(lam=0.5, alpha=0.3), 0)
        with pytest.raises(ValueError):
            run_estimator("ridge", design, obs, 1.0)


class TestExperiments:
    """Test suite for seed sweeps."""

    def test_quick_hardness(self):
        report = hardness_experiment(LOGD_OVER_ALPHA2, 128, 64, 0.25, 1.0, seeds=5, seed=1)
        assert len(report.runs) == 5
        assert report.design == "construction"
        assert report.mean_over_gamma == pytest.approx(report.mean_error)
        for run in report.runs:
            # XᵀX = n·I makes both error measures agree.
            assert run.prediction_error == pytest.approx(run.param_error, rel=1e-8, abs=1e-10)

    def test_quick_hardness_deterministic(self):
        a = hardness_experiment(LOGD_OVER_ALPHA2, 128, 64, 0.25, 1.0, seeds=3, seed=2)
        b = hardness_experiment(LOGD_OVER_ALPHA2, 128, 64, 0.25, 1.0, seeds=3, seed=2)
        assert a.model_dump() == b.model_dump()

    def test_control_design(self):
        report = hardness_experiment(
            LOGD_OVER_ALPHA2, 128, 64, 0.25, 1.0, estimator="least-squares", seeds=3, control=True
        )
        assert report.design == "gaussian-control"
        assert report.estimator == "least-squares"

    @pytest.mark.slow
    def test_gaussian_error_decreases(self):
        spec = SymGeomParams(lam=0.5, alpha=0.5, sigma=1.0)
        small = gaussian_design_experiment(2000, 10, spec, seeds=30, seed=0)
        large = gaussian_design_experiment(8000, 10, spec, seeds=30, seed=0)
        assert large.median_error <= 0.5 * small.median_error

    @pytest.mark.slow
    def test_hardness_against_control(self):
        hard = hardness_experiment(LOGD_OVER_ALPHA2, 8192, 64, 0.25, 1.0, seeds=100, seed=0)
        control = hardness_experiment(
            LOGD_OVER_ALPHA2, 8192, 64, 0.25, 1.0, seeds=100, seed=0, control=True
        )
        assert hard.mean_error >= 0.5
        assert control.mean_error <= 0.05


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
