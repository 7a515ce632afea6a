import math

import numpy as np
import pytest
from pydantic import ValidationError

from errors import DomainError, NotIntegerShift, UnknownTag
from fano import (
    FanoInput,
    calibrate_sigma,
    construction_kl,
    fano_bound,
    lower_bound_pipeline,
    realized_shifts,
    worst_case_coordinate_kl,
)
from instances import D_OVER_ALPHA, LOGD_OVER_ALPHA2, build_construction, packing_vectors
from noise import SymGeomParams, kl_shift


class TestFanoBound:
    """Test suite for the Fano expression."""

    def test_value(self):
        bound = fano_bound(FanoInput(separation=2.0, log_cardinality=10.0, max_kl=1.0))
        assert bound == pytest.approx(1.0 - (1.0 + math.log(2)) / 10.0)

    def test_clamped_at_zero(self):
        assert fano_bound(FanoInput(separation=5.0, log_cardinality=0.5, max_kl=3.0)) == 0.0

    def test_rejects_nan(self):
        with pytest.raises(ValidationError):
            FanoInput(separation=float("nan"), log_cardinality=1.0, max_kl=0.0)


class TestCalibration:
    """Test suite for the amplitude calibration."""

    def test_values(self):
        assert calibrate_sigma(D_OVER_ALPHA, 1.0, 128, 16, 0.01) ** 2 == pytest.approx(32.0)
        assert calibrate_sigma(LOGD_OVER_ALPHA2, 1.0, 128, 64, 0.25) ** 2 == pytest.approx(
            6400 / math.log(64)
        )

    def test_invalid(self):
        with pytest.raises(DomainError):
            calibrate_sigma(D_OVER_ALPHA, 0.0, 128, 16, 0.01)
        with pytest.raises(UnknownTag):
            calibrate_sigma("other", 1.0, 128, 16, 0.01)


class TestConstructionKL:
    """Test suite for chain-rule KL on constructions."""

    @pytest.fixture(scope="class")
    def bundle(self):
        return build_construction(LOGD_OVER_ALPHA2, 128, 64, 0.25, 3.0, seed=1)

    def test_packing_pair(self, bundle):
        betas = packing_vectors(bundle)
        shifts = realized_shifts(bundle, betas[0], betas[1])
        assert shifts.sum() == 4 and shifts.max() == 1
        unit = kl_shift(SymGeomParams(lam=0.5, alpha=0.25), 1).kl
        assert construction_kl(bundle, betas[0], betas[1]) == pytest.approx(4 * unit)

    def test_identical_pair(self, bundle):
        betas = packing_vectors(bundle)
        assert construction_kl(bundle, betas[2], betas[2]) == 0.0

    def test_non_integer_shift(self, bundle):
        beta = packing_vectors(bundle)[0]
        with pytest.raises(NotIntegerShift):
            realized_shifts(bundle, beta, 0.5 * beta)

    def test_worst_case_monotone_budget(self):
        alpha, d = 0.01, 16
        lam = 2 * alpha * d**-5.0
        worst, shift = worst_case_coordinate_kl(alpha, lam, 2 * d * d)
        assert 1 <= shift <= 2 * d * d
        assert worst >= kl_shift(SymGeomParams(lam=lam, alpha=alpha), 1).kl
        assert worst <= 8 * alpha * math.log(d)

    def test_worst_case_needs_shift(self):
        with pytest.raises(DomainError):
            worst_case_coordinate_kl(0.1, 0.2, 0)


class TestLowerBoundPipeline:
    """Test suite for the end-to-end Fano pipeline."""

    def test_logd_gamma_one(self):
        report = lower_bound_pipeline(LOGD_OVER_ALPHA2, 128, 64, 0.25, 1.0, seed=2)
        assert report.sigma_used**2 == pytest.approx(1538.9, rel=1e-3)
        assert report.separation**2 == pytest.approx(48.09, rel=1e-3)
        assert report.bound == pytest.approx(8.3, rel=0.01)
        assert report.meets_gamma
        assert report.kl_binding == "exact"
        assert report.max_kl_sampled == pytest.approx(report.kl_budget_used)

    def test_logd_gamma_ten(self):
        report = lower_bound_pipeline(LOGD_OVER_ALPHA2, 128, 64, 0.25, 10.0, seed=2)
        assert report.bound == pytest.approx(83.0, rel=0.01)
        assert report.bound >= report.gamma_target

    def test_d_over_alpha(self):
        report = lower_bound_pipeline(D_OVER_ALPHA, 128, 16, 0.01, 1.0, pairs_to_sample=50, seed=3)
        assert report.sigma_used**2 == pytest.approx(32.0)
        assert report.log_cardinality == pytest.approx(16 * math.log(16))
        assert report.kl_budget_used == pytest.approx(32 * 0.139, rel=0.05)
        assert report.max_kl_sampled <= report.kl_budget_used + 1e-9
        assert report.kl_budget_used <= report.max_kl_analytic_cap
        assert report.separation >= report.separation_guaranteed - 1e-9
        assert report.bound >= report.bound_at_guaranteed_separation
        assert report.bound > 50.0
        assert report.meets_gamma

    def test_small_sigma_misses_gamma(self, caplog):
        report = lower_bound_pipeline(LOGD_OVER_ALPHA2, 128, 64, 0.25, 1.0, sigma=0.5)
        assert not report.meets_gamma
        assert "misses target" in caplog.text

    def test_dump_is_finite(self):
        report = lower_bound_pipeline(LOGD_OVER_ALPHA2, 128, 64, 0.25, 1.0)
        dumped = report.model_dump()
        assert all(
            np.isfinite(v) for v in dumped.values() if isinstance(v, float)
        )


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
