import math

import numpy as np
import pytest
from pydantic import ValidationError

import noise
from errors import DomainError, FormulaMismatch
from noise import (
    NBRParams,
    SymGeomParams,
    kl_shift,
    kl_shift_closed_form,
    nbr_moment,
    nbr_moment_exact,
    nbr_sample,
    symgeom_kl_bounds,
    symgeom_pmf,
    symgeom_sample,
)


class TestSymmetricGeometric:
    """Test suite for the symmetric geometric law."""

    def test_pmf_sums_to_one(self):
        params = SymGeomParams(lam=0.3, alpha=0.2)
        total = sum(symgeom_pmf(params, k) for k in range(-200, 201))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_pmf_symmetric_about_location(self):
        params = SymGeomParams(location=3, lam=0.4, alpha=0.1)
        assert symgeom_pmf(params, 3) == pytest.approx(0.1)
        assert symgeom_pmf(params, 1) == pytest.approx(symgeom_pmf(params, 5))

    def test_atom_fraction(self):
        """The empirical atom fraction is α within 4 standard errors."""
        alpha, count = 0.1, 100_000
        x = symgeom_sample(SymGeomParams(lam=2 * alpha * 10**-5, alpha=alpha), count, seed=5)
        se = math.sqrt(alpha * (1 - alpha) / count)
        assert abs(np.mean(x == 0) - alpha) <= 4 * se

    def test_amplitude_scales_support(self):
        x = symgeom_sample(SymGeomParams(lam=0.5, alpha=0.3, sigma=2.5), 1000, seed=1)
        np.testing.assert_allclose(np.mod(x / 2.5, 1.0), 0.0, atol=1e-12)

    def test_reproducible(self):
        params = SymGeomParams(lam=0.5, alpha=0.3)
        np.testing.assert_array_equal(
            symgeom_sample(params, 50, seed=9), symgeom_sample(params, 50, seed=9)
        )

    def test_invalid_params(self):
        with pytest.raises(ValidationError):
            SymGeomParams(lam=1.0, alpha=0.5)


class TestShiftKL:
    """Test suite for KL divergences between shifted laws."""

    @pytest.mark.parametrize("alpha", [0.05, 0.1, 0.25])
    def test_closed_form_matches_series(self, alpha):
        lams = [2 * alpha, 2 * alpha * 5**-5.0, 2 * alpha * 10**-5.0]
        for lam in lams:
            for shift in range(1, 11):
                result = kl_shift(SymGeomParams(lam=lam, alpha=alpha), shift)
                assert result.mismatch <= 1e-9
                assert result.kl == pytest.approx(result.D + result.Dprime)

    def test_unit_shift_value(self):
        """λ = 2α, Δ = 1: α(1-α)·log(1/(1-2α)) + α²·log(1/(1-α))."""
        alpha = 0.1
        expected = alpha * (1 - alpha) * math.log(1 / (1 - 2 * alpha)) + alpha**2 * math.log(
            1 / (1 - alpha)
        )
        result = kl_shift(SymGeomParams(lam=0.2, alpha=alpha), 1)
        assert result.kl == pytest.approx(expected, abs=1e-12)
        assert result.kl == pytest.approx(2.1137e-2, rel=1e-4)

    def test_unit_shift_cap(self):
        """KL at λ = 2α, Δ = 1 stays below 4α² for α <= 1/4."""
        for alpha in np.linspace(0.0025, 0.25, 100):
            D, Dprime = kl_shift_closed_form(alpha, 2 * alpha, 1)
            assert D + Dprime <= symgeom_kl_bounds(alpha)["unit_shift"]

    def test_wide_shift_cap(self):
        """KL at λ = 2α·d⁻⁵ stays below 8α·log d for shifts up to 2d²."""
        alpha, d = 0.1, 10
        lam = 2 * alpha * d**-5.0
        cap = symgeom_kl_bounds(alpha, d)["wide_shift"]
        for shift in range(1, 2 * d * d + 1):
            D, Dprime = kl_shift_closed_form(alpha, lam, shift)
            assert D + Dprime <= cap

    def test_integer_shift_required(self):
        params = SymGeomParams(lam=0.2, alpha=0.1)
        with pytest.raises(DomainError):
            kl_shift(params, 1.5)
        with pytest.raises(DomainError):
            kl_shift(params, 0)
        assert kl_shift(params, 2.0).shift == 2

    def test_mismatch_strict(self, monkeypatch):
        monkeypatch.setattr(noise, "_kl_series", lambda alpha, lam, shift: 1.0)
        with pytest.raises(FormulaMismatch):
            kl_shift(SymGeomParams(lam=0.2, alpha=0.1), 1, strict=True)

    def test_mismatch_prefers_series(self, monkeypatch, caplog):
        monkeypatch.setattr(noise, "_kl_series", lambda alpha, lam, shift: 1.0)
        result = kl_shift(SymGeomParams(lam=0.2, alpha=0.1), 1)
        assert result.kl == 1.0
        assert "differs from series" in caplog.text

    def test_serialized_aliases(self):
        dumped = kl_shift(SymGeomParams(lam=0.2, alpha=0.1), 1).model_dump(by_alias=True)
        assert "lambda" in dumped and "Delta" in dumped


class TestNoisyBernoulliRademacher:
    """Test suite for the NBR law."""

    def test_unit_variance(self):
        params = NBRParams(rho=0.1, sigma=0.5)
        assert nbr_moment_exact(params, 2) == 1
        assert nbr_moment(params, 3) == 0.0
        assert nbr_moment(params, 0) == pytest.approx(1.0)

    def test_fourth_moment_empirical(self):
        params = NBRParams(rho=0.1, sigma=0.5)
        x = nbr_sample(params, 100_000, seed=11)
        fourth = x**4
        se = fourth.std(ddof=1) / math.sqrt(x.size)
        assert abs(fourth.mean() - nbr_moment(params, 4)) <= 4 * se

    def test_spike_magnitude(self):
        params = NBRParams(rho=0.5, sigma=0.0)
        x = nbr_sample(params, 1000, seed=2)
        assert set(np.round(np.abs(x), 12)) <= {0.0, round(math.sqrt(2.0), 12)}

    def test_sigma_range(self):
        with pytest.raises(ValidationError):
            NBRParams(rho=0.1, sigma=1.1)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
