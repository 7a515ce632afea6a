import math

import numpy as np
import pytest

from certify import certify_report
from fano import lower_bound_pipeline
from instances import (
    D_OVER_ALPHA,
    LOGD_OVER_ALPHA2,
    gen_counterexamples,
    gen_gaussian_null,
    gen_planted,
)
from noise import NBRParams
from numerics import extreme_singular_values, orthonormal_basis
from spreadness import SpreadSpec, spread_witness_search, subspace_spread_exact

N, D, RHO, SIGMA = 1024, 64, 0.02, 0.05
SWEEP_SEEDS = range(20)
# m = ⌈1.5ρn⌉
SWEEP_SPEC = SpreadSpec(m=math.ceil(1.5 * RHO * N), delta=0.8)


@pytest.mark.integration
class TestSpreadnessPipelines:
    """End-to-end spreadness workflows."""

    def test_sweep_budget(self):
        assert SWEEP_SPEC.m == 31

    def test_planted_direction_refuted_across_seeds(self):
        """The hidden sparse direction breaks (31, 0.8)-spreadness."""
        refuted, ratios = 0, []
        for seed in SWEEP_SEEDS:
            inst = gen_planted(N, D, NBRParams(rho=RHO, sigma=SIGMA), seed)
            verdict = spread_witness_search(orthonormal_basis(inst.observed), SWEEP_SPEC, seed=seed)
            refuted += verdict.is_spread is False
            ratios.append(verdict.achieved_ratio)
        assert refuted >= 18
        # A refutation at these parameters reaches 1/(1 + 4σ).
        assert np.median(ratios) >= 1 / (1 + 4 * SIGMA)

    def test_gaussian_span_not_refuted_across_seeds(self):
        clean = 0
        for seed in SWEEP_SEEDS:
            A = gen_gaussian_null(N, D, seed)
            verdict = spread_witness_search(orthonormal_basis(A), SWEEP_SPEC, seed=seed)
            clean += verdict.achieved_ratio <= SWEEP_SPEC.delta
        assert clean >= 18

    def test_rip_without_spread(self):
        """Near-isometry, yet e₁ sits in the span."""
        M = gen_counterexamples("rip-not-spread", 512, 4, 0)
        spectrum = extreme_singular_values(M)
        assert spectrum.sigma_max <= 1.5 and spectrum.sigma_min >= 0.8
        verdict = subspace_spread_exact(orthonormal_basis(M), SpreadSpec(m=1, delta=0.9))
        assert verdict.is_spread is False

    def test_spread_without_rip(self):
        """A repeated column breaks isometry without touching the span."""
        M = gen_counterexamples("spread-not-rip", 512, 4, 0)
        spectrum = extreme_singular_values(M)
        assert spectrum.sigma_min <= 1e-8 * spectrum.sigma_max
        verdict = spread_witness_search(
            orthonormal_basis(M[:, 1:]), SpreadSpec(m=5, delta=0.5), seed=0
        )
        assert verdict.is_spread is not False

    @pytest.mark.parametrize("seed", [3, 7, 11, 19, 23])
    def test_gaussian_certification_across_seeds(self, seed):
        """Gaussian 4096×16: certified band, YES verdict, and no witness above δ."""
        A = gen_gaussian_null(4096, 16, seed)
        n = A.shape[0]
        report = certify_report(A, delta=0.9, threshold=2.0, seed=seed)
        assert 2.5 <= report.two_to_four_upper**4 / n <= 4.5
        assert report.distortion_upper <= 1.6
        assert report.verdict == "YES"
        assert report.guaranteed_m >= 0.05 * n
        verdict = spread_witness_search(
            orthonormal_basis(A),
            SpreadSpec(m=report.guaranteed_m, delta=0.9),
            restarts=4,
            seed=seed,
        )
        assert verdict.achieved_ratio <= 0.9

    def test_contaminated_counterexample_rejected(self):
        M = gen_counterexamples("rip-not-spread", 4096, 16, 0)
        assert certify_report(M, delta=0.9, threshold=2.0).verdict == "NO"


@pytest.mark.integration
class TestLowerBoundPipelines:
    """Fano bounds at acceptance sizes."""

    def test_logd_targets(self):
        for gamma in (1.0, 10.0):
            report = lower_bound_pipeline(LOGD_OVER_ALPHA2, 128, 64, 0.25, gamma)
            assert report.meets_gamma

    def test_d_over_alpha_target(self):
        report = lower_bound_pipeline(D_OVER_ALPHA, 128, 16, 0.01, 1.0)
        assert report.bound >= 1.0
        assert math.isclose(report.sigma_used**2, 32.0)

    @pytest.mark.slow
    def test_gaussian_null_certificates_scale(self):
        ratios = []
        for n in (2048, 8192):
            A = gen_gaussian_null(n, 8, 3)
            ratios.append(certify_report(A, delta=0.9, threshold=2.0).distortion_upper)
        assert ratios[1] <= ratios[0] + 0.05
        assert np.all(np.array(ratios) < 2.0)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
