"""
Spectral certificates for the 2→4 norm, the ℓ2-vs-ℓ4 distortion and
well-spreadness of a column span.

The degree-4 form Σ_i ⟨a_i, u⟩⁴ equals (u⊗u)ᵀ M (u⊗u) with
M = Σ_i vec(a_i a_iᵀ) vec(a_i a_iᵀ)ᵀ. Since (u⊗u)ᵀ vec(I) = ‖u‖² = 1 on the
sphere, λ_max(M - t·vec(I)vec(I)ᵀ) + t bounds the form for every t, and the
certificate minimizes that over t >= 0. t = 0 is the plain Gram bound.
"""

import logging
from math import floor
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.optimize import minimize_scalar

from config import settings
from errors import Singular
from numerics import as_dense_matrix, extreme_singular_values, top_eigenvalue_symmetric
from spreadness import (
    DistortionBound,
    SpreadSpec,
    SpreadVerdict,
    ascend_two_to_q,
    spread_from_distortion,
)

logger = logging.getLogger(__name__)


class TwoToFourCertificate(BaseModel):
    """Certified upper bound on max_{‖u‖=1} ‖Au‖_4."""

    upper_bound: float = Field(ge=0, description="Certified bound on the 2→4 norm")
    lambda_hat: float = Field(description="Certified bound on the 2→4 norm to the 4th")
    inflation: float = Field(ge=0, description="Safety factor applied to lambda_hat")
    shift: float = Field(ge=0, description="Multiple t of vec(I)vec(I)ᵀ removed")
    test_value: float = Field(ge=0, description="Σ⟨a_i,u⟩⁴ at the returned test vector")
    test_vector: List[float] = Field(description="Unit vector u read off the certificate")

    @model_validator(mode="after")
    def consistent(self):
        expected = ((1 + self.inflation) * max(self.lambda_hat, 0.0)) ** 0.25
        if abs(self.upper_bound - expected) > 1e-12 * max(expected, 1.0):
            raise ValueError("upper_bound must equal ((1 + inflation)·lambda_hat)^(1/4)")
        if self.test_value > self.lambda_hat * (1 + 1e-9) + 1e-12:
            raise ValueError("test vector beats the certificate")
        return self

    @property
    def lower_bound(self) -> float:
        """Lower bound on the 2→4 norm from the test vector."""
        return self.test_value**0.25


class CertifiedDistortion(BaseModel):
    """Certified upper bound on Δ_{2,4}(col A)."""

    upper: float = Field(description="n^(1/4)·two_to_four.upper_bound / sigma_min")
    sigma_min: float = Field(gt=0, description="Smallest singular value of A")
    sigma_max: float = Field(gt=0, description="Largest singular value of A")
    n: int = Field(ge=1, description="Rows of A")
    two_to_four: TwoToFourCertificate

    @model_validator(mode="after")
    def consistent(self):
        expected = self.n**0.25 * self.two_to_four.upper_bound / self.sigma_min
        if abs(self.upper - expected) > 1e-12 * max(expected, 1.0):
            raise ValueError("upper must equal n^(1/4)·upper_bound / sigma_min")
        return self

    def as_bound(self) -> DistortionBound:
        return DistortionBound(p=2, q=4, lower=1.0, upper=max(1.0, self.upper), n=self.n)


class CertifyReport(BaseModel):
    """Machine-readable result of the certification pipeline."""

    two_to_four_upper: float
    sigma_min: float
    distortion_upper: float
    verdict: Literal["YES", "NO"]
    guaranteed_m: int = Field(description="m of the (m, delta) guarantee, 0 on NO")
    delta: float
    threshold: float
    seed: int
    method: Literal["distortion-certificate"] = "distortion-certificate"
    lambda_hat: float
    inflation: float
    shift: float
    two_to_four_lower: float = Field(description="Lower bound from the test vector")
    note: str = Field(
        default="eigenvalue estimate assumed sound up to the stated inflation",
        description="Soundness assumption of the certificate",
    )


def _lifted_operator(A: np.ndarray, t: float):
    d = A.shape[1]
    w = np.eye(d).ravel()

    def apply(x: np.ndarray) -> np.ndarray:
        X = np.asarray(x, dtype=float).reshape(d, d)
        quad = np.einsum("ij,jk,ik->i", A, X, A)
        out = (A.T @ (quad[:, None] * A)).ravel()
        return out - t * w * np.trace(X)

    return apply


def _shifted_value(A: np.ndarray, t: float, tol: float, restarts: int, seed: int):
    d = A.shape[1]
    lam, vec = top_eigenvalue_symmetric(
        _lifted_operator(A, t), d * d, tol=tol, restarts=restarts, seed=seed
    )
    return lam + t, vec


def _test_vector(A: np.ndarray, vec: np.ndarray) -> np.ndarray:
    d = A.shape[1]
    X = vec.reshape(d, d)
    w, V = np.linalg.eigh(0.5 * (X + X.T))
    u = V[:, int(np.argmax(np.abs(w)))]
    u = ascend_two_to_q(A, u, 4.0, 100)
    return u / np.linalg.norm(u)


def certify_two_to_four(
    A, tol: Optional[float] = None, seed: int = 0
) -> TwoToFourCertificate:
    """
    Certified upper bound on the 2→4 norm of A.

    Args:
        A: Matrix with rows a_i, shape (n, d)
        tol: Eigen-solver tolerance (defaults to EIGEN_TOL); the inflation is
            CERTIFY_INFLATION_MULTIPLIER·tol
        seed: Seed of the eigen-solver start vectors

    Returns:
        TwoToFourCertificate with a test vector attaining test_value
    """
    A = as_dense_matrix(A)
    tol = settings.EIGEN_TOL if tol is None else tol
    inflation = settings.CERTIFY_INFLATION_MULTIPLIER * tol

    plain, plain_vec = _shifted_value(A, 0.0, tol, 1, seed)
    if plain <= 0:
        shift, lam, vec = 0.0, 0.0, plain_vec
    else:
        search = minimize_scalar(
            lambda t: _shifted_value(A, t, tol, 1, seed)[0],
            bounds=(0.0, plain),
            method="bounded",
            options={"xatol": 1e-9 * plain, "maxiter": 80},
        )
        shift = float(search.x)
        lam, vec = _shifted_value(A, shift, tol, settings.EIGEN_RESTARTS, seed)
        plain_full, plain_vec = _shifted_value(A, 0.0, tol, settings.EIGEN_RESTARTS, seed)
        if plain_full <= lam:
            shift, lam, vec = 0.0, plain_full, plain_vec
    logger.debug("2→4 certificate: lambda=%.10g at shift t=%.6g", lam, shift)

    u = _test_vector(A, vec)
    test_value = float(np.sum((A @ u) ** 4))
    lam = max(lam, test_value)
    return TwoToFourCertificate(
        upper_bound=((1 + inflation) * lam) ** 0.25,
        lambda_hat=lam,
        inflation=inflation,
        shift=shift,
        test_value=test_value,
        test_vector=u.tolist(),
    )


def certify_distortion_24(
    A, tol: Optional[float] = None, seed: int = 0
) -> CertifiedDistortion:
    """
    Certified upper bound on Δ_{2,4}(col A) = n^(1/4)·‖A‖_{2→4}/σ_min(A).

    Raises:
        Singular: If σ_min(A) <= 1e-8·σ_max(A)
    """
    A = as_dense_matrix(A)
    spectrum = extreme_singular_values(A)
    if A.shape[0] < A.shape[1] or spectrum.sigma_min <= 1e-8 * spectrum.sigma_max:
        raise Singular("A is not of full column rank")
    cert = certify_two_to_four(A, tol=tol, seed=seed)
    n = A.shape[0]
    return CertifiedDistortion(
        upper=n**0.25 * cert.upper_bound / spectrum.sigma_min,
        sigma_min=spectrum.sigma_min,
        sigma_max=spectrum.sigma_max,
        n=n,
        two_to_four=cert,
    )


def _guaranteed_m(upper: float, delta: float, n: int) -> int:
    m = floor((delta / upper) ** 4 * n)
    while m >= 1 and (m / n) ** 0.25 * upper > delta:
        m -= 1
    return min(m, n)


def verdict_from_certificate(
    certified: CertifiedDistortion, delta: float, threshold: float
) -> SpreadVerdict:
    """
    YES/NO decision on a certified distortion bound.

    YES (is_spread = True) when the bound is at most the threshold and
    guarantees some m >= 1; NO (is_spread = None) only means the
    certificate failed.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if not threshold > 1:
        raise ValueError("threshold must exceed 1")
    n, upper = certified.n, certified.upper
    m = _guaranteed_m(upper, delta, n)
    if upper <= threshold and m >= 1:
        return spread_from_distortion(
            certified.as_bound(), n, SpreadSpec(m=m, delta=delta, p=2)
        )
    m_query = max(1, floor((delta / threshold) ** 4 * n))
    return SpreadVerdict(
        is_spread=None,
        method="distortion-certificate",
        m=m_query,
        delta=delta,
        p=2,
        achieved_ratio=float(min(1.0, (m_query / n) ** 0.25 * upper)),
    )


def certify_well_spread(
    A,
    delta: float,
    threshold_Cprime: Optional[float] = None,
    seed: int = 0,
) -> SpreadVerdict:
    """
    Certify that col(A) is ((delta/U)^4·n, delta)-ℓ2-spread.

    Args:
        A: Full-column-rank matrix of shape (n, d)
        delta: Target mass fraction in (0, 1)
        threshold_Cprime: Distortion threshold (defaults to CERTIFY_THRESHOLD)
        seed: Seed of the eigen-solver

    Returns:
        SpreadVerdict; on YES its m is the guaranteed subset budget
    """
    threshold = settings.CERTIFY_THRESHOLD if threshold_Cprime is None else threshold_Cprime
    return verdict_from_certificate(certify_distortion_24(A, seed=seed), delta, threshold)


def certify_report(
    A, delta: float, threshold: Optional[float] = None, seed: int = 0
) -> CertifyReport:
    """Run the full pipeline once and collect the report fields."""
    threshold = settings.CERTIFY_THRESHOLD if threshold is None else threshold
    certified = certify_distortion_24(A, seed=seed)
    verdict = verdict_from_certificate(certified, delta, threshold)
    yes = verdict.is_spread is True
    cert = certified.two_to_four
    logger.info(
        "certified distortion %.6f against threshold %.3f: %s",
        certified.upper,
        threshold,
        "YES" if yes else "NO",
    )
    return CertifyReport(
        two_to_four_upper=cert.upper_bound,
        sigma_min=certified.sigma_min,
        distortion_upper=certified.upper,
        verdict="YES" if yes else "NO",
        guaranteed_m=verdict.m if yes else 0,
        delta=delta,
        threshold=threshold,
        seed=seed,
        lambda_hat=cert.lambda_hat,
        inflation=cert.inflation,
        shift=cert.shift,
        two_to_four_lower=cert.lower_bound,
    )
