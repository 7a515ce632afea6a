"""
Noise laws: the symmetric geometric distribution and the noisy
Bernoulli-Rademacher distribution.

Symmetric geometric G(c, λ) with atom mass α puts mass α on c and
(1-α)/2·λ(1-λ)^{|k-c|-1} on every other integer k. Its amplitude-σ version
is σ·G. Noisy Bernoulli-Rademacher NBR(ρ, σ) is N(0, σ²) with probability
1-ρ and ±ρ'^{-1/2} with probability ρ/2 each, where ρ' = ρ/(1-(1-ρ)σ²).
"""

import logging
import math
from fractions import Fraction
from typing import Dict, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from config import settings
from errors import DomainError, FormulaMismatch
from numerics import make_rng

logger = logging.getLogger(__name__)


class SymGeomParams(BaseModel):
    """Parameters of the amplitude-scaled symmetric geometric law."""

    model_config = ConfigDict(frozen=True)

    location: int = Field(default=0, description="Location c of the atom")
    lam: float = Field(gt=0.0, lt=1.0, description="Geometric scale λ")
    alpha: float = Field(gt=0.0, lt=1.0, description="Atom mass α")
    sigma: float = Field(default=1.0, gt=0.0, description="Amplitude σ")


class NBRParams(BaseModel):
    """Parameters (ρ, σ) of the noisy Bernoulli-Rademacher law."""

    model_config = ConfigDict(frozen=True)

    rho: float = Field(gt=0.0, lt=1.0, description="Spike probability ρ")
    sigma: float = Field(ge=0.0, description="Gaussian component standard deviation")

    @model_validator(mode="after")
    def sigma_in_range(self):
        if (1 - self.rho) * self.sigma**2 >= 1:
            raise ValueError("sigma must be below 1/sqrt(1 - rho)")
        return self

    @property
    def rho_prime(self) -> float:
        return self.rho / (1 - (1 - self.rho) * self.sigma**2)

    @property
    def spike(self) -> float:
        """Magnitude ρ'^{-1/2} of the spikes."""
        return self.rho_prime**-0.5


class KLShiftResult(BaseModel):
    """KL(G(0, λ) ‖ G(Δ, λ)) split into its off-atom and atom parts."""

    alpha: float
    lam: float = Field(serialization_alias="lambda")
    shift: int = Field(ge=1, serialization_alias="Delta")
    D: float = Field(description="Contribution of k outside {0, Δ}")
    Dprime: float = Field(description="Contribution of k in {0, Δ}")
    kl: float = Field(description="D + Dprime")
    series_kl: float = Field(description="Truncated-series value")
    mismatch: float = Field(ge=0, description="|closed form - series|")


def symgeom_pmf(params: SymGeomParams, k: int) -> float:
    """Mass of the integer k (before amplitude scaling)."""
    j = abs(int(k) - params.location)
    if j == 0:
        return params.alpha
    return (1 - params.alpha) / 2 * params.lam * (1 - params.lam) ** (j - 1)


def symgeom_draw(params: SymGeomParams, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw σ·(c + K) with K symmetric geometric; atom first, then signed tail."""
    if count < 1:
        raise DomainError("count must be positive")
    atom = rng.random(count) < params.alpha
    magnitude = rng.geometric(params.lam, size=count)
    sign = np.where(rng.random(count) < 0.5, -1, 1)
    K = np.where(atom, 0, sign * magnitude)
    return params.sigma * (params.location + K).astype(float)


def symgeom_sample(
    params: SymGeomParams, count: int, seed: int, stream: str = "symgeom"
) -> np.ndarray:
    """
    I.i.d. draws of the amplitude-scaled symmetric geometric law.

    Args:
        params: Distribution parameters
        count: Number of draws
        seed: Run seed
        stream: Stream name of the generator

    Returns:
        Array of length count
    """
    return symgeom_draw(params, count, make_rng(seed, stream))


def kl_shift_closed_form(alpha: float, lam: float, shift: int):
    """
    Closed forms (D, D') of KL(G(0, λ) ‖ G(Δ, λ)) for an integer shift Δ >= 1.

    Returns:
        Tuple (D, Dprime)
    """
    log_r = math.log1p(-lam)
    r_delta_1 = math.exp((shift - 1) * log_r)
    bracket = 2 * lam * shift + 2 * math.expm1(shift * log_r) + lam**2 * shift * r_delta_1
    D = (1 - alpha) / 2 / lam * (-log_r) * bracket
    tail = (1 - alpha) * lam * r_delta_1 / 2
    Dprime = (alpha - tail) * (math.log(alpha) - math.log(tail))
    return D, Dprime


def _kl_series(alpha: float, lam: float, shift: int) -> float:
    # Explicit terms over k in [-K, Δ + K], geometric tails added analytically.
    log_r = math.log1p(-lam)
    c = (1 - alpha) / 2 * lam
    K_tail = math.ceil(math.log(settings.KL_SERIES_TAIL) / log_r)
    K = max(1, min(K_tail, settings.KL_SERIES_MAX_TERMS))

    k = np.arange(-K, shift + K + 1, dtype=np.int64)
    k = k[(k != 0) & (k != shift)]
    p = c * np.exp((np.abs(k) - 1) * log_r)
    log_ratio = (np.abs(k) - np.abs(k - shift)) * log_r
    explicit = float(np.sum(p * log_ratio))

    q0 = c * math.exp((shift - 1) * log_r)
    atoms = alpha * math.log(alpha / q0) + q0 * math.log(q0 / alpha)

    # Beyond -K the log ratio is -Δ·log(1-λ); beyond Δ + K it is Δ·log(1-λ).
    left = c * math.exp(K * log_r) / lam * (-shift * log_r)
    right = c * math.exp((shift + K) * log_r) / lam * (shift * log_r)
    return explicit + atoms + left + right


def kl_shift(params: SymGeomParams, shift: int, strict: bool = False) -> KLShiftResult:
    """
    KL(G(0, λ) ‖ G(Δ, λ)) from its closed form, cross-checked against a series.

    The value does not depend on the amplitude or the location.

    Args:
        params: Distribution parameters (λ and α are used)
        shift: Integer shift Δ >= 1
        strict: Raise FormulaMismatch instead of logging a warning

    Returns:
        KLShiftResult; on a mismatch the series value is reported as kl
    """
    if isinstance(shift, float):
        if not shift.is_integer():
            raise DomainError(f"shift must be an integer, got {shift}")
        shift = int(shift)
    if shift < 1:
        raise DomainError(f"shift must be at least 1, got {shift}")

    D, Dprime = kl_shift_closed_form(params.alpha, params.lam, shift)
    series = _kl_series(params.alpha, params.lam, shift)
    closed = D + Dprime
    mismatch = abs(closed - series)
    kl = closed
    if mismatch > settings.KL_MATCH_TOL:
        message = (
            f"KL closed form {closed:.15g} differs from series {series:.15g} "
            f"(alpha={params.alpha}, lambda={params.lam}, shift={shift})"
        )
        if strict:
            raise FormulaMismatch(message, closed=closed, series=series)
        logger.warning(message)
        kl = series
    return KLShiftResult(
        alpha=params.alpha,
        lam=params.lam,
        shift=shift,
        D=D,
        Dprime=Dprime,
        kl=kl,
        series_kl=series,
        mismatch=mismatch,
    )


def symgeom_kl_bounds(alpha: float, d: Optional[int] = None) -> Dict[str, float]:
    """
    Analytic KL caps of the two constructions.

    Returns:
        {"unit_shift": 4α²} and, when d is given, {"wide_shift": 8α·log d}
    """
    caps = {"unit_shift": 4 * alpha**2}
    if d is not None:
        caps["wide_shift"] = 8 * alpha * math.log(d)
    return caps


def nbr_draw(params: NBRParams, count: int, rng: np.random.Generator) -> np.ndarray:
    if count < 1:
        raise DomainError("count must be positive")
    u = rng.random(count)
    gaussian = params.sigma * rng.standard_normal(count)
    spike = np.where(u < params.rho / 2, params.spike, -params.spike)
    return np.where(u < params.rho, spike, gaussian)


def nbr_sample(params: NBRParams, count: int, seed: int, stream: str = "nbr") -> np.ndarray:
    """I.i.d. draws of NBR(ρ, σ)."""
    return nbr_draw(params, count, make_rng(seed, stream))


def _double_factorial(r: int) -> int:
    out = 1
    for j in range(r, 0, -2):
        out *= j
    return out


def nbr_moment_exact(params: NBRParams, r: int) -> Fraction:
    """E x^r as an exact rational in the (binary-exact) parameters."""
    if r < 0:
        raise DomainError("moment order must be non-negative")
    if r % 2:
        return Fraction(0)
    rho = Fraction(params.rho)
    s2 = Fraction(params.sigma) ** 2
    rho_prime = rho / (1 - (1 - rho) * s2)
    half = r // 2
    return (1 - rho) * s2**half * _double_factorial(r - 1) + rho / rho_prime**half


def nbr_moment(params: NBRParams, r: int) -> float:
    """
    Moment E x^r of NBR(ρ, σ).

    Args:
        params: Distribution parameters
        r: Non-negative integer order

    Returns:
        (1-ρ)σ^r(r-1)!! + ρ·ρ'^{-r/2} for even r, 0 for odd r
    """
    return float(nbr_moment_exact(params, r))
