"""
Low-degree likelihood ratio norm for the planted sparse direction.

E_ν[L^{≤D}(A)²] = Σ_{k<=D} E⟨u,u'⟩^k · Σ_{|α|=k} Π_i (E h_{α_i}(x))², where
u, u' are independent uniform unit vectors in R^d, x ~ NBR(ρ, σ) and h_j
is the normalized probabilists' Hermite polynomial. All large sums are taken
in the log domain; Hermite moments are exact rationals before the final
logarithm.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from functools import lru_cache
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.special import gammaln, logsumexp

from config import settings
from errors import DomainError
from instances import gen_gaussian_null, gen_planted
from noise import NBRParams, nbr_moment_exact
from numerics import make_rng, orthonormal_basis

logger = logging.getLogger(__name__)

LowDegMode = Literal["exact-dp", "paper-bound"]

_LOG_FLOAT_MAX = math.log(np.finfo(float).max)


class LowDegParams(BaseModel):
    """Inputs (n, d, ρ, σ, D) of the low-degree computation."""

    n: int = Field(ge=1, description="Rows")
    d: int = Field(ge=1, description="Columns")
    rho: float = Field(gt=0.0, lt=1.0, description="Spike probability")
    sigma: float = Field(ge=0.0, description="Gaussian component standard deviation")
    D: int = Field(ge=0, description="Largest degree")

    @model_validator(mode="after")
    def in_range(self):
        if (1 - self.rho) * self.sigma**2 >= 1:
            raise ValueError("sigma must be below 1/sqrt(1 - rho)")
        if self.D > settings.LOWDEG_MAX_DEGREE:
            raise ValueError(f"D exceeds the cap {settings.LOWDEG_MAX_DEGREE}")
        return self

    @property
    def nbr(self) -> NBRParams:
        return NBRParams(rho=self.rho, sigma=self.sigma)


def theorem_scaled_params(n: int, rho: float) -> LowDegParams:
    """
    Parameters at the hardness threshold for given n and ρ.

    d = ⌈√n·(log n)⁴/ρ⌉, σ² = ½(log n)⁻² and D = ⌊(log n)²⌋.
    """
    log_n = math.log(n)
    return LowDegParams(
        n=n,
        d=math.ceil(math.sqrt(n) * log_n**4 / rho),
        rho=rho,
        sigma=math.sqrt(0.5) / log_n,
        D=math.floor(log_n**2),
    )


class LowDegTerm(BaseModel):
    """Degree-k summand of the norm."""

    k: int
    sphere_moment: float
    inner_sum: float
    contribution: float = Field(ge=0)
    log_contribution: float
    closed_form_bound: float = Field(description="Per-degree term of the analytic bound")
    saturated: bool = Field(default=False, description="Value clipped to float range")


class LowDegReport(BaseModel):
    """Norm E_ν[L^{≤D}²] with its per-degree table."""

    params: LowDegParams
    method: LowDegMode
    total: float = Field(ge=1.0)
    log_total: float
    per_degree: List[LowDegTerm]
    hermite_regime_ok: bool = Field(description="σ² <= 1/(D-1) holds")
    saturated: bool = False


class DistinguishReport(BaseModel):
    """Degree-4 statistic under the null and an alternative."""

    n: int
    d: int
    rho: float
    sigma: float
    trials: int
    alternative: Literal["planted", "null"]
    mean_null: float
    mean_alternative: float
    pooled_std: float
    separation: Optional[float] = Field(
        ge=0, description="|mean difference| / pooled std, None when only the means differ"
    )
    seed: int


def _clip_exp(log_value: float) -> Tuple[float, bool]:
    if log_value > _LOG_FLOAT_MAX:
        return float(np.finfo(float).max), True
    return math.exp(log_value), False


def _log_fraction(x: Fraction) -> float:
    # math.log accepts arbitrarily large ints.
    return math.log(x.numerator) - math.log(x.denominator)


@lru_cache(maxsize=None)
def hermite_coefficients(k: int) -> Tuple[int, ...]:
    """Integer coefficients c_0..c_k of He_k, from He_{k+1} = x·He_k - k·He_{k-1}."""
    if k < 0:
        raise DomainError("degree must be non-negative")
    prev, cur = [1], [0, 1]
    if k == 0:
        return tuple(prev)
    for j in range(1, k):
        nxt = [0] + cur
        for r, c in enumerate(prev):
            nxt[r] -= j * c
        prev, cur = cur, nxt
    return tuple(cur)


@lru_cache(maxsize=4096)
def _hermite_moment_exact(params: NBRParams, k: int) -> Fraction:
    """E He_k(x) as an exact rational."""
    if k % 2:
        return Fraction(0)
    return sum(
        (c * nbr_moment_exact(params, r) for r, c in enumerate(hermite_coefficients(k)) if c),
        Fraction(0),
    )


def log_hermite_moment_sq(params: NBRParams, k: int) -> float:
    """log (E h_k(x))², or -inf when the moment vanishes."""
    value = _hermite_moment_exact(params, k)
    if value == 0:
        return -math.inf
    return 2 * _log_fraction(abs(value)) - float(gammaln(k + 1))


def hermite_moment(params: NBRParams, k: int) -> float:
    """
    E h_k(x) for x ~ NBR(ρ, σ), with h_k = He_k/√(k!).

    Args:
        params: NBR parameters
        k: Degree >= 0

    Returns:
        0 for odd k; degrees above LOWDEG_LOG_DOMAIN_DEGREE are evaluated
        through logarithms
    """
    if k < 0:
        raise DomainError("degree must be non-negative")
    value = _hermite_moment_exact(params, k)
    if value == 0:
        return 0.0
    if k <= settings.LOWDEG_LOG_DOMAIN_DEGREE:
        return float(value) / math.sqrt(math.factorial(k))
    log_abs = _log_fraction(abs(value)) - 0.5 * float(gammaln(k + 1))
    magnitude, _ = _clip_exp(log_abs)
    return math.copysign(magnitude, value)


def telephone_numbers(k_max: int) -> List[int]:
    """T(0..k_max) with T(n) = T(n-1) + (n-1)·T(n-2)."""
    if k_max < 0:
        raise DomainError("k_max must be non-negative")
    T = [1, 1]
    for n in range(2, k_max + 1):
        T.append(T[n - 1] + (n - 1) * T[n - 2])
    return T[: k_max + 1]


def log_sphere_moment(d: int, k: int) -> float:
    """log E⟨u,u'⟩^k for even k; -inf for odd k."""
    if k % 2:
        return -math.inf
    j = k // 2
    i = np.arange(j)
    return float(np.sum(np.log(2 * i + 1) - np.log(d + 2 * i)))


def sphere_moment(d: int, k: int) -> Tuple[float, float]:
    """
    Exact E⟨u,u'⟩^k for independent uniform unit vectors in R^d.

    Returns:
        (moment, (k/d)^{k/2}); the moment is Π_{i<k/2} (2i+1)/(d+2i) for even k
        and 0 for odd k
    """
    if d < 1 or k < 0:
        raise DomainError("need d >= 1 and k >= 0")
    bound = (k / d) ** (k / 2) if k else 1.0
    if k % 2:
        return 0.0, bound
    return math.exp(log_sphere_moment(d, k)), bound


def _log_coefficients(params: NBRParams, k: int) -> np.ndarray:
    # log c_j for j = 0..k; only even j >= 4 are admissible parts.
    logc = np.full(k + 1, -np.inf)
    for j in range(4, k + 1, 2):
        logc[j] = log_hermite_moment_sq(params, j)
    return logc


def _log_binom(n: int, m: int) -> float:
    return float(gammaln(n + 1) - gammaln(m + 1) - gammaln(n - m + 1))


def log_inner_sum(params: NBRParams, n: int, k: int) -> float:
    """log of Σ_{|α|=k} Π_i (E h_{α_i})², by dynamic programming over parts."""
    if k < 0:
        raise DomainError("degree must be non-negative")
    if k == 0:
        return 0.0
    logc = _log_coefficients(params, k)
    # layer[s] = log [z^s] g(z)^m with g(z) = Σ_{j>=4 even} c_j z^j
    layer = np.full(k + 1, -np.inf)
    layer[0] = 0.0
    terms = []
    for m in range(1, min(n, k // 4) + 1):
        nxt = np.full(k + 1, -np.inf)
        for s in range(4 * m, k + 1, 2):
            j = np.arange(4, s - 4 * (m - 1) + 1, 2)
            nxt[s] = logsumexp(logc[j] + layer[s - j])
        layer = nxt
        if np.isfinite(layer[k]):
            terms.append(_log_binom(n, m) + layer[k])
    if not terms:
        return -math.inf
    return float(logsumexp(terms))


def inner_sum(params: NBRParams, n: int, k: int) -> float:
    """
    Σ over compositions α of k into n parts of Π_i (E h_{α_i}(x))².

    Only parts in {0, 4, 6, 8, ...} contribute, so k in {1, 2, 3, 5} gives 0.
    """
    value = log_inner_sum(params, n, k)
    if value == -math.inf:
        return 0.0
    return _clip_exp(value)[0]


def _log_closed_form_term(params: LowDegParams, k: int) -> float:
    ratio = 512 * k**4 * params.n / (params.d**2 * params.rho**2)
    return k / 4 * math.log(ratio)


def lowdeg_norm(params: LowDegParams, mode: LowDegMode = "exact-dp") -> LowDegReport:
    """
    E_ν[L^{≤D}(A)²] for the planted sparse direction.

    Args:
        params: Inputs (n, d, ρ, σ, D)
        mode: "exact-dp" sums exact sphere moments times the inner sums;
            "paper-bound" sums 1 + Σ_k (512k⁴n/(d²ρ²))^{k/4}

    Returns:
        LowDegReport with one row per even degree 4 <= k <= D
    """
    D = params.D
    regime_ok = D < 2 or params.sigma**2 <= 1.0 / (D - 1)
    if mode == "exact-dp" and not regime_ok:
        logger.warning(
            "sigma^2 = %.4g exceeds 1/(D-1) = %.4g; Hermite moment bounds may not hold",
            params.sigma**2,
            1.0 / (D - 1),
        )
    nbr = params.nbr
    degrees = list(range(4, D + 1, 2))

    def term(k: int) -> LowDegTerm:
        sphere, _ = sphere_moment(params.d, k)
        log_closed = _log_closed_form_term(params, k)
        if mode == "exact-dp":
            log_inner = log_inner_sum(nbr, params.n, k)
            log_value = log_sphere_moment(params.d, k) + log_inner
        else:
            log_inner = -math.inf
            log_value = log_closed
        contribution, saturated = (0.0, False) if log_value == -math.inf else _clip_exp(log_value)
        return LowDegTerm(
            k=k,
            sphere_moment=sphere,
            inner_sum=0.0 if log_inner == -math.inf else _clip_exp(log_inner)[0],
            contribution=contribution,
            log_contribution=log_value if log_value != -math.inf else -1e308,
            closed_form_bound=_clip_exp(log_closed)[0],
            saturated=saturated,
        )

    with ThreadPoolExecutor(max_workers=settings.SPREADLAB_THREADS) as pool:
        rows = list(pool.map(term, degrees))

    logs = [0.0] + [r.log_contribution for r in rows if r.contribution > 0]
    log_total = float(logsumexp(logs))
    total, saturated = _clip_exp(log_total)
    logger.info("low-degree norm (%s, D=%d): %.6g", mode, D, total)
    return LowDegReport(
        params=params,
        method=mode,
        total=max(total, 1.0),
        log_total=log_total,
        per_degree=rows,
        hermite_regime_ok=regime_ok,
        saturated=saturated or any(r.saturated for r in rows),
    )


def degree4_statistic(A: np.ndarray) -> float:
    """Σ_i ‖row_i of an orthonormal basis of col(A)‖⁴."""
    B = orthonormal_basis(A)
    return float(np.sum(np.sum(B * B, axis=1) ** 2))


def degree4_distinguish_experiment(
    n: int,
    d: int,
    params: NBRParams,
    trials: int,
    seed: int,
    alternative: Literal["planted", "null"] = "planted",
) -> DistinguishReport:
    """
    Compare the degree-4 statistic on null and alternative samples.

    Args:
        n: Rows
        d: Columns
        params: NBR parameters of the planted vector
        trials: Samples per side, at least 10
        seed: Run seed
        alternative: "planted" or "null" (null against itself)

    Returns:
        DistinguishReport with the standardized separation
    """
    if trials < 10:
        raise DomainError("need at least 10 trials per side")
    seeds = make_rng(seed, "distinguish").integers(0, 2**63 - 1, size=(trials, 2))

    def run(pair) -> Tuple[float, float]:
        null_stat = degree4_statistic(gen_gaussian_null(n, d, int(pair[0])))
        if alternative == "planted":
            other = gen_planted(n, d, params, int(pair[1])).observed
        else:
            other = gen_gaussian_null(n, d, int(pair[1]))
        return null_stat, degree4_statistic(other)

    with ThreadPoolExecutor(max_workers=settings.SPREADLAB_THREADS) as pool:
        results = np.array(list(pool.map(run, seeds)))

    null_stats, alt_stats = results[:, 0], results[:, 1]
    pooled = math.sqrt(0.5 * (np.var(null_stats, ddof=1) + np.var(alt_stats, ddof=1)))
    gap = abs(float(np.mean(alt_stats) - np.mean(null_stats)))
    if pooled > 0:
        separation: Optional[float] = gap / pooled
    else:
        # Both samples constant: the ratio is undefined unless the means agree.
        separation = 0.0 if gap == 0 else None
    logger.info("degree-4 separation %s over %d trials", separation, trials)
    return DistinguishReport(
        n=n,
        d=d,
        rho=params.rho,
        sigma=params.sigma,
        trials=trials,
        alternative=alternative,
        mean_null=float(np.mean(null_stats)),
        mean_alternative=float(np.mean(alt_stats)),
        pooled_std=pooled,
        separation=separation,
        seed=seed,
    )
