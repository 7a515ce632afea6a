"""
Generators for the matrix ensembles: the Gaussian null, the planted sparse
direction, the two hard regression constructions and the small
counterexample fixtures.

Every generator is a deterministic function of its parameters and seed.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field

from config import settings
from errors import DimensionError, DomainError, RankDeficient, ScreeningFailed, UnknownTag
from noise import NBRParams, SymGeomParams, nbr_draw
from numerics import extreme_singular_values, haar_orthogonal, make_rng, orthonormal_basis
from spreadness import SpreadSpec, spread_witness_search

logger = logging.getLogger(__name__)

D_OVER_ALPHA = "d-over-alpha"
LOGD_OVER_ALPHA2 = "logd-over-alpha2"
CONSTRUCTION_TAGS = (D_OVER_ALPHA, LOGD_OVER_ALPHA2)

CounterexampleKind = Literal["rip-not-spread", "spread-not-rip"]


class BundleMeta(BaseModel):
    """Ground truth recorded alongside a hard-construction design."""

    tag: str = Field(description="Construction tag")
    n: int = Field(ge=1, description="Rows of the design")
    d: int = Field(ge=1, description="Columns of the design")
    alpha: float = Field(description="Inlier fraction α")
    sigma: float = Field(description="Noise amplitude σ")
    lam: float = Field(serialization_alias="lambda", description="Noise scale λ")
    m_or_k: int = Field(description="Rademacher rows m or block copies k")
    seed: int = Field(description="Generator seed")
    separation: float = Field(
        description="Guaranteed lower bound on pairwise parameter distance"
    )
    claimed_spread: Optional[SpreadSpec] = Field(
        default=None, description="Spreadness screened on the nonzero block"
    )
    screen_attempts: int = Field(default=0, description="Resamples used by the screen")
    dense_rotation: bool = Field(default=False, description="Design right-rotated")


@dataclass(frozen=True)
class InstanceBundle:
    """A hard design X, its parameter sampler and its noise law.

    X·β/σ is integer-valued for every sampled β.
    """

    design: np.ndarray
    beta_sampler: Callable[[int], np.ndarray]
    noise_spec: SymGeomParams
    meta: BundleMeta
    rotation: Optional[np.ndarray] = None
    integer_factor: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def d(self) -> int:
        return self.design.shape[1]


@dataclass(frozen=True)
class PlantedInstance:
    """Observed A = Y·Q whose first hidden column v is sparse-ish."""

    observed: np.ndarray
    hidden: np.ndarray
    params: NBRParams
    rotation: np.ndarray


def d_over_alpha_rows(d: int, alpha: float) -> int:
    """m = ⌈d/(50α)⌉ nonzero rows of the d/α construction."""
    return math.ceil(d / (50 * alpha))


def logd_block_copies(d: int, alpha: float) -> int:
    """k = ⌈log d/(200α²)⌉ block copies of the log d/α² construction."""
    return math.ceil(math.log(d) / (200 * alpha**2))


def min_rows(tag: str, d: int, alpha: float) -> int:
    """Smallest n at which the construction is feasible."""
    if tag == D_OVER_ALPHA:
        return d_over_alpha_rows(d, alpha)
    if tag == LOGD_OVER_ALPHA2:
        return 2 * logd_block_copies(d, alpha) * d
    raise UnknownTag(f"unknown construction {tag!r}")


def inconsistency_sigma(tag: str, n: int, d: int, alpha: float) -> float:
    """Amplitude at which the construction defeats every estimator: σ² = nα/d or nα²/log d."""
    if tag == D_OVER_ALPHA:
        return math.sqrt(n * alpha / d)
    if tag == LOGD_OVER_ALPHA2:
        return math.sqrt(n * alpha**2 / math.log(d))
    raise UnknownTag(f"unknown construction {tag!r}")


def gen_gaussian_null(n: int, d: int, seed: int) -> np.ndarray:
    """n×d matrix of i.i.d. N(0, 1) entries."""
    if n < 1 or d < 1:
        raise DimensionError("n and d must be positive")
    return make_rng(seed, "gaussian-null").standard_normal((n, d))


def gen_planted(n: int, d: int, params: NBRParams, seed: int) -> PlantedInstance:
    """
    Sample from the planted distribution.

    v has i.i.d. NBR(ρ, σ) entries, Y = [v | G] with G Gaussian and
    A = Y·Q for a Haar-random orthogonal Q.

    Args:
        n: Rows, n >= d
        d: Columns
        params: NBR parameters of the hidden vector
        seed: Generator seed

    Returns:
        PlantedInstance keeping v and Q as ground truth
    """
    if not 1 <= d <= n:
        raise DimensionError(f"need 1 <= d <= n, got n={n}, d={d}")
    v = nbr_draw(params, n, make_rng(seed, "planted/hidden"))
    G = make_rng(seed, "planted/gaussian").standard_normal((n, d - 1))
    Q = haar_orthogonal(d, make_rng(seed, "planted/rotation"))
    Y = np.column_stack([v, G])
    return PlantedInstance(observed=Y @ Q, hidden=v, params=params, rotation=Q)


def _screen_rademacher(m: int, d: int, seed: int):
    spec = SpreadSpec(
        m=max(1, math.floor(settings.INSTANCE_SPREAD_FRACTION * m)),
        delta=settings.INSTANCE_SPREAD_DELTA,
    )
    for attempt in range(settings.INSTANCE_SCREEN_ATTEMPTS):
        rng = make_rng(seed, f"{D_OVER_ALPHA}/rademacher/{attempt}")
        Y = rng.choice(np.array([-1, 1], dtype=np.int64), size=(m, d))
        try:
            U = orthonormal_basis(Y)
        except RankDeficient:
            logger.warning("Rademacher draw %d is rank deficient; resampling", attempt)
            continue
        verdict = spread_witness_search(U, spec, seed=seed + attempt)
        if verdict.is_spread:
            return Y, U, spec, attempt + 1
        logger.warning(
            "Rademacher draw %d refuted at ratio %.4f; resampling",
            attempt,
            verdict.achieved_ratio,
        )
    raise ScreeningFailed(
        f"no well-spread {m}x{d} Rademacher matrix in "
        f"{settings.INSTANCE_SCREEN_ATTEMPTS} attempts"
    )


def gen_hard_d_over_alpha(
    n: int,
    d: int,
    alpha: float,
    sigma: float,
    seed: int,
    dense_rotation: bool = False,
) -> InstanceBundle:
    """
    The d/α construction.

    A screened m×d Rademacher Y with m = ⌈d/(50α)⌉ gives X₁ = √n·U for an
    orthonormal basis U of col(Y), and X = [X₁; 0]. Parameters are
    β = σ·X₁ᵀ(Yv)/n for v uniform in [d]^d, so X·β = σ·[Yv; 0].

    Args:
        n: Rows, n >= m
        d: Columns, d >= 3
        alpha: Inlier fraction
        sigma: Noise amplitude
        seed: Generator seed
        dense_rotation: Right-multiply X by a Haar rotation R

    Returns:
        InstanceBundle whose integer_factor is Y

    Raises:
        DimensionError: If m > n or m < d
    """
    if d < 3:
        raise DimensionError("d must be at least 3")
    if not 0 < alpha < 1 or sigma <= 0:
        raise DomainError("need 0 < alpha < 1 and sigma > 0")
    m = d_over_alpha_rows(d, alpha)
    if m > n:
        raise DimensionError(f"m = {m} rows exceed n = {n}")
    if m < d:
        raise DimensionError(f"m = {m} rows cannot span d = {d} columns; lower alpha")

    Y, U, spec, attempts = _screen_rademacher(m, d, seed)
    X1 = math.sqrt(n) * U
    X = np.zeros((n, d))
    X[:m] = X1
    R = None
    if dense_rotation:
        R = haar_orthogonal(d, make_rng(seed, f"{D_OVER_ALPHA}/rotation"))
        X = X @ R

    def beta_sampler(beta_seed: int) -> np.ndarray:
        v = make_rng(beta_seed, f"{D_OVER_ALPHA}/beta").integers(1, d + 1, size=d)
        beta = sigma * (X1.T @ (Y @ v)) / n
        return beta if R is None else R.T @ beta

    sigma_min_y = extreme_singular_values(Y.astype(float)).sigma_min
    meta = BundleMeta(
        tag=D_OVER_ALPHA,
        n=n,
        d=d,
        alpha=alpha,
        sigma=sigma,
        lam=2 * alpha * d**-5.0,
        m_or_k=m,
        seed=seed,
        separation=sigma * sigma_min_y / math.sqrt(n),
        claimed_spread=spec,
        screen_attempts=attempts,
        dense_rotation=dense_rotation,
    )
    logger.info("built %s bundle n=%d d=%d m=%d", D_OVER_ALPHA, n, d, m)
    return InstanceBundle(
        design=X,
        beta_sampler=beta_sampler,
        noise_spec=SymGeomParams(lam=meta.lam, alpha=alpha, sigma=sigma),
        meta=meta,
        rotation=R,
        integer_factor=Y,
    )


def gen_hard_logd_over_alpha2(
    n: int, d: int, alpha: float, sigma: float, seed: int
) -> InstanceBundle:
    """
    The log d/α² construction.

    With Q Haar and k = ⌈log d/(200α²)⌉, X₁ stacks 2k copies of Qᵀ scaled
    by √(n/(2k)), so XᵀX = n·I. The packing is β_j = σ√(2k/n)·q_j, for
    which X·β_j equals σ on the 2k rows indexed by j and 0 elsewhere.

    Raises:
        DimensionError: If n < 2kd
    """
    if d < 5:
        raise DimensionError("d must be at least 5")
    if not 0 < alpha < 1 or sigma <= 0:
        raise DomainError("need 0 < alpha < 1 and sigma > 0")
    k = logd_block_copies(d, alpha)
    if n < 2 * k * d:
        raise DimensionError(f"n = {n} is below 2kd = {2 * k * d}")

    Q = haar_orthogonal(d, make_rng(seed, f"{LOGD_OVER_ALPHA2}/rotation"))
    X = np.zeros((n, d))
    X[: 2 * k * d] = math.sqrt(n / (2 * k)) * np.tile(Q.T, (2 * k, 1))
    scale = sigma * math.sqrt(2 * k / n)

    def beta_sampler(beta_seed: int) -> np.ndarray:
        j = int(make_rng(beta_seed, f"{LOGD_OVER_ALPHA2}/beta").integers(d))
        return scale * Q[:, j]

    meta = BundleMeta(
        tag=LOGD_OVER_ALPHA2,
        n=n,
        d=d,
        alpha=alpha,
        sigma=sigma,
        lam=2 * alpha,
        m_or_k=k,
        seed=seed,
        separation=sigma * math.sqrt(4 * k / n),
    )
    logger.info("built %s bundle n=%d d=%d k=%d", LOGD_OVER_ALPHA2, n, d, k)
    return InstanceBundle(
        design=X,
        beta_sampler=beta_sampler,
        noise_spec=SymGeomParams(lam=meta.lam, alpha=alpha, sigma=sigma),
        meta=meta,
        rotation=Q,
    )


def packing_vectors(bundle: InstanceBundle) -> List[np.ndarray]:
    """All d packing vectors β_j of a log d/α² bundle."""
    if bundle.meta.tag != LOGD_OVER_ALPHA2:
        raise UnknownTag("only the log d/α² packing is enumerable")
    k, n = bundle.meta.m_or_k, bundle.n
    scale = bundle.meta.sigma * math.sqrt(2 * k / n)
    return [scale * bundle.rotation[:, j] for j in range(bundle.d)]


def build_construction(
    tag: str,
    n: int,
    d: int,
    alpha: float,
    sigma: float,
    seed: int,
    dense_rotation: bool = False,
) -> InstanceBundle:
    """Dispatch on the construction tag."""
    if tag == D_OVER_ALPHA:
        return gen_hard_d_over_alpha(n, d, alpha, sigma, seed, dense_rotation)
    if tag == LOGD_OVER_ALPHA2:
        return gen_hard_logd_over_alpha2(n, d, alpha, sigma, seed)
    raise UnknownTag(f"unknown construction {tag!r}")


def gen_counterexamples(kind: CounterexampleKind, n: int, d: int, seed: int) -> np.ndarray:
    """
    Fixtures separating RIP from spreadness.

    "rip-not-spread" is [[1, 0], [0, W/√(n-1)]], whose span contains e₁.
    "spread-not-rip" is [v | W/√n] with v equal to W's first column over √n.
    """
    if n < 2 or d < 2:
        raise DimensionError("n and d must be at least 2")
    rng = make_rng(seed, f"counterexample/{kind}")
    if kind == "rip-not-spread":
        W = rng.standard_normal((n - 1, d - 1))
        M = np.zeros((n, d))
        M[0, 0] = 1.0
        M[1:, 1:] = W / math.sqrt(n - 1)
        return M
    if kind == "spread-not-rip":
        W = rng.standard_normal((n, d - 1)) / math.sqrt(n)
        return np.column_stack([W[:, 0], W])
    raise UnknownTag(f"unknown counterexample {kind!r}")
