"""
Spreadness of vectors and column spans.

A subspace is (m, δ)-ℓp-spread when no vector in it puts more than a δ
fraction of its ℓp norm on any m coordinates. Exact decisions enumerate
row subsets; larger instances get a one-sided witness search; distortion
bounds convert into spreadness guarantees.
"""

import itertools
import logging
from math import comb
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
import scipy.optimize
from pydantic import BaseModel, ConfigDict, Field, model_validator

from config import settings
from errors import DomainError, Inapplicable, Singular, TooLarge, ZeroVector
from numerics import as_dense_matrix, check_orthonormal, make_rng

logger = logging.getLogger(__name__)

SpreadMethod = Literal["exact-enumeration", "heuristic", "distortion-certificate"]

_RATIO_SLACK = 1e-12
_CHUNK = 4096


class SpreadSpec(BaseModel):
    """Query (m, δ, p): at most δ of the ℓp mass on any m coordinates."""

    model_config = ConfigDict(frozen=True)

    m: int = Field(ge=1, description="Subset budget")
    delta: float = Field(ge=0.0, le=1.0, description="Mass fraction threshold")
    p: float = Field(default=2.0, ge=1.0, description="Norm index")

    def check_dimension(self, n: int) -> None:
        if self.m > n:
            raise DomainError(f"subset budget m={self.m} exceeds dimension n={n}")


class SpreadVerdict(BaseModel):
    """Outcome of a spreadness query.

    is_spread is None when a certificate failed without refuting anything.
    Indices in witness_set are 0-based.
    """

    is_spread: Optional[bool] = Field(description="True, False (refuted) or None")
    method: SpreadMethod = Field(description="How the verdict was reached")
    m: int = Field(ge=1, description="Subset budget of the query")
    delta: float = Field(ge=0.0, le=1.0, description="Threshold of the query")
    p: float = Field(ge=1.0, description="Norm index of the query")
    achieved_ratio: float = Field(
        ge=0.0,
        le=1.0,
        description="Largest ratio found (or certified ratio bound for certificates)",
    )
    witness_set: Optional[List[int]] = Field(default=None, description="Subset S")
    witness_vector: Optional[List[float]] = Field(
        default=None, description="Vector v of the span concentrating on S"
    )
    seed: Optional[int] = Field(default=None, description="Seed of randomized searches")

    @model_validator(mode="after")
    def refutation_has_witness(self):
        if self.is_spread is False:
            if self.witness_set is None or self.witness_vector is None:
                raise ValueError("a refutation must carry its witness")
            if not self.achieved_ratio > self.delta:
                raise ValueError("a refutation must exceed delta")
            if len(self.witness_set) > self.m:
                raise ValueError("witness set larger than m")
        return self


class DistortionBound(BaseModel):
    """Bracket lower <= Δ_{p,q}(V) <= upper for a subspace of R^n."""

    p: float = Field(ge=1.0, description="Smaller norm index")
    q: float = Field(description="Larger norm index")
    lower: float = Field(ge=1.0, description="Lower bound on the distortion")
    upper: float = Field(description="Upper bound on the distortion")
    n: int = Field(ge=1, description="Ambient dimension")
    witness: Optional[List[float]] = Field(
        default=None, description="Vector attaining the lower bound"
    )

    @model_validator(mode="after")
    def bracket(self):
        if not self.q > self.p:
            raise ValueError("q must exceed p")
        if self.lower > self.upper * (1 + 1e-9):
            raise ValueError("lower bound exceeds upper bound")
        return self

    @property
    def trivial_upper(self) -> float:
        return holder_factor(self.n, self.p, self.q)


def holder_factor(n: int, p: float, q: float) -> float:
    """n^{1/p - 1/q}, the largest possible distortion in R^n."""
    return float(n) ** (1.0 / p - 1.0 / q)


def _top_indices(magnitudes: np.ndarray, m: int) -> np.ndarray:
    # Stable sort keeps the lowest index first among ties.
    return np.sort(np.argsort(-magnitudes, kind="stable")[:m])


def vector_spread_ratio(v: Sequence[float], m: int, p: float = 2.0) -> Tuple[float, List[int]]:
    """
    Largest fraction of ‖v‖_p carried by at most m coordinates.

    Args:
        v: Nonzero vector
        m: Subset budget, 1 <= m <= len(v)
        p: Norm index

    Returns:
        (ratio, S) with S the m largest-magnitude coordinates (0-based,
        ties broken by lowest index)
    """
    v = np.asarray(v, dtype=float).ravel()
    if not 1 <= m <= v.size:
        raise DomainError(f"m={m} outside [1, {v.size}]")
    mags = np.abs(v)
    if not mags.any():
        raise ZeroVector("spread ratio of the zero vector")
    S = _top_indices(mags, m)
    ratio = np.linalg.norm(v[S], ord=p) / np.linalg.norm(v, ord=p)
    return float(min(ratio, 1.0)), S.tolist()


def vector_distortion(v: Sequence[float], p: float = 2.0, q: float = 4.0) -> float:
    """Δ_{p,q}(v) = n^{1/p-1/q}·‖v‖_q/‖v‖_p, which lies in [1, n^{1/p-1/q}]."""
    v = np.asarray(v, dtype=float).ravel()
    if not np.abs(v).any():
        raise ZeroVector("distortion of the zero vector")
    return holder_factor(v.size, p, q) * np.linalg.norm(v, ord=q) / np.linalg.norm(v, ord=p)


def _basis(B) -> np.ndarray:
    B = as_dense_matrix(B, "basis")
    check_orthonormal(B)
    return B


def _top_right_singular(block: np.ndarray) -> Tuple[float, np.ndarray]:
    _, s, Vt = np.linalg.svd(block, full_matrices=False)
    return float(s[0]), Vt[0]


def subspace_spread_exact(B, spec: SpreadSpec) -> SpreadVerdict:
    """
    Decide (m, δ)-ℓ2-spreadness of col(B) by enumerating row subsets.

    Only subsets of size exactly m are visited since the ratio is monotone
    in S. The verdict carries the maximizing subset and its top vector.

    Args:
        B: Orthonormal basis of shape (n, d)
        spec: Query with p = 2

    Returns:
        SpreadVerdict with method "exact-enumeration"

    Raises:
        TooLarge: If C(n, m) exceeds SPREAD_ENUMERATION_CAP
    """
    B = _basis(B)
    n, d = B.shape
    if spec.p != 2:
        raise DomainError("exact subspace decision is only available for p = 2")
    spec.check_dimension(n)
    total = comb(n, spec.m)
    if total > settings.SPREAD_ENUMERATION_CAP:
        raise TooLarge(
            f"C({n}, {spec.m}) = {total} subsets exceeds cap "
            f"{settings.SPREAD_ENUMERATION_CAP}"
        )

    best_value, best_subset = -1.0, None
    subsets = itertools.combinations(range(n), spec.m)
    while True:
        chunk = list(itertools.islice(subsets, _CHUNK))
        if not chunk:
            break
        idx = np.asarray(chunk, dtype=np.intp)
        values = np.linalg.svd(B[idx], compute_uv=False)[:, 0]
        k = int(np.argmax(values))
        if values[k] > best_value + _RATIO_SLACK:
            best_value, best_subset = float(values[k]), idx[k]

    sigma, u = _top_right_singular(B[best_subset])
    witness = B @ u
    ratio = float(np.linalg.norm(witness[best_subset]) / np.linalg.norm(witness))
    ratio = min(ratio, 1.0)
    logger.debug("exact spread ratio %.12g over %d subsets", ratio, total)
    return SpreadVerdict(
        is_spread=ratio <= spec.delta,
        method="exact-enumeration",
        m=spec.m,
        delta=spec.delta,
        p=spec.p,
        achieved_ratio=ratio,
        witness_set=best_subset.tolist(),
        witness_vector=witness.tolist(),
    )


def _alternate(B: np.ndarray, u: np.ndarray, m: int, max_iter: int):
    best = (-1.0, u, None)
    for _ in range(max_iter):
        v = B @ u
        S = _top_indices(np.abs(v), m)
        ratio = float(np.linalg.norm(v[S]) / np.linalg.norm(v))
        if ratio < best[0] + 1e-10:
            break
        best = (ratio, u, S)
        _, u = _top_right_singular(B[S])
    return best


def spread_witness_search(
    B,
    spec: SpreadSpec,
    restarts: Optional[int] = None,
    seed: int = 0,
    hints: Optional[Sequence[Sequence[float]]] = None,
) -> SpreadVerdict:
    """
    Search for a vector of col(B) that concentrates on m coordinates.

    Alternates S <- top-m coordinates of Bu and u <- top right singular
    vector of B_S until the ratio stops improving. Starts are the hints,
    the directions of the heaviest rows of B and random unit vectors.
    A refutation is sound; is_spread = True only means no violation was
    found.

    Args:
        B: Orthonormal basis of shape (n, d)
        spec: Query with p = 2
        restarts: Random starts (defaults to WITNESS_RESTARTS)
        seed: Seed of the random starts
        hints: Extra start vectors in R^n, projected onto the span

    Returns:
        SpreadVerdict with method "heuristic"
    """
    B = _basis(B)
    n, d = B.shape
    if spec.p != 2:
        raise DomainError("witness search is only available for p = 2")
    spec.check_dimension(n)
    restarts = settings.WITNESS_RESTARTS if restarts is None else restarts

    starts = []
    for h in hints or []:
        u = B.T @ np.asarray(h, dtype=float).ravel()
        norm = np.linalg.norm(u)
        if norm > 0:
            starts.append(u / norm)
    row_norms = np.linalg.norm(B, axis=1)
    for i in np.argsort(-row_norms, kind="stable")[: min(n, restarts)]:
        if row_norms[i] > 0:
            starts.append(B[i] / row_norms[i])
    rng = make_rng(seed, "witness-search")
    for _ in range(restarts):
        u = rng.standard_normal(d)
        starts.append(u / np.linalg.norm(u))

    best_ratio, best_u, best_S = -1.0, None, None
    for u in starts:
        ratio, u_end, S = _alternate(B, u, spec.m, settings.WITNESS_MAX_ITER)
        if ratio > best_ratio:
            best_ratio, best_u, best_S = ratio, u_end, S

    witness = B @ best_u
    best_ratio = min(best_ratio, 1.0)
    refuted = best_ratio > spec.delta
    logger.debug(
        "witness search: ratio %.6f over %d starts (refuted=%s)",
        best_ratio,
        len(starts),
        refuted,
    )
    return SpreadVerdict(
        is_spread=not refuted,
        method="heuristic",
        m=spec.m,
        delta=spec.delta,
        p=spec.p,
        achieved_ratio=best_ratio,
        witness_set=best_S.tolist(),
        witness_vector=witness.tolist(),
        seed=seed,
    )


def spread_from_distortion(bound: DistortionBound, n: int, query: SpreadSpec) -> SpreadVerdict:
    """
    Turn a distortion upper bound into a spreadness certificate.

    With p = bound.p the guaranteed ratio is (m/n)^{1/p-1/q}·Δ; with
    p = bound.q it is (1 - (Δ^{-p} - (m/n)^p)^{q/p})^{1/q}. Failure to
    certify yields is_spread = None, never a refutation.

    Raises:
        Inapplicable: If the ℓq inner expression is negative
    """
    query.check_dimension(n)
    p, q, upper = bound.p, bound.q, bound.upper
    if not np.isfinite(upper):
        raise DomainError("distortion upper bound must be finite")

    if query.p == p:
        guaranteed = (query.m / n) ** (1.0 / p - 1.0 / q) * upper
    elif query.p == q:
        inner = upper ** (-p) - (query.m / n) ** p
        if inner < 0:
            raise Inapplicable(f"Δ^-p - (m/n)^p = {inner:.3e} is negative")
        guaranteed = (1.0 - inner ** (q / p)) ** (1.0 / q)
    else:
        raise DomainError(f"query norm {query.p} is neither {p} nor {q}")

    return SpreadVerdict(
        is_spread=True if guaranteed <= query.delta else None,
        method="distortion-certificate",
        m=query.m,
        delta=query.delta,
        p=query.p,
        achieved_ratio=float(min(max(guaranteed, 0.0), 1.0)),
    )


def _log_ratio_and_grad(u: np.ndarray, B: np.ndarray, p: float, q: float):
    v = B @ u
    a = np.abs(v)
    nq = np.sum(a**q)
    np_ = np.sum(a**p)
    if nq <= 0 or np_ <= 0:
        return 0.0, np.zeros_like(u)
    value = np.log(nq) / q - np.log(np_) / p
    grad_v = np.sign(v) * (a ** (q - 1) / nq - a ** (p - 1) / np_)
    # Minimized, so negate.
    return -value, -(B.T @ grad_v)


def ascend_two_to_q(B: np.ndarray, u: np.ndarray, q: float, max_iter: int) -> np.ndarray:
    # Projected gradient ascent of ‖Bu‖_q on the unit sphere with full steps.
    previous = -np.inf
    for _ in range(max_iter):
        v = B @ u
        value = np.linalg.norm(v, ord=q)
        if value <= previous * (1 + 1e-13):
            break
        previous = value
        g = B.T @ (np.sign(v) * np.abs(v) ** (q - 1))
        norm = np.linalg.norm(g)
        if norm == 0:
            break
        u = g / norm
    return u


def distortion_lower_bound(
    B,
    p: float = 2.0,
    q: float = 4.0,
    restarts: Optional[int] = None,
    seed: int = 0,
) -> DistortionBound:
    """
    Lower-bound Δ_{p,q}(col B) by ascent over the span.

    Starts are the directions of the heaviest rows of B plus random unit
    vectors. The upper bound is the trivial n^{1/p-1/q}.

    Args:
        B: Orthonormal basis of shape (n, d)
        p: Smaller norm index
        q: Larger norm index, q > p
        restarts: Random starts (defaults to DISTORTION_RESTARTS)
        seed: Seed of the random starts

    Returns:
        DistortionBound with the best vector as witness
    """
    B = _basis(B)
    n, d = B.shape
    if not q > p >= 1:
        raise DomainError(f"need q > p >= 1, got p={p}, q={q}")
    restarts = settings.DISTORTION_RESTARTS if restarts is None else restarts
    rng = make_rng(seed, "distortion-ascent")

    row_norms = np.linalg.norm(B, axis=1)
    heavy = np.argsort(-row_norms, kind="stable")[: min(n, restarts)]
    starts = [B[i] / row_norms[i] for i in heavy if row_norms[i] > 0]
    for _ in range(restarts):
        u = rng.standard_normal(d)
        starts.append(u / np.linalg.norm(u))

    best_value, best_v = -np.inf, None
    for u in starts:
        if p == 2:
            u = ascend_two_to_q(B, u, q, settings.WITNESS_MAX_ITER)
        else:
            result = scipy.optimize.minimize(
                _log_ratio_and_grad, u, args=(B, p, q), jac=True, method="L-BFGS-B"
            )
            u = result.x
        v = B @ u
        if not np.abs(v).any():
            continue
        value = vector_distortion(v, p, q)
        if value > best_value:
            best_value, best_v = value, v

    if best_v is None:
        raise Singular("no start produced a nonzero vector")
    cap = holder_factor(n, p, q)
    lower = float(min(max(best_value, 1.0), cap))
    return DistortionBound(
        p=p, q=q, lower=lower, upper=cap, n=n, witness=(best_v / np.linalg.norm(best_v)).tolist()
    )
