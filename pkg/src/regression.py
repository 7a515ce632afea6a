"""
Oblivious regression simulations: y = Xβ* + η with symmetric geometric
noise, a Huber IRLS estimator, least squares and the inlier oracle.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Literal, Optional

import numpy as np
import scipy.linalg
from pydantic import BaseModel, Field

from config import settings
from errors import DimensionError, Singular
from fano import calibrate_sigma
from instances import build_construction, gen_gaussian_null
from noise import SymGeomParams, symgeom_draw
from numerics import as_dense_matrix, make_rng

logger = logging.getLogger(__name__)

Estimator = Literal["huber-irls", "least-squares", "oracle-inlier-ls"]
ESTIMATORS = ("huber-irls", "least-squares", "oracle-inlier-ls")


@dataclass(frozen=True)
class Observation:
    """Responses with the noise draw and the rows whose noise is small."""

    y: np.ndarray
    noise: np.ndarray
    inliers: np.ndarray


@dataclass(frozen=True)
class HuberFit:
    estimate: np.ndarray
    iterations: int
    converged: bool


class RegressionRun(BaseModel):
    """Errors of one estimator on one simulated observation."""

    seed: int
    estimator: Estimator
    param_error: float = Field(ge=0, description="‖β̂ - β*‖²")
    prediction_error: float = Field(ge=0, description="‖X(β̂ - β*)‖²/n")
    converged: bool = True
    inlier_fraction: float


class HardnessReport(BaseModel):
    """Aggregate errors of a seed sweep."""

    construction: str
    design: Literal["construction", "gaussian-control", "gaussian"]
    n: int
    d: int
    alpha: float
    gamma: Optional[float] = None
    sigma: float
    tuning: float
    estimator: Estimator
    label: str = Field(
        default="Huber IRLS stand-in for efficient consistent estimators",
        description="What the estimator represents",
    )
    seeds: int
    seed: int
    mean_error: float
    median_error: float
    std_error: float = Field(description="Standard error of the mean")
    mean_over_gamma: Optional[float] = None
    runs: List[RegressionRun]


def simulate_observation(X, beta_star, noise_spec: SymGeomParams, seed: int) -> Observation:
    """
    Draw y = X·β* + η with η i.i.d. from noise_spec.

    Args:
        X: Design of shape (n, d)
        beta_star: Parameter of length d
        noise_spec: Noise law
        seed: Seed of the noise draw

    Returns:
        Observation whose inliers mark |η_i| <= amplitude
    """
    X = as_dense_matrix(X, "design")
    beta_star = np.asarray(beta_star, dtype=float).ravel()
    if beta_star.size != X.shape[1]:
        raise DimensionError(f"beta has length {beta_star.size}, design has {X.shape[1]} columns")
    eta = symgeom_draw(noise_spec, X.shape[0], make_rng(seed, "regression/noise"))
    inliers = np.abs(eta) <= noise_spec.sigma
    return Observation(y=X @ beta_star + eta, noise=eta, inliers=inliers)


def _least_squares(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    solution, _, rank, _ = scipy.linalg.lstsq(X, y)
    if rank < X.shape[1]:
        raise Singular(f"design has rank {rank} < {X.shape[1]}")
    return solution


def estimate_least_squares(X, y) -> np.ndarray:
    """Ordinary least squares."""
    return _least_squares(as_dense_matrix(X, "design"), np.asarray(y, dtype=float))


def estimate_oracle_inlier_ls(X, y, inlier_set) -> np.ndarray:
    """
    Least squares on the rows known to carry small noise.

    Raises:
        Singular: If the inlier rows do not have full column rank
    """
    X = as_dense_matrix(X, "design")
    rows = np.asarray(inlier_set)
    if rows.dtype == bool:
        rows = np.flatnonzero(rows)
    if rows.size < X.shape[1]:
        raise Singular(f"{rows.size} inlier rows cannot determine {X.shape[1]} parameters")
    return _least_squares(X[rows], np.asarray(y, dtype=float)[rows])


def estimate_huber(
    X,
    y,
    tuning: float = 1.0,
    max_iters: Optional[int] = None,
    tol: Optional[float] = None,
) -> HuberFit:
    """
    Huber regression by iteratively reweighted least squares.

    Starts from least squares and reweights rows by min(1, tuning/|r_i|).
    Hitting max_iters returns the last iterate with converged = False.

    Args:
        X: Full-column-rank design
        y: Responses
        tuning: Huber threshold
        max_iters: Iteration cap (defaults to HUBER_MAX_ITERS)
        tol: Step tolerance relative to 1 + ‖b‖ (defaults to HUBER_TOL)

    Returns:
        HuberFit
    """
    X = as_dense_matrix(X, "design")
    y = np.asarray(y, dtype=float)
    max_iters = settings.HUBER_MAX_ITERS if max_iters is None else max_iters
    tol = settings.HUBER_TOL if tol is None else tol
    if tuning <= 0:
        raise ValueError("tuning must be positive")

    b = _least_squares(X, y)
    for iteration in range(1, max_iters + 1):
        r = np.abs(y - X @ b)
        w = np.ones_like(r)
        big = r > tuning
        w[big] = tuning / r[big]
        root = np.sqrt(w)
        b_new = _least_squares(X * root[:, None], y * root)
        step = np.linalg.norm(b_new - b)
        b = b_new
        if step <= tol * (1.0 + np.linalg.norm(b)):
            return HuberFit(estimate=b, iterations=iteration, converged=True)
    logger.warning("Huber IRLS stopped at %d iterations without converging", max_iters)
    return HuberFit(estimate=b, iterations=max_iters, converged=False)


def run_estimator(
    estimator: Estimator,
    X: np.ndarray,
    obs: Observation,
    tuning: float,
):
    """Apply a named estimator; returns (estimate, converged)."""
    if estimator == "huber-irls":
        fit = estimate_huber(X, obs.y, tuning=tuning)
        return fit.estimate, fit.converged
    if estimator == "least-squares":
        return estimate_least_squares(X, obs.y), True
    if estimator == "oracle-inlier-ls":
        return estimate_oracle_inlier_ls(X, obs.y, obs.inliers), True
    raise ValueError(f"unknown estimator {estimator!r}")


def _run_once(
    X: np.ndarray,
    beta_star: np.ndarray,
    noise_spec: SymGeomParams,
    estimator: Estimator,
    tuning: float,
    seed: int,
) -> RegressionRun:
    obs = simulate_observation(X, beta_star, noise_spec, seed)
    estimate, converged = run_estimator(estimator, X, obs, tuning)
    error = estimate - beta_star
    return RegressionRun(
        seed=seed,
        estimator=estimator,
        param_error=float(error @ error),
        prediction_error=float(np.sum((X @ error) ** 2) / X.shape[0]),
        converged=converged,
        inlier_fraction=float(np.mean(obs.inliers)),
    )


def _summarize(runs: List[RegressionRun]):
    errors = np.array([r.param_error for r in runs])
    sem = float(np.std(errors, ddof=1) / math.sqrt(len(errors))) if len(errors) > 1 else 0.0
    return float(np.mean(errors)), float(np.median(errors)), sem


def _sweep(jobs) -> List[RegressionRun]:
    with ThreadPoolExecutor(max_workers=settings.SPREADLAB_THREADS) as pool:
        return list(pool.map(lambda job: _run_once(*job), jobs))


def hardness_experiment(
    construction: str,
    n: int,
    d: int,
    alpha: float,
    gamma: float,
    estimator: Estimator = "huber-irls",
    seeds: int = 100,
    seed: int = 0,
    control: bool = False,
    tuning: Optional[float] = None,
) -> HardnessReport:
    """
    Estimation error on a hard construction at the calibrated amplitude.

    β* is drawn from the construction's parameter sampler for each seed.
    With control = True the same β* and noise law are used on a Gaussian
    design of the same shape.

    Args:
        construction: Construction tag
        n: Rows
        d: Columns
        alpha: Inlier fraction
        gamma: Target error
        estimator: Estimator name
        seeds: Number of simulated observations
        seed: Run seed
        control: Use the Gaussian design instead of the construction
        tuning: Huber threshold (defaults to HARDNESS_TUNING_FRACTION·σ)

    Returns:
        HardnessReport with per-seed runs
    """
    sigma = calibrate_sigma(construction, gamma, n, d, alpha)
    bundle = build_construction(construction, n, d, alpha, sigma, seed)
    tuning = settings.HARDNESS_TUNING_FRACTION * sigma if tuning is None else tuning
    X = gen_gaussian_null(n, d, seed) if control else bundle.design
    run_seeds = make_rng(seed, "regression/seeds").integers(0, 2**63 - 1, size=seeds)
    jobs = [
        (X, bundle.beta_sampler(int(s)), bundle.noise_spec, estimator, tuning, int(s))
        for s in run_seeds
    ]
    runs = _sweep(jobs)
    mean, median, sem = _summarize(runs)
    logger.info(
        "%s%s: mean error %.4g (gamma %.4g)",
        construction,
        " control" if control else "",
        mean,
        gamma,
    )
    return HardnessReport(
        construction=construction,
        design="gaussian-control" if control else "construction",
        n=n,
        d=d,
        alpha=alpha,
        gamma=gamma,
        sigma=sigma,
        tuning=tuning,
        estimator=estimator,
        seeds=seeds,
        seed=seed,
        mean_error=mean,
        median_error=median,
        std_error=sem,
        mean_over_gamma=mean / gamma,
        runs=runs,
    )


def gaussian_design_experiment(
    n: int,
    d: int,
    noise_spec: SymGeomParams,
    estimator: Estimator = "huber-irls",
    seeds: int = 50,
    seed: int = 0,
    tuning: Optional[float] = None,
) -> HardnessReport:
    """
    Error on fresh Gaussian designs with standard normal β*.

    Args:
        n: Rows
        d: Columns
        noise_spec: Noise law
        estimator: Estimator name
        seeds: Number of simulated observations
        seed: Run seed
        tuning: Huber threshold (defaults to the noise amplitude)

    Returns:
        HardnessReport with design "gaussian"
    """
    tuning = noise_spec.sigma if tuning is None else tuning
    run_seeds = make_rng(seed, "regression/seeds").integers(0, 2**63 - 1, size=seeds)
    jobs = []
    for s in run_seeds:
        s = int(s)
        X = gen_gaussian_null(n, d, s)
        beta_star = make_rng(s, "regression/beta").standard_normal(d)
        jobs.append((X, beta_star, noise_spec, estimator, tuning, s))
    runs = _sweep(jobs)
    mean, median, sem = _summarize(runs)
    return HardnessReport(
        construction="none",
        design="gaussian",
        n=n,
        d=d,
        alpha=noise_spec.alpha,
        sigma=noise_spec.sigma,
        tuning=tuning,
        estimator=estimator,
        seeds=seeds,
        seed=seed,
        mean_error=mean,
        median_error=median,
        std_error=sem,
        runs=runs,
    )
