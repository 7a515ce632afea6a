"""
Dense linear-algebra kernel shared by the other modules.

Floating-point work goes through numpy/scipy; kernels of rational matrices are
computed exactly with fraction-free elimination over Python integers.
"""

import logging
import zlib
from dataclasses import dataclass
from fractions import Fraction
from math import gcd, lcm
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from pydantic import BaseModel, Field, model_validator
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from config import settings
from errors import (
    DimensionError,
    DomainError,
    NoConvergence,
    NotOrthonormal,
    RankDeficient,
)

logger = logging.getLogger(__name__)

RationalLike = Union[int, str, Fraction]


def as_dense_matrix(M, name: str = "matrix") -> np.ndarray:
    """
    Validate and convert input into a DenseMatrix (2-D finite float64 array).

    Args:
        M: Array-like input; a 1-D input becomes a single column
        name: Name used in error messages

    Returns:
        A float64 array of shape (rows, cols) with rows, cols >= 1
    """
    arr = np.asarray(M, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-D matrix, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite entries")
    return arr


def make_rng(seed: int, stream: str = "default") -> np.random.Generator:
    """
    Derive an independent generator for a named stream of a seeded run.

    Args:
        seed: Run seed (64-bit integer)
        stream: Stream name, one per consumer

    Returns:
        A numpy Generator whose state depends only on (seed, stream)
    """
    key = zlib.crc32(stream.encode("utf-8"))
    return np.random.default_rng(
        np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(key,))
    )


def check_orthonormal(B: np.ndarray, tol: float = 1e-8) -> None:
    gram = B.T @ B
    defect = np.max(np.abs(gram - np.eye(B.shape[1])))
    if defect > tol:
        raise NotOrthonormal(f"BᵀB deviates from identity by {defect:.3e}")


def orthonormal_basis(M) -> np.ndarray:
    """
    Orthonormal basis of the column span of a full-column-rank matrix.

    Rank is checked with column-pivoted Householder QR; the basis itself
    comes from unpivoted QR with diag(R) > 0, so column j of the result lies
    in the span of the first j + 1 columns of M.

    Args:
        M: Matrix of shape (n, d) with n >= d

    Returns:
        B of shape (n, d) with BᵀB = I

    Raises:
        RankDeficient: If a pivot falls below ORTHO_RANK_TOL times the largest
            column norm
    """
    M = as_dense_matrix(M)
    n, d = M.shape
    if n < d:
        raise RankDeficient(f"{n}x{d} matrix cannot have full column rank")

    _, R, _ = scipy.linalg.qr(M, mode="economic", pivoting=True)
    pivots = np.abs(np.diag(R))
    if pivots[0] == 0.0 or pivots[-1] < settings.ORTHO_RANK_TOL * pivots[0]:
        raise RankDeficient(
            f"pivot {pivots[-1]:.3e} below tolerance of largest column {pivots[0]:.3e}"
        )

    Q, R = scipy.linalg.qr(M, mode="economic")
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def haar_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed d×d orthogonal matrix (QR of a Gaussian, diag(R) > 0)."""
    G = rng.standard_normal((d, d))
    Q, R = scipy.linalg.qr(G)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


class SpectrumSummary(BaseModel):
    """Extreme singular values of a dense matrix."""

    sigma_min: float = Field(ge=0, description="Smallest singular value")
    sigma_max: float = Field(ge=0, description="Largest singular value")
    iterations: int = Field(ge=0, description="Solver iterations used")
    residual: float = Field(ge=0, description="Relative Frobenius identity defect")

    @model_validator(mode="after")
    def ordered(self):
        if self.sigma_min > self.sigma_max:
            raise ValueError("sigma_min must not exceed sigma_max")
        return self


def extreme_singular_values(M) -> SpectrumSummary:
    """
    Smallest and largest singular values of M.

    Args:
        M: Non-empty matrix

    Returns:
        SpectrumSummary; for wide matrices sigma_min is the smallest of the
        min(rows, cols) singular values
    """
    M = as_dense_matrix(M)
    try:
        s = scipy.linalg.svdvals(M)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NoConvergence(f"SVD failed: {e}") from e

    frob = float(np.sum(M * M))
    residual = abs(frob - float(np.sum(s * s))) / frob if frob > 0 else 0.0
    if residual > settings.EIGEN_TOL:
        raise NoConvergence("singular values fail the Frobenius check", residual=residual)
    return SpectrumSummary(
        sigma_min=float(s.min()), sigma_max=float(s.max()), iterations=1, residual=residual
    )


def _dense_top_eigen(
    apply: Callable[[np.ndarray], np.ndarray], dim: int
) -> Tuple[float, np.ndarray]:
    dense = np.column_stack([apply(e) for e in np.eye(dim)])
    dense = 0.5 * (dense + dense.T)
    w, V = scipy.linalg.eigh(dense)
    return float(w[-1]), V[:, -1]


def top_eigenvalue_symmetric(
    apply: Callable[[np.ndarray], np.ndarray],
    dim: int,
    tol: Optional[float] = None,
    restarts: Optional[int] = None,
    seed: int = 0,
    max_iter: Optional[int] = None,
) -> Tuple[float, np.ndarray]:
    """
    Largest eigenvalue of a symmetric operator given only as a matvec oracle.

    Operators up to DENSE_EIGEN_CUTOFF are materialised; larger ones go through
    Lanczos (ARPACK) from several random starts, keeping the largest result.

    Args:
        apply: Read-only matvec oracle x -> Ox
        dim: Operator dimension
        tol: Relative residual tolerance (defaults to EIGEN_TOL)
        restarts: Random starts (defaults to EIGEN_RESTARTS)
        seed: Seed of the start vectors
        max_iter: Lanczos iteration cap (defaults to EIGEN_MAX_ITER)

    Returns:
        (lambda_hat, v) with v a unit vector and lambda_hat its Rayleigh quotient

    Raises:
        NoConvergence: If no start reaches ‖Ov − λv‖ <= tol·|λ|
    """
    tol = settings.EIGEN_TOL if tol is None else tol
    restarts = settings.EIGEN_RESTARTS if restarts is None else restarts
    max_iter = settings.EIGEN_MAX_ITER if max_iter is None else max_iter
    if tol <= 0:
        raise DomainError("tol must be positive")
    if dim < 1:
        raise DimensionError("dim must be positive")

    candidates: List[Tuple[float, np.ndarray]] = []
    if dim <= settings.DENSE_EIGEN_CUTOFF:
        candidates.append(_dense_top_eigen(apply, dim))
    else:
        operator = LinearOperator((dim, dim), matvec=apply, dtype=np.float64)
        rng = make_rng(seed, "top-eigenvalue")
        for attempt in range(restarts):
            v0 = rng.standard_normal(dim)
            try:
                vals, vecs = eigsh(
                    operator, k=1, which="LA", v0=v0, tol=0.1 * tol, maxiter=max_iter
                )
            except ArpackNoConvergence as e:
                logger.debug("Lanczos start %d did not converge: %s", attempt, e)
                if len(e.eigenvalues):
                    candidates.append((float(e.eigenvalues[-1]), e.eigenvectors[:, -1]))
                continue
            candidates.append((float(vals[0]), vecs[:, 0]))

    best_value, best_vector, best_residual = None, None, np.inf
    for _, v in candidates:
        v = v / np.linalg.norm(v)
        Ov = apply(v)
        lam = float(v @ Ov)
        residual = float(np.linalg.norm(Ov - lam * v))
        converged = residual <= tol * abs(lam) or residual == 0.0
        if converged and (best_value is None or lam > best_value):
            best_value, best_vector, best_residual = lam, v, residual

    if best_value is None:
        raise NoConvergence(
            f"top eigenvalue did not converge to tol={tol:g}",
            best=candidates[0] if candidates else None,
        )
    logger.debug(
        "top eigenvalue %.12g (dim=%d, residual=%.2e)", best_value, dim, best_residual
    )
    return best_value, best_vector


@dataclass(frozen=True)
class RationalMatrix:
    """Exact rational matrix stored row-major as tuples of Fractions."""

    rows: int
    cols: int
    entries: Tuple[Tuple[Fraction, ...], ...]

    def __post_init__(self):
        if self.rows < 1:
            raise DimensionError("RationalMatrix needs at least one row")
        if self.cols < 0 or len(self.entries) != self.rows:
            raise DimensionError("RationalMatrix entries do not match its shape")
        if any(len(row) != self.cols for row in self.entries):
            raise DimensionError("ragged RationalMatrix rows")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[RationalLike]]) -> "RationalMatrix":
        parsed = tuple(tuple(Fraction(x) for x in row) for row in rows)
        if not parsed:
            raise DimensionError("RationalMatrix needs at least one row")
        return cls(rows=len(parsed), cols=len(parsed[0]), entries=parsed)

    @classmethod
    def from_columns(
        cls, columns: Sequence[Sequence[Fraction]], rows: int
    ) -> "RationalMatrix":
        entries = tuple(tuple(col[i] for col in columns) for i in range(rows))
        return cls(rows=rows, cols=len(columns), entries=entries)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.rows, self.cols

    def column(self, j: int) -> Tuple[Fraction, ...]:
        return tuple(row[j] for row in self.entries)

    def columns(self) -> List[Tuple[Fraction, ...]]:
        return [self.column(j) for j in range(self.cols)]

    def select_columns(self, indices: Iterable[int]) -> "RationalMatrix":
        idx = list(indices)
        return RationalMatrix(
            rows=self.rows,
            cols=len(idx),
            entries=tuple(tuple(row[j] for j in idx) for row in self.entries),
        )

    def max_abs(self) -> Fraction:
        return max((abs(x) for row in self.entries for x in row), default=Fraction(0))

    def to_float(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.entries], dtype=float).reshape(
            self.rows, self.cols
        )


def parse_rational_matrix(rows: Sequence[Sequence[RationalLike]]) -> RationalMatrix:
    """
    Build a RationalMatrix from integers, Fractions or "num/den" strings.

    Raises:
        DomainError: If an entry is not a rational literal
    """
    try:
        return RationalMatrix.from_rows(rows)
    except (ValueError, TypeError, ZeroDivisionError) as e:
        if isinstance(e, DimensionError):
            raise
        raise DomainError(f"invalid rational entry: {e}") from e


def rational_matmul(A: RationalMatrix, Y: RationalMatrix) -> RationalMatrix:
    """Exact product A·Y."""
    if A.cols != Y.rows:
        raise DimensionError(f"cannot multiply {A.shape} by {Y.shape}")
    ycols = Y.columns()
    entries = tuple(
        tuple(sum((a * y for a, y in zip(row, col)), Fraction(0)) for col in ycols)
        for row in A.entries
    )
    return RationalMatrix(rows=A.rows, cols=Y.cols, entries=entries)


def _integer_rows(A: RationalMatrix) -> List[List[int]]:
    # Clearing denominators row by row leaves rank and kernel unchanged.
    out = []
    for row in A.entries:
        scale = lcm(*(x.denominator for x in row)) if row else 1
        out.append([int(x * scale) for x in row])
    return out


def _bareiss_echelon(M: List[List[int]], ncols: int) -> List[int]:
    """Fraction-free row echelon form in place; returns the pivot columns."""
    nrows = len(M)
    r, prev = 0, 1
    pivots: List[int] = []
    for c in range(ncols):
        if r == nrows:
            break
        p = next((i for i in range(r, nrows) if M[i][c] != 0), None)
        if p is None:
            continue
        M[r], M[p] = M[p], M[r]
        pivot = M[r][c]
        for i in range(r + 1, nrows):
            lead = M[i][c]
            row_i, row_r = M[i], M[r]
            for j in range(c + 1, ncols):
                row_i[j] = (pivot * row_i[j] - lead * row_r[j]) // prev
            row_i[c] = 0
        prev = pivot
        pivots.append(c)
        r += 1
    return pivots


def rational_rank(A: RationalMatrix) -> int:
    """Exact rank of a rational matrix."""
    if A.cols == 0:
        return 0
    return len(_bareiss_echelon(_integer_rows(A), A.cols))


def _primitive(vec: List[Fraction]) -> Tuple[Fraction, ...]:
    scale = lcm(*(x.denominator for x in vec))
    ints = [int(x * scale) for x in vec]
    g = gcd(*ints)
    lead = next(x for x in ints if x != 0)
    sign = 1 if lead > 0 else -1
    return tuple(Fraction(sign * x // g) for x in ints)


def rational_kernel_basis(A: RationalMatrix) -> RationalMatrix:
    """
    Exact basis of ker A.

    One basis vector per free column of the echelon form, obtained by back
    substitution and scaled to a primitive integer vector whose first
    nonzero entry is positive.

    Args:
        A: Rational matrix of shape (p, n)

    Returns:
        RationalMatrix of shape (n, n - rank(A)); zero columns when the kernel
        is trivial
    """
    n = A.cols
    M = _integer_rows(A)
    pivots = _bareiss_echelon(M, n)
    pivot_set = set(pivots)
    basis = []
    for free in (c for c in range(n) if c not in pivot_set):
        x = [Fraction(0)] * n
        x[free] = Fraction(1)
        for i in reversed(range(len(pivots))):
            c = pivots[i]
            acc = sum((M[i][j] * x[j] for j in range(c + 1, n)), Fraction(0))
            x[c] = -acc / M[i][c]
        basis.append(_primitive(x))
    return RationalMatrix.from_columns(basis, rows=n)
