"""
Exact spark of rational matrices and its link to kernel spreadness.

spark(A) = min{‖x‖₀ : Ax = 0, x ≠ 0}. With
δ = 1 - 1/(2((p·n·P²)^p + 1)) for a p×n matrix with largest entry P,
spark(A) > m exactly when ker A is (m, δ)-spread.
"""

import itertools
import logging
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_serializer, model_validator

from config import settings
from errors import DomainError, TooLarge
from numerics import (
    RationalMatrix,
    check_orthonormal,
    orthonormal_basis,
    rational_kernel_basis,
    rational_matmul,
    rational_rank,
)
from spreadness import SpreadSpec, SpreadVerdict, subspace_spread_exact, vector_spread_ratio

logger = logging.getLogger(__name__)


class SparkResult(BaseModel):
    """Spark of a matrix; spark None means every column subset is independent."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    spark: Optional[int] = Field(description="Smallest dependent column count, None if infinite")
    witness: Optional[Tuple[Fraction, ...]] = Field(
        default=None, description="Kernel vector with exactly spark nonzeros"
    )
    rank: int = Field(ge=0, description="Exact rank of the matrix")
    subsets_checked: Dict[int, int] = Field(
        default_factory=dict, description="Column subsets rank-tested per size"
    )

    @model_validator(mode="after")
    def witness_matches(self):
        if self.spark is None:
            if self.witness is not None:
                raise ValueError("an infinite spark has no witness")
            return self
        if self.witness is None:
            raise ValueError("a finite spark needs a witness")
        support = sum(1 for x in self.witness if x != 0)
        if support != self.spark:
            raise ValueError(f"witness has {support} nonzeros, spark is {self.spark}")
        return self

    @field_serializer("witness", when_used="json")
    def _witness_strings(self, witness) -> Optional[List[str]]:
        return None if witness is None else [str(x) for x in witness]

    @property
    def is_infinite(self) -> bool:
        return self.spark is None


class ConsistencyReport(BaseModel):
    """Agreement of spark(A) > m with (m, δ)-spreadness of ker A."""

    m: int
    spark: Optional[int]
    delta: str = Field(description="δ as an exact fraction")
    delta_float: float
    kernel_dim: int
    verdict: Optional[SpreadVerdict] = Field(
        default=None, description="Exact spreadness verdict of the kernel"
    )
    support_ratio: Optional[float] = Field(
        default=None, description="Mass ratio of the spark witness on its own support"
    )
    ratio_gap: Optional[float] = Field(
        default=None, description="δ minus the exact ratio (negative when refuted)"
    )
    implication: str
    passed: bool
    witness: Optional[List[str]] = None


def _embed(witness_small: Tuple[Fraction, ...], subset, n: int) -> Tuple[Fraction, ...]:
    full = [Fraction(0)] * n
    for j, value in zip(subset, witness_small):
        full[j] = value
    return tuple(full)


def _in_kernel(A: RationalMatrix, x: Tuple[Fraction, ...]) -> bool:
    product = rational_matmul(A, RationalMatrix.from_columns([x], rows=len(x)))
    return all(row[0] == 0 for row in product.entries)


def compute_spark(A: RationalMatrix) -> SparkResult:
    """
    Exact spark by enumerating column subsets in increasing size.

    The first dependent subset has a one-dimensional kernel whose vector
    uses every column of the subset, so it is returned as the witness.

    Args:
        A: Rational matrix with at most SPARK_COLUMN_CAP columns

    Returns:
        SparkResult, verified in exact arithmetic

    Raises:
        TooLarge: If A has more columns than SPARK_COLUMN_CAP
    """
    n = A.cols
    if n > settings.SPARK_COLUMN_CAP:
        raise TooLarge(f"{n} columns exceed spark cap {settings.SPARK_COLUMN_CAP}")
    rank = rational_rank(A)

    for j, column in enumerate(A.columns()):
        if all(x == 0 for x in column):
            witness = tuple(Fraction(int(i == j)) for i in range(n))
            return SparkResult(spark=1, witness=witness, rank=rank, subsets_checked={1: j + 1})

    if rank == n:
        logger.debug("columns independent: spark is infinite")
        return SparkResult(spark=None, rank=rank)

    checked: Dict[int, int] = {}
    # Any rank + 1 columns are dependent.
    for size in range(2, rank + 2):
        checked[size] = 0
        for subset in itertools.combinations(range(n), size):
            checked[size] += 1
            sub = A.select_columns(subset)
            if rational_rank(sub) == size:
                continue
            kernel = rational_kernel_basis(sub)
            witness = _embed(kernel.column(0), subset, n)
            if not _in_kernel(A, witness):
                raise ArithmeticError("spark witness failed exact verification")
            logger.debug("spark %d via columns %s", size, subset)
            return SparkResult(spark=size, witness=witness, rank=rank, subsets_checked=checked)
    raise ArithmeticError(f"no dependent subset found below rank + 2 = {rank + 2}")


def reduction_delta(A: RationalMatrix) -> Fraction:
    """
    δ = 1 - 1/(2((p·n·P²)^p + 1)) for a p×n matrix with P = max |A_ij|.

    Raises:
        DomainError: If A is the zero matrix
    """
    P = A.max_abs()
    if P == 0:
        raise DomainError("reduction_delta needs a nonzero matrix")
    p, n = A.rows, A.cols
    return 1 - Fraction(1, 2) / ((p * n * P**2) ** p + 1)


def reduction_consistency_check(A: RationalMatrix, m: int) -> ConsistencyReport:
    """
    Check spark(A) <= m ⇔ ker A is not (m, δ)-spread on one instance.

    The kernel basis is computed exactly, orthonormalised in floats and
    decided by exhaustive enumeration. When spark <= m the spark witness
    itself puts all of its mass on at most m coordinates.

    Args:
        A: Small rational matrix
        m: Subset budget, 1 <= m <= number of columns

    Returns:
        ConsistencyReport with passed set
    """
    n = A.cols
    if not 1 <= m <= n:
        raise DomainError(f"m must lie in [1, {n}], got {m}")
    spark = compute_spark(A)
    delta = reduction_delta(A)
    kernel = rational_kernel_basis(A)
    witness = None if spark.witness is None else [str(x) for x in spark.witness]

    if kernel.cols == 0:
        return ConsistencyReport(
            m=m,
            spark=spark.spark,
            delta=str(delta),
            delta_float=float(delta),
            kernel_dim=0,
            implication="trivial kernel: vacuously spread",
            passed=spark.spark is None,
        )

    B = orthonormal_basis(kernel.to_float())
    check_orthonormal(B)
    verdict = subspace_spread_exact(B, SpreadSpec(m=m, delta=float(delta)))
    small_spark = spark.spark is not None and spark.spark <= m

    support_ratio = None
    if small_spark:
        support_ratio, _ = vector_spread_ratio([float(x) for x in spark.witness], m)
        passed = verdict.is_spread is False and support_ratio > float(delta)
        implication = "spark <= m implies not spread"
    else:
        passed = verdict.is_spread is True
        implication = "spark > m implies spread"
    if not passed:
        logger.warning(
            "spark %s disagrees with kernel spreadness at m=%d (ratio %.15g, delta %.15g)",
            spark.spark,
            m,
            verdict.achieved_ratio,
            float(delta),
        )
    return ConsistencyReport(
        m=m,
        spark=spark.spark,
        delta=str(delta),
        delta_float=float(delta),
        kernel_dim=kernel.cols,
        verdict=verdict,
        support_ratio=support_ratio,
        ratio_gap=float(delta) - verdict.achieved_ratio,
        implication=implication,
        passed=passed,
        witness=witness,
    )
