"""
The SPRD1 matrix file format.

    SPRD1
    <rows> <cols>
    float64 | rational
    <payload>

Dense payloads are row-major little-endian float64; rational payloads are
one "num/den" entry per line, row-major.
"""

import logging
from fractions import Fraction
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from errors import MatrixFormatError
from numerics import RationalMatrix, as_dense_matrix
from reporting import PathLike, atomic_write_bytes, to_json_bytes

logger = logging.getLogger(__name__)

MAGIC = "SPRD1"
FLOAT64 = "float64"
RATIONAL = "rational"
_DTYPE = np.dtype("<f8")


def encode_dense(M) -> bytes:
    M = as_dense_matrix(M)
    header = f"{MAGIC}\n{M.shape[0]} {M.shape[1]}\n{FLOAT64}\n".encode("ascii")
    return header + np.ascontiguousarray(M, dtype=_DTYPE).tobytes()


def encode_rational(A: RationalMatrix) -> bytes:
    lines = [MAGIC, f"{A.rows} {A.cols}", RATIONAL]
    lines.extend(f"{x.numerator}/{x.denominator}" for row in A.entries for x in row)
    return ("\n".join(lines) + "\n").encode("ascii")


def write_matrix(path: PathLike, M: Union[np.ndarray, RationalMatrix]) -> Path:
    """
    Write a dense or rational matrix atomically.

    Args:
        path: Destination file
        M: numpy array (written as float64) or RationalMatrix

    Returns:
        The destination path
    """
    data = encode_rational(M) if isinstance(M, RationalMatrix) else encode_dense(M)
    return atomic_write_bytes(path, data)


def _split_header(data: bytes) -> Tuple[int, int, str, bytes]:
    parts = data.split(b"\n", 3)
    if len(parts) < 4:
        raise MatrixFormatError("truncated header")
    magic, shape, kind, payload = parts
    if magic != MAGIC.encode("ascii"):
        raise MatrixFormatError(f"bad magic {magic[:16]!r}")
    try:
        rows, cols = (int(x) for x in shape.decode("ascii").split())
    except (UnicodeDecodeError, ValueError) as e:
        raise MatrixFormatError(f"bad shape line {shape[:32]!r}") from e
    if rows < 1 or cols < 0:
        raise MatrixFormatError(f"bad shape {rows}x{cols}")
    kind_str = kind.decode("ascii", errors="replace")
    if kind_str not in (FLOAT64, RATIONAL):
        raise MatrixFormatError(f"unknown value kind {kind_str!r}")
    return rows, cols, kind_str, payload


def decode_matrix(data: bytes) -> Union[np.ndarray, RationalMatrix]:
    """Parse SPRD1 bytes into a float64 array or a RationalMatrix."""
    rows, cols, kind, payload = _split_header(data)
    if kind == FLOAT64:
        expected = rows * cols * _DTYPE.itemsize
        if len(payload) != expected:
            raise MatrixFormatError(f"payload has {len(payload)} bytes, expected {expected}")
        return np.frombuffer(payload, dtype=_DTYPE).astype(np.float64).reshape(rows, cols)

    lines = payload.decode("ascii", errors="replace").split()
    if len(lines) != rows * cols:
        raise MatrixFormatError(f"payload has {len(lines)} entries, expected {rows * cols}")
    try:
        values = [Fraction(x) for x in lines]
    except (ValueError, ZeroDivisionError) as e:
        raise MatrixFormatError(f"bad rational entry: {e}") from e
    entries = tuple(tuple(values[i * cols : (i + 1) * cols]) for i in range(rows))
    return RationalMatrix(rows=rows, cols=cols, entries=entries)


def read_matrix(path: PathLike) -> Union[np.ndarray, RationalMatrix]:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise MatrixFormatError(f"cannot read {path}: {e}") from e
    return decode_matrix(data)


def read_dense_matrix(path: PathLike) -> np.ndarray:
    """Read a matrix as float64; rational files are converted."""
    M = read_matrix(path)
    if isinstance(M, RationalMatrix):
        M = M.to_float()
    return as_dense_matrix(M, str(path))


def read_rational_matrix(path: PathLike) -> RationalMatrix:
    M = read_matrix(path)
    if not isinstance(M, RationalMatrix):
        raise MatrixFormatError(f"{path} holds float64 values, expected rational")
    return M


def write_bundle(directory: PathLike, design, meta) -> Path:
    """
    Serialize a construction as design.sprd plus meta.json.

    Args:
        directory: Output directory (created if missing)
        design: Design matrix
        meta: BundleMeta

    Returns:
        The directory path
    """
    directory = Path(directory)
    write_matrix(directory / "design.sprd", design)
    atomic_write_bytes(
        directory / "meta.json", to_json_bytes(meta.model_dump(mode="json", by_alias=True))
    )
    logger.info("Bundle %s written to %s", meta.tag, directory)
    return directory
