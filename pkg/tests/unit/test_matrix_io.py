import json
from fractions import Fraction

import numpy as np
import pytest

from errors import MatrixFormatError
from instances import LOGD_OVER_ALPHA2, build_construction
from matrix_io import (
    decode_matrix,
    encode_dense,
    read_dense_matrix,
    read_matrix,
    read_rational_matrix,
    write_bundle,
    write_matrix,
)
from numerics import RationalMatrix


class TestMatrixFiles:
    """Test suite for the SPRD1 format."""

    def test_dense_file(self, tmp_path, rng):
        M = rng.standard_normal((5, 3))
        path = write_matrix(tmp_path / "m.sprd", M)
        np.testing.assert_array_equal(read_dense_matrix(path), M)
        assert path.read_bytes().startswith(b"SPRD1\n5 3\nfloat64\n")

    def test_rational_file(self, tmp_path):
        A = RationalMatrix.from_rows([[Fraction(1, 3), -2], [0, Fraction(5, 7)]])
        path = write_matrix(tmp_path / "r.sprd", A)
        assert read_rational_matrix(path) == A
        np.testing.assert_allclose(read_dense_matrix(path), A.to_float())
        assert b"1/3\n-2/1\n" in path.read_bytes()

    def test_float_file_is_not_rational(self, tmp_path):
        path = write_matrix(tmp_path / "m.sprd", np.eye(2))
        with pytest.raises(MatrixFormatError):
            read_rational_matrix(path)

    @pytest.mark.parametrize(
        "data",
        [
            b"SPRD1\n2 2\n",
            b"SPRD2\n1 1\nfloat64\n" + b"\x00" * 8,
            b"SPRD1\ntwo 2\nfloat64\n",
            b"SPRD1\n1 1\nint32\n\x00\x00\x00\x00",
            b"SPRD1\n1 1\nrational\n1/2\n3/4\n",
            b"SPRD1\n1 1\nrational\nhalf\n",
        ],
    )
    def test_malformed(self, data):
        with pytest.raises(MatrixFormatError):
            decode_matrix(data)

    def test_short_payload(self):
        data = encode_dense(np.ones((2, 2)))[:-1]
        with pytest.raises(MatrixFormatError):
            decode_matrix(data)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MatrixFormatError):
            read_matrix(tmp_path / "absent.sprd")

    def test_no_temp_files_left(self, tmp_path):
        write_matrix(tmp_path / "m.sprd", np.eye(3))
        assert [p.name for p in tmp_path.iterdir()] == ["m.sprd"]


class TestBundle:
    """Test suite for construction bundles on disk."""

    def test_write_bundle(self, tmp_path):
        bundle = build_construction(LOGD_OVER_ALPHA2, 128, 64, 0.25, 2.0, seed=0)
        out = write_bundle(tmp_path / "bundle", bundle.design, bundle.meta)
        np.testing.assert_array_equal(read_dense_matrix(out / "design.sprd"), bundle.design)
        meta = json.loads((out / "meta.json").read_text())
        assert meta["tag"] == LOGD_OVER_ALPHA2
        assert meta["lambda"] == 0.5
        assert "lam" not in meta


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
