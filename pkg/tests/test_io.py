import io
import json

import numpy as np
import pytest

from backend.app.services.io_service import dumps, read_corr_csv, read_data_csv, write_matrix_csv
from backend.app.utils.errors import DimensionError, InputError


def test_header_row_is_skipped():
    data = read_data_csv(io.StringIO("x1,x2,x3\n1,2,3\n4,5,7\n"))
    assert data.shape == (2, 3)
    assert data[1, 2] == 7.0


def test_headerless_data():
    data = read_data_csv(io.StringIO("1,2\n3,4\n5,6.5\n"))
    np.testing.assert_array_equal(data, [[1, 2], [3, 4], [5, 6.5]])


@pytest.mark.parametrize("text", ["1,2,3\n4,5\n", "1,2\n3,abc\n", "a,b\n"])
def test_malformed_data_rejected(text):
    with pytest.raises(InputError):
        read_data_csv(io.StringIO(text))


def test_missing_file(tmp_path):
    with pytest.raises(InputError):
        read_data_csv(tmp_path / "absent.csv")


def test_corr_must_be_square():
    with pytest.raises(DimensionError):
        read_corr_csv(io.StringIO("1,0.2,0.1\n0.2,1,0.3\n"))


def test_corr_must_be_symmetric():
    with pytest.raises(InputError):
        read_corr_csv(io.StringIO("1,0.2\n0.5,1\n"))


def test_corr_written_then_read(tmp_path):
    R = np.array([[1.0, 0.123456789012345], [0.123456789012345, 1.0]])
    path = tmp_path / "corr.csv"
    write_matrix_csv(path, R, header=["a", "b"])
    loaded = read_corr_csv(path, kind="population")
    np.testing.assert_array_equal(loaded.entries, R)
    assert loaded.kind == "population"


def test_dumps_handles_numpy_and_non_finite():
    payload = json.loads(dumps({"a": np.float64(0.5), "b": np.arange(3), "c": float("inf"), "d": np.bool_(True), 2: {3, 1}}))
    assert payload == {"a": 0.5, "b": [0, 1, 2], "c": None, "d": True, "2": [1, 3]}
