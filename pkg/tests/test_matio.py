import numpy as np
import pytest
import scipy.sparse as sp

from zge.errors import DataError
from zge.matio import read_csr, read_matrix, write_csr, write_matrix


def test_round_trip(tmp_path):
    mat = np.random.default_rng(0).standard_normal((7, 3))
    write_matrix(tmp_path / "m.zgem", mat)
    back = read_matrix(tmp_path / "m.zgem")
    assert back.dtype == np.float64 and back.flags.c_contiguous
    assert np.array_equal(back, mat)


def test_header_layout(tmp_path):
    write_matrix(tmp_path / "m.zgem", np.zeros((2, 5)))
    raw = (tmp_path / "m.zgem").read_bytes()
    assert raw[:4] == b"ZGEM"
    assert int.from_bytes(raw[4:8], "little") == 1
    assert int.from_bytes(raw[8:16], "little") == 2
    assert int.from_bytes(raw[16:24], "little") == 5
    assert len(raw) == 24 + 2 * 5 * 8


def test_bad_magic(tmp_path):
    path = tmp_path / "m.zgem"
    write_matrix(path, np.ones((2, 2)))
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XXXX"
    path.write_bytes(raw)
    with pytest.raises(DataError, match="bad magic"):
        read_matrix(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "m.zgem"
    write_matrix(path, np.ones((4, 4)))
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(DataError, match="truncated"):
        read_matrix(path)


def test_rejects_non_2d():
    with pytest.raises(ValueError):
        write_matrix("/dev/null", np.zeros((2, 2, 2)))


def test_csr_round_trip(tmp_path):
    mat = sp.random(15, 9, density=0.3, random_state=2, format="csr")
    write_csr(tmp_path / "a", mat)
    back = read_csr(tmp_path / "a")
    assert back.shape == mat.shape
    assert (back != mat).nnz == 0
