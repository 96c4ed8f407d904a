import json
import math

import numpy as np
import pytest

from sparsemur.exceptions import NegativeEntryError, ParseError, ValidationError
from sparsemur.iohub import (
    RunReport,
    dumps_report,
    image_patches,
    read_config,
    read_matrix,
    read_pgm,
    read_pgm_patches,
    read_report,
    write_csv_rows,
    write_matrix,
    write_pgm,
    write_report,
)


def test_csv_identity(tmp_path):
    p = tmp_path / "i.csv"
    p.write_text("1,0\n0,1\n")
    np.testing.assert_array_equal(read_matrix(p), np.eye(2))


def test_matrix_market_column_major(tmp_path):
    p = tmp_path / "a.mtx"
    p.write_text("%%MatrixMarket matrix array real general\n% comment\n2 3\n1\n2\n3\n4\n5\n6\n")
    np.testing.assert_array_equal(read_matrix(p), [[1, 3, 5], [2, 4, 6]])


def test_matrix_market_count_mismatch(tmp_path):
    p = tmp_path / "a.mtx"
    p.write_text("%%MatrixMarket matrix array real general\n2 3\n1\n2\n3\n")
    with pytest.raises(ParseError) as exc:
        read_matrix(p)
    assert exc.value.line == 2


@pytest.mark.parametrize("text", ["%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 1\n",
                                  "%%MatrixMarket matrix array complex general\n1 1\n1 0\n",
                                  "not a banner\n", "%%MatrixMarket matrix array real general\n2\n"])
def test_matrix_market_rejects(tmp_path, text):
    p = tmp_path / "a.mtx"
    p.write_text(text)
    with pytest.raises(ParseError):
        read_matrix(p)


def test_negative_entry_location(tmp_path):
    p = tmp_path / "n.csv"
    p.write_text("1,2\n3,-1\n")
    with pytest.raises(NegativeEntryError) as exc:
        read_matrix(p)
    assert (exc.value.row, exc.value.col) == (1, 1)


def test_csv_parse_errors(tmp_path):
    p = tmp_path / "b.csv"
    p.write_text("1,2\n3\n")
    with pytest.raises(ParseError) as exc:
        read_matrix(p)
    assert exc.value.line == 2
    p.write_text("1,x\n")
    with pytest.raises(ParseError):
        read_matrix(p)
    with pytest.raises(FileNotFoundError):
        read_matrix(tmp_path / "missing.csv")
    with pytest.raises(ValidationError):
        read_matrix(p, format="xml")


@pytest.mark.parametrize("suffix", [".mtx", ".csv"])
def test_round_trip_full_precision(tmp_path, suffix):
    M = np.random.default_rng(0).random((5, 4)) * 10.0 ** np.arange(-8, 12, 5)
    M[0, 0] = 0.0
    p = tmp_path / ("m" + suffix)
    write_matrix(M, p)
    assert np.array_equal(read_matrix(p), M)


def test_pgm_binary_and_ascii(tmp_path):
    img = np.linspace(0, 1, 16 * 16).reshape(16, 16)
    for binary in (True, False):
        p = tmp_path / f"im{int(binary)}.pgm"
        write_pgm(img, p, binary=binary)
        out = read_pgm(p)
        assert out.shape == (16, 16)
        np.testing.assert_allclose(out, np.rint(img * 255) / 255)
        patches = read_pgm_patches(p, 8)
        assert patches.shape == (64, 4)
        np.testing.assert_array_equal(patches[:, 1], out[:8, 8:].ravel())


def test_pgm_constant_and_full_patch(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# a comment\n19 19\n255\n" + bytes([255]) * 361)
    X = read_pgm_patches(p, 19)
    assert X.shape == (361, 1)
    assert np.all(X == 1.0)
    with pytest.raises(ValidationError):
        read_pgm_patches(p, 20)


def test_pgm_16bit(tmp_path):
    img = np.array([[0.0, 1.0], [0.5, 0.25]])
    p = tmp_path / "w.pgm"
    write_pgm(img, p, maxval=65535)
    np.testing.assert_allclose(read_pgm(p), np.rint(img * 65535) / 65535)


@pytest.mark.parametrize("data", [b"P6\n1 1\n255\n\x00", b"P5\n2 2\n255\n\x00", b"P2\n1 1\n255\n300\n", b"P5\n"])
def test_pgm_malformed(tmp_path, data):
    p = tmp_path / "bad.pgm"
    p.write_bytes(data)
    with pytest.raises(ParseError):
        read_pgm(p)


def test_image_patches_tiling():
    img = np.arange(36, dtype=float).reshape(6, 6)
    assert image_patches(img, 3).shape == (9, 4)
    assert image_patches(img, 4).shape == (16, 1)


def test_config(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[problem]\nd = 80\nk = [5, 10]\nrefine = false\nname = run one\n"
                 "[solve]\nblocks = [[0, 1], [2]]\nlambda = 1e-3\n")
    conf = read_config(p)
    assert conf["problem"] == {"d": 80, "k": [5, 10], "refine": False, "name": "run one"}
    assert conf["solve"]["blocks"] == [[0, 1], [2]]
    assert conf["solve"]["lambda"] == 1e-3
    p.write_text("no section\n")
    with pytest.raises(ParseError):
        read_config(p)


def test_report_round_trip_and_nan(tmp_path):
    rep = RunReport("bench", spec={"b": 1, "a": [1.5, 2]}, metrics={"err": math.nan, "ok": np.float64(0.25)}, seed=7)
    p = tmp_path / "r.json"
    write_report(rep, p)
    data = json.loads(p.read_text())
    assert data["metrics"]["err"] is None
    assert any("err" in w for w in data["warnings"])
    assert data["schema_version"] == 1
    back = read_report(p)
    assert dumps_report(back) == p.read_text()
    assert list(data) == sorted(data)


def test_report_bytes_identical(tmp_path):
    mk = lambda: RunReport("x", spec={"z": 1, "a": {"q": 0.1}}, metrics={"v": [1e-300, 3.0]}, seed=1)
    write_report(mk(), tmp_path / "a.json")
    write_report(mk(), tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_report_schema_check():
    with pytest.raises(ValidationError):
        RunReport.from_dict({"command": "x", "schema_version": 99})


def test_csv_rows(tmp_path):
    p = tmp_path / "r.csv"
    write_csv_rows([{"a": 1, "b": math.nan}, {"a": 0.5, "c": None}], p)
    assert p.read_text() == "a,b,c\n1,,\n0.5,,\n"
