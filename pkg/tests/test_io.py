import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jgse.io import (read_matrix_csv, read_series_csv, sha256_file, write_dot, write_edges_csv,
                     write_json, write_labels_csv, write_matrix_csv, write_table_csv)
from jgse.model import DataError


def test_header_optional(tmp_path):
    a = tmp_path / "a.csv"
    a.write_text("u,v\n1,2\n3,4.5\n")
    values, names = read_series_csv(a)
    assert names == ("u", "v")
    np.testing.assert_array_equal(values, [[1, 2], [3, 4.5]])
    b = tmp_path / "b.csv"
    b.write_text("1,2\n\n3,4\n")
    values, names = read_series_csv(b)
    assert names == ("x0", "x1") and values.shape == (2, 2)


@pytest.mark.parametrize("body,line", [
    ("u,v\n1,2\n3\n", 3),
    ("u,v\n1,2\n3,abc\n", 3),
    ("1,2\n3,nan\n", 2),
    ("1,2\n3,inf\n5,6\n", 2),
    ("u,v\n1,2\n3,4\n5,\n", 4),
])
def test_malformed_rows_name_the_line(tmp_path, body, line):
    f = tmp_path / "bad.csv"
    f.write_text(body)
    with pytest.raises(DataError, match=f"line {line}:"):
        read_series_csv(f)


def test_missing_and_empty_files(tmp_path):
    with pytest.raises(DataError, match="cannot open"):
        read_series_csv(tmp_path / "nope.csv")
    (tmp_path / "empty.csv").write_text("u,v\n")
    with pytest.raises(DataError, match="no data rows"):
        read_series_csv(tmp_path / "empty.csv")


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=4, max_size=4))
def test_matrix_roundtrip_exact(tmp_path_factory, vals):
    path = tmp_path_factory.mktemp("m") / "m.csv"
    M = np.array(vals).reshape(2, 2)
    write_matrix_csv(path, M, ["a", "b"])
    np.testing.assert_array_equal(read_matrix_csv(path), M)


def test_matrix_csv_bools_and_square_check(tmp_path):
    path = write_matrix_csv(tmp_path / "p.csv", np.array([[True, False], [False, True]]))
    assert path.read_text() == "x0,x1\n1,0\n0,1\n"
    write_matrix_csv(tmp_path / "r.csv", np.zeros((2, 3)))
    with pytest.raises(DataError, match="square"):
        read_matrix_csv(tmp_path / "r.csv")


def test_edges_and_labels(tmp_path):
    M = np.array([[1.0, -0.5, 0.0], [0.25, 2.0, 0.0], [0.0, 0.0, 3.0]])
    write_edges_csv(tmp_path / "d.csv", M, ["a", "b", "c"], directed=True)
    assert (tmp_path / "d.csv").read_text() == "source,target,weight\na,b,-0.5\nb,a,0.25\n"
    S = np.array([[0.0, 0.7], [0.7, 0.0]])
    write_edges_csv(tmp_path / "u.csv", S, ["a", "b"], directed=False, columns=("i", "j", "c_ij"))
    assert (tmp_path / "u.csv").read_text() == "i,j,c_ij\na,b,0.7\n"
    write_labels_csv(tmp_path / "l.csv", np.array([1, 0]), ["a", "b"])
    assert (tmp_path / "l.csv").read_text() == "node,cluster\na,1\nb,0\n"


def test_table_and_json(tmp_path):
    write_table_csv(tmp_path / "t.csv", [{"m": "x", "v": 0.1}, {"m": "y"}], ["m", "v"])
    assert (tmp_path / "t.csv").read_text() == "m,v\nx,0.1\ny,\n"
    write_json(tmp_path / "j.json", {"b": np.int64(2), "a": np.array([1.5, np.inf]), "c": np.bool_(True)})
    assert json.loads((tmp_path / "j.json").read_text()) == {"a": [1.5, "inf"], "b": 2, "c": True}


def test_dot_export(tmp_path):
    B = np.array([[0.0, -0.4], [0.3, 0.1]])
    text = write_dot(tmp_path / "g.dot", B, ["a", "b"], directed=True, name="GTG").read_text()
    assert text.startswith("digraph GTG {")
    assert '"a" -> "b" [weight=0.4, style=dashed];' in text
    assert '"b" -> "a" [weight=0.3, style=solid];' in text
    assert "->" not in text.split("\n")[1]
    text = write_dot(tmp_path / "u.dot", B + B.T, ["a", "b"], directed=False).read_text()
    assert text.startswith("graph G {")
    assert text.count("--") == 1


def test_sha256(tmp_path):
    f = tmp_path / "x"
    f.write_bytes(b"abc")
    assert sha256_file(f) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
