import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import make_matrix
from entrorec.dataset import (
    PageViewMatrix,
    build_pv_matrix,
    level_sizes,
    prune,
    split_levels,
    split_matrix,
    split_train_test,
)
from entrorec.errors import DataError, FormatError
from entrorec.logs import Session


def session(sid, start, *urls):
    return Session(sid, sid.split("#")[0], tuple((start + i, u) for i, u in enumerate(urls)))


def test_build_orders_rows_by_start_and_columns_by_first_appearance():
    pv = build_pv_matrix([session("b#1", 50, "/y", "/x"), session("a#1", 10, "/x", "/z", "/x")])
    assert pv.users == ("a#1", "b#1")
    assert pv.pages == ("/x", "/z", "/y")
    assert pv.cells.tolist() == [[1, 1, 0], [1, 0, 1]]


def test_build_rejects_empty():
    with pytest.raises(DataError):
        build_pv_matrix([])


def test_matrix_validation():
    with pytest.raises(ValueError):
        make_matrix([[0, 2]])
    with pytest.raises(ValueError):
        make_matrix([[0, 1], [1, 0]], users=["a", "a"])
    with pytest.raises(ValueError):
        PageViewMatrix(("a",), ("/p",), np.zeros((1, 2), dtype=np.uint8))


def test_cells_are_read_only():
    pv = make_matrix([[0, 1]])
    with pytest.raises(ValueError):
        pv.cells[0, 0] = 1


def test_prune_single_pass_and_fixpoint():
    pv = make_matrix(
        [
            [1, 1, 0, 0],
            [1, 1, 0, 0],
            [1, 0, 1, 0],  # loses its rare page and falls below min_pages
            [0, 0, 0, 1],
        ]
    )
    once = prune(pv, min_pages=2, min_url_sessions=2)
    assert once.users == ("u0", "u1", "u2") and once.pages == ("/p0.html", "/p1.html")
    fixed = prune(pv, min_pages=2, min_url_sessions=2, fixpoint=True)
    assert fixed.users == ("u0", "u1") and fixed.pages == ("/p0.html", "/p1.html")


def test_prune_too_sparse():
    with pytest.raises(DataError, match="too sparse"):
        prune(make_matrix([[1, 0], [0, 1]]), min_pages=2, min_url_sessions=1)


@pytest.mark.parametrize("n,expected", [(10, 8), (122, 97), (5, 4), (2, 1)])
def test_train_split_sizes(n, expected):
    train, test = split_train_test(make_matrix(np.eye(n, 3, dtype=np.uint8)), 0.8)
    assert train.shape[0] == expected and test.shape[0] == n - expected
    assert train.users + test.users == tuple(f"u{i}" for i in range(n))


def test_train_split_rejects_degenerate():
    with pytest.raises(DataError):
        split_train_test(make_matrix([[1, 0]]), 0.8)
    with pytest.raises(ValueError):
        split_train_test(make_matrix([[1, 0], [0, 1]]), 1.0)


@pytest.mark.parametrize("p,sizes", [(43, (22, 21)), (42, (21, 21)), (2, (1, 1)), (3, (2, 1))])
def test_level_sizes(p, sizes):
    assert level_sizes(p) == sizes


def test_split_levels_and_matrix():
    pv = make_matrix(np.ones((5, 5), dtype=np.uint8))
    l1, l2 = split_levels(pv)
    assert l1.pages == pv.pages[:3] and l2.pages == pv.pages[3:]
    parts = split_matrix(pv)
    assert parts.train.shape == (4, 5) and parts.level1.shape == (4, 3) and parts.level2.shape == (4, 2)
    with pytest.raises(DataError):
        split_levels(make_matrix([[1], [0]]))


def test_text_format_layout():
    pv = make_matrix([[0, 1], [1, 1]], users=["s1", "s2"], pages=["/a", "/b"])
    assert pv.to_text() == "PVMATRIX v1\n/a\t/b\ns1\t0\t1\ns2\t1\t1\n"


@pytest.mark.parametrize(
    "text",
    [
        "PVMATRIX v2\n/a\ns1\t0\n",
        "",
        "PVMATRIX v1\n/a\t/b\ns1\t0\n",
        "PVMATRIX v1\n/a\ns1\t7\n",
        "PVMATRIX v1\n/a\ns1\t1\ns1\t0\n",
    ],
)
def test_text_format_rejects(text):
    with pytest.raises(FormatError):
        PageViewMatrix.from_text(text)


@given(arrays(np.uint8, st.tuples(st.integers(1, 8), st.integers(1, 8)), elements=st.integers(0, 1)))
def test_text_round_trip(cells):
    pv = make_matrix(cells)
    text = pv.to_text()
    back = PageViewMatrix.from_text(text)
    assert back == pv and back.to_text() == text


def test_file_round_trip(tmp_path):
    pv = make_matrix([[1, 0, 1]])
    pv.write(tmp_path / "m.tsv")
    assert PageViewMatrix.read(tmp_path / "m.tsv") == pv
