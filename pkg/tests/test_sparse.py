import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xreg.sparse import DegenerateInputError, SparseVector, dot, normalize_rows, top_k, unit_normalize


def sv(d, dim=10):
    return SparseVector.from_pairs(d, dim)


def test_dot_examples():
    assert dot(sv({0: 1.0, 2: 2.0}), sv({2: 3.0, 5: 1.0})) == 6.0
    assert dot(sv({0: 1.0, 3: -2.0}), SparseVector.empty(10)) == 0.0
    assert dot(sv({1: 2.0}), sv({1: 0.5})) == 1.0


def test_dot_dimension_mismatch():
    with pytest.raises(ValueError):
        dot(sv({0: 1.0}, 3), sv({0: 1.0}, 4))


def test_dot_matches_dense_oracle(rng):
    for _ in range(1000):
        dim = int(rng.integers(1, 60))
        vecs = []
        for _ in range(2):
            nnz = int(rng.integers(0, dim + 1))
            idx = rng.choice(dim, nnz, replace=False)
            vecs.append(SparseVector.from_pairs(zip(idx.tolist(), rng.standard_normal(nnz).tolist()), dim))
        a, b = vecs
        want = float(np.dot(a.to_dense(), b.to_dense()))
        got = dot(a, b)
        assert got == pytest.approx(want, rel=1e-12, abs=1e-14)
        assert dot(b, a) == pytest.approx(got, rel=1e-12, abs=1e-14)


def test_unit_normalize_examples():
    v = unit_normalize(sv({0: 3.0, 1: 4.0}))
    assert v.to_dict() == pytest.approx({0: 0.6, 1: 0.8})
    assert unit_normalize(sv({7: -2.0})).to_dict() == {7: -1.0}
    v = unit_normalize(sv({0: 1.0, 1: 1.0, 2: 1.0}))
    assert list(v.values) == pytest.approx([1 / math.sqrt(3)] * 3, rel=1e-15)


def test_unit_normalize_rejects_zero():
    with pytest.raises(DegenerateInputError):
        unit_normalize(SparseVector.empty(4))


@settings(max_examples=200, deadline=None)
@given(st.dictionaries(st.integers(0, 49), st.floats(-1e6, 1e6, allow_nan=False).filter(lambda f: abs(f) > 1e-300),
                       min_size=1))
def test_unit_normalize_norm_and_support(d):
    v = sv(d, 50)
    u = unit_normalize(v)
    assert abs(u.norm() - 1.0) <= 1e-9
    assert np.array_equal(u.indices, v.indices)


def test_top_k_examples():
    assert top_k([(0, 0.2), (1, 0.9), (2, 0.5)], 2) == [1, 2]
    assert top_k([(0, 0.5), (1, 0.5)], 1) == [0]
    assert top_k([(0, 0.1)], 5) == [0]
    with pytest.raises(ValueError):
        top_k([(0, 0.1)], 0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from([0.0, 0.25, 0.5, 1.0, -1.0, 3.5]), min_size=1, max_size=30),
       st.integers(1, 30))
def test_top_k_prefix_consistent(vals, j):
    scores = list(enumerate(vals))
    a = top_k(scores, j)
    b = top_k(scores, j + 1)
    assert b[:len(a)] == a
    # descending, ties by index
    keyed = [(-vals[i], i) for i in b]
    assert keyed == sorted(keyed)


def test_sparse_vector_invariants():
    with pytest.raises(ValueError):
        SparseVector(np.array([2, 1]), np.array([1.0, 1.0]), 5)
    with pytest.raises(ValueError):
        SparseVector(np.array([5]), np.array([1.0]), 5)
    with pytest.raises(ValueError):
        SparseVector(np.array([0]), np.array([np.nan]), 5)
    with pytest.raises(ValueError):
        SparseVector(np.array([0]), np.array([0.0]), 5)
    v = SparseVector.from_pairs([(3, 1.0), (1, 2.0), (3, 1.0), (4, 0.0)], 5)
    assert v.to_dict() == {1: 2.0, 3: 2.0}


def test_normalize_rows_flags_zero_rows():
    import scipy.sparse as sp
    M, zero = normalize_rows(sp.csr_matrix(np.array([[3.0, 4.0], [0.0, 0.0]])))
    assert zero.tolist() == [False, True]
    assert M.toarray()[0] == pytest.approx([0.6, 0.8])
