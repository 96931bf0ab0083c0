import numpy as np
import pytest
import scipy.sparse as sp

from xreg.metrics import evaluate_metric, label_counts, propensities
from xreg.pointwise import predict_pointwise
from xreg.rerank import DEFAULT_ALPHA, TailClassifier, rerank, rerank_file
from xreg.sparse import SparseVector
from xreg.synthetic import make_dataset
from xreg.trainer import Hyperparams, train


@pytest.fixture
def tail(rng):
    C = rng.standard_normal((6, 4))
    C /= np.linalg.norm(C, axis=1, keepdims=True)
    return TailClassifier(sp.csr_matrix(C), np.arange(6))


def cands(rng, n=5):
    labs = rng.choice(6, n, replace=False)
    sc = np.sort(rng.uniform(size=n))[::-1]
    return list(zip(labs.tolist(), sc.tolist()))


def x_of(rng):
    return SparseVector.from_pairs(dict(enumerate(rng.standard_normal(4))), 4)


def test_alpha_one_is_identity(tail, rng):
    for _ in range(20):
        c = cands(rng)
        assert rerank(c, x_of(rng), tail, alpha=1.0) == c


def test_alpha_zero_orders_by_cosine(tail, rng):
    for _ in range(20):
        c, x = cands(rng), x_of(rng)
        out = rerank(c, x, tail, alpha=0.0)
        cos = dict(zip([l for l, _ in c], tail.cosine(x, [l for l, _ in c]).tolist()))
        assert [s for _, s in out] == pytest.approx(sorted(cos.values(), reverse=True))
        assert all(cos[l] == pytest.approx(s) for l, s in out)


def test_centroid_match_gives_half_plus_half(tail):
    v = tail.centroids[2].toarray().ravel()
    x = SparseVector.from_pairs(dict(enumerate((3.0 * v).tolist())), 4)
    out = dict(rerank([(2, 0.3), (4, 0.9)], x, tail, alpha=0.5))
    assert out[2] == pytest.approx(0.5 * 0.3 + 0.5, rel=1e-12)


def test_candidate_set_preserved_and_descending(tail, rng):
    for a in np.linspace(0, 1, 11):
        c = cands(rng)
        out = rerank(c, x_of(rng), tail, alpha=float(a))
        assert sorted(l for l, _ in out) == sorted(l for l, _ in c)
        s = [v for _, v in out]
        assert s == sorted(s, reverse=True)


def test_blend_affine_in_alpha(tail, rng):
    c, x = cands(rng), x_of(rng)
    f = {a: dict(rerank(c, x, tail, alpha=a)) for a in (0.0, 0.3, 1.0)}
    for l, _ in c:
        assert f[0.3][l] == pytest.approx(0.7 * f[0.0][l] + 0.3 * f[1.0][l], rel=1e-12)


def test_empty_and_negative_cosines(tail):
    assert rerank([], SparseVector.empty(4), tail) == []
    out = rerank([(0, 0.4)], SparseVector.empty(4), tail, alpha=0.0)
    assert out == [(0, 0.0)]


@pytest.mark.parametrize("alpha", [-0.1, 1.5])
def test_alpha_out_of_range(tail, alpha):
    with pytest.raises(ValueError):
        rerank([(0, 0.5)], SparseVector.empty(4), tail, alpha=alpha)


def test_file_rerank_keeps_raw_scores(toy_model, toy_split):
    _, te = toy_split
    P = predict_pointwise(toy_model, te.X)
    tail = TailClassifier.from_model(toy_model)
    same = rerank_file(P, te.X, tail, alpha=1.0, y_max=toy_model.y_max)
    assert same.rows == P.rows
    Q = rerank_file(P, te.X, tail, alpha=DEFAULT_ALPHA, y_max=toy_model.y_max)
    assert Q.raw_scores == P.rows


def test_tail_heavy_trade_off():
    tr, te = make_dataset(1500, 200, 800, n_test=400, zipf=1.0, seed=2)
    m = train(tr, Hyperparams(max_leaf=16, threads=1))
    P = predict_pointwise(m, te.X, beam=10, k=20)
    Q = rerank_file(P, te.X, TailClassifier.from_model(m), DEFAULT_ALPHA, m.y_max)
    p = propensities(label_counts(tr.Y), tr.Y.shape[0])
    assert evaluate_metric("xmad", te.Y, Q, 5) >= evaluate_metric("xmad", te.Y, P, 5)
    assert evaluate_metric("psp", te.Y, Q, 5, p) > evaluate_metric("psp", te.Y, P, 5, p)


def test_model_without_tail_section(toy_split):
    m = train(toy_split[0], Hyperparams(trees=1, max_leaf=8, tail=False, threads=1))
    with pytest.raises(ValueError):
        TailClassifier.from_model(m)
