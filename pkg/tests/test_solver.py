import math

import numpy as np
import pytest
import scipy.sparse as sp

from oracles import gd_minimize
from xreg.solver import LinearRegressor, objective, predict_prob, sigmoid, solve
from xreg.sparse import SparseVector


def dense_w(r, d):
    w = np.zeros(d)
    w[r.weights.indices] = r.weights.values
    return w


def random_instance(rng):
    n = int(rng.integers(2, 21))
    d = int(rng.integers(1, 6))
    X = sp.csr_matrix(rng.standard_normal((n, d)) * (rng.uniform(size=(n, d)) < 0.8))
    z = rng.uniform(size=n) * (rng.uniform(size=n) < 0.7)
    s = rng.uniform(0.2, 1.0, size=n)
    return X, s * z, s * (1 - z)


def test_pure_negatives_predict_below_half(rng):
    X = sp.csr_matrix(np.hstack([rng.uniform(0.5, 1.5, (15, 3)), np.ones((15, 1))]))
    r = solve(X, np.arange(15), np.zeros(15), np.ones(15), prune=0)
    for i in range(15):
        x = SparseVector.from_csr_row(X, i)
        assert predict_prob(r, x) < 0.5


def test_symmetric_instance():
    # x and -x carry the same (a, b) pair, so the objective is even in w
    X = sp.csr_matrix(np.array([[1.0, 2.0], [-1.0, -2.0]]))
    a, b = np.array([0.6, 0.6]), np.array([0.4, 0.4])
    w = np.array([0.7, -0.3])
    assert objective(w, X, [0, 1], a, b, 10) == pytest.approx(objective(-w, X, [0, 1], a, b, 10),
                                                              rel=1e-12)
    r1 = solve(X, [0, 1], a, b, prune=0, tol=1e-8, max_iter=1000)
    r2 = solve(X, [0, 1], a, b, prune=0, tol=1e-8, max_iter=1000)
    assert r1.weights == r2.weights
    assert np.abs(dense_w(r1, 2)).max() < 1e-4


@pytest.mark.parametrize("scale", ["sum", "mean"])
def test_two_point_problem_matches_gradient_descent(scale):
    X = sp.csr_matrix(np.array([[1.0], [-1.0]]))
    a, b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    r = solve(X, [0, 1], a, b, C=10, tol=1e-8, max_iter=1000, prune=0, loss_scale=scale)
    w_ref, _ = gd_minimize(X, a, b, 10, scale)
    assert dense_w(r, 1) == pytest.approx(w_ref, abs=1e-4)


@pytest.mark.parametrize("scale", ["sum", "mean"])
def test_objective_matches_oracle_on_random_instances(rng, scale):
    worst = 0.0
    for _ in range(50):
        X, a, b = random_instance(rng)
        n, d = X.shape
        r = solve(X, np.arange(n), a, b, C=10, prune=0, loss_scale=scale)
        got = objective(dense_w(r, d), X, np.arange(n), a, b, 10, scale)
        _, ref = gd_minimize(X, a, b, 10, scale)
        worst = max(worst, (got - ref) / abs(ref))
    assert worst <= 1e-3


def test_dual_objective_monotone_and_primal_converges(rng):
    for _ in range(10):
        X, a, b = random_instance(rng)
        n, d = X.shape
        r = solve(X, np.arange(n), a, b, tol=1e-6, max_iter=500, prune=0, trace=True)
        primal = [p for p, _ in r.trace]
        dual = [q for _, q in r.trace]
        for prev, cur in zip(dual, dual[1:]):
            assert cur <= prev + 1e-6 * max(1.0, abs(prev))
        # weak duality: the (halved) primal bounds minus the dual from above
        assert all(p + q >= -1e-9 for p, q in zip(primal, dual))
        assert primal[-1] + dual[-1] <= 1e-4 * max(1.0, primal[-1])


def test_fractional_weights_equal_duplicated_examples():
    X = sp.csr_matrix(np.array([[1.0, 0.5], [0.2, -1.0]]))
    frac = solve(X, [0, 1], [0.3, 0.8], [0.7, 0.2], prune=0, tol=1e-6)
    Xd = sp.csr_matrix(np.array([[1.0, 0.5], [1.0, 0.5], [0.2, -1.0], [0.2, -1.0]]))
    dup = solve(Xd, [0, 1, 2, 3], [0.3, 0.0, 0.8, 0.0], [0.0, 0.7, 0.0, 0.2], prune=0, tol=1e-6)
    assert dense_w(frac, 2) == pytest.approx(dense_w(dup, 2), abs=1e-6)


def test_zero_weight_side_only_contributes_other_term():
    X = sp.csr_matrix(np.array([[1.0], [2.0]]))
    w = np.array([0.3])
    f = objective(w, X, [0, 1], [1.0, 0.0], [0.0, 1.0], 10)
    want = 0.09 + 10 * (math.log1p(math.exp(-0.3)) + math.log1p(math.exp(0.6)))
    assert f == pytest.approx(want, rel=1e-12)


def test_pruning_threshold():
    rng = np.random.default_rng(2)
    X = sp.csr_matrix(rng.standard_normal((30, 8)))
    z = rng.uniform(size=30)
    r = solve(X, np.arange(30), z, 1 - z, prune=0.05)
    assert np.all(np.abs(r.weights.values) >= 0.05)
    full = solve(X, np.arange(30), z, 1 - z, prune=0)
    kept = set(r.weights.indices.tolist())
    assert kept == {i for i, v in zip(full.weights.indices, full.weights.values) if abs(v) >= 0.05}


def test_empty_examples_give_flagged_zero_regressor(caplog):
    r = solve(sp.csr_matrix((3, 4)), [], [], [])
    assert r.empty and r.weights.nnz == 0
    assert "without weighted examples" in caplog.text


def test_invalid_arguments():
    X = sp.csr_matrix(np.ones((1, 1)))
    with pytest.raises(ValueError):
        solve(X, [0], [1.0], [0.0], C=0)
    with pytest.raises(ValueError):
        solve(X, [0], [-1.0], [0.0])


def test_predict_prob_examples():
    zero = LinearRegressor.zero(3)
    assert predict_prob(zero, SparseVector.from_pairs({0: 5.0}, 3)) == 0.5
    r = LinearRegressor(SparseVector.from_pairs({0: math.log(3)}, 3))
    assert predict_prob(r, SparseVector.from_pairs({0: 1.0}, 3)) == pytest.approx(0.75, rel=1e-14)
    r = LinearRegressor(SparseVector.from_pairs({0: -40.0}, 3))
    p = predict_prob(r, SparseVector.from_pairs({0: 1.0}, 3))
    assert 0.0 < p < 1e-10
    assert 0.0 < sigmoid(-1e6) and sigmoid(1e6) < 1.0
