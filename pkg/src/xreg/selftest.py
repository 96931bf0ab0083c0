"""Randomised property suites behind ``xreg selftest``."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import metrics
from .labelwise import exact_labelwise, predict_labelwise
from .pointwise import exact_topk, predict_point
from .sparse import SparseVector, normalize_rows
from .synthetic import random_model
from .trainer import kl_path_bound
from .tree import LabelFeatureMatrix, grow_tree

FAULTS = ("xmad-off-by-one",)


@dataclass
class SuiteResult:
    name: str
    trials: int
    violations: int
    seconds: float

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name} trials={self.trials} violations={self.violations} "
                f"time={self.seconds:.2f}s")


def _broken_xmad(y, yhat, k, dim=None):
    # sums one error too few
    y, yh, L = metrics._pair(y, yhat, dim)
    e = np.sort(metrics._errors(y, yh))[::-1][:k - 1]
    return float(np.sum(e[::-1])) / min(k, L)


def random_pair(rng, L=None, sparsity=0.5):
    """Dense ``(y, yhat)`` in ``[0, 1]`` with random zero patterns."""
    L = int(rng.integers(2, 51)) if L is None else L
    y = rng.uniform(0, 1, L) * (rng.uniform(size=L) < sparsity)
    yh = rng.uniform(0, 1, L) * (rng.uniform(size=L) < sparsity)
    return y, yh


def lemma_suite(trials=10_000, seed=0, tol=1e-12, fault=None) -> list[SuiteResult]:
    """Regret and chain bounds on random dense pairs."""
    xmad = _broken_xmad if fault == "xmad-off-by-one" else metrics.xmad_at_k
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    bad_lemma = bad_chain = 0
    for _ in range(trials):
        y, yh = random_pair(rng)
        k = int(rng.integers(1, 6))
        reg = metrics.wp_regret_at_k(y, yh, k)
        x2 = xmad(y, yh, 2 * k)
        if reg < -tol or reg > 2 * x2 + tol:
            bad_lemma += 1
        m = max(reg, metrics.regression_error_at_k(y, yh, k))
        if m / 2 > x2 + tol or x2 > metrics.xrmse_at_k(y, yh, 2 * k) + tol:
            bad_chain += 1
    dt = time.perf_counter() - t0
    return [SuiteResult("lemma1-regret-bound", trials, bad_lemma, dt),
            SuiteResult("xmad-xrmse-chain", trials, bad_chain, dt)]


def random_kl_paths(rng, max_depth=6):
    """Label paths of a random tree with conditionals built from subtree maxima.

    Yields ``(z, zhat)`` per label where ``prod(z)`` equals the label's relevance.
    """
    depth = int(rng.integers(1, max_depth + 1))
    n_leaves = 2 ** depth
    per_leaf = int(rng.integers(1, 4))
    y = rng.uniform(0, 1, (n_leaves, per_leaf)) * (rng.uniform(size=(n_leaves, per_leaf)) < 0.6)
    # marginal mass of every node, level by level from the leaves
    levels = [y.max(axis=1)]
    while levels[-1].size > 1:
        levels.append(levels[-1].reshape(-1, 2).max(axis=1))
    levels = levels[::-1]  # levels[h][j]: node j at depth h
    for leaf in range(n_leaves):
        for j in range(per_leaf):
            z = []
            for h in range(1, depth + 1):
                par, cur = levels[h - 1][leaf >> (depth - h + 1)], levels[h][leaf >> (depth - h)]
                z.append(cur / par if par > 0 else 0.0)
            q = levels[depth][leaf]
            z.append(y[leaf, j] / q if q > 0 else 0.0)
            z.insert(0, levels[0][0])
            zhat = rng.uniform(1e-6, 1 - 1e-6, len(z))
            yield np.clip(z, 0.0, 1.0), zhat, y[leaf, j]


def kl_suite(trials=1000, seed=0, tol=1e-9) -> SuiteResult:
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(trials):
        for z, zhat, _ in random_kl_paths(rng):
            lhs, rhs = kl_path_bound(z, zhat)
            if lhs > rhs + tol:
                bad += 1
    return SuiteResult("kl-decomposition-bound", trials, bad, time.perf_counter() - t0)


def _random_points(rng, n, d):
    X = sp.random(n, d, density=0.5, random_state=rng, format="csr")
    X.data = rng.standard_normal(X.data.size)
    X, _ = normalize_rows(X)
    X.eliminate_zeros()
    X.sort_indices()
    return X


def oracle_suite(trials=200, seed=0, points=5, k=5, per_label=5) -> list[SuiteResult]:
    """Beam with ``P >= #leaves`` and saturated labelwise routing against exact scoring."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    bad_beam = bad_lw = 0
    for _ in range(trials):
        L = int(rng.integers(2, 65))
        D = int(rng.integers(2, 12))
        model = random_model(rng, L, D, int(rng.integers(1, 9)), int(rng.integers(1, 4)))
        X = _random_points(rng, points, D)
        n_leaves = max(t.topology.leaves().size for t in model.trees)
        for i in range(points):
            lo, hi = X.indptr[i], X.indptr[i + 1]
            x = SparseVector(X.indices[lo:hi], X.data[lo:hi], D)
            got = {l for l, _ in predict_point(model, x, n_leaves, k)}
            want = {l for l, _ in exact_topk(model, x, k)}
            bad_beam += got != want
        lw = predict_labelwise(model, X, factor=1e9, per_label=per_label)
        ex = exact_labelwise(model, X, per_label)
        bad_lw += sum({p for p, _ in a} != {p for p, _ in b} for a, b in zip(lw.rows, ex.rows))
    dt = time.perf_counter() - t0
    return [SuiteResult("beam-vs-exact", trials, bad_beam, dt),
            SuiteResult("labelwise-vs-exact", trials, bad_lw, dt)]


def tree_suite(trials=50, seed=0) -> SuiteResult:
    """Leaf-size, coverage and sibling-balance invariants of grown trees."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(trials):
        L = int(rng.integers(1, 200))
        M = int(rng.integers(1, 20))
        V = sp.random(L, 30, density=0.2, random_state=rng, format="csr")
        V, zero = normalize_rows(V)
        topo = grow_tree(LabelFeatureMatrix(V, np.flatnonzero(zero)), M, int(rng.integers(2**31)))
        sizes = np.array([topo.subtree_labels(n).size for n in range(topo.n_nodes)])
        ok = np.array_equal(np.sort(topo.labels), np.arange(L))
        ok &= all(topo.leaf_labels(n).size <= M for n in topo.leaves())
        for n in range(topo.n_nodes):
            if not topo.is_leaf(n):
                c0, c1 = topo.children[n]
                ok &= abs(sizes[c0] - sizes[c1]) <= 1
        bad += not ok
    return SuiteResult("balanced-tree-invariants", trials, bad, time.perf_counter() - t0)


def run_all(iterations=10_000, seed=0, fault=None) -> list[SuiteResult]:
    scale = iterations / 10_000
    out = lemma_suite(iterations, seed, fault=fault)
    out.append(kl_suite(max(1, int(1000 * scale)), seed))
    out.extend(oracle_suite(max(1, int(200 * scale)), seed))
    out.append(tree_suite(max(1, int(50 * scale)), seed))
    return out
