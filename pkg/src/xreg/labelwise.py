"""Labelwise inference: route a test corpus down each tree and rank points per label.

Every node ``n`` admits at most ``ceil(F * frac(n) * M)`` of the ``M`` test
points (at least one when ``frac(n) > 0``, none when it is 0). The root keeps
all points. At a leaf every admitted point is scored for each resident label;
scores are averaged over trees (absent = 0) and the best ``N`` points per label
are kept.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.sparse as sp

from .io import LABELWISE, PredictionFile
from .solver import log_sigmoid
from .sparse import topk_order

DEFAULT_FACTOR = 4.0
DEFAULT_PER_LABEL = 10


def retain_top(scored, cap: int) -> list:
    """The ``cap`` highest ``(point, score)`` pairs, descending, ties to lower point."""
    if cap <= 0 or not scored:
        return []
    pts = np.fromiter((p for p, _ in scored), dtype=np.int64, count=len(scored))
    val = np.fromiter((s for _, s in scored), dtype=np.float64, count=len(scored))
    order = topk_order(val, pts, cap)
    return list(zip(pts[order].tolist(), val[order].tolist()))


def capacity(frac: float, factor: float, n_test: int) -> int:
    if frac <= 0:
        return 0
    return max(1, math.ceil(factor * frac * n_test))


def _retain(points, logp, cap):
    if points.size <= cap:
        return points, logp
    order = topk_order(logp, points, cap)
    order = np.sort(order)
    return points[order], logp[order]


def _tree_scores(tree, Xb, factor, trace=None):
    """Per-label ``(points, probabilities)`` from one tree."""
    topo = tree.topology
    W = tree.weights
    M = Xb.shape[0]
    retained = {0: (np.arange(M, dtype=np.int64), np.zeros(M))}
    out = {}
    for n in range(topo.n_nodes):  # breadth-first ids: parents come first
        if n not in retained:
            continue
        pts, lp = retained.pop(n)
        if trace is not None:
            trace[n] = pts
        if topo.is_leaf(n):
            lo, hi = int(topo.label_ptr[n]), int(topo.label_ptr[n + 1])
            if pts.size == 0 or hi == lo:
                continue
            Wl = W[topo.n_nodes + lo: topo.n_nodes + hi].toarray().T
            ls = log_sigmoid(Xb[pts] @ Wl)
            probs = np.exp(lp[:, None] + ls)
            for j, l in enumerate(topo.labels[lo:hi].tolist()):
                out[l] = (pts, probs[:, j])
            continue
        kids = topo.children[n].tolist()
        if pts.size == 0:
            for c in kids:
                retained[c] = (pts, lp)
            continue
        Wc = W[kids].toarray().T
        ls = log_sigmoid(Xb[pts] @ Wc)
        for j, c in enumerate(kids):
            cap = capacity(float(tree.frac[c]), factor, M)
            retained[c] = _retain(pts, lp + ls[:, j], cap)
    return out


def predict_labelwise(model, X, factor: float = DEFAULT_FACTOR, per_label: int = DEFAULT_PER_LABEL,
                      threads: int = 1) -> PredictionFile:
    """Top-``per_label`` test points for every label; rows are labels."""
    if not factor > 0:
        raise ValueError("factor F must be > 0")
    if per_label < 1:
        raise ValueError("per-label count N must be >= 1")
    for t in model.trees:
        if t.frac is None or len(t.frac) != t.topology.n_nodes:
            raise ValueError("model lacks visit fractions; labelwise inference impossible")
    Xb = model.prepare(X)
    M = Xb.shape[0]

    def run(t):
        return _tree_scores(t, Xb, factor)

    if threads > 1 and len(model.trees) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_tree = list(pool.map(run, model.trees))
    else:
        per_tree = [run(t) for t in model.trees]

    T = len(model.trees)
    rows = []
    for l in range(model.n_labels):
        parts = [pt[l] for pt in per_tree if l in pt]
        if not parts:
            rows.append([])
            continue
        total = np.zeros(M)
        seen = np.zeros(M, dtype=bool)
        for pts, pr in parts:
            total[pts] += pr
            seen[pts] = True
        cand = np.flatnonzero(seen)
        avg = total[cand] / T
        order = topk_order(avg, cand, per_label)
        rows.append(list(zip(cand[order].tolist(), (avg[order] * model.y_max).tolist())))
    return PredictionFile(rows, M, LABELWISE)


def exact_labelwise(model, X, per_label: int) -> PredictionFile:
    """Top-``per_label`` points per label from the exhaustive score matrix."""
    from .pointwise import predict_all_exact
    from .sparse import SparseVector

    X = sp.csr_matrix(X, dtype=np.float64)
    X.sort_indices()
    S = np.vstack([
        predict_all_exact(model, SparseVector(X.indices[X.indptr[i]:X.indptr[i + 1]],
                                              X.data[X.indptr[i]:X.indptr[i + 1]], X.shape[1]))
        for i in range(X.shape[0])]) if X.shape[0] else np.zeros((0, model.n_labels))
    rows = []
    pts = np.arange(X.shape[0])
    for l in range(model.n_labels):
        col = S[:, l]
        nz = np.flatnonzero(col > 0)
        order = topk_order(col[nz], pts[nz], per_label)
        rows.append(list(zip(nz[order].tolist(), col[nz][order].tolist())))
    return PredictionFile(rows, X.shape[0], LABELWISE)
