"""Pointwise inference: beam search down every tree, averaged over the ensemble."""
from __future__ import annotations

import heapq
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.sparse as sp

from . import kernels
from .io import POINTWISE, PredictionFile, warn_dim
from .solver import log_sigmoid
from .sparse import SparseVector, csr_arrays, topk_order

DEFAULT_BEAM = 10
DEFAULT_TOPK = 5
EXACT_LIMIT = 10**6


class _TreeView:
    """Flat arrays of one tree for fast row scoring."""

    def __init__(self, tree):
        topo = tree.topology
        self.n_nodes = topo.n_nodes
        self.children = topo.children
        self.child_list = topo.children.tolist()
        self.label_ptr = topo.label_ptr
        self.labels = topo.labels
        self.parent = topo.parent
        self.indptr, self.indices, self.data = csr_arrays(tree.weights)

    def logits(self, rows, xd):
        return kernels.rows_dot_dense(self.indptr, self.indices, self.data,
                                      np.asarray(rows, dtype=np.int64), xd)


def _views(model):
    views = model.__dict__.get("_views")
    if views is None or len(views) != len(model.trees):
        views = [_TreeView(t) for t in model.trees]
        model.__dict__["_views"] = views
    return views


def _dense_x(model, x) -> np.ndarray:
    """Dense copy of ``x`` in the biased model space."""
    D = model.n_features
    xd = np.zeros(D + 1)
    idx, val = x.indices, x.values
    keep = idx < D
    xd[idx[keep]] = val[keep]
    xd[D] = 1.0
    return xd


def beam_tree(view: _TreeView, xd, beam: int):
    """Label ids and log-probabilities reached by a width-``beam`` search."""
    frontier = [(0.0, 0)]  # (log-prob, node)
    while True:
        expand = [n for _, n in frontier if view.child_list[n][0] >= 0]
        if not expand:
            break
        kids = [c for n in expand for c in view.child_list[n]]
        ls = log_sigmoid(view.logits(kids, xd))
        base = {n: lp for lp, n in frontier}
        cand = [(lp, n) for lp, n in frontier if view.child_list[n][0] < 0]
        for c, l in zip(kids, ls.tolist()):
            cand.append((base[int(view.parent[c])] + l, c))
        # highest log-prob first; equal values go to the lower node id
        frontier = heapq.nsmallest(beam, cand, key=lambda e: (-e[0], e[1]))
    leaves = sorted(n for _, n in frontier)
    lp_of = {n: lp for lp, n in frontier}
    rows, base = [], []
    for n in leaves:
        lo, hi = int(view.label_ptr[n]), int(view.label_ptr[n + 1])
        rows.extend(range(view.n_nodes + lo, view.n_nodes + hi))
        base.extend([lp_of[n]] * (hi - lo))
    if not rows:
        return np.empty(0, np.int64), np.empty(0)
    ls = log_sigmoid(view.logits(rows, xd))
    labels = view.labels[np.asarray(rows) - view.n_nodes]
    return labels, np.asarray(base) + ls


def _ensemble_topk(per_tree, n_trees, k):
    labs = np.concatenate([p[0] for p in per_tree]) if per_tree else np.empty(0, np.int64)
    if labs.size == 0:
        return np.empty(0, np.int64), np.empty(0)
    probs = np.concatenate([np.exp(p[1]) for p in per_tree])
    uniq, inv = np.unique(labs, return_inverse=True)
    # sequential per-tree accumulation keeps the sum order fixed
    total = np.zeros(uniq.size)
    np.add.at(total, inv, probs)
    total /= n_trees
    order = topk_order(total, uniq, k)
    return uniq[order], total[order]


def _check(beam, k):
    if beam < 1:
        raise ValueError("beam width P must be >= 1")
    if k < 1:
        raise ValueError("k must be >= 1")


def predict_point(model, x: SparseVector, beam: int = DEFAULT_BEAM, k: int = DEFAULT_TOPK):
    """Top-``k`` ``(label, relevance)`` pairs for one raw feature vector."""
    _check(beam, k)
    xd = _dense_x(model, x)
    views = _views(model)
    per_tree = [beam_tree(v, xd, beam) for v in views]
    labs, scores = _ensemble_topk(per_tree, len(views), k)
    return list(zip(labs.tolist(), (scores * model.y_max).tolist()))


def _row(X, i, dim):
    lo, hi = X.indptr[i], X.indptr[i + 1]
    return SparseVector(X.indices[lo:hi], X.data[lo:hi], dim)


def predict_pointwise(model, X, beam: int = DEFAULT_BEAM, k: int = DEFAULT_TOPK,
                      threads: int = 1) -> PredictionFile:
    """Beam-search predictions for every row of raw feature matrix ``X``."""
    _check(beam, k)
    X = sp.csr_matrix(X, dtype=np.float64)
    X.sort_indices()
    X.eliminate_zeros()
    warn_dim(X.shape[1], model.n_features)
    _views(model)

    def one(i):
        return predict_point(model, _row(X, i, X.shape[1]), beam, k)

    if threads > 1 and X.shape[0] > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, range(X.shape[0])))
    else:
        rows = [one(i) for i in range(X.shape[0])]
    return PredictionFile(rows, model.n_labels, POINTWISE)


def tree_log_probs(view: _TreeView, xd) -> tuple[np.ndarray, np.ndarray]:
    """Exact log-probability of every node and every label slot of one tree."""
    rows = np.arange(view.n_nodes + view.labels.size, dtype=np.int64)
    ls = log_sigmoid(view.logits(rows, xd))
    node_lp = np.zeros(view.n_nodes)
    for n in range(1, view.n_nodes):  # breadth-first ids: parents come first
        node_lp[n] = node_lp[view.parent[n]] + ls[n]
    leaf_of_slot = np.repeat(np.arange(view.n_nodes), np.diff(view.label_ptr))
    return node_lp, node_lp[leaf_of_slot] + ls[view.n_nodes:]


def predict_all_exact(model, x: SparseVector, force: bool = False, rescale: bool = True):
    """Dense ensemble relevance of every label via every root-to-label path."""
    if model.n_labels > EXACT_LIMIT and not force:
        raise ValueError(f"exact scoring of L={model.n_labels} labels refused; pass force=True")
    xd = _dense_x(model, x)
    out = np.zeros(model.n_labels)
    for v in _views(model):
        _, lab_lp = tree_log_probs(v, xd)
        out[v.labels] += np.exp(lab_lp)
    out /= len(model.trees)
    return out * model.y_max if rescale else out


def exact_topk(model, x, k):
    scores = predict_all_exact(model, x)
    order = topk_order(scores, np.arange(scores.size), k)
    return list(zip(order.tolist(), scores[order].tolist()))
