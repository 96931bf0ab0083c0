"""Model training, the model container and its binary file format."""
from __future__ import annotations

import io
import json
import logging
import math
import os
import struct
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import solver
from .io import RelevanceDataset, add_bias
from .tree import RNG_NAME, TreeTopology, build_label_features, grow_tree, node_seed

log = logging.getLogger(__name__)

MAGIC = b"XREGMODL"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Unreadable, truncated or corrupted model file."""


class TrainingError(ValueError):
    pass


@dataclass
class Hyperparams:
    trees: int = 3
    max_leaf: int = 100
    C: float = solver.DEFAULT_C
    tol: float = solver.DEFAULT_TOL
    max_iter: int = solver.DEFAULT_MAX_ITER
    prune: float = solver.DEFAULT_PRUNE
    loss_scale: str = solver.DEFAULT_LOSS_SCALE
    seed: int = 0
    threads: int | None = None
    tail: bool = True

    def validate(self):
        if self.trees < 1:
            raise ValueError("trees must be >= 1")
        if self.max_leaf < 1:
            raise ValueError("max_leaf must be >= 1")
        if not self.C > 0:
            raise ValueError("C must be > 0")
        if not self.tol > 0 or self.max_iter < 1:
            raise ValueError("tol must be > 0 and max_iter >= 1")
        if self.prune < 0:
            raise ValueError("prune must be >= 0")
        if self.loss_scale not in solver.LOSS_SCALES:
            raise ValueError(f"loss_scale must be one of {solver.LOSS_SCALES}")
        if self.threads is not None and self.threads < 1:
            raise ValueError("threads must be >= 1")
        return self


@dataclass
class TreeModel:
    """One trained tree.

    Row ``n`` of ``weights`` is the regressor on the edge into node ``n`` (the
    root row is empty); row ``n_nodes + p`` scores label ``topology.labels[p]``.
    """

    topology: TreeTopology
    weights: sp.csr_matrix
    frac: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.topology.n_nodes

    def label_row(self, p):
        return self.n_nodes + p


@dataclass
class XRegModel:
    n_features: int
    n_labels: int
    y_max: float
    hyper: Hyperparams
    trees: list
    tail_centroids: sp.csr_matrix | None = None
    tail_counts: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def model_dim(self) -> int:
        return self.n_features + 1

    def prepare(self, X):
        """Map raw test features into the model's biased feature space."""
        return add_bias(X, self.n_features)


# -- relevance bookkeeping ---------------------------------------------------

def normalize_relevances(ds: RelevanceDataset):
    """Divide every relevance by the global maximum; returns ``(ds, y_max)``."""
    Y = sp.csr_matrix(ds.Y, dtype=np.float64, copy=True)
    Y.eliminate_zeros()
    if Y.nnz == 0:
        raise TrainingError("all relevances are zero; nothing to learn")
    y_max = float(Y.data.max())
    Y.data /= y_max
    return RelevanceDataset(ds.X, Y), y_max


@dataclass
class NodeTrainingSet:
    """Member points of one node with their ``s`` (importance) and ``z`` (target)."""

    node: int
    points: np.ndarray
    s: np.ndarray
    z: np.ndarray


def _max_union(parts, n_points):
    """Per-point max over (points, values) pairs; returns sorted sparse arrays."""
    parts = [p for p in parts if p[0].size]
    if not parts:
        return np.empty(0, np.int64), np.empty(0, np.float64)
    idx = np.concatenate([p[0] for p in parts])
    val = np.concatenate([p[1] for p in parts])
    order = np.lexsort((val, idx))
    idx, val = idx[order], val[order]
    last = np.ones(idx.size, dtype=bool)
    last[:-1] = idx[1:] != idx[:-1]
    return idx[last], val[last]


def subtree_max(Yc: sp.csc_matrix, topo: TreeTopology):
    """``z`` for every node: per-point max normalised relevance in the subtree."""
    out = [None] * topo.n_nodes
    for n in range(topo.n_nodes - 1, -1, -1):
        if topo.is_leaf(n):
            parts = []
            for l in topo.leaf_labels(n).tolist():
                lo, hi = Yc.indptr[l], Yc.indptr[l + 1]
                parts.append((Yc.indices[lo:hi].astype(np.int64), Yc.data[lo:hi]))
            out[n] = _max_union(parts, Yc.shape[0])
        else:
            c0, c1 = topo.children[n]
            out[n] = _max_union([out[c0], out[c1]], Yc.shape[0])
    return out


def _dense(pair, n):
    v = np.zeros(n)
    v[pair[0]] = pair[1]
    return v


def compute_node_weights(Y: sp.csr_matrix, topo: TreeTopology) -> list:
    """``NodeTrainingSet`` for every node, in node-id order.

    ``s`` is 1 at the root and ``s_child = s_parent * z_parent``; a node's
    members are the points with ``s > 0``.
    """
    return _node_sets(Y, topo)[0]


def _node_sets(Y, topo):
    N = Y.shape[0]
    Yc = sp.csc_matrix(Y)
    Yc.sort_indices()
    zs = subtree_max(Yc, topo)
    sets = []
    s_dense = [None] * topo.n_nodes
    s_dense[0] = np.ones(N)
    for n in range(topo.n_nodes):
        if n > 0:
            p = topo.parent[n]
            s_dense[n] = s_dense[p] * _dense(zs[p], N)
        s = s_dense[n]
        pts = np.flatnonzero(s > 0)
        z = _dense(zs[n], N)[pts]
        sets.append(NodeTrainingSet(n, pts, s[pts], z))
    return sets, zs


# -- training ------------------------------------------------------------------

def _solve_job(Xb, rows, a, b, hp, seed):
    return solver.solve(Xb, rows, a, b, C=hp.C, tol=hp.tol, max_iter=hp.max_iter,
                        seed=seed, prune=hp.prune, loss_scale=hp.loss_scale)


def _stack(regs, dim):
    ptr = [0]
    idx, val = [], []
    for r in regs:
        if r is None:
            ptr.append(ptr[-1])
            continue
        idx.append(r.weights.indices)
        val.append(r.weights.values)
        ptr.append(ptr[-1] + r.weights.nnz)
    idx = np.concatenate(idx) if idx else np.empty(0, np.int64)
    val = np.concatenate(val) if val else np.empty(0, np.float64)
    return sp.csr_matrix((val, idx, np.asarray(ptr, dtype=np.int64)), shape=(len(regs), dim))


def train_tree(Xb, Yn, features, hp: Hyperparams, tree_index: int, pool=None) -> TreeModel:
    N = Xb.shape[0]
    t0 = time.perf_counter()
    topo = grow_tree(features, hp.max_leaf, hp.seed, tree_index)
    t_tree = time.perf_counter() - t0
    sets, zs = _node_sets(Yn, topo)
    Yc = sp.csc_matrix(Yn)
    Yc.sort_indices()

    jobs = []  # (slot, rows, a, b, seed)
    for n in range(1, topo.n_nodes):
        st = sets[n]
        jobs.append((n, st.points, st.s * st.z, st.s * (1.0 - st.z),
                     node_seed(hp.seed, tree_index, n, 0)))
    for leaf in topo.leaves().tolist():
        st = sets[leaf]
        for p in range(topo.label_ptr[leaf], topo.label_ptr[leaf + 1]):
            l = int(topo.labels[p])
            lo, hi = Yc.indptr[l], Yc.indptr[l + 1]
            y = np.zeros(N)
            y[Yc.indices[lo:hi]] = Yc.data[lo:hi]
            yt = y[st.points]
            jobs.append((topo.n_nodes + p, st.points, st.s * yt, st.s * (1.0 - yt),
                         node_seed(hp.seed, tree_index, leaf, 1 + l)))

    t1 = time.perf_counter()
    regs = [None] * (topo.n_nodes + topo.labels.size)
    run = (lambda j: _solve_job(Xb, j[1], j[2], j[3], hp, j[4]))
    results = pool.map(run, jobs) if pool is not None else map(run, jobs)
    iters = []
    for job, r in zip(jobs, results):
        regs[job[0]] = r
        iters.append(r.n_iter)
    t_solve = time.perf_counter() - t1
    frac = np.array([z[0].size / N if N else 0.0 for z in zs])
    W = _stack(regs, Xb.shape[1])
    log.info("tree=%d nodes=%d leaves=%d depth=%d build_s=%.3f solve_s=%.3f "
             "solves=%d mean_epochs=%.1f nnz=%d", tree_index, topo.n_nodes,
             topo.leaves().size, topo.max_depth, t_tree, t_solve, len(jobs),
             float(np.mean(iters)) if iters else 0.0, W.nnz)
    return TreeModel(topo, W, frac)


def train(ds: RelevanceDataset, hp: Hyperparams | None = None) -> XRegModel:
    """Train an ensemble of ``hp.trees`` label trees."""
    hp = (hp or Hyperparams()).validate()
    norm, y_max = normalize_relevances(ds)
    X = sp.csr_matrix(ds.X, dtype=np.float64)
    X.sort_indices()
    Yn = sp.csr_matrix(norm.Y)
    Yn.sort_indices()
    Xb = add_bias(X, X.shape[1])
    features = build_label_features(X, Yn)
    threads = hp.threads or os.cpu_count() or 1
    t0 = time.perf_counter()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = [train_tree(Xb, Yn, features, hp, t, pool) for t in range(hp.trees)]
    else:
        trees = [train_tree(Xb, Yn, features, hp, t) for t in range(hp.trees)]
    log.info("trained trees=%d time_s=%.3f", hp.trees, time.perf_counter() - t0)
    model = XRegModel(X.shape[1], ds.n_labels, y_max, hp, trees)
    if hp.tail:
        counts = np.diff(sp.csc_matrix(Yn).indptr).astype(np.int64)
        model.tail_centroids = features.vectors
        model.tail_counts = counts
    return model


# -- KL path decomposition ----------------------------------------------------

def kl_bernoulli(p, q) -> float:
    """KL divergence between Bernoulli(p) and Bernoulli(q), with 0 log 0 = 0."""
    out = 0.0
    if p > 0:
        out += p * math.log(p / q)
    if p < 1:
        out += (1 - p) * math.log((1 - p) / (1 - q))
    return out


def kl_path_bound(z, zhat):
    """Return ``(KL(y||yhat), sum_h s_h KL(z_h||zhat_h))`` along one path.

    ``y = prod z``, ``yhat = prod zhat`` and ``s_h = prod_{h' < h} z_h'``.
    """
    y = float(np.prod(z))
    yhat = float(np.prod(zhat))
    rhs, s = 0.0, 1.0
    for zh, qh in zip(z, zhat):
        rhs += s * kl_bernoulli(float(zh), float(qh))
        s *= float(zh)
    return kl_bernoulli(y, yhat), rhs


# -- serialization -------------------------------------------------------------

def _npy_bytes(arr) -> bytes:
    buf = io.BytesIO()
    np.save(buf, np.ascontiguousarray(arr), allow_pickle=False)
    return buf.getvalue()


def _block(arr) -> bytes:
    raw = _npy_bytes(arr)
    return struct.pack("<Q", len(raw)) + raw


def _csr_blocks(m: sp.csr_matrix) -> bytes:
    m = sp.csr_matrix(m)
    return b"".join(_block(a) for a in (np.asarray(m.shape, dtype=np.int64),
                                        m.indptr.astype(np.int64),
                                        m.indices.astype(np.int64),
                                        m.data.astype(np.float64)))


def save_model(m: XRegModel, path) -> None:
    header = {
        "D": m.n_features, "L": m.n_labels, "y_max": m.y_max,
        "T": m.hyper.trees, "M": m.hyper.max_leaf, "C": m.hyper.C,
        "tol": m.hyper.tol, "max_iter": m.hyper.max_iter, "prune": m.hyper.prune,
        "loss_scale": m.hyper.loss_scale, "seed": m.hyper.seed, "rng": RNG_NAME,
        "bias_feature": m.n_features, "has_tail": m.tail_centroids is not None,
        "n_trees": len(m.trees),
    }
    head = json.dumps(header, sort_keys=True).encode()
    body = [MAGIC, struct.pack("<I", FORMAT_VERSION), struct.pack("<Q", len(head)), head]
    for t in m.trees:
        topo = t.topology
        for arr in (topo.children, topo.parent, topo.depth, topo.label_ptr, topo.labels, t.frac):
            body.append(_block(arr))
        body.append(_csr_blocks(t.weights))
    if m.tail_centroids is not None:
        body.append(_csr_blocks(m.tail_centroids))
        body.append(_block(m.tail_counts))
    payload = b"".join(body)
    with open(path, "wb") as fh:
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise ModelFormatError("model file is truncated")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def array(self):
        (n,) = struct.unpack("<Q", self.take(8))
        try:
            return np.load(io.BytesIO(self.take(n)), allow_pickle=False)
        except ValueError as exc:
            raise ModelFormatError(f"bad array block: {exc}") from None

    def csr(self):
        shape, indptr, indices, data = (self.array() for _ in range(4))
        return sp.csr_matrix((data, indices, indptr), shape=tuple(int(s) for s in shape))


def load_model(path) -> XRegModel:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(MAGIC) + 16 or raw[:len(MAGIC)] != MAGIC:
        raise ModelFormatError(f"{path}: not a model file")
    payload, trailer = raw[:-4], raw[-4:]
    if struct.unpack("<I", trailer)[0] != (zlib.crc32(payload) & 0xFFFFFFFF):
        raise ModelFormatError(f"{path}: checksum mismatch (corrupted or truncated file)")
    r = _Reader(payload)
    r.take(len(MAGIC))
    (version,) = struct.unpack("<I", r.take(4))
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    (hl,) = struct.unpack("<Q", r.take(8))
    header = json.loads(r.take(hl))
    hp = Hyperparams(trees=header["T"], max_leaf=header["M"], C=header["C"], tol=header["tol"],
                     max_iter=header["max_iter"], prune=header["prune"],
                     loss_scale=header["loss_scale"], seed=header["seed"],
                     tail=header["has_tail"])
    trees = []
    for _ in range(header["n_trees"]):
        children, parent, depth, label_ptr, labels, frac = (r.array() for _ in range(6))
        W = r.csr()
        trees.append(TreeModel(TreeTopology(children, parent, depth, label_ptr, labels), W, frac))
    model = XRegModel(header["D"], header["L"], header["y_max"], hp, trees, meta=header)
    if header["has_tail"]:
        model.tail_centroids = r.csr()
        model.tail_counts = r.array()
    if r.pos != len(payload):
        raise ModelFormatError(f"{path}: trailing data after model")
    return model
