"""Balanced binary label trees built by recursive spherical 2-means."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .sparse import normalize_rows

RNG_NAME = "numpy.PCG64/SeedSequence"
MAX_ITER = 20
MIN_GAIN = 1e-4


def node_rng(seed: int, *path: int) -> np.random.Generator:
    """Generator derived from ``(seed, *path)``; independent of visit order."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, path)])))


def node_seed(seed: int, *path: int) -> int:
    """A 64-bit integer seed derived like :func:`node_rng`."""
    ss = np.random.SeedSequence([int(seed), *map(int, path)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class LabelFeatureMatrix:
    """Row ``l`` holds the unit vector ``v_l``; orphan rows are empty."""

    vectors: sp.csr_matrix
    orphans: np.ndarray

    @property
    def n_labels(self) -> int:
        return self.vectors.shape[0]


def build_label_features(X: sp.csr_matrix, Y: sp.csr_matrix) -> LabelFeatureMatrix:
    """``v_l = unit(sum_i y_il x_i)``; labels with zero mass become orphans."""
    V = sp.csr_matrix(Y.T.tocsr() @ sp.csr_matrix(X, dtype=np.float64))
    V.eliminate_zeros()
    V, zero = normalize_rows(V)
    V.sort_indices()
    return LabelFeatureMatrix(V, np.flatnonzero(zero).astype(np.int64))


def _balanced_assign(sims_left, sims_right):
    n = sims_left.shape[0]
    delta = sims_left - sims_right
    order = np.lexsort((np.arange(n), -delta))
    left = np.zeros(n, dtype=bool)
    left[order[: (n + 1) // 2]] = True
    return left


def _centroid(V, members, rng):
    c = np.asarray(V[members].sum(axis=0)).ravel()
    norm = np.linalg.norm(c)
    if norm == 0.0:
        # members cancelled out; reseed from one of them
        pick = members[rng.integers(members.size)]
        c = V[pick].toarray().ravel()
        norm = np.linalg.norm(c)
        if norm == 0.0:
            return c
    return c / norm


def balanced_2means(vectors, rng) -> tuple[np.ndarray, np.ndarray]:
    """Split unit row vectors into two halves of sizes ``ceil(n/2)``, ``floor(n/2)``.

    ``vectors`` is a CSR matrix (or list of :class:`SparseVector`); ``rng`` a
    ``numpy.random.Generator`` or an integer seed. Returns sorted position
    arrays ``(left, right)``.
    """
    if isinstance(vectors, list):
        if not vectors:
            raise ValueError("balanced_2means needs at least 2 vectors")
        dim = vectors[0].dim
        vectors = sp.csr_matrix(
            (np.concatenate([v.values for v in vectors]),
             np.concatenate([v.indices for v in vectors]),
             np.concatenate([[0], np.cumsum([v.nnz for v in vectors])])),
            shape=(len(vectors), dim))
    V = sp.csr_matrix(vectors)
    n = V.shape[0]
    if n < 2:
        raise ValueError("balanced_2means needs at least 2 vectors")
    if not isinstance(rng, np.random.Generator):
        rng = node_rng(rng)

    i, j = rng.choice(n, size=2, replace=False)
    # identical seeds give no direction to split along; retry a few times
    for _ in range(8):
        if (V[i] != V[j]).nnz:
            break
        i, j = rng.choice(n, size=2, replace=False)
    c_left = V[i].toarray().ravel()
    c_right = V[j].toarray().ravel()

    prev = -np.inf
    left = None
    for _ in range(MAX_ITER):
        s_left = V @ c_left
        s_right = V @ c_right
        new_left = _balanced_assign(s_left, s_right)
        obj = float(s_left[new_left].sum() + s_right[~new_left].sum())
        left = new_left
        if obj - prev < MIN_GAIN:
            break
        prev = obj
        c_left = _centroid(V, np.flatnonzero(left), rng)
        c_right = _centroid(V, np.flatnonzero(~left), rng)
    return np.flatnonzero(left), np.flatnonzero(~left)


@dataclass
class TreeTopology:
    """Nodes numbered breadth first; node 0 is the root.

    ``children[n]`` is ``(-1, -1)`` for a leaf. Leaf ``n`` holds labels
    ``labels[label_ptr[n]:label_ptr[n+1]]``; internal nodes hold none.
    """

    children: np.ndarray
    parent: np.ndarray
    depth: np.ndarray
    label_ptr: np.ndarray
    labels: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.children.shape[0]

    def is_leaf(self, n) -> bool:
        return self.children[n, 0] < 0

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.children[:, 0] < 0)

    def leaf_labels(self, n) -> np.ndarray:
        return self.labels[self.label_ptr[n]:self.label_ptr[n + 1]]

    def subtree_labels(self, n) -> np.ndarray:
        stack, out = [n], []
        while stack:
            v = stack.pop()
            if self.is_leaf(v):
                out.append(self.leaf_labels(v))
            else:
                stack.extend(self.children[v].tolist())
        return np.sort(np.concatenate(out)) if out else np.empty(0, np.int64)

    def label_leaf(self) -> np.ndarray:
        """``out[l]`` is the leaf holding label ``l``."""
        out = np.full(self.labels.size, -1, dtype=np.int64)
        for n in self.leaves():
            out[self.leaf_labels(n)] = n
        return out

    def path(self, n) -> list[int]:
        """Node ids from the root down to ``n``."""
        out = [int(n)]
        while self.parent[out[-1]] >= 0:
            out.append(int(self.parent[out[-1]]))
        return out[::-1]

    @property
    def max_depth(self) -> int:
        return int(self.depth.max())


def _spread_orphans(n_left, n_right, orphans):
    """Share ``orphans`` so the two label counts end up within one of each other."""
    k = orphans.size
    total = n_left + n_right + k
    want_left = min(max((total + 1) // 2 - n_left, 0), k)
    return orphans[:want_left], orphans[want_left:]


def grow_tree(features: LabelFeatureMatrix, max_leaf: int, seed: int, tree_index: int = 0) -> TreeTopology:
    """Recursively split labels until every node holds at most ``max_leaf``."""
    if max_leaf < 1:
        raise ValueError("max_leaf must be >= 1")
    L = features.n_labels
    V = features.vectors
    is_orphan = np.zeros(L, dtype=bool)
    is_orphan[features.orphans] = True

    node_labels = [np.arange(L, dtype=np.int64)]
    children, parent, depth = [], [-1], [0]
    n = 0
    # breadth-first: node ids follow queue order, so each split's RNG is fixed
    while n < len(node_labels):
        labs = node_labels[n]
        if labs.size <= max_leaf:
            children.append((-1, -1))
            n += 1
            continue
        trained = labs[~is_orphan[labs]]
        orphans = labs[is_orphan[labs]]
        if trained.size >= 2:
            li, ri = balanced_2means(V[trained], node_rng(seed, tree_index, n))
            left, right = trained[li], trained[ri]
        else:
            left, right = trained, trained[:0]
        o_left, o_right = _spread_orphans(left.size, right.size, orphans)
        left = np.sort(np.concatenate([left, o_left]))
        right = np.sort(np.concatenate([right, o_right]))
        c0 = len(node_labels)
        node_labels.extend([left, right])
        parent.extend([n, n])
        depth.extend([depth[n] + 1] * 2)
        children.append((c0, c0 + 1))
        n += 1

    sizes = np.array([labs.size if ch[0] < 0 else 0 for labs, ch in zip(node_labels, children)])
    label_ptr = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    labels = np.concatenate([labs for labs, ch in zip(node_labels, children) if ch[0] < 0]) \
        if node_labels else np.empty(0, np.int64)
    return TreeTopology(np.asarray(children, dtype=np.int64).reshape(-1, 2),
                        np.asarray(parent, dtype=np.int64),
                        np.asarray(depth, dtype=np.int64), label_ptr,
                        labels.astype(np.int64))


def depth_bound(n_labels: int, max_leaf: int) -> int:
    return math.ceil(math.log2(max(1, math.ceil(n_labels / max_leaf)))) + 1
