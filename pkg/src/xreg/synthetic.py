"""Skewed synthetic regression data for tests, benchmarks and self-checks."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .io import RelevanceDataset
from .sparse import normalize_rows


def make_dataset(n_points=500, n_features=200, n_labels=50, *, labels_per_point=3,
                 features_per_label=8, noise_features=4, zipf=1.1, seed=0,
                 n_test=0, rating_levels=None):
    """Draw a dataset whose label popularity follows a power law.

    Each label owns a random sparse prototype; a point's features are the
    unit-normalised sum of its labels' prototypes (scaled by relevance) plus a
    few noise features. Relevances are uniform in (0.1, 1], or integer
    ratings ``1..rating_levels`` when that is given. With ``n_test > 0`` a
    ``(train, test)`` pair drawn from the same prototypes is returned.
    """
    rng = np.random.default_rng(seed)
    pop = 1.0 / np.arange(1, n_labels + 1) ** zipf
    pop /= pop.sum()
    protos = np.zeros((n_labels, n_features))
    for l in range(n_labels):
        f = rng.choice(n_features, size=min(features_per_label, n_features), replace=False)
        protos[l, f] = rng.uniform(0.5, 1.5, size=f.size)

    def draw(n):
        x_rows, y_rows = [], []
        for _ in range(n):
            k = int(rng.integers(1, labels_per_point + 1))
            labs = np.unique(rng.choice(n_labels, size=k, p=pop))
            if rating_levels:
                rel = rng.integers(1, rating_levels + 1, size=labs.size).astype(np.float64)
            else:
                rel = rng.uniform(0.1, 1.0, size=labs.size)
            x = (rel[:, None] * protos[labs]).sum(axis=0)
            nf = rng.choice(n_features, size=noise_features, replace=False)
            x[nf] += rng.uniform(0.0, 0.5, size=noise_features)
            x_rows.append(x)
            yr = np.zeros(n_labels)
            yr[labs] = rel
            y_rows.append(yr)
        X, _ = normalize_rows(sp.csr_matrix(np.array(x_rows)))
        Y = sp.csr_matrix(np.array(y_rows))
        return RelevanceDataset(X, Y)

    train = draw(n_points)
    if n_test:
        return train, draw(n_test)
    return train


def random_model(rng, n_labels, n_features, max_leaf, n_trees=1, density=0.5, scale=1.0,
                 y_max=1.0):
    """A model with random topology and random weights (no training)."""
    from .trainer import Hyperparams, TreeModel, XRegModel
    from .tree import LabelFeatureMatrix, grow_tree

    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    dim = n_features + 1
    trees = []
    for t in range(n_trees):
        V = sp.random(n_labels, n_features, density=min(1.0, 3.0 / max(n_features, 1) + 0.2),
                      random_state=rng, format="csr")
        V.data = rng.standard_normal(V.data.size)
        V, zero = normalize_rows(V)
        feats = LabelFeatureMatrix(V, np.flatnonzero(zero))
        topo = grow_tree(feats, max_leaf, int(rng.integers(2**31)), t)
        rows = topo.n_nodes + topo.labels.size
        W = sp.random(rows, dim, density=density, random_state=rng, format="csr")
        W.data = rng.standard_normal(W.data.size) * scale
        W = W.tolil()
        W[0, :] = 0
        W = W.tocsr()
        W.eliminate_zeros()
        W.sort_indices()
        frac = np.ones(topo.n_nodes)
        for n in range(1, topo.n_nodes):
            frac[n] = frac[topo.parent[n]] * rng.uniform(0.3, 1.0)
        trees.append(TreeModel(topo, W, frac))
    hp = Hyperparams(trees=n_trees, max_leaf=max_leaf)
    return XRegModel(n_features, n_labels, float(y_max), hp, trees)
