"""Hand-built models for inference tests."""
import numpy as np
import scipy.sparse as sp

from xreg.trainer import Hyperparams, TreeModel, XRegModel
from xreg.tree import TreeTopology


def two_level_topology():
    """root -> (1, 2); 1 -> leaves (3, 4); leaves hold 3:{0}, 4:{1}, 2:{2}."""
    children = np.array([[1, 2], [3, 4], [-1, -1], [-1, -1], [-1, -1]])
    parent = np.array([-1, 0, 0, 1, 1])
    depth = np.array([0, 1, 1, 2, 2])
    label_ptr = np.array([0, 0, 0, 1, 2, 3])
    labels = np.array([2, 0, 1])
    return TreeTopology(children, parent, depth, label_ptr, labels)


def single_leaf_topology(n_labels):
    return TreeTopology(np.array([[-1, -1]]), np.array([-1]), np.array([0]),
                        np.array([0, n_labels]), np.arange(n_labels))


def model_from(topo, W, n_features, frac=None, y_max=1.0):
    W = sp.csr_matrix(np.asarray(W, dtype=float))
    W.eliminate_zeros()
    frac = np.ones(topo.n_nodes) if frac is None else np.asarray(frac, dtype=float)
    hp = Hyperparams(trees=1, max_leaf=int(np.diff(topo.label_ptr).max()))
    return XRegModel(n_features, topo.labels.size, y_max, hp, [TreeModel(topo, W, frac)])
