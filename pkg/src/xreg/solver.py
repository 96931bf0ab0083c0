"""Weighted L2-regularised logistic regression for a single tree node.

Each member point ``i`` of a node carries a positive weight ``a_i`` and a
negative weight ``b_i``. The objective is::

    |w|^2 + (C / n) * sum_i [a_i log(1 + e^{-w.x_i}) + b_i log(1 + e^{w.x_i})]

with ``n`` the number of member points (``loss_scale="mean"``) or 1
(``loss_scale="sum"``, the default). Halving it gives the form dual coordinate descent
solves, where every point becomes a positive copy with cost ``C a_i / 2n``
and a negative copy with cost ``C b_i / 2n``. The summed form regularises far
less per node and is what makes ``C = 10`` a workable default.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import kernels
from .sparse import SparseVector, csr_arrays

log = logging.getLogger(__name__)

DEFAULT_C = 10.0
DEFAULT_TOL = 0.1
DEFAULT_MAX_ITER = 100
DEFAULT_PRUNE = 0.05
LOSS_SCALES = ("mean", "sum")
DEFAULT_LOSS_SCALE = "sum"

# keeps sigmoid strictly inside (0, 1) in float64
_LOGIT_CLAMP = 36.0


@dataclass
class LinearRegressor:
    """Sparse weights plus solver bookkeeping."""

    weights: SparseVector
    n_iter: int = 0
    gmax: float = 0.0
    empty: bool = False
    trace: list = field(default_factory=list, repr=False)

    @classmethod
    def zero(cls, dim) -> "LinearRegressor":
        return cls(SparseVector.empty(dim), empty=True)

    def decision(self, x: SparseVector) -> float:
        return kernels.sparse_dot(self.weights.indices, self.weights.values, x.indices, x.values)


def sigmoid(t):
    """Logistic function, clamped so the result lies strictly in (0, 1)."""
    t = np.clip(t, -_LOGIT_CLAMP, _LOGIT_CLAMP)
    return np.where(t >= 0, 1.0 / (1.0 + np.exp(-t)), np.exp(t) / (1.0 + np.exp(t)))


def log_sigmoid(t):
    """``log(sigmoid(t))`` under the same clamp as :func:`sigmoid`."""
    t = np.clip(t, -_LOGIT_CLAMP, _LOGIT_CLAMP)
    return -np.logaddexp(0.0, -t)


def predict_prob(r: LinearRegressor, x: SparseVector) -> float:
    if x.dim < r.weights.dim:
        raise ValueError(f"feature dimension {x.dim} below model dimension {r.weights.dim}")
    return float(sigmoid(r.decision(x)))


def example_costs(a, b, C, loss_scale=DEFAULT_LOSS_SCALE):
    """Per-copy dual costs for the halved objective."""
    if loss_scale not in LOSS_SCALES:
        raise ValueError(f"loss_scale must be one of {LOSS_SCALES}")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = C / (2.0 * a.size) if loss_scale == "mean" else C / 2.0
    return a * scale, b * scale


def objective(w, X, rows, a, b, C, loss_scale=DEFAULT_LOSS_SCALE) -> float:
    """The node objective at dense ``w``."""
    X = sp.csr_matrix(X)
    rows = np.asarray(rows, dtype=np.int64)
    t = X[rows] @ np.asarray(w, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    loss = a * np.logaddexp(0.0, -t) + b * np.logaddexp(0.0, t)
    n = rows.size if loss_scale == "mean" else 1
    return float(np.dot(w, w) + C / n * loss.sum())


def solve(X, rows, a, b, C=DEFAULT_C, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
          seed=0, prune=DEFAULT_PRUNE, loss_scale=DEFAULT_LOSS_SCALE, trace=False) -> LinearRegressor:
    """Fit one node regressor on rows ``rows`` of CSR ``X``.

    ``a`` and ``b`` are the positive and negative weights of those rows. After
    solving, weights with magnitude below ``prune`` are dropped.
    """
    if C <= 0:
        raise ValueError("C must be positive")
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be positive and max_iter >= 1")
    X = X if isinstance(X, sp.csr_matrix) else sp.csr_matrix(X)
    dim = X.shape[1]
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("example weights must be non-negative")
    if rows.size == 0 or not (np.any(a > 0) or np.any(b > 0)):
        log.warning("node solver called without weighted examples; returning zero regressor")
        return LinearRegressor.zero(dim)
    pos, neg = example_costs(a, b, C, loss_scale)
    indptr, indices, data = csr_arrays(X)
    w, n_iter, gmax, tr = kernels.dual_cd_logistic(
        indptr, indices, data, rows, pos, neg, dim, float(tol), int(max_iter),
        int(seed) & ((1 << 64) - 1), bool(trace))
    keep = np.abs(w) >= prune if prune > 0 else w != 0.0
    nz = np.flatnonzero(keep)
    return LinearRegressor(SparseVector(nz, w[nz], dim), n_iter, float(gmax), False, tr)
