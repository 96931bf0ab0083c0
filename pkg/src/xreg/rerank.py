"""Blend model scores with a generative tail scorer (cosine to label centroids)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .io import LABELWISE, PredictionFile
from .sparse import SparseVector, normalize_rows, topk_order

DEFAULT_ALPHA = 0.8


@dataclass
class TailClassifier:
    """Unit label centroids (rows of ``centroids``) and training counts."""

    centroids: sp.csr_matrix
    counts: np.ndarray

    @classmethod
    def from_model(cls, model) -> "TailClassifier":
        if model.tail_centroids is None:
            raise ValueError("model file has no tail section; retrain with tail scoring enabled")
        return cls(sp.csr_matrix(model.tail_centroids), np.asarray(model.tail_counts))

    @property
    def n_features(self) -> int:
        return self.centroids.shape[1]

    def cosine(self, x: SparseVector, labels) -> np.ndarray:
        """``max(0, cos(x, v_l))`` for each label; ``x`` need not be unit length."""
        labels = np.asarray(labels, dtype=np.int64)
        xd = np.zeros(self.n_features)
        keep = x.indices < self.n_features
        xd[x.indices[keep]] = x.values[keep]
        norm = np.linalg.norm(xd)
        if norm == 0 or labels.size == 0:
            return np.zeros(labels.size)
        return np.maximum(0.0, (self.centroids[labels] @ xd) / norm)


def _check_alpha(alpha):
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")


def rerank(scores, x: SparseVector, tail: TailClassifier, alpha: float = DEFAULT_ALPHA,
           y_max: float = 1.0) -> list:
    """Re-score and re-order the candidate ``(label, score)`` pairs.

    Blended score: ``alpha * score + (1 - alpha) * y_max * max(0, cos(x, v_l))``.
    ``y_max`` puts the tail term on the same scale as rescaled model scores.
    """
    _check_alpha(alpha)
    if not scores:
        return []
    labels = np.fromiter((l for l, _ in scores), dtype=np.int64, count=len(scores))
    raw = np.fromiter((s for _, s in scores), dtype=np.float64, count=len(scores))
    blended = alpha * raw + (1.0 - alpha) * y_max * tail.cosine(x, labels)
    order = topk_order(blended, labels, labels.size)
    return list(zip(labels[order].tolist(), blended[order].tolist()))


def rerank_file(P: PredictionFile, X, tail: TailClassifier, alpha: float = DEFAULT_ALPHA,
                y_max: float = 1.0) -> PredictionFile:
    """Apply :func:`rerank` to every row; raw scores are kept in ``raw_scores``."""
    _check_alpha(alpha)
    X = sp.csr_matrix(X, dtype=np.float64)
    X.sort_indices()
    X.eliminate_zeros()
    if P.orientation == LABELWISE:
        Xn, _ = normalize_rows(X)
        if Xn.shape[1] > tail.n_features:
            Xn = Xn[:, :tail.n_features]
        elif Xn.shape[1] < tail.n_features:
            Xn = sp.csr_matrix((Xn.data, Xn.indices, Xn.indptr), shape=(Xn.shape[0], tail.n_features))
        rows = []
        for l, row in enumerate(P.rows):
            if not row:
                rows.append([])
                continue
            pts = np.array([p for p, _ in row], dtype=np.int64)
            raw = np.array([s for _, s in row])
            cos = np.maximum(0.0, np.asarray(Xn[pts] @ tail.centroids[l].T.toarray()).ravel())
            blended = alpha * raw + (1.0 - alpha) * y_max * cos
            order = topk_order(blended, pts, pts.size)
            rows.append(list(zip(pts[order].tolist(), blended[order].tolist())))
        return PredictionFile(rows, P.n_cols, P.orientation, raw_scores=[list(r) for r in P.rows])
    rows = []
    for i, row in enumerate(P.rows):
        lo, hi = X.indptr[i], X.indptr[i + 1]
        x = SparseVector(X.indices[lo:hi], X.data[lo:hi], X.shape[1])
        rows.append(rerank(row, x, tail, alpha, y_max))
    return PredictionFile(rows, P.n_cols, P.orientation, raw_scores=[list(r) for r in P.rows])
