"""Sparse vectors and the small kernels every other module leans on."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels


class DegenerateInputError(ValueError):
    """Raised when an operation needs a non-zero vector and got none."""


@dataclass(frozen=True, eq=False)
class SparseVector:
    """Index/value pairs over a ``dim``-dimensional space.

    Indices are strictly increasing and values finite and non-zero. Use
    :meth:`from_pairs` to build one from unsorted or zero-laden input.
    """

    indices: np.ndarray
    values: np.ndarray
    dim: int

    def __post_init__(self):
        idx = np.ascontiguousarray(self.indices, dtype=np.int64)
        val = np.ascontiguousarray(self.values, dtype=np.float64)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        idx.setflags(write=False)
        val.setflags(write=False)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("indices and values must be 1-d and equally long")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.dim:
                raise ValueError(f"index out of range for dim={self.dim}")
            if np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be strictly increasing")
        if not np.all(np.isfinite(val)):
            raise ValueError("values must be finite")
        if np.any(val == 0.0):
            raise ValueError("zero-valued entries must be absent")

    @classmethod
    def from_pairs(cls, pairs, dim) -> "SparseVector":
        """Build from ``{index: value}`` or ``[(index, value), ...]``.

        Sorts by index and drops explicit zeros; duplicate indices are summed.
        """
        items = pairs.items() if isinstance(pairs, dict) else pairs
        items = list(items)
        if not items:
            return cls.empty(dim)
        idx = np.fromiter((i for i, _ in items), dtype=np.int64, count=len(items))
        val = np.fromiter((v for _, v in items), dtype=np.float64, count=len(items))
        order = np.argsort(idx, kind="stable")
        idx, val = idx[order], val[order]
        if idx.size > 1 and np.any(idx[1:] == idx[:-1]):
            uniq, start = np.unique(idx, return_index=True)
            val = np.add.reduceat(val, start)
            idx = uniq
        keep = val != 0.0
        return cls(idx[keep], val[keep], dim)

    @classmethod
    def empty(cls, dim) -> "SparseVector":
        return cls(np.empty(0, np.int64), np.empty(0, np.float64), dim)

    @classmethod
    def from_csr_row(cls, mat: sp.csr_matrix, row: int) -> "SparseVector":
        lo, hi = mat.indptr[row], mat.indptr[row + 1]
        idx = mat.indices[lo:hi]
        val = mat.data[lo:hi]
        keep = val != 0.0
        return cls(idx[keep], val[keep], mat.shape[1])

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim, dtype=np.float64)
        out[self.indices] = self.values
        return out

    def to_dict(self) -> dict:
        return dict(zip(self.indices.tolist(), self.values.tolist()))

    def norm(self) -> float:
        if not self.values.size:
            return 0.0
        # scale first so tiny or huge entries neither underflow nor overflow
        m = float(np.max(np.abs(self.values)))
        s = self.values / m
        return m * float(np.sqrt(np.dot(s, s)))

    def __eq__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        return (self.dim == other.dim
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        body = ", ".join(f"{i}:{v:g}" for i, v in zip(self.indices.tolist(), self.values.tolist()))
        return f"SparseVector({{{body}}}, dim={self.dim})"


def dot(a: SparseVector, b: SparseVector) -> float:
    """Exact sparse inner product (merge over sorted indices)."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return kernels.sparse_dot(a.indices, a.values, b.indices, b.values)


def unit_normalize(v: SparseVector) -> SparseVector:
    """Scale ``v`` to unit L2 norm, keeping its support."""
    norm = v.norm()
    if norm == 0.0:
        raise DegenerateInputError("cannot normalize an all-zero vector")
    m = float(np.max(np.abs(v.values)))
    scaled = v.values / m
    return SparseVector(v.indices, scaled / (norm / m), v.dim)


def top_k(scores, k: int) -> list[int]:
    """Indices of the ``k`` highest scores, best first.

    ``scores`` is a sequence of ``(index, score)`` pairs. Equal scores are
    ordered by ascending index.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    items = list(scores)
    if not items:
        return []
    idx = np.fromiter((i for i, _ in items), dtype=np.int64, count=len(items))
    val = np.fromiter((s for _, s in items), dtype=np.float64, count=len(items))
    return idx[topk_order(val, idx, k)].tolist()


def topk_order(values: np.ndarray, tiebreak: np.ndarray, k: int) -> np.ndarray:
    """Positions of the ``k`` largest ``values``; ties go to smaller ``tiebreak``."""
    n = values.shape[0]
    if n == 0 or k <= 0:
        return np.empty(0, dtype=np.int64)
    if k < n:
        # the k-th largest value bounds the candidates; keep all ties at the boundary
        kth = np.partition(values, n - k)[n - k]
        cand = np.flatnonzero(values >= kth)
    else:
        cand = np.arange(n)
    order = np.lexsort((tiebreak[cand], -values[cand]))
    return cand[order[:k]]


def normalize_rows(mat: sp.csr_matrix) -> tuple[sp.csr_matrix, np.ndarray]:
    """Unit-normalize CSR rows; returns the matrix and a mask of all-zero rows."""
    mat = sp.csr_matrix(mat, dtype=np.float64, copy=True)
    sq = np.asarray(mat.multiply(mat).sum(axis=1)).ravel()
    norms = np.sqrt(sq)
    zero = norms == 0.0
    scale = np.where(zero, 1.0, 1.0 / np.where(zero, 1.0, norms))
    mat.data *= np.repeat(scale, np.diff(mat.indptr))
    return mat, zero


def csr_arrays(mat: sp.csr_matrix):
    """CSR arrays in the dtypes the kernels expect."""
    return (np.ascontiguousarray(mat.indptr, dtype=np.int64),
            np.ascontiguousarray(mat.indices, dtype=np.int64),
            np.ascontiguousarray(mat.data, dtype=np.float64))
