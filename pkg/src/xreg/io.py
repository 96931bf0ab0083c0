"""Text formats: relevance datasets and prediction files.

Dataset files follow the extreme-classification repository layout with
optional label weights::

    N D L
    l1:w1,l2:w2 f1:v1 f2:v2 ...
     f1:v1 ...                      (no labels: line starts with a space)

Labels without ``:weight`` get weight 1.0. Prediction files start with
``R C`` and hold one row of ``index:score`` pairs per line, best first.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .sparse import SparseVector

log = logging.getLogger(__name__)

POINTWISE = "pointwise"
LABELWISE = "labelwise"


class ParseError(ValueError):
    def __init__(self, path, lineno, msg):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {msg}")


@dataclass
class RelevanceDataset:
    """``N`` sparse feature rows paired with ``N`` sparse relevance rows."""

    X: sp.csr_matrix
    Y: sp.csr_matrix

    def __post_init__(self):
        if self.X.shape[0] != self.Y.shape[0]:
            raise ValueError("feature and relevance row counts differ")
        if self.Y.nnz and self.Y.data.min() < 0:
            raise ValueError("relevances must be non-negative")

    @property
    def n_points(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_labels(self) -> int:
        return self.Y.shape[1]

    def point(self, i):
        return SparseVector.from_csr_row(self.X, i), SparseVector.from_csr_row(self.Y, i)

    def __iter__(self):
        for i in range(self.n_points):
            yield self.point(i)

    def __len__(self):
        return self.n_points


def _parse_pairs(tokens, path, lineno, what, bound, allow_bare=False):
    """Parse ``i:v`` tokens into sorted index/value arrays."""
    if not tokens:
        return np.empty(0, np.int64), np.empty(0, np.float64)
    if allow_bare:
        idx_txt, val_txt = [], []
        for tok in tokens:
            head, sep, tail = tok.partition(":")
            idx_txt.append(head)
            val_txt.append(tail if sep else "1")
    else:
        flat = " ".join(tokens).replace(":", " ").split()
        if len(flat) != 2 * len(tokens):
            raise ParseError(path, lineno, f"malformed {what} token")
        idx_txt, val_txt = flat[0::2], flat[1::2]
    try:
        idx = np.array(idx_txt, dtype=np.int64)
        val = np.array(val_txt, dtype=np.float64)
    except ValueError as exc:
        raise ParseError(path, lineno, f"non-numeric {what} token ({exc})") from None
    if not np.all(np.isfinite(val)):
        raise ParseError(path, lineno, f"non-finite {what} value")
    if idx.size:
        bad = idx[(idx < 0) | (idx >= bound)]
        if bad.size:
            sym = "L" if what == "label" else "D"
            raise ParseError(path, lineno, f"{what} index {int(bad[0])} ≥ {sym}={bound}"
                             if bad[0] >= 0 else f"negative {what} index {int(bad[0])}")
    if what == "label" and np.any(val < 0):
        raise ParseError(path, lineno, "negative relevance")
    order = np.argsort(idx, kind="stable")
    return idx[order], val[order]


def read_dataset(path) -> RelevanceDataset:
    """Parse a dataset file; raises :class:`ParseError` with the line number."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 3:
            raise ParseError(path, 1, "header must be 'N D L'")
        try:
            n, d, L = (int(p) for p in parts)
        except ValueError:
            raise ParseError(path, 1, "header must hold three integers") from None
        if n < 0 or d < 0 or L < 0:
            raise ParseError(path, 1, "negative size in header")

        x_ptr, x_idx, x_val = [0], [], []
        y_ptr, y_idx, y_val = [0], [], []
        rows = 0
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                if line == "":
                    continue
            if rows == n:
                raise ParseError(path, lineno, f"more than N={n} data lines")
            if line.startswith(" ") or line.startswith("\t"):
                label_tok, feat_toks = "", line.split()
            else:
                toks = line.split()
                label_tok, feat_toks = toks[0], toks[1:]
            label_toks = [t for t in label_tok.split(",") if t] if label_tok else []
            li, lv = _parse_pairs(label_toks, path, lineno, "label", L, allow_bare=True)
            fi, fv = _parse_pairs(feat_toks, path, lineno, "feature", d)
            li, lv = _dedupe(li, lv, np.maximum)
            fi, fv = _dedupe(fi, fv, np.add)
            keep = lv != 0
            y_idx.append(li[keep])
            y_val.append(lv[keep])
            y_ptr.append(y_ptr[-1] + int(keep.sum()))
            keep = fv != 0
            x_idx.append(fi[keep])
            x_val.append(fv[keep])
            x_ptr.append(x_ptr[-1] + int(keep.sum()))
            rows += 1
        if rows != n:
            raise ParseError(path, rows + 2, f"expected N={n} data lines, found {rows}")

    def build(ptr, idx, val, ncols):
        idx = np.concatenate(idx) if idx else np.empty(0, np.int64)
        val = np.concatenate(val) if val else np.empty(0, np.float64)
        return sp.csr_matrix((val, idx, np.asarray(ptr, dtype=np.int64)), shape=(n, ncols))

    return RelevanceDataset(build(x_ptr, x_idx, x_val, d), build(y_ptr, y_idx, y_val, L))


def _dedupe(idx, val, combine):
    if idx.size < 2 or not np.any(idx[1:] == idx[:-1]):
        return idx, val
    uniq, start = np.unique(idx, return_index=True)
    return uniq, combine.reduceat(val, start)


def _fmt_value(v: float) -> str:
    return repr(float(v))


def write_dataset(ds: RelevanceDataset, path) -> None:
    """Serialize ``ds``; weights equal to 1.0 are written as bare labels."""
    X, Y = ds.X.tocsr(), ds.Y.tocsr()
    X.sort_indices()
    Y.sort_indices()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{ds.n_points} {ds.n_features} {ds.n_labels}\n")
        for i in range(ds.n_points):
            lo, hi = Y.indptr[i], Y.indptr[i + 1]
            labels = ",".join(
                str(l) if w == 1.0 else f"{l}:{_fmt_value(w)}"
                for l, w in zip(Y.indices[lo:hi].tolist(), Y.data[lo:hi].tolist()))
            lo, hi = X.indptr[i], X.indptr[i + 1]
            feats = " ".join(f"{f}:{_fmt_value(v)}"
                             for f, v in zip(X.indices[lo:hi].tolist(), X.data[lo:hi].tolist()))
            fh.write(f"{labels} {feats}".rstrip(" ") + "\n" if labels else f" {feats}\n")


def warn_dim(got: int, expected: int) -> bool:
    """Log a warning when input and model dimensions differ; True if they do."""
    if got == expected:
        return False
    log.warning("input has D=%d features but the model expects D=%d; "
                "features beyond the model are ignored", got, expected)
    return True


def add_bias(X: sp.csr_matrix, n_features: int) -> sp.csr_matrix:
    """Map ``X`` into a model's ``n_features + 1`` space with a bias column.

    Columns at or beyond ``n_features`` are dropped; the constant 1.0 lands in
    column ``n_features``.
    """
    X = sp.csr_matrix(X, dtype=np.float64)
    if warn_dim(X.shape[1], n_features):
        if X.shape[1] > n_features:
            X = X[:, :n_features]
        else:
            X = sp.csr_matrix((X.data, X.indices, X.indptr), shape=(X.shape[0], n_features))
    bias = sp.csr_matrix(np.ones((X.shape[0], 1)))
    out = sp.hstack([X, bias], format="csr")
    out.sort_indices()
    return out


@dataclass
class PredictionFile:
    """Sparse ``(index, score)`` rows, best first.

    ``orientation`` is ``"pointwise"`` (rows are test points, columns labels)
    or ``"labelwise"`` (rows are labels, columns test points).
    """

    rows: list
    n_cols: int
    orientation: str = POINTWISE
    raw_scores: list | None = field(default=None, repr=False)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def to_csr(self) -> sp.csr_matrix:
        ptr = [0]
        idx, val = [], []
        for row in self.rows:
            for j, s in row:
                idx.append(j)
                val.append(s)
            ptr.append(len(idx))
        return sp.csr_matrix((np.asarray(val, dtype=np.float64), np.asarray(idx, dtype=np.int64),
                              np.asarray(ptr, dtype=np.int64)), shape=(self.n_rows, self.n_cols))

    def __eq__(self, other):
        if not isinstance(other, PredictionFile):
            return NotImplemented
        return (self.n_cols == other.n_cols and len(self.rows) == len(other.rows)
                and all(list(a) == list(b) for a, b in zip(self.rows, other.rows)))


def format_score(s: float) -> str:
    return f"{s:.6g}"


def write_predictions(p: PredictionFile, path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"{p.n_rows} {p.n_cols}\n")
            for row in p.rows:
                fh.write(" ".join(f"{j}:{format_score(s)}" for j, s in row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write predictions to {path}: {exc}") from exc


def read_predictions(path, orientation=POINTWISE) -> PredictionFile:
    path = Path(path)
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read predictions from {path}: {exc}") from exc
    with fh:
        parts = fh.readline().split()
        if len(parts) != 2:
            raise ParseError(path, 1, "header must be 'R C'")
        try:
            R, C = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(path, 1, "header must hold two integers") from None
        rows = []
        for lineno, line in enumerate(fh, start=2):
            if len(rows) == R:
                if line.strip():
                    raise ParseError(path, lineno, f"more than R={R} rows")
                continue
            row = []
            for tok in line.split():
                j, sep, s = tok.partition(":")
                if not sep:
                    raise ParseError(path, lineno, f"malformed pair {tok!r}")
                try:
                    j, s = int(j), float(s)
                except ValueError:
                    raise ParseError(path, lineno, f"malformed pair {tok!r}") from None
                if not (0 <= j < C):
                    raise ParseError(path, lineno, f"column {j} outside [0, {C})")
                if not np.isfinite(s):
                    raise ParseError(path, lineno, "non-finite score")
                row.append((j, s))
            rows.append(row)
        while len(rows) < R:
            rows.append([])
    return PredictionFile(rows, C, orientation)
