"""Regression and ranking metrics, pointwise and labelwise.

Conventions used throughout:

* ``S(v, k)`` is the ordered set of the ``k`` highest *non-zero* entries of
  ``v``, ties to the lower index. Labels a prediction omits score 0 and are
  not ranked.
* Per-row averages over ``k`` slots divide by ``min(k, L)``; missing slots
  contribute 0.
* Percent-style metrics (WP, PSP, nDCG, Tau) are returned as fractions by the
  per-row functions and multiplied by 100 in :class:`MetricReport`.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .io import LABELWISE, POINTWISE, PredictionFile
from .sparse import topk_order

METRICS = ("xmad", "xrmse", "mad", "rmse", "wp", "wpregret", "psp", "ndcg", "tau", "auprc")
PERCENT = {"wp", "psp", "ndcg", "tau"}
PROPENSITY_A = 0.55
PROPENSITY_B = 1.5


# -- row representation --------------------------------------------------------

@dataclass
class Row:
    """One sparse row: ``idx`` sorted ascending, ``val`` non-zero."""

    idx: np.ndarray
    val: np.ndarray
    dim: int

    @classmethod
    def from_any(cls, v, dim=None) -> "Row":
        if isinstance(v, Row):
            return v
        if hasattr(v, "indices") and hasattr(v, "values"):
            return cls._make(v.indices, v.values, v.dim)
        if isinstance(v, dict):
            items = sorted(v.items())
            return cls._make([i for i, _ in items], [s for _, s in items], dim)
        if isinstance(v, (list, tuple)) and v and isinstance(v[0], (tuple, list)):
            items = sorted((int(i), float(s)) for i, s in v)
            return cls._make([i for i, _ in items], [s for _, s in items], dim)
        arr = np.asarray(v, dtype=np.float64).ravel()
        nz = np.flatnonzero(arr)
        return cls._make(nz, arr[nz], arr.size if dim is None else dim)

    @classmethod
    def _make(cls, idx, val, dim):
        idx = np.asarray(idx, dtype=np.int64)
        val = np.asarray(val, dtype=np.float64)
        keep = val != 0
        if dim is None:
            dim = int(idx.max()) + 1 if idx.size else 0
        return cls(idx[keep], val[keep], int(dim))

    def ranked(self, k=None) -> np.ndarray:
        """Positions into ``idx`` of ``S(self, k)``."""
        k = self.idx.size if k is None else k
        return topk_order(self.val, self.idx, k)


def _pair(y, yhat, dim=None):
    y = Row.from_any(y, dim)
    yh = Row.from_any(yhat, y.dim if dim is None else dim)
    L = max(y.dim, yh.dim)
    return y, yh, L


def _errors(y: Row, yh: Row) -> np.ndarray:
    """Absolute errors over the union support (all other errors are 0)."""
    u = np.union1d(y.idx, yh.idx)
    a = np.zeros(u.size)
    b = np.zeros(u.size)
    a[np.searchsorted(u, y.idx)] = y.val
    b[np.searchsorted(u, yh.idx)] = yh.val
    return np.abs(b - a)


def _lookup(row: Row, labels) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    pos = np.searchsorted(row.idx, labels)
    pos = np.minimum(pos, max(row.idx.size - 1, 0))
    hit = row.idx.size > 0
    out = np.zeros(labels.size)
    if hit:
        m = row.idx[pos] == labels
        out[m] = row.val[pos[m]]
    return out


def _check_k(k):
    if k < 1:
        raise ValueError("k must be >= 1")


def _topk_values(e, k):
    if e.size > k:
        return np.partition(e, e.size - k)[e.size - k:]
    return e


# -- regression errors ----------------------------------------------------------

def xmad_at_k(y, yhat, k, dim=None) -> float:
    """Mean of the ``k`` largest absolute errors."""
    _check_k(k)
    y, yh, L = _pair(y, yhat, dim)
    e = _topk_values(_errors(y, yh), k)
    return float(np.sum(np.sort(e))) / min(k, L)


def xrmse_at_k(y, yhat, k, dim=None) -> float:
    """Root mean square of the ``k`` largest absolute errors."""
    _check_k(k)
    y, yh, L = _pair(y, yhat, dim)
    e = _topk_values(_errors(y, yh), k)
    return math.sqrt(float(np.sum(np.sort(e) ** 2)) / min(k, L))


def xmad_by_sort(y, yhat, k, dim=None) -> float:
    """Reference XMAD using a full sort of all ``L`` errors."""
    y, yh, L = _pair(y, yhat, dim)
    full = np.zeros(L)
    full[y.idx] -= y.val
    full[yh.idx] += yh.val
    e = np.sort(np.abs(full))[::-1][:k]
    return float(np.sum(e[::-1])) / min(k, L)


def mad(y, yhat, dim=None) -> float:
    """Sum of absolute errors over all labels."""
    y, yh, _ = _pair(y, yhat, dim)
    return float(np.sum(_errors(y, yh)))


def rmse(y, yhat, dim=None) -> float:
    """Square root of the summed squared errors over all labels."""
    y, yh, _ = _pair(y, yhat, dim)
    return math.sqrt(float(np.sum(_errors(y, yh) ** 2)))


# -- ranking -----------------------------------------------------------------------

def _wp_parts(y: Row, yh: Row, k, weights=None):
    pred = yh.idx[yh.ranked(k)]
    gain_y = y.val if weights is None else y.val * weights[y.idx]
    ideal = float(np.sum(np.sort(_topk_values(gain_y, k))))
    got = _lookup(y, pred)
    if weights is not None:
        got = got * weights[pred]
    return float(np.sum(got)), ideal


def wp_at_k(y, yhat, k, dim=None) -> float:
    """Mean true relevance of the ``k`` top-predicted labels."""
    _check_k(k)
    y, yh, L = _pair(y, yhat, dim)
    got, _ = _wp_parts(y, yh, k)
    return got / min(k, L)


def wp_regret_at_k(y, yhat, k, dim=None) -> float:
    """WP@k of the ideal ranking minus WP@k achieved."""
    _check_k(k)
    y, yh, L = _pair(y, yhat, dim)
    got, ideal = _wp_parts(y, yh, k)
    return (ideal - got) / min(k, L)


def regression_error_at_k(y, yhat, k, dim=None) -> float:
    """Mean absolute error over the ``k`` top-predicted labels."""
    _check_k(k)
    y, yh, L = _pair(y, yhat, dim)
    pred = yh.idx[yh.ranked(k)]
    return float(np.sum(np.abs(_lookup(yh, pred) - _lookup(y, pred)))) / min(k, L)


def propensities(label_counts, n_points, A=PROPENSITY_A, B=PROPENSITY_B) -> np.ndarray:
    """``p_l = 1 / (1 + C (N_l + B)^-A)`` with ``C = (log N - 1)(B + 1)^A``."""
    counts = np.asarray(label_counts, dtype=np.float64)
    c = (math.log(n_points) - 1.0) * (B + 1.0) ** A
    return 1.0 / (1.0 + c * np.power(counts + B, -A))


def label_counts(Y) -> np.ndarray:
    Y = sp.csc_matrix(Y)
    Y.eliminate_zeros()
    return np.diff(Y.indptr).astype(np.int64)


def _inv_prop(p, L):
    if p is None:
        return np.ones(L)
    p = np.asarray(p, dtype=np.float64)
    if p.size < L:
        p = np.concatenate([p, np.ones(L - p.size)])
    return 1.0 / p


def psp_parts(y, yhat, k, p, dim=None):
    """``(achieved, ideal)`` propensity-scored gains at ``k``."""
    _check_k(k)
    y, yh, L = _pair(y, yhat, dim)
    return _wp_parts(y, yh, k, _inv_prop(p, L))


def psp_at_k(y, yhat, k, p=None, dim=None) -> float:
    """Propensity-scored WP@k over its per-row ideal, as a fraction."""
    got, ideal = psp_parts(y, yhat, k, p, dim)
    return got / ideal if ideal > 0 else 0.0


def ndcg_at_k(y, yhat, k, dim=None) -> float:
    _check_k(k)
    y, yh, _ = _pair(y, yhat, dim)
    pred = yh.idx[yh.ranked(k)]
    disc = 1.0 / np.log2(np.arange(2, k + 2))
    dcg = float(np.dot(_lookup(y, pred), disc[:pred.size]))
    ideal = np.sort(y.val)[::-1][:k]
    idcg = float(np.dot(ideal, disc[:ideal.size]))
    return dcg / idcg if idcg > 0 else 0.0


def tau_at_k(y, yhat, k, dim=None, return_flag=False):
    """Kendall-style agreement over ``U = S(y,k) | S(yhat,k)``.

    Returns 0 (and ``defined=False`` with ``return_flag``) when ``|U| < 2``.
    """
    _check_k(k)
    y, yh, _ = _pair(y, yhat, dim)
    u = np.union1d(y.idx[y.ranked(k)], yh.idx[yh.ranked(k)])
    if u.size < 2:
        return (0.0, False) if return_flag else 0.0
    a = _lookup(y, u)
    b = _lookup(yh, u)
    da = np.sign(a[:, None] - a[None, :])
    db = np.sign(b[:, None] - b[None, :])
    iu = np.triu_indices(u.size, 1)
    prod = (da * db)[iu]
    tau = float(np.sum(prod > 0) - np.sum(prod < 0)) / (u.size * (u.size - 1) / 2)
    return (tau, True) if return_flag else tau


# -- AUPRC ---------------------------------------------------------------------------

def auprc_curve(Y, Yhat, thresholds=None):
    """Precision/recall under global thresholds on predicted relevance.

    ``Y`` and ``Yhat`` are sparse matrices of the same shape. Entries with
    ``yhat >= t`` are retained; precision is their mean true relevance and
    recall their share of total true relevance. Thresholds that retain
    nothing are skipped. Without ``thresholds`` every distinct predicted
    value is used. Returns ``(points, area)`` with the area by trapezoid over
    recall.
    """
    Y = sp.csr_matrix(Y, dtype=np.float64)
    P = sp.csr_matrix(Yhat, dtype=np.float64)
    P.eliminate_zeros()
    if Y.shape != P.shape:
        raise ValueError("truth and prediction shapes differ")
    total = float(Y.sum())
    Pc = P.tocoo()
    truth = np.asarray(Y[Pc.row, Pc.col]).ravel()
    order = np.lexsort((Pc.col, Pc.row, -Pc.data))
    scores = Pc.data[order]
    truth = truth[order]
    cum_true = np.cumsum(truth)
    if thresholds is None:
        thresholds = np.unique(scores)[::-1]
    points = []
    for t in np.asarray(thresholds, dtype=np.float64):
        n = int(np.searchsorted(-scores, -t, side="right"))
        if n == 0:
            continue
        got = float(cum_true[n - 1])
        points.append((got / n, got / total if total > 0 else 0.0))
    return points, auprc_area(points)


def auprc_area(points) -> float:
    if not points:
        return 0.0
    pts = sorted(points, key=lambda pr: pr[1])
    # anchor at recall 0 with the first point's precision
    area, prev_p, prev_r = 0.0, pts[0][0], 0.0
    for p, r in pts:
        area += (r - prev_r) * (p + prev_p) / 2.0
        prev_p, prev_r = p, r
    return area


def zero_corruption(P: PredictionFile, eps: float = 1e-6) -> PredictionFile:
    """Replace scores by tiny values that keep each row's ranking."""
    rows = []
    for row in P.rows:
        n = len(row)
        rows.append([(j, eps * (n - r) / max(n, 1)) for r, (j, _) in enumerate(row)])
    return PredictionFile(rows, P.n_cols, P.orientation)


# -- dataset level -------------------------------------------------------------------

def _row_from_file(row, dim) -> Row:
    return Row.from_any(list(row), dim) if row else Row(np.empty(0, np.int64), np.empty(0), dim)


def _truth_rows(Y, orientation):
    Y = sp.csr_matrix(Y, dtype=np.float64)
    if orientation == LABELWISE:
        Y = sp.csr_matrix(Y.T)
    Y.sort_indices()
    Y.eliminate_zeros()
    return Y


def prediction_matrix(P: PredictionFile, shape):
    """Predictions as a sparse matrix in point-by-label layout."""
    M = P.to_csr()
    if P.orientation == LABELWISE:
        M = sp.csr_matrix(M.T)
    if M.shape != shape:
        raise ValueError(f"prediction shape {M.shape} does not match truth {shape}")
    return M


def _per_row(metric, y, yh, k, dim, p):
    if metric == "xmad":
        return xmad_at_k(y, yh, k, dim)
    if metric == "xrmse":
        return xrmse_at_k(y, yh, k, dim)
    if metric == "mad":
        return mad(y, yh, dim)
    if metric == "rmse":
        return rmse(y, yh, dim)
    if metric == "wp":
        return wp_at_k(y, yh, k, dim)
    if metric == "wpregret":
        return wp_regret_at_k(y, yh, k, dim)
    if metric == "ndcg":
        return ndcg_at_k(y, yh, k, dim)
    if metric == "tau":
        return tau_at_k(y, yh, k, dim)
    if metric == "psp":
        return psp_at_k(y, yh, k, p, dim)
    raise ValueError(f"unknown metric {metric!r}")


def evaluate_metric(metric, Y, P: PredictionFile, k, propensity=None) -> float:
    """One metric over a whole prediction file.

    Pointwise: mean over test points; PSP is the ratio of summed achieved to
    summed ideal gains. Labelwise: mean over labels with a positive test point.
    """
    metric = metric.lower()
    if metric == "auprc":
        return auprc_curve(Y, prediction_matrix(P, Y.shape))[1]
    T = _truth_rows(Y, P.orientation)
    if T.shape[0] != P.n_rows or T.shape[1] != P.n_cols:
        raise ValueError(f"truth has shape {T.shape} in this orientation but predictions "
                         f"are {P.n_rows}x{P.n_cols}")
    dim = T.shape[1]
    if metric == "psp" and P.orientation == POINTWISE:
        if propensity is None:
            raise ValueError("PSP needs label propensities computed from training label counts")
        inv = _inv_prop(propensity, dim)
    vals, got_sum, ideal_sum = [], 0.0, 0.0
    for r in range(T.shape[0]):
        lo, hi = T.indptr[r], T.indptr[r + 1]
        y = Row(T.indices[lo:hi].astype(np.int64), T.data[lo:hi], dim)
        if P.orientation == LABELWISE and y.idx.size == 0:
            continue
        yh = _row_from_file(P.rows[r], dim)
        if metric == "psp" and P.orientation == POINTWISE:
            g, i = _wp_parts(y, yh, k, inv)
            got_sum += g
            ideal_sum += i
            continue
        vals.append(_per_row(metric, y, yh, k, dim, None))
    if metric == "psp" and P.orientation == POINTWISE:
        return got_sum / ideal_sum if ideal_sum > 0 else 0.0
    return float(np.mean(vals)) if vals else 0.0


def labelwise_variant(metric, Y, P: PredictionFile, k, propensity=None) -> float:
    """Metric with the roles of points and labels interchanged, macro-averaged."""
    if P.orientation != LABELWISE:
        raise ValueError("labelwise_variant needs a labelwise prediction file")
    return evaluate_metric(metric, Y, P, k, propensity)


def lemma1_violations(Y, P: PredictionFile, k, tol=1e-12) -> int:
    """Rows where ``0 <= WP-regret@k <= 2 XMAD@2k`` fails."""
    T = _truth_rows(Y, P.orientation)
    dim = T.shape[1]
    bad = 0
    for r in range(T.shape[0]):
        lo, hi = T.indptr[r], T.indptr[r + 1]
        y = Row(T.indices[lo:hi].astype(np.int64), T.data[lo:hi], dim)
        yh = _row_from_file(P.rows[r], dim)
        reg = wp_regret_at_k(y, yh, k, dim)
        if reg < -tol or reg > 2 * xmad_at_k(y, yh, 2 * k, dim) + tol:
            bad += 1
    return bad


# -- report ----------------------------------------------------------------------------

@dataclass
class MetricReport:
    entries: list = field(default_factory=list)  # (metric, k, orientation, value)

    def add(self, metric, k, orientation, value):
        scale = 100.0 if metric in PERCENT else 1.0
        self.entries.append((metric, k, orientation, value * scale))

    def get(self, metric, k, orientation=POINTWISE):
        for m, kk, o, v in self.entries:
            if m == metric and kk == k and o == orientation:
                return v
        raise KeyError((metric, k, orientation))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("metric,k,orientation,value\n")
        for m, k, o, v in self.entries:
            buf.write(f"{m},{k},{o},{v:.6f}\n")
        return buf.getvalue()

    def to_table(self) -> str:
        suffix = {POINTWISE: "-p", LABELWISE: "-l"}
        names = [f"{m.upper()}{suffix[o]}@{k}" for m, k, o, _ in self.entries]
        width = max((len(n) for n in names), default=6)
        return "\n".join(f"{n:<{width}}  {v:>12.4f}" for n, (_, _, _, v) in zip(names, self.entries))


def evaluate(Y, P: PredictionFile, metrics, ks, propensity=None) -> MetricReport:
    rep = MetricReport()
    for m in metrics:
        m = m.lower()
        if m not in METRICS:
            raise ValueError(f"unknown metric {m!r}; choose from {', '.join(METRICS)}")
        for k in ks:
            rep.add(m, k, P.orientation, evaluate_metric(m, Y, P, k, propensity))
    return rep
