import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from xreg.io import LABELWISE, POINTWISE, PredictionFile
from xreg.metrics import (MetricReport, auprc_area, auprc_curve, evaluate, evaluate_metric,
                          labelwise_variant, lemma1_violations, mad, ndcg_at_k, propensities,
                          psp_at_k, regression_error_at_k, rmse, tau_at_k, wp_at_k,
                          wp_regret_at_k, xmad_at_k, xmad_by_sort, xrmse_at_k, zero_corruption)

Y4 = [0.9, 0.1, 0.5, 0.0]
H4 = [0.5, 0.2, 0.5, 0.3]


def test_xmad_example():
    assert xmad_at_k(Y4, H4, 2) == pytest.approx(0.35, abs=1e-15)
    assert xmad_at_k(Y4, Y4, 2) == 0.0


def test_xrmse_example():
    assert xrmse_at_k(Y4, H4, 2) == pytest.approx(math.sqrt(0.125), abs=1e-12)
    assert xrmse_at_k(Y4, H4, 2) == pytest.approx(0.353553, abs=1e-6)


def test_wp_and_regret_example():
    y, yh = [0.9, 0.1, 0.5], [0.2, 0.8, 0.6]
    assert wp_at_k(y, yh, 2) == pytest.approx(0.3, abs=1e-15)
    assert wp_regret_at_k(y, yh, 2) == pytest.approx(0.4, abs=1e-15)
    assert wp_regret_at_k(y, y, 2) == 0.0
    # k capped at L=3: 2*(0.7+0.7+0.1)/3
    assert 2 * xmad_at_k(y, yh, 4) == pytest.approx(1.0, abs=1e-15)


def test_missing_slots_count_as_zero():
    # one non-zero error, k=3 over L=4 -> 0.3/3
    assert xmad_at_k([0, 0, 0, 0.3], [0, 0, 0, 0], 3) == pytest.approx(0.1)
    # k larger than L uses L
    assert xmad_at_k([1.0, 0.0], [0.0, 0.0], 10) == pytest.approx(0.5)
    assert wp_at_k({0: 1.0}, {0: 0.7}, 5, dim=3) == pytest.approx(1 / 3)


def test_mad_rmse_sum_over_labels():
    assert mad(Y4, H4) == pytest.approx(0.8)
    assert rmse(Y4, H4) == pytest.approx(math.sqrt(0.16 + 0.01 + 0.09))


def test_propensity_examples():
    p = propensities([0, 1000], 5000)
    assert p[0] < p[1]
    assert np.all((p > 0) & (p <= 1))
    c = (math.log(5000) - 1) * 2.5 ** 0.55
    assert p[0] == pytest.approx(1 / (1 + c * 1.5 ** -0.55), rel=1e-14)


def test_psp_examples():
    y, yh = [0.9, 0.1, 0.5, 0.0], [0.2, 0.8, 0.6, 0.1]
    assert psp_at_k(y, yh, 2, np.ones(4)) == pytest.approx(wp_at_k(y, yh, 2) / 0.7)
    assert psp_at_k({7: 1.0}, {7: 0.9, 2: 0.5}, 1, propensities(np.r_[np.full(7, 50), 0], 100),
                    dim=8) == 1.0


def test_tau_examples():
    y = [3.0, 2.0, 1.0]
    assert tau_at_k(y, [0.9, 0.5, 0.1], 3) == 1.0
    assert tau_at_k(y, [0.1, 0.5, 0.9], 3) == -1.0
    # predicted order [1, 0, 2]
    assert tau_at_k(y, [0.5, 0.9, 0.1], 3) == pytest.approx(1 / 3)
    assert tau_at_k({0: 1.0}, {0: 0.4}, 3, dim=4, return_flag=True) == (0.0, False)


def test_ndcg():
    y = [3.0, 2.0, 1.0]
    assert ndcg_at_k(y, [0.9, 0.5, 0.1], 3) == pytest.approx(1.0)
    want = (2 / math.log2(2) + 3 / math.log2(3) + 1 / math.log2(4)) / (
        3 / math.log2(2) + 2 / math.log2(3) + 1 / math.log2(4))
    assert ndcg_at_k(y, [0.5, 0.9, 0.1], 3) == pytest.approx(want)


def test_regression_error_over_predicted_top():
    y, yh = [0.9, 0.1, 0.5], [0.2, 0.8, 0.6]
    assert regression_error_at_k(y, yh, 2) == pytest.approx((0.7 + 0.1) / 2)


@pytest.mark.parametrize("k", [0, -1])
def test_bad_k(k):
    with pytest.raises(ValueError):
        xmad_at_k(Y4, H4, k)


def random_pair(rng, L=None):
    L = L or int(rng.integers(2, 51))
    y = rng.uniform(size=L) * (rng.uniform(size=L) < 0.4)
    yh = rng.uniform(size=L) * (rng.uniform(size=L) < 0.6)
    return y, yh


def test_lemma1_and_chain(rng):
    for _ in range(10000):
        y, yh = random_pair(rng)
        k = int(rng.integers(1, 6))
        reg = wp_regret_at_k(y, yh, k)
        x2 = xmad_at_k(y, yh, 2 * k)
        assert -1e-12 <= reg <= 2 * x2 + 1e-12
        rerr = regression_error_at_k(y, yh, k)
        assert max(reg, rerr) / 2 <= x2 + 1e-12
        assert x2 <= xrmse_at_k(y, yh, 2 * k) + 1e-12


def test_selection_equals_sort(rng):
    for _ in range(1000):
        y, yh = random_pair(rng)
        k = int(rng.integers(1, 60))
        assert xmad_at_k(y, yh, k) == pytest.approx(xmad_by_sort(y, yh, k), rel=1e-12, abs=1e-15)


def test_xmad_non_increasing_in_k(rng):
    for _ in range(300):
        y, yh = random_pair(rng)
        vals = [xmad_at_k(y, yh, k) for k in range(1, y.size + 1)]
        assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))
        assert vals[-1] <= mad(y, yh) / y.size + 1e-15


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 20).flatmap(lambda L: st.tuples(
    st.lists(st.floats(0, 1), min_size=L, max_size=L),
    st.lists(st.floats(0, 1), min_size=L, max_size=L),
    st.permutations(range(L)), st.integers(1, 6))))
def test_permutation_invariance(case):
    y, yh, perm, k = case
    y, yh, perm = np.array(y), np.array(yh), np.array(perm)
    # a relabelling keeps ties in the same relative order only if ties are absent
    if len(set(yh[yh > 0])) < (yh > 0).sum() or len(set(y[y > 0])) < (y > 0).sum():
        return
    for f in (xmad_at_k, xrmse_at_k, wp_at_k, wp_regret_at_k, ndcg_at_k, tau_at_k):
        assert f(y[perm], yh[perm], k) == pytest.approx(f(y, yh, k), abs=1e-12)
    assert mad(y[perm], yh[perm]) == pytest.approx(mad(y, yh))


def test_auprc_threshold_edges():
    Y = sp.csr_matrix(np.array([[1.0, 0.0, 0.5], [0.0, 0.2, 0.0]]))
    P = sp.csr_matrix(np.array([[0.9, 0.3, 0.4], [0.1, 0.2, 0.05]]))
    pts, _ = auprc_curve(Y, P, thresholds=[0.0, 1.0])
    assert len(pts) == 1
    prec, rec = pts[0]
    assert rec == pytest.approx(1.0)
    assert prec == pytest.approx((1.0 + 0.5 + 0.2) / 6)


def test_auprc_area_hand_example():
    # points (precision, recall): anchored at recall 0 with the first precision
    assert auprc_area([(1.0, 0.5), (0.5, 1.0)]) == pytest.approx(0.5 * 1.0 + 0.5 * 0.75)


def test_exact_scores_dominate_zero_corruption(rng):
    for _ in range(30):
        N, L = 12, 9
        Y = sp.csr_matrix(rng.uniform(size=(N, L)) * (rng.uniform(size=(N, L)) < 0.3))
        rows = []
        for i in range(N):
            y = Y[i].toarray().ravel()
            nz = np.flatnonzero(y)
            order = nz[np.lexsort((nz, -y[nz]))]
            rows.append([(int(j), float(y[j])) for j in order])
        P = PredictionFile(rows, L, POINTWISE)
        Z = zero_corruption(P)
        for r, z in zip(P.rows, Z.rows):
            assert [j for j, _ in r] == [j for j, _ in z]
        exact = auprc_curve(Y, P.to_csr())[1]
        corrupted = auprc_curve(Y, Z.to_csr())[1]
        assert exact >= corrupted - 1e-12


def test_labelwise_two_by_two():
    Y = sp.csr_matrix(np.array([[1.0, 0.0], [0.5, 1.0]]))  # points x labels
    P = PredictionFile([[(1, 0.7), (0, 0.6)], [(0, 0.9), (1, 0.2)]], 2, LABELWISE)
    # label 0 ranks point 1 first (0.5); label 1 ranks point 0 first (0.0)
    assert labelwise_variant("wp", Y, P, 1) == pytest.approx(0.25)


def test_labelwise_equals_pointwise_on_transpose(rng):
    Y = sp.csr_matrix(rng.uniform(size=(7, 5)) * (rng.uniform(size=(7, 5)) < 0.5))
    S = rng.uniform(size=(7, 5))
    rows_l = []
    for l in range(5):
        order = np.argsort(-S[:, l], kind="stable")
        rows_l.append([(int(i), float(S[i, l])) for i in order])
    P_l = PredictionFile(rows_l, 7, LABELWISE)
    P_p = PredictionFile(rows_l, 7, POINTWISE)
    Yt = sp.csr_matrix(Y.T)
    keep = np.flatnonzero(np.diff(Yt.indptr) > 0)
    for m in ("wp", "xmad", "ndcg"):
        per_label = [evaluate_metric(m, Yt[[l]], PredictionFile([rows_l[l]], 7, POINTWISE), 3)
                     for l in keep]
        assert labelwise_variant(m, Y, P_l, 3) == pytest.approx(np.mean(per_label))
    assert evaluate_metric("wp", Yt, P_p, 3) * 5 == pytest.approx(
        sum(evaluate_metric("wp", Yt[[l]], PredictionFile([rows_l[l]], 7, POINTWISE), 3)
            for l in range(5)))


def test_labelwise_skips_labels_without_positives():
    Y = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]))
    P = PredictionFile([[(0, 0.9)], [(1, 0.9)]], 2, LABELWISE)
    assert labelwise_variant("wp", Y, P, 1) == 1.0
    with pytest.raises(ValueError):
        labelwise_variant("wp", Y, PredictionFile([[], []], 2, POINTWISE), 1)


def test_dataset_psp_is_ratio_of_sums():
    Y = sp.csr_matrix(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 1.0]]))
    P = PredictionFile([[(1, 0.9)], [(1, 0.9)]], 3, POINTWISE)
    p = np.array([0.5, 0.5, 0.5])
    # achieved 0 + 2, ideal 2 + 2 at k=1
    assert evaluate_metric("psp", Y, P, 1, p) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        evaluate_metric("psp", Y, P, 1)


def test_lemma1_checker_on_files(rng):
    Y = sp.csr_matrix(rng.uniform(size=(20, 10)) * (rng.uniform(size=(20, 10)) < 0.4))
    rows = [[(int(j), float(v)) for j, v in enumerate(rng.uniform(size=10))] for _ in range(20)]
    rows = [sorted(r, key=lambda e: -e[1]) for r in rows]
    assert lemma1_violations(Y, PredictionFile(rows, 10, POINTWISE), 3) == 0


def test_report_formats():
    Y = sp.csr_matrix(np.array([[0.9, 0.1, 0.5]]))
    P = PredictionFile([[(1, 0.8), (2, 0.6), (0, 0.2)]], 3, POINTWISE)
    rep = evaluate(Y, P, ["xmad", "wp"], [1, 2])
    assert rep.get("wp", 2) == pytest.approx(30.0)
    csv = rep.to_csv().splitlines()
    assert csv[0] == "metric,k,orientation,value"
    assert "wp,2,pointwise,30.000000" in csv
    assert "WP-p@2" in rep.to_table()
    with pytest.raises(ValueError):
        evaluate(Y, P, ["f1"], [1])
    assert isinstance(rep, MetricReport)
