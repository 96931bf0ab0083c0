"""Pure-Python implementations of the hot kernels.

Every function here has a compiled twin in ``_ckernels.pyx`` with the same
signature and the same arithmetic; :mod:`xreg.kernels` picks one at import.
"""
import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(state):
    """Advance a splitmix64 state; returns ``(new_state, output)``."""
    state = (state + _GOLDEN) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def shuffle_inplace(arr, state):
    """Fisher-Yates shuffle driven by splitmix64. Returns the new state."""
    for i in range(len(arr) - 1, 0, -1):
        state, r = splitmix64(state)
        j = r % (i + 1)
        arr[i], arr[j] = arr[j], arr[i]
    return state


def sparse_dot(ai, av, bi, bv):
    """Merge-style inner product of two index-sorted sparse vectors."""
    i = j = 0
    na, nb = len(ai), len(bi)
    total = 0.0
    while i < na and j < nb:
        x, y = ai[i], bi[j]
        if x == y:
            total += av[i] * bv[j]
            i += 1
            j += 1
        elif x < y:
            i += 1
        else:
            j += 1
    return total


def rows_dot_dense(indptr, indices, data, rows, vec):
    """``out[r] = X[rows[r]] . vec`` for a CSR matrix X given by its arrays."""
    rows = np.asarray(rows, dtype=np.int64)
    starts = indptr[rows]
    lens = indptr[rows + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return np.zeros(len(rows), dtype=np.float64)
    offsets = np.repeat(starts - (np.cumsum(lens) - lens), lens) + np.arange(total)
    prod = data[offsets] * vec[indices[offsets]]
    owner = np.repeat(np.arange(len(rows)), lens)
    return np.bincount(owner, weights=prod, minlength=len(rows))


def _log_loss(t):
    # log(1 + exp(-t)), stable for either sign
    if t >= 0:
        return math.log1p(math.exp(-t))
    return -t + math.log1p(math.exp(t))


def dual_cd_logistic(indptr, indices, data, rows, pos_cost, neg_cost,
                     n_features, tol, max_iter, seed, trace=False):
    """Dual coordinate descent for instance-weighted L2 logistic regression.

    Minimises ``0.5*|w|^2 + sum_j C_j log(1 + exp(-y_j w.x_j))`` where every
    row contributes a positive copy (``C_j = pos_cost``) and a negative copy
    (``C_j = neg_cost``); copies with zero cost are dropped.

    Returns ``(w, n_epochs, gmax, trace)``; with ``trace=True`` the last item
    holds one ``(primal, dual)`` objective pair per epoch.
    """
    ex_row, ex_y, ex_c = [], [], []
    for r in range(len(rows)):
        if pos_cost[r] > 0.0:
            ex_row.append(rows[r])
            ex_y.append(1.0)
            ex_c.append(float(pos_cost[r]))
        if neg_cost[r] > 0.0:
            ex_row.append(rows[r])
            ex_y.append(-1.0)
            ex_c.append(float(neg_cost[r]))
    m = len(ex_row)
    objective_trace = []
    if m == 0:
        return np.zeros(n_features, dtype=np.float64), 0, 0.0, objective_trace

    # plain lists: element access on numpy arrays is far slower from Python
    w = [0.0] * int(n_features)
    x_idx, x_val, xsq = [], [], []
    for row in ex_row:
        lo, hi = int(indptr[row]), int(indptr[row + 1])
        vals = data[lo:hi].tolist()
        x_idx.append(indices[lo:hi].tolist())
        x_val.append(vals)
        sq = 0.0
        for v in vals:
            sq += v * v
        xsq.append(sq)

    alpha = [0.0] * (2 * m)
    for j in range(m):
        c = ex_c[j]
        alpha[2 * j] = min(0.001 * c, 1e-8)
        alpha[2 * j + 1] = c - alpha[2 * j]
        idx = x_idx[j]
        vals = x_val[j]
        coef = ex_y[j] * alpha[2 * j]
        for p in range(len(idx)):
            w[idx[p]] += coef * vals[p]

    order = list(range(m))
    state = int(seed) & _MASK64
    max_inner = 100
    inner_eps = 1e-2
    inner_eps_min = min(1e-8, tol)
    eta = 0.1
    n_epochs = 0
    gmax = 0.0
    while n_epochs < max_iter:
        state = shuffle_inplace(order, state)
        newton_iter = 0
        gmax = 0.0
        for j in order:
            yj = ex_y[j]
            c = ex_c[j]
            idx = x_idx[j]
            vals = x_val[j]
            a = xsq[j]
            wx = 0.0
            for p in range(len(idx)):
                wx += w[idx[p]] * vals[p]
            b = yj * wx
            i1, i2, sign = 2 * j, 2 * j + 1, 1.0
            if 0.5 * a * (alpha[i2] - alpha[i1]) + b < 0:
                i1, i2, sign = 2 * j + 1, 2 * j, -1.0
            alpha_old = alpha[i1]
            z = alpha_old
            if c - z < 0.5 * c:
                z = 0.1 * z
            gp = a * (z - alpha_old) + sign * b + math.log(z / (c - z))
            gmax = max(gmax, abs(gp))
            inner = 0
            while inner <= max_inner:
                if abs(gp) < inner_eps:
                    break
                gpp = a + c / (c - z) / z
                tmpz = z - gp / gpp
                if tmpz <= 0:
                    z *= eta
                else:
                    z = tmpz
                gp = a * (z - alpha_old) + sign * b + math.log(z / (c - z))
                newton_iter += 1
                inner += 1
            if inner > 0:
                alpha[i1] = z
                alpha[i2] = c - z
                coef = sign * (z - alpha_old) * yj
                for p in range(len(idx)):
                    w[idx[p]] += coef * vals[p]
        n_epochs += 1
        if trace:
            obj = 0.0
            for v in w:
                obj += v * v
            obj *= 0.5
            for j in range(m):
                wx = 0.0
                idx = x_idx[j]
                vals = x_val[j]
                for p in range(len(idx)):
                    wx += w[idx[p]] * vals[p]
                obj += ex_c[j] * _log_loss(ex_y[j] * wx)
            dual = 0.0
            for v in w:
                dual += v * v
            dual *= 0.5
            for j in range(m):
                c = ex_c[j]
                a1, a2 = alpha[2 * j], alpha[2 * j + 1]
                dual += a1 * math.log(a1) + a2 * math.log(a2) - c * math.log(c)
            objective_trace.append((obj, dual))
        if gmax < tol:
            break
        if newton_iter <= m // 10:
            inner_eps = max(inner_eps_min, 0.1 * inner_eps)
    return np.array(w, dtype=np.float64), n_epochs, gmax, objective_trace
