"""Pure numpy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` operation for operation. Regression trees are
bit-identical across the two backends for the same seed; the iterative
solvers agree to rounding.
"""

import numpy as np

MASK64 = (1 << 64) - 1
INV53 = 1.0 / 9007199254740992.0


class SplitMix64:
    def __init__(self, seed):
        self.state = int(seed) & MASK64

    def next(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, n):
        return int(float(self.next() >> 11) * INV53 * n)


def _sample_features(rng, p, mtry):
    feats = list(range(p))
    for k in range(mtry):
        j = k + rng.below(p - k)
        feats[k], feats[j] = feats[j], feats[k]
    return sorted(feats[:mtry])


def build_tree(X, y, samples, mtry, min_leaf, max_depth, seed):
    """Grow one variance-reduction regression tree on ``samples`` rows of ``X``.

    Returns ``(feature, threshold, left, right, value, n_node, importance)``;
    ``feature == -1`` marks a leaf. ``max_depth < 0`` means unlimited.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    samples = np.array(samples, dtype=np.intp)
    n_features = X.shape[1]
    mtry = max(1, min(int(mtry), n_features))
    rng = SplitMix64(seed)

    feature, threshold, left, right, value, n_node = [], [], [], [], [], []
    importance = np.zeros(n_features)

    def new_node(m):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        n_node.append(m)
        return len(feature) - 1

    stack = [(new_node(len(samples)), 0, len(samples), 0)]
    while stack:
        node, start, end, depth = stack.pop()
        seg = samples[start:end]
        m = end - start
        ys = y[seg]
        total = float(np.cumsum(ys)[-1]) if m else 0.0
        if m == 0 or np.all(ys == ys[0]):
            value[node] = float(ys[0]) if m else 0.0
            continue
        value[node] = total / m
        if m < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue

        best_proxy = -np.inf
        best_f, best_thr = -1, 0.0
        nl = np.arange(1, m, dtype=np.float64)
        nr = m - nl
        size_ok = (nl >= min_leaf) & (nr >= min_leaf)
        for f in _sample_features(rng, n_features, mtry):
            xv = X[seg, f]
            order = np.argsort(xv, kind="stable")
            xs = xv[order]
            sum_l = np.cumsum(ys[order])[:-1]
            sum_r = total - sum_l
            valid = size_ok & (xs[:-1] < xs[1:])
            if not valid.any():
                continue
            proxy = sum_l * sum_l / nl + sum_r * sum_r / nr
            proxy = np.where(valid, proxy, -np.inf)
            i = int(np.argmax(proxy))
            if proxy[i] > best_proxy:
                best_proxy = float(proxy[i])
                best_f = f
                thr = 0.5 * (xs[i] + xs[i + 1])
                if thr >= xs[i + 1]:
                    thr = xs[i]
                best_thr = float(thr)

        if best_f < 0:
            continue
        gain = best_proxy - total * total / m
        importance[best_f] += max(gain, 0.0)
        go_left = X[seg, best_f] <= best_thr
        n_left = int(go_left.sum())
        samples[start:end] = np.concatenate([seg[go_left], seg[~go_left]])
        li = new_node(n_left)
        ri = new_node(m - n_left)
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = li
        right[node] = ri
        stack.append((ri, start + n_left, end, depth + 1))
        stack.append((li, start, start + n_left, depth + 1))

    return (
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=np.float64),
        np.array(n_node, dtype=np.int64),
        importance,
    )


def predict_tree(feature, threshold, left, right, value, X):
    X = np.asarray(X, dtype=np.float64)
    node = np.zeros(X.shape[0], dtype=np.int64)
    active = np.flatnonzero(feature[node] >= 0)
    while active.size:
        nd = node[active]
        go_left = X[active, feature[nd]] <= threshold[nd]
        node[active] = np.where(go_left, left[nd], right[nd])
        active = active[feature[node[active]] >= 0]
    return value[node]


def svr_smo(K, z, C, eps, tol, max_iter):
    """Solve the linear-kernel epsilon-SVR dual with second-order SMO.

    Works on the 2n-variable form: variable t < n carries label +1 and linear
    term ``eps - z[t]``; variable t >= n carries label -1 and ``eps + z[t-n]``.
    Returns ``(beta, b, n_iter, converged)`` with ``beta = a[:n] - a[n:]``.
    """
    K = np.asarray(K, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    ell = 2 * n
    sign = np.concatenate([np.ones(n), -np.ones(n)])
    alpha = np.zeros(ell)
    grad = np.concatenate([eps - z, eps + z])
    qd = np.concatenate([np.diag(K), np.diag(K)])
    tau = 1e-12

    def qcol(i):
        k = K[i % n]
        return sign[i] * sign * np.concatenate([k, k])

    n_iter = 0
    converged = False
    while n_iter < max_iter:
        # working set selection (second order)
        up = np.where(sign > 0, alpha < C, alpha > 0)
        low = np.where(sign > 0, alpha > 0, alpha < C)
        mgy = -sign * grad
        gmax = -np.inf
        i = -1
        if up.any():
            cand = np.where(up, mgy, -np.inf)
            i = int(np.argmax(cand))
            gmax = cand[i]
        gmax2 = np.max(np.where(low, -mgy, -np.inf)) if low.any() else -np.inf
        if gmax + gmax2 < tol or i < 0:
            converged = True
            break
        qi = qcol(i)
        b_it = gmax + sign * grad  # gmax - mgy
        a_it = qd[i] + qd - 2.0 * sign[i] * sign * qi
        a_it = np.where(a_it > 0, a_it, tau)
        obj = np.where(low & (b_it > 0), -(b_it * b_it) / a_it, np.inf)
        j = int(np.argmin(obj))
        if not np.isfinite(obj[j]):
            converged = True
            break
        qj = qcol(j)
        n_iter += 1

        old_ai, old_aj = alpha[i], alpha[j]
        if sign[i] != sign[j]:
            quad = qd[i] + qd[j] + 2.0 * qi[j]
            if quad <= 0:
                quad = tau
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            ai = alpha[i] + delta
            aj = alpha[j] + delta
            if diff > 0:
                if aj < 0:
                    aj = 0.0
                    ai = diff
            else:
                if ai < 0:
                    ai = 0.0
                    aj = -diff
            if diff > 0:
                if ai > C:
                    ai = C
                    aj = C - diff
            else:
                if aj > C:
                    aj = C
                    ai = C + diff
        else:
            quad = qd[i] + qd[j] - 2.0 * qi[j]
            if quad <= 0:
                quad = tau
            delta = (grad[i] - grad[j]) / quad
            total = alpha[i] + alpha[j]
            ai = alpha[i] - delta
            aj = alpha[j] + delta
            if total > C:
                if ai > C:
                    ai = C
                    aj = total - C
            else:
                if aj < 0:
                    aj = 0.0
                    ai = total
            if total > C:
                if aj > C:
                    aj = C
                    ai = total - C
            else:
                if ai < 0:
                    ai = 0.0
                    aj = total
        alpha[i], alpha[j] = ai, aj
        dai, daj = ai - old_ai, aj - old_aj
        grad += qi * dai + qj * daj

    b = -_rho(alpha, grad, sign, C)
    beta = alpha[:n] - alpha[n:]
    return beta, b, n_iter, converged


def _rho(alpha, grad, sign, C):
    ub, lb = np.inf, -np.inf
    sum_free, n_free = 0.0, 0
    for t in range(alpha.shape[0]):
        yg = sign[t] * grad[t]
        if alpha[t] >= C:
            if sign[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if sign[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            n_free += 1
            sum_free += yg
    if n_free > 0:
        return sum_free / n_free
    return (ub + lb) / 2.0


def enet_cd(Xf, y, beta, lam, gamma, xsq, max_iter, tol):
    """Cyclic coordinate descent for centered data.

    Minimizes ``(1/N) sum 0.5 r^2 + lam * ((1-gamma)/2 |b|_2^2 + gamma |b|_1)``
    with ``r = y - Xf @ b``. ``xsq[j]`` is ``mean(Xf[:, j] ** 2)``. A sweep
    ends the loop when every update moved the fit by less than ``tol``, i.e.
    ``max_j xsq[j] * db_j**2 < tol``. Returns
    ``(beta, n_sweeps, max_delta, objective_per_sweep)``.
    """
    Xf = np.asarray(Xf, dtype=np.float64)
    n, p = Xf.shape
    beta = np.array(beta, dtype=np.float64)
    r = y - Xf @ beta
    l1 = lam * gamma
    l2 = lam * (1.0 - gamma)
    history = []
    max_delta = np.inf
    sweeps = 0
    while sweeps < max_iter:
        max_delta = 0.0
        for j in range(p):
            denom = xsq[j] + l2
            old = beta[j]
            if denom <= 0.0:
                new = 0.0
            else:
                rho = float(Xf[:, j] @ r) / n + xsq[j] * old
                if rho > l1:
                    new = (rho - l1) / denom
                elif rho < -l1:
                    new = (rho + l1) / denom
                else:
                    new = 0.0
            d = new - old
            if d != 0.0:
                r -= d * Xf[:, j]
                beta[j] = new
                if xsq[j] * d * d > max_delta:
                    max_delta = xsq[j] * d * d
        sweeps += 1
        history.append(0.5 * float(r @ r) / n + l2 * 0.5 * float(beta @ beta) + l1 * float(np.abs(beta).sum()))
        if max_delta < tol:
            break
    return beta, sweeps, max_delta, np.array(history)
