# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: regression tree growth/prediction, epsilon-SVR SMO, elastic-net CD.

Operation order matches ``_fallback.py`` so trees come out bit-identical.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY
from libc.stdlib cimport malloc, free
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef double INV53 = 1.0 / 9007199254740992.0


cdef inline uint64_t splitmix_next(uint64_t* state) noexcept nogil:
    state[0] += <uint64_t>0x9E3779B97F4A7C15
    cdef uint64_t z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline Py_ssize_t splitmix_below(uint64_t* state, Py_ssize_t n) noexcept nogil:
    return <Py_ssize_t>((<double>(splitmix_next(state) >> 11)) * INV53 * n)


cdef void insertion_sort_int(Py_ssize_t* a, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j, v
    for i in range(1, n):
        v = a[i]
        j = i - 1
        while j >= 0 and a[j] > v:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = v


cdef void merge_sort(double* key, Py_ssize_t* idx, double* tkey, Py_ssize_t* tidx,
                     Py_ssize_t n) noexcept nogil:
    """Stable bottom-up merge sort of (key, idx) pairs by key."""
    cdef Py_ssize_t width = 1, lo, mid, hi, a, b, k
    cdef double* src_k = key
    cdef Py_ssize_t* src_i = idx
    cdef double* dst_k = tkey
    cdef Py_ssize_t* dst_i = tidx
    cdef double* swk
    cdef Py_ssize_t* swi
    while width < n:
        lo = 0
        while lo < n:
            mid = lo + width
            if mid > n:
                mid = n
            hi = lo + 2 * width
            if hi > n:
                hi = n
            a = lo
            b = mid
            k = lo
            while a < mid and b < hi:
                if src_k[b] < src_k[a]:
                    dst_k[k] = src_k[b]
                    dst_i[k] = src_i[b]
                    b += 1
                else:
                    dst_k[k] = src_k[a]
                    dst_i[k] = src_i[a]
                    a += 1
                k += 1
            while a < mid:
                dst_k[k] = src_k[a]
                dst_i[k] = src_i[a]
                a += 1
                k += 1
            while b < hi:
                dst_k[k] = src_k[b]
                dst_i[k] = src_i[b]
                b += 1
                k += 1
            lo = hi
        swk = src_k; src_k = dst_k; dst_k = swk
        swi = src_i; src_i = dst_i; dst_i = swi
        width *= 2
    if src_k != key:
        for k in range(n):
            key[k] = src_k[k]
            idx[k] = src_i[k]


cdef Py_ssize_t _grow(const double[:, ::1] X, const double[::1] y, Py_ssize_t* samples,
                      Py_ssize_t n_samples, Py_ssize_t n_features, Py_ssize_t mtry,
                      Py_ssize_t min_leaf, Py_ssize_t max_depth, uint64_t seed,
                      int64_t* feature, double* threshold, int64_t* left, int64_t* right,
                      double* value, int64_t* n_node, double* importance) noexcept nogil:
    cdef uint64_t rng = seed
    cdef Py_ssize_t cap = 2 * n_samples + 1
    cdef Py_ssize_t* st_node = <Py_ssize_t*>malloc(cap * sizeof(Py_ssize_t))
    cdef Py_ssize_t* st_start = <Py_ssize_t*>malloc(cap * sizeof(Py_ssize_t))
    cdef Py_ssize_t* st_end = <Py_ssize_t*>malloc(cap * sizeof(Py_ssize_t))
    cdef Py_ssize_t* st_depth = <Py_ssize_t*>malloc(cap * sizeof(Py_ssize_t))
    cdef Py_ssize_t* feats = <Py_ssize_t*>malloc((n_features + 1) * sizeof(Py_ssize_t))
    cdef double* key = <double*>malloc((n_samples + 1) * sizeof(double))
    cdef double* tkey = <double*>malloc((n_samples + 1) * sizeof(double))
    cdef Py_ssize_t* sidx = <Py_ssize_t*>malloc((n_samples + 1) * sizeof(Py_ssize_t))
    cdef Py_ssize_t* tidx = <Py_ssize_t*>malloc((n_samples + 1) * sizeof(Py_ssize_t))
    cdef Py_ssize_t* buf = <Py_ssize_t*>malloc((n_samples + 1) * sizeof(Py_ssize_t))

    cdef Py_ssize_t top = 0, n_nodes = 0
    cdef Py_ssize_t node, start, end, depth, m, i, k, j, f, fi, s, best_f, n_left, tmp
    cdef Py_ssize_t li, ri, nl_i
    cdef double total, y0, best_proxy, best_thr, sum_l, sum_r, nl, nr, proxy, thr, gain
    cdef bint constant

    # root
    feature[0] = -1; threshold[0] = 0.0; left[0] = -1; right[0] = -1
    value[0] = 0.0; n_node[0] = n_samples
    n_nodes = 1
    st_node[0] = 0; st_start[0] = 0; st_end[0] = n_samples; st_depth[0] = 0
    top = 1

    while top > 0:
        top -= 1
        node = st_node[top]; start = st_start[top]; end = st_end[top]; depth = st_depth[top]
        m = end - start
        if m == 0:
            value[node] = 0.0
            continue
        total = 0.0
        y0 = y[samples[start]]
        constant = True
        for k in range(start, end):
            total = total + y[samples[k]]
            if y[samples[k]] != y0:
                constant = False
        if constant:
            value[node] = y0
            continue
        value[node] = total / m
        if m < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue

        # partial Fisher-Yates draw of mtry features, then ascending order
        for k in range(n_features):
            feats[k] = k
        for k in range(mtry):
            j = k + splitmix_below(&rng, n_features - k)
            tmp = feats[k]; feats[k] = feats[j]; feats[j] = tmp
        insertion_sort_int(feats, mtry)

        best_proxy = -INFINITY
        best_f = -1
        best_thr = 0.0
        for fi in range(mtry):
            f = feats[fi]
            for k in range(m):
                s = samples[start + k]
                key[k] = X[s, f]
                sidx[k] = s
            merge_sort(key, sidx, tkey, tidx, m)
            sum_l = 0.0
            for i in range(m - 1):
                sum_l = sum_l + y[sidx[i]]
                nl_i = i + 1
                if nl_i < min_leaf:
                    continue
                if m - nl_i < min_leaf:
                    break
                if not (key[i] < key[i + 1]):
                    continue
                nl = <double>nl_i
                nr = <double>(m - nl_i)
                sum_r = total - sum_l
                proxy = sum_l * sum_l / nl + sum_r * sum_r / nr
                if proxy > best_proxy:
                    best_proxy = proxy
                    best_f = f
                    thr = 0.5 * (key[i] + key[i + 1])
                    if thr >= key[i + 1]:
                        thr = key[i]
                    best_thr = thr

        if best_f < 0:
            continue
        gain = best_proxy - total * total / m
        if gain > 0.0:
            importance[best_f] += gain

        # stable partition
        n_left = 0
        for k in range(start, end):
            if X[samples[k], best_f] <= best_thr:
                n_left += 1
        i = 0
        j = n_left
        for k in range(start, end):
            s = samples[k]
            if X[s, best_f] <= best_thr:
                buf[i] = s
                i += 1
            else:
                buf[j] = s
                j += 1
        for k in range(m):
            samples[start + k] = buf[k]

        li = n_nodes
        ri = n_nodes + 1
        n_nodes += 2
        feature[li] = -1; threshold[li] = 0.0; left[li] = -1; right[li] = -1
        value[li] = 0.0; n_node[li] = n_left
        feature[ri] = -1; threshold[ri] = 0.0; left[ri] = -1; right[ri] = -1
        value[ri] = 0.0; n_node[ri] = m - n_left
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = li
        right[node] = ri
        st_node[top] = ri; st_start[top] = start + n_left; st_end[top] = end
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = li; st_start[top] = start; st_end[top] = start + n_left
        st_depth[top] = depth + 1
        top += 1

    free(st_node); free(st_start); free(st_end); free(st_depth); free(feats)
    free(key); free(tkey); free(sidx); free(tidx); free(buf)
    return n_nodes


def build_tree(X, y, samples, Py_ssize_t mtry, Py_ssize_t min_leaf, Py_ssize_t max_depth,
               seed):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef cnp.ndarray[Py_ssize_t, ndim=1] samp = np.array(samples, dtype=np.intp)
    cdef Py_ssize_t n_samples = samp.shape[0]
    cdef Py_ssize_t n_features = Xv.shape[1]
    cdef Py_ssize_t cap = 2 * n_samples + 1
    if mtry < 1:
        mtry = 1
    if mtry > n_features:
        mtry = n_features
    cdef uint64_t useed = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef cnp.ndarray[int64_t, ndim=1] feature = np.empty(cap, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] threshold = np.empty(cap, dtype=np.float64)
    cdef cnp.ndarray[int64_t, ndim=1] left = np.empty(cap, dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] right = np.empty(cap, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] value = np.empty(cap, dtype=np.float64)
    cdef cnp.ndarray[int64_t, ndim=1] n_node = np.empty(cap, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] importance = np.zeros(n_features, dtype=np.float64)
    cdef Py_ssize_t n_nodes
    cdef Py_ssize_t* sp = <Py_ssize_t*>samp.data
    cdef int64_t* fp = <int64_t*>feature.data
    cdef double* tp = <double*>threshold.data
    cdef int64_t* lp = <int64_t*>left.data
    cdef int64_t* rp = <int64_t*>right.data
    cdef double* vp = <double*>value.data
    cdef int64_t* np_ = <int64_t*>n_node.data
    cdef double* ip = <double*>importance.data
    with nogil:
        n_nodes = _grow(Xv, yv, sp, n_samples, n_features, mtry, min_leaf, max_depth,
                        useed, fp, tp, lp, rp, vp, np_, ip)
    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), n_node[:n_nodes].copy(),
            importance)


def predict_tree(const int64_t[::1] feature, const double[::1] threshold,
                 const int64_t[::1] left, const int64_t[::1] right,
                 const double[::1] value, X):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0], i
    cdef int64_t node
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    with nogil:
        for i in range(n):
            node = 0
            while feature[node] >= 0:
                if Xv[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            ov[i] = value[node]
    return out


def svr_smo(K, z, double C, double eps, double tol, Py_ssize_t max_iter):
    cdef const double[:, ::1] Kv = np.ascontiguousarray(K, dtype=np.float64)
    cdef const double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef Py_ssize_t n = zv.shape[0], ell = 2 * n
    alpha_a = np.zeros(ell, dtype=np.float64)
    grad_a = np.empty(ell, dtype=np.float64)
    sign_a = np.empty(ell, dtype=np.float64)
    qd_a = np.empty(ell, dtype=np.float64)
    cdef double[::1] alpha = alpha_a
    cdef double[::1] grad = grad_a
    cdef double[::1] sign = sign_a
    cdef double[::1] qd = qd_a
    cdef Py_ssize_t t, i, j, n_iter = 0, ri, rj, rt
    cdef double tau = 1e-12, gmax, gmax2, mgy, b_it, a_it, obj, obj_min, qij
    cdef double quad, delta, diff, total, ai, aj, dai, daj, old_ai, old_aj, si, sj
    cdef bint converged = False, in_up, in_low
    for t in range(n):
        sign[t] = 1.0
        sign[t + n] = -1.0
        grad[t] = eps - zv[t]
        grad[t + n] = eps + zv[t]
        qd[t] = Kv[t, t]
        qd[t + n] = Kv[t, t]

    with nogil:
        while n_iter < max_iter:
            gmax = -INFINITY
            gmax2 = -INFINITY
            i = -1
            for t in range(ell):
                if sign[t] > 0:
                    in_up = alpha[t] < C
                    in_low = alpha[t] > 0
                else:
                    in_up = alpha[t] > 0
                    in_low = alpha[t] < C
                mgy = -sign[t] * grad[t]
                if in_up and mgy > gmax:
                    gmax = mgy
                    i = t
                if in_low and -mgy > gmax2:
                    gmax2 = -mgy
            if i < 0 or gmax + gmax2 < tol:
                converged = True
                break
            ri = i % n
            si = sign[i]
            j = -1
            obj_min = INFINITY
            for t in range(ell):
                if sign[t] > 0:
                    in_low = alpha[t] > 0
                else:
                    in_low = alpha[t] < C
                if not in_low:
                    continue
                b_it = gmax + sign[t] * grad[t]
                if b_it > 0:
                    rt = t % n
                    a_it = qd[i] + qd[t] - 2.0 * si * sign[t] * (si * sign[t] * Kv[ri, rt])
                    if a_it <= 0:
                        a_it = tau
                    obj = -(b_it * b_it) / a_it
                    if obj < obj_min:
                        obj_min = obj
                        j = t
            if j < 0:
                converged = True
                break
            n_iter += 1
            rj = j % n
            sj = sign[j]
            qij = si * sj * Kv[ri, rj]
            old_ai = alpha[i]
            old_aj = alpha[j]
            if si != sj:
                quad = qd[i] + qd[j] + 2.0 * qij
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
                quad = qd[i] + qd[j] - 2.0 * qij
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
            alpha[i] = ai
            alpha[j] = aj
            dai = ai - old_ai
            daj = aj - old_aj
            for t in range(ell):
                rt = t % n
                grad[t] += (si * sign[t] * Kv[ri, rt]) * dai + (sj * sign[t] * Kv[rj, rt]) * daj

    # bias from free variables (or midpoint of the feasible interval)
    cdef double ub = INFINITY, lb = -INFINITY, sum_free = 0.0, yg
    cdef Py_ssize_t n_free = 0
    for t in range(ell):
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
    cdef double rho
    if n_free > 0:
        rho = sum_free / n_free
    else:
        rho = (ub + lb) / 2.0
    beta = alpha_a[:n] - alpha_a[n:]
    return beta, -rho, n_iter, bool(converged)


def enet_cd(Xf, y, beta, double lam, double gamma, xsq, Py_ssize_t max_iter, double tol):
    cdef const double[::1, :] Xv = np.asfortranarray(Xf, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0], p = Xv.shape[1], i, j, sweeps = 0
    b_a = np.array(beta, dtype=np.float64)
    cdef double[::1] b = b_a
    cdef const double[::1] xs = np.ascontiguousarray(xsq, dtype=np.float64)
    r_a = np.ascontiguousarray(y, dtype=np.float64) - np.asarray(Xf, dtype=np.float64) @ b_a
    cdef double[::1] r = r_a
    hist_a = np.empty(max(max_iter, 1), dtype=np.float64)
    cdef double[::1] hist = hist_a
    cdef double l1 = lam * gamma, l2 = lam * (1.0 - gamma)
    cdef double max_delta = INFINITY, denom, old, new, rho, d, acc, rr, bb, b1
    with nogil:
        while sweeps < max_iter:
            max_delta = 0.0
            for j in range(p):
                denom = xs[j] + l2
                old = b[j]
                if denom <= 0.0:
                    new = 0.0
                else:
                    acc = 0.0
                    for i in range(n):
                        acc = acc + Xv[i, j] * r[i]
                    rho = acc / n + xs[j] * old
                    if rho > l1:
                        new = (rho - l1) / denom
                    elif rho < -l1:
                        new = (rho + l1) / denom
                    else:
                        new = 0.0
                d = new - old
                if d != 0.0:
                    for i in range(n):
                        r[i] -= d * Xv[i, j]
                    b[j] = new
                    if xs[j] * d * d > max_delta:
                        max_delta = xs[j] * d * d
            rr = 0.0
            for i in range(n):
                rr = rr + r[i] * r[i]
            bb = 0.0
            b1 = 0.0
            for j in range(p):
                bb = bb + b[j] * b[j]
                b1 = b1 + fabs(b[j])
            hist[sweeps] = 0.5 * rr / n + l2 * 0.5 * bb + l1 * b1
            sweeps += 1
            if max_delta < tol:
                break
    return b_a, sweeps, max_delta, hist_a[:sweeps].copy()
