# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled tree kernels; mirror ``_pykernels`` step for step."""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free
from libc.stdint cimport uint64_t
from libc.math cimport INFINITY

cnp.import_array()

ctypedef cnp.intp_t intp


cdef inline uint64_t _sm_next(uint64_t* state) noexcept nogil:
    cdef uint64_t z
    state[0] += <uint64_t>0x9E3779B97F4A7C15ULL
    z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _sm_double(uint64_t* state) noexcept nogil:
    return <double>(_sm_next(state) >> 11) * (1.0 / 9007199254740992.0)


cdef struct Work:
    intp* idx        # sample ids, each node owns a contiguous slice
    intp* tmp        # scratch for partition and sorting
    intp* stack      # (node, start, end, depth) quadruples
    intp* usable
    double* lo
    double* hi


cdef int _alloc_work(Work* w, intp m, intp p) noexcept nogil:
    w.idx = <intp*>malloc(m * sizeof(intp))
    w.tmp = <intp*>malloc(((m if m > p else p) + 1) * sizeof(intp))
    w.stack = <intp*>malloc(4 * (2 * m + 2) * sizeof(intp))
    w.usable = <intp*>malloc((p + 1) * sizeof(intp))
    w.lo = <double*>malloc((p + 1) * sizeof(double))
    w.hi = <double*>malloc((p + 1) * sizeof(double))
    if not (w.idx and w.tmp and w.stack and w.usable and w.lo and w.hi):
        return -1
    return 0


cdef void _free_work(Work* w) noexcept nogil:
    free(w.idx)
    free(w.tmp)
    free(w.stack)
    free(w.usable)
    free(w.lo)
    free(w.hi)


cdef void _best_split(const double* X, const double* y, intp p, intp* idx, intp n,
                      intp max_features, bint shuffle, uint64_t* rng, Work* w,
                      intp* out_feat, double* out_thr) noexcept nogil:
    cdef double total = 0.0, s_left, s_right, score, best_score = -INFINITY
    cdef double xa, xb, thr, key
    cdef intp f, k, j, cur, n_left, a, nf, swap
    cdef intp* order = w.tmp
    cdef intp* feats = w.usable
    for a in range(p):
        feats[a] = a
    nf = p if max_features >= p else max_features
    if shuffle or nf < p:
        for a in range(nf):
            j = a + <intp>(_sm_double(rng) * (p - a))
            if j >= p:
                j = p - 1
            swap = feats[a]
            feats[a] = feats[j]
            feats[j] = swap
    if not shuffle:
        # ascending feature order keeps the lowest-index tie rule
        for a in range(1, nf):
            cur = feats[a]
            j = a
            while j > 0 and feats[j - 1] > cur:
                feats[j] = feats[j - 1]
                j -= 1
            feats[j] = cur
    for k in range(n):
        total += y[idx[k]]
    out_feat[0] = -1
    out_thr[0] = 0.0
    for a in range(nf):
        f = feats[a]
        # stable insertion sort of the node's samples on feature f
        for k in range(n):
            cur = idx[k]
            key = X[cur * p + f]
            j = k
            while j > 0 and X[order[j - 1] * p + f] > key:
                order[j] = order[j - 1]
                j -= 1
            order[j] = cur
        s_left = 0.0
        for k in range(n - 1):
            s_left += y[order[k]]
            xa = X[order[k] * p + f]
            xb = X[order[k + 1] * p + f]
            if xa < xb:
                n_left = k + 1
                s_right = total - s_left
                score = s_left * s_left / n_left + s_right * s_right / (n - n_left)
                if score > best_score:
                    best_score = score
                    out_feat[0] = f
                    thr = xa + 0.5 * (xb - xa)
                    out_thr[0] = thr if thr < xb else xa


cdef void _extreme_split(const double* X, const double* y, intp p, intp* idx, intp n,
                         intp max_features, uint64_t* rng, Work* w,
                         intp* out_feat, double* out_thr) noexcept nogil:
    cdef intp f, k, a, j, c, m = 0, kk, n_left, swap
    cdef double lo_v, hi_v, v, total = 0.0, s_left, s_right, score, best_score = -INFINITY, thr
    out_feat[0] = -1
    out_thr[0] = 0.0
    for f in range(p):
        lo_v = X[idx[0] * p + f]
        hi_v = lo_v
        for k in range(n):
            v = X[idx[k] * p + f]
            if v < lo_v:
                lo_v = v
            elif v > hi_v:
                hi_v = v
        if lo_v < hi_v:
            w.usable[m] = f
            w.lo[m] = lo_v
            w.hi[m] = hi_v
            m += 1
    if m == 0:
        return
    # candidate order lives in w.tmp, reused before partitioning
    for a in range(m):
        w.tmp[a] = a
    kk = max_features if max_features < m else m
    for a in range(kk):
        j = a + <intp>(_sm_double(rng) * (m - a))
        if j >= m:
            j = m - 1
        swap = w.tmp[a]
        w.tmp[a] = w.tmp[j]
        w.tmp[j] = swap
    for k in range(n):
        total += y[idx[k]]
    for a in range(kk):
        c = w.tmp[a]
        f = w.usable[c]
        thr = w.lo[c] + _sm_double(rng) * (w.hi[c] - w.lo[c])
        if not thr < w.hi[c]:
            thr = w.lo[c]
        s_left = 0.0
        n_left = 0
        for k in range(n):
            if X[idx[k] * p + f] <= thr:
                s_left += y[idx[k]]
                n_left += 1
        s_right = total - s_left
        score = s_left * s_left / n_left + s_right * s_right / (n - n_left)
        if score > best_score:
            best_score = score
            out_feat[0] = f
            out_thr[0] = thr


cdef intp _grow(const double* X, const double* y, intp p, const intp* samples, intp m,
                intp max_depth, intp min_samples_split, bint extreme, intp max_features,
                bint shuffle, uint64_t seed, Work* w,
                intp* feature, double* threshold, intp* left, intp* right,
                double* value) noexcept nogil:
    cdef intp sp = 0, count = 1, node, start, end, depth, n, k, f, nl, nr
    cdef double s, v, ymin, ymax, thr
    cdef uint64_t rng = seed
    for k in range(m):
        w.idx[k] = samples[k]
    w.stack[0] = 0
    w.stack[1] = 0
    w.stack[2] = m
    w.stack[3] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = w.stack[4 * sp]
        start = w.stack[4 * sp + 1]
        end = w.stack[4 * sp + 2]
        depth = w.stack[4 * sp + 3]
        n = end - start
        s = 0.0
        ymin = y[w.idx[start]]
        ymax = ymin
        for k in range(start, end):
            v = y[w.idx[k]]
            s += v
            if v < ymin:
                ymin = v
            elif v > ymax:
                ymax = v
        value[node] = s / n
        feature[node] = -1
        if n < min_samples_split or (max_depth >= 0 and depth >= max_depth) or ymin == ymax:
            continue
        if extreme:
            _extreme_split(X, y, p, w.idx + start, n, max_features, &rng, w, &f, &thr)
        else:
            _best_split(X, y, p, w.idx + start, n, max_features, shuffle, &rng, w, &f, &thr)
        if f < 0:
            continue
        # stable partition: left block first, then right block
        nl = 0
        for k in range(start, end):
            if X[w.idx[k] * p + f] <= thr:
                w.tmp[nl] = w.idx[k]
                nl += 1
        nr = nl
        for k in range(start, end):
            if not X[w.idx[k] * p + f] <= thr:
                w.tmp[nr] = w.idx[k]
                nr += 1
        for k in range(n):
            w.idx[start + k] = w.tmp[k]
        feature[node] = f
        threshold[node] = thr
        left[node] = count
        right[node] = count + 1
        w.stack[4 * sp] = count + 1
        w.stack[4 * sp + 1] = start + nl
        w.stack[4 * sp + 2] = end
        w.stack[4 * sp + 3] = depth + 1
        sp += 1
        w.stack[4 * sp] = count
        w.stack[4 * sp + 1] = start
        w.stack[4 * sp + 2] = start + nl
        w.stack[4 * sp + 3] = depth + 1
        sp += 1
        count += 2
    return count


cdef inline double _route(const double* row, const intp* ft, const double* th,
                          const intp* lt, const intp* rt, const double* vt) noexcept nogil:
    cdef intp node = 0
    while ft[node] >= 0:
        if row[ft[node]] <= th[node]:
            node = lt[node]
        else:
            node = rt[node]
    return vt[node]


def _alloc(intp n_trees, intp capacity):
    return (
        np.full((n_trees, capacity), -1, dtype=np.intp),
        np.zeros((n_trees, capacity), dtype=np.float64),
        np.full((n_trees, capacity), -1, dtype=np.intp),
        np.full((n_trees, capacity), -1, dtype=np.intp),
        np.zeros((n_trees, capacity), dtype=np.float64),
    )


def build_trees(X, y, samples, seeds, intp max_depth, intp min_samples_split,
                bint extreme, intp max_features, bint shuffle=False):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const intp[:, ::1] sv = np.ascontiguousarray(samples, dtype=np.intp)
    cdef const uint64_t[::1] seedv = np.ascontiguousarray(seeds, dtype=np.uint64)
    cdef intp n_trees = sv.shape[0], m = sv.shape[1], p = Xv.shape[1], t
    cdef intp capacity = 2 * m - 1 if m > 0 else 1
    if m < 1:
        raise ValueError("each tree needs at least one sample")
    if seedv.shape[0] < n_trees:
        raise ValueError("one seed per tree required")
    feature, threshold, left, right, value = _alloc(n_trees, capacity)
    n_nodes = np.zeros(n_trees, dtype=np.intp)
    cdef intp[:, ::1] fv = feature
    cdef double[:, ::1] tv = threshold
    cdef intp[:, ::1] lv = left
    cdef intp[:, ::1] rv = right
    cdef double[:, ::1] vv = value
    cdef intp[::1] nv = n_nodes
    cdef Work w
    if _alloc_work(&w, m, p) != 0:
        _free_work(&w)
        raise MemoryError()
    with nogil:
        for t in range(n_trees):
            nv[t] = _grow(&Xv[0, 0], &yv[0], p, &sv[t, 0], m, max_depth, min_samples_split,
                          extreme, max_features, shuffle, seedv[t], &w,
                          &fv[t, 0], &tv[t, 0], &lv[t, 0], &rv[t, 0], &vv[t, 0])
    _free_work(&w)
    return feature, threshold, left, right, value, n_nodes


def predict_trees(feature, threshold, left, right, value, X):
    cdef const intp[:, ::1] fv = np.ascontiguousarray(feature, dtype=np.intp)
    cdef const double[:, ::1] tv = np.ascontiguousarray(threshold, dtype=np.float64)
    cdef const intp[:, ::1] lv = np.ascontiguousarray(left, dtype=np.intp)
    cdef const intp[:, ::1] rv = np.ascontiguousarray(right, dtype=np.intp)
    cdef const double[:, ::1] vv = np.ascontiguousarray(value, dtype=np.float64)
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef intp n_trees = fv.shape[0], n_rows = Xv.shape[0], t, r
    out = np.empty((n_trees, n_rows), dtype=np.float64)
    cdef double[:, ::1] ov = out
    if n_rows == 0:
        return out
    with nogil:
        for t in range(n_trees):
            for r in range(n_rows):
                ov[t, r] = _route(&Xv[r, 0], &fv[t, 0], &tv[t, 0], &lv[t, 0], &rv[t, 0], &vv[t, 0])
    return out


def boost(X, y, intp n_stages, double learning_rate, intp max_depth, intp min_samples_split,
          seeds=None, bint shuffle=False):
    if shuffle and (seeds is None or len(seeds) < n_stages):
        raise ValueError("one seed per stage required")
    cdef const uint64_t[::1] seedv = np.ascontiguousarray(
        seeds if shuffle else np.zeros(max(n_stages, 1), dtype=np.uint64), dtype=np.uint64)
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef intp n = yv.shape[0], p = Xv.shape[1], t, i
    cdef intp capacity = 2 * n - 1 if n > 0 else 1
    if n < 1:
        raise ValueError("boosting needs at least one sample")
    feature, threshold, left, right, value = _alloc(n_stages, capacity)
    n_nodes = np.zeros(n_stages, dtype=np.intp)
    cdef intp[:, ::1] fv = feature
    cdef double[:, ::1] tv = threshold
    cdef intp[:, ::1] lv = left
    cdef intp[:, ::1] rv = right
    cdef double[:, ::1] vv = value
    cdef intp[::1] nv = n_nodes
    cdef double[::1] current = np.empty(n, dtype=np.float64)
    cdef double[::1] resid = np.empty(n, dtype=np.float64)
    cdef intp[::1] all_idx = np.arange(n, dtype=np.intp)
    cdef double init = 0.0
    cdef Work w
    for i in range(n):
        init += yv[i]
    init /= n
    if _alloc_work(&w, n, p) != 0:
        _free_work(&w)
        raise MemoryError()
    with nogil:
        for i in range(n):
            current[i] = init
        for t in range(n_stages):
            for i in range(n):
                resid[i] = yv[i] - current[i]
            nv[t] = _grow(&Xv[0, 0], &resid[0], p, &all_idx[0], n, max_depth,
                          min_samples_split, False, p, shuffle, seedv[t], &w,
                          &fv[t, 0], &tv[t, 0], &lv[t, 0], &rv[t, 0], &vv[t, 0])
            for i in range(n):
                current[i] = current[i] + learning_rate * _route(
                    &Xv[i, 0], &fv[t, 0], &tv[t, 0], &lv[t, 0], &rv[t, 0], &vv[t, 0])
    _free_work(&w)
    return init, feature, threshold, left, right, value, n_nodes
