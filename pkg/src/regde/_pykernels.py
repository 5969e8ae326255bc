"""Pure-Python tree kernels.

Reference implementation of the routines in ``_ckernels.pyx``. Both walk
nodes in the same order, sum in the same order and draw from the same
SplitMix64 stream, so a given input produces bit-identical trees.

Trees are stored as flat node arrays shaped ``(n_trees, capacity)``:
``feature`` (-1 on leaves), ``threshold``, ``left``, ``right``, ``value`` and
a per-tree ``n_nodes``. Samples with ``x[feature] <= threshold`` go left.
"""

import numpy as np

_MASK = (1 << 64) - 1
_INV_2_53 = 1.0 / 9007199254740992.0


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed):
        self.state = int(seed) & _MASK

    def next_u64(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def next_double(self):
        return (self.next_u64() >> 11) * _INV_2_53


def _best_split(X, y, idx, n_features, max_features, rng, shuffle=False):
    nf = min(max_features, n_features)
    feats = list(range(n_features))
    if shuffle or nf < n_features:
        for a in range(nf):
            j = a + int(rng.next_double() * (n_features - a))
            if j >= n_features:
                j = n_features - 1
            feats[a], feats[j] = feats[j], feats[a]
    feats = feats[:nf]
    if not shuffle:
        # ascending feature order keeps the lowest-index tie rule
        feats.sort()
    total = 0.0
    for i in idx:
        total += y[i]
    n = len(idx)
    best_score = -np.inf
    best_feat = -1
    best_thr = 0.0
    for f in feats:
        order = sorted(idx, key=lambda i: X[i][f])
        s_left = 0.0
        for k in range(n - 1):
            s_left += y[order[k]]
            xa = X[order[k]][f]
            xb = X[order[k + 1]][f]
            if xa < xb:
                n_left = k + 1
                s_right = total - s_left
                score = s_left * s_left / n_left + s_right * s_right / (n - n_left)
                if score > best_score:
                    best_score = score
                    best_feat = f
                    thr = xa + 0.5 * (xb - xa)
                    best_thr = thr if thr < xb else xa
    return best_feat, best_thr


def _extreme_split(X, y, idx, n_features, max_features, rng):
    lo = []
    hi = []
    usable = []
    for f in range(n_features):
        a = b = X[idx[0]][f]
        for i in idx:
            v = X[i][f]
            if v < a:
                a = v
            elif v > b:
                b = v
        if a < b:
            usable.append(f)
            lo.append(a)
            hi.append(b)
    m = len(usable)
    if m == 0:
        return -1, 0.0
    cand = list(range(m))
    k = min(max_features, m)
    for a in range(k):
        j = a + int(rng.next_double() * (m - a))
        if j >= m:
            j = m - 1
        cand[a], cand[j] = cand[j], cand[a]

    total = 0.0
    for i in idx:
        total += y[i]
    n = len(idx)
    best_score = -np.inf
    best_feat = -1
    best_thr = 0.0
    for a in range(k):
        c = cand[a]
        f = usable[c]
        thr = lo[c] + rng.next_double() * (hi[c] - lo[c])
        if not thr < hi[c]:
            thr = lo[c]
        s_left = 0.0
        n_left = 0
        for i in idx:
            if X[i][f] <= thr:
                s_left += y[i]
                n_left += 1
        s_right = total - s_left
        score = s_left * s_left / n_left + s_right * s_right / (n - n_left)
        if score > best_score:
            best_score = score
            best_feat = f
            best_thr = thr
    return best_feat, best_thr


def _grow(X, y, idx, max_depth, min_samples_split, extreme, max_features, rng, out, t,
          shuffle=False):
    feature, threshold, left, right, value = out
    n_features = len(X[0])
    count = 1
    stack = [(0, idx, 0)]
    while stack:
        node, idx, depth = stack.pop()
        n = len(idx)
        s = 0.0
        ymin = ymax = y[idx[0]]
        for i in idx:
            v = y[i]
            s += v
            if v < ymin:
                ymin = v
            elif v > ymax:
                ymax = v
        value[t, node] = s / n
        feature[t, node] = -1
        if n < min_samples_split or (max_depth >= 0 and depth >= max_depth) or ymin == ymax:
            continue
        if extreme:
            f, thr = _extreme_split(X, y, idx, n_features, max_features, rng)
        else:
            f, thr = _best_split(X, y, idx, n_features, max_features, rng, shuffle)
        if f < 0:
            continue
        li = [i for i in idx if X[i][f] <= thr]
        ri = [i for i in idx if not X[i][f] <= thr]
        feature[t, node] = f
        threshold[t, node] = thr
        left[t, node] = count
        right[t, node] = count + 1
        stack.append((count + 1, ri, depth + 1))
        stack.append((count, li, depth + 1))
        count += 2
    return count


def _alloc(n_trees, capacity):
    return (
        np.full((n_trees, capacity), -1, dtype=np.intp),
        np.zeros((n_trees, capacity), dtype=np.float64),
        np.full((n_trees, capacity), -1, dtype=np.intp),
        np.full((n_trees, capacity), -1, dtype=np.intp),
        np.zeros((n_trees, capacity), dtype=np.float64),
    )


def build_trees(X, y, samples, seeds, max_depth, min_samples_split, extreme, max_features,
                shuffle=False):
    """Grow one regression tree per row of ``samples``.

    ``samples[t]`` lists the training rows of tree ``t`` (repeats allowed, as
    in a bootstrap). ``seeds[t]`` feeds the tree's private SplitMix64 stream,
    consumed by extreme splits and by best splits when ``max_features`` is
    below the feature count. ``max_depth < 0`` means unlimited.

    Best splits visit features in ascending order, so equal-score splits go
    to the lowest feature. With ``shuffle`` they are visited in a fresh
    random order per node and ties go to whichever tied feature comes first.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    samples = np.asarray(samples, dtype=np.intp)
    n_trees, m = samples.shape
    if m < 1:
        raise ValueError("each tree needs at least one sample")
    if len(seeds) < n_trees:
        raise ValueError("one seed per tree required")
    capacity = max(2 * m - 1, 1)
    out = _alloc(n_trees, capacity)
    n_nodes = np.zeros(n_trees, dtype=np.intp)
    Xl = X.tolist()
    yl = y.tolist()
    for t in range(n_trees):
        rng = SplitMix64(int(seeds[t]))
        n_nodes[t] = _grow(Xl, yl, samples[t].tolist(), max_depth, min_samples_split,
                           extreme, max_features, rng, out, t, shuffle)
    return out + (n_nodes,)


def predict_trees(feature, threshold, left, right, value, X):
    """Per-tree predictions, shape ``(n_trees, n_rows)``."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    n_trees = feature.shape[0]
    out = np.empty((n_trees, X.shape[0]), dtype=np.float64)
    Xl = X.tolist()
    for t in range(n_trees):
        ft, th, lt, rt, vt = feature[t], threshold[t], left[t], right[t], value[t]
        for r, row in enumerate(Xl):
            node = 0
            while ft[node] >= 0:
                node = lt[node] if row[ft[node]] <= th[node] else rt[node]
            out[t, r] = vt[node]
    return out


def boost(X, y, n_stages, learning_rate, max_depth, min_samples_split, seeds=None, shuffle=False):
    """Least-squares gradient boosting with best-split trees.

    Returns ``(init, feature, threshold, left, right, value, n_nodes)``; the
    model predicts ``init + sum(learning_rate * tree_m(x))``. ``shuffle``
    randomises the feature visit order of every stage and needs one seed
    per stage.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = len(y)
    if n < 1:
        raise ValueError("boosting needs at least one sample")
    if shuffle and (seeds is None or len(seeds) < n_stages):
        raise ValueError("one seed per stage required")
    capacity = max(2 * n - 1, 1)
    out = _alloc(n_stages, capacity)
    n_nodes = np.zeros(n_stages, dtype=np.intp)
    Xl = X.tolist()
    yl = y.tolist()
    init = 0.0
    for v in yl:
        init += v
    init /= n
    current = [init] * n
    idx = list(range(n))
    feature, threshold, left, right, value = out
    for t in range(n_stages):
        resid = [yl[i] - current[i] for i in range(n)]
        rng = SplitMix64(int(seeds[t])) if shuffle else None
        n_nodes[t] = _grow(Xl, resid, idx, max_depth, min_samples_split, False, len(Xl[0]), rng,
                           out, t, shuffle)
        ft, th, lt, rt, vt = feature[t], threshold[t], left[t], right[t], value[t]
        for i, row in enumerate(Xl):
            node = 0
            while ft[node] >= 0:
                node = lt[node] if row[ft[node]] <= th[node] else rt[node]
            current[i] = current[i] + learning_rate * vt[node]
    return (init,) + out + (n_nodes,)
