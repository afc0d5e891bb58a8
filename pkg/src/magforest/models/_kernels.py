"""Compiled CART building and routing.

Trees are stored as flat node arrays. Node 0 is the root; a node is a leaf
when its feature is -1. Samples go left when ``x[feature] <= threshold``.
"""

import numba as nb
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

# Gains closer than this fraction of the node SSE count as ties.
TIE_RTOL = 1e-12


@nb.njit(cache=True, nogil=True)
def mix64(z):
    """splitmix64 finaliser."""
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True, nogil=True)
def _draw_features(perm, n_sub, seed, counter):
    # Counter-based draw: the subset depends only on (seed, node counter).
    p = perm.shape[0]
    for j in range(p):
        perm[j] = j
    key = mix64(seed ^ mix64(np.uint64(counter) + _GOLDEN))
    for j in range(n_sub):
        r = mix64(key + np.uint64(j + 1) * _GOLDEN)
        k = j + np.int64(r % np.uint64(p - j))
        tmp = perm[j]
        perm[j] = perm[k]
        perm[k] = tmp
    return np.sort(perm[:n_sub])


@nb.njit(cache=True, nogil=True)
def build_tree(X, Y, samples, max_depth, min_split, min_leaf, n_sub, seed):
    n = samples.shape[0]
    p = X.shape[1]
    d = Y.shape[1]
    cap = 2 * n + 1

    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros((cap, d))
    count = np.zeros(cap, np.int64)

    idx = samples.copy()
    buf = np.empty(n, np.int64)
    vals = np.empty(n)
    perm = np.empty(p, np.int64)
    all_features = np.arange(p)
    mean = np.empty(d)
    tot = np.empty(d)
    csum = np.empty(d)

    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    top = 1
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n
    st_depth[0] = 0
    n_nodes = 1

    while top > 0:
        top -= 1
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        m = end - start
        count[node] = m

        # Node value summed in ascending sample order so it is reproducible.
        ordered = np.sort(idx[start:end])
        for dd in range(d):
            acc = 0.0
            for i in range(m):
                acc += Y[ordered[i], dd]
            value[node, dd] = acc / m

        pure = True
        first = idx[start]
        for i in range(start + 1, end):
            for dd in range(d):
                if Y[idx[i], dd] != Y[first, dd]:
                    pure = False
                    break
            if not pure:
                break
        if pure or depth >= max_depth or m < min_split or m < 2 * min_leaf:
            continue

        for dd in range(d):
            mean[dd] = value[node, dd]
            tot[dd] = 0.0
        sse = 0.0
        for i in range(start, end):
            s = idx[i]
            for dd in range(d):
                r = Y[s, dd] - mean[dd]
                tot[dd] += r
                sse += r * r
        eps = TIE_RTOL * sse

        if n_sub < p:
            chosen = _draw_features(perm, n_sub, seed, node)
        else:
            chosen = all_features

        best_gain = -np.inf
        best_f = -1
        best_thr = 0.0
        for f in chosen:
            for i in range(m):
                vals[i] = X[idx[start + i], f]
            order = np.argsort(vals[:m], kind="mergesort")
            if vals[order[0]] == vals[order[m - 1]]:
                continue
            for dd in range(d):
                csum[dd] = 0.0
            for i in range(m - 1):
                s = idx[start + order[i]]
                for dd in range(d):
                    csum[dd] += Y[s, dd] - mean[dd]
                nl = i + 1
                nr = m - nl
                if nl < min_leaf:
                    continue
                if nr < min_leaf:
                    break
                a = vals[order[i]]
                b = vals[order[i + 1]]
                if not a < b:
                    continue
                gain = 0.0
                for dd in range(d):
                    sr = tot[dd] - csum[dd]
                    gain += csum[dd] * csum[dd] / nl + sr * sr / nr - tot[dd] * tot[dd] / m
                if gain > best_gain + eps:
                    best_gain = gain
                    best_f = f
                    thr = 0.5 * (a + b)
                    if not (a <= thr < b):
                        thr = a
                    best_thr = thr

        if best_f < 0:
            continue

        # Stable partition: left block keeps its relative order, as does right.
        nl = 0
        nr = 0
        for i in range(start, end):
            s = idx[i]
            if X[s, best_f] <= best_thr:
                idx[start + nl] = s
                nl += 1
            else:
                buf[nr] = s
                nr += 1
        for i in range(nr):
            idx[start + nl + i] = buf[i]

        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lc
        right[node] = rc

        st_node[top] = rc
        st_start[top] = start + nl
        st_end[top] = end
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = lc
        st_start[top] = start
        st_end[top] = start + nl
        st_depth[top] = depth + 1
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), count[:n_nodes].copy())


@nb.njit(cache=True, nogil=True)
def apply_tree(feature, threshold, left, right, X):
    """Leaf index reached by every row of ``X``."""
    m = X.shape[0]
    out = np.empty(m, np.int64)
    for i in range(m):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out
