"""numba-compiled kernels. Loop formulations of the numpy module."""
import numpy as np
from numba import njit


@njit(cache=True)
def path_centralities(indptr, indices):
    n = indptr.shape[0] - 1
    clo = np.zeros(n)
    bet = np.zeros(n)
    load = np.zeros(n)
    harm = np.zeros(n)
    if n <= 1:
        return clo, bet, load, harm
    dist = np.empty(n, np.int64)
    sigma = np.empty(n)
    delta = np.empty(n)
    flow = np.empty(n)
    order = np.empty(n, np.int64)
    for s in range(n):
        dist[:] = -1
        sigma[:] = 0.0
        dist[s] = 0
        sigma[s] = 1.0
        order[0] = s
        head = 0
        tail = 1
        while head < tail:
            v = order[head]
            head += 1
            for k in range(indptr[v], indptr[v + 1]):
                w = indices[k]
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    order[tail] = w
                    tail += 1
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
        tot = 0.0
        h = 0.0
        for idx in range(1, tail):
            dv = dist[order[idx]]
            tot += dv
            h += 1.0 / dv
        if tot > 0:
            clo[s] = (tail - 1) / tot * (tail - 1) / (n - 1)
        harm[s] = h / (n - 1)

        for idx in range(tail):
            delta[order[idx]] = 0.0
            flow[order[idx]] = 1.0
        for idx in range(tail - 1, 0, -1):
            w = order[idx]
            npred = 0
            for k in range(indptr[w], indptr[w + 1]):
                if dist[indices[k]] == dist[w] - 1:
                    npred += 1
            for k in range(indptr[w], indptr[w + 1]):
                v = indices[k]
                if dist[v] == dist[w] - 1:
                    delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
                    if v != s:
                        flow[v] += flow[w] / npred
            bet[w] += delta[w]
        for idx in range(1, tail):
            w = order[idx]
            load[w] += flow[w] - 1.0
    if n > 2:
        scale = 1.0 / ((n - 1) * (n - 2))
        for v in range(n):
            bet[v] *= scale
            load[v] *= scale
    else:
        bet[:] = 0.0
        load[:] = 0.0
    return clo, bet, load, harm


@njit(cache=True)
def _ibm1_expectation(t, flat_ids, seg, tok_norm, n_tok):
    z = np.zeros(n_tok)
    for k in range(flat_ids.shape[0]):
        z[seg[k]] += t[flat_ids[k]]
    counts = np.zeros(t.shape[0])
    for k in range(flat_ids.shape[0]):
        counts[flat_ids[k]] += t[flat_ids[k]] / z[seg[k]]
    ll = 0.0
    for j in range(n_tok):
        ll += np.log(z[j] / tok_norm[j])
    return counts, ll


def ibm1_expectation(t, flat_ids, seg, tok_norm, n_tok):
    counts, ll = _ibm1_expectation(t, flat_ids, seg, tok_norm, n_tok)
    return counts, float(ll)


@njit(cache=True)
def _segment_sum2(values, seg, n):
    out = np.zeros((n, values.shape[1]))
    for e in range(values.shape[0]):
        r = seg[e]
        for c in range(values.shape[1]):
            out[r, c] += values[e, c]
    return out


@njit(cache=True)
def _segment_max2(values, seg, n):
    out = np.full((n, values.shape[1]), -np.inf)
    for e in range(values.shape[0]):
        r = seg[e]
        for c in range(values.shape[1]):
            if values[e, c] > out[r, c]:
                out[r, c] = values[e, c]
    return out


def _as2d(values):
    v = np.ascontiguousarray(values, dtype=np.float64)
    return v.reshape(v.shape[0], -1)


def segment_sum(values, seg, n):
    out = _segment_sum2(_as2d(values), np.ascontiguousarray(seg, dtype=np.int64), n)
    return out.reshape((n,) + values.shape[1:])


def segment_max(values, seg, n):
    out = _segment_max2(_as2d(values), np.ascontiguousarray(seg, dtype=np.int64), n)
    return out.reshape((n,) + values.shape[1:])
