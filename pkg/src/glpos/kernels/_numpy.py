"""Vectorised numpy versions of the hot kernels.

Same contracts as the numba module; results agree to rounding.
"""
import numpy as np


def _dense(indptr, indices):
    n = len(indptr) - 1
    A = np.zeros((n, n))
    rows = np.repeat(np.arange(n), np.diff(indptr))
    A[rows, indices] = 1.0
    return A


def path_centralities(indptr, indices):
    """Closeness, betweenness, load and harmonic centrality of an unweighted
    undirected graph given in CSR form (both directions stored).

    Returns four normalised arrays of length n.
    """
    n = len(indptr) - 1
    zeros = np.zeros(n)
    if n <= 1:
        return zeros, zeros.copy(), zeros.copy(), zeros.copy()
    A = _dense(indptr, indices)
    dist = np.full((n, n), -1, dtype=np.int64)
    sigma = np.zeros((n, n))
    np.fill_diagonal(dist, 0)
    np.fill_diagonal(sigma, 1.0)
    front = np.eye(n)
    k = 0
    while True:
        k += 1
        nxt = front @ A
        new = (nxt > 0) & (dist < 0)
        if not new.any():
            break
        dist[new] = k
        front = np.where(new, nxt, 0.0)
        sigma += front
    reach = dist >= 0
    np.fill_diagonal(reach, False)
    d = np.where(reach, dist, 0).astype(float)

    r = reach.sum(axis=1) + 1
    tot = d.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        clo = np.where(tot > 0, (r - 1) / tot * (r - 1) / (n - 1), 0.0)
        harm = np.where(reach, 1.0 / np.where(reach, d, 1.0), 0.0).sum(axis=1) / (n - 1)

    # betweenness: v lies on a shortest s-t path iff d(s,v) + d(v,t) = d(s,t)
    D = np.where(dist >= 0, dist, -10 * n)
    on = (D[:, :, None] + D[None, :, :] == D[:, None, :])
    on &= (D[:, :, None] >= 0) & (D[None, :, :] >= 0)
    idx = np.arange(n)
    on[idx, idx, :] = False          # v == s
    on[:, idx, idx] = False          # v == t
    on[idx, :, idx] = False          # s == t
    frac = sigma[:, :, None] * sigma[None, :, :] / np.where(sigma > 0, sigma, 1.0)[:, None, :]
    bet = np.where(on, frac, 0.0).sum(axis=(0, 2))

    # load: every node pushes one unit towards the source, split evenly over
    # its shortest-path predecessors
    pred = (A[None, :, :] > 0) & (dist[:, None, :] == dist[:, :, None] - 1) & (dist[:, :, None] > 0)
    npred = pred.sum(axis=2)
    flow = np.where(dist >= 0, 1.0, 0.0)
    for level in range(int(dist.max()), 1, -1):
        share = np.where(dist == level, flow / np.maximum(npred, 1), 0.0)
        flow += np.einsum("sv,svw->sw", share, pred)
    load = np.where(reach, flow - 1.0, 0.0).sum(axis=0)

    if n > 2:
        scale = 1.0 / ((n - 1) * (n - 2))
        bet = bet * scale
        load = load * scale
    else:
        bet = zeros.copy()
        load = zeros.copy()
    return clo, bet, load, harm


def ibm1_expectation(t, flat_ids, seg, tok_norm, n_tok):
    """One IBM Model 1 E-step over the flattened co-occurrence blocks.

    ``flat_ids[k]`` is the translation-pair id at block entry k and ``seg[k]``
    the global index of the generated token that entry belongs to.
    Returns expected pair counts and the corpus log-likelihood.
    """
    tv = t[flat_ids]
    z = np.bincount(seg, weights=tv, minlength=n_tok)
    post = tv / z[seg]
    counts = np.bincount(flat_ids, weights=post, minlength=len(t))
    ll = float(np.sum(np.log(z / tok_norm)))
    return counts, ll


def segment_sum(values, seg, n):
    out = np.zeros((n,) + values.shape[1:])
    np.add.at(out, seg, values)
    return out


def segment_max(values, seg, n):
    out = np.full((n,) + values.shape[1:], -np.inf)
    np.maximum.at(out, seg, values)
    return out
