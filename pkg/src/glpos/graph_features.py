"""Structural node features: five centralities, two community detections,
and the assembly of per-node feature rows."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, NamedTuple

import numpy as np

from . import kernels
from .mag import Mag, NodeId

CENTRALITIES = ("degree", "closeness", "betweenness", "load", "harmonic")
C_MAX = 16
P_MAX = 256


class CentralityVector(NamedTuple):
    degree: float
    closeness: float
    betweenness: float
    load: float
    harmonic: float


def _csr(n, edges):
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    order = np.lexsort((dst, src))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return indptr, dst[order]


def centrality_array(n: int, edges) -> np.ndarray:
    """(n, 5) array with columns in ``CENTRALITIES`` order.

    ``edges`` must be a simple undirected edge list (no duplicates, no loops).
    """
    indptr, indices = _csr(n, edges)
    deg = np.diff(indptr).astype(float)
    deg = deg / (n - 1) if n > 1 else np.zeros(n)
    clo, bet, load, harm = kernels.path_centralities(indptr, indices)
    return np.column_stack([deg, clo, bet, load, harm])


def compute_centralities(g: Mag) -> dict[NodeId, CentralityVector]:
    arr = centrality_array(g.n_nodes, g.edges)
    return {node: CentralityVector(*map(float, row)) for node, row in zip(g.nodes, arr)}


# --- communities -------------------------------------------------------------

def modularity(n: int, edges, labels) -> float:
    edges = np.asarray(edges).reshape(-1, 2)
    m = len(edges)
    if m == 0:
        return 0.0
    labels = np.asarray(labels)
    deg = np.bincount(edges.ravel(), minlength=n)
    inside = labels[edges[:, 0]] == labels[edges[:, 1]]
    q = inside.sum() / m
    _, inv = np.unique(labels, return_inverse=True)
    tot = np.bincount(inv, weights=deg)
    return float(q - np.sum((tot / (2 * m)) ** 2))


def greedy_modularity(n: int, edges, return_path: bool = False):
    """Clauset-Newman-Moore agglomeration.

    Starts from singletons and repeatedly merges the pair of connected
    communities with the largest modularity gain, stopping when no merge
    gains. Ties go to the lexicographically smallest pair of community
    representatives (smallest member index). Returns a label array where
    each node carries its community's smallest member.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    labels = np.arange(n)
    path = [labels.copy()]
    m = len(edges)
    if m == 0 or n == 0:
        return (labels, path) if return_path else labels
    E = np.zeros((n, n))
    E[edges[:, 0], edges[:, 1]] = 0.5 / m
    E[edges[:, 1], edges[:, 0]] = 0.5 / m
    a = E.sum(axis=1)
    active = np.ones(n, dtype=bool)
    while True:
        gain = 2.0 * (E - np.outer(a, a))
        ok = (E > 0) & np.triu(np.ones((n, n), dtype=bool), 1) & active[:, None] & active[None, :]
        if not ok.any():
            break
        gain = np.where(ok, gain, -np.inf)
        best = gain.max()
        if best <= 1e-12:
            break
        i, j = np.argwhere(gain >= best - 1e-15)[0]   # row-major: smallest (i, j)
        E[i, :] += E[j, :]
        E[:, i] += E[:, j]
        E[j, :] = 0.0
        E[:, j] = 0.0
        a[i] += a[j]
        a[j] = 0.0
        active[j] = False
        labels[labels == j] = i
        path.append(labels.copy())
    return (labels, path) if return_path else labels


def greedy_coloring(n: int, edges, seed: int) -> np.ndarray:
    indptr, indices = _csr(n, edges)
    order = np.random.default_rng(seed).permutation(n)
    color = np.full(n, -1)
    for v in order:
        used = {color[w] for w in indices[indptr[v]:indptr[v + 1]]}
        c = 0
        while c in used:
            c += 1
        color[v] = c
    return color


def _lp_choice(current, neigh_labels):
    vals, counts = np.unique(neigh_labels, return_counts=True)
    best = vals[counts == counts.max()]
    return current if current in best else best.min()


def label_propagation(n: int, edges, seed: int = 0, max_sweeps: int = 100):
    """Semi-synchronous label propagation on a seeded greedy coloring.

    Colour classes update in turn; nodes within a class update together.
    A node takes the most frequent neighbour label, keeping its own label
    when that is among the most frequent and otherwise taking the smallest.
    Returns (labels, sweeps, converged).
    """
    indptr, indices = _csr(n, edges)
    labels = np.arange(n)
    if n == 0:
        return labels, 0, True
    color = greedy_coloring(n, edges, seed)
    classes = [np.flatnonzero(color == c) for c in range(color.max() + 1)]
    for sweep in range(1, max_sweeps + 1):
        changed = False
        for nodes in classes:
            new = labels.copy()
            for v in nodes:
                nb = indices[indptr[v]:indptr[v + 1]]
                if len(nb):
                    new[v] = _lp_choice(labels[v], labels[nb])
            if (new != labels).any():
                changed = True
            labels = new
        if not changed:
            return labels, sweep, True
    return labels, max_sweeps, False


def is_lp_fixed_point(n, edges, labels) -> bool:
    indptr, indices = _csr(n, edges)
    for v in range(n):
        nb = indices[indptr[v]:indptr[v + 1]]
        if len(nb) and _lp_choice(labels[v], labels[nb]) != labels[v]:
            return False
    return True


def community_ordinals(labels, c_max: int = C_MAX) -> np.ndarray:
    """Rank communities by size (desc), ties by smallest member; cap at c_max - 1."""
    labels = np.asarray(labels)
    comms = {}
    for i, l in enumerate(labels.tolist()):
        comms.setdefault(l, []).append(i)
    ranked = sorted(comms.values(), key=lambda ms: (-len(ms), ms[0]))
    out = np.empty(len(labels), dtype=np.int64)
    for r, members in enumerate(ranked):
        out[members] = min(r, c_max - 1)
    return out


def detect_communities_greedy(g: Mag, c_max: int = C_MAX) -> np.ndarray:
    return community_ordinals(greedy_modularity(g.n_nodes, g.edges), c_max)


def detect_communities_lp(g: Mag, seed: int = 0, c_max: int = C_MAX) -> np.ndarray:
    labels, _, _ = label_propagation(g.n_nodes, g.edges, seed)
    return community_ordinals(labels, c_max)


# --- assembly ------------------------------------------------------------------

@dataclass(frozen=True)
class GraphFeatures:
    """Structural features of one MAG, in canonical node order."""
    verse: str
    centrality: np.ndarray      # (n, 5)
    greedy: np.ndarray          # (n,) ordinals
    lp: np.ndarray              # (n,) ordinals


def graph_features(g: Mag, seed: int = 0, c_max: int = C_MAX) -> GraphFeatures:
    return GraphFeatures(g.verse, centrality_array(g.n_nodes, g.edges),
                         detect_communities_greedy(g, c_max), detect_communities_lp(g, seed, c_max))


def compute_all(mags, seed: int = 0, threads: int = 1, c_max: int = C_MAX) -> list[GraphFeatures]:
    if threads <= 1:
        return [graph_features(g, seed, c_max) for g in mags]
    with ThreadPoolExecutor(threads) as ex:
        return list(ex.map(lambda g: graph_features(g, seed, c_max), mags))


@dataclass(frozen=True)
class NodeFeatureTable:
    """Assembled per-node inputs.

    ``numeric`` holds centralities, the word vector and an OOV flag;
    ``categorical`` holds language index, capped position and the two
    community ordinals, which the model embeds.
    """
    verse: str
    numeric: np.ndarray         # (n, 5 + D + 1)
    categorical: np.ndarray     # (n, 4) int

    @property
    def width(self) -> int:
        return self.numeric.shape[1] + self.categorical.shape[1]


def assemble_node_features(g: Mag, feats: GraphFeatures, embeddings,
                           lang_index: Mapping[str, int], p_max: int = P_MAX) -> NodeFeatureTable:
    """``embeddings`` maps language -> EmbeddingProvider (all of equal dimension)."""
    missing = [l for l in g.langs if l not in embeddings]
    if missing:
        raise KeyError(f"no embedding provider for language(s) {', '.join(missing)}")
    dims = {embeddings[l].dim for l in g.langs}
    if len(dims) > 1:
        raise ValueError(f"embedding dimensions differ across languages: {sorted(dims)}")
    D = dims.pop() if dims else 0
    vecs = np.zeros((g.n_nodes, D))
    oov = np.zeros((g.n_nodes, 1))
    for i in range(g.n_nodes):
        lang = g.lang_of(i)
        v = embeddings[lang].lookup(lang, g.words[i], g.verse, int(g.node_pos[i]))
        if v is None:
            oov[i] = 1.0
        else:
            vecs[i] = v
    numeric = np.hstack([feats.centrality, vecs, oov])
    cat = np.column_stack([
        np.array([lang_index[g.lang_of(i)] for i in range(g.n_nodes)], dtype=np.int64),
        np.minimum(g.node_pos, p_max - 1),
        feats.greedy,
        feats.lp,
    ]).astype(np.int64)
    return NodeFeatureTable(g.verse, numeric, cat.reshape(g.n_nodes, 4))


def write_feature_dump(mags, feats, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("verse\tlang\tpos\t" + "\t".join(CENTRALITIES) + "\tgreedy\tlp\n")
        for g, ft in zip(mags, feats):
            for i in range(g.n_nodes):
                cs = "\t".join(repr(float(x)) for x in ft.centrality[i])
                f.write(f"{g.verse}\t{g.lang_of(i)}\t{int(g.node_pos[i])}\t{cs}\t{ft.greedy[i]}\t{ft.lp[i]}\n")


def read_feature_dump(path, mags) -> list[GraphFeatures]:
    rows = {}
    with open(path, encoding="utf-8") as f:
        next(f)
        for line in f:
            p = line.rstrip("\n").split("\t")
            rows.setdefault(p[0], []).append(p)
    out = []
    for g in mags:
        r = rows.get(g.verse, [])
        if len(r) != g.n_nodes:
            raise ValueError(f"feature dump has {len(r)} rows for verse {g.verse}, graph has {g.n_nodes}")
        cent = np.array([[float(x) for x in p[3:8]] for p in r]).reshape(-1, 5)
        out.append(GraphFeatures(g.verse, cent, np.array([int(p[8]) for p in r], dtype=np.int64),
                                 np.array([int(p[9]) for p in r], dtype=np.int64)))
    return out
