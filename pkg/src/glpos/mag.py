"""Per-verse multilingual alignment graphs."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Mapping, NamedTuple

import numpy as np

from .alignment import AlignmentSet, canonical_pair
from .corpus_io import NULL, TAG_INDEX, UPOS, CorpusFormatError, MultiParallelCorpus


class NodeId(NamedTuple):
    verse: str
    lang: str
    pos: int


class AlignmentIndexError(CorpusFormatError):
    pass


@dataclass(frozen=True)
class Mag:
    verse: str
    langs: tuple[str, ...]          # languages present in this verse, corpus order
    roles: Mapping[str, str]
    words: tuple[str, ...]          # one per node
    node_lang: np.ndarray           # index into ``langs``
    node_pos: np.ndarray
    edges: np.ndarray               # (E, 2), a < b, sorted
    labels: np.ndarray              # tag index, -1 where unknown

    @property
    def n_nodes(self) -> int:
        return len(self.words)

    @property
    def nodes(self) -> list[NodeId]:
        return [NodeId(self.verse, self.langs[l], int(p)) for l, p in zip(self.node_lang, self.node_pos)]

    def lang_of(self, i: int) -> str:
        return self.langs[self.node_lang[i]]

    def role_of(self, i: int) -> str:
        return self.roles[self.lang_of(i)]

    def label_of(self, node: NodeId):
        i = self.index(node)
        return None if self.labels[i] < 0 else UPOS[self.labels[i]]

    def index(self, node: NodeId) -> int:
        li = self.langs.index(node.lang)
        hits = np.flatnonzero((self.node_lang == li) & (self.node_pos == node.pos))
        if len(hits) != 1:
            raise KeyError(node)
        return int(hits[0])

    def nodes_of(self, lang: str) -> np.ndarray:
        return np.flatnonzero(self.node_lang == self.langs.index(lang))

    def role_mask(self, *roles: str) -> np.ndarray:
        keep = np.array([self.roles[l] in roles for l in self.langs], dtype=bool)
        return keep[self.node_lang] if self.n_nodes else np.zeros(0, dtype=bool)

    def csr(self):
        """Symmetric adjacency as (indptr, indices)."""
        n = self.n_nodes
        if len(self.edges):
            src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
            dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        else:
            src = dst = np.zeros(0, dtype=np.int64)
        order = np.lexsort((dst, src))
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return indptr, dst[order].astype(np.int64)

    def degree(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n_nodes) if len(self.edges) \
            else np.zeros(self.n_nodes, dtype=np.int64)


def build_mag(corpus: MultiParallelCorpus, alignments: Mapping[tuple[str, str], AlignmentSet],
              verse: str) -> Mag:
    langs = tuple(l for l in corpus.langs_for(verse) if corpus.tokens(l, verse))
    offset, words, node_lang, node_pos, labels = {}, [], [], [], []
    for li, lang in enumerate(langs):
        offset[lang] = len(words)
        toks = corpus.tokens(lang, verse)
        tags = corpus.tags(lang, verse) if corpus.role(lang) in ("source", "dev") else None
        for p, w in enumerate(toks):
            words.append(w)
            node_lang.append(li)
            node_pos.append(p)
            labels.append(TAG_INDEX[tags[p]] if tags is not None else -1)
    edges = set()
    for x in range(len(langs)):
        for y in range(x + 1, len(langs)):
            a, b = canonical_pair(langs[x], langs[y])
            aset = alignments.get((a, b))
            if aset is None:
                continue
            aset = aset.canonical()
            la, lb = len(corpus.tokens(a, verse)), len(corpus.tokens(b, verse))
            for i, j in aset.links.get(verse, ()):
                if not (0 <= i < la and 0 <= j < lb):
                    raise AlignmentIndexError(
                        f"verse {verse}, pair {a}-{b}: link {i}-{j} out of bounds ({la}x{lb} tokens)")
                u, v = offset[a] + i, offset[b] + j
                edges.add((min(u, v), max(u, v)))
    e = np.array(sorted(edges), dtype=np.int64).reshape(-1, 2)
    roles = {l: corpus.role(l) for l in langs}
    return Mag(verse, langs, roles, tuple(words), np.array(node_lang, dtype=np.int64),
               np.array(node_pos, dtype=np.int64), e, np.array(labels, dtype=np.int64))


def build_all(corpus: MultiParallelCorpus, alignments, verses=None) -> list[Mag]:
    """MAGs for every verse with at least one non-empty edition."""
    out = []
    for v in verses or corpus.verse_ids():
        if any(corpus.tokens(l, v) for l in corpus.langs_for(v)):
            out.append(build_mag(corpus, alignments, v))
    return out


def validate_mag(g: Mag) -> dict:
    deg = g.degree()
    isolated = [g.nodes[i] for i in np.flatnonzero(deg == 0)]
    hist = {}
    for li, lang in enumerate(g.langs):
        hist[lang] = dict(sorted(Counter(deg[g.node_lang == li].tolist()).items()))
    same = [(int(a), int(b)) for a, b in g.edges if g.node_lang[a] == g.node_lang[b]]
    bad_labels = [g.nodes[i] for i in range(g.n_nodes)
                  if (g.role_of(i) == "source" and g.labels[i] < 0)
                  or (g.role_of(i) == "target" and g.labels[i] >= 0)]
    return {
        "verse": g.verse,
        "nodes": g.n_nodes,
        "edges": int(len(g.edges)),
        "isolated": isolated,
        "degree_histogram": hist,
        "intra_language_edges": same,
        "label_violations": bad_labels,
        "ok": not same and not bad_labels,
    }


def write_graph_dump(mags, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for g in mags:
            f.write(f"verse {g.verse}\n")
            for i in range(g.n_nodes):
                lab = f" {UPOS[g.labels[i]]}" if g.labels[i] >= 0 else ""
                f.write(f"node {i} {g.lang_of(i)} {int(g.node_pos[i])}{lab}\n")
            for a, b in g.edges:
                f.write(f"edge {a} {b}\n")


def read_graph_dump(path, corpus: MultiParallelCorpus) -> list[Mag]:
    """Rebuild MAGs from a dump; words and roles come from ``corpus``."""
    blocks = []
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            parts = raw.split()
            if not parts:
                continue
            if parts[0] == "verse":
                blocks.append((parts[1], [], []))
            elif parts[0] == "node" and blocks:
                blocks[-1][1].append(parts[2:])
            elif parts[0] == "edge" and blocks:
                blocks[-1][2].append((int(parts[1]), int(parts[2])))
            else:
                raise CorpusFormatError(f"bad graph dump line {raw.strip()!r}", path, lineno)
    mags = []
    for verse, nodes, edges in blocks:
        langs = tuple(dict.fromkeys(n[0] for n in nodes))
        li = {l: i for i, l in enumerate(langs)}
        words = tuple(corpus.tokens(n[0], verse)[int(n[1])] for n in nodes)
        labels = [TAG_INDEX[n[2]] if len(n) > 2 and n[2] != NULL else -1 for n in nodes]
        mags.append(Mag(verse, langs, {l: corpus.role(l) for l in langs}, words,
                        np.array([li[n[0]] for n in nodes], dtype=np.int64),
                        np.array([int(n[1]) for n in nodes], dtype=np.int64),
                        np.array(edges, dtype=np.int64).reshape(-1, 2),
                        np.array(labels, dtype=np.int64)))
    return mags
