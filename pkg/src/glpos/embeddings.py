"""Sentence-ID word embeddings (PPMI over word x verse counts, truncated SVD)
and loading of externally computed vectors."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import svds

from .corpus_io import CorpusFormatError, MultiParallelCorpus

log = logging.getLogger(__name__)

DENSE_SVD_LIMIT = 3000


@dataclass
class EmbeddingProvider:
    """Word vectors of one dimension.

    ``kind="type"`` vectors are keyed by (lang, word); ``kind="token"``
    vectors by (verse, pos) and belong to a single language.
    """
    dim: int
    kind: str = "type"
    vectors: dict = field(default_factory=dict)
    langs: frozenset = frozenset()

    def lookup(self, lang, word=None, verse=None, pos=None):
        """The stored vector, or None when the key is out of vocabulary."""
        if self.kind == "type":
            return self.vectors.get((lang, word))
        if lang not in self.langs:
            return None
        return self.vectors.get((verse, pos))

    def vector(self, lang, word=None, verse=None, pos=None):
        v = self.lookup(lang, word, verse, pos)
        return (np.zeros(self.dim), True) if v is None else (v, False)

    def for_lang(self, lang) -> "EmbeddingProvider":
        if self.kind == "token":
            return self
        vecs = {k: v for k, v in self.vectors.items() if k[0] == lang}
        return EmbeddingProvider(self.dim, "type", vecs, frozenset([lang]))

    def write(self, path, lang) -> None:
        if self.kind != "type":
            raise ValueError("only type-level providers are written")
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for (l, w), v in self.vectors.items():
                if l == lang:
                    f.write(w + "\t" + " ".join(repr(float(x)) for x in v) + "\n")


@dataclass
class PPMIMatrix:
    rows: list          # (lang, word)
    verses: list
    matrix: sp.csr_matrix


def _count_matrix(corpus, lang, verses, col_index):
    ed = corpus.editions[lang]
    vocab = {}
    r, c = [], []
    for v in verses:
        toks = ed.verses.get(v)
        if not toks:
            continue
        j = col_index[v]
        for w in toks:
            r.append(vocab.setdefault(w, len(vocab)))
            c.append(j)
    if not r:
        raise ValueError(f"language {lang} has no tokens")
    counts = sp.coo_matrix((np.ones(len(r)), (r, c)), shape=(len(vocab), len(verses))).tocsr()
    counts.sum_duplicates()
    return list(vocab), counts


def ppmi_from_counts(counts) -> sp.csr_matrix:
    """max(0, log(c(w,v) T / (c(w) c(v)))) on the stored (non-zero) entries."""
    counts = sp.csr_matrix(counts, dtype=np.float64)
    total = counts.sum()
    row = np.asarray(counts.sum(axis=1)).ravel()
    col = np.asarray(counts.sum(axis=0)).ravel()
    coo = counts.tocoo()
    pmi = np.log(coo.data * total / (row[coo.row] * col[coo.col]))
    out = sp.coo_matrix((np.maximum(pmi, 0.0), (coo.row, coo.col)), shape=counts.shape).tocsr()
    out.eliminate_zeros()
    return out


def build_ppmi(corpus: MultiParallelCorpus, lang: str | Sequence[str]) -> PPMIMatrix:
    """Word x verse PPMI matrix.

    Several languages may be passed; each language's block is computed from
    its own counts and the blocks are stacked over the shared verse columns,
    so the SVD places all languages in one space.
    """
    langs = [lang] if isinstance(lang, str) else list(lang)
    for l in langs:
        if l not in corpus.editions:
            raise KeyError(f"language {l} not in corpus")
    verses = list(corpus.verse_ids())
    col_index = {v: i for i, v in enumerate(verses)}
    rows, blocks = [], []
    for l in langs:
        vocab, counts = _count_matrix(corpus, l, verses, col_index)
        rows.extend((l, w) for w in vocab)
        blocks.append(ppmi_from_counts(counts))
    return PPMIMatrix(rows, verses, sp.vstack(blocks).tocsr())


def truncated_svd(matrix, dim: int):
    """Top-``dim`` singular triplets, singular values descending.

    Each left singular vector is sign-flipped so that its largest-magnitude
    entry is positive (the matching right vector flips with it).
    """
    if dim <= 0:
        raise ValueError("embedding dimension must be positive")
    rows, cols = matrix.shape
    if min(rows, cols) <= DENSE_SVD_LIMIT:
        dense = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix, dtype=float)
        U, s, Vt = np.linalg.svd(dense, full_matrices=False)
    else:
        k = min(dim, min(rows, cols) - 1)
        v0 = np.full(min(rows, cols), 1.0 / np.sqrt(min(rows, cols)))
        U, s, Vt = svds(sp.csr_matrix(matrix), k=k, v0=v0, tol=1e-10)
        order = np.argsort(-s, kind="stable")
        U, s, Vt = U[:, order], s[order], Vt[order]
    tol = (s.max() if len(s) else 0.0) * max(rows, cols) * np.finfo(float).eps
    rank = int(np.sum(s > tol))
    if dim > rank:
        warnings.warn(f"embedding dimension {dim} exceeds matrix rank {rank}; using {rank}")
        dim = rank
    U, s, Vt = U[:, :dim], s[:dim], Vt[:dim]
    flip = np.sign(U[np.argmax(np.abs(U), axis=0), np.arange(dim)])
    flip[flip == 0] = 1.0
    return U * flip, s, Vt * flip[:, None]


def train_sentence_id_embeddings(ppmi: PPMIMatrix, dim: int = 100) -> EmbeddingProvider:
    U, s, _ = truncated_svd(ppmi.matrix, dim)
    W = U * np.sqrt(s)
    vecs = {key: W[i].copy() for i, key in enumerate(ppmi.rows)}
    return EmbeddingProvider(W.shape[1], "type", vecs, frozenset(l for l, _ in ppmi.rows))


def load_external_vectors(path, lang) -> EmbeddingProvider:
    """Read "token<TAB>floats" (type level) or "verse<TAB>pos<TAB>floats" (token level)."""
    vecs, kind, dim = {}, None, None
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            this = "token" if len(parts) == 3 else "type" if len(parts) == 2 else None
            if this is None or (kind is not None and this != kind):
                raise CorpusFormatError("mixed or malformed vector line", path, lineno)
            kind = this
            try:
                v = np.array([float(x) for x in parts[-1].split()])
            except ValueError:
                raise CorpusFormatError("non-numeric vector entry", path, lineno) from None
            if dim is None:
                dim = len(v)
            elif len(v) != dim:
                raise CorpusFormatError(f"vector dimension {len(v)} differs from {dim}", path, lineno)
            key = (lang, parts[0]) if kind == "type" else (parts[0], int(parts[1]))
            vecs[key] = v
    if dim is None:
        raise CorpusFormatError("no vectors in file", path)
    return EmbeddingProvider(dim, kind, vecs, frozenset([lang]))
