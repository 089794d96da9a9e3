"""IBM Model 1 word alignment, intersection symmetrisation and Pharaoh I/O."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .corpus_io import CorpusFormatError, MultiParallelCorpus

log = logging.getLogger(__name__)


def canonical_pair(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass
class AlignmentSet:
    """Links between ``src_lang`` token i and ``tgt_lang`` token j, per verse."""
    src_lang: str
    tgt_lang: str
    links: dict[str, frozenset[tuple[int, int]]] = field(default_factory=dict)
    direction: str = "forward"

    @property
    def pair(self) -> tuple[str, str]:
        return canonical_pair(self.src_lang, self.tgt_lang)

    def reversed(self) -> "AlignmentSet":
        flipped = {v: frozenset((j, i) for i, j in ls) for v, ls in self.links.items()}
        return AlignmentSet(self.tgt_lang, self.src_lang, flipped, self.direction)

    def canonical(self) -> "AlignmentSet":
        return self if (self.src_lang, self.tgt_lang) == self.pair else self.reversed()

    def n_links(self) -> int:
        return sum(len(ls) for ls in self.links.values())

    def __eq__(self, other):
        if not isinstance(other, AlignmentSet):
            return NotImplemented
        a, b = self.canonical(), other.canonical()
        return a.pair == b.pair and a.links == b.links


@dataclass
class TranslationTable:
    """Sparse t(target word | source word) over co-occurring type pairs.

    Source index 0 is the NULL word.
    """
    src_lang: str
    tgt_lang: str
    src_vocab: list            # index 0 is None (NULL)
    tgt_vocab: list
    pair_src: np.ndarray
    pair_tgt: np.ndarray
    prob: np.ndarray
    loglik: list = field(default_factory=list)

    def __post_init__(self):
        self._src_index = {w: i for i, w in enumerate(self.src_vocab)}
        self._tgt_index = {w: i for i, w in enumerate(self.tgt_vocab)}
        self._lookup = {(int(s), int(t)): k for k, (s, t) in enumerate(zip(self.pair_src, self.pair_tgt))}

    def prob_of(self, tgt_word, src_word) -> float:
        """t(tgt_word | src_word); ``src_word=None`` is the NULL word."""
        s = self._src_index.get(src_word)
        t = self._tgt_index.get(tgt_word)
        if s is None or t is None:
            return 0.0
        k = self._lookup.get((s, t))
        return 0.0 if k is None else float(self.prob[k])

    @property
    def t(self) -> dict:
        return {(self.src_vocab[s], self.tgt_vocab[t]): float(p)
                for s, t, p in zip(self.pair_src, self.pair_tgt, self.prob)}

    def row_sums(self) -> np.ndarray:
        return np.bincount(self.pair_src, weights=self.prob, minlength=len(self.src_vocab))

    def write(self, path) -> None:
        rows = sorted(("" if s is None else s, t, p) for (s, t), p in self.t.items())
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(f"# {self.src_lang}\t{self.tgt_lang}\n")
            for s, t, p in rows:
                f.write(f"{s}\t{t}\t{p!r}\n")

    @classmethod
    def read(cls, path) -> "TranslationTable":
        with open(path, encoding="utf-8") as f:
            src_lang, tgt_lang = f.readline()[2:].rstrip("\n").split("\t")
            rows = [line.rstrip("\n").split("\t") for line in f if line.strip()]
        src_vocab, tgt_vocab = [None], []
        si, ti = {None: 0}, {}
        ps, pt, pr = [], [], []
        for s, t, p in rows:
            s = None if s == "" else s
            if s not in si:
                si[s] = len(src_vocab)
                src_vocab.append(s)
            if t not in ti:
                ti[t] = len(tgt_vocab)
                tgt_vocab.append(t)
            ps.append(si[s])
            pt.append(ti[t])
            pr.append(float(p))
        return cls(src_lang, tgt_lang, src_vocab, tgt_vocab, np.array(ps, dtype=np.int64),
                   np.array(pt, dtype=np.int64), np.array(pr))


class _Bitext:
    """Flattened (NULL + source) x target co-occurrence blocks of one language pair."""

    def __init__(self, corpus: MultiParallelCorpus, src: str, tgt: str):
        verses = [v for v in corpus.verse_ids()
                  if v in corpus.editions[src].verses and v in corpus.editions[tgt].verses
                  and corpus.tokens(src, v) and corpus.tokens(tgt, v)]
        if not verses:
            raise ValueError(f"languages {src} and {tgt} share no non-empty verses")
        self.verses = verses
        self.src_vocab = [None]
        self.tgt_vocab = []
        si, ti = {None: 0}, {}
        e_ids, f_ids, seg, norm = [], [], [], []
        tok = 0
        for v in verses:
            e = [0] + [si.setdefault(w, len(si)) for w in corpus.tokens(src, v)]
            f = [ti.setdefault(w, len(ti)) for w in corpus.tokens(tgt, v)]
            le, lf = len(e), len(f)
            e_ids.append(np.repeat(e, lf))
            f_ids.append(np.tile(f, le))
            seg.append(np.tile(np.arange(tok, tok + lf), le))
            norm.append(np.full(lf, float(le)))
            tok += lf
        self.src_vocab = [None] + [w for w in si if w is not None]
        self.tgt_vocab = list(ti)
        e_ids = np.concatenate(e_ids)
        f_ids = np.concatenate(f_ids)
        key = e_ids * len(self.tgt_vocab) + f_ids
        uniq, inv = np.unique(key, return_inverse=True)
        self.pair_src = (uniq // len(self.tgt_vocab)).astype(np.int64)
        self.pair_tgt = (uniq % len(self.tgt_vocab)).astype(np.int64)
        self.flat_ids = inv.astype(np.int64).ravel()
        self.seg = np.concatenate(seg).astype(np.int64)
        self.tok_norm = np.concatenate(norm)
        self.n_tok = tok


def train_ibm1(corpus: MultiParallelCorpus, pair: tuple[str, str], iterations: int = 10) -> TranslationTable:
    """EM-train t(pair[1] word | pair[0] word) with a NULL source word.

    The log-likelihood before each M-step is recorded in ``table.loglik``.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    src, tgt = pair
    bt = _Bitext(corpus, src, tgt)
    t = np.full(len(bt.pair_src), 1.0 / len(bt.tgt_vocab))
    lls = []
    for _ in range(iterations):
        counts, ll = kernels.ibm1_expectation(t, bt.flat_ids, bt.seg, bt.tok_norm, bt.n_tok)
        lls.append(ll)
        totals = np.bincount(bt.pair_src, weights=counts, minlength=len(bt.src_vocab))
        t = counts / totals[bt.pair_src]
    return TranslationTable(src, tgt, bt.src_vocab, bt.tgt_vocab, bt.pair_src, bt.pair_tgt, t, lls)


def align_pair(table: TranslationTable, corpus: MultiParallelCorpus, pair=None) -> AlignmentSet:
    """Viterbi links: each target token goes to its best source word.

    Ties go to the lowest source position. Tokens whose best source is the
    NULL word, or that were never seen in training, get no link.
    """
    src, tgt = pair or (table.src_lang, table.tgt_lang)
    if (src, tgt) != (table.src_lang, table.tgt_lang):
        raise ValueError(f"table is for {table.src_lang}->{table.tgt_lang}, not {src}->{tgt}")
    links = {}
    es, et = corpus.editions[src], corpus.editions[tgt]
    for v in corpus.verse_ids():
        if v not in es.verses or v not in et.verses:
            continue
        e, f = es.verses[v], et.verses[v]
        found = set()
        if e and f:
            for j, fw in enumerate(f):
                scores = [table.prob_of(fw, ew) for ew in e]
                best = int(np.argmax(scores))
                # NULL takes the token only when strictly more probable
                if scores[best] > 0 and scores[best] >= table.prob_of(fw, None):
                    found.add((best, j))
        links[v] = frozenset(found)
    return AlignmentSet(src, tgt, links, "forward")


def symmetrize_intersection(forward: AlignmentSet, backward: AlignmentSet) -> AlignmentSet:
    if (forward.src_lang, forward.tgt_lang) != (backward.tgt_lang, backward.src_lang):
        if (forward.src_lang, forward.tgt_lang) == (backward.src_lang, backward.tgt_lang):
            back = backward
        else:
            raise ValueError("alignment sets are for different language pairs")
    else:
        back = backward.reversed()
    if set(forward.links) != set(back.links):
        raise ValueError("alignment sets cover different verses")
    links = {v: forward.links[v] & back.links[v] for v in forward.links}
    return AlignmentSet(forward.src_lang, forward.tgt_lang, links, "intersection").canonical()


def align_corpus(corpus: MultiParallelCorpus, langs=None, iterations: int = 10,
                 tables_dir=None) -> dict[tuple[str, str], AlignmentSet]:
    """Symmetrised IBM1 alignments for every language pair among ``langs``."""
    langs = list(langs or corpus.langs)
    if tables_dir is not None:
        Path(tables_dir).mkdir(parents=True, exist_ok=True)
    out = {}
    for a, b in itertools.combinations(langs, 2):
        a, b = canonical_pair(a, b)
        try:
            fwd_t = train_ibm1(corpus, (a, b), iterations)
            bwd_t = train_ibm1(corpus, (b, a), iterations)
        except ValueError:
            log.warning("no shared verses for %s-%s, skipping", a, b)
            continue
        if tables_dir is not None:
            fwd_t.write(Path(tables_dir) / f"{a}-{b}.ttable")
            bwd_t.write(Path(tables_dir) / f"{b}-{a}.ttable")
        out[(a, b)] = symmetrize_intersection(align_pair(fwd_t, corpus), align_pair(bwd_t, corpus))
        log.debug("%s-%s: %d links", a, b, out[(a, b)].n_links())
    return out


def read_pharaoh(path, pair: tuple[str, str]) -> AlignmentSet:
    links = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise CorpusFormatError("missing tab separator", path, lineno)
            vid, text = line.split("\t", 1)
            if vid in links:
                raise CorpusFormatError(f"duplicate verse id {vid}", path, lineno)
            pairs = set()
            for item in text.split():
                i, sep, j = item.partition("-")
                if not sep or not i.isdigit() or not j.isdigit():
                    raise CorpusFormatError(f"malformed link {item!r}", path, lineno)
                pairs.add((int(i), int(j)))
            links[vid] = frozenset(pairs)
    return AlignmentSet(pair[0], pair[1], links, "import")


def write_pharaoh(aset: AlignmentSet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for vid, ls in aset.links.items():
            f.write(vid + "\t" + " ".join(f"{i}-{j}" for i, j in sorted(ls)) + "\n")
