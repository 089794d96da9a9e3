"""Synthetic multiparallel corpora with gold tags and gold alignments.

Each verse is drawn once as a latent sequence of (tag, lemma) pairs from a
first-order Markov chain over the 17 tags, then realized per language through
an injective lemma->surface lexicon and a reordering rule. The latent
correspondence gives gold alignments; noise can then be injected into the
alignments and into the source tags.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .alignment import AlignmentSet, canonical_pair, write_pharaoh
from .corpus_io import (ROLES, UPOS, ConlluSentence, ConlluToken, LanguageEdition,
                        MultiParallelCorpus, write_conllu, write_corpus_file, write_tag_file)

REORDERINGS = ("identity", "reverse", "swap")
FUNCTION_TAGS = ("DET", "ADP", "PART")
_SYLLABLES = [c + v for c in "bdfgklmnprstvz" for v in "aeiou"]


@dataclass
class SynthLanguage:
    name: str
    role: str
    reorder: str = "identity"
    drop_function_words: bool = False

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"{self.name}: unknown role {self.role!r}")
        if self.reorder not in REORDERINGS:
            raise ValueError(f"{self.name}: unknown reordering {self.reorder!r}")


def default_languages() -> list[SynthLanguage]:
    return [
        SynthLanguage("sra", "source", "identity"),
        SynthLanguage("srb", "source", "reverse"),
        SynthLanguage("src", "source", "swap"),
        SynthLanguage("dva", "dev", "swap"),
        SynthLanguage("tga", "target", "reverse"),
        SynthLanguage("tgb", "target", "identity"),
    ]


def default_transitions(seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """A fixed sparse-ish tag Markov chain: (initial distribution, 17x17 matrix)."""
    rng = np.random.default_rng(seed)
    n = len(UPOS)
    trans = rng.dirichlet(np.full(n, 0.3), size=n)
    init = rng.dirichlet(np.full(n, 0.5))
    return init, trans


@dataclass
class SynthSpec:
    languages: list[SynthLanguage] = field(default_factory=default_languages)
    verses: int = 500
    mean_length: float = 8.0
    lexicon_size: int = 40          # lemmas per tag
    zipf: float = 1.0               # lemma frequency exponent within a tag
    initial: np.ndarray | None = None
    transitions: np.ndarray | None = None
    p_align: float = 0.0
    p_tag: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.initial is None or self.transitions is None:
            init, trans = default_transitions(0)
            self.initial = init if self.initial is None else self.initial
            self.transitions = trans if self.transitions is None else self.transitions
        self.initial = np.asarray(self.initial, dtype=float)
        self.transitions = np.asarray(self.transitions, dtype=float)
        n = len(UPOS)
        if self.initial.shape != (n,) or self.transitions.shape != (n, n):
            raise ValueError("tag model must be a 17-vector and a 17x17 matrix")
        for name, p in (("initial", self.initial[None]), ("transitions", self.transitions)):
            if (p < 0).any() or not np.allclose(p.sum(axis=1), 1.0, atol=1e-9):
                raise ValueError(f"{name} rows must be probability distributions")
        for name, p in (("p_align", self.p_align), ("p_tag", self.p_tag)):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        if self.lexicon_size < 1:
            raise ValueError("lexicon_size must be >= 1")
        if self.mean_length < 1:
            raise ValueError("mean_length must be >= 1")
        if len({l.name for l in self.languages}) != len(self.languages):
            raise ValueError("language names must be unique")

    def to_json(self) -> dict:
        d = asdict(self)
        d["initial"] = self.initial.tolist()
        d["transitions"] = self.transitions.tolist()
        return d


@dataclass
class SynthCorpus:
    spec: SynthSpec
    corpus: MultiParallelCorpus                 # source tags carry p_tag noise
    gold_tags: dict[str, dict[str, tuple]]      # lang -> verse -> tags
    gold_alignments: dict[tuple[str, str], AlignmentSet]
    alignments: dict[tuple[str, str], AlignmentSet]   # after p_align noise

    def unaligned_fraction(self, lang: str | None = None) -> float:
        """Fraction of tokens (of ``lang`` or all) without any noisy link."""
        hit = total = 0
        for l in ([lang] if lang else self.corpus.langs):
            ed = self.corpus.editions[l]
            for v, toks in ed.verses.items():
                linked = set()
                for (a, b), aset in self.alignments.items():
                    if l == a:
                        linked.update(i for i, _ in aset.links.get(v, ()))
                    elif l == b:
                        linked.update(j for _, j in aset.links.get(v, ()))
                total += len(toks)
                hit += len(linked)
        return 1.0 - hit / total if total else 0.0

    def write(self, out_dir) -> dict:
        """Write corpus, tag, gold and Pharaoh files; return the file manifest."""
        out = Path(out_dir)
        for sub in ("corpus", "tags", "gold", "align", "gold_align"):
            (out / sub).mkdir(parents=True, exist_ok=True)
        manifest = {"languages": {}, "alignments": {}, "gold_alignments": {},
                    "spec": self.spec.to_json()}
        for lang in self.corpus.langs:
            ed = self.corpus.editions[lang]
            entry = {"role": ed.role, "corpus": f"corpus/{lang}.txt", "gold": f"gold/{lang}.conllu"}
            write_corpus_file(ed, out / entry["corpus"])
            if ed.tags is not None:
                entry["tags"] = f"tags/{lang}.tags"
                write_tag_file(ed, out / entry["tags"])
            write_conllu(gold_conllu(ed.verses, self.gold_tags[lang]), out / entry["gold"])
            manifest["languages"][lang] = entry
        for key, sets in (("alignments", self.alignments), ("gold_alignments", self.gold_alignments)):
            sub = "align" if key == "alignments" else "gold_align"
            for (a, b), aset in sets.items():
                rel = f"{sub}/{a}-{b}.txt"
                write_pharaoh(aset.canonical(), out / rel)
                manifest[key][f"{a}-{b}"] = rel
        with open(out / "synth.json", "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=1, sort_keys=True)
            f.write("\n")
        return manifest


def gold_conllu(verses, tags) -> list[ConlluSentence]:
    """Flat trees (first token is the root) carrying the gold tags, keyed by sent_id."""
    out = []
    for v, toks in verses.items():
        if not toks:
            continue
        ts = [ConlluToken(i, w, t, None if i == 0 else 0) for i, (w, t) in enumerate(zip(toks, tags[v]))]
        out.append(ConlluSentence(ts, [], [f"# sent_id = {v}"]))
    return out


def _lexicon(rng, n_tags: int, size: int) -> list[list[str]]:
    """Injective surface forms: lexicon[tag][lemma]."""
    need = n_tags * size
    seen, forms = set(), []
    tries = 0
    while len(forms) < need:
        tries += 1
        if tries > 50 * need + 1000:
            raise ValueError(f"cannot draw {need} distinct surface forms")
        k = rng.integers(1, 4)
        w = "".join(_SYLLABLES[i] for i in rng.integers(0, len(_SYLLABLES), size=k))
        if w not in seen:
            seen.add(w)
            forms.append(w)
    return [forms[t * size:(t + 1) * size] for t in range(n_tags)]


def _order(tags: list[int], rule: str) -> list[int]:
    """Permutation (surface position -> latent index) for one verse."""
    idx = list(range(len(tags)))
    if rule == "reverse":
        return idx[::-1]
    if rule == "swap":
        # adjective-noun pairs flip to noun-adjective
        adj, noun = UPOS.index("ADJ"), UPOS.index("NOUN")
        k = 0
        while k + 1 < len(idx):
            if tags[idx[k]] == adj and tags[idx[k + 1]] == noun:
                idx[k], idx[k + 1] = idx[k + 1], idx[k]
                k += 2
            else:
                k += 1
    return idx


def generate_corpus(spec: SynthSpec, verses: int | None = None) -> SynthCorpus:
    n_verses = spec.verses if verses is None else verses
    n_tags = len(UPOS)
    lex_rng = np.random.default_rng([spec.seed, 0])
    lexicons = {l.name: _lexicon(lex_rng, n_tags, spec.lexicon_size) for l in spec.languages}
    lemma_p = 1.0 / np.arange(1, spec.lexicon_size + 1) ** spec.zipf
    lemma_p /= lemma_p.sum()
    func = {UPOS.index(t) for t in FUNCTION_TAGS}
    width = len(str(max(n_verses, 1)))

    toks = {l.name: {} for l in spec.languages}
    gold = {l.name: {} for l in spec.languages}
    noisy = {l.name: {} for l in spec.languages}
    latent_pos = {l.name: {} for l in spec.languages}   # verse -> surface pos -> latent index
    for k in range(n_verses):
        vid = f"v{k:0{width}d}"
        rng = np.random.default_rng([spec.seed, 1, k])
        length = 1 + int(rng.poisson(spec.mean_length - 1))
        tags = [int(rng.choice(n_tags, p=spec.initial))]
        for _ in range(length - 1):
            tags.append(int(rng.choice(n_tags, p=spec.transitions[tags[-1]])))
        lemmas = rng.choice(spec.lexicon_size, size=length, p=lemma_p)
        for lang in spec.languages:
            order = _order(tags, lang.reorder)
            if lang.drop_function_words:
                order = [i for i in order if tags[i] not in func]
            latent_pos[lang.name][vid] = order
            toks[lang.name][vid] = tuple(lexicons[lang.name][tags[i]][lemmas[i]] for i in order)
            gold[lang.name][vid] = tuple(UPOS[tags[i]] for i in order)
            if lang.role == "source" and spec.p_tag > 0:
                t_rng = np.random.default_rng([spec.seed, 2, k, spec.languages.index(lang)])
                resample = t_rng.random(len(order)) < spec.p_tag
                draws = t_rng.integers(0, n_tags, size=len(order))
                noisy[lang.name][vid] = tuple(UPOS[d] if r else g for g, r, d in
                                              zip(gold[lang.name][vid], resample, draws))
            else:
                noisy[lang.name][vid] = gold[lang.name][vid]

    editions = []
    for lang in spec.languages:
        tags = noisy[lang.name] if lang.role in ("source", "dev") else None
        editions.append(LanguageEdition(lang.name, lang.role, toks[lang.name], tags))
    corpus = MultiParallelCorpus(editions)

    gold_al = {}
    names = [l.name for l in spec.languages]
    for x, y in combinations(names, 2):
        a, b = canonical_pair(x, y)
        links = {}
        for vid in toks[a]:
            pos_b = {lat: p for p, lat in enumerate(latent_pos[b][vid])}
            links[vid] = frozenset((i, pos_b[lat]) for i, lat in enumerate(latent_pos[a][vid])
                                   if lat in pos_b)
        gold_al[(a, b)] = AlignmentSet(a, b, links, "gold")
    noisy_al = {pair: inject_alignment_noise(aset, spec.p_align, [spec.seed, 3, i], corpus)
                for i, (pair, aset) in enumerate(sorted(gold_al.items()))}
    return SynthCorpus(spec, corpus, gold, gold_al, noisy_al)


def inject_alignment_noise(alignments: AlignmentSet, p_a: float, seed, corpus=None) -> AlignmentSet:
    """Keep each link with probability 1-p_a; otherwise delete it or rewire it
    (equally likely) to a random different in-bounds target position.

    Target lengths come from ``corpus`` when given, else from the largest
    target index seen in the verse.
    """
    if not 0.0 <= p_a <= 1.0:
        raise ValueError(f"p_a must lie in [0, 1], got {p_a}")
    if p_a == 0.0:
        return AlignmentSet(alignments.src_lang, alignments.tgt_lang, dict(alignments.links),
                            alignments.direction)
    rng = np.random.default_rng(seed)
    out = {}
    for vid in sorted(alignments.links):
        links = sorted(alignments.links[vid])
        if corpus is not None:
            n_tgt = len(corpus.tokens(alignments.tgt_lang, vid))
        else:
            n_tgt = max((j for _, j in links), default=-1) + 1
        u = rng.random(len(links))
        coin = rng.random(len(links))
        new = set()
        for (i, j), r, c in zip(links, u, coin):
            if r >= p_a:
                new.add((i, j))
            elif c < 0.5 and n_tgt > 1:
                jj = int(rng.integers(0, n_tgt - 1))
                new.add((i, jj if jj < j else jj + 1))
        out[vid] = frozenset(new)
    return AlignmentSet(alignments.src_lang, alignments.tgt_lang, out, "noisy")


def oracle_projection(sc: SynthCorpus, target: str) -> dict[str, tuple]:
    """Project gold source tags through gold alignments (first linked source wins)."""
    out = {}
    sources = sc.corpus.langs_with_role("source")
    for vid, toks in sc.corpus.editions[target].verses.items():
        tags = [None] * len(toks)
        for s in sources:
            a, b = canonical_pair(s, target)
            for i, j in sc.gold_alignments[(a, b)].links.get(vid, ()):
                si, ti = (i, j) if a == s else (j, i)
                if tags[ti] is None:
                    tags[ti] = sc.gold_tags[s][vid][si]
        out[vid] = tuple("NULL" if t is None else t for t in tags)
    return out


def default_fixture(seed: int = 0, verses: int = 500, p_align: float = 0.0, p_tag: float = 0.0) -> SynthCorpus:
    return generate_corpus(SynthSpec(verses=verses, p_align=p_align, p_tag=p_tag, seed=seed))
