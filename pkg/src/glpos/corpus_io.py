"""Readers and writers for verse-keyed corpora, tag files, CoNLL-U and tagged datasets.

Corpus files hold one verse per line::

    40001001<TAB>tokenized text with single spaces

Tag files use the same keys with UPOS tags in place of tokens.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

log = logging.getLogger(__name__)

UPOS = (
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
)
NULL = "NULL"
# NULL always sits after the 17 real tags.
NULL_INDEX = len(UPOS)
TAGSET = UPOS + (NULL,)
TAG_INDEX = {t: i for i, t in enumerate(TAGSET)}
N_TAGS = len(UPOS)

ROLES = ("source", "dev", "target")


class CorpusFormatError(ValueError):
    """Raised for malformed or inconsistent input files."""

    def __init__(self, message, path=None, lineno=None):
        self.path = str(path) if path is not None else None
        self.lineno = lineno
        where = ""
        if path is not None:
            where = f"{path}:{lineno}: " if lineno is not None else f"{path}: "
        super().__init__(where + message)


def tag_index(tag: str) -> int:
    try:
        return TAG_INDEX[tag]
    except KeyError:
        raise CorpusFormatError(f"unknown tag {tag!r}") from None


@dataclass(frozen=True)
class LanguageEdition:
    lang: str
    role: str
    verses: Mapping[str, tuple[str, ...]]
    tags: Mapping[str, tuple[str, ...]] | None = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise CorpusFormatError(f"{self.lang}: unknown role {self.role!r}")
        if self.tags is not None:
            for vid, tags in self.tags.items():
                toks = self.verses.get(vid)
                if toks is None:
                    raise CorpusFormatError(f"{self.lang}: tags for unknown verse {vid}")
                if len(toks) != len(tags):
                    raise CorpusFormatError(
                        f"{self.lang}: verse {vid} has {len(toks)} tokens but {len(tags)} tags")

    def with_tags(self, tags: Mapping[str, tuple[str, ...]]) -> "LanguageEdition":
        return replace(self, tags=dict(tags))


@dataclass
class LoadReport:
    lines: dict[str, int] = field(default_factory=dict)
    empty_verses: list[tuple[str, str]] = field(default_factory=list)
    rejects: list[tuple[str, int, str]] = field(default_factory=list)


class MultiParallelCorpus:
    """Immutable collection of language editions keyed by verse id."""

    def __init__(self, editions: Iterable[LanguageEdition], report: LoadReport | None = None):
        self.editions: dict[str, LanguageEdition] = {}
        for ed in editions:
            if ed.lang in self.editions:
                raise CorpusFormatError(f"duplicate language {ed.lang}")
            self.editions[ed.lang] = ed
        self.report = report or LoadReport()
        order: dict[str, None] = {}
        for ed in self.editions.values():
            for vid in ed.verses:
                order.setdefault(vid, None)
        self._verse_order = tuple(order)

    @property
    def langs(self) -> tuple[str, ...]:
        return tuple(self.editions)

    def verse_ids(self) -> tuple[str, ...]:
        """All verse ids, in order of first appearance over the editions."""
        return self._verse_order

    def role(self, lang: str) -> str:
        return self.editions[lang].role

    def langs_with_role(self, *roles: str) -> tuple[str, ...]:
        return tuple(l for l, ed in self.editions.items() if ed.role in roles)

    def langs_for(self, verse: str) -> tuple[str, ...]:
        return tuple(l for l, ed in self.editions.items() if verse in ed.verses)

    def tokens(self, lang: str, verse: str) -> tuple[str, ...]:
        return self.editions[lang].verses[verse]

    def tags(self, lang: str, verse: str) -> tuple[str, ...] | None:
        t = self.editions[lang].tags
        if t is None:
            return None
        return t.get(verse)

    def replace_edition(self, edition: LanguageEdition) -> "MultiParallelCorpus":
        eds = [edition if l == edition.lang else ed for l, ed in self.editions.items()]
        return MultiParallelCorpus(eds, self.report)


def _read_keyed_lines(path, strict=True, report=None, lang=None):
    """Yield (lineno, key, fields) from a "key<TAB>space separated" file."""
    seen = set()
    path = Path(path)
    with open(path, encoding="utf-8", newline="\n") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            if report is not None:
                report.lines[lang] = report.lines.get(lang, 0) + 1
            problem = None
            if "\t" not in line:
                problem = "missing tab separator"
            else:
                key, text = line.split("\t", 1)
                if not key or key != key.strip():
                    problem = "empty or padded verse id"
                elif "\t" in text:
                    problem = "extra tab in text"
                elif key in seen:
                    problem = f"duplicate verse id {key}"
                else:
                    fields = tuple(text.split(" ")) if text else ()
                    if any(not t for t in fields):
                        problem = "empty token (double space?)"
            if problem is not None:
                if strict or (problem.startswith("duplicate")):
                    raise CorpusFormatError(problem, path, lineno)
                report.rejects.append((lang, lineno, problem))
                continue
            seen.add(key)
            yield lineno, key, fields


def read_corpus_file(path, lang, role, strict=True, report=None) -> LanguageEdition:
    verses = {}
    for _, key, toks in _read_keyed_lines(path, strict, report, lang):
        verses[key] = toks
        if not toks and report is not None:
            report.empty_verses.append((lang, key))
    return LanguageEdition(lang, role, verses)


def load_tag_file(path, edition: LanguageEdition) -> LanguageEdition:
    tags = {}
    for lineno, key, fields in _read_keyed_lines(path):
        if key not in edition.verses:
            raise CorpusFormatError(f"verse {key} not in {edition.lang} text", path, lineno)
        for t in fields:
            if t not in TAG_INDEX or t == NULL:
                raise CorpusFormatError(f"unknown tag {t!r}", path, lineno)
        if len(fields) != len(edition.verses[key]):
            raise CorpusFormatError(
                f"tag count mismatch for verse {key}: "
                f"{len(fields)} tags, {len(edition.verses[key])} tokens", path, lineno)
        tags[key] = fields
    missing = [v for v in edition.verses if v not in tags]
    if missing:
        raise CorpusFormatError(f"{len(missing)} verses without tags (first: {missing[0]})", path)
    return edition.with_tags(tags)


def load_corpus(paths: Mapping[str, str | Path], roles: Mapping[str, str],
                tag_paths: Mapping[str, str | Path] | None = None,
                strict: bool = True) -> MultiParallelCorpus:
    """Load one corpus file per language.

    Source languages must come with a tag file; dev languages may. With
    ``strict=False`` malformed lines are recorded in ``corpus.report.rejects``
    instead of raising (duplicate ids always raise).
    """
    tag_paths = dict(tag_paths or {})
    report = LoadReport()
    editions = []
    for lang, path in paths.items():
        role = roles[lang]
        ed = read_corpus_file(path, lang, role, strict=strict, report=report)
        if lang in tag_paths:
            ed = load_tag_file(tag_paths[lang], ed)
        elif role == "source":
            raise CorpusFormatError(f"source language {lang} has no tag file")
        editions.append(ed)
    if report.empty_verses:
        log.info("%d empty verses kept (excluded from graphs)", len(report.empty_verses))
    return MultiParallelCorpus(editions, report)


def write_corpus_file(edition: LanguageEdition, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for vid, toks in edition.verses.items():
            f.write(f"{vid}\t{' '.join(toks)}\n")


def write_tag_file(edition: LanguageEdition, path) -> None:
    if edition.tags is None:
        raise ValueError(f"{edition.lang} has no tags")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for vid in edition.verses:
            f.write(f"{vid}\t{' '.join(edition.tags[vid])}\n")


# --- CoNLL-U -----------------------------------------------------------------

@dataclass(frozen=True)
class ConlluToken:
    index: int          # 0-based position among regular tokens
    form: str
    upos: str
    head: int | None    # 0-based index of the head, None for the root


@dataclass
class ConlluSentence:
    tokens: list[ConlluToken]
    multiword: list[tuple[int, int, str]] = field(default_factory=list)  # 0-based inclusive span
    comments: list[str] = field(default_factory=list)

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]

    @property
    def root(self) -> int:
        return next(t.index for t in self.tokens if t.head is None)

    def depths(self) -> list[int]:
        """Distance of every token from the root (root has depth 0)."""
        out = []
        for t in self.tokens:
            d, cur = 0, t
            while cur.head is not None:
                cur = self.tokens[cur.head]
                d += 1
            out.append(d)
        return out


def _check_tree(tokens, path, lineno):
    roots = [t.index for t in tokens if t.head is None]
    if len(roots) != 1:
        raise CorpusFormatError(f"sentence has {len(roots)} roots", path, lineno)
    for t in tokens:
        seen = {t.index}
        cur = t
        while cur.head is not None:
            if cur.head in seen:
                raise CorpusFormatError(f"cyclic head chain through token {cur.head + 1}", path, lineno)
            seen.add(cur.head)
            cur = tokens[cur.head]


def read_conllu(path) -> list[ConlluSentence]:
    sentences = []
    rows, mwt, comments = [], [], []
    start = None

    def flush(lineno):
        nonlocal rows, mwt, comments
        if not rows:
            if mwt:
                raise CorpusFormatError("multiword range without tokens", path, lineno)
            rows, comments = [], []
            return
        n = len(rows)
        toks = []
        for i, (tid, form, upos, head, ln) in enumerate(rows):
            if tid != i + 1:
                raise CorpusFormatError(f"token id {tid} out of sequence", path, ln)
            if head < 0 or head > n:
                raise CorpusFormatError(f"head {head} out of range", path, ln)
            toks.append(ConlluToken(i, form, upos, None if head == 0 else head - 1))
        _check_tree(toks, path, start)
        sentences.append(ConlluSentence(toks, [(a - 1, b - 1, f) for a, b, f in mwt], comments))
        rows, mwt, comments = [], [], []

    with open(path, encoding="utf-8") as f:
        lineno = 0
        for lineno, raw in enumerate(f, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                flush(lineno)
                start = None
                continue
            if start is None:
                start = lineno
            if line.startswith("#"):
                comments.append(line)
                continue
            cols = line.split("\t")
            if len(cols) < 4:
                raise CorpusFormatError("missing UPOS column", path, lineno)
            tid = cols[0]
            if "." in tid:
                continue  # empty node of the enhanced graph
            if "-" in tid:
                a, b = tid.split("-")
                mwt.append((int(a), int(b), cols[1]))
                continue
            upos = cols[3]
            if upos == "_" or upos not in TAG_INDEX or upos == NULL:
                raise CorpusFormatError(f"bad UPOS {upos!r}", path, lineno)
            if len(cols) < 7 or not cols[6].isdigit():
                raise CorpusFormatError("missing or non-numeric HEAD column", path, lineno)
            rows.append((int(tid), cols[1], upos, int(cols[6]), lineno))
        flush(lineno)
    return sentences


def write_conllu(sentences: Sequence[ConlluSentence], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for s in sentences:
            for c in s.comments:
                f.write(c + "\n")
            ranges = {a: (b, form) for a, b, form in s.multiword}
            for t in s.tokens:
                if t.index in ranges:
                    b, form = ranges[t.index]
                    f.write(f"{t.index + 1}-{b + 1}\t{form}" + "\t_" * 8 + "\n")
                head = 0 if t.head is None else t.head + 1
                deprel = "root" if t.head is None else "dep"
                f.write(f"{t.index + 1}\t{t.form}\t_\t{t.upos}\t_\t_\t{head}\t{deprel}\t_\t_\n")
            f.write("\n")


# --- tagged datasets ---------------------------------------------------------

@dataclass(frozen=True)
class TaggedSentence:
    verse: str
    tokens: tuple[str, ...]
    tags: tuple[str, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.tags):
            raise ValueError(f"verse {self.verse}: {len(self.tokens)} tokens, {len(self.tags)} tags")


@dataclass
class ProjectedDataset:
    lang: str
    provenance: str                 # baseline | glpb | glpsl | gold | tagger
    sentences: list[TaggedSentence] = field(default_factory=list)
    threshold: float | None = None  # self-learning confidence threshold, when one applied

    def __len__(self):
        return len(self.sentences)

    def by_verse(self) -> dict[str, TaggedSentence]:
        return {s.verse: s for s in self.sentences}


def write_tagged_dataset(dataset: ProjectedDataset, path) -> None:
    thr = "none" if dataset.threshold is None else repr(float(dataset.threshold))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# lang = {dataset.lang}\n")
        f.write(f"# provenance = {dataset.provenance}\n")
        f.write(f"# threshold = {thr}\n")
        for s in dataset.sentences:
            f.write(f"\n# verse = {s.verse}\n")
            for tok, tag in zip(s.tokens, s.tags):
                if tag not in TAG_INDEX:
                    raise ValueError(f"verse {s.verse}: unknown tag {tag!r}")
                f.write(f"{tok}\t{tag}\n")


def read_tagged_dataset(path) -> ProjectedDataset:
    header = {}
    sentences = []
    cur = None

    def close():
        if cur is not None:
            vid, toks, tags = cur
            sentences.append(TaggedSentence(vid, tuple(toks), tuple(tags)))

    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.rstrip("\n")
            if not line:
                continue
            if line.startswith("# "):
                key, _, val = line[2:].partition(" = ")
                if key == "verse":
                    close()
                    cur = (val, [], [])
                elif cur is None:
                    header[key] = val
                continue
            if cur is None:
                raise CorpusFormatError("token line before any '# verse' line", path, lineno)
            parts = line.split("\t")
            if len(parts) != 2 or parts[1] not in TAG_INDEX:
                raise CorpusFormatError(f"malformed token line {line!r}", path, lineno)
            cur[1].append(parts[0])
            cur[2].append(parts[1])
    close()
    if "lang" not in header or "provenance" not in header:
        raise CorpusFormatError("missing dataset header", path)
    thr = header.get("threshold", "none")
    return ProjectedDataset(header["lang"], header["provenance"], sentences,
                            None if thr == "none" else float(thr))
