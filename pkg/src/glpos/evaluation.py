"""Tokenization reconciliation, accuracy and per-tag reports."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .corpus_io import ConlluSentence, ProjectedDataset, TaggedSentence


class ReconciliationError(ValueError):
    pass


@dataclass(frozen=True)
class ReconciledSentence:
    tokens: tuple[str, ...]
    gold: tuple[str, ...]
    merge_map: tuple[tuple[int, ...], ...]   # merged index -> UD token indices


def _strip(s: str) -> str:
    return "".join(s.split())


def reconcile_tokenization(target_tokens: Sequence[str], ud: ConlluSentence) -> ReconciledSentence:
    """Group consecutive UD tokens under each target token by character matching.

    A merged token takes the tag of its member closest to the root; equal
    depths go to the leftmost member.
    """
    tgt = [_strip(t) for t in target_tokens]
    forms = [_strip(t.form) for t in ud.tokens]
    if "".join(tgt) != "".join(forms):
        raise ReconciliationError(f"character streams differ: {''.join(tgt)!r} vs {''.join(forms)!r}")
    depth = ud.depths()
    k = 0
    groups, gold = [], []
    for ti, tok in enumerate(tgt):
        acc, members = "", []
        while len(acc) < len(tok) and k < len(forms):
            acc += forms[k]
            members.append(k)
            k += 1
        if acc != tok:
            raise ReconciliationError(f"target token {ti} ({target_tokens[ti]!r}) splits a UD token")
        if not members:
            raise ReconciliationError(f"target token {ti} is empty")
        best = min(members, key=lambda m: (depth[m], m))
        groups.append(tuple(members))
        gold.append(ud.tokens[best].upos)
    return ReconciledSentence(tuple(target_tokens), tuple(gold), tuple(groups))


def _tags(s):
    if isinstance(s, (TaggedSentence,)):
        return s.tags
    if isinstance(s, ReconciledSentence):
        return s.gold
    return tuple(s)


def _pairs(pred, gold):
    if len(pred) != len(gold):
        raise ValueError(f"{len(pred)} predicted sentences but {len(gold)} reference sentences")
    for k, (p, g) in enumerate(zip(pred, gold)):
        pt, gt = _tags(p), _tags(g)
        if len(pt) != len(gt):
            raise ValueError(f"sentence {k}: {len(pt)} predicted tags but {len(gt)} reference tags")
        yield from zip(pt, gt)


def accuracy(pred, gold) -> float:
    """Token accuracy over parallel sentence lists (tags, TaggedSentence or ReconciledSentence)."""
    correct = total = 0
    for p, g in _pairs(pred, gold):
        correct += p == g
        total += 1
    return correct / total if total else 0.0


@dataclass
class PerTagReport:
    counts: dict[str, tuple[int, int]] = field(default_factory=dict)   # gold tag -> (correct, total)

    @property
    def correct(self) -> int:
        return sum(c for c, _ in self.counts.values())

    @property
    def total(self) -> int:
        return sum(t for _, t in self.counts.values())

    @property
    def overall(self) -> float:
        return self.correct / self.total if self.total else 0.0

    def accuracy(self, tag) -> float:
        c, t = self.counts[tag]
        return c / t

    def weighted_mean(self) -> Fraction:
        """Count-weighted mean of per-tag accuracies, in exact arithmetic."""
        if not self.total:
            return Fraction(0)
        return sum((t * Fraction(c, t) for c, t in self.counts.values()), Fraction(0)) / self.total

    def rows(self):
        return [(tag, c, t, c / t) for tag, (c, t) in sorted(self.counts.items())]

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("tag,correct,total,accuracy\n")
            for tag, c, t, a in self.rows():
                f.write(f"{tag},{c},{t},{a!r}\n")

    def write_plot_data(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("# tag\taccuracy\n")
            for tag, _, _, a in self.rows():
                f.write(f"{tag}\t{a!r}\n")

    def summary(self) -> dict:
        return {"accuracy": self.overall, "correct": self.correct, "total": self.total,
                "per_tag": {tag: a for tag, _, _, a in self.rows()}}


def per_tag_report(pred, gold) -> PerTagReport:
    counts: dict[str, list[int]] = {}
    for p, g in _pairs(pred, gold):
        c = counts.setdefault(g, [0, 0])
        c[0] += p == g
        c[1] += 1
    return PerTagReport({k: (v[0], v[1]) for k, v in counts.items()})


@dataclass
class Evaluation:
    lang: str
    report: PerTagReport
    sentences: int
    excluded: list[tuple[str, str]]     # (sentence id, reason)

    def summary(self) -> dict:
        out = self.report.summary()
        out.update(lang=self.lang, sentences=self.sentences, excluded=len(self.excluded))
        return out


def sentence_id(s: ConlluSentence) -> str | None:
    for c in s.comments:
        key, _, val = c.lstrip("#").partition("=")
        if key.strip() == "sent_id":
            return val.strip()
    return None


def evaluate_dataset(pred: ProjectedDataset, reference: Sequence[ConlluSentence] | ProjectedDataset) -> Evaluation:
    """Score ``pred`` against UD sentences paired by ``sent_id`` = verse id, or
    against another tagged dataset (silver reference) paired by verse."""
    by_verse = pred.by_verse()
    preds, golds, excluded = [], [], []
    if isinstance(reference, ProjectedDataset):
        for ref in reference.sentences:
            p = by_verse.get(ref.verse)
            if p is None:
                excluded.append((ref.verse, "no prediction"))
            elif p.tokens != ref.tokens:
                excluded.append((ref.verse, "token mismatch"))
            else:
                preds.append(p)
                golds.append(ref)
    else:
        for k, ud in enumerate(reference):
            sid = sentence_id(ud) or str(k)
            p = by_verse.get(sid)
            if p is None:
                excluded.append((sid, "no prediction"))
                continue
            try:
                golds.append(reconcile_tokenization(p.tokens, ud))
                preds.append(p)
            except ReconciliationError as e:
                excluded.append((sid, str(e)))
    return Evaluation(pred.lang, per_tag_report(preds, golds), len(preds), excluded)


def write_summary(evals: Mapping[str, Evaluation], path, extra: dict | None = None) -> dict:
    out = {"languages": {k: e.summary() for k, e in sorted(evals.items())}}
    if extra:
        out.update(extra)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(out, f, indent=1, sort_keys=True)
        f.write("\n")
    return out
