import itertools

import numpy as np
import pytest

from glpos.alignment import (AlignmentSet, TranslationTable, align_corpus, align_pair,
                             read_pharaoh, symmetrize_intersection, train_ibm1, write_pharaoh)
from glpos.corpus_io import CorpusFormatError

from conftest import make_corpus


def reference_em(pairs, iterations):
    """Textbook IBM Model 1 with a NULL source word, plain dicts."""
    tv = {f for _, fs in pairs for f in fs}
    t = {}
    for es, fs in pairs:
        for e in [None] + es:
            for f in fs:
                t[(e, f)] = 1.0 / len(tv)
    for _ in range(iterations):
        count, total = {}, {}
        for es, fs in pairs:
            src = [None] + es
            for f in fs:
                z = sum(t[(e, f)] for e in src)
                for e in src:
                    c = t[(e, f)] / z
                    count[(e, f)] = count.get((e, f), 0.0) + c
                    total[e] = total.get(e, 0.0) + c
        t = {k: count[k] / total[k[0]] for k in t}
    return t


def toy():
    return make_corpus({"e": ("source", {"1": "a b", "2": "a"}, {"1": "X X", "2": "X"}),
                        "f": ("target", {"1": "x y", "2": "x"}, None)})


def test_two_sentence_corpus_matches_reference():
    table = train_ibm1(toy(), ("e", "f"), 20)
    ref = reference_em([(["a", "b"], ["x", "y"]), (["a"], ["x"])], 20)
    assert table.prob_of("x", "a") > 0.9
    for (e, f), p in ref.items():
        assert table.prob_of(f, e) == pytest.approx(p, abs=1e-12)


def test_identity_corpus_argmax_is_identity():
    rng = np.random.default_rng(3)
    words = [f"w{i}" for i in range(8)]
    verses = {str(k): " ".join(rng.choice(words, size=rng.integers(2, 6), replace=False))
              for k in range(30)}
    c = make_corpus({"a": ("target", verses, None), "b": ("target", verses, None)})
    table = train_ibm1(c, ("a", "b"), 10)
    seen = {w for s in verses.values() for w in s.split()}
    for w in seen:
        best = max(seen, key=lambda f: table.prob_of(f, w))
        assert best == w


def test_no_shared_verses():
    c = make_corpus({"a": ("target", {"1": "x"}, None), "b": ("target", {"2": "y"}, None)})
    with pytest.raises(ValueError, match="share no"):
        train_ibm1(c, ("a", "b"), 5)


def test_loglik_monotone_and_row_stochastic():
    rng = np.random.default_rng(0)
    vs = {str(k): " ".join(rng.choice(list("abcdef"), size=rng.integers(1, 6))) for k in range(15)}
    ws = {str(k): " ".join(rng.choice(list("uvwxyz"), size=rng.integers(1, 6))) for k in range(15)}
    c = make_corpus({"a": ("target", vs, None), "b": ("target", ws, None)})
    table = train_ibm1(c, ("a", "b"), 30)
    assert np.all(np.diff(table.loglik) >= -1e-9)
    np.testing.assert_allclose(table.row_sums(), 1.0, atol=1e-9)


def test_table_round_trip(tmp_path):
    table = train_ibm1(toy(), ("e", "f"), 5)
    table.write(tmp_path / "t.tsv")
    again = TranslationTable.read(tmp_path / "t.tsv")
    assert again.t == table.t
    assert again.prob_of("x", None) == table.prob_of("x", None)


def test_one_to_one_lexicon_gives_diagonal():
    rng = np.random.default_rng(1)
    lex = {f"s{i}": f"t{i}" for i in range(6)}
    vs, ws = {}, {}
    for k in range(40):
        words = list(rng.choice(list(lex), size=rng.integers(2, 5), replace=False))
        vs[str(k)] = " ".join(words)
        ws[str(k)] = " ".join(lex[w] for w in words)
    c = make_corpus({"a": ("target", vs, None), "b": ("target", ws, None)})
    al = align_pair(train_ibm1(c, ("a", "b"), 10), c)
    for v, links in al.links.items():
        assert links == {(i, i) for i in range(len(vs[v].split()))}


def test_unseen_token_and_empty_verse_get_no_links():
    c = make_corpus({"e": ("target", {"1": "a b", "2": "a", "3": "a"}, None),
                     "f": ("target", {"1": "x y", "2": "x", "3": ""}, None)})
    table = train_ibm1(c, ("e", "f"), 10)
    c2 = make_corpus({"e": ("target", {"1": "a"}, None), "f": ("target", {"1": "x zzz"}, None)})
    al = align_pair(table, c2)
    assert all(j != 1 for _, j in al.links["1"])
    assert align_pair(table, c).links["3"] == frozenset()


def test_intersection_examples():
    fwd = AlignmentSet("a", "b", {"1": frozenset({(0, 0), (1, 2)})})
    bwd = AlignmentSet("b", "a", {"1": frozenset({(0, 0)})})
    assert symmetrize_intersection(fwd, bwd).links["1"] == {(0, 0)}
    disjoint = AlignmentSet("b", "a", {"1": frozenset({(3, 3)})})
    assert symmetrize_intersection(fwd, disjoint).links["1"] == frozenset()
    same = symmetrize_intersection(fwd, fwd.reversed())
    assert same.links == fwd.links


def test_intersection_is_subset_and_idempotent():
    rng = np.random.default_rng(0)
    for _ in range(50):
        f = frozenset((int(i), int(j)) for i, j in rng.integers(0, 5, size=(6, 2)))
        b = frozenset((int(i), int(j)) for i, j in rng.integers(0, 5, size=(6, 2)))
        fwd = AlignmentSet("a", "b", {"v": f})
        bwd = AlignmentSet("b", "a", {"v": frozenset((j, i) for i, j in b)})
        sym = symmetrize_intersection(fwd, bwd)
        assert sym.links["v"] <= f and sym.links["v"] <= b
        assert symmetrize_intersection(sym, sym.reversed()) == sym


def test_mismatched_verses_raise():
    fwd = AlignmentSet("a", "b", {"1": frozenset()})
    bwd = AlignmentSet("b", "a", {"2": frozenset()})
    with pytest.raises(ValueError):
        symmetrize_intersection(fwd, bwd)


def test_pharaoh(write, tmp_path):
    p = write("a.txt", "40001001\t0-0 1-2\n40001002\t\n")
    al = read_pharaoh(p, ("a", "b"))
    assert al.links == {"40001001": {(0, 0), (1, 2)}, "40001002": frozenset()}
    write_pharaoh(al, tmp_path / "b.txt")
    assert read_pharaoh(tmp_path / "b.txt", ("a", "b")) == al
    with pytest.raises(CorpusFormatError):
        read_pharaoh(write("c.txt", "1\t0-x\n"), ("a", "b"))


def test_align_corpus_covers_all_pairs(tmp_path):
    c = make_corpus({l: ("target", {"1": "a b", "2": "a"}, None) for l in "xyz"})
    out = align_corpus(c, tables_dir=tmp_path / "tables")
    assert set(out) == set(itertools.combinations("xyz", 2))
    assert len(list((tmp_path / "tables").iterdir())) == 6
