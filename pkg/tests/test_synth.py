import filecmp

import numpy as np
import pytest

from glpos.alignment import AlignmentSet
from glpos.corpus_io import load_corpus, read_conllu
from glpos.synth import (SynthLanguage, SynthSpec, default_fixture, generate_corpus,
                         inject_alignment_noise, oracle_projection)


@pytest.fixture(scope="module")
def small():
    return default_fixture(seed=0, verses=60)


def test_oracle_projection_is_exact_without_noise(small):
    for t in small.corpus.langs_with_role("target"):
        proj = oracle_projection(small, t)
        assert all(proj[v] == small.gold_tags[t][v] for v in proj)


def test_gold_alignments_are_bijections_and_reverse_is_reversal(small):
    for (a, b), aset in small.gold_alignments.items():
        for v, links in aset.links.items():
            n = len(small.corpus.tokens(a, v))
            assert len(links) == n == len(small.corpus.tokens(b, v))
            assert len({i for i, _ in links}) == n and len({j for _, j in links}) == n
    # sra is identity-ordered, srb reversed
    for v, links in small.gold_alignments[("sra", "srb")].links.items():
        n = len(small.corpus.tokens("sra", v))
        assert links == frozenset((i, n - 1 - i) for i in range(n))


def test_tag_noise_only_on_sources():
    sc = default_fixture(seed=0, verses=60, p_tag=0.5)
    ed = sc.corpus.editions
    diff = sum(a != b for v in ed["sra"].verses for a, b in zip(ed["sra"].tags[v], sc.gold_tags["sra"][v]))
    assert diff > 0
    assert all(ed["dva"].tags[v] == sc.gold_tags["dva"][v] for v in ed["dva"].verses)


def test_alignment_noise():
    rng = np.random.default_rng(0)
    links = {f"v{k}": frozenset((i, i) for i in range(10)) for k in range(100)}
    aset = AlignmentSet("a", "b", links)
    assert inject_alignment_noise(aset, 0.0, 1).links == links
    full = inject_alignment_noise(aset, 1.0, 1)
    kept = sum(len(l & links[v]) for v, l in full.links.items())
    assert kept / 1000 < 0.01
    assert all(0 <= j < 10 for l in full.links.values() for _, j in l)
    assert inject_alignment_noise(aset, 0.3, 7).links == inject_alignment_noise(aset, 0.3, 7).links
    sc = default_fixture(seed=0, verses=30, p_align=1.0)
    assert sc.unaligned_fraction() > 0
    with pytest.raises(ValueError):
        inject_alignment_noise(aset, 1.5, 0)


def test_write_is_deterministic_and_loadable(tmp_path):
    a = default_fixture(seed=2, verses=20).write(tmp_path / "a")
    default_fixture(seed=2, verses=20).write(tmp_path / "b")
    files = [p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file()]
    assert files
    for f in files:
        assert filecmp.cmp(tmp_path / "a" / f, tmp_path / "b" / f, shallow=False), f
    paths = {l: tmp_path / "a" / e["corpus"] for l, e in a["languages"].items()}
    roles = {l: e["role"] for l, e in a["languages"].items()}
    tags = {l: tmp_path / "a" / e["tags"] for l, e in a["languages"].items() if "tags" in e}
    corpus = load_corpus(paths, roles, tags)
    assert len(corpus.langs) == 6
    gold = read_conllu(tmp_path / "a" / a["languages"]["tga"]["gold"])
    assert len(gold) == 20


def test_drop_function_words_leaves_unaligned_tokens():
    langs = [SynthLanguage("s", "source"), SynthLanguage("t", "target", drop_function_words=True)]
    sc = generate_corpus(SynthSpec(languages=langs, verses=40, seed=0))
    assert sc.unaligned_fraction("s") > 0 and sc.unaligned_fraction("t") == 0


def test_spec_validation():
    with pytest.raises(ValueError):
        SynthSpec(p_align=2.0)
    with pytest.raises(ValueError):
        SynthSpec(transitions=np.ones((17, 17)))
    with pytest.raises(ValueError):
        SynthLanguage("x", "source", reorder="scramble")
    with pytest.raises(ValueError):
        SynthSpec(lexicon_size=0)
