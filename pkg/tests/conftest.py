import numpy as np
import pytest

from glpos.corpus_io import LanguageEdition, MultiParallelCorpus


def make_corpus(spec):
    """spec: {lang: (role, {verse: "tok tok"}, {verse: "TAG TAG"} | None)}"""
    eds = []
    for lang, (role, verses, tags) in spec.items():
        v = {k: tuple(s.split()) for k, s in verses.items()}
        t = None if tags is None else {k: tuple(s.split()) for k, s in tags.items()}
        eds.append(LanguageEdition(lang, role, v, t))
    return MultiParallelCorpus(eds)


def random_graph(rng, n, p):
    e = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return np.array(e, dtype=np.int64).reshape(-1, 2)


@pytest.fixture
def write(tmp_path):
    def _write(name, text):
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return p
    return _write


def glp_inputs(sc, dim=16, seed=0):
    """In-memory GLP inputs for a synthetic corpus: (verse data, language index)."""
    from glpos import glp
    from glpos.embeddings import build_ppmi, train_sentence_id_embeddings
    from glpos.graph_features import assemble_node_features, compute_all
    from glpos.mag import build_all

    corpus = sc.corpus
    mags = build_all(corpus, sc.alignments)
    feats = compute_all(mags, seed=seed)
    emb = train_sentence_id_embeddings(build_ppmi(corpus, corpus.langs), dim)
    provs = {l: emb for l in corpus.langs}
    li = {l: i for i, l in enumerate(corpus.langs)}
    data = [glp.make_verse_data(g, assemble_node_features(g, f, provs, li)) for g, f in zip(mags, feats)]
    return data, li


# --- acceptance line reporting ------------------------------------------------------

ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


def record(criterion: int, ok: bool, detail: str) -> bool:
    """Log one check of an acceptance criterion; a criterion passes when all its checks do."""
    ACCEPTANCE.setdefault(criterion, []).append((bool(ok), detail))
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[k]
        status = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        terminalreporter.write_line(f"criterion {k:2d}: {status}  " + "; ".join(d for _, d in parts))
