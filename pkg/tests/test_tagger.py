import numpy as np
import pytest

from glpos import tagger
from glpos.corpus_io import NULL, ProjectedDataset, TaggedSentence, UPOS
from glpos.embeddings import EmbeddingProvider
from glpos.nn import grad_check


def provider(words, dim=6, seed=0):
    rng = np.random.default_rng(seed)
    return EmbeddingProvider(dim, "type", {("t", w): rng.normal(size=dim) for w in words}, frozenset("t"))


def dataset(n=10, seed=0, null_rate=0.0):
    rng = np.random.default_rng(seed)
    words = [f"w{i}" for i in range(12)]
    tag_of = {w: UPOS[i % len(UPOS)] for i, w in enumerate(words)}
    ds = ProjectedDataset("t", "test")
    for k in range(n):
        toks = tuple(rng.choice(words, size=int(rng.integers(2, 7))))
        tags = tuple(NULL if rng.random() < null_rate else tag_of[w] for w in toks)
        ds.sentences.append(TaggedSentence(str(k), toks, tags))
    return ds, provider(words)


SMALL = tagger.TaggerConfig(hidden=8, epochs=3, seed=0)


def test_loss_ignores_null_positions():
    ds, prov = dataset(4, null_rate=0.4)
    model = tagger.TaggerModel({"emb_dim": prov.dim, "hidden": 4, "seed": 0, "lang": "t"})
    X, lengths = tagger._encode(ds.sentences, prov, "t")
    Y = tagger._labels(ds.sentences, X.shape[1])
    base = tagger.tagger_loss(model, X, lengths, Y).item()
    # perturb the labels at NULL positions into other NULLs and the model's predictions there:
    # only the masked rows change, so the loss is bit-identical
    from glpos.nn import tensor as T
    logits = model.logits(X, lengths)
    flat = Y.ravel()
    valid = (flat >= 0) & (flat != tagger.NULL_INDEX)
    z = logits.data.reshape(-1, len(tagger.TAGSET)).copy()
    z[~valid] = np.random.default_rng(1).normal(size=z[~valid].shape) * 1e3
    assert T.cross_entropy_masked(T.Tensor(z), flat, valid).item() == base


def test_all_null_dataset_errors():
    ds, prov = dataset(3, null_rate=1.0)
    with pytest.raises(ValueError, match="non-NULL"):
        tagger.train_tagger(ds, prov, SMALL)


def test_same_seed_same_parameters():
    ds, prov = dataset(6)
    runs = [tagger.train_tagger(ds, prov, SMALL) for _ in range(3)]
    for (k, a), (_, b), (_, c) in zip(*(m.named_parameters() for m in runs)):
        assert a.data.tobytes() == b.data.tobytes() == c.data.tobytes(), k


def test_empty_sentence_and_never_null():
    ds, prov = dataset(6)
    model = tagger.train_tagger(ds, prov, SMALL)
    out = tagger.tag_sentences(model, [("e", ()), ("x", ("w1", "unknown", "w3"))], prov)
    assert out.sentences[0].tags == ()
    assert len(out.sentences[1].tags) == 3 and NULL not in out.sentences[1].tags
    # push the NULL cell far above everything else: still never chosen
    model.out.bias.data[tagger.NULL_INDEX] = 1e6
    out = tagger.tag_sentences(model, ds.sentences, prov)
    assert all(NULL not in s.tags for s in out.sentences)
    with pytest.raises(ValueError):
        tagger.tag_sentences(model, ds.sentences, provider(["a"], dim=3))


def test_overfits_ten_sentences():
    ds, prov = dataset(10, seed=3)
    model = tagger.train_tagger(ds, prov, tagger.TaggerConfig(hidden=16, epochs=60, batch=5, lr=1e-2, seed=0))
    out = tagger.tag_sentences(model, ds.sentences, prov)
    assert [s.tags for s in out.sentences] == [s.tags for s in ds.sentences]


def test_full_loss_grad_check():
    ds, prov = dataset(2, seed=4, null_rate=0.3)
    model = tagger.TaggerModel({"emb_dim": prov.dim, "hidden": 3, "seed": 0, "lang": "t"})
    X, lengths = tagger._encode(ds.sentences, prov, "t")
    model.fit_input_stats(X, lengths)
    Y = tagger._labels(ds.sentences, X.shape[1])
    params = [p for p in model.parameters() if p.requires_grad]
    assert grad_check(lambda: tagger.tagger_loss(model, X, lengths, Y), params) < 1e-4
