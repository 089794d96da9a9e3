"""Monolingual BiLSTM tagger trained on projected (partially NULL) data.

The output layer has 18 cells, the 17 tags plus NULL. NULL-labelled tokens are
masked out of the loss, and at inference the NULL cell is set to -inf so every
token gets a real tag.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, fields
from typing import Iterable, Mapping

import numpy as np

from . import nn
from .nn import tensor as T
from .corpus_io import NULL_INDEX, TAG_INDEX, TAGSET, ProjectedDataset, TaggedSentence
from .embeddings import EmbeddingProvider

log = logging.getLogger(__name__)


@dataclass
class TaggerConfig:
    hidden: int = 128
    epochs: int = 15
    batch: int = 32
    lr: float = 1e-3
    weight_decay: float = 0.01
    clip_norm: float = 5.0
    seed: int = 0

    @classmethod
    def from_dict(cls, d: Mapping) -> "TaggerConfig":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown tagger config keys: {sorted(unknown)}")
        return cls(**d)


@nn.register_model
class TaggerModel(nn.Module):
    """Frozen word vectors (+ OOV flag) -> BiLSTM -> linear over 18 cells.

    Word vectors are standardized per dimension with statistics taken from
    the training tokens; OOV tokens stay at zero with the flag set.
    """

    def __init__(self, config: dict):
        self.config = dict(config)
        rng = np.random.default_rng(config["seed"])
        d = config["emb_dim"]
        self.in_mean = nn.Parameter(np.zeros(d), "in_mean")
        self.in_scale = nn.Parameter(np.ones(d), "in_scale")
        self.in_mean.requires_grad = self.in_scale.requires_grad = False
        self.rnn = nn.BiLSTM(config["emb_dim"] + 1, config["hidden"], rng)
        self.out = nn.Linear(2 * config["hidden"], len(TAGSET), rng)

    @classmethod
    def from_config(cls, config):
        return cls(config)

    def fit_input_stats(self, X, lengths):
        real = np.arange(X.shape[1])[None, :] < lengths[:, None]
        rows = X[real & (X[..., -1] == 0)][:, :-1]
        if len(rows):
            self.in_mean.data = rows.mean(axis=0)
            self.in_scale.data = rows.std(axis=0) + 1e-8

    def standardize(self, X):
        Z = X.copy()
        seen = (X[..., -1] == 0)[..., None]
        Z[..., :-1] = np.where(seen, (X[..., :-1] - self.in_mean.data) / self.in_scale.data, 0.0)
        return Z

    def logits(self, X, lengths):
        return self.out(self.rnn(T.Tensor(self.standardize(X)), lengths))


def _encode(sentences, provider: EmbeddingProvider, lang: str):
    """Padded (B, L, D+1) inputs and lengths."""
    lengths = np.array([len(s.tokens) for s in sentences], dtype=np.int64)
    L = max(1, int(lengths.max(initial=0)))
    X = np.zeros((len(sentences), L, provider.dim + 1))
    for b, s in enumerate(sentences):
        for p, w in enumerate(s.tokens):
            v = provider.lookup(lang, w, s.verse, p)
            if v is None:
                X[b, p, -1] = 1.0
            else:
                X[b, p, :-1] = v
    return X, lengths


def _labels(sentences, L):
    Y = np.full((len(sentences), L), -1, dtype=np.int64)
    for b, s in enumerate(sentences):
        Y[b, :len(s.tags)] = [TAG_INDEX[t] for t in s.tags]
    return Y


def tagger_loss(model: TaggerModel, X, lengths, Y):
    """Masked CE: padding and NULL-labelled tokens contribute nothing."""
    logits = model.logits(X, lengths)
    flat = Y.ravel()
    valid = (flat >= 0) & (flat != NULL_INDEX)
    return T.cross_entropy_masked(T.reshape(logits, (-1, len(TAGSET))), flat, valid)


def train_tagger(dataset: ProjectedDataset, provider: EmbeddingProvider,
                 config: TaggerConfig | None = None) -> TaggerModel:
    config = config or TaggerConfig()
    sents = [s for s in dataset.sentences if s.tokens]
    n_real = sum(t != TAGSET[NULL_INDEX] for s in sents for t in s.tags)
    if n_real == 0:
        raise ValueError(f"{dataset.lang}: dataset has no non-NULL labels")
    model = TaggerModel({"emb_dim": provider.dim, "hidden": config.hidden, "seed": config.seed,
                         "lang": dataset.lang})
    opt = nn.AdamW(list(model.named_parameters()), lr=config.lr, weight_decay=config.weight_decay)
    rng = np.random.default_rng(config.seed)
    X, lengths = _encode(sents, provider, dataset.lang)
    Y = _labels(sents, X.shape[1])
    model.fit_input_stats(X, lengths)
    for epoch in range(config.epochs):
        perm = rng.permutation(len(sents))
        total = 0.0
        for s in range(0, len(sents), config.batch):
            idx = perm[s:s + config.batch]
            L = int(lengths[idx].max())
            opt.zero_grad()
            loss = tagger_loss(model, X[idx, :L], lengths[idx], Y[idx, :L])
            loss.backward()
            nn.clip_grad_norm(opt.params, config.clip_norm)
            opt.step()
            total += loss.item() * len(idx)
        log.debug("tagger epoch %d: loss %.4f", epoch + 1, total / len(sents))
    return model


def predict_tags(model: TaggerModel, X, lengths) -> np.ndarray:
    logits = model.logits(X, lengths).data.copy()
    logits[..., NULL_INDEX] = -np.inf
    return logits.argmax(axis=-1)


def tag_sentences(model: TaggerModel, sentences: Iterable, provider: EmbeddingProvider,
                  lang: str | None = None, batch: int = 64) -> ProjectedDataset:
    """Tag (verse, tokens) pairs or TaggedSentences; NULL is never emitted."""
    if provider.dim != model.config["emb_dim"]:
        raise ValueError(f"provider dimension {provider.dim} != model's {model.config['emb_dim']}")
    lang = lang or model.config["lang"]
    items = []
    for s in sentences:
        if isinstance(s, TaggedSentence):
            items.append(TaggedSentence(s.verse, s.tokens, ("X",) * len(s.tokens)))
        else:
            vid, toks = s
            items.append(TaggedSentence(vid, tuple(toks), ("X",) * len(toks)))
    out = ProjectedDataset(lang, "tagger")
    for s in range(0, len(items), batch):
        chunk = items[s:s + batch]
        X, lengths = _encode(chunk, provider, lang)
        pred = predict_tags(model, X, lengths)
        for b, sent in enumerate(chunk):
            out.sentences.append(TaggedSentence(sent.verse, sent.tokens,
                                                tuple(TAGSET[k] for k in pred[b, :lengths[b]])))
    return out
