"""Graph label propagation: GLP-B (GATConv encoder + MLP), confidence-based
self-learning, type-level tag distributions, GLP-SL (transformer classifier),
projection, and the majority-vote baseline."""
from __future__ import annotations

import logging
import time
import warnings
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Mapping, NamedTuple

import numpy as np

from . import nn
from .nn import tensor as T
from .alignment import AlignmentSet, canonical_pair
from .corpus_io import N_TAGS, NULL, UPOS, MultiParallelCorpus, ProjectedDataset, TaggedSentence
from .graph_features import C_MAX, P_MAX, NodeFeatureTable
from .mag import Mag, NodeId

log = logging.getLogger(__name__)


@dataclass
class GlpConfig:
    # encoder
    hidden: int = 256
    gat_heads: int = 4
    lang_dropout: float = 0.5
    lang_dim: int = 16
    pos_dim: int = 16
    comm_dim: int = 8
    p_max: int = P_MAX
    c_max: int = C_MAX
    # GLP-B classifier
    mlp_dim: int = 2048
    mlp_layers: int = 2
    lr_glpb: float = 1e-3
    batch_glpb: int = 8
    epochs_glpb: int = 200
    # GLP-SL classifier
    tf_layers: int = 4
    tf_dim: int = 2048
    tf_heads: int = 16
    tf_ff: int = 2048
    lr_glpsl: float = 1e-5
    batch_glpsl: int = 32
    epochs_glpsl: int = 100
    # self-learning and training
    gamma: float = 0.95
    patience: int = 8
    early_stopping: bool = True
    optimizer: str = "adam"
    weight_decay: float = 0.0
    clip_norm: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.batch_glpb < 1 or self.batch_glpsl < 1:
            raise ValueError("batch sizes must be >= 1")
        if self.hidden % self.gat_heads:
            raise ValueError("hidden width must be divisible by gat_heads")
        if not 0.0 <= self.lang_dropout < 1.0:
            raise ValueError("lang_dropout must lie in [0, 1)")

    @classmethod
    def from_dict(cls, d: Mapping) -> "GlpConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown GLP config keys: {sorted(unknown)}")
        return cls(**d)


# --- per-verse model inputs ----------------------------------------------------

@dataclass
class VerseData:
    mag: Mag
    numeric: np.ndarray
    categorical: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    labels: np.ndarray          # tag index or -1
    source: np.ndarray          # bool masks over nodes
    dev: np.ndarray
    target: np.ndarray

    @property
    def n(self):
        return self.mag.n_nodes


def make_verse_data(g: Mag, table: NodeFeatureTable) -> VerseData:
    src, dst = nn.gat_edges(g.n_nodes, g.edges)
    return VerseData(g, table.numeric, table.categorical, src, dst, g.labels.copy(),
                     g.role_mask("source"), g.role_mask("dev"), g.role_mask("target"))


class _Batch(NamedTuple):
    numeric: np.ndarray
    categorical: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    offsets: np.ndarray


def _merge(items: list[VerseData]) -> _Batch:
    offs = np.cumsum([0] + [d.n for d in items])
    return _Batch(
        np.vstack([d.numeric for d in items]),
        np.vstack([d.categorical for d in items]),
        np.concatenate([d.src + o for d, o in zip(items, offs)]),
        np.concatenate([d.dst + o for d, o in zip(items, offs)]),
        offs,
    )


# --- models ---------------------------------------------------------------------

@nn.register_model
class GlpBModel(nn.Module):
    """Two GATConv layers over embedded node features, MLP classifier.

    The language table has one row per supervised (source) language plus a
    shared row used for every language without training labels.
    """

    def __init__(self, config: dict):
        self.config = dict(config)
        c = self.config
        rng = np.random.default_rng(c["seed"])
        self.lang_map = np.full(c["n_langs"], len(c["supervised_langs"]), dtype=np.int64)
        self.lang_map[c["supervised_langs"]] = np.arange(len(c["supervised_langs"]))
        self.lang_emb = nn.Embedding(len(c["supervised_langs"]) + 1, c["lang_dim"], rng)
        self.pos_emb = nn.Embedding(c["p_max"], c["pos_dim"], rng)
        self.greedy_emb = nn.Embedding(c["c_max"], c["comm_dim"], rng)
        self.lp_emb = nn.Embedding(c["c_max"], c["comm_dim"], rng)
        d_in = c["n_numeric"] + c["lang_dim"] + c["pos_dim"] + 2 * c["comm_dim"]
        self.inp = nn.Linear(d_in, c["hidden"], rng)
        heads = c["gat_heads"]
        self.gat1 = nn.GATConv(c["hidden"], c["hidden"] // heads, rng, heads=heads, concat=True)
        self.gat2 = nn.GATConv(c["hidden"], c["hidden"], rng, heads=heads, concat=False)
        self.head = nn.MLP(c["hidden"], c["mlp_dim"], c["mlp_layers"], N_TAGS, rng)

    @classmethod
    def from_config(cls, config):
        return cls(config)

    @property
    def n_numeric(self):
        return self.config["n_numeric"]

    def encode(self, numeric, categorical, src, dst, lang_drop=None):
        """Return (x_in, x_out): the GNN input representation and its output.

        ``lang_drop`` marks nodes whose language is replaced by the shared
        unsupervised-language row (training-time language dropout).
        """
        if numeric.shape[1] != self.n_numeric:
            raise ValueError(f"model expects {self.n_numeric} numeric features, got {numeric.shape[1]}")
        cat = categorical
        lang = self.lang_map[cat[:, 0]]
        if lang_drop is not None:
            lang = np.where(lang_drop, len(self.config["supervised_langs"]), lang)
        x = T.concat([T.Tensor(numeric), self.lang_emb(lang), self.pos_emb(cat[:, 1]),
                      self.greedy_emb(cat[:, 2]), self.lp_emb(cat[:, 3])], axis=1)
        x_in = T.elu(self.inp(x))
        h, _ = self.gat1(x_in, src, dst)
        h, _ = self.gat2(T.elu(h), src, dst)
        return x_in, T.elu(h)

    def logits(self, batch: _Batch, lang_drop=None):
        _, x_out = self.encode(batch.numeric, batch.categorical, batch.src, batch.dst, lang_drop)
        return self.head(x_out)


@nn.register_model
class GlpSLModel(nn.Module):
    """Transformer over all nodes of a verse; token = [x_in | x_out | tag dist | unseen]."""

    def __init__(self, config: dict):
        self.config = dict(config)
        c = self.config
        rng = np.random.default_rng(c["seed"] + 1)
        self.proj = nn.Linear(c["d_in"], c["tf_dim"], rng)
        self.encoder = nn.TransformerEncoder(c["tf_dim"], c["tf_heads"], c["tf_ff"], c["tf_layers"], rng)
        self.out = nn.Linear(c["tf_dim"], N_TAGS, rng)

    @classmethod
    def from_config(cls, config):
        return cls(config)

    def logits(self, X, mask):
        return self.out(self.encoder(self.proj(T.Tensor(X)), mask))


# --- training loop ------------------------------------------------------------------

@dataclass
class TrainReport:
    curve: list = field(default_factory=list)       # (step, loss, dev_metric)
    initial_loss: float = float("nan")
    best_loss: float = float("nan")
    best_epoch: int = 0
    epochs_run: int = 0
    stopped_early: bool = False
    extra: dict = field(default_factory=dict)

    def write_curve(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("step,loss,dev_metric\n")
            for step, loss, dev in self.curve:
                f.write(f"{step},{loss!r},{dev!r}\n")


def fit(model, n_items: int, batch_loss: Callable, dev_metric: Callable | None, *,
        lr, batch_size, max_epochs, patience, seed, optimizer="adam", weight_decay=0.0,
        clip_norm=5.0, early_stopping=True) -> TrainReport:
    """Mini-batch training with per-epoch dev evaluation and patience.

    ``batch_loss(indices)`` returns a scalar loss Tensor for those items.
    The parameters of the best dev epoch are restored at the end.
    """
    if early_stopping and dev_metric is None:
        raise ValueError("early stopping needs dev-language nodes")
    rng = np.random.default_rng(seed)
    params = [(k, p) for k, p in model.named_parameters() if p.requires_grad]
    opt = nn.make_optimizer(optimizer, params, lr, weight_decay)
    report = TrainReport()

    def full_loss():
        tot = 0.0
        for s in range(0, n_items, batch_size):
            tot += batch_loss(np.arange(s, min(s + batch_size, n_items))).item()
        return tot / max(1, -(-n_items // batch_size))

    report.initial_loss = full_loss()
    best = -np.inf
    best_state = model.state_dict()
    report.best_loss = report.initial_loss
    bad = 0
    step = 0
    for epoch in range(1, max_epochs + 1):
        perm = rng.permutation(n_items)
        losses = []
        for s in range(0, n_items, batch_size):
            opt.zero_grad()
            loss = batch_loss(perm[s:s + batch_size])
            loss.backward()
            nn.clip_grad_norm(opt.params, clip_norm)
            opt.step()
            step += 1
            losses.append(loss.item())
        ep_loss = float(np.mean(losses))
        dev = dev_metric() if dev_metric is not None else float("nan")
        report.curve.append((step, ep_loss, dev))
        report.epochs_run = epoch
        improved = (dev > best) if early_stopping else True
        if improved:
            best = dev
            best_state = model.state_dict()
            report.best_epoch = epoch
            report.best_loss = ep_loss
            bad = 0
        else:
            bad += 1
            if bad >= patience:
                report.stopped_early = True
                break
    model.load_state_dict(best_state)
    return report


# --- GLP-B ----------------------------------------------------------------------------

def _stack_labels(items, mask_attr):
    labels = np.concatenate([d.labels for d in items])
    mask = np.concatenate([getattr(d, mask_attr) for d in items])
    return np.where(mask & (labels >= 0) & (labels < N_TAGS), labels, -1)


def supervised_languages(data: list[VerseData], lang_index: Mapping[str, int]) -> list[int]:
    """Indices of languages with labelled source nodes."""
    langs = set()
    for d in data:
        for i in np.flatnonzero(d.source & (d.labels >= 0)):
            langs.add(d.mag.lang_of(i))
    return sorted(lang_index[l] for l in langs)


def glpb_config(data: list[VerseData], cfg: GlpConfig, lang_index: Mapping[str, int]) -> dict:
    c = asdict(cfg)
    keep = ("hidden", "gat_heads", "lang_dim", "pos_dim", "comm_dim", "p_max", "c_max",
            "mlp_dim", "mlp_layers", "seed")
    out = {k: c[k] for k in keep}
    out["n_numeric"] = int(data[0].numeric.shape[1])
    out["n_langs"] = len(lang_index)
    out["supervised_langs"] = supervised_languages(data, lang_index)
    return out


def _accuracy_on(model_logits, items, mask_attr, batch_size=64):
    correct = total = 0
    for s in range(0, len(items), batch_size):
        chunk = items[s:s + batch_size]
        lab = _stack_labels(chunk, mask_attr)
        if not (lab >= 0).any():
            continue
        pred = model_logits(chunk).argmax(axis=1)
        keep = lab >= 0
        correct += int((pred[keep] == lab[keep]).sum())
        total += int(keep.sum())
    return correct / total if total else float("nan")


def train_glpb(data: list[VerseData], cfg: GlpConfig, lang_index: Mapping[str, int]):
    """Train GLP-B; loss on source nodes, early stopping on dev nodes.

    ``lang_index`` maps language codes to the indices used in the
    categorical node features.
    """
    n_labeled = sum(int((d.source & (d.labels >= 0)).sum()) for d in data)
    if n_labeled == 0:
        raise ValueError("no labeled source nodes to train on")
    has_dev = any((d.dev & (d.labels >= 0)).any() for d in data)
    if cfg.early_stopping and not has_dev:
        raise ValueError("early stopping enabled but no labeled dev-language nodes")
    model = GlpBModel(glpb_config(data, cfg, lang_index))
    drop_rng = np.random.default_rng([cfg.seed, 1])

    def batch_loss(idx):
        items = [data[i] for i in idx]
        b = _merge(items)
        drop = drop_rng.random(len(b.numeric)) < cfg.lang_dropout
        return T.cross_entropy_masked(model.logits(b, drop), _stack_labels(items, "source"))

    def logits_np(items):
        return model.logits(_merge(items)).data

    dev = (lambda: _accuracy_on(logits_np, data, "dev")) if has_dev else None
    t0 = time.perf_counter()
    report = fit(model, len(data), batch_loss, dev, lr=cfg.lr_glpb, batch_size=cfg.batch_glpb,
                 max_epochs=cfg.epochs_glpb, patience=cfg.patience, seed=cfg.seed,
                 optimizer=cfg.optimizer, weight_decay=cfg.weight_decay,
                 clip_norm=cfg.clip_norm, early_stopping=cfg.early_stopping)
    report.extra["train_accuracy"] = _accuracy_on(logits_np, data, "source")
    report.extra["seconds"] = time.perf_counter() - t0
    log.info("GLP-B: best epoch %d/%d, train acc %.4f", report.best_epoch, report.epochs_run,
             report.extra["train_accuracy"])
    return model, report


class Prediction(NamedTuple):
    tag: str
    confidence: float


def _probs(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _collect(items, probs_per_item, langs):
    preds = {}
    for d, p in zip(items, probs_per_item):
        best = p.argmax(axis=1)   # first maximum: lowest tag index wins ties
        for i in range(d.n):
            lang = d.mag.lang_of(i)
            if langs is None or lang in langs:
                preds[NodeId(d.mag.verse, lang, int(d.mag.node_pos[i]))] = \
                    Prediction(UPOS[best[i]], float(p[i, best[i]]))
    return preds


def predict_with_confidence(model: GlpBModel, data: list[VerseData], langs=None,
                            batch_size=64) -> dict[NodeId, Prediction]:
    out = []
    for s in range(0, len(data), batch_size):
        chunk = data[s:s + batch_size]
        b = _merge(chunk)
        p = _probs(model.logits(b).data)
        out.extend(p[b.offsets[k]:b.offsets[k + 1]] for k in range(len(chunk)))
    return _collect(data, out, None if langs is None else set(langs))


def select_pseudo_labels(preds: Mapping[NodeId, Prediction], gamma: float):
    """Nodes with confidence >= gamma, and per-language selection counts."""
    selected = {k: p for k, p in preds.items() if p.confidence >= gamma}
    per = {}
    for k, p in preds.items():
        s, t = per.get(k.lang, (0, 0))
        per[k.lang] = (s + (p.confidence >= gamma), t + 1)
    report = [(lang, s, t, s / t if t else 0.0) for lang, (s, t) in sorted(per.items())]
    if not selected:
        warnings.warn(f"no prediction reaches confidence {gamma}; pseudo-label set is empty")
    return selected, report


def write_selection_report(report, path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("lang,selected,total,rate\n")
        for lang, s, t, r in report:
            f.write(f"{lang},{s},{t},{r!r}\n")


# --- type-level tag distributions ------------------------------------------------------

class TagDistributionTable:
    def __init__(self, counts: Mapping[tuple[str, str], np.ndarray]):
        self.counts = {k: np.asarray(v, dtype=float) for k, v in counts.items()}

    def lookup(self, lang, word):
        """(17-vector of relative frequencies, unseen flag)."""
        c = self.counts.get((lang, word))
        if c is None or c.sum() == 0:
            return np.zeros(N_TAGS), True
        return c / c.sum(), False

    def __len__(self):
        return len(self.counts)


def build_tag_distributions(corpus: MultiParallelCorpus, preds: Mapping[NodeId, Prediction],
                            source_langs=None) -> TagDistributionTable:
    """Source words count their training tags; all other words count predictions."""
    source_langs = set(source_langs if source_langs is not None else corpus.langs_with_role("source"))
    counts = {}
    for lang in source_langs:
        ed = corpus.editions[lang]
        for v, toks in ed.verses.items():
            for w, t in zip(toks, ed.tags[v]):
                counts.setdefault((lang, w), np.zeros(N_TAGS))[UPOS.index(t)] += 1
    index = {t: i for i, t in enumerate(UPOS)}
    for node, p in preds.items():
        if node.lang in source_langs:
            continue
        w = corpus.tokens(node.lang, node.verse)[node.pos]
        counts.setdefault((node.lang, w), np.zeros(N_TAGS))[index[p.tag]] += 1
    return TagDistributionTable(counts)


# --- GLP-SL ----------------------------------------------------------------------------------

@dataclass
class SLVerse:
    X: np.ndarray               # (n, 2 * hidden + 18)
    labels: np.ndarray          # training labels: sources + selected pseudo labels
    pseudo_conf: np.ndarray     # GLP-B confidence of pseudo-labelled nodes, nan elsewhere
    dev_labels: np.ndarray
    data: VerseData


def sl_token_matrix(model_b: GlpBModel, d: VerseData, tagdist: TagDistributionTable) -> np.ndarray:
    x_in, x_out = model_b.encode(d.numeric, d.categorical, d.src, d.dst)
    td = np.zeros((d.n, N_TAGS + 1))
    for i in range(d.n):
        vec, unseen = tagdist.lookup(d.mag.lang_of(i), d.mag.words[i])
        td[i, :N_TAGS] = vec
        td[i, N_TAGS] = float(unseen)
    return np.hstack([x_in.data, x_out.data, td])


def prepare_sl_data(data, model_b, tagdist, pseudo: Mapping[NodeId, Prediction]) -> list[SLVerse]:
    index = {t: i for i, t in enumerate(UPOS)}
    out = []
    for d in data:
        X = sl_token_matrix(model_b, d, tagdist)
        labels = np.where(d.source & (d.labels >= 0), d.labels, -1)
        conf = np.full(d.n, np.nan)
        for i in np.flatnonzero(d.target):
            p = pseudo.get(NodeId(d.mag.verse, d.mag.lang_of(i), int(d.mag.node_pos[i])))
            if p is not None:
                labels[i] = index[p.tag]
                conf[i] = p.confidence
        dev_labels = np.where(d.dev & (d.labels >= 0), d.labels, -1)
        out.append(SLVerse(X, labels, conf, dev_labels, d))
    return out


def check_pseudo_labels(sl_data: list[SLVerse], gamma: float) -> int:
    """Assert every pseudo-labelled training node has confidence >= gamma."""
    n = 0
    for v in sl_data:
        conf = v.pseudo_conf[~np.isnan(v.pseudo_conf)]
        if conf.size and conf.min() < gamma:
            raise AssertionError(f"verse {v.data.mag.verse}: pseudo label with confidence "
                                 f"{conf.min()} below gamma={gamma}")
        n += conf.size
    return n


def _pad(items, attr):
    L = max(v.X.shape[0] for v in items)
    B = len(items)
    width = items[0].X.shape[1]
    X = np.zeros((B, L, width))
    mask = np.zeros((B, L), dtype=bool)
    lab = np.full((B, L), -1, dtype=np.int64)
    for b, v in enumerate(items):
        n = v.X.shape[0]
        X[b, :n] = v.X
        mask[b, :n] = True
        lab[b, :n] = getattr(v, attr)
    return X, mask, lab


def train_glpsl(data: list[VerseData], model_b: GlpBModel, pseudo, tagdist, cfg: GlpConfig):
    """Train the transformer classifier; the GLP-B encoder stays frozen."""
    model_b.set_trainable(False)
    if not pseudo:
        warnings.warn("empty pseudo-label set: GLP-SL trains on source nodes only")
    sl = prepare_sl_data(data, model_b, tagdist, pseudo)
    n_pseudo = check_pseudo_labels(sl, cfg.gamma)
    d_in = sl[0].X.shape[1]
    model = GlpSLModel({"d_in": int(d_in), "tf_dim": cfg.tf_dim, "tf_heads": cfg.tf_heads,
                        "tf_ff": cfg.tf_ff, "tf_layers": cfg.tf_layers, "seed": cfg.seed})
    has_dev = any((v.dev_labels >= 0).any() for v in sl)
    if cfg.early_stopping and not has_dev:
        raise ValueError("early stopping enabled but no labeled dev-language nodes")

    def batch_loss(idx):
        X, mask, lab = _pad([sl[i] for i in idx], "labels")
        logits = model.logits(X, mask)
        return T.cross_entropy_masked(T.reshape(logits, (-1, N_TAGS)), lab.ravel())

    def dev():
        correct = total = 0
        for s in range(0, len(sl), 64):
            X, mask, lab = _pad(sl[s:s + 64], "dev_labels")
            pred = model.logits(X, mask).data.argmax(axis=-1)
            keep = lab >= 0
            correct += int((pred[keep] == lab[keep]).sum())
            total += int(keep.sum())
        return correct / total if total else float("nan")

    t0 = time.perf_counter()
    report = fit(model, len(sl), batch_loss, dev if has_dev else None, lr=cfg.lr_glpsl,
                 batch_size=cfg.batch_glpsl, max_epochs=cfg.epochs_glpsl, patience=cfg.patience,
                 seed=cfg.seed, optimizer=cfg.optimizer, weight_decay=cfg.weight_decay,
                 clip_norm=cfg.clip_norm, early_stopping=cfg.early_stopping)
    report.extra["pseudo_labels"] = n_pseudo
    report.extra["seconds"] = time.perf_counter() - t0
    log.info("GLP-SL: %d pseudo labels, best epoch %d/%d", n_pseudo, report.best_epoch, report.epochs_run)
    return model, report


def predict_glpsl(model: GlpSLModel, model_b: GlpBModel, data: list[VerseData], tagdist,
                  langs=None, batch_size=64) -> dict[NodeId, Prediction]:
    out = []
    for s in range(0, len(data), batch_size):
        chunk = data[s:s + batch_size]
        Xs = [sl_token_matrix(model_b, d, tagdist) for d in chunk]
        L = max(x.shape[0] for x in Xs)
        X = np.zeros((len(chunk), L, Xs[0].shape[1]))
        mask = np.zeros((len(chunk), L), dtype=bool)
        for b, x in enumerate(Xs):
            X[b, :len(x)] = x
            mask[b, :len(x)] = True
        logits = model.logits(X, mask).data
        out.extend(_probs(logits[b, :len(x)]) for b, x in enumerate(Xs))
    return _collect(data, out, None if langs is None else set(langs))


# --- projection ----------------------------------------------------------------------------------

def project_corpus(preds: Mapping[NodeId, Prediction], corpus: MultiParallelCorpus, target_langs,
                   provenance: str, threshold: float | None = None) -> dict[str, ProjectedDataset]:
    """Tag every token of the target editions with its predicted tag.

    Verses with an empty target edition are left out.
    """
    out = {}
    for lang in target_langs:
        ds = ProjectedDataset(lang, provenance, threshold=threshold)
        for v, toks in corpus.editions[lang].verses.items():
            if not toks:
                continue
            tags = []
            for p in range(len(toks)):
                pred = preds.get(NodeId(v, lang, p))
                if pred is None:
                    raise KeyError(f"no prediction for {lang} verse {v} token {p}")
                tags.append(pred.tag)
            ds.sentences.append(TaggedSentence(v, toks, tuple(tags)))
        out[lang] = ds
    return out


def source_tag_frequencies(corpus: MultiParallelCorpus, source_langs=None) -> Counter:
    freq = Counter()
    for lang in source_langs or corpus.langs_with_role("source"):
        for tags in corpus.editions[lang].tags.values():
            freq.update(tags)
    return freq


def majority_vote_project(corpus: MultiParallelCorpus, alignments: Mapping[tuple[str, str], AlignmentSet],
                          target_lang: str, source_langs=None) -> ProjectedDataset:
    """Each target token takes the most common tag among its aligned source tokens.

    Ties go to the tag more frequent over all source tag files, then to the
    alphabetically first tag. Unaligned tokens get NULL.
    """
    source_langs = list(source_langs or corpus.langs_with_role("source"))
    freq = source_tag_frequencies(corpus, source_langs)
    ed = corpus.editions[target_lang]
    ds = ProjectedDataset(target_lang, "baseline")
    for v, toks in ed.verses.items():
        votes = [Counter() for _ in toks]
        for s in source_langs:
            if v not in corpus.editions[s].verses:
                continue
            aset = alignments.get(canonical_pair(s, target_lang))
            if aset is None:
                continue
            links = aset.links.get(v, ())
            stags = corpus.tags(s, v)
            tgt_first = aset.src_lang == target_lang
            for a, b in links:
                si, ti = (b, a) if tgt_first else (a, b)
                if ti < len(toks) and si < len(stags):
                    votes[ti][stags[si]] += 1
        tags = []
        for c in votes:
            if not c:
                tags.append(NULL)
                continue
            top = max(c.values())
            cands = [t for t, k in c.items() if k == top]
            tags.append(min(cands, key=lambda t: (-freq[t], t)))
        ds.sentences.append(TaggedSentence(v, toks, tuple(tags)))
    return ds
