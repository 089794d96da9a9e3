"""Pipeline configuration and stages.

Every stage writes into ``<output>/<stage>/`` and records a ``stage.json``
manifest with content hashes of its inputs and outputs, a hash of the config
sections it reads, and its wall time. A stage whose manifest still matches is
skipped.

Config schema (JSON; relative paths resolve against the config file)::

    {
      "corpus": {"<lang>": {"path": str, "role": "source|dev|target", "tags": str?}},
      "gold":   {"<lang>": "<conllu path>"},            # optional, for evaluate
      "silver": {"<lang>": "<tagged dataset path>"},    # optional, for evaluate
      "aligner": {"kind": "builtin", "iterations": 10}
               | {"kind": "import", "files": [{"src": a, "tgt": b, "path": str}]},
      "embeddings": {"kind": "static", "dim": 100}
                  | {"kind": "external", "paths": {"<lang>": str}},
      "glp": {GlpConfig fields},
      "tagger": {TaggerConfig fields, "train_on": "glpsl|glpb|baseline"},
      "output": "out",
      "seed": 0
    }
"""
from __future__ import annotations

import copy
import hashlib
import json
import logging
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import alignment, embeddings, evaluation, glp, graph_features, mag, tagger
from .corpus_io import (ROLES, load_corpus, read_conllu, read_tagged_dataset,
                        write_tagged_dataset)
from .mag import NodeId

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1
STAGES = ("align", "build-graph", "features", "embed", "train-glpb", "project-glpb",
          "train-glpsl", "project", "baseline", "train-tagger", "tag", "evaluate")
TOP_KEYS = {"corpus", "gold", "silver", "aligner", "embeddings", "glp", "tagger", "output", "seed"}
TRAIN_ON = ("glpsl", "glpb", "baseline")


class ConfigError(ValueError):
    """Invalid configuration or missing input; maps to exit status 2."""


# --- configuration -----------------------------------------------------------

def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply "a.b.c=value" overrides; values are parsed as JSON when possible."""
    cfg = copy.deepcopy(cfg)
    for item in overrides or ():
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        parts = key.split(".")
        node = cfg
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {item!r}: {p} is not a section")
        node[parts[-1]] = _parse_value(val)
    return cfg


class PipelineConfig:
    def __init__(self, raw: dict, base_dir: Path):
        unknown = set(raw) - TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        self.raw = raw
        self.base = Path(base_dir)
        self.seed = int(raw.get("seed", 0))
        corpus = raw.get("corpus")
        if not corpus:
            raise ConfigError("config has no corpus section")
        for lang, ent in corpus.items():
            if ent.get("role") not in ROLES:
                raise ConfigError(f"corpus.{lang}.role must be one of {ROLES}")
        self.corpus = corpus
        self.aligner = dict(raw.get("aligner", {"kind": "builtin"}))
        if self.aligner.get("kind") not in ("builtin", "import"):
            raise ConfigError("aligner.kind must be 'builtin' or 'import'")
        self.emb = dict(raw.get("embeddings", {"kind": "static", "dim": 100}))
        if self.emb.get("kind") not in ("static", "external"):
            raise ConfigError("embeddings.kind must be 'static' or 'external'")
        glp_raw = dict(raw.get("glp", {}))
        glp_raw.setdefault("gamma", 0.98 if self.emb["kind"] == "external" else 0.95)
        glp_raw.setdefault("seed", self.seed)
        try:
            self.glp = glp.GlpConfig.from_dict(glp_raw)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"glp: {e}") from None
        tg_raw = dict(raw.get("tagger", {}))
        self.train_on = tg_raw.pop("train_on", "glpsl")
        if self.train_on not in TRAIN_ON:
            raise ConfigError(f"tagger.train_on must be one of {TRAIN_ON}")
        tg_raw.setdefault("seed", self.seed)
        try:
            self.tagger = tagger.TaggerConfig.from_dict(tg_raw)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"tagger: {e}") from None
        self.gold = raw.get("gold", {})
        self.silver = raw.get("silver", {})
        self.output = self.path(raw.get("output", "out"))

    @classmethod
    def load(cls, path, overrides=()) -> "PipelineConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from None
        return cls(apply_overrides(raw, overrides), path.resolve().parent)

    def path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base / p

    def section_hash(self, *keys) -> str:
        view = {k: self.raw.get(k) for k in keys}
        view["seed"] = self.seed
        view["glp_resolved"] = asdict(self.glp) if "glp" in keys else None
        view["tagger_resolved"] = asdict(self.tagger) if "tagger" in keys else None
        return hashlib.sha256(json.dumps(view, sort_keys=True).encode()).hexdigest()

    def langs(self, *roles):
        return [l for l, e in self.corpus.items() if not roles or e["role"] in roles]

    def corpus_files(self) -> list[Path]:
        out = []
        for ent in self.corpus.values():
            out.append(self.path(ent["path"]))
            if ent.get("tags"):
                out.append(self.path(ent["tags"]))
        return out


def require(path: Path, what="input") -> Path:
    if not path.exists():
        raise ConfigError(f"missing {what}: {path}")
    return path


# --- manifests -----------------------------------------------------------------

def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _hashes(paths, root: Path):
    out = {}
    for p in sorted(set(map(Path, paths))):
        key = str(p.relative_to(root)) if p.is_relative_to(root) else str(p)
        out[key] = file_hash(p)
    return out


class Stage:
    """Context for one stage run: output dir, declared inputs, manifest."""

    def __init__(self, ctx: "Pipeline", name: str, inputs, config_keys):
        self.ctx = ctx
        self.name = name
        self.dir = ctx.cfg.output / name
        self.inputs = [require(Path(p)) for p in inputs]
        self.config_hash = ctx.cfg.section_hash(*config_keys)
        self.manifest_path = self.dir / "stage.json"

    def up_to_date(self) -> bool:
        if not self.manifest_path.exists():
            return False
        try:
            m = json.loads(self.manifest_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            return False
        if m.get("version") != MANIFEST_VERSION or m.get("config_hash") != self.config_hash:
            return False
        if m.get("inputs") != _hashes(self.inputs, self.ctx.cfg.base):
            return False
        for rel, h in m.get("outputs", {}).items():
            p = self.dir / rel
            if not p.exists() or file_hash(p) != h:
                return False
        return True

    def finish(self, wall: float):
        outputs = [p for p in sorted(self.dir.rglob("*")) if p.is_file() and p.name != "stage.json"]
        m = {
            "version": MANIFEST_VERSION,
            "stage": self.name,
            "config_hash": self.config_hash,
            "inputs": _hashes(self.inputs, self.ctx.cfg.base),
            "outputs": {str(p.relative_to(self.dir)): file_hash(p) for p in outputs},
            "wall_time": wall,
        }
        with open(self.manifest_path, "w", encoding="utf-8") as f:
            json.dump(m, f, indent=1, sort_keys=True)
            f.write("\n")


# --- pipeline ------------------------------------------------------------------------

def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(obj, f, indent=1, sort_keys=True)
        f.write("\n")


class Pipeline:
    def __init__(self, cfg: PipelineConfig, threads: int = 1, force: bool = False):
        self.cfg = cfg
        self.threads = max(1, int(threads))
        self.force = force
        self._corpus = None
        self.ran: dict[str, str] = {}      # stage -> "ran" | "skipped"

    # shared loaders
    @property
    def corpus(self):
        if self._corpus is None:
            c = self.cfg
            for p in c.corpus_files():
                require(p, "corpus file")
            self._corpus = load_corpus(
                {l: c.path(e["path"]) for l, e in c.corpus.items()},
                {l: e["role"] for l, e in c.corpus.items()},
                {l: c.path(e["tags"]) for l, e in c.corpus.items() if e.get("tags")})
        return self._corpus

    def out(self, stage, *parts) -> Path:
        return self.cfg.output.joinpath(stage, *parts)

    def pairs(self):
        langs = list(self.corpus.langs)
        return [alignment.canonical_pair(a, b) for i, a in enumerate(langs) for b in langs[i + 1:]]

    def alignments(self):
        return {pair: alignment.read_pharaoh(self.out("align", f"{pair[0]}-{pair[1]}.txt"), pair)
                for pair in self.pairs()}

    def mags(self):
        return mag.read_graph_dump(self.out("build-graph", "graphs.txt"), self.corpus)

    def providers(self):
        c = self.cfg
        if c.emb["kind"] == "external":
            return {l: embeddings.load_external_vectors(c.path(c.emb["paths"][l]), l) for l in c.langs()}
        return {l: embeddings.load_external_vectors(self.out("embed", f"{l}.vec"), l) for l in c.langs()}

    def verse_data(self):
        mags = self.mags()
        feats = graph_features.read_feature_dump(self.out("features", "features.txt"), mags)
        provs = self.providers()
        li = {l: i for i, l in enumerate(self.corpus.langs)}
        return [glp.make_verse_data(g, graph_features.assemble_node_features(g, f, provs, li, self.cfg.glp.p_max))
                for g, f in zip(mags, feats)]

    def predictions(self, stage="project-glpb"):
        preds = {}
        with open(self.out(stage, "predictions.tsv"), encoding="utf-8") as f:
            next(f)
            for line in f:
                v, l, p, t, c = line.rstrip("\n").split("\t")
                preds[NodeId(v, l, int(p))] = glp.Prediction(t, float(c))
        return preds

    # stage inputs
    def _stage_inputs(self, name):
        c = self.cfg
        corpus = c.corpus_files()
        prev = lambda st, *files: [self.out(st, f) for f in files]
        langs = c.langs()
        targets = c.langs("target")
        pair_files = [f"{a}-{b}.txt" for a, b in self.pairs()]
        emb_files = ([c.path(c.emb["paths"][l]) for l in langs] if c.emb["kind"] == "external"
                     else prev("embed", *[f"{l}.vec" for l in langs]))
        graph_in = corpus + prev("build-graph", "graphs.txt") + prev("features", "features.txt") + emb_files
        if name == "align":
            extra = [c.path(f["path"]) for f in c.aligner.get("files", [])] if c.aligner["kind"] == "import" else []
            return corpus + extra, ("aligner",)
        if name == "build-graph":
            return corpus + prev("align", *pair_files), ()
        if name == "features":
            return corpus + prev("build-graph", "graphs.txt"), ()
        if name == "embed":
            return corpus, ("embeddings",)
        if name == "train-glpb":
            return graph_in, ("glp",)
        if name == "project-glpb":
            return graph_in + prev("train-glpb", "model.json", "model.bin"), ("glp",)
        if name == "train-glpsl":
            return (graph_in + prev("train-glpb", "model.json", "model.bin")
                    + prev("project-glpb", "predictions.tsv")), ("glp",)
        if name == "project":
            return (graph_in + prev("train-glpb", "model.json", "model.bin")
                    + prev("train-glpsl", "model.json", "model.bin", "tagdist.tsv")), ("glp",)
        if name == "baseline":
            return corpus + prev("align", *pair_files), ()
        if name == "train-tagger":
            src = {"glpsl": "project", "glpb": "project-glpb", "baseline": "baseline"}[c.train_on]
            return prev(src, *[f"{l}.tsv" for l in targets]) + emb_files, ("tagger",)
        if name == "tag":
            return (corpus + emb_files + prev("train-tagger", *[f"{l}.json" for l in targets])
                    + prev("train-tagger", *[f"{l}.bin" for l in targets])), ("tagger",)
        if name == "evaluate":
            files = []
            for st in ("baseline", "project-glpb", "project", "tag"):
                files += [p for p in prev(st, *[f"{l}.tsv" for l in targets]) if p.exists()]
            files += [c.path(p) for p in c.gold.values()] + [c.path(p) for p in c.silver.values()]
            return files, ("gold", "silver")
        raise ConfigError(f"unknown stage {name!r}")

    def run(self, name):
        if name not in STAGES:
            raise ConfigError(f"unknown stage {name!r}")
        inputs, keys = self._stage_inputs(name)
        st = Stage(self, name, inputs, keys)
        if not self.force and st.up_to_date():
            log.info("%s: up to date, skipped", name)
            self.ran[name] = "skipped"
            return st
        st.dir.mkdir(parents=True, exist_ok=True)
        for p in st.dir.rglob("*"):
            if p.is_file():
                p.unlink()
        t0 = time.perf_counter()
        getattr(self, "_" + name.replace("-", "_"))(st)
        st.finish(time.perf_counter() - t0)
        log.info("%s: done in %.1fs", name, time.perf_counter() - t0)
        self.ran[name] = "ran"
        return st

    def run_all(self):
        for name in STAGES:
            self.run(name)

    # stage bodies
    def _align(self, st):
        c = self.cfg
        if c.aligner["kind"] == "builtin":
            sets = alignment.align_corpus(self.corpus, None, int(c.aligner.get("iterations", 10)),
                                          tables_dir=st.dir / "tables")
        else:
            sets = {}
            for f in c.aligner.get("files", []):
                aset = alignment.read_pharaoh(require(c.path(f["path"]), "alignment file"),
                                              (f["src"], f["tgt"]))
                sets[aset.pair] = aset.canonical()
        for pair in self.pairs():
            aset = sets.get(pair, alignment.AlignmentSet(pair[0], pair[1], {}))
            alignment.write_pharaoh(aset.canonical(), st.dir / f"{pair[0]}-{pair[1]}.txt")

    def _build_graph(self, st):
        mags = mag.build_all(self.corpus, self.alignments())
        mag.write_graph_dump(mags, st.dir / "graphs.txt")
        checks = [mag.validate_mag(g) for g in mags]
        _write_json(st.dir / "validation.json", {
            "graphs": len(mags),
            "isolated_nodes": sum(len(r["isolated"]) for r in checks),
            "intra_language_edges": sum(len(r["intra_language_edges"]) for r in checks),
            "label_violations": sum(len(r["label_violations"]) for r in checks),
            "ok": all(r["ok"] for r in checks),
        })

    def _features(self, st):
        mags = self.mags()
        feats = graph_features.compute_all(mags, seed=self.cfg.seed, threads=self.threads,
                                           c_max=self.cfg.glp.c_max)
        graph_features.write_feature_dump(mags, feats, st.dir / "features.txt")

    def _embed(self, st):
        c = self.cfg
        if c.emb["kind"] == "external":
            _write_json(st.dir / "external.json", {l: str(c.path(p)) for l, p in sorted(c.emb["paths"].items())})
            return
        ppmi = embeddings.build_ppmi(self.corpus, list(self.corpus.langs))
        prov = embeddings.train_sentence_id_embeddings(ppmi, int(c.emb.get("dim", 100)))
        for l in self.corpus.langs:
            prov.write(st.dir / f"{l}.vec", l)

    def _train_glpb(self, st):
        data = self.verse_data()
        li = {l: i for i, l in enumerate(self.corpus.langs)}
        model, report = glp.train_glpb(data, self.cfg.glp, li)
        from .nn import save_checkpoint
        save_checkpoint(model, st.dir / "model", extra={"best_epoch": report.best_epoch})
        report.write_curve(st.dir / "curve.csv")
        _write_json(st.dir / "report.json", {
            "initial_loss": report.initial_loss, "best_loss": report.best_loss,
            "best_epoch": report.best_epoch, "epochs_run": report.epochs_run,
            "stopped_early": report.stopped_early, "train_accuracy": report.extra["train_accuracy"]})

    def _write_predictions(self, preds, path):
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("verse\tlang\tpos\ttag\tconfidence\n")
            for k, p in preds.items():
                f.write(f"{k.verse}\t{k.lang}\t{k.pos}\t{p.tag}\t{p.confidence!r}\n")

    def _project_glpb(self, st):
        from .nn import load_checkpoint
        model = load_checkpoint(self.out("train-glpb", "model"))
        data = self.verse_data()
        langs = self.cfg.langs("target", "dev")
        preds = glp.predict_with_confidence(model, data, langs)
        self._write_predictions(preds, st.dir / "predictions.tsv")
        for l, ds in glp.project_corpus(preds, self.corpus, self.cfg.langs("target"), "glpb").items():
            write_tagged_dataset(ds, st.dir / f"{l}.tsv")

    def _train_glpsl(self, st):
        from .nn import load_checkpoint, save_checkpoint
        c = self.cfg
        model_b = load_checkpoint(self.out("train-glpb", "model"))
        data = self.verse_data()
        preds = self.predictions()
        targets = set(c.langs("target"))
        pseudo, report = glp.select_pseudo_labels(
            {k: p for k, p in preds.items() if k.lang in targets}, c.glp.gamma)
        glp.write_selection_report(report, st.dir / "selection.csv")
        tagdist = glp.build_tag_distributions(self.corpus, preds)
        write_tagdist(tagdist, st.dir / "tagdist.tsv")
        model, rep = glp.train_glpsl(data, model_b, pseudo, tagdist, c.glp)
        save_checkpoint(model, st.dir / "model", extra={"best_epoch": rep.best_epoch})
        rep.write_curve(st.dir / "curve.csv")
        _write_json(st.dir / "report.json", {
            "initial_loss": rep.initial_loss, "best_loss": rep.best_loss, "best_epoch": rep.best_epoch,
            "epochs_run": rep.epochs_run, "stopped_early": rep.stopped_early,
            "pseudo_labels": rep.extra["pseudo_labels"], "gamma": c.glp.gamma})

    def _project(self, st):
        from .nn import load_checkpoint
        model_b = load_checkpoint(self.out("train-glpb", "model"))
        model_b.set_trainable(False)
        model = load_checkpoint(self.out("train-glpsl", "model"))
        tagdist = read_tagdist(self.out("train-glpsl", "tagdist.tsv"))
        langs = self.cfg.langs("target")
        preds = glp.predict_glpsl(model, model_b, self.verse_data(), tagdist, langs)
        self._write_predictions(preds, st.dir / "predictions.tsv")
        for l, ds in glp.project_corpus(preds, self.corpus, langs, "glpsl", self.cfg.glp.gamma).items():
            write_tagged_dataset(ds, st.dir / f"{l}.tsv")

    def _baseline(self, st):
        al = self.alignments()
        for l in self.cfg.langs("target"):
            write_tagged_dataset(glp.majority_vote_project(self.corpus, al, l), st.dir / f"{l}.tsv")

    def _train_tagger(self, st):
        from .nn import save_checkpoint
        src = {"glpsl": "project", "glpb": "project-glpb", "baseline": "baseline"}[self.cfg.train_on]
        provs = self.providers()
        for l in self.cfg.langs("target"):
            ds = read_tagged_dataset(self.out(src, f"{l}.tsv"))
            model = tagger.train_tagger(ds, provs[l], self.cfg.tagger)
            save_checkpoint(model, st.dir / l, extra={"trained_on": src})

    def _tag(self, st):
        from .nn import load_checkpoint
        provs = self.providers()
        for l in self.cfg.langs("target"):
            model = load_checkpoint(self.out("train-tagger", l))
            sents = list(self.corpus.editions[l].verses.items())
            write_tagged_dataset(tagger.tag_sentences(model, sents, provs[l], l), st.dir / f"{l}.tsv")

    def _evaluate(self, st):
        c = self.cfg
        systems = {"baseline": "baseline", "glpb": "project-glpb", "glpsl": "project", "tagger": "tag"}
        refs = {}
        for l, p in c.gold.items():
            refs[(l, "gold")] = read_conllu(require(c.path(p), "gold file"))
        for l, p in c.silver.items():
            refs[(l, "silver")] = read_tagged_dataset(require(c.path(p), "silver file"))
        summary = {}
        for (l, kind), ref in sorted(refs.items()):
            for name, stage in systems.items():
                path = self.out(stage, f"{l}.tsv")
                if not path.exists():
                    continue
                ev = evaluation.evaluate_dataset(read_tagged_dataset(path), ref)
                tag = f"{name}.{l}.{kind}"
                ev.report.write_csv(st.dir / f"{tag}.csv")
                ev.report.write_plot_data(st.dir / f"{tag}.dat")
                entry = summary.setdefault(kind, {}).setdefault(name, {"languages": {}})
                entry["languages"][l] = ev.summary()
        for kind in summary.values():
            for entry in kind.values():
                accs = [v["accuracy"] for v in entry["languages"].values()]
                entry["mean_accuracy"] = float(np.mean(accs))
        _write_json(st.dir / "summary.json", summary)


def write_tagdist(table: glp.TagDistributionTable, path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for (lang, word), c in sorted(table.counts.items()):
            f.write(f"{lang}\t{word}\t" + " ".join(repr(float(x)) for x in c) + "\n")


def read_tagdist(path) -> glp.TagDistributionTable:
    counts = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            lang, word, vals = line.rstrip("\n").split("\t")
            counts[(lang, word)] = np.array([float(x) for x in vals.split()])
    return glp.TagDistributionTable(counts)
