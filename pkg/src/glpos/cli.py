"""Command line entry point: ``glpos <stage> -c config.json [key=value ...]``.

Exit status 0 on success, 1 on internal errors, 2 on usage or configuration
errors. Failures print one JSON line on stderr followed by the traceback.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from pathlib import Path

from .corpus_io import CorpusFormatError
from .pipeline import STAGES, ConfigError, Pipeline, PipelineConfig

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE = 0, 1, 2

STAGE_HELP = {
    "align": "word-align every language pair (builtin IBM Model 1 or imported Pharaoh files)",
    "build-graph": "build one multilingual alignment graph per verse",
    "features": "centralities and community ordinals per node",
    "embed": "sentence-ID PPMI+SVD word vectors (or register external vectors)",
    "train-glpb": "train the graph-attention model on source nodes",
    "project-glpb": "predict dev/target nodes with GLP-B, write projections and confidences",
    "train-glpsl": "select pseudo labels, build tag distributions, train the transformer model",
    "project": "project target languages with GLP-SL",
    "baseline": "majority-vote projection through alignments",
    "train-tagger": "train one BiLSTM tagger per target language",
    "tag": "tag the target editions with the trained taggers",
    "evaluate": "score projections and tagger output against gold/silver references",
    "all": "run every stage in order, skipping stages whose manifests match",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="glpos", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in STAGES + ("all",):
        sp = sub.add_parser(name, help=STAGE_HELP[name], description=STAGE_HELP[name])
        sp.add_argument("-c", "--config", required=True, help="pipeline config (JSON)")
        sp.add_argument("--threads", type=int, default=1,
                        help="intra-stage threads; 1 gives bit-reproducible output (default 1)")
        sp.add_argument("--force", action="store_true", help="rerun even when the manifest matches")
        sp.add_argument("overrides", nargs="*", metavar="KEY=VALUE",
                        help='dotted config overrides, e.g. glp.gamma=0.98')
    sp = sub.add_parser("synth", help="write a synthetic fixture and a matching config",
                        description="Generate a synthetic multiparallel corpus with gold tags and alignments.")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--verses", type=int, default=500)
    sp.add_argument("--p-align", type=float, default=0.0, help="alignment noise rate")
    sp.add_argument("--p-tag", type=float, default=0.0, help="source tag noise rate")
    sp.add_argument("--aligner", choices=("import", "builtin"), default="import",
                    help="config uses the written (noisy) alignments or the builtin aligner")
    sp.add_argument("--desk", action="store_true",
                    help="write small model sizes into the config (minutes on a laptop)")
    return p


DESK_GLP = {"hidden": 64, "mlp_dim": 128, "tf_dim": 64, "tf_heads": 4, "tf_ff": 128,
            "tf_layers": 2, "lr_glpsl": 1e-3}


def write_synth(args) -> dict:
    from .synth import SynthSpec, generate_corpus
    sc = generate_corpus(SynthSpec(verses=args.verses, p_align=args.p_align, p_tag=args.p_tag,
                                   seed=args.seed))
    out = Path(args.out)
    files = sc.write(out)
    cfg = {"corpus": {}, "gold": {}, "seed": args.seed, "output": "out",
           "embeddings": {"kind": "static", "dim": 100}}
    for lang, ent in files["languages"].items():
        c = {"path": ent["corpus"], "role": ent["role"]}
        if "tags" in ent:
            c["tags"] = ent["tags"]
        cfg["corpus"][lang] = c
        if ent["role"] == "target":
            cfg["gold"][lang] = ent["gold"]
    if args.aligner == "import":
        cfg["aligner"] = {"kind": "import", "files": [
            {"src": k.split("-")[0], "tgt": k.split("-")[1], "path": v}
            for k, v in sorted(files["alignments"].items())]}
    else:
        cfg["aligner"] = {"kind": "builtin", "iterations": 10}
    if args.desk:
        cfg["glp"] = dict(DESK_GLP)
    with open(out / "config.json", "w", encoding="utf-8") as f:
        json.dump(cfg, f, indent=1, sort_keys=True)
        f.write("\n")
    return cfg


def _fail(code, exc, stage=None):
    line = {"status": "error", "exit": code, "type": type(exc).__name__, "message": str(exc)}
    if stage:
        line["stage"] = stage
    print(json.dumps(line, sort_keys=True), file=sys.stderr)
    traceback.print_exception(exc, file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    stage = None
    try:
        if args.command == "synth":
            write_synth(args)
            return EXIT_OK
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = PipelineConfig.load(args.config, args.overrides)
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=args.threads):
            pipe = Pipeline(cfg, threads=args.threads, force=args.force)
            names = STAGES if args.command == "all" else (args.command,)
            for stage in names:
                pipe.run(stage)
        print(json.dumps({"status": "ok", "stages": pipe.ran}, sort_keys=True))
        return EXIT_OK
    except (ConfigError, CorpusFormatError, FileNotFoundError) as e:
        return _fail(EXIT_USAGE, e, stage)
    except Exception as e:  # noqa: BLE001 - report and map to the internal-error status
        return _fail(EXIT_INTERNAL, e, stage)


if __name__ == "__main__":
    sys.exit(main())
