"""Command-line entry point: ``termcee <subcommand> [flags]``.

Exit status is 0 on success, 1 when inputs or flags fail validation and 2 when
a run fails (for example a non-finite loss). The resolved configuration of
every run is printed to standard error as one JSON line.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import nncore as nn
from .corpus import CorpusError, ingest_parsed, load_stoplist, split_corpus, write_jsonl
from .encoder import ABLATION_FLAGS
from .evaldecode import EvalError, evaluate, score_document
from .ontology import OntologyError, default_ontology, load_ontology, number_roles
from .pipeline import (
    Checkpoint, DocPrediction, TrainConfig, TrainingError, load_embeddings, predict, prepare, toy_grad_check,
    train,
)
from .synthetic import SynthConfig, SynthError, generate_synthetic
from .terstruct import ComplexityInputs, Scheme, StructureError, build_gold_matrices, complexity_cells, plan_duplicates

log = logging.getLogger("termcee")

VALIDATION_ERRORS = (ValueError, KeyError, OSError, CorpusError, OntologyError, StructureError, SynthError, EvalError)


class UsageError(Exception):
    pass


def _ablation(text: str | None) -> frozenset[str]:
    if not text:
        return frozenset()
    flags = frozenset(f.strip() for f in text.split(",") if f.strip())
    bad = flags - set(ABLATION_FLAGS)
    if bad:
        raise argparse.ArgumentTypeError(f"unknown ablation flag(s) {sorted(bad)}; choose from {','.join(ABLATION_FLAGS)}")
    return flags


def _event_range(text: str) -> tuple[int, int]:
    try:
        parts = [int(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError("expected LO,HI") from None
    if len(parts) == 1:
        parts *= 2
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected LO,HI")
    return parts[0], parts[1]


def _ratios(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated ratios") from None


def _ontology(args):
    return load_ontology(args.ontology) if getattr(args, "ontology", None) else default_ontology()


def _stoplist(args) -> frozenset[str]:
    if getattr(args, "no_stoplist", False):
        return frozenset()
    return load_stoplist(getattr(args, "stoplist", None))


def _emit_config(name: str, cfg: dict) -> None:
    print(json.dumps({"command": name, "config": cfg}, sort_keys=True, default=str), file=sys.stderr)


def _write_text(path: str | None, text: str) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ------------------------------------------------------------------ subcommands

def cmd_synth(args) -> int:
    ont = _ontology(args)
    cfg = SynthConfig(doc_count=args.docs, tokens_per_doc=args.tokens, event_type_count=args.types or ont.u,
                      roles_per_type=args.roles, events_per_doc=args.events, multi_role_rate=args.multi_role_rate,
                      shared_arg_rate=args.shared_arg_rate, seed=args.seed, m=args.m)
    _emit_config("synth", {**vars(cfg), "out": args.out})
    docs = generate_synthetic(cfg, ont)
    if args.out:
        write_jsonl(docs, args.out)
    else:
        for d in docs:
            sys.stdout.write(json.dumps(d.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")
    return 0


def cmd_ingest(args) -> int:
    ont = _ontology(args)
    _emit_config("ingest", {"corpus": args.corpus, "filter": args.filter, "split": args.split, "seed": args.seed,
                            "out": args.out})
    docs = ingest_parsed(args.corpus, ont)
    if args.filter:
        docs = prepare(docs, ont, _stoplist(args))
    events = sum(len(d.gold_records) for d in docs)
    if args.split:
        if not args.out:
            raise UsageError("--split needs --out PREFIX")
        parts = split_corpus(docs, args.split, args.seed)
        for name, part in zip(("train", "dev", "test"), parts):
            write_jsonl(part, f"{args.out}.{name}.jsonl")
        print(f"{len(docs)} documents, {events} events -> " + "/".join(str(len(p)) for p in parts))
    else:
        if args.out:
            write_jsonl(docs, args.out)
        print(f"{len(docs)} documents, {events} events")
    return 0


def cmd_build_gold(args) -> int:
    ont = _ontology(args)
    num = number_roles(ont)
    _emit_config("build-gold", {"corpus": args.corpus, "m": args.m, "out": args.out})
    docs = prepare(ingest_parsed(args.corpus, ont), ont, _stoplist(args))
    lines = []
    for d in docs:
        plan = plan_duplicates(d, ont)
        mats = build_gold_matrices(d, ont, num, args.m, plan)
        lines.append(json.dumps({"doc_id": d.doc_id, "m": args.m, "rows": plan.to_list(),
                                 "matrices": [mats[t].to_dict() for t in ont.names]}, sort_keys=True))
    _write_text(args.out, "".join(line + "\n" for line in lines))
    return 0


def _train_config(args) -> TrainConfig:
    base = TrainConfig.paper() if args.paper_dims else TrainConfig()
    feats = replace(base.features, ablation=args.ablate)
    overrides = dict(features=feats, seed=args.seed)
    for flag, key in (("epochs", "epochs"), ("m", "m"), ("lr", "lr"), ("batch_size", "batch_size"),
                      ("dropout", "dropout"), ("clip_norm", "clip_norm")):
        value = getattr(args, flag)
        if value is not None:
            overrides[key] = value
    if overrides.get("clip_norm") == 0:
        overrides["clip_norm"] = None
    return replace(base, **overrides)


def cmd_train(args) -> int:
    ont = _ontology(args)
    cfg = _train_config(args)
    if not args.out:
        raise UsageError("train needs --out CHECKPOINT")
    _emit_config("train", {"train_config": cfg.to_dict(), "corpus": args.corpus, "dev": args.dev,
                           "embeddings": args.embeddings, "out": args.out})
    stop = _stoplist(args)
    docs = ingest_parsed(args.corpus, ont)
    dev = ingest_parsed(args.dev, ont) if args.dev else None
    emb = load_embeddings(args.embeddings) if args.embeddings else None
    out = Path(args.out)
    log_path = Path(args.log) if args.log else out.with_name(out.name + ".log.jsonl")
    with open(log_path, "w", encoding="utf-8") as fh:
        def on_epoch(entry):
            fh.write(entry.to_json() + "\n")
            fh.flush()
            print(f"epoch {entry.epoch} loss {entry.total_loss:.4f}"
                  + (f" dev F1 {entry.dev_avg_f1:.4f}" if entry.dev_avg_f1 is not None else ""), file=sys.stderr)
        result = train(docs, ont, cfg, dev, stop, emb, on_epoch)
    result.checkpoint.save(out)
    weights_path = out.with_name(out.name + ".class_weights.json")
    weights_path.write_text(json.dumps(result.checkpoint.class_weight_report(), indent=2, sort_keys=True) + "\n")
    print(f"saved {out} (epoch {result.best_epoch}); log {log_path}; class weights {weights_path}")
    return 0


def cmd_predict(args) -> int:
    ckpt = Checkpoint.load(args.checkpoint)
    _emit_config("predict", {"checkpoint": args.checkpoint, "corpus": args.corpus, "ablate": sorted(args.ablate)
                             if args.ablate is not None else None, "out": args.out})
    docs = ingest_parsed(args.corpus, ckpt.ontology)
    preds = predict(docs, ckpt, args.ablate)
    _write_text(args.out, "".join(json.dumps(p.to_dict(), sort_keys=True) + "\n" for p in preds))
    return 0


def cmd_eval(args) -> int:
    ont = _ontology(args)
    num = number_roles(ont)
    _emit_config("eval", {"pred": args.pred, "gold": args.gold, "out": args.out})
    gold_docs = {d.doc_id: d for d in prepare(ingest_parsed(args.gold, ont), ont, _stoplist(args))}
    results = []
    with open(args.pred, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            pred = DocPrediction.from_dict(json.loads(line))
            doc = gold_docs.get(pred.doc_id)
            if doc is None:
                raise UsageError(f"{args.pred}:{lineno}: document {pred.doc_id!r} not in gold corpus")
            if pred.plan != plan_duplicates(doc, ont):
                raise UsageError(f"{args.pred}:{lineno}: row plan of {pred.doc_id!r} disagrees with the gold "
                                 "document (different stoplist or ontology?)")
            m = next(iter(pred.matrices.values())).m
            gold = build_gold_matrices(doc, ont, num, m, pred.plan)
            results.append(score_document(doc.doc_id, pred.matrices, gold, pred.records, doc.gold_records))
    report = evaluate(results, ont.names)
    print(report.table())
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return 0


def cmd_complexity(args) -> int:
    inp = ComplexityInputs(n=args.n, N=args.N, m=args.m, m_prime=args.m_prime, r=args.r, s=args.s, p=args.p,
                           k=args.k)
    _emit_config("complexity", {"scheme": args.scheme, **vars(inp)})
    print(complexity_cells(args.scheme, inp))
    return 0


def cmd_gradcheck(args) -> int:
    _emit_config("gradcheck", {"seed": args.seed, "coords": args.coords, "epsilon": args.epsilon,
                               "tolerance": args.tolerance, "dtype": "float64"})
    report = toy_grad_check(args.seed, args.coords, args.epsilon, args.tolerance)
    for c in report.failures:
        print(f"FAIL {c.param}[{c.index}] analytic {c.analytic:.6e} numeric {c.numeric:.6e} rel {c.rel_err:.2e}")
    print(report.summary())
    return 0 if report.ok else 2


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for every random stream (default 0)")
    common.add_argument("--threads", type=int, default=1, help="BLAS threads (default 1 for reproducibility)")
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    onto = argparse.ArgumentParser(add_help=False)
    onto.add_argument("--ontology", help="event schema (TOML or JSON); default: bundled ChFinAnn schema")

    stop = argparse.ArgumentParser(add_help=False)
    stop.add_argument("--stoplist", help="stopword file, one token per line; default: bundled list")
    stop.add_argument("--no-stoplist", action="store_true", help="skip stopword filtering")

    parser = argparse.ArgumentParser(prog="termcee", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common, onto], help="generate a synthetic corpus")
    p.add_argument("--docs", type=int, default=20)
    p.add_argument("--tokens", type=int, default=SynthConfig.tokens_per_doc, help="minimum tokens per document")
    p.add_argument("--types", type=int, default=None, help="event types used (default: all)")
    p.add_argument("--roles", type=int, default=SynthConfig.roles_per_type)
    p.add_argument("--events", type=_event_range, default=SynthConfig.events_per_doc, help="LO,HI events per doc")
    p.add_argument("--multi-role-rate", type=float, default=SynthConfig.multi_role_rate)
    p.add_argument("--shared-arg-rate", type=float, default=SynthConfig.shared_arg_rate)
    p.add_argument("--m", type=int, default=SynthConfig.m)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", parents=[common, onto, stop], help="validate (and filter/split) a parsed corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--filter", action="store_true", help="write stopword-filtered documents")
    p.add_argument("--split", type=_ratios, help="train,dev,test ratios; writes PREFIX.{train,dev,test}.jsonl")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build-gold", parents=[common, onto, stop], help="write gold token-event-role matrices")
    p.add_argument("--corpus", required=True)
    p.add_argument("--m", type=int, default=TrainConfig.m)
    p.add_argument("--out")
    p.set_defaults(func=cmd_build_gold)

    p = sub.add_parser("train", parents=[common, onto, stop], help="train a model and save a checkpoint")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dev", help="dev corpus for best-epoch selection")
    p.add_argument("--epochs", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--clip-norm", type=float, help=f"global gradient-norm clip (default {TrainConfig.clip_norm}; 0 disables)")
    p.add_argument("--ablate", type=_ablation, default=frozenset(), help="comma list: " + ",".join(ABLATION_FLAGS))
    p.add_argument("--paper-dims", action="store_true", help="768/50-dim embeddings, 4x200 Bi-LSTM, m=34")
    p.add_argument("--embeddings", help="frozen token vectors (container file)")
    p.add_argument("--log", help="epoch log path (default CHECKPOINT.log.jsonl)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="tag documents with a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--ablate", type=_ablation, default=None,
                   help="feature ablation of the calling pipeline; must match the checkpoint")
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", parents=[common, onto, stop], help="score a predictions file against gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("complexity", parents=[common], help="labeling cells needed by a tagging scheme")
    p.add_argument("--scheme", required=True, choices=[s.value for s in Scheme])
    for name in ("n", "N", "m", "r", "s", "p", "k"):
        p.add_argument(f"--{name}", type=int)
    p.add_argument("--m-prime", type=int)
    p.set_defaults(func=cmd_complexity)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference check of the full model loss")
    p.add_argument("--coords", type=int, default=50)
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 1
    try:
        with threadpool_limits(limits=args.threads):
            return args.func(args)
    except (TrainingError, nn.NonFiniteError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - surfaced as a runtime failure
        log.debug("unhandled", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
