"""Command-line interface.

Exit codes: 0 success, 1 usage error (or a failed verification), 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import data
from .graph import GraphError
from .metrics import corpus_report
from .nn import ShapeError

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _emit(obj) -> None:
    print(json.dumps(obj, separators=(",", ":")), flush=True)


def _report_line(report) -> dict:
    d = report.as_dict()
    d["bleu"] = round(100 * d["bleu"], 4)  # displayed on the usual 0..100 scale
    return d


# -- subcommands ---------------------------------------------------------------


def cmd_build_graphs(args) -> int:
    code_cfg, nl_cfg = data.edge_configs(args.edges)
    out = []
    for rec in data.read_jsonl(args.input):
        g = data.record_graph(rec, code_cfg, nl_cfg)
        out.append(data.graph_record(g, rec.get("id", ""), rec.get("task", ""), rec.get("target", [])))
    data.write_jsonl(args.output, out)
    return EXIT_OK


def cmd_gen_data(args) -> int:
    from .synthetic import generate_synthetic_corpus

    data.write_jsonl(args.output, generate_synthetic_corpus(args.kind, args.size, args.seed))
    return EXIT_OK


def cmd_train(args) -> int:
    from .model import SeqGnnModel, vocabulary_for
    from .training import train

    cfg = data.load_config(args.config)
    code_cfg, nl_cfg = data.edge_configs(cfg["edges"])
    samples = data.load_samples(args.data, code_cfg, nl_cfg)
    if not samples:
        raise data.DataError(f"{args.data}: no records")
    validation = data.load_samples(args.validation, code_cfg, nl_cfg) if args.validation else None
    vocab = vocabulary_for(samples, min_count=cfg["min_count"], max_size=cfg["max_vocab"] or None)
    model_cfg = data.model_config(cfg, len(vocab), samples[0].graph.num_edge_types)
    tcfg = data.train_config(cfg)
    model = SeqGnnModel(model_cfg, vocab, seed=tcfg.seed)
    result = train(samples, None, tcfg, model=model, validation=validation, max_len=cfg["max_len"],
                   stop_when=lambda e: _emit(e.as_dict()))
    data.save_checkpoint(args.out, result.model, extra={"edges": cfg["edges"], "max_len": cfg["max_len"],
                                                         "beam_width": cfg["beam_width"]})
    return EXIT_OK


def _model_inputs(args):
    model, extra = data.load_checkpoint(args.checkpoint)
    code_cfg, nl_cfg = data.edge_configs(extra.get("edges", "all"))
    return model, extra, code_cfg, nl_cfg


def cmd_evaluate(args) -> int:
    refs = data.read_jsonl(args.data)
    if not refs:
        raise data.DataError(f"{args.data}: no records")
    references = [list(r.get("target", [])) for r in refs]
    if args.predictions:
        preds = {}
        for p in data.read_jsonl(args.predictions):
            preds[str(p.get("id", ""))] = list(p.get("prediction", p.get("target", [])))
        missing = [r.get("id") for r in refs if str(r.get("id", "")) not in preds]
        if missing:
            raise data.DataError(f"no prediction for record(s) {missing[:5]}")
        predictions = [preds[str(r.get("id", ""))] for r in refs]
    else:
        model, extra, code_cfg, nl_cfg = _model_inputs(args)
        samples = [data.record_sample(r, code_cfg, nl_cfg) for r in refs]
        predictions = model.predict(samples, max_len=extra.get("max_len", 20), beam_width=args.beam or extra.get("beam_width", 1))
    _emit(_report_line(corpus_report(predictions, references)))
    return EXIT_OK


def cmd_predict(args) -> int:
    model, extra, code_cfg, nl_cfg = _model_inputs(args)
    text = args.record
    if text == "-":
        text = sys.stdin.read()
    try:
        rec = json.loads(text.strip().splitlines()[0] if text.strip() else "")
    except (json.JSONDecodeError, IndexError):
        try:
            rec = data.read_jsonl(text)[0]
        except (OSError, IndexError):
            raise data.DataError("predict expects one JSON record (inline, a file path or - for stdin)") from None
    sample = data.record_sample(rec, code_cfg, nl_cfg)
    tokens = model.predict([sample], max_len=extra.get("max_len", 20), beam_width=args.beam or extra.get("beam_width", 1))[0]
    print(" ".join(tokens))
    return EXIT_OK


def cmd_grad_check(args) -> int:
    from .verify import micro_gradient_check

    start = time.perf_counter()
    worst = 0.0
    failed = 0
    for seed in range(args.seed, args.seed + args.seeds):
        report = micro_gradient_check(seed, num_samples=args.samples, tolerance=args.tolerance)
        worst = max(worst, report.max_relative_error)
        failed += not report.passed
    _emit({"seeds": args.seeds, "coordinates_per_seed": args.samples, "max_relative_error": worst,
           "failed_seeds": failed, "tolerance": args.tolerance, "seconds": round(time.perf_counter() - start, 2)})
    return EXIT_OK if failed == 0 else EXIT_USAGE


def cmd_stats(args) -> int:
    code_cfg, nl_cfg = data.edge_configs(args.edges)
    graphs = [data.record_graph(r, code_cfg, nl_cfg) for r in data.read_jsonl(args.input)]
    if not graphs:
        raise data.DataError(f"{args.input}: no records")
    by_type = {}
    for g in graphs:
        for name, e in zip(g.edge_type_names, g.edge_lists):
            by_type[name] = by_type.get(name, 0) + len(e)
    _emit({
        "graphs": len(graphs),
        "avg_nodes": float(np.mean([g.node_count for g in graphs])),
        "avg_edges": float(np.mean([g.edge_count for g in graphs])),
        "avg_sequence_nodes": float(np.mean([g.sequence_length for g in graphs])),
        "avg_edges_by_type": {k: v / len(graphs) for k, v in by_type.items()},
    })
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="structsum", description="Graph-augmented sequence summarisation models.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("build-graphs", help="turn dataset records into graph records")
    s.add_argument("input")
    s.add_argument("output")
    s.add_argument("--edges", default="all", help="edge families: all, none, or a list such as child,lastlexicaluse,ref")
    s.set_defaults(func=cmd_build_graphs)

    s = sub.add_parser("gen-data", help="write a synthetic corpus")
    s.add_argument("--kind", required=True, choices=("naming-longrange", "copy-task", "nl-toy"))
    s.add_argument("--size", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", dest="output", required=True)
    s.set_defaults(func=cmd_gen_data)

    s = sub.add_parser("train", help="train a model and write a checkpoint")
    s.add_argument("data")
    s.add_argument("--config", help="key = value file (defaults apply to missing keys)")
    s.add_argument("--validation", help="records evaluated after every epoch")
    s.add_argument("--out", required=True, help="checkpoint path")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="print a metric report line")
    s.add_argument("data", help="records with reference targets")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--checkpoint")
    g.add_argument("--predictions", help="JSONL with id and prediction (or target) per line")
    s.add_argument("--beam", type=int, default=0)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("predict", help="decode one record")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("record", help="a JSON record, a JSONL file (first line is used) or - for stdin")
    s.add_argument("--beam", type=int, default=0)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("grad-check", help="finite-difference check of the micro model")
    s.add_argument("--seeds", type=int, default=10)
    s.add_argument("--seed", type=int, default=0, help="first seed")
    s.add_argument("--samples", type=int, default=64, help="coordinates per seed")
    s.add_argument("--tolerance", type=float, default=1e-4)
    s.set_defaults(func=cmd_grad_check)

    s = sub.add_parser("stats", help="average node and edge counts")
    s.add_argument("input", help="dataset or graph records")
    s.add_argument("--edges", default="all")
    s.set_defaults(func=cmd_stats)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"structsum: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        return args.func(args)
    except (data.DataError, GraphError, ShapeError, OSError, ValueError, KeyError) as exc:
        print(f"structsum: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
