"""Command-line entry point (``uts``)."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis
from .corpus import CorpusError, TruncationPolicy, generate_synthetic, make_oracle_labels, read_corpus, to_record
from .corpus.io import write_records
from .numerics import NumericalError
from .numerics.checkpoint import CheckpointError
from .train import ConfigError, TrainConfig, TrainingDiverged, coerce, load_config, load_model, read_loss_log, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("uts")


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; usage errors here are 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("training config (override --config)")
    for f in dataclasses.fields(TrainConfig):
        g.add_argument(_flag(f.name), dest=f"cfg_{f.name}", metavar=f.type.upper(), default=None,
                       help=f"default {f.default}")


def config_from_args(args) -> TrainConfig:
    overrides = {}
    for f in dataclasses.fields(TrainConfig):
        raw = getattr(args, f"cfg_{f.name}")
        if raw is not None:
            overrides[f.name] = coerce(f.name, raw)
    return load_config(args.config, overrides)


def policy_for(cfg: TrainConfig | dict) -> TruncationPolicy:
    get = cfg.get if isinstance(cfg, dict) else lambda k, d=None: getattr(cfg, k, d)
    return TruncationPolicy(max_events=get("max_events", 8), max_selected=get("max_selected", 4),
                            max_summary_tokens=get("max_len", 70))


def _load(path, policy=None, strict=True):
    if not Path(path).exists():
        raise FileNotFoundError(f"no such file: {path}")
    examples = read_corpus(path, policy=policy, strict=strict)
    if not examples:
        raise CorpusError(f"{path}: no examples")
    return examples


def _model_and_corpus(args):
    model, meta = load_model(args.ckpt[0] if isinstance(args.ckpt, list) else args.ckpt)
    examples = _load(args.input, policy_for(meta.get("train_config", {})))
    return model, meta, examples


# -- subcommands ---------------------------------------------------------------


def cmd_synth(args) -> int:
    recs = generate_synthetic(args.seed, args.n, out_path=args.out, max_selected=args.max_selected)
    print(f"wrote {len(recs)} records to {args.out}")
    return EXIT_OK


def cmd_make_oracle(args) -> int:
    policy = TruncationPolicy(max_selected=args.max_selected)
    examples = _load(args.input, policy, strict=not args.lenient)
    records = []
    for ex in examples:
        ex.oracle_labels = make_oracle_labels(ex, args.max_selected)
        records.append(to_record(ex))
    write_records(records, args.out)
    print(f"labelled {len(records)} examples -> {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = config_from_args(args)
    policy = policy_for(cfg)
    train_ex = _load(args.train, policy)
    val_ex = _load(args.val, policy)
    t0 = time.perf_counter()
    res = train(cfg, train_ex, val_ex, out_dir=args.out)
    st = res.state
    print(f"trained {st.epoch} epochs in {time.perf_counter() - t0:.1f}s; best val {st.best_val_loss:.4f}")
    for loss, path in st.top_checkpoints:
        print(f"  {loss:.4f}  {path}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .report import eval_report, parse_metrics

    try:
        metrics = parse_metrics(args.metrics)
    except ValueError as e:
        raise UsageError(e) from None
    _, meta = load_model(args.ckpt[0])
    examples = _load(args.input, policy_for(meta.get("train_config", {})))
    beam = args.beam or meta.get("train_config", {}).get("beam", 4)
    report = eval_report(args.ckpt, examples, metrics, beam=beam, max_len=args.max_len)
    Path(args.out).write_text(json.dumps(report, indent=1) + "\n")
    print(" ".join(f"{m}={report['mean'][m]:.4f}" for m in metrics), f"({len(examples)} examples, "
          f"{len(args.ckpt)} checkpoint{'s' if len(args.ckpt) > 1 else ''})")
    return EXIT_OK


def cmd_summarize(args) -> int:
    model, meta, examples = _model_and_corpus(args)
    rows = []
    if args.mode == "abs":
        beam = args.beam or meta.get("train_config", {}).get("beam", 4)
        trace_dir = Path(args.trace_dir) if args.trace_dir else None
        if trace_dir:
            trace_dir.mkdir(parents=True, exist_ok=True)
        for i in range(0, len(examples), 16):
            chunk = examples[i:i + 16]
            for ex, words in zip(chunk, model.summarize_abs(chunk, beam_size=beam, max_len=args.max_len)):
                row = {"id": ex.id, "summary": " ".join(words)}
                if trace_dir:
                    path = trace_dir / f"{ex.id}.pi.csv"
                    analysis.write_time_attention_csv(analysis.time_attention(model, [ex], args.max_len), path)
                    row["trace_path"] = str(path)
                rows.append(row)
    else:
        for i in range(0, len(examples), 16):
            chunk = examples[i:i + 16]
            for ex, dec in zip(chunk, model.extract(chunk, args.max_selected)):
                sents = ex.doc_sentences
                sel = list(dec.sorted_selection)
                rows.append({"id": ex.id, "selected": sel, "sentences": [" ".join(sents[j]) for j in sel]})
    write_records(rows, args.out)
    print(f"wrote {len(rows)} summaries to {args.out}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .toy import run_gradcheck

    t0 = time.perf_counter()
    rep = run_gradcheck(seed=args.seed, lambda_inc=args.lambda_inc, K=args.K, tolerance=args.tolerance,
                        floor=args.floor)
    elapsed = time.perf_counter() - t0
    lines = rep.summary_lines()
    for line in lines if args.verbose else lines[-1:]:
        print(line)
    for m in rep.failures[:10]:
        print(f"  {m.name}{list(m.index)} analytic={m.analytic:.6e} numeric={m.numeric:.6e} rel={m.rel_error:.2e}")
    print(f"runtime {elapsed:.1f}s")
    return EXIT_OK if rep.passed else EXIT_NUMERIC


def cmd_time_attention(args) -> int:
    model, _, examples = _model_and_corpus(args)
    if args.limit:
        examples = examples[:args.limit]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    maps = analysis.time_attention(model, examples, args.max_len)
    analysis.write_time_attention_csv(maps, out / "time_attention.csv")
    first, last = analysis.write_com_summary_csv(maps, out / "center_of_mass.csv")
    if not args.no_plot:
        from .plots import plot_time_attention

        for m in maps[:args.plots]:
            plot_time_attention(m.pi, m.tokens, out / f"{m.example_id}.pi.svg", m.example_id)
    trend = "earlier -> later" if first < last else "no forward drift"
    print(f"center of mass of pi: first step {first:.3f}, last step {last:.3f} ({trend})")
    return EXIT_OK


def cmd_two_level(args) -> int:
    model, _, examples = _model_and_corpus(args)
    by_id = {ex.id: ex for ex in examples}
    if args.example not in by_id:
        raise CorpusError(f"example {args.example!r} not in {args.input}")
    dump = analysis.two_level(model, by_id[args.example], args.max_len)
    if not len(dump["beta"]):
        raise CorpusError(f"no decode steps traced for {args.example!r}")
    paths = analysis.write_two_level_csv(dump, args.out_dir)
    if not args.no_plot:
        from .plots import plot_two_level

        step = min(args.step, len(dump["beta"]) - 1)
        paths.append(plot_two_level(dump, step, Path(args.out_dir) / f"two_level_step{step}.svg"))
    print(f"mean word/event consistency {float(np.mean(dump['consistency'])):.4f}")
    for p in paths:
        print(f"  {p}")
    return EXIT_OK


def cmd_plot_losses(args) -> int:
    from .plots import plot_losses

    rows = read_loss_log(args.log)
    out = plot_losses(rows, args.out)
    print(f"{len(rows)} epochs -> {out}")
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def _add_model_io(p):
    p.add_argument("--ckpt", required=True, help="checkpoint file")
    p.add_argument("--in", dest="input", required=True, help="corpus (JSON Lines)")
    p.add_argument("--max-len", type=int, default=70)


def build_parser() -> Parser:
    parser = Parser(prog="uts", description="Timeline summarization: joint abstractive/extractive model.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=Parser)
    sub.required = True

    p = sub.add_parser("synth", help="write a seeded synthetic corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-selected", type=int, default=4)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("make-oracle", help="attach greedy ROUGE-2 oracle labels")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-selected", type=int, default=4)
    p.add_argument("--lenient", action="store_true", help="skip malformed records instead of failing")
    p.set_defaults(func=cmd_make_oracle)

    p = sub.add_parser("train", help="train with early stopping, keeping the best checkpoints")
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="key=value config file")
    add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="ROUGE / date-F1 averaged over checkpoints")
    p.add_argument("--ckpt", required=True, nargs="+")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--metrics", default="r1,r2,rl,datef1")
    p.add_argument("--out", required=True)
    p.add_argument("--beam", type=int, default=None, help="default: the checkpoint's training beam")
    p.add_argument("--max-len", type=int, default=70)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("summarize", help="decode summaries (abs) or select sentences (ext)")
    p.add_argument("--mode", choices=("abs", "ext"), default="abs")
    _add_model_io(p)
    p.add_argument("--out", required=True)
    p.add_argument("--beam", type=int, default=None)
    p.add_argument("--max-selected", type=int, default=4)
    p.add_argument("--trace-dir", help="abs mode: also dump per-example time attention")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("gradcheck", help="finite-difference check of the joint loss on a toy model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda-inc", type=float, default=1.0)
    p.add_argument("--K", type=int, default=3)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--floor", type=float, default=1e-5)
    p.set_defaults(func=cmd_gradcheck)

    def add_plot_losses(sp, name):
        q = sp.add_parser(name, help="render the per-epoch loss log as SVG")
        q.add_argument("--log", required=True, help="losses.tsv written by train")
        q.add_argument("--out", default="losses.svg")
        q.set_defaults(func=cmd_plot_losses)

    p = sub.add_parser("analyze", help="attention diagnostics")
    asub = p.add_subparsers(dest="analysis", metavar="ANALYSIS", parser_class=Parser)
    asub.required = True
    q = asub.add_parser("time-attention", help="dump pi per decode step")
    _add_model_io(q)
    q.add_argument("--out-dir", required=True)
    q.add_argument("--limit", type=int, default=0)
    q.add_argument("--plots", type=int, default=3, help="heatmaps for the first N examples")
    q.add_argument("--no-plot", action="store_true")
    q.set_defaults(func=cmd_time_attention)
    q = asub.add_parser("two-level", help="dump word/event/combined attention for one example")
    _add_model_io(q)
    q.add_argument("--example", required=True)
    q.add_argument("--out-dir", required=True)
    q.add_argument("--step", type=int, default=0)
    q.add_argument("--no-plot", action="store_true")
    q.set_defaults(func=cmd_two_level)
    add_plot_losses(asub, "plot-losses")
    add_plot_losses(sub, "plot-losses")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError) as e:
        print(f"uts: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingDiverged, NumericalError) as e:
        print(f"uts: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CorpusError, CheckpointError, OSError, ValueError, json.JSONDecodeError) as e:
        print(f"uts: data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
