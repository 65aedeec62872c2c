"""Command line entry point: ``scd <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from ..constraints import DocSyntax, extract_constraints
from ..engine.decoder import DecodeConfig, Decoder, Strategy
from ..engine.lm import RemoteLM, make_server
from ..engine.mock import build_mock_lm, load_mock_spec
from ..rerank.train import (
    LinearScorer,
    TrainConfig,
    generate_training_data,
    load_examples,
    save_examples,
    train_scorer,
)
from ..tokenizer import Vocab
from .dataset import load_dataset
from .runner import ORACLE, ContextMode, run_experiment
from .stats import format_stats, stats
from .synth import doc_dependent_suite, rerank_suite

ENDPOINT_ENV = "SCD_LM_ENDPOINT"
log = logging.getLogger("scd")


def _add_lm_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mock-spec", help="mock LM spec JSON (used when $%s is unset)" % ENDPOINT_ENV)
    p.add_argument("--vocab", help="vocabulary file, one piece per line (remote LM)")


def _add_decode_args(p: argparse.ArgumentParser, beam: int = 4) -> None:
    p.add_argument("--strategy", choices=[s.value for s in Strategy], default="greedy")
    p.add_argument("--beam", type=int, default=beam, help="beam size")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--p", type=float, default=0.9)
    p.add_argument("--temp", type=float, default=0.0)
    p.add_argument("--max-tokens", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--constrained", dest="constrained", action="store_true", default=True)
    g.add_argument("--unconstrained", dest="constrained", action="store_false")
    p.add_argument("--no-skip", action="store_true", help="spend a forward pass on forced tokens too")
    p.add_argument("--no-doc", action="store_true", help="strip the doc from the prompt")


def _decode_config(args, strategy: str | None = None) -> DecodeConfig:
    return DecodeConfig(
        strategy=strategy or args.strategy,
        beam_size=args.beam,
        k=args.k,
        p=args.p,
        temperature=args.temp,
        max_tokens=args.max_tokens,
        constrained=args.constrained,
        seed=args.seed,
        skip_forced=not args.no_skip,
    )


def _lm_and_vocab(args):
    vocab = None
    spec = None
    if args.mock_spec:
        spec, vocab = load_mock_spec(args.mock_spec)
    if args.vocab:
        vocab = Vocab.load(args.vocab)
    if vocab is None:
        raise SystemExit("need --mock-spec or --vocab")
    endpoint = os.environ.get(ENDPOINT_ENV)
    if endpoint:
        return RemoteLM(endpoint, vocab.size), vocab
    if spec is None:
        raise SystemExit(f"no LM: set ${ENDPOINT_ENV} or pass --mock-spec")
    return build_mock_lm(spec["lm"], vocab), vocab


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_extract(args) -> int:
    text = Path(args.doc).read_text(encoding="utf-8")
    table = extract_constraints(text, DocSyntax(args.syntax))
    _write(table.to_json(indent=2, sort_keys=True) + "\n", args.out)
    return 0


def _pick(samples, sample_id):
    if sample_id is None:
        return samples[0]
    for s in samples:
        if s.id == sample_id:
            return s
    raise SystemExit(f"no sample with id {sample_id!r}")


def cmd_decode(args) -> int:
    lm, vocab = _lm_and_vocab(args)
    sample = _pick(load_dataset(args.dataset), args.id)
    cands = Decoder(vocab).decode(sample.context(not args.no_doc), lm, sample.table(), _decode_config(args))
    out = {
        "id": sample.id,
        "forward_passes": cands.forward_passes,
        "candidates": [{"text": h.text, "logprob": h.logprob, "tokens": len(h.tokens)} for h in cands],
    }
    _write(json.dumps(out, indent=2) + "\n", args.out)
    return 0


def _scorer(arg):
    if arg is None:
        return None
    if arg == ORACLE:
        return ORACLE
    return LinearScorer.load(arg)


def cmd_run(args) -> int:
    lm, vocab = _lm_and_vocab(args)
    cfg = _decode_config(args)
    mode = ContextMode.WITHOUT_DOC if args.no_doc else ContextMode.WITH_DOC
    dataset = load_dataset(args.dataset)
    baseline = None
    if args.baseline:
        base_cfg = DecodeConfig(**{**cfg.__dict__, "constrained": False, "skip_forced": False})
        baseline = run_experiment(dataset, lm, base_cfg, mode, vocab=vocab, workers=args.workers)
    report = run_experiment(
        dataset, lm, cfg, mode, _scorer(args.scorer), vocab=vocab, workers=args.workers, baseline=baseline
    )
    _write(report.to_json(include_timing=args.timing), args.out)
    print(report.summary(), file=sys.stderr)
    return 0


def cmd_gen_train_data(args) -> int:
    lm, vocab = _lm_and_vocab(args)
    cfg = _decode_config(args, strategy="beam")
    examples, skipped = generate_training_data(
        load_dataset(args.dataset), lm, Decoder(vocab), cfg, with_doc=not args.no_doc
    )
    save_examples(examples, args.out)
    for sid, err in skipped.items():
        print(f"skipped {sid}: {err}", file=sys.stderr)
    print(f"{len(examples)} examples written to {args.out}", file=sys.stderr)
    return 0


def cmd_train_scorer(args) -> int:
    cfg = TrainConfig(
        epochs=args.epochs,
        lr=args.lr,
        spearman_weight=args.spearman_weight,
        sharpness=args.sharpness,
        val_fraction=args.val_fraction,
        seed=args.seed,
    )
    scorer = train_scorer(load_examples(args.examples), cfg)
    scorer.save(args.out)
    best = min(h["val_loss"] for h in scorer.history)
    print(f"scorer written to {args.out} (best validation loss {best:.4f})", file=sys.stderr)
    return 0


def cmd_rerank_eval(args) -> int:
    lm, vocab = _lm_and_vocab(args)
    cfg = _decode_config(args, strategy="beam")
    mode = ContextMode.WITHOUT_DOC if args.no_doc else ContextMode.WITH_DOC
    dataset = load_dataset(args.dataset)
    decoder = Decoder(vocab)
    rows = {
        "logprob": run_experiment(dataset, lm, cfg, mode, None, decoder=decoder, workers=args.workers),
        "scorer": run_experiment(dataset, lm, cfg, mode, _scorer(args.scorer), decoder=decoder, workers=args.workers),
        "oracle": run_experiment(dataset, lm, cfg, mode, ORACLE, decoder=decoder, workers=args.workers),
    }
    out = {name: r.accuracy for name, r in rows.items()}
    out["in_beam"] = rows["logprob"].in_beam_rate
    _write(json.dumps(out, indent=2, sort_keys=True) + "\n", args.out)
    return 0


def cmd_stats(args) -> int:
    vocab = Vocab.load(args.vocab) if args.vocab else None
    print(format_stats(stats(load_dataset(args.dataset), vocab)))
    return 0


def cmd_serve_mock_lm(args) -> int:
    spec, vocab = load_mock_spec(args.mock_spec)
    server = make_server(build_mock_lm(spec["lm"], vocab), args.host, args.port)
    host, port = server.server_address[:2]
    print(f"serving http://{host}:{port}/logits (vocab size {vocab.size})", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def cmd_synth(args) -> int:
    if args.kind == "rerank":
        suite = rerank_suite(args.n, args.seed)
    else:
        suite = doc_dependent_suite(args.n, args.seed)
    data, spec = suite.write(args.out_dir)
    print(f"wrote {data} and {spec}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scd", description="Constrained API-call decoding and reranking.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="documentation -> constraint table JSON")
    p.add_argument("doc")
    p.add_argument("--syntax", choices=[s.value for s in DocSyntax], default="canonical")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("decode", help="decode one sample")
    p.add_argument("dataset")
    p.add_argument("--id", help="sample id (default: first sample)")
    p.add_argument("-o", "--out")
    _add_lm_args(p)
    _add_decode_args(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("run", help="decode a dataset and write a report")
    p.add_argument("dataset")
    p.add_argument("-o", "--out", help="report JSON path (default: stdout)")
    p.add_argument("--scorer", help="scorer JSON, or 'oracle'")
    p.add_argument("--baseline", action="store_true", help="also run unconstrained without skipping for the speedup")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timing", action="store_true", help="include wall-clock fields in the report")
    _add_lm_args(p)
    _add_decode_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("gen-train-data", help="beam candidates with match-score targets")
    p.add_argument("dataset")
    p.add_argument("-o", "--out", required=True)
    _add_lm_args(p)
    _add_decode_args(p, beam=10)
    p.set_defaults(func=cmd_gen_train_data)

    p = sub.add_parser("train-scorer", help="fit the linear reranking scorer")
    p.add_argument("examples")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--spearman-weight", type=float, default=1.0)
    p.add_argument("--sharpness", type=float, default=10.0)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_scorer)

    p = sub.add_parser("rerank-eval", help="top-1 accuracy: logprob vs scorer vs oracle")
    p.add_argument("dataset")
    p.add_argument("--scorer", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--out")
    _add_lm_args(p)
    _add_decode_args(p, beam=10)
    p.set_defaults(func=cmd_rerank_eval)

    p = sub.add_parser("stats", help="dataset length statistics")
    p.add_argument("dataset")
    p.add_argument("--vocab", help="count vocab tokens instead of words")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("serve-mock-lm", help="serve a mock LM over HTTP")
    p.add_argument("--mock-spec", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(func=cmd_serve_mock_lm)

    p = sub.add_parser("synth", help="write a synthetic dataset and mock LM spec")
    p.add_argument("kind", choices=["rerank", "doc-dependent"])
    p.add_argument("--n", type=int, default=120)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
