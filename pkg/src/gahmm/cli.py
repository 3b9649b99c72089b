"""Command-line entry point: `gahmm train | recognize | explain`.

Exit codes: 0 success, 2 input error, 3 config error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from gahmm.bankio import BankFormatError, dumps_banks, loads_banks
from gahmm.config import RunConfig, load_catalog_files, load_config
from gahmm.events import ObservationEvent, ParseError, Vocabulary, parse_event_stream
from gahmm.hmm import DEFAULT_ALPHA, DEFAULT_BETA, build_model_bank
from gahmm.messages import message_sort_key, to_message
from gahmm.ontology import CatalogError
from gahmm.pipelines import (
    ConfigError,
    LayerStack,
    RecognitionResult,
    Tracer,
    ml_fuse,
    run_hhmm,
    run_layer_stack,
)

EXIT_OK, EXIT_INPUT, EXIT_CONFIG = 0, 2, 3


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _read(path: str, what: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {what} {path}: {exc.strerror}", EXIT_INPUT) from None


def cmd_train(args) -> int:
    if args.config:
        cfg = _config(args.config)
        alpha = args.alpha if args.alpha is not None else cfg.alpha
        beta = args.beta if args.beta is not None else cfg.beta
        try:
            catalogs = cfg.load_catalogs()
        except (CatalogError, ParseError) as exc:
            raise CliError(f"invalid catalog: {exc}", EXIT_INPUT) from None
    else:
        if not args.catalog:
            raise CliError("train needs --catalog or --config", EXIT_CONFIG)
        for path in args.catalog:
            _read(path, "catalog")
        try:
            catalogs = [load_catalog_files(args.catalog)]
        except (CatalogError, ParseError) as exc:
            raise CliError(f"invalid catalog: {exc}", EXIT_INPUT) from None
        alpha = args.alpha if args.alpha is not None else DEFAULT_ALPHA
        beta = args.beta if args.beta is not None else DEFAULT_BETA
    try:
        banks = [build_model_bank(cat, alpha, beta) for cat in catalogs]
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    Path(args.out).write_text(dumps_banks(banks), encoding="utf-8")
    for k, bank in enumerate(banks):
        print(f"layer {k}: {len(bank.labels)} labels, {len(bank.vocab_names)} symbols", file=sys.stderr)
    return EXIT_OK


def _config(path: str) -> RunConfig:
    try:
        return load_config(path)
    except ConfigError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None


def _setup(args) -> tuple[RunConfig, LayerStack, list[ObservationEvent]]:
    cfg = _config(args.config)
    try:
        banks, digests = loads_banks(_read(args.bank, "bank"))
    except BankFormatError as exc:
        raise CliError(f"bad bank file: {exc}", EXIT_INPUT) from None
    try:
        catalogs = cfg.load_catalogs()
    except (CatalogError, ParseError, OSError) as exc:
        raise CliError(f"invalid catalog in config: {exc}", EXIT_CONFIG) from None
    if len(catalogs) != len(banks):
        raise CliError(f"bank has {len(banks)} layer(s) but config has {len(catalogs)}", EXIT_CONFIG)
    for k, (cat, digest) in enumerate(zip(catalogs, digests)):
        if cat.vocab.digest() != digest or Vocabulary(banks[k].vocab_names[1:]).digest() != digest:
            raise CliError(f"layer {k}: vocabulary hash mismatch between bank and config", EXIT_CONFIG)
    try:
        stack = cfg.build_stack(banks)
    except (ConfigError, ValueError) as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    try:
        events = parse_event_stream(_read(args.events, "event file"), cfg.aliases)
    except ValueError as exc:
        raise CliError(f"{args.events}: {exc}", EXIT_INPUT) from None
    return cfg, stack, events


def recognize(events: Sequence[ObservationEvent], cfg: RunConfig, stack: LayerStack,
              trace=None) -> list[RecognitionResult]:
    """Run the configured architecture and return results sorted for emission."""
    if not events:
        return []
    if cfg.architecture == "H":
        try:
            per_context = run_hhmm(events, stack, cfg.context_mode, cfg.contexts, trace=trace)
        except ConfigError as exc:
            raise CliError(str(exc), EXIT_CONFIG) from None
        results = [r for rs in per_context.values() for r in rs]
    else:
        per_layer = run_layer_stack(events, stack, trace=trace)
        results = [r.with_context(None, cfg.architecture) for rs in per_layer for r in rs]
    if cfg.fuse:
        groups: dict[tuple, list[RecognitionResult]] = {}
        kept = [r for r in results if r.kind != "window"]
        for r in results:
            if r.kind == "window":
                groups.setdefault((r.context or "", r.layer), []).append(r)
        results = kept + [ml_fuse(g) for g in groups.values()]
    return sorted(results, key=message_sort_key)


def _table_row(msg) -> str:
    return "\t".join([
        f"{msg.span[0]}-{msg.span[1]}", msg.context or "-", str(msg.layer), msg.architecture,
        msg.token, f"{msg.confidence:.6f}", ",".join(msg.participants) or "-",
    ])


def cmd_recognize(args) -> int:
    cfg, stack, events = _setup(args)
    results = recognize(events, cfg, stack)
    messages = [to_message(r, events) for r in results]
    if cfg.output == "table":
        print("span\tcontext\tlayer\tarch\tactivity\tconfidence\tparticipants")
        for m in messages:
            print(_table_row(m))
    else:
        for m in messages:
            print(m.to_json())
    return EXIT_OK


def _fmt_scores(scores: dict[str, float]) -> str:
    return ", ".join(f"{k}={v:.6f}" for k, v in scores.items())


def format_trace(records) -> list[str]:
    lines = []
    for kind, p in records:
        if kind == "context":
            lines.append(f"context {p['context']} ({len(p['stream'])} events): {', '.join(p['stream'])}")
        elif kind == "stream":
            lines.append(f"  layer {p['layer']} input ({len(p['stream'])}): {', '.join(p['stream'])}")
        elif kind == "drop":
            extra = f" {p['confidence']} < {p['floor']}" if p["reason"] == "confidence" else ""
            lines.append(f"  layer {p['layer']} removed {p['token']} ({p['reason']}{extra})")
        elif kind == "frequency":
            lines.append(f"  layer {p['layer']} frequency disparity -> {p['label']} (margin {p['margin']})")
        elif kind == "windows":
            lines.append(f"  layer {p['layer']} windows: case={p['case']} n={p['n']} w={p['w']} "
                         f"count={p['count']} unconsumed={p['unconsumed']}")
        elif kind == "skip":
            lines.append(f"  layer {p['layer']} no windows: {p['reason']}")
        elif kind == "window":
            verdict = f"-> {p['label']}" if p["accepted"] else "-> (none)"
            prov = f" [{', '.join(p['provenance'])}]" if p["provenance"] else ""
            lines.append(f"    window [{', '.join(p['tokens'])}] {verdict}{prov}")
            lines.append(f"      scores: {_fmt_scores(p['scores'])}")
        elif kind == "substitute":
            lines.append(f"    substituted {p['label']} at {p['position']}; stream "
                         f"({len(p['stream'])}): {', '.join(p['stream'])}")
    return lines


def cmd_explain(args) -> int:
    cfg, stack, events = _setup(args)
    tracer = Tracer()
    results = recognize(events, cfg, stack, trace=tracer)
    for line in format_trace(tracer.records):
        print(line)
    print(f"recognized {len(results)}:")
    for r in results:
        where = f" context={r.context}" if r.context else ""
        print(f"  {r.span[0]}-{r.span[1]} layer={r.layer}{where} {r.token} "
              f"ll={r.log_likelihood:.6f} confidence={r.confidence:.6f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gahmm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="build and save model banks from catalogs")
    p.add_argument("--catalog", nargs="+", help="catalog files merged into one layer")
    p.add_argument("--config", help="take layers and catalogs from a run config instead")
    p.add_argument("--out", required=True, help="bank file to write")
    p.add_argument("--alpha", type=float, help="emission smoothing (default 0.1)")
    p.add_argument("--beta", type=float, help="label-state self-loop probability (default 0.6)")
    p.set_defaults(func=cmd_train)

    for name, func, text in (("recognize", cmd_recognize, "emit semantic messages as JSON lines"),
                             ("explain", cmd_explain, "print a window-by-window trace")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--events", required=True)
        p.add_argument("--bank", required=True)
        p.add_argument("--config", required=True)
        p.set_defaults(func=func)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"gahmm: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
