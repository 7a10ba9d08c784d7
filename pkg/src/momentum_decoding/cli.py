"""``momentum`` command line: generate | bench | sweep | ablate | stats | export-dot."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from . import harness
from .corpus import load_corpus
from .decoders import STRATEGIES
from .errors import ConfigError, MomentumError
from .harness import (
    ABLATION_COLUMNS,
    BENCH_COLUMNS,
    BENCH_STRATEGIES,
    SWEEP_COLUMNS,
    TIMING_COLUMNS,
    ProviderSpec,
    StrategySpec,
)
from .resistance import DecoderConfig
from .sequence_index import OccurrenceIndex

log = logging.getLogger("momentum")

DECODER_FLAGS = ("alpha", "top_k", "max_steps", "beam_width", "nucleus_p", "cs_alpha", "seed")


def _add_provider(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("provider (exactly one, or a [provider] config section)")
    g.add_argument("--toy-corpus", help="fit a toy n-gram LM on this corpus file")
    g.add_argument("--corpus-format", choices=("ids", "text"), help="toy corpus format")
    g.add_argument("--order", type=int, help="toy LM order")
    g.add_argument("--smoothing", type=float, help="toy LM additive smoothing")
    g.add_argument("--scripted", help="scripted-provider JSON file")
    g.add_argument("--http", nargs="?", const="", metavar="URL",
                   help="HTTP logits endpoint; bare flag reads $MOMENTUM_LOGITS_ENDPOINT")
    g.add_argument("--top-n", type=int, help="HTTP: request only the top-n entries")
    g.add_argument("--timeout", type=float, help="HTTP request timeout in seconds")
    g.add_argument("--vocab-size", type=int)
    g.add_argument("--terminator", type=int)
    g.add_argument("--builtin", choices=("loop", "markov"),
                   help="built-in toy LM with its own prompts")


def _add_run(p: argparse.ArgumentParser, prompts: bool = True) -> None:
    p.add_argument("-c", "--config", help="YAML config file")
    _add_provider(p)
    d = p.add_argument_group("decoder")
    d.add_argument("--alpha", type=float)
    d.add_argument("--top-k", type=int)
    d.add_argument("--max-steps", type=int)
    d.add_argument("--beam-width", type=int)
    d.add_argument("--nucleus-p", type=float)
    d.add_argument("--cs-alpha", type=float)
    d.add_argument("--seed", type=int)
    d.add_argument("--resistance", help="monotone (default) or constant:<value>")
    if prompts:
        p.add_argument("--prompts", help="prompt file, one prompt per line")
        p.add_argument("--prompt-format", choices=("ids", "text"), default=None)
        p.add_argument("--prompt-length", type=int)
        p.add_argument("--workers", type=int)
    p.add_argument("-o", "--output", help="output path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="momentum", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="decode every prompt, write JSONL records")
    p.add_argument("--strategy", choices=STRATEGIES, default="momentum")
    p.add_argument("--timing", action="store_true", help="attach per-step wall-clock times")
    _add_run(p)

    p = sub.add_parser("bench", help="metrics table across strategies (CSV)")
    p.add_argument("--strategy", action="append", dest="strategies", metavar="SPEC",
                   help="name[:key=value,...]; repeatable")
    p.add_argument("--records", help="score pre-generated JSONL instead of decoding inline")
    p.add_argument("--timing", action="store_true", help="add wall-clock columns")
    _add_run(p)

    p = sub.add_parser("sweep", help="hyperparameter grids (CSV)")
    p.add_argument("--grid", action="append", metavar="STRATEGY=V1,V2",
                   help="replace the default grids; repeatable")
    _add_run(p)

    p = sub.add_parser("ablate", help="monotone vs constant resistance (CSV)")
    p.add_argument("--variant", action="append", dest="variants",
                   help="monotone or constant:<value>; repeatable")
    _add_run(p)

    p = sub.add_parser("stats", help="corpus rep-n table (CSV)")
    p.add_argument("corpora", nargs="*", help="corpus files")
    p.add_argument("--format", choices=("ids", "text"), default="ids")
    p.add_argument("--builtin", action="append", choices=("loop", "markov"), default=[])
    p.add_argument("--n-range", default="2-8", help="inclusive range, e.g. 2-4")
    p.add_argument("-o", "--output")

    p = sub.add_parser("export-dot", help="occurrence graph of one record (DOT)")
    p.add_argument("records", help="JSONL from generate")
    p.add_argument("--index", type=int, default=0, help="prompt index to export")
    p.add_argument("--vocab", help="text corpus whose vocabulary labels the nodes")
    p.add_argument("-o", "--output")
    return parser


def _provider_spec(args: argparse.Namespace, cfg: dict[str, Any]) -> ProviderSpec:
    chosen = [name for name, value in (("toy", args.toy_corpus), ("scripted", args.scripted),
                                       ("http", args.http), ("builtin", args.builtin))
              if value is not None]
    if len(chosen) > 1:
        raise ConfigError(f"give exactly one provider, got {', '.join(chosen)}")
    section = dict(cfg.get("provider") or {})
    if chosen:
        kind = chosen[0]
        if section.get("kind") not in (None, kind):
            section = {}
        section["kind"] = kind
        key = {"toy": "corpus", "scripted": "file", "http": "endpoint", "builtin": "name"}[kind]
        value = {"toy": args.toy_corpus, "scripted": args.scripted,
                 "http": args.http or None, "builtin": args.builtin}[kind]
        if value is not None:
            section[key] = value
    if "kind" not in section:
        raise ConfigError("no provider given; use --toy-corpus, --scripted, --http or --builtin")
    for flag, key in (("corpus_format", "format"), ("order", "order"), ("smoothing", "smoothing"),
                      ("top_n", "top_n"), ("timeout", "timeout"), ("vocab_size", "vocab_size"),
                      ("terminator", "terminator")):
        if getattr(args, flag) is not None:
            section[key] = getattr(args, flag)
    return ProviderSpec.from_config(section)


def _decoder(args: argparse.Namespace, cfg: dict[str, Any]) -> DecoderConfig:
    section = dict(cfg.get("decoder") or {})
    for flag in DECODER_FLAGS:
        if getattr(args, flag, None) is not None:
            section[flag] = getattr(args, flag)
    config = DecoderConfig.from_config(section, cfg.get("resistance"))
    if getattr(args, "resistance", None):
        config = config.replace(resistance=harness.parse_variant(args.resistance))
    return config


def _run_options(args: argparse.Namespace, cfg: dict[str, Any]) -> dict[str, Any]:
    run = dict(cfg.get("run") or {})
    unknown = set(run) - {"prompts", "prompt_format", "prompt_length", "workers"}
    if unknown:
        raise ConfigError(f"unknown run keys: {sorted(unknown)}")
    for key in ("prompts", "prompt_format", "prompt_length", "workers"):
        if getattr(args, key, None) is not None:
            run[key] = getattr(args, key)
    run.setdefault("prompt_format", "ids")
    run.setdefault("prompt_length", 32)
    run.setdefault("workers", 1)
    return run


def _setup(args: argparse.Namespace):
    cfg = harness.load_config(args.config)
    loaded = harness.load_provider(_provider_spec(args, cfg))
    config = _decoder(args, cfg)
    run = _run_options(args, cfg)
    if run.get("prompts"):
        prompts = harness.read_prompts(run["prompts"], loaded.provider, run["prompt_format"])
    elif loaded.prompts is not None:
        prompts = loaded.prompts
    else:
        raise ConfigError("no prompts given; use --prompts or a [run] prompts key")
    return loaded.provider, config, prompts, run


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_generate(args: argparse.Namespace) -> int:
    provider, config, prompts, run = _setup(args)
    results = harness.run_prompts(args.strategy, provider, prompts, config,
                                  run["prompt_length"], run["workers"], timing=args.timing)
    lines = []
    for r in results:
        d = r.to_dict()
        if args.timing and r.timings is not None:
            d["step_seconds"] = r.timings
        lines.append(d)
    _write("".join(json.dumps(d, separators=(",", ":")) + "\n" for d in lines), args.output)
    for r in results:
        if r.error:
            log.error("prompt %d: %s", r.index, r.error)
        elif r.skipped:
            log.warning("prompt %d skipped: %s", r.index, r.skipped)
    return 1 if any(r.error for r in results) else 0


def cmd_bench(args: argparse.Namespace) -> int:
    columns = BENCH_COLUMNS + (TIMING_COLUMNS if args.timing else [])
    if args.records:
        cfg = harness.load_config(args.config)
        provider = harness.load_provider(_provider_spec(args, cfg)).provider
        results = harness.loads_results(Path(args.records).read_text())
        runs = harness.group_records(results)
        rows = harness.metric_table(runs, provider)
        columns = BENCH_COLUMNS
    else:
        provider, config, prompts, run = _setup(args)
        specs = [StrategySpec.parse(s) for s in (args.strategies or BENCH_STRATEGIES)]
        rows, runs = harness.bench(provider, prompts, specs, config, run["prompt_length"],
                                   run["workers"], timing=args.timing)
    _write(harness.to_csv(rows, columns), args.output)
    for row in rows:
        if row["warning"]:
            log.warning("%s: %s", row["strategy"], row["warning"])
    return 1 if any(r.error for run_ in runs for r in run_.results) else 0


def cmd_sweep(args: argparse.Namespace) -> int:
    provider, config, prompts, run = _setup(args)
    grids = dict(harness.parse_grid(g) for g in args.grid) if args.grid else None
    rows, _ = harness.sweep(provider, prompts, config, grids, run["prompt_length"], run["workers"])
    _write(harness.to_csv(rows, SWEEP_COLUMNS), args.output)
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    provider, config, prompts, run = _setup(args)
    variants = args.variants or harness.ABLATION_VARIANTS
    rows, runs = harness.ablate(provider, prompts, config, variants, run["prompt_length"],
                                run["workers"])
    _write(harness.to_csv(rows, ABLATION_COLUMNS), args.output)
    return 1 if any(r.error for run_ in runs for r in run_.results) else 0


def cmd_stats(args: argparse.Namespace) -> int:
    from .benchmarks import builtin

    corpora = {path: load_corpus(path, args.format).docs for path in args.corpora}
    for name in args.builtin:
        corpora[name] = builtin(name).corpus
    if not corpora:
        raise ConfigError("give at least one corpus file or --builtin")
    rows = harness.stats(corpora, harness.parse_n_range(args.n_range))
    _write(harness.to_csv(rows, ["n", *corpora]), args.output)
    return 0


def cmd_export_dot(args: argparse.Namespace) -> int:
    results = harness.loads_results(Path(args.records).read_text())
    match = [r for r in results if r.index == args.index and r.record is not None]
    if not match:
        raise ConfigError(f"no record with index {args.index} in {args.records}")
    record = match[0].record
    labels = dict(enumerate(load_corpus(args.vocab, "text").strings)) if args.vocab else None
    index = OccurrenceIndex(record.prompt + record.generated)
    _write(index.to_dot(labels), args.output)
    return 0


COMMANDS = {"generate": cmd_generate, "bench": cmd_bench, "sweep": cmd_sweep,
            "ablate": cmd_ablate, "stats": cmd_stats, "export-dot": cmd_export_dot}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except MomentumError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except OSError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
