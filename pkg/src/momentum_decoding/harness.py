"""Run orchestration behind the CLI: providers from config, prompt runs, tables."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .benchmarks import builtin
from .corpus import Corpus, encode_text, load_corpus, read_token_lines
from .decoders import STRATEGIES, GenerationRecord, generate
from .errors import ConfigError, GenerationError, MomentumError
from .metrics import corpus_ngram_stats, evaluate
from .providers import HTTPProvider, Provider, ScriptedProvider, fit_toy_lm
from .resistance import DecoderConfig, ResistanceTable, constant_table

log = logging.getLogger(__name__)

WARMUP_TOKENS = 5

SWEEP_GRIDS: dict[str, tuple[str, list[float], dict[str, float]]] = {
    "top_k": ("top_k", [5, 10, 20, 40, 50, 80, 160, 320, 640], {}),
    "nucleus": ("nucleus_p", [0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 1.0], {}),
    "contrastive": ("top_k", list(range(2, 11)), {"cs_alpha": 0.6}),
    "momentum": ("top_k", list(range(2, 11)), {"alpha": 0.2}),
}

BENCH_STRATEGIES = ("greedy", "beam", "top_k:top_k=50", "nucleus:nucleus_p=0.95",
                    "contrastive:top_k=5,cs_alpha=0.6", "momentum")

ABLATION_VARIANTS = ("monotone", "constant:2")

PROVIDER_KINDS = ("toy", "scripted", "http", "builtin")


def load_config(path: str | Path | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        data = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    unknown = set(data) - {"provider", "decoder", "resistance", "run"}
    if unknown:
        raise ConfigError(f"{path}: unknown sections {sorted(unknown)}")
    return data


@dataclass
class ProviderSpec:
    kind: str
    corpus: str | None = None
    format: str = "ids"
    order: int = 3
    smoothing: float = 1.0
    vocab_size: int | None = None
    terminator: int | None = None
    file: str | None = None
    endpoint: str | None = None
    top_n: int | None = None
    timeout: float = 30.0
    name: str | None = None

    @classmethod
    def from_config(cls, section: Mapping[str, Any]) -> ProviderSpec:
        section = dict(section)
        kind = section.pop("kind", None)
        if kind not in PROVIDER_KINDS:
            raise ConfigError(f"provider.kind must be one of {PROVIDER_KINDS}, got {kind!r}")
        fields = set(cls.__dataclass_fields__) - {"kind"}
        unknown = set(section) - fields
        if unknown:
            raise ConfigError(f"unknown provider keys: {sorted(unknown)}")
        spec = cls(kind, **section)
        required = {"toy": "corpus", "scripted": "file", "builtin": "name"}.get(kind)
        if required and getattr(spec, required) is None:
            raise ConfigError(f"provider kind {kind!r} needs {required!r}")
        return spec


@dataclass
class Loaded:
    provider: Provider
    corpus: Corpus | None = None
    prompts: list[list[int]] | None = None


def load_provider(spec: ProviderSpec) -> Loaded:
    if spec.kind == "builtin":
        bench = builtin(spec.name)
        return Loaded(bench.provider, Corpus(bench.corpus), bench.prompts)
    if spec.kind == "toy":
        corpus = load_corpus(spec.corpus, spec.format, terminator=spec.terminator)
        lm = fit_toy_lm(corpus.docs, order=spec.order, smoothing=spec.smoothing,
                        vocab_size=spec.vocab_size, terminator=corpus.terminator,
                        strings=corpus.strings)
        return Loaded(lm, corpus)
    if spec.kind == "scripted":
        return Loaded(ScriptedProvider.from_file(spec.file))
    return Loaded(HTTPProvider(spec.endpoint, spec.vocab_size, spec.top_n, spec.timeout,
                               spec.terminator))


def read_prompts(path: str | Path, provider: Provider, fmt: str = "ids") -> list[list[int]]:
    """Token-id lines, or whitespace text mapped through the provider's vocabulary."""
    if fmt == "ids":
        return read_token_lines(path)
    if fmt == "text":
        strings = provider.vocab.strings
        if strings is None:
            raise ConfigError(f"{provider.describe()} has no vocabulary map for text prompts")
        return encode_text(Path(path).read_text().splitlines(), strings)
    raise ConfigError(f"unknown prompt format {fmt!r}")


@dataclass
class PromptResult:
    index: int
    record: GenerationRecord | None = None
    skipped: str | None = None
    error: str | None = None
    timings: list[float] | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.record is not None and self.error is None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"index": self.index}
        if self.skipped is not None:
            out.update(status="skipped", reason=self.skipped)
        elif self.error is not None:
            out.update(status="error", error=self.error)
            if self.record is not None:
                out["partial"] = self.record.to_dict()
        else:
            out["status"] = "ok"
            out.update(self.record.to_dict())
        return out


def parse_result(line: str) -> PromptResult:
    d = json.loads(line)
    status = d.get("status", "ok")
    if status == "skipped":
        return PromptResult(d["index"], skipped=d["reason"])
    if status == "error":
        partial = d.get("partial")
        return PromptResult(d["index"], error=d["error"],
                            record=GenerationRecord.from_dict(partial) if partial else None)
    return PromptResult(d["index"], record=GenerationRecord.from_dict(d))


def _run_one(strategy: str, provider: Provider, index: int, prompt: Sequence[int],
             config: DecoderConfig, prompt_length: int, timing: bool) -> PromptResult:
    if len(prompt) < prompt_length:
        return PromptResult(index, skipped=f"prompt has {len(prompt)} tokens, "
                                           f"prompt_length is {prompt_length}")
    timings: list[float] | None = [] if timing else None
    cfg = config.replace(seed=config.seed + index)
    try:
        record = generate(strategy, provider, prompt[:prompt_length], cfg, timings=timings)
    except GenerationError as exc:
        return PromptResult(index, record=exc.record, error=str(exc))
    except MomentumError as exc:
        return PromptResult(index, error=str(exc))
    return PromptResult(index, record=record, timings=timings)


def run_prompts(strategy: str, provider: Provider, prompts: Sequence[Sequence[int]],
                config: DecoderConfig, prompt_length: int = 32, workers: int = 1,
                timing: bool = False) -> list[PromptResult]:
    """One result per prompt, ordered by prompt index.

    Prompt ``i`` decodes with seed ``config.seed + i``, so results do not depend
    on the worker count.  Prompts longer than ``prompt_length`` keep their
    first ``prompt_length`` tokens.
    """
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy {strategy!r}; choose from {', '.join(STRATEGIES)}")
    if prompt_length < 1:
        raise ConfigError("prompt_length must be >= 1")
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    jobs = list(enumerate(prompts))
    if workers == 1:
        return [_run_one(strategy, provider, i, p, config, prompt_length, timing) for i, p in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: _run_one(strategy, provider, job[0], job[1], config,
                                                  prompt_length, timing), jobs))


def dumps_results(results: Iterable[PromptResult]) -> str:
    return "".join(json.dumps(r.to_dict(), separators=(",", ":")) + "\n" for r in results)


def loads_results(text: str) -> list[PromptResult]:
    return [parse_result(line) for line in text.splitlines() if line.strip()]


@dataclass
class StrategySpec:
    label: str
    strategy: str
    overrides: dict[str, Any]

    @classmethod
    def parse(cls, text: str) -> StrategySpec:
        """``name`` or ``name:key=value,key=value``."""
        name, _, rest = text.partition(":")
        if name not in STRATEGIES:
            raise ConfigError(f"unknown strategy {name!r}; choose from {', '.join(STRATEGIES)}")
        overrides: dict[str, Any] = {}
        for item in filter(None, rest.split(",")):
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"bad override {item!r}; expected key=value")
            overrides[key] = value
        return cls(text, name, overrides)

    def config(self, base: DecoderConfig) -> DecoderConfig:
        merged = {k: v for k, v in base.to_dict().items() if k != "resistance"}
        merged.update(self.overrides)
        return DecoderConfig.from_config(merged).replace(resistance=base.resistance)


def seconds_per_token(results: Sequence[PromptResult]) -> float | None:
    """Mean step time after the first ``WARMUP_TOKENS`` tokens of each record.

    Beam search times the whole search, so its per-token figure includes warm-up.
    """
    total, count = 0.0, 0
    for r in results:
        if not r.ok or not r.timings:
            continue
        if r.record.strategy == "beam":
            total += r.timings[0]
            count += len(r.record.generated)
        else:
            kept = r.timings[WARMUP_TOKENS:]
            total += math.fsum(kept)
            count += len(kept)
    return total / count if count else None


@dataclass
class StrategyRun:
    label: str
    results: list[PromptResult]


def _metric_row(label: str, results: Sequence[PromptResult], scorer: Provider) -> dict[str, Any]:
    records = [r.record for r in results if r.ok]
    if not records:
        raise MomentumError(f"{label}: no prompt produced a record")
    report = evaluate(records, scorer)
    described = scorer.describe()
    mismatched = sorted({r.provider for r in records if r.provider and r.provider != described})
    return {
        "strategy": label,
        "diversity": report.diversity,
        "coherence": report.coherence,
        "greedy_ratio": report.greedy_ratio,
        "calls_per_token": report.calls_per_token,
        "prompts": len(records),
        "warning": f"provider mismatch: generated by {'; '.join(mismatched)}" if mismatched else "",
    }


def metric_table(runs: Sequence[StrategyRun], scorer: Provider,
                 timing: bool = False) -> list[dict[str, Any]]:
    """Table rows with calls/token relative to the momentum row.

    ``speedup_vs_md`` is this row's calls/token over momentum's, so 6.0 for
    CS with k=5 reads "six times the model calls of MD".  It is empty when no
    momentum run is present.
    """
    rows = [_metric_row(run.label, run.results, scorer) for run in runs]
    ref = next((i for i, run in enumerate(runs)
                if any(r.ok and r.record.strategy == "momentum" for r in run.results)), None)
    ref_cpt = rows[ref]["calls_per_token"] if ref is not None else None
    ref_spt = seconds_per_token(runs[ref].results) if (timing and ref is not None) else None
    for row, run in zip(rows, runs):
        row["speedup_vs_md"] = "" if ref_cpt is None else row["calls_per_token"] / ref_cpt
        if timing:
            spt = seconds_per_token(run.results)
            row["seconds_per_token"] = "" if spt is None else spt
            row["wall_speedup_vs_md"] = "" if (spt is None or not ref_spt) else spt / ref_spt
    return rows


BENCH_COLUMNS = ["strategy", "diversity", "coherence", "greedy_ratio", "calls_per_token",
                 "speedup_vs_md", "prompts", "warning"]
TIMING_COLUMNS = ["seconds_per_token", "wall_speedup_vs_md"]


def bench(provider: Provider, prompts: Sequence[Sequence[int]], specs: Sequence[StrategySpec],
          base: DecoderConfig, prompt_length: int = 32, workers: int = 1,
          timing: bool = False) -> tuple[list[dict[str, Any]], list[StrategyRun]]:
    runs = [StrategyRun(s.label, run_prompts(s.strategy, provider, prompts, s.config(base),
                                             prompt_length, workers, timing))
            for s in specs]
    return metric_table(runs, provider, timing), runs


def group_records(results: Sequence[PromptResult]) -> list[StrategyRun]:
    """Split pre-generated results into runs by (strategy, config)."""
    groups: dict[str, list[PromptResult]] = {}
    for r in results:
        if r.record is None:
            continue
        key = r.record.strategy
        cfg = r.record.config
        if r.record.strategy in ("top_k", "momentum", "contrastive"):
            key += f":top_k={cfg.get('top_k')}"
        if r.record.strategy == "nucleus":
            key += f":nucleus_p={cfg.get('nucleus_p')}"
        groups.setdefault(key, []).append(r)
    return [StrategyRun(k, v) for k, v in groups.items()]


def parse_grid(text: str) -> tuple[str, list[float]]:
    """``strategy=v1,v2,...``"""
    name, sep, values = text.partition("=")
    if not sep or name not in SWEEP_GRIDS:
        raise ConfigError(f"bad grid {text!r}; expected one of {sorted(SWEEP_GRIDS)}=v1,v2")
    try:
        return name, [float(v) for v in values.split(",") if v]
    except ValueError:
        raise ConfigError(f"bad grid values in {text!r}") from None


def _grid_config(strategy: str, param: str, value: float, fixed: Mapping[str, float],
                 base: DecoderConfig, vocab_size: int) -> DecoderConfig | None:
    if param == "top_k":
        if value != int(value) or not 1 <= value <= vocab_size:
            return None
        value = int(value)
    elif not 0 < value <= 1:
        return None
    return base.replace(**{param: value}, **fixed)


def sweep(provider: Provider, prompts: Sequence[Sequence[int]], base: DecoderConfig,
          grids: Mapping[str, Sequence[float]] | None = None, prompt_length: int = 32,
          workers: int = 1) -> tuple[list[dict[str, Any]], list[str]]:
    """One row per valid (strategy, value); invalid values become warnings."""
    grids = {k: v[1] for k, v in SWEEP_GRIDS.items()} if grids is None else grids
    rows, warnings = [], []
    for strategy, values in grids.items():
        param, _, fixed = SWEEP_GRIDS[strategy]
        for value in values:
            cfg = _grid_config(strategy, param, value, fixed, base, provider.vocab_size)
            if cfg is None:
                msg = f"skipping {strategy} {param}={value}: invalid for V={provider.vocab_size}"
                log.warning(msg)
                warnings.append(msg)
                continue
            results = run_prompts(strategy, provider, prompts, cfg, prompt_length, workers)
            row = _metric_row(strategy, results, provider)
            rows.append({"strategy": strategy, "hyperparameter": param,
                         "value": getattr(cfg, param), "diversity": row["diversity"],
                         "coherence": row["coherence"], "greedy_ratio": row["greedy_ratio"]})
    return rows, warnings


SWEEP_COLUMNS = ["strategy", "hyperparameter", "value", "diversity", "coherence", "greedy_ratio"]


def parse_variant(text: str) -> ResistanceTable:
    """``monotone`` for the default table or ``constant:<value>``."""
    if text == "monotone":
        return ResistanceTable.from_config(None)
    name, _, value = text.partition(":")
    if name == "constant":
        try:
            return constant_table(float(value))
        except ValueError:
            raise ConfigError(f"bad constant resistance {value!r}") from None
    raise ConfigError(f"unknown resistance variant {text!r}")


def ablate(provider: Provider, prompts: Sequence[Sequence[int]], base: DecoderConfig,
           variants: Sequence[str] = ABLATION_VARIANTS, prompt_length: int = 32,
           workers: int = 1) -> tuple[list[dict[str, Any]], list[StrategyRun]]:
    runs = [StrategyRun(v, run_prompts("momentum", provider, prompts,
                                       base.replace(resistance=parse_variant(v)),
                                       prompt_length, workers))
            for v in variants]
    rows = metric_table(runs, provider)
    for row in rows:
        row["variant"] = row.pop("strategy")
    return rows, runs


ABLATION_COLUMNS = ["variant"] + BENCH_COLUMNS[1:]


def stats(corpora: Mapping[str, Sequence[Sequence[int]]],
          n_range: Iterable[int] = range(2, 9)) -> list[dict[str, Any]]:
    ns = list(n_range)
    per = {name: corpus_ngram_stats(docs, ns) for name, docs in corpora.items()}
    return [{"n": n, **{name: per[name][n] for name in corpora}} for n in ns]


def parse_n_range(text: str) -> range:
    """``a-b`` inclusive or a single ``n``."""
    lo, sep, hi = text.partition("-")
    try:
        out = range(int(lo), int(hi if sep else lo) + 1)
    except ValueError:
        raise ConfigError(f"bad n range {text!r}") from None
    if not out or out.start < 1:
        raise ConfigError(f"bad n range {text!r}")
    return out


def to_csv(rows: Sequence[Mapping[str, Any]], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), extrasaction="ignore",
                            lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()
