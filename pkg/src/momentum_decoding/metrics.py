"""Automatic evaluation over token ids."""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass, field

from .decoders import GenerationRecord
from .errors import MomentumError
from .providers.base import Provider


def _ngrams(tokens: Sequence[int], n: int) -> list[tuple[int, ...]]:
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def rep_n(tokens: Sequence[int], n: int) -> float:
    """Percent of duplicated n-grams; 0 when there are no n-grams at all."""
    if n < 1:
        raise ValueError("n must be >= 1")
    grams = _ngrams(tokens, n)
    if not grams:
        return 0.0
    return 100.0 * (1.0 - len(set(grams)) / len(grams))


def diversity(tokens: Sequence[int]) -> float:
    out = 1.0
    for n in (2, 3, 4):
        out *= 1.0 - rep_n(tokens, n) / 100.0
    return out


def coherence(provider: Provider, prefix: Sequence[int], generated: Sequence[int]) -> float:
    """Mean natural-log likelihood of ``generated`` given ``prefix``."""
    if not generated:
        raise ValueError("coherence needs a nonempty generation")
    context = list(prefix)
    total = 0.0
    for token in generated:
        total += provider.next_distribution(context).logprob(token)
        context.append(token)
    return total / len(generated)


def greedy_ratio(provider: Provider, prompt: Sequence[int], generated: Sequence[int]) -> float:
    """Percent of emitted tokens that equal the provider's argmax at that step."""
    if not generated:
        raise ValueError("greedy ratio needs a nonempty generation")
    context = list(prompt)
    hits = 0
    for token in generated:
        hits += provider.next_distribution(context).argmax() == token
        context.append(token)
    return 100.0 * hits / len(generated)


def corpus_ngram_stats(corpus: Iterable[Sequence[int]],
                       n_range: Iterable[int] = range(2, 9)) -> dict[int, float]:
    """Per-n repetition percentage, weighting each document by its length."""
    docs = [list(d) for d in corpus]
    total = sum(len(d) for d in docs)
    if not docs or total == 0:
        raise MomentumError("corpus is empty")
    return {n: math.fsum(len(d) * rep_n(d, n) for d in docs) / total for n in n_range}


@dataclass
class EfficiencySummary:
    calls_per_token: float
    call_ratio: float | None = None
    seconds_per_token: float | None = None


def calls_per_token(records: Sequence[GenerationRecord]) -> float:
    if not records:
        raise MomentumError("no records")
    emitted = sum(len(r.generated) for r in records)
    if emitted == 0:
        raise MomentumError("records emitted zero tokens")
    return sum(r.total_model_calls for r in records) / emitted


def efficiency_summary(records: Sequence[GenerationRecord],
                       reference: Sequence[GenerationRecord] | None = None) -> EfficiencySummary:
    """Model calls per token, and its ratio to a reference strategy's.

    The ratio reads "this strategy costs N times the reference"; with momentum
    decoding as reference it is the call-count analogue of MD-Speedup.
    """
    cpt = calls_per_token(records)
    ratio = None if reference is None else cpt / calls_per_token(reference)
    return EfficiencySummary(cpt, ratio)


@dataclass
class MetricReport:
    diversity: float
    rep_n: dict[int, float]
    coherence: float
    greedy_ratio: float
    calls_per_token: float
    tokens_emitted: int
    log_base: str = "e"
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(records: Sequence[GenerationRecord], provider: Provider,
             measure: Provider | None = None) -> MetricReport:
    """Average per-record metrics; coherence uses ``measure`` when given.

    rep-n is averaged over records first and diversity is the product of the
    averaged rep-n values.
    """
    if not records:
        raise MomentumError("no records to evaluate")
    scored = [r for r in records if r.generated]
    if not scored:
        raise MomentumError("records emitted zero tokens")
    measure = measure or provider
    k = len(scored)
    reps = {n: sum(rep_n(r.generated, n) for r in scored) / k for n in (2, 3, 4)}
    notes = []
    if measure is not provider:
        notes.append(f"coherence measured by {measure.describe()}")
    div = 1.0
    for n in (2, 3, 4):
        div *= 1.0 - reps[n] / 100.0
    return MetricReport(
        diversity=div,
        rep_n=reps,
        coherence=sum(coherence(measure, r.prompt, r.generated) for r in scored) / k,
        greedy_ratio=sum(greedy_ratio(provider, r.prompt, r.generated) for r in scored) / k,
        calls_per_token=calls_per_token(scored),
        tokens_emitted=sum(len(r.generated) for r in scored),
        notes=notes,
    )
