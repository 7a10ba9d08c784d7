"""Decoding strategies and the generation loop.

Every step function returns ``(token, StepTrace)`` and issues a known number
of provider calls, so call counts in a record are exact.
"""

from __future__ import annotations

import math
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import CapabilityError, ConfigError, GenerationError
from .providers.base import ProbDist, Provider, nucleus_set, top_k_candidates
from .resistance import DecoderConfig, ResistanceTable, resistance
from .sequence_index import OccurrenceIndex

NOVEL_GREEDY = "novel-greedy"
PENALIZED = "penalized-argmax"
TERMINATOR = "terminator"
GREEDY = "greedy"
SAMPLED = "sampled"
BEAM = "beam"
CONTRASTIVE = "cs"

STRATEGIES = ("greedy", "momentum", "beam", "top_k", "nucleus", "contrastive")


@dataclass(slots=True)
class CandidateScore:
    token: int
    probability: float
    score: float
    depth: int | None = None
    resistance: float | None = None
    penalty: float | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"token": self.token, "probability": self.probability,
                               "score": self.score}
        for name in ("depth", "resistance", "penalty"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out


@dataclass
class StepTrace:
    step: int
    branch: str
    token: int
    model_calls: int
    candidates: list[CandidateScore] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"step": self.step, "branch": self.branch,
                               "token": self.token, "model_calls": self.model_calls}
        if self.candidates:
            out["candidates"] = [c.to_dict() for c in self.candidates]
        return out

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> StepTrace:
        return cls(d["step"], d["branch"], d["token"], d["model_calls"],
                   [CandidateScore(**c) for c in d.get("candidates", [])])


@dataclass
class GenerationRecord:
    prompt: list[int]
    generated: list[int]
    traces: list[StepTrace]
    total_model_calls: int
    terminated_by: str
    strategy: str = ""
    seed: int | None = None
    config: dict[str, Any] = field(default_factory=dict)
    provider: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "strategy": self.strategy,
            "provider": self.provider,
            "prompt": self.prompt,
            "generated": self.generated,
            "traces": [t.to_dict() for t in self.traces],
            "total_model_calls": self.total_model_calls,
            "terminated_by": self.terminated_by,
            "seed": self.seed,
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> GenerationRecord:
        return cls(
            prompt=list(d["prompt"]),
            generated=list(d["generated"]),
            traces=[StepTrace.from_dict(t) for t in d["traces"]],
            total_model_calls=d["total_model_calls"],
            terminated_by=d["terminated_by"],
            strategy=d.get("strategy", ""),
            seed=d.get("seed"),
            config=d.get("config", {}),
            provider=d.get("provider", ""),
        )

    @property
    def calls_per_token(self) -> float:
        return self.total_model_calls / len(self.generated)


def _pick(scored: Sequence[CandidateScore]) -> CandidateScore:
    # best score, then higher probability, then lower id
    return min(scored, key=lambda c: (-c.score, -c.probability, c.token))


def momentum_scores(candidates, index: OccurrenceIndex, alpha: float,
                    table: ResistanceTable) -> list[CandidateScore]:
    out = []
    depths = index.depths(candidates.tokens)
    for (token, prob), depth in zip(candidates, depths):
        r = resistance(table, depth)
        out.append(CandidateScore(token, prob, prob - alpha * r, depth=depth, resistance=r))
    return out


def step_momentum(provider: Provider, context: Sequence[int], index: OccurrenceIndex,
                  config: DecoderConfig, step: int = 1) -> tuple[int, StepTrace]:
    dist = provider.next_distribution(context)
    top = dist.argmax()
    if top == provider.terminator:
        return top, StepTrace(step, TERMINATOR, top, 1)
    if not index.contains(top):
        return top, StepTrace(step, NOVEL_GREEDY, top, 1)
    scored = momentum_scores(top_k_candidates(dist, config.top_k), index,
                             config.alpha, config.resistance)
    winner = _pick(scored)
    return winner.token, StepTrace(step, PENALIZED, winner.token, 1, scored)


def step_greedy(provider: Provider, context: Sequence[int], step: int = 1) -> tuple[int, StepTrace]:
    token = provider.next_distribution(context).argmax()
    return token, StepTrace(step, GREEDY, token, 1)


def _draw(candidates, rng: np.random.Generator) -> int:
    probs = np.asarray(candidates.probs)
    cum = np.cumsum(probs)
    u = rng.random() * cum[-1]
    i = int(np.searchsorted(cum, u, side="right"))
    return candidates.tokens[min(i, len(candidates) - 1)]


def step_sample(provider: Provider, context: Sequence[int], config: DecoderConfig,
                mode: str, rng: np.random.Generator, step: int = 1) -> tuple[int, StepTrace]:
    dist = provider.next_distribution(context)
    if mode == "top_k":
        cands = top_k_candidates(dist, config.top_k)
    elif mode == "nucleus":
        if not dist.complete and dist.known_mass < config.nucleus_p:
            raise CapabilityError("nucleus sampling needs more of the distribution than was returned")
        cands = nucleus_set(dist, config.nucleus_p)
    else:
        raise ConfigError(f"unknown sampling mode {mode!r}")
    token = _draw(cands, rng)
    return token, StepTrace(step, SAMPLED, token, 1)


class ContextStates:
    """Cached per-position representations of a growing context.

    Entry ``j`` is the representation of ``context[:j+1]``; these stand for the
    hidden states a real model would have kept from earlier steps, so they are
    not charged as model calls.
    """

    def __init__(self, provider: Provider) -> None:
        self.provider = provider
        self._rows: list[np.ndarray] = []

    def matrix(self, context: Sequence[int]) -> np.ndarray:
        for j in range(len(self._rows), len(context)):
            self._rows.append(np.asarray(self.provider.representation(context[: j + 1]), float))
        return np.vstack(self._rows[: len(context)])


def _max_cosine(h: np.ndarray, states: np.ndarray) -> float:
    norms = np.linalg.norm(states, axis=1) * np.linalg.norm(h)
    dots = states @ h
    sims = np.divide(dots, norms, out=np.zeros_like(dots), where=norms > 0)
    return float(sims.max())


def step_contrastive_search(provider: Provider, context: Sequence[int], config: DecoderConfig,
                            states: ContextStates | None = None,
                            step: int = 1) -> tuple[int, StepTrace]:
    if not provider.supports_representation:
        raise CapabilityError(f"{provider.describe()} has no representations; "
                              "contrastive search cannot run")
    states = states or ContextStates(provider)
    dist = provider.next_distribution(context)
    cands = top_k_candidates(dist, config.top_k)
    history = states.matrix(context)
    a = config.cs_alpha
    scored = []
    extended = list(context)
    for token, prob in cands:
        h = np.asarray(provider.representation(extended + [token]), float)
        penalty = _max_cosine(h, history)
        scored.append(CandidateScore(token, prob, (1 - a) * prob - a * penalty, penalty=penalty))
    winner = _pick(scored)
    return winner.token, StepTrace(step, CONTRASTIVE, winner.token, 1 + len(cands), scored)


@dataclass(frozen=True)
class Beam:
    tokens: tuple[int, ...]
    logprob: float
    finished: bool = False

    @property
    def normalized(self) -> float:
        return self.logprob / len(self.tokens) if self.tokens else self.logprob


def initial_beams(config: DecoderConfig) -> list[Beam]:
    # width copies, all but one dead, so every step costs beam_width calls
    return [Beam((), 0.0)] + [Beam((), -math.inf)] * (config.beam_width - 1)


def step_beam(provider: Provider, prompt: Sequence[int], beams: list[Beam],
              config: DecoderConfig) -> tuple[list[Beam], list[Beam], int]:
    """Expand live beams one token.  Returns (live, newly finished, calls)."""
    width = config.beam_width
    pool: list[tuple[float, tuple[int, ...]]] = []
    calls = 0
    for beam in beams:
        dist = provider.next_distribution(list(prompt) + list(beam.tokens))
        calls += 1
        if beam.logprob == -math.inf:
            continue
        n = min(2 * width, np.count_nonzero(dist.probs) if not dist.complete else dist.vocab_size)
        for token, prob in top_k_candidates(dist, n):
            if prob > 0:
                pool.append((beam.logprob + math.log(prob), beam.tokens + (token,)))
    pool.sort(key=lambda item: (-item[0], item[1]))
    live: list[Beam] = []
    finished: list[Beam] = []
    for rank, (score, tokens) in enumerate(pool):
        if tokens[-1] == provider.terminator:
            if rank < width:
                finished.append(Beam(tokens, score, True))
            continue
        live.append(Beam(tokens, score))
        if len(live) == width:
            break
    return live, finished, calls


def finalize_beam(prompt: Sequence[int], live: list[Beam], finished: list[Beam],
                  step_calls: list[int], config: DecoderConfig) -> GenerationRecord:
    pool = finished or live
    best = min(pool, key=lambda b: (-b.normalized, b.tokens))
    n = len(best.tokens)
    calls = step_calls[:n]
    calls[-1] += sum(step_calls[n:])
    traces = [StepTrace(i + 1, BEAM, tok, c) for i, (tok, c) in enumerate(zip(best.tokens, calls))]
    return GenerationRecord(
        prompt=list(prompt), generated=list(best.tokens), traces=traces,
        total_model_calls=sum(step_calls),
        terminated_by=TERMINATOR if best.finished else "max_steps",
        strategy="beam", seed=config.seed, config=config.to_dict(),
    )


def _timed(step: Stepper, timings: list[float]) -> Stepper:
    def run(ctx, idx, t):
        start = time.perf_counter()
        out = step(ctx, idx, t)
        timings.append(time.perf_counter() - start)
        return out
    return run


def beam_search(provider: Provider, prompt: Sequence[int], config: DecoderConfig) -> GenerationRecord:
    beams = initial_beams(config)
    finished: list[Beam] = []
    step_calls: list[int] = []
    for _ in range(config.max_steps):
        beams, done, calls = step_beam(provider, prompt, beams, config)
        step_calls.append(calls)
        finished.extend(done)
        if len(finished) >= config.beam_width or not beams:
            break
    return finalize_beam(prompt, beams, finished, step_calls, config)


Stepper = Callable[[list[int], OccurrenceIndex, int], tuple[int, StepTrace]]


def _stepper(strategy: str, provider: Provider, config: DecoderConfig,
             rng: np.random.Generator) -> Stepper:
    if strategy == "greedy":
        return lambda ctx, idx, t: step_greedy(provider, ctx, step=t)
    if strategy == "momentum":
        return lambda ctx, idx, t: step_momentum(provider, ctx, idx, config, step=t)
    if strategy in ("top_k", "nucleus"):
        return lambda ctx, idx, t: step_sample(provider, ctx, config, strategy, rng, step=t)
    if strategy == "contrastive":
        if not provider.supports_representation:
            raise CapabilityError(f"{provider.describe()} has no representations; "
                                  "contrastive search cannot run")
        states = ContextStates(provider)
        return lambda ctx, idx, t: step_contrastive_search(provider, ctx, config, states, step=t)
    raise ConfigError(f"unknown strategy {strategy!r}; choose from {', '.join(STRATEGIES)}")


def generate(strategy: str, provider: Provider, prompt: Sequence[int],
             config: DecoderConfig | None = None,
             timings: list[float] | None = None) -> GenerationRecord:
    """Run ``strategy`` from ``prompt`` until the terminator or ``max_steps``.

    If ``timings`` is given, the wall-clock duration of each step is appended
    to it (beam search records one entry for the whole search).
    """
    config = config or DecoderConfig()
    prompt = [int(t) for t in prompt]
    if not prompt:
        raise ConfigError("prompt must be nonempty")
    if strategy == "beam":
        start = time.perf_counter()
        try:
            record = beam_search(provider, prompt, config)
        except Exception as exc:
            raise GenerationError(f"beam search failed: {exc}") from exc
        if timings is not None:
            timings.append(time.perf_counter() - start)
        record.provider = provider.describe()
        return record

    rng = np.random.default_rng(config.seed)
    step = _stepper(strategy, provider, config, rng)
    if timings is not None:
        step = _timed(step, timings)
    context = list(prompt)
    index = OccurrenceIndex(prompt)
    record = GenerationRecord(prompt, [], [], 0, "max_steps", strategy=strategy,
                              seed=config.seed, config=config.to_dict(),
                              provider=provider.describe())
    terminator = provider.terminator
    for t in range(1, config.max_steps + 1):
        try:
            token, trace = step(context, index, t)
        except Exception as exc:
            raise GenerationError(f"step {t} of {strategy} failed: {exc}", record) from exc
        context.append(token)
        index.append(token)
        record.generated.append(token)
        record.traces.append(trace)
        record.total_model_calls += trace.model_calls
        if token == terminator:
            record.terminated_by = TERMINATOR
            break
    return record


def replay_momentum_trace(trace: StepTrace, alpha: float, table: ResistanceTable) -> int | None:
    """Recompute a penalized step's scores and winner; ``None`` for other branches.

    Raises ``AssertionError`` if any recorded score or the winner disagrees.
    """
    if trace.branch != PENALIZED:
        return None
    for c in trace.candidates:
        assert c.depth is not None
        r = resistance(table, c.depth)
        assert r == c.resistance, (c, r)
        assert c.probability - alpha * r == c.score, (c, alpha)
    winner = _pick(trace.candidates).token
    assert winner == trace.token, (winner, trace)
    return winner


def replay_record(record: GenerationRecord) -> int:
    """Replay every penalized step of a momentum record; returns how many were checked."""
    cfg = record.config
    table = ResistanceTable.from_config(cfg.get("resistance"))
    alpha = cfg.get("alpha", 0.2)
    return sum(replay_momentum_trace(t, alpha, table) is not None for t in record.traces)
