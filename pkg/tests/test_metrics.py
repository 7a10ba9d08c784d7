from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import brute_diversity, brute_rep_n

from momentum_decoding.corpus import markov_corpus
from momentum_decoding.decoders import GenerationRecord, StepTrace, generate
from momentum_decoding.errors import MomentumError
from momentum_decoding.metrics import (
    calls_per_token,
    coherence,
    corpus_ngram_stats,
    diversity,
    efficiency_summary,
    evaluate,
    greedy_ratio,
    rep_n,
)
from momentum_decoding.providers import ScriptedProvider, UniformProvider, fit_toy_lm
from momentum_decoding.resistance import DecoderConfig


@pytest.mark.parametrize("tokens, n, expect", [
    ([1, 2, 3, 4], 2, 0.0),
    ([1, 2, 1, 2, 1, 2], 2, 60.0),
    ([7, 7, 7, 7], 3, 50.0),
    ([1, 2], 3, 0.0),
    ([], 1, 0.0),
])
def test_rep_n_examples(tokens, n, expect):
    assert rep_n(tokens, n) == pytest.approx(expect)


def test_rep_n_rejects_zero():
    with pytest.raises(ValueError):
        rep_n([1], 0)


def test_diversity_examples():
    assert diversity(list(range(20))) == 1.0
    # rep-2 = 60 (2 of 5 unique), rep-3 = 50 (2 of 4), rep-4 = 100/3 (2 of 3)
    assert rep_n([1, 2, 1, 2, 1, 2], 3) == 50.0
    assert rep_n([1, 2, 1, 2, 1, 2], 4) == pytest.approx(100 / 3)
    assert diversity([1, 2, 1, 2, 1, 2]) == pytest.approx(0.4 * 0.5 * (2 / 3))
    assert diversity([]) == 1.0


@given(st.lists(st.integers(0, 5), max_size=50), st.integers(1, 6))
def test_rep_n_matches_oracle(tokens, n):
    r = rep_n(tokens, n)
    assert r == brute_rep_n(tokens, n)
    assert 0.0 <= r <= 100.0


@given(st.lists(st.integers(0, 5), max_size=50))
def test_diversity_matches_oracle(tokens):
    d = diversity(tokens)
    assert d == brute_diversity(tokens)
    assert 0.0 <= d <= 1.0


def test_coherence_examples():
    assert coherence(UniformProvider(10), [1], [3, 4, 5, 6]) == pytest.approx(-math.log(10), abs=1e-9)
    certain = ScriptedProvider(3, {(0,): {1: 1.0}, (0, 1): {2: 1.0}})
    assert coherence(certain, [0], [1, 2]) == 0.0
    halves = ScriptedProvider(3, {(0,): {1: 0.5, 2: 0.5}, (0, 1): {2: 0.25, 0: 0.75}})
    assert coherence(halves, [0], [1, 2]) == pytest.approx((math.log(0.5) + math.log(0.25)) / 2)
    assert coherence(halves, [0], [1, 2]) == pytest.approx(-1.0397, abs=1e-4)
    with pytest.raises(ValueError):
        coherence(halves, [0], [])


def test_coherence_chunk_linearity():
    lm = fit_toy_lm(markov_corpus(5, 50, vocab_size=30, seed=1), order=2, vocab_size=30)
    prefix, gen = [3, 4], [5, 9, 2, 7, 7, 1, 4]
    whole = coherence(lm, prefix, gen)
    a = coherence(lm, prefix, gen[:3])
    b = coherence(lm, prefix + gen[:3], gen[3:])
    assert whole == pytest.approx((3 * a + 4 * b) / 7, abs=1e-12)


def test_greedy_ratio_extremes():
    lm = fit_toy_lm(markov_corpus(5, 50, vocab_size=30, seed=2), order=2, vocab_size=30)
    rec = generate("greedy", lm, [3, 4], DecoderConfig(max_steps=40))
    assert greedy_ratio(lm, rec.prompt, rec.generated) == 100.0

    ctx, second = [3, 4], []
    for _ in range(20):
        p = lm.next_distribution(ctx).probs
        tok = sorted(range(p.size), key=lambda i: (-p[i], i))[1]
        second.append(tok)
        ctx.append(tok)
    assert greedy_ratio(lm, [3, 4], second) == 0.0


def override_once():
    # four steps from [1, 2]; at the third step the top token 1 is already present
    def dist(ctx):
        if len(ctx) == 4:
            return {1: 0.55, 9: 0.45}
        return {len(ctx) + 3: 0.9, 0: 0.1}
    return ScriptedProvider(10, fallback=dist)


def test_greedy_ratio_one_override_in_four():
    sp = override_once()
    rec = generate("momentum", sp, [1, 2], DecoderConfig(max_steps=4))
    assert rec.generated == [5, 6, 9, 8]
    assert greedy_ratio(sp, rec.prompt, rec.generated) == 75.0


def test_corpus_stats():
    assert corpus_ngram_stats([list(range(30))]) == {n: 0.0 for n in range(2, 9)}
    assert corpus_ngram_stats([[1, 2, 1, 2, 1, 2]], [2])[2] == pytest.approx(60.0)
    with pytest.raises(MomentumError):
        corpus_ngram_stats([])
    with pytest.raises(MomentumError):
        corpus_ngram_stats([[]])


def test_corpus_stats_token_weighted_and_monotone():
    docs = markov_corpus(6, 80, vocab_size=20, branching=2, seed=3)
    docs.append([1, 2, 3, 1, 2, 3, 1, 2, 3])
    stats = corpus_ngram_stats(docs)
    total = sum(map(len, docs))
    for n, value in stats.items():
        assert value == pytest.approx(sum(len(d) * brute_rep_n(d, n) for d in docs) / total)
    values = [stats[n] for n in range(2, 9)]
    assert values == sorted(values, reverse=True)


def fake(strategy, n_tokens, calls_each):
    traces = [StepTrace(i + 1, "greedy", 1, calls_each) for i in range(n_tokens)]
    return GenerationRecord([0], [1] * n_tokens, traces, n_tokens * calls_each, "max_steps",
                            strategy=strategy)


def test_efficiency_ratios():
    md = [fake("momentum", 10, 1), fake("momentum", 6, 1)]
    greedy = [fake("greedy", 8, 1)]
    cs = [fake("contrastive", 10, 6)]
    beam = [fake("beam", 5, 4)]
    assert efficiency_summary(md, greedy).call_ratio == 1.0
    assert efficiency_summary(cs, md).call_ratio == 6.0
    assert efficiency_summary(beam, greedy).call_ratio == 4.0
    assert efficiency_summary(md).call_ratio is None
    with pytest.raises(MomentumError):
        calls_per_token([])
    with pytest.raises(MomentumError):
        calls_per_token([fake("greedy", 0, 1)])


def test_evaluate_report():
    lm = fit_toy_lm(markov_corpus(5, 50, vocab_size=30, seed=4), order=2, vocab_size=30)
    recs = [generate("greedy", lm, [i, i + 1], DecoderConfig(max_steps=30)) for i in range(1, 4)]
    rep = evaluate(recs, lm)
    assert rep.greedy_ratio == 100.0 and rep.calls_per_token == 1.0
    assert rep.tokens_emitted == sum(len(r.generated) for r in recs)
    reps = [np.mean([rep_n(r.generated, n) for r in recs]) for n in (2, 3, 4)]
    assert rep.rep_n == {n: pytest.approx(v) for n, v in zip((2, 3, 4), reps)}
    assert rep.diversity == pytest.approx(np.prod([1 - v / 100 for v in reps]))
    assert rep.log_base == "e" and not rep.notes
    other = evaluate(recs, lm, measure=UniformProvider(30))
    assert other.coherence == pytest.approx(-math.log(30))
    assert other.notes
