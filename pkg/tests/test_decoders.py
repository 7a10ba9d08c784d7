from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from momentum_decoding.decoders import (
    NOVEL_GREEDY,
    PENALIZED,
    CandidateScore,
    ContextStates,
    GenerationRecord,
    StepTrace,
    generate,
    replay_momentum_trace,
    replay_record,
    step_contrastive_search,
    step_greedy,
    step_momentum,
    step_sample,
)
from momentum_decoding.errors import CapabilityError, ConfigError, GenerationError
from momentum_decoding.providers import ProbDist, ScriptedProvider, UniformProvider, fit_toy_lm
from momentum_decoding.resistance import DEFAULT_TABLE, DecoderConfig, constant_table
from momentum_decoding.sequence_index import OccurrenceIndex


class Fixed(ScriptedProvider):
    """Same distribution for every context."""

    def __init__(self, probs, **kw):
        super().__init__(len(probs), fallback=list(probs), **kw)


def hand_dist():
    return {3: 0.5, 4: 0.3, 5: 0.1, 6: 0.06, 7: 0.04}


def test_momentum_hand_example():
    sp = ScriptedProvider(10, fallback=hand_dist())
    ctx = [1, 2, 3, 2]
    token, trace = step_momentum(sp, ctx, OccurrenceIndex(ctx), DecoderConfig())
    assert token == 4 and trace.branch == PENALIZED and trace.model_calls == 1
    by_token = {c.token: c for c in trace.candidates}
    assert by_token[3].depth == 2 and by_token[3].resistance == 3.0
    assert by_token[3].score == pytest.approx(-0.1)
    for t in (4, 5, 6, 7):
        assert by_token[t].depth == 0 and by_token[t].score == hand_dist()[t]


def test_momentum_alpha_zero_is_argmax():
    sp = ScriptedProvider(10, fallback=hand_dist())
    ctx = [1, 2, 3, 2]
    token, _ = step_momentum(sp, ctx, OccurrenceIndex(ctx), DecoderConfig(alpha=0.0))
    assert token == 3


def test_momentum_novel_top_is_greedy():
    sp = ScriptedProvider(10, fallback={9: 0.7, 1: 0.3})
    token, trace = step_momentum(sp, [1, 2], OccurrenceIndex([1, 2]), DecoderConfig())
    assert token == 9 and trace.branch == NOVEL_GREEDY and not trace.candidates
    assert step_greedy(sp, [1, 2])[0] == 9


def test_all_candidates_seen_takes_least_negative():
    sp = ScriptedProvider(4, fallback={1: 0.6, 2: 0.4})
    ctx = [1, 2, 1, 2, 1, 2, 1]
    token, trace = step_momentum(sp, ctx, OccurrenceIndex(ctx), DecoderConfig(top_k=2))
    scores = {c.token: c.score for c in trace.candidates}
    assert all(s <= 0.6 for s in scores.values())
    assert token == max(scores, key=lambda t: (scores[t], -t))


def test_terminator_bypasses_penalty():
    sp = ScriptedProvider(5, fallback={0: 0.9, 1: 0.1}, terminator=0)
    rec = generate("momentum", sp, [0, 1, 0], DecoderConfig())
    assert rec.generated == [0] and rec.terminated_by == "terminator"


def test_greedy_examples():
    assert step_greedy(Fixed([0.6, 0.4]), [1])[0] == 0
    assert step_greedy(Fixed([0.4, 0.6]), [1])[0] == 1
    assert step_greedy(Fixed([0.5, 0.5]), [1])[0] == 0


def test_top_k_one_is_greedy():
    lm = fit_toy_lm([[1, 2, 3, 1, 3, 2, 4, 1, 2]], order=2, vocab_size=6)
    for seed in range(5):
        cfg = DecoderConfig(top_k=1, max_steps=30, seed=seed)
        assert generate("top_k", lm, [1], cfg).generated == generate("greedy", lm, [1], cfg).generated


def test_point_mass_always_drawn():
    rng = np.random.default_rng(0)
    for mode in ("top_k", "nucleus"):
        for _ in range(50):
            assert step_sample(Fixed([0.0, 1.0, 0.0]), [0], DecoderConfig(top_k=3), mode, rng)[0] == 1


def test_nucleus_full_distribution_frequencies():
    sp = Fixed([0.7, 0.3])
    rng = np.random.default_rng(12345)
    cfg = DecoderConfig(nucleus_p=1.0)
    draws = [step_sample(sp, [0], cfg, "nucleus", rng)[0] for _ in range(100_000)]
    freq = np.bincount(draws, minlength=2) / len(draws)
    assert abs(freq[0] - 0.7) <= 0.01 and abs(freq[1] - 0.3) <= 0.01


def test_sampling_is_seeded():
    lm = fit_toy_lm([[1, 2, 3, 1, 3, 2, 4, 1, 2, 5, 1, 4]], order=2, vocab_size=6)
    a = generate("nucleus", lm, [1], DecoderConfig(seed=3, max_steps=40))
    b = generate("nucleus", lm, [1], DecoderConfig(seed=3, max_steps=40))
    c = generate("nucleus", lm, [1], DecoderConfig(seed=4, max_steps=40))
    assert a.generated == b.generated and a.generated != c.generated


def cs_provider():
    # candidates 1 and 2 both at 0.5; history state is e0
    reps = {(0,): [1.0, 0.0], (0, 1): [0.9, math.sqrt(1 - 0.81)], (0, 2): [0.1, math.sqrt(0.99)]}
    return ScriptedProvider(3, fallback={1: 0.5, 2: 0.5}, representations=reps)


def test_contrastive_hand_example():
    sp = cs_provider()
    token, trace = step_contrastive_search(sp, [0], DecoderConfig(top_k=2, cs_alpha=0.6))
    assert token == 2 and trace.model_calls == 3
    scores = {c.token: c.score for c in trace.candidates}
    assert scores[1] == pytest.approx(0.2 - 0.54)
    assert scores[2] == pytest.approx(0.2 - 0.06)


def test_contrastive_alpha_zero_and_k_one():
    sp = cs_provider()
    assert step_contrastive_search(sp, [0], DecoderConfig(top_k=2, cs_alpha=0.0))[0] == 1
    assert step_contrastive_search(sp, [0], DecoderConfig(top_k=1, cs_alpha=0.9))[0] == 1


def test_contrastive_needs_representations():
    with pytest.raises(CapabilityError):
        generate("contrastive", UniformProvider(4), [1], DecoderConfig())


def test_contrastive_alpha_zero_equals_greedy_on_toy_lm():
    lm = fit_toy_lm([[1, 2, 3, 4, 2, 3, 1, 4, 5, 2, 1, 3]] * 3, order=2, vocab_size=7)
    cfg = DecoderConfig(cs_alpha=0.0, max_steps=40)
    assert generate("contrastive", lm, [1, 2], cfg).generated == \
        generate("greedy", lm, [1, 2], cfg).generated


def test_context_states_cached():
    lm = fit_toy_lm([[1, 2, 3, 4]], order=2, vocab_size=5)
    states = ContextStates(lm)
    m = states.matrix([1, 2, 3])
    assert m.shape[0] == 3
    assert np.allclose(m[1], lm.representation([1, 2]))


def test_beam_width_one_is_greedy():
    lm = fit_toy_lm([[1, 2, 3, 1, 3, 2, 4, 1, 2, 5, 1, 4]], order=2, vocab_size=6)
    cfg = DecoderConfig(beam_width=1, max_steps=30)
    assert generate("beam", lm, [1], cfg).generated == generate("greedy", lm, [1], cfg).generated


def two_step():
    # greedy takes 1 (0.6) then 0.5; path 2 (0.4) then 1.0 wins in total
    table = {(0,): {1: 0.6, 2: 0.4}, (0, 1): {3: 0.5, 4: 0.5}, (0, 2): {3: 1.0}}
    return ScriptedProvider(5, table, fallback={3: 1.0}, terminator=3)


def test_beam_beats_greedy_two_step():
    sp = two_step()
    greedy = generate("greedy", sp, [0], DecoderConfig())
    beam = generate("beam", sp, [0], DecoderConfig(beam_width=2))
    assert greedy.generated == [1, 3] and beam.generated == [2, 3]

    def total(path):
        ctx, lp = [0], 0.0
        for t in path:
            lp += sp.next_distribution(ctx).logprob(t)
            ctx.append(t)
        return lp

    best = max(itertools.product(range(5), repeat=2), key=total)
    assert list(best) == beam.generated


def test_call_accounting():
    lm = fit_toy_lm([[1, 2, 3, 1, 3, 2, 4, 1, 2, 5, 1, 4]], order=2, vocab_size=6)
    for strategy, expect in (("greedy", 1), ("momentum", 1), ("top_k", 1), ("nucleus", 1),
                             ("beam", 4), ("contrastive", 6)):
        rec = generate(strategy, lm, [1, 2], DecoderConfig(max_steps=20))
        assert rec.total_model_calls == sum(t.model_calls for t in rec.traces)
        assert rec.calls_per_token == expect, strategy


def test_max_steps_bounds():
    with pytest.raises(ConfigError):
        DecoderConfig(max_steps=0)
    rec = generate("momentum", UniformProvider(5), [1], DecoderConfig(max_steps=1))
    assert len(rec.generated) == 1 and rec.terminated_by == "max_steps"


def test_empty_prompt_rejected():
    with pytest.raises(ConfigError):
        generate("greedy", UniformProvider(3), [], DecoderConfig())


def test_unknown_strategy():
    with pytest.raises(ConfigError):
        generate("typical", UniformProvider(3), [1], DecoderConfig())


def test_always_novel_top_equals_greedy():
    V = 300
    sp = ScriptedProvider(V, fallback=lambda ctx: {len(ctx) % V: 0.9, 0: 0.1} if len(ctx) % V
                          else {1: 1.0})
    md = generate("momentum", sp, [0], DecoderConfig())
    gr = generate("greedy", sp, [0], DecoderConfig())
    assert md.generated == gr.generated and len(md.generated) == 256
    assert all(t.branch == NOVEL_GREEDY for t in md.traces)


def test_step_error_attaches_partial_record():
    sp = ScriptedProvider(4, {(1,): {2: 1.0}, (2,): {3: 1.0}})
    with pytest.raises(GenerationError) as info:
        generate("greedy", sp, [1], DecoderConfig(max_steps=5))
    assert info.value.record.generated == [2, 3]


def test_timings_hook():
    timings = []
    generate("momentum", UniformProvider(6), [1], DecoderConfig(max_steps=7), timings=timings)
    assert len(timings) == 7 and all(t >= 0 for t in timings)


def random_scripted(seed, V=8):
    rng = np.random.default_rng(seed)
    cache = {}

    def dist(ctx):
        if ctx not in cache:
            cache[ctx] = rng.dirichlet(np.full(V, 0.3))
        return cache[ctx]
    return ScriptedProvider(V, fallback=dist)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.lists(st.integers(0, 7), min_size=1, max_size=6))
def test_greedy_collapse(seed, prompt):
    sp = random_scripted(seed)
    greedy = generate("greedy", sp, prompt, DecoderConfig(max_steps=40)).generated
    for cfg in (DecoderConfig(alpha=0.0, max_steps=40),
                DecoderConfig(resistance=constant_table(0), max_steps=40)):
        assert generate("momentum", sp, prompt, cfg).generated == greedy


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.lists(st.integers(0, 7), min_size=1, max_size=6))
def test_novelty_identity_and_replay(seed, prompt):
    sp = random_scripted(seed)
    rec = generate("momentum", sp, prompt, DecoderConfig(max_steps=40))
    context = list(prompt)
    for trace, token in zip(rec.traces, rec.generated):
        top = sp.next_distribution(context).argmax()
        if top not in context:
            assert trace.branch == NOVEL_GREEDY and token == top
        context.append(token)
    replay_record(rec)


def test_blocking_never_picks_deep_candidate_over_novel():
    rng = np.random.default_rng(0)
    checked = 0
    for _ in range(300):
        ctx = list(rng.integers(0, 6, size=20))
        probs = rng.dirichlet(np.ones(10))
        sp = ScriptedProvider(10, fallback=probs)
        _, trace = step_momentum(sp, ctx, OccurrenceIndex(ctx), DecoderConfig())
        if trace.branch != PENALIZED:
            continue
        depths = {c.token: c.depth for c in trace.candidates}
        if any(d == 0 for d in depths.values()):
            checked += 1
            assert depths[trace.token] < 4
    assert checked > 50


def test_replay_detects_tampering():
    sp = ScriptedProvider(10, fallback=hand_dist())
    ctx = [1, 2, 3, 2]
    _, trace = step_momentum(sp, ctx, OccurrenceIndex(ctx), DecoderConfig())
    assert replay_momentum_trace(trace, 0.2, DEFAULT_TABLE) == 4
    trace.candidates[0].score += 1e-9
    with pytest.raises(AssertionError):
        replay_momentum_trace(trace, 0.2, DEFAULT_TABLE)


def test_record_round_trip():
    lm = fit_toy_lm([[1, 2, 3, 1, 3, 2, 4, 1, 2, 5, 1, 4]], order=2, vocab_size=6)
    for strategy in ("momentum", "contrastive", "beam"):
        rec = generate(strategy, lm, [1, 2], DecoderConfig(max_steps=15))
        assert GenerationRecord.from_dict(rec.to_dict()) == rec


def test_candidate_score_round_trip():
    c = CandidateScore(3, 0.5, -0.1, depth=2, resistance=3.0)
    assert StepTrace.from_dict(StepTrace(1, PENALIZED, 3, 1, [c]).to_dict()).candidates == [c]


def test_determinism_across_runs():
    lm = fit_toy_lm([[1, 2, 3, 1, 3, 2, 4, 1, 2, 5, 1, 4]], order=2, vocab_size=6)
    for strategy in ("greedy", "beam", "momentum", "contrastive", "top_k", "nucleus"):
        cfg = DecoderConfig(max_steps=25, seed=11)
        assert generate(strategy, lm, [3], cfg) == generate(strategy, lm, [3], cfg)


def test_slice_distribution_probs_used_as_given():
    sliced = ProbDist([0.5, 0.3, 0.0, 0.0], complete=False)
    sp = ScriptedProvider(4, fallback=sliced)
    # depth(0) = 2 gives 0.5 - 0.6 < 0.3
    token, trace = step_momentum(sp, [0, 0], OccurrenceIndex([0, 0]), DecoderConfig(top_k=2))
    assert token == 1 and trace.branch == PENALIZED


def test_top_k_larger_than_vocabulary_fails():
    with pytest.raises(GenerationError) as info:
        generate("momentum", UniformProvider(4), [1], DecoderConfig(max_steps=3))
    assert isinstance(info.value.__cause__, ConfigError)
