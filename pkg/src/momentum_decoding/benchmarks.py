"""Built-in desk-scale setups: a fitted toy LM plus fixed prompts.

``loop`` trains on one long sentence repeated 200 times, so greedy decoding
falls into the sentence's own cycle.  ``markov`` trains on documents from a
sparse random chain and holds out the last tenth for prompts.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import markov_corpus, repeated_sentence_corpus, windows
from .errors import ConfigError
from .providers.toy import NGramLM, fit_toy_lm


@dataclass
class Benchmark:
    name: str
    provider: NGramLM
    prompts: list[list[int]]
    corpus: list[list[int]]


def loop_benchmark(n_prompts: int = 20, prompt_length: int = 32, seed: int = 7) -> Benchmark:
    sentence = markov_corpus(1, 600, vocab_size=512, branching=4, zipf=0.6,
                             terminator=None, seed=seed)[0]
    corpus = repeated_sentence_corpus(sentence, 200)
    lm = fit_toy_lm(corpus, order=3, smoothing=1.0)
    return Benchmark("loop", lm, windows(corpus, prompt_length, n_prompts, seed=1), corpus)


def markov_benchmark(n_prompts: int = 10, prompt_length: int = 32, seed: int = 0) -> Benchmark:
    docs = markov_corpus(200, 300, vocab_size=1024, branching=6, zipf=0.8,
                         terminator=0, seed=seed)
    train, test = docs[:180], docs[180:]
    lm = fit_toy_lm(train, order=3, smoothing=1.0, vocab_size=1024, terminator=0)
    return Benchmark("markov", lm, windows(test, prompt_length, n_prompts, seed=0), train)


BUILTINS = {"loop": loop_benchmark, "markov": markov_benchmark}


def builtin(name: str, **kwargs) -> Benchmark:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise ConfigError(f"unknown builtin benchmark {name!r}; choose from {sorted(BUILTINS)}") from None
    return factory(**kwargs)
