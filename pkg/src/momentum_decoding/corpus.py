"""Corpus and prompt loading, plus the synthetic corpora used for desk-scale runs."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FitError


@dataclass
class Corpus:
    docs: list[list[int]]
    strings: tuple[str, ...] | None = None
    terminator: int | None = None

    @property
    def vocab_size(self) -> int:
        if self.strings is not None:
            return len(self.strings)
        return max((max(d) for d in self.docs if d), default=-1) + 1


def read_token_lines(path: str | Path) -> list[list[int]]:
    """One document per line, whitespace-separated integer ids; blank lines skipped."""
    docs = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            docs.append([int(tok) for tok in line.split()])
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: expected integer token ids") from None
    return docs


def build_vocabulary(lines: Iterable[str], terminator: str = "<eod>") -> tuple[str, ...]:
    seen = {terminator: 0}
    for line in lines:
        for word in line.split():
            seen.setdefault(word, len(seen))
    return tuple(seen)


def encode_text(lines: Iterable[str], strings: Sequence[str]) -> list[list[int]]:
    lookup = {s: i for i, s in enumerate(strings)}
    docs = []
    for line in lines:
        if line.strip():
            try:
                docs.append([lookup[w] for w in line.split()])
            except KeyError as exc:
                raise ConfigError(f"word {exc} is not in the vocabulary") from None
    return docs


def load_corpus(path: str | Path, fmt: str = "ids", terminator: int | None = None) -> Corpus:
    """``ids``: integer lines.  ``text``: whitespace words, vocabulary built in
    first-seen order with ``<eod>`` at id 0 as the terminator."""
    if fmt == "ids":
        docs = read_token_lines(path)
        if not docs:
            raise FitError(f"{path} holds no documents")
        return Corpus(docs, terminator=terminator)
    if fmt == "text":
        lines = Path(path).read_text().splitlines()
        strings = build_vocabulary(lines)
        docs = encode_text(lines, strings)
        if not docs:
            raise FitError(f"{path} holds no documents")
        return Corpus(docs, strings=strings, terminator=0)
    raise ConfigError(f"unknown corpus format {fmt!r}")


def repeated_sentence_corpus(sentence: Sequence[int], repeats: int = 200) -> list[list[int]]:
    """A single document: ``sentence`` repeated ``repeats`` times."""
    return [list(sentence) * repeats]


def markov_corpus(n_docs: int = 200, doc_len: int = 300, vocab_size: int = 1024,
                  branching: int = 6, zipf: float = 1.1, terminator: int | None = 0,
                  seed: int = 0) -> list[list[int]]:
    """Documents from a random sparse first-order chain with Zipfian targets.

    Each token has ``branching`` successors drawn from a Zipf-like popularity
    profile, with Dirichlet transition weights, so frequent tokens recur and a
    fitted model has peaked distributions that greedy decoding loops on.
    """
    rng = np.random.default_rng(seed)
    first = 1 if terminator == 0 else 0
    ids = np.arange(first, vocab_size)
    popularity = 1.0 / np.arange(1, ids.size + 1) ** zipf
    popularity /= popularity.sum()
    successors = np.stack([rng.choice(ids, size=branching, replace=False, p=popularity)
                           for _ in range(vocab_size)])
    weights = rng.dirichlet(np.full(branching, 0.5), size=vocab_size)
    docs = []
    for _ in range(n_docs):
        tok = int(rng.choice(ids, p=popularity))
        doc = [tok]
        for _ in range(doc_len - 1):
            tok = int(successors[tok, rng.choice(branching, p=weights[tok])])
            doc.append(tok)
        docs.append(doc)
    return docs


def windows(docs: Sequence[Sequence[int]], length: int, count: int, seed: int = 0) -> list[list[int]]:
    """``count`` random contiguous windows of ``length`` tokens, reproducible by seed."""
    rng = np.random.default_rng(seed)
    eligible = [d for d in docs if len(d) >= length]
    if not eligible:
        raise ConfigError(f"no document is {length} tokens long")
    out = []
    for _ in range(count):
        doc = eligible[int(rng.integers(len(eligible)))]
        start = int(rng.integers(len(doc) - length + 1))
        out.append(list(doc[start:start + length]))
    return out
