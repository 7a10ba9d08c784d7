"""Additive-smoothed back-off n-gram model used as a desk-scale language model."""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable, Sequence

import numpy as np

from ..errors import ConfigError, FitError
from .base import ProbDist, Provider, Vocabulary


class NGramLM(Provider):
    """Order-``n`` n-gram model with additive smoothing and back-off.

    ``prior="backoff"`` (default) smooths each level toward the level below:
    ``p(u | c) = (count(c, u) + λV·p(u | c')) / (count(c) + λV)`` where ``c'``
    drops the oldest token of ``c`` and the recursion bottoms out at the
    uniform distribution, so order 1 is plain ``(count + λ) / (N + λV)``.
    ``prior="uniform"`` applies ``(count(c, u) + λ) / (count(c) + λV)`` at the
    longest seen suffix only.  Either way unseen contexts back off to the
    longest suffix seen in fitting, and the empty context is always seen.

    Representations are means of co-occurrence embeddings over the last
    ``rep_window`` tokens; the embeddings are a truncated SVD of the
    log-scaled symmetric co-occurrence matrix, computed on first use.
    """

    def __init__(self, order: int, smoothing: float, vocab: Vocabulary,
                 tables: list[dict[tuple[int, ...], tuple[np.ndarray, np.ndarray, float]]],
                 cooccurrence: Counter[tuple[int, int]],
                 rep_dim: int = 32, rep_window: int = 4, prior: str = "backoff") -> None:
        if prior not in ("backoff", "uniform"):
            raise ConfigError(f"unknown smoothing prior {prior!r}")
        self.prior = prior
        self.order = order
        self.smoothing = smoothing
        self.vocab = vocab
        self._tables = tables
        self._cooc = cooccurrence
        self.rep_dim = min(rep_dim, vocab.size)
        self.rep_window = rep_window
        self._embeddings: np.ndarray | None = None

    def describe(self) -> str:
        return (f"ngram(order={self.order}, smoothing={self.smoothing}, "
                f"prior={self.prior}, V={self.vocab.size})")

    def _entries(self, context: Sequence[int]) -> list[tuple[np.ndarray, np.ndarray, float]]:
        """Count entries for the seen suffixes of ``context``, shortest first."""
        out = []
        for length in range(min(self.order - 1, len(context)) + 1):
            key = tuple(context[len(context) - length:]) if length else ()
            entry = self._tables[length].get(key)
            if entry is None:
                # a longer suffix contains this one, so it is unseen too
                break
            out.append(entry)
        return out

    def next_distribution(self, context: Sequence[int]) -> ProbDist:
        if self.vocab.bos is not None:
            context = self._start(context)
        V = self.vocab.size
        lam_v = self.smoothing * V
        entries = self._entries(context)
        if self.prior == "uniform":
            entries = entries[-1:]
        probs = np.full(V, 1.0 / V)
        for ids, counts, total in entries:
            probs *= lam_v
            probs[ids] += counts
            probs /= total + lam_v
        return ProbDist(probs, validate=False)

    def count(self, context: Sequence[int], token: int) -> int:
        """Raw count of ``token`` after exactly ``context`` (0 if unseen)."""
        entry = self._tables[len(context)].get(tuple(context)) if len(context) < self.order else None
        if entry is None:
            return 0
        ids, counts, _ = entry
        hit = np.flatnonzero(ids == token)
        return int(counts[hit[0]]) if hit.size else 0

    @property
    def supports_representation(self) -> bool:
        return True

    @property
    def embeddings(self) -> np.ndarray:
        if self._embeddings is None:
            V = self.vocab.size
            m = np.zeros((V, V))
            for (a, b), c in self._cooc.items():
                m[a, b] += c
            m = np.log1p(m)
            u, s, _ = np.linalg.svd(m, hermitian=True)
            emb = u[:, : self.rep_dim] * s[: self.rep_dim]
            # fix the SVD sign ambiguity so embeddings are reproducible
            pivot = np.argmax(np.abs(emb), axis=0)
            signs = np.sign(emb[pivot, np.arange(emb.shape[1])])
            signs[signs == 0] = 1.0
            self._embeddings = emb * signs
        return self._embeddings

    def representation(self, context: Sequence[int]) -> np.ndarray:
        if len(context) == 0:
            return np.zeros(self.rep_dim)
        window = list(context[-self.rep_window:])
        return self.embeddings[window].mean(axis=0)


def fit_toy_lm(
    corpus: Iterable[Sequence[int]],
    order: int = 3,
    smoothing: float = 1.0,
    vocab_size: int | None = None,
    terminator: int | None = None,
    strings: Sequence[str] | None = None,
    append_terminator: bool = True,
    rep_dim: int = 32,
    rep_window: int = 4,
    cooccurrence_window: int = 2,
    prior: str = "backoff",
) -> NGramLM:
    if order < 1:
        raise ConfigError("order must be >= 1")
    if smoothing <= 0:
        raise ConfigError("smoothing must be > 0")
    docs = [list(map(int, d)) for d in corpus]
    docs = [d for d in docs if d]
    if not docs:
        raise FitError("cannot fit on an empty corpus")
    if terminator is not None and append_terminator:
        docs = [d if d[-1] == terminator else d + [terminator] for d in docs]
    max_id = max(max(d) for d in docs)
    if min(min(d) for d in docs) < 0:
        raise FitError("token ids must be nonnegative")
    V = vocab_size if vocab_size is not None else max_id + 1
    if max_id >= V:
        raise FitError(f"corpus uses id {max_id} but vocab_size is {V}")
    vocab = Vocabulary(V, terminator=terminator,
                       strings=tuple(strings) if strings is not None else None)

    raw: list[dict[tuple[int, ...], Counter[int]]] = [dict() for _ in range(order)]
    cooc: Counter[tuple[int, int]] = Counter()
    for doc in docs:
        for i, tok in enumerate(doc):
            for length in range(min(order - 1, i) + 1):
                key = tuple(doc[i - length:i])
                raw[length].setdefault(key, Counter())[tok] += 1
            for j in range(max(0, i - cooccurrence_window), i):
                cooc[(doc[j], tok)] += 1
                cooc[(tok, doc[j])] += 1

    tables = []
    for level in raw:
        frozen = {}
        for key, ctr in level.items():
            ids = np.fromiter(ctr.keys(), dtype=np.int64, count=len(ctr))
            counts = np.fromiter(ctr.values(), dtype=np.float64, count=len(ctr))
            frozen[key] = (ids, counts, float(counts.sum()))
        tables.append(frozen)
    return NGramLM(order, smoothing, vocab, tables, cooc, rep_dim, rep_window, prior)
