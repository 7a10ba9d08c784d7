"""Distribution-provider contract and the distribution helpers decoders share.

Ordering everywhere is "higher probability first, then lower token id".
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from collections.abc import Iterator, Sequence
from dataclasses import dataclass

import numpy as np

from ..errors import CapabilityError, ConfigError

NORMALIZATION_TOL = 1e-6


@dataclass(frozen=True)
class Vocabulary:
    size: int
    terminator: int | None = None
    bos: int | None = None
    strings: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ConfigError("vocabulary size must be positive")
        for name in ("terminator", "bos"):
            tid = getattr(self, name)
            if tid is not None and not 0 <= tid < self.size:
                raise ConfigError(f"{name} id {tid} outside vocabulary of size {self.size}")
        if self.strings is not None and len(self.strings) != self.size:
            raise ConfigError("surface strings must cover every id")

    def surface(self, token: int) -> str:
        return self.strings[token] if self.strings else str(token)

    def lookup(self) -> dict[str, int]:
        if self.strings is None:
            raise CapabilityError("vocabulary has no surface strings")
        return {s: i for i, s in enumerate(self.strings)}


class ProbDist:
    """Next-token distribution over a dense vocabulary.

    ``complete=False`` marks a slice: only the listed top entries are known
    and the remaining ids carry 0. Decoders that need full support must check
    ``complete`` (or ``known_mass``) before relying on the tail.
    """

    __slots__ = ("probs", "complete")

    def __init__(self, probs: np.ndarray | Sequence[float], complete: bool = True,
                 validate: bool = True) -> None:
        self.probs = np.asarray(probs, dtype=np.float64)
        self.complete = complete
        if validate:
            self.validate()

    def validate(self) -> None:
        p = self.probs
        if p.ndim != 1 or p.size == 0:
            raise ValueError("distribution must be a nonempty vector")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("distribution entries must be finite and nonnegative")
        total = float(p.sum())
        if self.complete:
            if abs(total - 1.0) > NORMALIZATION_TOL:
                raise ValueError(f"distribution sums to {total}, not 1")
        elif total > 1.0 + NORMALIZATION_TOL:
            raise ValueError(f"partial distribution mass {total} exceeds 1")

    @classmethod
    def from_mapping(cls, mapping: dict[int, float], vocab_size: int) -> ProbDist:
        p = np.zeros(vocab_size)
        for token, prob in mapping.items():
            p[int(token)] = prob
        return cls(p)

    @classmethod
    def from_logits(cls, logits: Sequence[float]) -> ProbDist:
        z = np.asarray(logits, dtype=np.float64)
        z = np.exp(z - z.max())
        return cls(z / z.sum())

    @property
    def vocab_size(self) -> int:
        return self.probs.size

    @property
    def known_mass(self) -> float:
        return float(self.probs.sum())

    def __getitem__(self, token: int) -> float:
        return float(self.probs[token])

    def logprob(self, token: int) -> float:
        p = self.probs[token]
        return math.log(p) if p > 0 else -math.inf

    def argmax(self) -> int:
        # np.argmax returns the first maximum, i.e. the lowest id among ties
        return int(np.argmax(self.probs))


@dataclass(frozen=True)
class CandidateSet:
    tokens: tuple[int, ...]
    probs: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[tuple[int, float]]:
        return iter(zip(self.tokens, self.probs))

    @property
    def mass(self) -> float:
        return math.fsum(self.probs)


def _ordered(p: np.ndarray, idx: np.ndarray) -> np.ndarray:
    # lexsort: last key is primary
    return idx[np.lexsort((idx, -p[idx]))]


def top_k_candidates(dist: ProbDist, k: int) -> CandidateSet:
    p = dist.probs
    V = p.size
    if not 1 <= k <= V:
        raise ConfigError(f"top_k={k} outside [1, {V}]")
    if not dist.complete and k > np.count_nonzero(p):
        raise CapabilityError(f"sliced distribution holds fewer than k={k} entries")
    if k == V:
        idx = _ordered(p, np.arange(V))
        return CandidateSet(tuple(idx.tolist()), tuple(p[idx].tolist()))
    threshold = np.partition(p, V - k)[V - k]
    part = np.flatnonzero(p >= threshold)
    if part.size > k:
        # the cut falls inside a tie; keep the lowest tied ids
        above = np.flatnonzero(p > threshold)
        ties = np.flatnonzero(p == threshold)[: k - above.size]
        part = np.concatenate([above, ties])
    pairs = sorted(zip(p[part].tolist(), part.tolist()), key=lambda t: (-t[0], t[1]))
    return CandidateSet(tuple(t for _, t in pairs), tuple(q for q, _ in pairs))


def nucleus_set(dist: ProbDist, p: float) -> CandidateSet:
    """Smallest probability-ordered prefix whose mass reaches ``p``."""
    if not 0 < p <= 1:
        raise ConfigError(f"nucleus p={p} outside (0, 1]")
    probs = dist.probs
    support = np.flatnonzero(probs > 0)
    order = _ordered(probs, support)
    cum = np.cumsum(probs[order])
    # a hair of slack so p=1.0 is reachable despite rounding in the cumsum
    hits = np.flatnonzero(cum >= p - 1e-12)
    if hits.size == 0:
        if not dist.complete:
            raise CapabilityError(
                f"sliced distribution mass {cum[-1] if cum.size else 0.0:.6f} is below nucleus p={p}")
        hits = np.array([order.size - 1])
    order = order[: hits[0] + 1]
    return CandidateSet(tuple(order.tolist()), tuple(probs[order].tolist()))


class Provider(ABC):
    """Stand-in for the language model: context in, next-token distribution out."""

    vocab: Vocabulary

    @property
    def vocab_size(self) -> int:
        return self.vocab.size

    @property
    def terminator(self) -> int | None:
        return self.vocab.terminator

    @abstractmethod
    def next_distribution(self, context: Sequence[int]) -> ProbDist:
        ...

    @property
    def supports_representation(self) -> bool:
        return False

    def representation(self, context: Sequence[int]) -> np.ndarray:
        raise CapabilityError(f"{type(self).__name__} does not expose representations")

    def _start(self, context: Sequence[int]) -> Sequence[int]:
        if len(context) == 0:
            if self.vocab.bos is None:
                raise ValueError("empty context and no begin-of-sequence token")
            return (self.vocab.bos,)
        return context

    def describe(self) -> str:
        return type(self).__name__


class UniformProvider(Provider):
    def __init__(self, vocab_size: int, terminator: int | None = None) -> None:
        self.vocab = Vocabulary(vocab_size, terminator=terminator)
        self._dist = ProbDist(np.full(vocab_size, 1.0 / vocab_size))

    def next_distribution(self, context: Sequence[int]) -> ProbDist:
        return self._dist

    def describe(self) -> str:
        return f"uniform(V={self.vocab.size})"
