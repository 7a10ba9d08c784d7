"""Table-driven provider for tests and hand-built scenarios."""

from __future__ import annotations

import json
from collections.abc import Callable, Mapping, Sequence
from pathlib import Path
from typing import Any, Union

import numpy as np

from ..errors import ConfigError, ProviderError
from .base import ProbDist, Provider, Vocabulary

DistSpec = Union[ProbDist, Mapping[int, float], Sequence[float]]


class ScriptedProvider(Provider):
    """Returns programmed distributions keyed by context.

    Lookup tries the full context, then successively shorter suffixes, then
    ``fallback`` (a spec or a callable of the context).  Anything else is a
    ``ProviderError``.
    """

    def __init__(
        self,
        vocab_size: int,
        table: Mapping[Sequence[int], DistSpec] | None = None,
        fallback: DistSpec | Callable[[tuple[int, ...]], DistSpec] | None = None,
        representations: Mapping[Sequence[int], Sequence[float]] | None = None,
        terminator: int | None = None,
        bos: int | None = None,
    ) -> None:
        self.vocab = Vocabulary(vocab_size, terminator=terminator, bos=bos)
        self._table = {tuple(k): self._coerce(v) for k, v in (table or {}).items()}
        self._fallback = fallback if callable(fallback) else (
            None if fallback is None else self._coerce(fallback))
        self._reps = {tuple(k): np.asarray(v, dtype=np.float64)
                      for k, v in (representations or {}).items()}
        self.calls = 0

    def _coerce(self, spec: DistSpec) -> ProbDist:
        if isinstance(spec, ProbDist):
            dist = spec
        elif isinstance(spec, Mapping):
            dist = ProbDist.from_mapping(spec, self.vocab.size)
        else:
            dist = ProbDist(spec)
        if dist.vocab_size != self.vocab.size:
            raise ConfigError(f"scripted distribution has {dist.vocab_size} entries, "
                              f"vocabulary has {self.vocab.size}")
        return dist

    def next_distribution(self, context: Sequence[int]) -> ProbDist:
        self.calls += 1
        ctx = tuple(self._start(context))
        for start in range(len(ctx) + 1):
            dist = self._table.get(ctx[start:])
            if dist is not None:
                return dist
        if self._fallback is None:
            raise ProviderError(f"no scripted distribution for context {list(ctx)}")
        if callable(self._fallback):
            return self._coerce(self._fallback(ctx))
        return self._fallback

    @property
    def supports_representation(self) -> bool:
        return bool(self._reps)

    def representation(self, context: Sequence[int]) -> np.ndarray:
        if not self._reps:
            return super().representation(context)
        try:
            return self._reps[tuple(context)]
        except KeyError:
            raise ProviderError(f"no scripted representation for {list(context)}") from None

    def describe(self) -> str:
        return f"scripted(V={self.vocab.size}, entries={len(self._table)})"

    @classmethod
    def from_file(cls, path: str | Path) -> ScriptedProvider:
        """Load the JSON script format.

        ``{"vocab_size": V, "terminator": id|null, "table": [{"context": [...],
        "probs": {"id": p, ...}}], "default": {"id": p}|null,
        "representations": [{"context": [...], "vector": [...]}]}``
        """
        data: dict[str, Any] = json.loads(Path(path).read_text())
        V = int(data["vocab_size"])

        def dist(obj: Any) -> DistSpec:
            if isinstance(obj, dict):
                return {int(k): float(v) for k, v in obj.items()}
            return [float(v) for v in obj]

        table = {tuple(e["context"]): dist(e["probs"]) for e in data.get("table", [])}
        default = data.get("default")
        reps = {tuple(e["context"]): e["vector"] for e in data.get("representations", [])}
        return cls(V, table, None if default is None else dist(default), reps,
                   terminator=data.get("terminator"), bos=data.get("bos"))
