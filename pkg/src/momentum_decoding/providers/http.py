"""Client for a remote model exposing ``POST /v1/logits``.

Request: ``{"context": [int, ...], "top_n": int | null}``.
Response: ``{"vocab_size": int, "entries": [{"id": int, "logprob": float}],
"complete": bool}`` with natural-log probabilities.  ``complete: true`` means
the entries cover the whole vocabulary.
"""

from __future__ import annotations

import math
import os
from collections.abc import Sequence
from typing import Any

import httpx
import numpy as np

from ..errors import MalformedResponseError, TransportError, VocabularyMismatchError
from .base import NORMALIZATION_TOL, ProbDist, Provider, Vocabulary

ENDPOINT_ENV = "MOMENTUM_LOGITS_ENDPOINT"
LOGITS_PATH = "/v1/logits"


def encode_request(context: Sequence[int], top_n: int | None) -> dict[str, Any]:
    return {"context": [int(t) for t in context], "top_n": top_n}


def decode_response(payload: Any, vocab_size: int | None = None) -> ProbDist:
    """Turn a response body into a distribution, or raise.

    Never truncates: a partial response yields a ``complete=False`` slice.
    """
    if not isinstance(payload, dict):
        raise MalformedResponseError("response body is not a JSON object")
    try:
        V = payload["vocab_size"]
        entries = payload["entries"]
        complete = payload["complete"]
    except KeyError as exc:
        raise MalformedResponseError(f"response missing field {exc}") from None
    if not isinstance(V, int) or V < 1 or not isinstance(entries, list) \
            or not isinstance(complete, bool):
        raise MalformedResponseError("response fields have the wrong types")
    if vocab_size is not None and V != vocab_size:
        raise VocabularyMismatchError(f"server vocabulary {V} != expected {vocab_size}")
    probs = np.zeros(V)
    seen = set()
    for e in entries:
        try:
            tid, lp = int(e["id"]), float(e["logprob"])
        except (KeyError, TypeError, ValueError):
            raise MalformedResponseError(f"bad entry {e!r}") from None
        if not 0 <= tid < V:
            raise VocabularyMismatchError(f"entry id {tid} outside vocabulary of size {V}")
        if tid in seen:
            raise MalformedResponseError(f"duplicate entry id {tid}")
        if math.isnan(lp) or lp > 1e-9:
            raise MalformedResponseError(f"invalid logprob {lp} for id {tid}")
        seen.add(tid)
        probs[tid] = math.exp(lp)
    if not entries:
        raise MalformedResponseError("response has no entries")
    if complete:
        if len(seen) != V:
            raise MalformedResponseError(f"complete response lists {len(seen)} of {V} ids")
        total = probs.sum()
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise MalformedResponseError(f"complete response mass {total} is not 1")
    try:
        return ProbDist(probs, complete=complete)
    except ValueError as exc:
        raise MalformedResponseError(str(exc)) from None


class HTTPProvider(Provider):
    """Thread-safe pooled client.  ``top_n=None`` asks for the full distribution."""

    def __init__(self, endpoint: str | None = None, vocab_size: int | None = None,
                 top_n: int | None = None, timeout: float = 30.0,
                 terminator: int | None = None, transport: httpx.BaseTransport | None = None) -> None:
        endpoint = endpoint or os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            raise TransportError(f"no endpoint given and ${ENDPOINT_ENV} is unset")
        self.endpoint = endpoint.rstrip("/")
        self.top_n = top_n
        self._client = httpx.Client(base_url=self.endpoint, timeout=timeout, transport=transport)
        if vocab_size is None:
            # one probe call fixes the vocabulary for the session
            vocab_size = self._fetch([0], vocab_size=None).vocab_size
        self.vocab = Vocabulary(vocab_size, terminator=terminator)

    def _fetch(self, context: Sequence[int], vocab_size: int | None) -> ProbDist:
        try:
            resp = self._client.post(LOGITS_PATH, json=encode_request(context, self.top_n))
        except httpx.HTTPError as exc:
            raise TransportError(f"request to {self.endpoint} failed: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(f"{self.endpoint} answered HTTP {resp.status_code}")
        try:
            payload = resp.json()
        except ValueError:
            raise MalformedResponseError("response body is not JSON") from None
        dist = decode_response(payload, vocab_size)
        if not dist.complete and self.top_n is not None and \
                np.count_nonzero(dist.probs) < min(self.top_n, dist.vocab_size):
            raise MalformedResponseError(
                f"sliced response has fewer than the requested top_n={self.top_n} entries")
        return dist

    def next_distribution(self, context: Sequence[int]) -> ProbDist:
        return self._fetch(self._start(context), self.vocab.size)

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> HTTPProvider:
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    def describe(self) -> str:
        return f"http({self.endpoint}, top_n={self.top_n})"
