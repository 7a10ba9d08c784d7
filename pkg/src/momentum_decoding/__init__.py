"""Momentum decoding and baseline decoders over pluggable next-token providers."""

from __future__ import annotations

from .decoders import (
    STRATEGIES,
    CandidateScore,
    GenerationRecord,
    StepTrace,
    generate,
    momentum_scores,
    replay_record,
    step_momentum,
)
from .errors import (
    CapabilityError,
    ConfigError,
    FitError,
    GenerationError,
    MalformedResponseError,
    MomentumError,
    ProviderError,
    TransportError,
    VocabularyMismatchError,
)
from .metrics import coherence, corpus_ngram_stats, diversity, evaluate, greedy_ratio, rep_n
from .providers import (
    HTTPProvider,
    NGramLM,
    ProbDist,
    Provider,
    ScriptedProvider,
    UniformProvider,
    fit_toy_lm,
    nucleus_set,
    top_k_candidates,
)
from .resistance import DEFAULT_TABLE, DecoderConfig, ResistanceTable, constant_table, resistance
from .sequence_index import OccurrenceIndex, circular_depth

__all__ = [
    "DEFAULT_TABLE", "STRATEGIES", "CandidateScore", "CapabilityError", "ConfigError",
    "DecoderConfig", "FitError", "GenerationError", "GenerationRecord", "HTTPProvider",
    "MalformedResponseError", "MomentumError", "NGramLM", "OccurrenceIndex", "ProbDist",
    "Provider", "ProviderError", "ResistanceTable", "ScriptedProvider", "StepTrace",
    "TransportError", "UniformProvider", "VocabularyMismatchError", "circular_depth",
    "coherence", "constant_table", "corpus_ngram_stats", "diversity", "evaluate",
    "fit_toy_lm", "generate", "greedy_ratio", "momentum_scores", "nucleus_set", "rep_n",
    "replay_record", "resistance", "step_momentum", "top_k_candidates",
]
