from .base import (
    CandidateSet,
    ProbDist,
    Provider,
    UniformProvider,
    Vocabulary,
    nucleus_set,
    top_k_candidates,
)
from .http import HTTPProvider, decode_response, encode_request
from .scripted import ScriptedProvider
from .toy import NGramLM, fit_toy_lm

__all__ = [
    "CandidateSet",
    "HTTPProvider",
    "NGramLM",
    "ProbDist",
    "Provider",
    "ScriptedProvider",
    "UniformProvider",
    "Vocabulary",
    "decode_response",
    "encode_request",
    "fit_toy_lm",
    "nucleus_set",
    "top_k_candidates",
]
