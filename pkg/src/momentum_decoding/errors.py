"""Exception hierarchy.  ``exit_code`` is what the CLI returns for each kind."""

from __future__ import annotations


class MomentumError(Exception):
    exit_code = 1


class ConfigError(MomentumError, ValueError):
    exit_code = 2


class FitError(MomentumError, ValueError):
    exit_code = 3


class CapabilityError(MomentumError):
    """Provider lacks a feature a decoder needs (representations, full support)."""

    exit_code = 4


class ProviderError(MomentumError):
    exit_code = 10


class TransportError(ProviderError):
    exit_code = 11


class MalformedResponseError(ProviderError):
    exit_code = 12


class VocabularyMismatchError(ProviderError):
    exit_code = 13


class GenerationError(MomentumError):
    """A step failed mid-generation; ``record`` holds what was produced so far."""

    exit_code = 20

    def __init__(self, message: str, record=None) -> None:
        super().__init__(message)
        self.record = record
