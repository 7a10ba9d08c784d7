"""Resistance look-up tables and decoder hyperparameters."""

from __future__ import annotations

from bisect import bisect_right
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import Any

from .errors import ConfigError


@dataclass(frozen=True)
class ResistanceTable:
    """Step function from circular depth to resistance.

    ``entries`` are ``(depth, value)`` pairs sorted by depth; a depth takes the
    value of the largest threshold not exceeding it, and every depth at or
    beyond ``cap_depth`` shares the cap entry's value.  Depth 0 (a token not yet
    in the sequence) maps to ``zero_depth_value``.
    """

    entries: tuple[tuple[int, float], ...]
    cap_depth: int
    zero_depth_value: float = 0.0

    def __post_init__(self) -> None:
        if not self.entries:
            raise ConfigError("resistance table needs at least one entry")
        depths = [d for d, _ in self.entries]
        if depths != sorted(set(depths)) or depths[0] != 1:
            raise ConfigError("resistance depths must be strictly increasing and start at 1")
        if any(v < 0 for _, v in self.entries) or self.zero_depth_value < 0:
            raise ConfigError("resistance values must be nonnegative")
        if self.cap_depth < depths[-1]:
            raise ConfigError("cap_depth must be >= the largest listed depth")
        object.__setattr__(self, "_depths", tuple(depths))

    def __call__(self, depth: int) -> float:
        return resistance(self, depth)

    def is_monotone(self) -> bool:
        values = [self.zero_depth_value] + [v for _, v in self.entries]
        return all(a <= b for a, b in zip(values, values[1:]))

    def to_dict(self) -> dict[str, Any]:
        return {
            "table": [[d, v] for d, v in self.entries],
            "cap_depth": self.cap_depth,
            "zero_depth_value": self.zero_depth_value,
        }

    @classmethod
    def from_pairs(cls, pairs: Iterable[Iterable[float]], cap_depth: int | None = None,
                   zero_depth_value: float = 0.0) -> ResistanceTable:
        entries = tuple(sorted((int(d), float(v)) for d, v in pairs))
        if cap_depth is None:
            cap_depth = entries[-1][0] if entries else 1
        return cls(entries, int(cap_depth), float(zero_depth_value))

    @classmethod
    def from_config(cls, section: Mapping[str, Any] | None) -> ResistanceTable:
        """Build from a config ``resistance`` section; ``None`` gives the default."""
        if not section:
            return DEFAULT_TABLE
        if "constant" in section:
            return constant_table(float(section["constant"]))
        try:
            pairs = section["table"]
        except KeyError:
            raise ConfigError("resistance section needs 'table' or 'constant'") from None
        return cls.from_pairs(pairs, section.get("cap_depth"),
                              section.get("zero_depth_value", 0.0))


def resistance(table: ResistanceTable, depth: int) -> float:
    if depth < 0:
        raise ValueError(f"depth must be nonnegative, got {depth}")
    if depth == 0:
        return table.zero_depth_value
    depth = min(depth, table.cap_depth)
    i = bisect_right(table._depths, depth) - 1  # type: ignore[attr-defined]
    return table.entries[i][1]


DEFAULT_TABLE = ResistanceTable(((1, 1.0), (2, 3.0), (3, 4.0), (4, 5.0)), cap_depth=4)


def constant_table(value: float) -> ResistanceTable:
    """Every in-sequence depth gets ``value``; novel tokens still get 0."""
    if value < 0:
        raise ConfigError(f"constant resistance must be nonnegative, got {value}")
    return ResistanceTable(((1, float(value)),), cap_depth=1)


@dataclass(frozen=True)
class DecoderConfig:
    alpha: float = 0.2
    top_k: int = 5
    max_steps: int = 256
    beam_width: int = 4
    nucleus_p: float = 0.95
    cs_alpha: float = 0.6
    seed: int = 0
    resistance: ResistanceTable = field(default=DEFAULT_TABLE)

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if self.beam_width < 1:
            raise ConfigError("beam_width must be >= 1")
        if not 0 < self.nucleus_p <= 1:
            raise ConfigError("nucleus_p must lie in (0, 1]")
        if not 0 <= self.cs_alpha <= 1:
            raise ConfigError("cs_alpha must lie in [0, 1]")

    def replace(self, **changes: Any) -> DecoderConfig:
        from dataclasses import replace

        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return {
            "alpha": self.alpha,
            "top_k": self.top_k,
            "max_steps": self.max_steps,
            "beam_width": self.beam_width,
            "nucleus_p": self.nucleus_p,
            "cs_alpha": self.cs_alpha,
            "seed": self.seed,
            "resistance": self.resistance.to_dict(),
        }

    @classmethod
    def from_config(cls, section: Mapping[str, Any] | None,
                    resistance_section: Mapping[str, Any] | None = None) -> DecoderConfig:
        section = dict(section or {})
        known = {"alpha", "top_k", "max_steps", "beam_width", "nucleus_p", "cs_alpha", "seed"}
        unknown = set(section) - known
        if unknown:
            raise ConfigError(f"unknown decoder keys: {sorted(unknown)}")
        casts = {"top_k": int, "max_steps": int, "beam_width": int, "seed": int}
        kwargs = {k: casts.get(k, float)(v) for k, v in section.items()}
        return cls(resistance=ResistanceTable.from_config(resistance_section), **kwargs)
