"""Configured language set and pivot designation.

Languages are plain string identifiers; everything language-specific
(type mappings, harness templates, toolchains) is keyed on them.
"""

from __future__ import annotations

from dataclasses import dataclass

DEFAULT_LANGUAGES: tuple[str, ...] = ("python", "cpp", "rust")
DEFAULT_PIVOT = "python"


@dataclass(frozen=True)
class LanguageSet:
    """The set of configured languages with exactly one designated pivot."""

    members: tuple[str, ...] = DEFAULT_LANGUAGES
    pivot: str = DEFAULT_PIVOT

    def __post_init__(self) -> None:
        if len(self.members) < 2:
            raise ValueError("language set needs at least 2 members")
        if len(set(self.members)) != len(self.members):
            raise ValueError("duplicate language in configured set")
        if self.pivot not in self.members:
            raise ValueError(f"pivot {self.pivot!r} not in configured set")

    def targets_for(self, source: str) -> tuple[str, ...]:
        """All members except `source`, in configured order."""
        if source not in self.members:
            raise ValueError(f"unknown language {source!r}")
        return tuple(lang for lang in self.members if lang != source)

    def directions(self) -> tuple[tuple[str, str], ...]:
        """Every ordered (source, target) pair in the configured set."""
        return tuple(
            (src, tgt) for src in self.members for tgt in self.members if src != tgt
        )
