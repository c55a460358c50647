"""Segment raw report text into named sections.

A heading is recognised only at the start of a line (leading spaces/tabs
allowed), case-insensitively, and must be followed by a colon or by the end of
the line. Headings unknown to the layout are treated as ordinary body text.
"""

from __future__ import annotations

import re
from collections.abc import Mapping
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import yaml

from radcotrain.corpus import FINDINGS, IMPRESSION, Report
from radcotrain.errors import ConfigError, ReportParseError

DEFAULT_HEADINGS = ("HISTORY", "TECHNIQUE", FINDINGS, IMPRESSION)

DEFAULT_ALIASES = {
    "CLINICAL HISTORY": "HISTORY",
    "INDICATION": "HISTORY",
    "CLINICAL INDICATION": "HISTORY",
    "PROCEDURE": "TECHNIQUE",
    "OBSERVATIONS": "FINDINGS",
    "CONCLUSION": "IMPRESSION",
    "IMPRESSIONS": "IMPRESSION",
    "OPINION": "IMPRESSION",
}


def _norm(name: str) -> str:
    return " ".join(str(name).split()).upper()


@dataclass(frozen=True)
class SectionLayout:
    """Canonical heading names plus a many-to-one alias table."""

    headings: tuple[str, ...] = DEFAULT_HEADINGS
    aliases: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_ALIASES))

    def __post_init__(self):
        headings = tuple(_norm(h) for h in self.headings)
        for required in (FINDINGS, IMPRESSION):
            if required not in headings:
                raise ConfigError(f"layout must include {required}")
        aliases = {}
        for variant, canonical in self.aliases.items():
            canonical = _norm(canonical)
            if canonical not in headings:
                raise ConfigError(f"alias {variant!r} points at unknown heading {canonical!r}")
            aliases[_norm(variant)] = canonical
        object.__setattr__(self, "headings", headings)
        object.__setattr__(self, "aliases", aliases)

    def canonical(self, name: str) -> str | None:
        key = _norm(name)
        if key in self.headings:
            return key
        return self.aliases.get(key)

    def with_aliases(self, extra: Mapping[str, str]) -> SectionLayout:
        return SectionLayout(self.headings, {**self.aliases, **extra})

    @cached_property
    def pattern(self) -> re.Pattern:
        names = sorted({*self.headings, *self.aliases}, key=lambda s: (-len(s), s))
        alternatives = "|".join(r"[ \t]+".join(map(re.escape, n.split())) for n in names)
        return re.compile(
            rf"^[ \t]*(?P<name>{alternatives})[ \t]*(?::|(?=\r?\n|\Z))",
            re.IGNORECASE | re.MULTILINE,
        )

    @classmethod
    def from_file(cls, path: str | Path) -> SectionLayout:
        """Load ``headings``/``aliases`` from a YAML (or JSON) file.

        Aliases in the file extend the built-in table rather than replacing it.
        """
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        headings = data.get("headings", DEFAULT_HEADINGS)
        aliases = {**DEFAULT_ALIASES, **(data.get("aliases") or {})}
        return cls(tuple(headings), aliases)


DEFAULT_LAYOUT = SectionLayout()


@dataclass(frozen=True)
class Segment:
    """A slice of the raw text. ``name`` is None for text before the first heading."""

    name: str | None
    offset: int
    heading: str
    body: str


def detect_headings(raw: str, layout: SectionLayout = DEFAULT_LAYOUT) -> list[tuple[str, int]]:
    """(canonical name, character offset) of every heading, in document order."""
    return [(layout.canonical(m.group("name")), m.start()) for m in layout.pattern.finditer(raw)]


def segment(raw: str, layout: SectionLayout = DEFAULT_LAYOUT) -> list[Segment]:
    """Lossless split: ``"".join(s.heading + s.body for s in segment(raw))`` is ``raw``."""
    matches = list(layout.pattern.finditer(raw))
    segments = []
    first = matches[0].start() if matches else len(raw)
    if first > 0:
        segments.append(Segment(None, 0, "", raw[:first]))
    for m, nxt in zip(matches, matches[1:] + [None]):
        end = nxt.start() if nxt is not None else len(raw)
        segments.append(Segment(layout.canonical(m.group("name")), m.start(), m.group(0), raw[m.end():end]))
    return segments


def _trim_body(body: str) -> str:
    return body.strip()


def parse_report(raw: str, layout: SectionLayout = DEFAULT_LAYOUT, id: str = "report") -> Report:
    """Build a :class:`Report` from raw text.

    Every recognised section is kept; the FINDINGS and IMPRESSION bodies become
    the two views. Raises :class:`ReportParseError` when either is absent or
    empty, or when a canonical heading occurs twice.
    """
    if not raw or not raw.strip():
        raise ReportParseError("empty report", report_id=id)
    sections: dict[str, str] = {}
    for seg in segment(raw, layout):
        if seg.name is None:
            continue
        if seg.name in sections:
            raise ReportParseError(f"duplicate section {seg.name}", report_id=id)
        sections[seg.name] = _trim_body(seg.body)
    for required in (FINDINGS, IMPRESSION):
        if required not in sections:
            raise ReportParseError(f"missing section {required}", report_id=id)
        if not sections[required]:
            raise ReportParseError(f"empty section {required}", report_id=id)
    return Report(id, sections)


def format_report(sections: Mapping[str, str]) -> str:
    """Render sections as ``NAME:\\nbody`` blocks; the inverse of :func:`parse_report`."""
    return "\n\n".join(f"{name}:\n{body}" for name, body in sections.items()) + "\n"
